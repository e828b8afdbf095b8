use serde::Serialize;
use std::collections::HashMap;

use super::chain::{build_chains, field_heading, Chain};
use super::circle::{detect_on_chain, fit_center_fixed_radius, fit_circle_geometric, grow_with_slack, signed_sweep, snap_radius, validate_run};
use super::{
    fit_clothoid_g1, hough_lines, spiral_transition, visvalingam_whyatt_indices, ArcSegmentFit, ClothoidSegmentFit, FitConfig, FitError,
    LineSegmentFit, SegmentFit,
};
use crate::geom::{fit_line, point_segment_distance, wrap_pi, Point2};
use crate::raster::DistanceField;
use crate::skeleton::{Pixel, Skeleton, SkeletonGraph};

/// Fitted elements of one chain, in traversal order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainFit {
    pub branch_ids: Vec<usize>,
    pub principal: bool,
    pub length_m: f64,
    pub fits: Vec<SegmentFit>,
    /// Chain pixels attributed to each fit.
    pub pixel_counts: Vec<usize>,
}

/// Skeleton pixels that were not turned into geometry, and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipRecord {
    pub reason: String,
    pub pixels: Vec<Pixel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOutcome {
    pub chains: Vec<ChainFit>,
    pub skipped: Vec<SkipRecord>,
    pub hough_lines: usize,
    pub circles: usize,
}

impl FitOutcome {
    pub fn principal(&self) -> Option<&ChainFit> {
        self.chains.iter().find(|c| c.principal)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.skipped
            .iter()
            .map(|s| format!("{} ({} px)", s.reason, s.pixels.len()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Line { c: Point2, u: Point2 },
    Arc { center: Point2, r: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Elem {
    lo: usize,
    hi: usize,
    kind: Kind,
}

fn line_residual(chain: &Chain, k: usize, c: Point2, u: Point2) -> f64 {
    (chain.smooth[k] - c).cross(u).abs()
}

/// Trims `[lo, hi]` until both ends fit the TLS line within `tol`, at least
/// 90 % of the points do and none is further than `3·tol`, then grows it
/// while neighbours stay within `tol` (short outlier runs allowed).
fn refine_line(chain: &Chain, lo: usize, hi: usize, tol: f64, slack: f64) -> Option<(usize, usize, Point2, Point2)> {
    let (mut lo, mut hi) = (lo, hi);
    loop {
        if hi < lo + 2 {
            return None;
        }
        let (c, u) = fit_line(&chain.smooth[lo..=hi])?;
        let res = |k: usize| line_residual(chain, k, c, u);
        if res(lo) > tol || res(hi) > tol {
            while lo < hi && res(lo) > tol {
                lo += 1;
            }
            while hi > lo && res(hi) > tol {
                hi -= 1;
            }
            continue;
        }
        let (kw, dw) = (lo..=hi).map(|k| (k, res(k))).max_by(|a, b| a.1.total_cmp(&b.1))?;
        let outliers = (lo..=hi).filter(|&k| res(k) > tol).count();
        if dw <= 3.0 * tol && outliers * 10 <= hi - lo + 1 {
            break;
        }
        if kw - lo < hi - kw {
            lo = kw + 1;
        } else {
            hi = kw.checked_sub(1)?;
        }
    }
    for _ in 0..4 {
        let (c, u) = fit_line(&chain.smooth[lo..=hi])?;
        let grown = grow_with_slack(chain, lo, hi, slack, |k| line_residual(chain, k, c, u) <= tol);
        if grown == (lo, hi) {
            break;
        }
        (lo, hi) = grown;
    }
    let (c, u) = fit_line(&chain.smooth[lo..=hi])?;
    Some((lo, hi, c, u))
}

/// Heading change between the first and last quarter of a run.
fn turn(chain: &Chain, lo: usize, hi: usize) -> f64 {
    let q = ((hi - lo) / 4).max(2);
    let a = fit_line(&chain.smooth[lo..=(lo + q).min(hi)]);
    let b = fit_line(&chain.smooth[hi.saturating_sub(q).max(lo)..=hi]);
    match (a, b) {
        (Some((_, ua)), Some((_, ub))) => ua.cross(ub).abs().min(1.0).asin(),
        _ => 0.0,
    }
}

fn accept_line(chain: &Chain, lo: usize, hi: usize, cfg: &FitConfig) -> Option<Elem> {
    let (lo, hi, c, u) = refine_line(chain, lo, hi, cfg.fit_tolerance_m, cfg.hough_line.max_gap_m)?;
    (chain.span(lo, hi) >= cfg.hough_line.min_length_m && turn(chain, lo, hi) <= cfg.max_line_turn_rad).then_some(Elem {
        lo,
        hi,
        kind: Kind::Line { c, u },
    })
}

fn overlap(a: &Elem, lo: usize, hi: usize) -> usize {
    let (l, h) = (a.lo.max(lo), a.hi.min(hi));
    if h >= l {
        h - l + 1
    } else {
        0
    }
}

fn chain_lines(chain: &Chain, hough: &[super::HoughLine], cfg: &FitConfig) -> Vec<Elem> {
    let index: HashMap<Pixel, usize> = chain.pixels.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let mut lines: Vec<Elem> = hough
        .iter()
        .filter_map(|h| {
            let ks: Vec<usize> = h.pixels.iter().filter_map(|p| index.get(p).copied()).collect();
            if ks.len() < 3 {
                return None;
            }
            let (lo, hi) = (*ks.iter().min()?, *ks.iter().max()?);
            accept_line(chain, lo, hi, cfg)
        })
        .collect();
    lines.sort_by_key(|e| (e.lo, e.hi));
    lines.dedup_by_key(|e| (e.lo, e.hi));

    let max_angle = cfg.hough_line.angular_resolution_deg.to_radians();
    let mut merged: Vec<Elem> = Vec::new();
    for e in lines {
        if let Some(last) = merged.last_mut() {
            let (Kind::Line { u: ua, .. }, Kind::Line { u: ub, .. }) = (last.kind, e.kind) else {
                unreachable!()
            };
            let near = e.lo <= last.hi || chain.span(last.hi, e.lo) <= cfg.hough_line.min_length_m;
            if near && ua.cross(ub).abs().asin() <= max_angle {
                if let Some(m) = accept_line(chain, last.lo.min(e.lo), last.hi.max(e.hi), cfg) {
                    *last = m;
                    continue;
                }
            }
            if e.hi <= last.hi {
                continue;
            }
            if e.lo <= last.hi {
                // Non-collinear overlap: split it between the two.
                let mid = (e.lo + last.hi) / 2;
                let (lo_a, hi_b) = (last.lo, e.hi);
                if let (Some(a), Some(b)) = (refit(chain, lo_a, mid), refit(chain, mid + 1, hi_b)) {
                    *last = a;
                    merged.push(b);
                }
                continue;
            }
        }
        merged.push(e);
    }
    merged
}

fn refit(chain: &Chain, lo: usize, hi: usize) -> Option<Elem> {
    if hi < lo + 2 {
        return None;
    }
    let (c, u) = fit_line(&chain.smooth[lo..=hi])?;
    Some(Elem {
        lo,
        hi,
        kind: Kind::Line { c, u },
    })
}

fn chain_resolution(chain: &Chain) -> f64 {
    chain
        .raw
        .windows(2)
        .map(|w| (w[1].x - w[0].x).abs().max((w[1].y - w[0].y).abs()))
        .find(|&d| d > 0.0)
        .unwrap_or(1.0)
}

/// Lines first, arcs second: a line lying mostly inside a longer arc is
/// dropped; any other overlap trims the arc, which must still pass the
/// support thresholds.
fn arbitrate(chain: &Chain, lines: Vec<Elem>, cfg: &FitConfig) -> Vec<Elem> {
    let circles = detect_on_chain(chain, cfg);
    let arc_elems: Vec<Elem> = circles
        .iter()
        .map(|c| Elem {
            lo: c.lo,
            hi: c.hi,
            kind: Kind::Arc {
                center: c.candidate.center,
                r: c.candidate.radius,
            },
        })
        .collect();
    let lines: Vec<Elem> = lines
        .into_iter()
        .filter(|l| {
            !arc_elems.iter().any(|a| {
                2 * overlap(a, l.lo, l.hi) > l.hi - l.lo && chain.span(a.lo, a.hi) > chain.span(l.lo, l.hi)
            })
        })
        .collect();
    let mut out = lines.clone();
    for a in arc_elems {
        let Kind::Arc { center, r } = a.kind else { unreachable!() };
        let mut pieces = vec![(a.lo, a.hi)];
        for l in &lines {
            pieces = pieces
                .into_iter()
                .flat_map(|(lo, hi)| {
                    let mut v = Vec::new();
                    if l.hi < lo || l.lo > hi {
                        v.push((lo, hi));
                    } else {
                        if l.lo > lo {
                            v.push((lo, l.lo - 1));
                        }
                        if l.hi < hi {
                            v.push((l.hi + 1, hi));
                        }
                    }
                    v
                })
                .collect();
        }
        for (lo, hi) in pieces {
            if validate_run(chain, lo, hi, center, r, &cfg.circle).is_some() {
                out.push(Elem {
                    lo,
                    hi,
                    kind: Kind::Arc { center, r },
                });
            }
        }
    }
    out.sort_by_key(|e| e.lo);
    out
}

/// Trims neighbouring elements so that each join leaves room for a bridge.
fn open_gaps(chain: &Chain, mut elems: Vec<Elem>, min_bridge: f64) -> Vec<Elem> {
    for _ in 0..8 {
        let mut changed = false;
        for i in 1..elems.len() {
            let (a, b) = (elems[i - 1], elems[i]);
            let gap = if b.lo > a.hi { chain.span(a.hi, b.lo) } else { 0.0 };
            if gap >= min_bridge && b.lo > a.hi + 1 {
                continue;
            }
            let half = 0.5 * (min_bridge - gap).max(chain_resolution(chain));
            let new_hi = chain.index_at_station(chain.station[a.hi] - half, a.lo, a.hi);
            let new_lo = chain.index_at_station(chain.station[b.lo] + half, b.lo, b.hi);
            elems[i - 1].hi = new_hi.min(a.hi.saturating_sub(1)).max(a.lo);
            elems[i].lo = new_lo.max(b.lo + 1).min(b.hi);
            changed = true;
        }
        let before = elems.len();
        elems.retain(|e| e.hi >= e.lo + 2);
        if !changed && elems.len() == before {
            break;
        }
    }
    elems
}

fn to_segment(chain: &Chain, e: &Elem) -> SegmentFit {
    match e.kind {
        Kind::Line { c, u } => {
            let travel = chain.smooth[e.hi] - chain.smooth[e.lo];
            let u = if travel.dot(u) < 0.0 { u * -1.0 } else { u };
            let project = |p: Point2| c + u * (p - c).dot(u);
            SegmentFit::Line(LineSegmentFit::new(project(chain.smooth[e.lo]), project(chain.smooth[e.hi])))
        }
        Kind::Arc { center, r } => {
            let theta = (chain.smooth[e.lo] - center).angle();
            let sweep = signed_sweep(&chain.smooth[e.lo..=e.hi], center);
            SegmentFit::Arc(ArcSegmentFit::new(center, r, theta, sweep))
        }
    }
}

/// Distances from `pts` to the clothoid, measured against a dense polyline
/// of the curve.
fn deviations(f: &ClothoidSegmentFit, pts: &[Point2]) -> Vec<f64> {
    let n = (f.length / 0.25).ceil().max(1.0) as usize;
    let curve: Vec<Point2> = (0..=n).map(|k| f.state_at(f.length * k as f64 / n as f64).0).collect();
    pts.iter()
        .map(|&p| {
            curve
                .windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]).0)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn max_deviation(f: &ClothoidSegmentFit, pts: &[Point2]) -> f64 {
    deviations(f, pts).into_iter().fold(0.0, f64::max)
}

struct RunFit {
    fits: Vec<SegmentFit>,
    counts: Vec<usize>,
    skipped: Vec<SkipRecord>,
}

/// Bridges chain indices `a..=b` with one G¹ clothoid if the run stays within
/// `2·tol` of it, else with clothoids through the VW-decimated vertices. Anchored ends take the neighbouring element's point and heading;
/// free vertices take their heading from the distance field. `owned` is the
/// number of chain pixels attributed to the run.
fn bridge_run(
    chain: &Chain,
    field: &DistanceField,
    (a, b): (usize, usize),
    start: Option<(Point2, f64)>,
    end: Option<(Point2, f64)>,
    owned: usize,
    cfg: &FitConfig,
) -> RunFit {
    let mut pts: Vec<Point2> = chain.smooth[a..=b].to_vec();
    let last = pts.len() - 1;
    if let Some((p, _)) = start {
        pts[0] = p;
    }
    if let Some((p, _)) = end {
        pts[last] = p;
    }
    let half = cfg.smoothing_half_window_px.max(2);
    let heading = |k: usize| -> f64 {
        match (k, start, end) {
            (0, Some((_, h)), _) => h,
            (k, _, Some((_, h))) if k == last => h,
            _ => {
                let dir = chain.direction_at(a + k, half);
                field_heading(field, chain.pixels[a + k], dir).unwrap_or(dir.angle())
            }
        }
    };
    let mut out = RunFit {
        fits: Vec::new(),
        counts: Vec::new(),
        skipped: Vec::new(),
    };
    // A single clothoid is kept when the whole run follows it.
    if let Ok(f) = fit_clothoid_g1(pts[0], heading(0), pts[last], heading(last), &cfg.clothoid) {
        if max_deviation(&f, &pts) <= 2.0 * cfg.fit_tolerance_m {
            out.fits.push(SegmentFit::Clothoid(f));
            out.counts.push(owned);
            return out;
        }
    }
    let idx = visvalingam_whyatt_indices(&pts, cfg.decimation.area_threshold_m2);
    let spans = idx.len() - 1;
    for m in 0..spans {
        let (k0, k1) = (idx[m], idx[m + 1]);
        let mut count = k1 - k0;
        if m == spans - 1 {
            count = (count + owned).saturating_sub(b - a);
        }
        match fit_clothoid_g1(pts[k0], heading(k0), pts[k1], heading(k1), &cfg.clothoid) {
            Ok(f) => {
                out.fits.push(SegmentFit::Clothoid(f));
                out.counts.push(count);
            }
            Err(e) => {
                let lo = a + k0 + usize::from(m > 0 || start.is_some());
                out.skipped.push(SkipRecord {
                    reason: format!("clothoid bridge failed: {e}"),
                    pixels: chain.pixels[lo.min(a + k1)..(a + k1).min(chain.len())].to_vec(),
                });
            }
        }
    }
    out
}

/// Index of the smoothed chain point closest to `p` within `[lo, hi]`.
fn nearest_index(chain: &Chain, p: Point2, lo: usize, hi: usize) -> usize {
    (lo..=hi)
        .min_by(|&a, &b| chain.smooth[a].distance(p).total_cmp(&chain.smooth[b].distance(p)))
        .unwrap_or(lo)
}

/// Moves the start (`at_start`) or end of a line or arc to the point `p`,
/// which must lie on its supporting line or circle. `None` if the element
/// would vanish or reverse.
fn move_end(seg: &SegmentFit, p: Point2, at_start: bool) -> Option<SegmentFit> {
    match seg {
        SegmentFit::Line(l) => {
            let (a, b) = if at_start { (p, l.p_end) } else { (l.p_start, p) };
            let u = Point2::from_angle(l.direction);
            ((b - a).dot(u) > 1.0).then(|| SegmentFit::Line(LineSegmentFit::new(a, b)))
        }
        SegmentFit::Arc(a) => {
            let theta = (p - a.center).angle();
            let sweep = if at_start {
                a.sweep() - wrap_pi(theta - a.theta_start)
            } else {
                a.sweep() + wrap_pi(theta - a.theta_end)
            };
            let start = if at_start { theta } else { a.theta_start };
            (sweep * a.sweep() > 0.0 && sweep.abs() * a.radius > 1.0)
                .then(|| SegmentFit::Arc(ArcSegmentFit::new(a.center, a.radius, start, sweep)))
        }
        SegmentFit::Clothoid(_) => None,
    }
}

/// Extends a line or arc so that its start or end sits abreast of `p`.
fn extend_to(seg: &SegmentFit, p: Point2, at_start: bool) -> Option<SegmentFit> {
    match seg {
        SegmentFit::Line(l) => {
            let u = Point2::from_angle(l.direction);
            move_end(seg, l.p_start + u * (p - l.p_start).dot(u), at_start)
        }
        _ => move_end(seg, p, at_start),
    }
}

/// Spiral transition between a line and an arc (either order) at join `i`,
/// with the new end of element `i` and start of element `i + 1`. Accepted
/// when the chain between the tangent points stays within `3·tol` of it,
/// with an RMS distance of at most `tol`.
fn line_arc_transition(
    chain: &Chain,
    elems: &[Elem],
    segs: &[SegmentFit],
    i: usize,
    cfg: &FitConfig,
) -> Option<(ClothoidSegmentFit, SegmentFit, SegmentFit, usize, usize)> {
    let spiral = match (&segs[i], &segs[i + 1]) {
        (SegmentFit::Line(l), SegmentFit::Arc(a)) => {
            let f = spiral_transition(l.p_start, l.direction, a.center, a.radius)?;
            (f.kappa_end().signum() == a.sense.sign()).then_some(f)?
        }
        (SegmentFit::Arc(a), SegmentFit::Line(l)) => {
            let back = l.direction + std::f64::consts::PI;
            let f = spiral_transition(l.p_end, back, a.center, a.radius)?.reversed();
            (f.kappa_start.signum() == a.sense.sign()).then_some(f)?
        }
        _ => return None,
    };
    let before = move_end(&segs[i], spiral.p_start, false)?;
    let after = move_end(&segs[i + 1], spiral.p_end, true)?;
    let (lo, hi) = (elems[i].lo, elems[i + 1].hi);
    let ka = nearest_index(chain, spiral.p_start, lo, hi);
    let kb = nearest_index(chain, spiral.p_end, lo, hi);
    if ka < lo + 2 || kb + 2 > hi || kb <= ka {
        return None;
    }
    let tol = cfg.fit_tolerance_m;
    let dev = deviations(&spiral, &chain.smooth[ka..=kb]);
    let worst = dev.iter().copied().fold(0.0, f64::max);
    let rms = (dev.iter().map(|d| d * d).sum::<f64>() / dev.len() as f64).sqrt();
    (worst <= 3.0 * tol && rms <= tol).then_some((spiral, before, after, ka, kb))
}

/// RMS distance from `chain.smooth[lo..=hi]` to the curve traced by `segs`.
fn composite_rms(chain: &Chain, segs: &[SegmentFit], lo: usize, hi: usize) -> f64 {
    let mut curve = Vec::new();
    for sg in segs {
        let n = (sg.length() / 0.25).ceil().max(1.0) as usize;
        curve.extend((0..=n).map(|k| sg.point_at(sg.length() * k as f64 / n as f64).0));
    }
    let mut at = 0usize;
    let mut sum = 0.0;
    for p in &chain.smooth[lo..=hi] {
        let (a, b) = (at.saturating_sub(400), (at + 400).min(curve.len() - 1));
        let (mut best, mut arg) = (f64::INFINITY, at);
        for k in a..b {
            let d = point_segment_distance(*p, curve[k], curve[k + 1]).0;
            if d < best {
                (best, arg) = (d, k);
            }
        }
        at = arg;
        sum += best * best;
    }
    (sum / (hi - lo + 1) as f64).sqrt()
}

/// Refits the arc at `i` on its current extent, then picks the grid radius
/// near the estimate whose transitions give the closest composite curve.
fn refit_flanked_arc(
    chain: &Chain,
    elems: &[Elem],
    segs: &[SegmentFit],
    i: usize,
    center: Point2,
    r: f64,
    cfg: &FitConfig,
) -> Option<(Vec<Elem>, Vec<SegmentFit>)> {
    let pts = &chain.smooth[elems[i].lo..=elems[i].hi];
    let (c, r) = fit_circle_geometric(pts, center, r);
    let (_, snapped, _) = snap_radius(pts, c, r, &cfg.circle);
    let a = i.saturating_sub(1);
    let b = (i + 1).min(elems.len() - 1);
    let (lo, hi) = (elems[a].lo, elems[b].hi);
    let mut best: Option<(f64, Vec<Elem>, Vec<SegmentFit>)> = None;
    for k in -2..=2 {
        let cand = snapped + k as f64 * cfg.circle.r_step;
        if cand < cfg.circle.r_min || cand > cfg.circle.r_max {
            continue;
        }
        let mut e = elems.to_vec();
        let mut sg = segs.to_vec();
        e[i].kind = Kind::Arc { center: fit_center_fixed_radius(pts, c, cand), r: cand };
        sg[i] = to_segment(chain, &e[i]);
        let mut ok = true;
        let mut joins: Vec<Option<ClothoidSegmentFit>> = Vec::new();
        for j in a..b {
            match line_arc_transition(chain, &e, &sg, j, cfg) {
                Some((f, before, after, ka, kb)) => {
                    sg[j] = before;
                    sg[j + 1] = after;
                    e[j].hi = ka;
                    e[j + 1].lo = kb;
                    joins.push(Some(f));
                }
                None => {
                    ok &= !matches!(
                        (&sg[j], &sg[j + 1]),
                        (SegmentFit::Line(_), SegmentFit::Arc(_)) | (SegmentFit::Arc(_), SegmentFit::Line(_))
                    );
                    joins.push(None);
                }
            }
        }
        if !ok {
            continue;
        }
        let mut model = vec![sg[a]];
        for (j, f) in (a + 1..=b).zip(joins) {
            model.extend(f.map(SegmentFit::Clothoid));
            model.push(sg[j]);
        }
        let score = composite_rms(chain, &model, lo, hi);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, e, sg));
        }
    }
    best.map(|(_, e, sg)| (e, sg))
}

fn fit_chain(chain: &Chain, field: &DistanceField, hough: &[super::HoughLine], cfg: &FitConfig) -> (ChainFit, Vec<SkipRecord>) {
    let n = chain.len();
    let lines = chain_lines(chain, hough, cfg);
    let elems = open_gaps(chain, arbitrate(chain, lines, cfg), cfg.min_bridge_length_m);
    let mut fit = ChainFit {
        branch_ids: chain.branch_ids.clone(),
        principal: chain.principal,
        length_m: chain.length(),
        fits: Vec::new(),
        pixel_counts: Vec::new(),
    };
    let mut skipped = Vec::new();
    let push_run = |fit: &mut ChainFit, skipped: &mut Vec<SkipRecord>, run: RunFit| {
        fit.fits.extend(run.fits);
        fit.pixel_counts.extend(run.counts);
        skipped.extend(run.skipped);
    };
    let skip = |lo: usize, hi: usize, what: &str| SkipRecord {
        reason: format!(
            "{what} free run of {:.1} m shorter than {} m",
            chain.span(lo, hi.max(lo)),
            cfg.min_free_end_length_m
        ),
        pixels: chain.pixels[lo..=hi].to_vec(),
    };

    // Free ends bending tighter than the smallest radius are skeleton
    // artefacts; the neighbouring element is extended over them instead.
    let k_max = 1.0 / cfg.circle.r_min;
    let plausible = |run: &RunFit| {
        run.fits.iter().all(|f| {
            let (a, b) = f.curvatures();
            a.abs().max(b.abs()) <= k_max
        })
    };
    let tight = |lo: usize, hi: usize, what: &str| SkipRecord {
        reason: format!("{what} free run bends tighter than {} m radius", cfg.circle.r_min),
        pixels: chain.pixels[lo..=hi].to_vec(),
    };

    if elems.is_empty() {
        if chain.length() < cfg.min_free_end_length_m {
            skipped.push(skip(0, n - 1, "chain"));
        } else {
            let run = bridge_run(chain, field, (0, n - 1), None, None, n, cfg);
            push_run(&mut fit, &mut skipped, run);
        }
        return (fit, skipped);
    }

    let mut elems = elems;
    let mut segs: Vec<SegmentFit> = elems.iter().map(|e| to_segment(chain, e)).collect();
    let mut spirals: Vec<Option<ClothoidSegmentFit>> = vec![None; elems.len() - 1];
    // Transitions fix the true extent of the elements they join; lines and
    // arcs are then refitted on that extent and the transitions solved again.
    for pass in 0..3 {
        for i in 0..elems.len() - 1 {
            spirals[i] = line_arc_transition(chain, &elems, &segs, i, cfg).map(|(f, before, after, ka, kb)| {
                segs[i] = before;
                segs[i + 1] = after;
                elems[i].hi = ka;
                elems[i + 1].lo = kb;
                f
            });
        }
        if pass == 2 {
            break;
        }
        let flanked = |i: usize| (i > 0 && spirals[i - 1].is_some()) || spirals.get(i).is_some_and(Option::is_some);
        for i in 0..elems.len() {
            if !flanked(i) || !matches!(elems[i].kind, Kind::Line { .. }) {
                continue;
            }
            if let Some((c, u)) = fit_line(&chain.smooth[elems[i].lo..=elems[i].hi]) {
                elems[i].kind = Kind::Line { c, u };
                segs[i] = to_segment(chain, &elems[i]);
            }
        }
        for i in 0..elems.len() {
            let Kind::Arc { center, r } = elems[i].kind else { continue };
            if !flanked(i) {
                continue;
            }
            if let Some((e, sg)) = refit_flanked_arc(chain, &elems, &segs, i, center, r, cfg) {
                elems = e;
                segs = sg;
            }
        }
    }
    let first = elems[0];
    if first.lo > 0 {
        if chain.span(0, first.lo) < cfg.min_free_end_length_m {
            skipped.push(skip(0, first.lo - 1, "leading"));
        } else {
            let end = Some((segs[0].start_point(), segs[0].start_heading()));
            let run = bridge_run(chain, field, (0, first.lo), None, end, first.lo, cfg);
            if plausible(&run) {
                push_run(&mut fit, &mut skipped, run);
            } else if let Some(sg) = extend_to(&segs[0], chain.smooth[0], true) {
                segs[0] = sg;
                elems[0].lo = 0;
            } else {
                skipped.push(tight(0, first.lo - 1, "leading"));
            }
        }
    }
    for (i, (e, s)) in elems.iter().zip(&segs).enumerate() {
        fit.fits.push(*s);
        fit.pixel_counts.push(e.hi - e.lo + 1);
        if let Some(next) = elems.get(i + 1) {
            if let Some(f) = spirals[i] {
                fit.fits.push(SegmentFit::Clothoid(f));
                fit.pixel_counts.push(next.lo - e.hi - 1);
                continue;
            }
            let ns = &segs[i + 1];
            let run = bridge_run(
                chain,
                field,
                (e.hi, next.lo),
                Some((s.end_point(), s.end_heading())),
                Some((ns.start_point(), ns.start_heading())),
                next.lo - e.hi - 1,
                cfg,
            );
            push_run(&mut fit, &mut skipped, run);
        }
    }
    let last = elems[elems.len() - 1];
    if last.hi < n - 1 {
        if chain.span(last.hi, n - 1) < cfg.min_free_end_length_m {
            skipped.push(skip(last.hi + 1, n - 1, "trailing"));
        } else {
            let s = &segs[segs.len() - 1];
            let start = Some((s.end_point(), s.end_heading()));
            let run = bridge_run(chain, field, (last.hi, n - 1), start, None, n - 1 - last.hi, cfg);
            let tail = fit.fits.len() - 1;
            if plausible(&run) {
                push_run(&mut fit, &mut skipped, run);
            } else if let Some(sg) = extend_to(&fit.fits[tail], chain.smooth[n - 1], false) {
                fit.fits[tail] = sg;
                fit.pixel_counts[tail] += n - 1 - last.hi;
            } else {
                skipped.push(tight(last.hi + 1, n - 1, "trailing"));
            }
        }
    }
    (fit, skipped)
}

/// Classifies every chain of the skeleton graph into lines, arcs and
/// clothoid bridges.
///
/// Straight runs come from the probabilistic Hough transform and are refined
/// on the smoothed chain; circular runs from `detect_circles`. Lines win
/// overlaps unless they lie inside a longer arc. Gaps between anchored
/// elements, and free runs at chain ends at least `min_free_end_length_m`
/// long, are bridged by G¹ clothoids; shorter end runs are reported as
/// skipped.
pub fn classify_and_fit(
    skel: &Skeleton,
    graph: &SkeletonGraph,
    field: &DistanceField,
    cfg: &FitConfig,
) -> Result<FitOutcome, FitError> {
    cfg.validate()?;
    let (chains, leftover) = build_chains(skel, graph, Some(field), cfg.smoothing_half_window_px);
    let hough = hough_lines(skel, &cfg.hough_line);
    let mut outcome = FitOutcome {
        chains: Vec::new(),
        skipped: Vec::new(),
        hough_lines: hough.len(),
        circles: 0,
    };
    if !leftover.is_empty() {
        outcome.skipped.push(SkipRecord {
            reason: "pixels outside every chain (junction cores or branches under 3 px)".into(),
            pixels: leftover,
        });
    }
    for chain in &chains {
        let (fit, skipped) = fit_chain(chain, field, &hough, cfg);
        outcome.circles += fit.fits.iter().filter(|f| matches!(f, SegmentFit::Arc(_))).count();
        outcome.skipped.extend(skipped);
        outcome.chains.push(fit);
    }
    for w in outcome.warnings() {
        log::warn!("{w}");
    }
    Ok(outcome)
}
