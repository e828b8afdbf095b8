use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use std::collections::HashMap;
use std::f64::consts::TAU;

use super::chain::{build_chains, Chain};
use super::{ArcSegmentFit, CircleConfig, FitConfig};
use crate::geom::{wrap_pi, Point2};
use crate::skeleton::{Pixel, Skeleton, SkeletonGraph};

/// A circle supported by a run of skeleton pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleCandidate {
    pub center: Point2,
    pub radius: f64,
    pub inliers: Vec<Pixel>,
    /// RMS radial residual of the smoothed run, meters.
    pub rms: f64,
}

fn centroid(points: &[Point2]) -> Point2 {
    points.iter().fold(Point2::default(), |a, &p| a + p) * (1.0 / points.len() as f64)
}

/// Algebraic (Kåsa) circle fit: least squares on `x² + y² + Dx + Ey + F = 0`.
pub fn fit_circle_algebraic(points: &[Point2]) -> Option<(Point2, f64)> {
    if points.len() < 3 {
        return None;
    }
    let c = centroid(points);
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in points {
        let (x, y) = (p.x - c.x, p.y - c.y);
        let row = Vector3::new(x, y, 1.0);
        ata += row * row.transpose();
        atb += row * -(x * x + y * y);
    }
    let sol = ata.lu().solve(&atb)?;
    let (cx, cy) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = cx * cx + cy * cy - sol[2];
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    Some((Point2::new(c.x + cx, c.y + cy), r2.sqrt()))
}

fn rms_residual(points: &[Point2], center: Point2, r: f64) -> f64 {
    let ss: f64 = points.iter().map(|p| (p.distance(center) - r).powi(2)).sum();
    (ss / points.len() as f64).sqrt()
}

/// Geometric fit by Gauss–Newton from an initial circle.
pub(crate) fn fit_circle_geometric(points: &[Point2], center: Point2, radius: f64) -> (Point2, f64) {
    let c0 = centroid(points);
    let (mut a, mut b, mut r) = (center.x - c0.x, center.y - c0.y, radius);
    for _ in 0..30 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for p in points {
            let (dx, dy) = (p.x - c0.x - a, p.y - c0.y - b);
            let d = dx.hypot(dy);
            if d == 0.0 {
                continue;
            }
            let j = Vector3::new(-dx / d, -dy / d, -1.0);
            jtj += j * j.transpose();
            jtr += j * (d - r);
        }
        let Some(step) = jtj.lu().solve(&-jtr) else {
            break;
        };
        a += step[0];
        b += step[1];
        r += step[2];
        if step.norm() < 1e-9 * r.abs().max(1.0) {
            break;
        }
    }
    (Point2::new(c0.x + a, c0.y + b), r)
}

/// Best centre for a prescribed radius, by Gauss–Newton.
pub(crate) fn fit_center_fixed_radius(points: &[Point2], center: Point2, r: f64) -> Point2 {
    let c0 = centroid(points);
    let (mut a, mut b) = (center.x - c0.x, center.y - c0.y);
    for _ in 0..30 {
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for p in points {
            let (dx, dy) = (p.x - c0.x - a, p.y - c0.y - b);
            let d = dx.hypot(dy);
            if d == 0.0 {
                continue;
            }
            let j = Vector2::new(-dx / d, -dy / d);
            jtj += j * j.transpose();
            jtr += j * (d - r);
        }
        let Some(step) = jtj.lu().solve(&-jtr) else {
            break;
        };
        a += step[0];
        b += step[1];
        if step.norm() < 1e-9 * r {
            break;
        }
    }
    Point2::new(c0.x + a, c0.y + b)
}

/// Snaps the radius to the `step` grid, keeping the neighbouring grid value
/// whose re-centred circle fits best.
pub(crate) fn snap_radius(points: &[Point2], center: Point2, r: f64, cfg: &CircleConfig) -> (Point2, f64, f64) {
    let lo = (r / cfg.r_step).floor() * cfg.r_step;
    let mut best = (center, r, f64::INFINITY);
    for cand in [lo, lo + cfg.r_step] {
        if cand <= 0.0 {
            continue;
        }
        let c = fit_center_fixed_radius(points, center, cand);
        let rms = rms_residual(points, c, cand);
        if rms < best.2 {
            best = (c, cand, rms);
        }
    }
    best
}

/// A circle found on a chain, with the inclusive index range it covers.
#[derive(Debug, Clone)]
pub(crate) struct ChainCircle {
    pub candidate: CircleCandidate,
    pub lo: usize,
    pub hi: usize,
}

fn within(chain: &Chain, k: usize, center: Point2, r: f64, tol: f64) -> bool {
    (chain.smooth[k].distance(center) - r).abs() <= tol
}

/// Grows `[lo, hi]` outwards while points satisfy `ok`, tolerating runs of
/// outliers up to `slack` meters long; the range ends at the last inlier.
pub(crate) fn grow_with_slack(chain: &Chain, lo: usize, hi: usize, slack: f64, ok: impl Fn(usize) -> bool) -> (usize, usize) {
    let n = chain.len();
    let mut new_hi = hi;
    let mut k = hi + 1;
    while k < n && chain.span(new_hi, k) <= slack + 1e-9 {
        if ok(k) {
            new_hi = k;
        }
        k += 1;
    }
    let mut new_lo = lo;
    let mut k = lo;
    while k > 0 && chain.span(k - 1, new_lo) <= slack + 1e-9 {
        k -= 1;
        if ok(k) {
            new_lo = k;
        }
    }
    (new_lo, new_hi)
}

fn grow(chain: &Chain, lo: usize, hi: usize, center: Point2, r: f64, tol: f64, slack: f64) -> (usize, usize) {
    grow_with_slack(chain, lo, hi, slack, |k| within(chain, k, center, r, tol))
}

/// Trims `[lo, hi]` until both ends lie within `tol` of the circle, at least
/// 90 % of the points do and none is further than `3·tol`.
fn trim_run(chain: &Chain, lo: usize, hi: usize, center: Point2, r: f64, tol: f64) -> Option<(usize, usize)> {
    let res = |k: usize| (chain.smooth[k].distance(center) - r).abs();
    let (mut lo, mut hi) = (lo, hi);
    loop {
        while lo < hi && res(lo) > tol {
            lo += 1;
        }
        while hi > lo && res(hi) > tol {
            hi -= 1;
        }
        if hi < lo + 2 {
            return None;
        }
        let (kw, dw) = (lo..=hi).map(|k| (k, res(k))).max_by(|a, b| a.1.total_cmp(&b.1))?;
        let outliers = (lo..=hi).filter(|&k| res(k) > tol).count();
        if dw <= 3.0 * tol && outliers * 10 <= hi - lo + 1 {
            return Some((lo, hi));
        }
        if kw - lo < hi - kw {
            lo = kw + 1;
        } else {
            hi = kw.checked_sub(1)?;
        }
    }
}

/// Accepts the run if the snapped radius is in range, the arc subtends
/// enough angle and enough raw pixels lie on the circle.
pub(crate) fn validate_run(chain: &Chain, lo: usize, hi: usize, center: Point2, r: f64, cfg: &CircleConfig) -> Option<Vec<Pixel>> {
    if r < cfg.r_min || r > cfg.r_max || hi <= lo {
        return None;
    }
    if chain.span(lo, hi) / r < cfg.min_subtended_deg.to_radians() {
        return None;
    }
    let inliers: Vec<Pixel> = (lo..=hi)
        .filter(|&k| (chain.raw[k].distance(center) - r).abs() <= cfg.inlier_tolerance_m)
        .map(|k| chain.pixels[k])
        .collect();
    (inliers.len() >= cfg.min_inliers).then_some(inliers)
}

/// Circle runs along one chain. Seed windows slide along the smoothed chain;
/// a seed whose algebraic fit has a plausible radius and small residuals is
/// grown while points stay within twice the fit tolerance, re-fitted on the
/// central 60% of the run, snapped to the radius grid, trimmed to the points
/// that fit it and validated.
pub(crate) fn detect_on_chain(chain: &Chain, cfg: &FitConfig) -> Vec<ChainCircle> {
    let cc = &cfg.circle;
    let tol = cfg.fit_tolerance_m;
    let n = chain.len();
    let mut out: Vec<ChainCircle> = Vec::new();
    if n < 3 {
        return out;
    }
    let slack = 5.0 * cfg.hough_line.max_gap_m;
    let window = cc.r_min * cc.min_subtended_deg.to_radians();
    let mut start = 0;
    while start < n {
        let s0 = chain.station[start];
        let end = chain.index_at_station(s0 + window, start, n - 1);
        if chain.span(start, end) < 0.9 * window {
            break;
        }
        let next_start = chain.index_at_station(s0 + window / 4.0, start, n - 1).max(start + 1);
        let pts = &chain.smooth[start..=end];
        let seed = fit_circle_algebraic(pts)
            .filter(|&(_, r)| r >= 0.8 * cc.r_min && r <= 1.2 * cc.r_max)
            .filter(|&(c, r)| pts.iter().all(|p| (p.distance(c) - r).abs() <= 2.0 * tol));
        let Some((mut center, mut r)) = seed else {
            start = next_start;
            continue;
        };
        let (mut lo, mut hi) = (start, end);
        for _ in 0..20 {
            let (nlo, nhi) = grow(chain, lo, hi, center, r, 2.0 * tol, slack);
            let grown = (nlo, nhi) != (lo, hi);
            (lo, hi) = (nlo, nhi);
            (center, r) = fit_circle_geometric(&chain.smooth[lo..=hi], center, r);
            if !grown {
                break;
            }
        }
        let span = chain.span(lo, hi);
        let core_lo = chain.index_at_station(chain.station[lo] + 0.2 * span, lo, hi);
        let core_hi = chain.index_at_station(chain.station[lo] + 0.8 * span, lo, hi);
        let core = &chain.smooth[core_lo..=core_hi.max(core_lo + 2).min(hi)];
        (center, r) = fit_circle_geometric(core, center, r);
        let (center, r, _) = snap_radius(core, center, r, cc);
        let accepted = trim_run(chain, lo, hi, center, r, tol).and_then(|(lo, hi)| {
            let (lo, hi) = grow(chain, lo, hi, center, r, tol, slack);
            validate_run(chain, lo, hi, center, r, cc).map(|inliers| (lo, hi, inliers))
        });
        match accepted {
            Some((lo, hi, inliers)) if out.iter().all(|c| hi < c.lo || lo > c.hi) => {
                let rms = rms_residual(&chain.smooth[lo..=hi], center, r);
                out.push(ChainCircle {
                    candidate: CircleCandidate {
                        center,
                        radius: r,
                        inliers,
                        rms,
                    },
                    lo,
                    hi,
                });
                start = (hi + 1).max(next_start);
            }
            _ => start = next_start,
        }
    }
    out.sort_by_key(|c| c.lo);
    out
}

/// Circles supported by the skeleton chains (principal path and remaining branches).
pub fn detect_circles(skel: &Skeleton, graph: &SkeletonGraph, cfg: &FitConfig) -> Vec<CircleCandidate> {
    let (chains, _) = build_chains(skel, graph, None, cfg.smoothing_half_window_px);
    chains
        .iter()
        .flat_map(|c| detect_on_chain(c, cfg))
        .map(|c| c.candidate)
        .collect()
}

/// Arcs where each circle meets the skeleton: pixels within the inlier
/// tolerance of the circle are grouped into runs of polar angle (split where
/// the angular gap exceeds the Hough gap allowance) and each run meeting the
/// support thresholds becomes an arc, oriented along branch traversal.
pub fn extract_arcs(circles: &[CircleCandidate], skel: &Skeleton, graph: &SkeletonGraph, cfg: &FitConfig) -> Vec<ArcSegmentFit> {
    let cc = &cfg.circle;
    let mut position: HashMap<Pixel, (usize, usize)> = HashMap::new();
    for b in &graph.branches {
        for (k, &p) in b.pixels.iter().enumerate() {
            position.insert(p, (b.id, k));
        }
    }
    let mut arcs = Vec::new();
    for circle in circles {
        let mut hits: Vec<(f64, Pixel)> = skel
            .pixels()
            .filter_map(|(i, j)| {
                let p = skel.geometry.pixel_center(i, j);
                ((p.distance(circle.center) - circle.radius).abs() <= cc.inlier_tolerance_m)
                    .then(|| ((p - circle.center).angle().rem_euclid(TAU), (i, j)))
            })
            .collect();
        if hits.is_empty() {
            continue;
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max_gap = cfg.hough_line.max_gap_m.max(2.0 * skel.geometry.resolution) / circle.radius;
        let mut runs: Vec<Vec<(f64, Pixel)>> = vec![vec![hits[0]]];
        for w in hits.windows(2) {
            if w[1].0 - w[0].0 > max_gap {
                runs.push(Vec::new());
            }
            runs.last_mut().unwrap().push(w[1]);
        }
        let wrap_gap = hits[0].0 + TAU - hits[hits.len() - 1].0;
        let full = runs.len() == 1 && wrap_gap <= max_gap;
        if runs.len() > 1 && wrap_gap <= max_gap {
            let first = runs.remove(0);
            let last = runs.last_mut().unwrap();
            last.extend(first.into_iter().map(|(a, p)| (a + TAU, p)));
        }
        for run in runs {
            let (a0, a1) = (run[0].0, run[run.len() - 1].0);
            let sweep = if full { TAU } else { a1 - a0 };
            if run.len() < cc.min_inliers || sweep < cc.min_subtended_deg.to_radians() {
                continue;
            }
            // Sense: does the pixel index along the dominant branch grow with angle?
            let mut per_branch: HashMap<usize, Vec<(f64, usize)>> = HashMap::new();
            for &(a, p) in &run {
                if let Some(&(b, k)) = position.get(&p) {
                    per_branch.entry(b).or_default().push((a, k));
                }
            }
            let ccw = per_branch
                .values()
                .max_by_key(|v| v.len())
                .map(|v| {
                    let n = v.len() as f64;
                    let ma = v.iter().map(|x| x.0).sum::<f64>() / n;
                    let mk = v.iter().map(|x| x.1 as f64).sum::<f64>() / n;
                    v.iter().map(|&(a, k)| (a - ma) * (k as f64 - mk)).sum::<f64>() >= 0.0
                })
                .unwrap_or(true);
            let arc = if ccw {
                ArcSegmentFit::new(circle.center, circle.radius, a0, sweep)
            } else {
                ArcSegmentFit::new(circle.center, circle.radius, a0 + sweep, -sweep)
            };
            arcs.push(arc);
        }
    }
    arcs
}

/// Signed sweep travelled along `points` around `center`.
pub(crate) fn signed_sweep(points: &[Point2], center: Point2) -> f64 {
    points
        .windows(2)
        .map(|w| wrap_pi((w[1] - center).angle() - (w[0] - center).angle()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{BinaryImage, GridGeometry};
    use crate::skeleton::extract_graph;

    #[test]
    fn algebraic_fit_exact_on_circle() {
        let c = Point2::new(5000.0, -300.0);
        let pts: Vec<Point2> = (0..50)
            .map(|k| c + Point2::from_angle(0.3 + k as f64 * 0.01) * 800.0)
            .collect();
        let (fc, r) = fit_circle_algebraic(&pts).unwrap();
        assert!((r - 800.0).abs() < 1e-6 && fc.distance(c) < 1e-6);
        let (gc, gr) = fit_circle_geometric(&pts, fc + Point2::new(3.0, -2.0), r + 4.0);
        assert!((gr - 800.0).abs() < 1e-6 && gc.distance(c) < 1e-6);
        assert!(fit_circle_algebraic(&pts[..2]).is_none());
        let line: Vec<Point2> = (0..10).map(|k| Point2::new(k as f64, 0.0)).collect();
        assert!(fit_circle_algebraic(&line).is_none_or(|(_, r)| r > 1e6));
    }

    #[test]
    fn snapping_picks_nearest_grid_radius() {
        let c = Point2::new(0.0, 0.0);
        let pts: Vec<Point2> = (0..80).map(|k| c + Point2::from_angle(k as f64 * 0.005) * 803.0).collect();
        let (sc, r, _) = snap_radius(&pts, c, 803.0, &CircleConfig::default());
        assert_eq!(r, 805.0);
        assert!(sc.distance(c) < 3.0);
    }

    /// A thick circular ribbon arc rasterised at 0.4 m.
    fn ribbon_arc(radius: f64, sweep_deg: f64) -> (BinaryImage, GridGeometry) {
        let res = 0.4;
        let sweep = sweep_deg.to_radians();
        let center = Point2::new(0.0, 0.0);
        let pts: Vec<Point2> = (0..=200).map(|k| center + Point2::from_angle(-0.5 * sweep + sweep * k as f64 / 200.0) * radius).collect();
        let minx = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - 10.0;
        let miny = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - 10.0;
        let maxx = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + 10.0;
        let maxy = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + 10.0;
        let g = GridGeometry {
            origin: Point2::new(minx, miny),
            resolution: res,
            width: ((maxx - minx) / res) as usize,
            height: ((maxy - miny) / res) as usize,
        };
        let mut img = BinaryImage::new(g.width, g.height);
        for j in 0..g.height {
            for i in 0..g.width {
                let p = g.pixel_center(i, j);
                let a = (p - center).angle();
                if (p.norm() - radius).abs() <= 3.0 && a.abs() <= 0.5 * sweep {
                    img.set(i, j, true);
                }
            }
        }
        (img, g)
    }

    #[test]
    fn detects_and_extracts_forty_degree_arc() {
        let (img, g) = ribbon_arc(500.0, 40.0);
        let (skel, graph) = extract_graph(&img, g, 12);
        let cfg = FitConfig::default();
        let circles = detect_circles(&skel, &graph, &cfg);
        assert_eq!(circles.len(), 1, "{circles:?}");
        assert!((circles[0].radius - 500.0).abs() <= 5.0, "{}", circles[0].radius);
        assert_eq!(circles[0].radius % 5.0, 0.0);
        let arcs = extract_arcs(&circles, &skel, &graph, &cfg);
        assert_eq!(arcs.len(), 1);
        let sweep = arcs[0].sweep().abs().to_degrees();
        assert!((sweep - 40.0).abs() <= 2.0, "{sweep}");
    }

    #[test]
    fn straight_ribbon_has_no_circle() {
        let g = GridGeometry {
            origin: Point2::new(0.0, 0.0),
            resolution: 0.4,
            width: 1000,
            height: 60,
        };
        let mut img = BinaryImage::new(g.width, g.height);
        for i in 5..995 {
            for j in 20..35 {
                img.set(i, j, true);
            }
        }
        let (skel, graph) = extract_graph(&img, g, 12);
        assert!(detect_circles(&skel, &graph, &FitConfig::default()).is_empty());
    }

    #[test]
    fn sweep_sign() {
        let c = Point2::new(0.0, 0.0);
        let ccw: Vec<Point2> = (0..10).map(|k| Point2::from_angle(k as f64 * 0.1)).collect();
        assert!((signed_sweep(&ccw, c) - 0.9).abs() < 1e-12);
        let cw: Vec<Point2> = ccw.iter().rev().copied().collect();
        assert!((signed_sweep(&cw, c) + 0.9).abs() < 1e-12);
    }
}
