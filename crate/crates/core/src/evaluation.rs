//! Deviation metrics between a recreated alignment and a reference
//! polyline, and buffer-zone queries against footprint sets.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::str::FromStr;
use thiserror::Error;

use crate::alignment::Alignment;
use crate::geom::{point_in_ring, point_segment_distance, polyline_length, segment_segment_distance, Point2};
use crate::pcd_io::{GeoFeature, GeoFeatureSet, Geometry};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("reference needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("no vertex pairs found ({dropped} reference vertices had no counterpart)")]
    NoOverlap { dropped: usize },
    #[error("coefficient of variation undefined: all deltas are zero")]
    UndefinedCv,
    #[error("error percentage undefined: both hit sets are empty")]
    UndefinedPercentage,
    #[error("buffer distance must be positive, got {0}")]
    InvalidDistance(f64),
    #[error("unknown pairing mode '{0}' (expected same-x or nearest-point)")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingMode {
    /// Pair each reference vertex with the recreated curve's crossing of `x = t_x`.
    SameX,
    NearestPoint,
}

impl FromStr for PairingMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "same-x" => Ok(PairingMode::SameX),
            "nearest-point" => Ok(PairingMode::NearestPoint),
            _ => Err(EvalError::UnknownMode(s.to_string())),
        }
    }
}

/// An arc-length parameterized curve that can be paired against.
pub trait Curve {
    fn length(&self) -> f64;
    fn point_at(&self, s: f64) -> Point2;
    /// Increasing stations from 0 to `length` between which the curve is
    /// close to straight.
    fn knots(&self) -> Vec<f64>;
}

impl Curve for Alignment {
    fn length(&self) -> f64 {
        self.total_length()
    }

    fn point_at(&self, s: f64) -> Point2 {
        self.point_at_station(s).0
    }

    fn knots(&self) -> Vec<f64> {
        let mut knots = Vec::new();
        for w in self.stations.windows(2) {
            let n = (w[1] - w[0]).ceil().max(1.0) as usize;
            knots.extend((0..n).map(|k| w[0] + (w[1] - w[0]) * k as f64 / n as f64));
        }
        knots.push(self.total_length());
        knots
    }
}

/// A polyline with cumulative vertex stations.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point2>,
    stations: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Point2>) -> Result<Self, EvalError> {
        if points.len() < 2 {
            return Err(EvalError::TooFewVertices(points.len()));
        }
        let mut stations = vec![0.0];
        for w in points.windows(2) {
            stations.push(stations[stations.len() - 1] + w[0].distance(w[1]));
        }
        Ok(Self { points, stations })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }
}

impl Curve for Polyline {
    fn length(&self) -> f64 {
        self.stations[self.stations.len() - 1]
    }

    fn point_at(&self, s: f64) -> Point2 {
        let k = self.stations[1..self.stations.len() - 1].partition_point(|&v| v <= s);
        let (s0, s1) = (self.stations[k], self.stations[k + 1]);
        let t = if s1 > s0 { ((s - s0) / (s1 - s0)).clamp(0.0, 1.0) } else { 0.0 };
        self.points[k].lerp(self.points[k + 1], t)
    }

    fn knots(&self) -> Vec<f64> {
        self.stations.clone()
    }
}

/// Paired recreated (`s`) and reference (`t`) vertices with their distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPair {
    pub s: Vec<Point2>,
    pub t: Vec<Point2>,
    pub deltas: Vec<f64>,
    /// Reference vertices left unpaired.
    pub dropped: usize,
}

impl EvaluationPair {
    pub fn from_points(s: Vec<Point2>, t: Vec<Point2>) -> Self {
        let deltas = s.iter().zip(&t).map(|(a, b)| a.distance(*b)).collect();
        Self { s, t, deltas, dropped: 0 }
    }

    pub fn n(&self) -> usize {
        self.deltas.len()
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm <= 0.0) == (flo <= 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    while b - a > 1e-10 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let m = 0.5 * (a + b);
    [a, m, b].into_iter().min_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap_or(m)
}

fn same_x(curve: &impl Curve, knots: &[f64], pts: &[Point2], t: Point2) -> Option<Point2> {
    let fx = |s: f64| curve.point_at(s).x - t.x;
    let mut best: Option<Point2> = None;
    for k in 0..knots.len() - 1 {
        let (a, b) = (pts[k].x - t.x, pts[k + 1].x - t.x);
        if (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0) {
            continue;
        }
        let p = if a == 0.0 {
            pts[k]
        } else if b == 0.0 {
            pts[k + 1]
        } else {
            curve.point_at(bisect(fx, knots[k], knots[k + 1]))
        };
        if best.is_none_or(|q| (p.y - t.y).abs() < (q.y - t.y).abs()) {
            best = Some(p);
        }
    }
    best
}

fn nearest(curve: &impl Curve, knots: &[f64], pts: &[Point2], t: Point2) -> Point2 {
    let k = (0..knots.len() - 1)
        .min_by(|&i, &j| {
            let di = point_segment_distance(t, pts[i], pts[i + 1]).0;
            let dj = point_segment_distance(t, pts[j], pts[j + 1]).0;
            di.total_cmp(&dj)
        })
        .unwrap_or(0);
    let s = golden_min(|s| curve.point_at(s).distance(t), knots[k], knots[k + 1]);
    [curve.point_at(s), pts[k], pts[k + 1]]
        .into_iter()
        .min_by(|a, b| a.distance(t).total_cmp(&b.distance(t)))
        .unwrap()
}

/// Pairs every reference vertex with a point on the recreated curve.
pub fn pair_vertices(recreated: &impl Curve, reference: &[Point2], mode: PairingMode) -> Result<EvaluationPair, EvalError> {
    if reference.len() < 2 {
        return Err(EvalError::TooFewVertices(reference.len()));
    }
    let knots = recreated.knots();
    let pts: Vec<Point2> = knots.iter().map(|&s| recreated.point_at(s)).collect();
    let (mut s, mut t) = (Vec::new(), Vec::new());
    for &r in reference {
        let p = match mode {
            PairingMode::SameX => same_x(recreated, &knots, &pts, r),
            PairingMode::NearestPoint => Some(nearest(recreated, &knots, &pts, r)),
        };
        if let Some(p) = p {
            s.push(p);
            t.push(r);
        }
    }
    let dropped = reference.len() - t.len();
    if t.is_empty() {
        return Err(EvalError::NoOverlap { dropped });
    }
    let mut pair = EvaluationPair::from_points(s, t);
    pair.dropped = dropped;
    Ok(pair)
}

pub fn rmsd(pair: &EvaluationPair) -> f64 {
    let n = pair.n().max(1) as f64;
    (pair.deltas.iter().map(|d| d * d).sum::<f64>() / n).sqrt()
}

pub fn mean_delta(pair: &EvaluationPair) -> f64 {
    pair.deltas.iter().sum::<f64>() / pair.n().max(1) as f64
}

/// RMSD normalised by the mean distance.
pub fn cv_rmsd(pair: &EvaluationPair) -> Result<f64, EvalError> {
    let mean = mean_delta(pair);
    if mean > 0.0 {
        Ok(rmsd(pair) / mean)
    } else {
        Err(EvalError::UndefinedCv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmsd: f64,
    /// `None` when every delta is zero.
    pub cv: Option<f64>,
    pub mean_delta: f64,
    /// Length of the reference polyline.
    pub total_reference_length: f64,
    pub n: usize,
    pub dropped: usize,
    pub mode: PairingMode,
}

pub fn evaluate(recreated: &impl Curve, reference: &[Point2], mode: PairingMode) -> Result<EvalReport, EvalError> {
    let pair = pair_vertices(recreated, reference, mode)?;
    Ok(EvalReport {
        rmsd: rmsd(&pair),
        cv: cv_rmsd(&pair).ok(),
        mean_delta: mean_delta(&pair),
        total_reference_length: polyline_length(reference),
        n: pair.n(),
        dropped: pair.dropped,
        mode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferComparison {
    pub other_hit_ids: BTreeSet<String>,
    pub symmetric_difference_count: usize,
    pub error_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferQueryResult {
    pub buffer_distance: f64,
    pub hit_ids: BTreeSet<String>,
    pub hit_count: usize,
    pub comparison: Option<BufferComparison>,
}

/// Identifier of a footprint: its `id` property, else its index.
pub fn feature_id(f: &GeoFeature, index: usize) -> String {
    f.properties.get("id").cloned().unwrap_or_else(|| index.to_string())
}

type Bbox = (Point2, Point2);

fn bbox<'a>(pts: impl IntoIterator<Item = &'a Point2>) -> Bbox {
    pts.into_iter().fold(
        (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), p| (Point2::new(lo.x.min(p.x), lo.y.min(p.y)), Point2::new(hi.x.max(p.x), hi.y.max(p.y))),
    )
}

fn bbox_gap(a: &Bbox, b: &Bbox) -> f64 {
    let dx = (b.0.x - a.1.x).max(a.0.x - b.1.x).max(0.0);
    let dy = (b.0.y - a.1.y).max(a.0.y - b.1.y).max(0.0);
    dx.hypot(dy)
}

fn geometry_parts(g: &Geometry) -> &[Vec<Point2>] {
    match g {
        Geometry::LineString(p) => std::slice::from_ref(p),
        Geometry::MultiLineString(p) | Geometry::Polygon(p) => p,
    }
}

/// Exact minimum distance between a polyline and a footprint geometry,
/// zero when the line enters a polygon.
pub fn footprint_distance(line: &[Point2], g: &Geometry) -> f64 {
    if let Geometry::Polygon(rings) = g {
        if let Some((outer, holes)) = rings.split_first() {
            let inside = |p: &Point2| point_in_ring(*p, outer) && !holes.iter().any(|h| point_in_ring(*p, h));
            if line.iter().any(inside) {
                return 0.0;
            }
        }
    }
    let mut best = f64::INFINITY;
    for part in geometry_parts(g) {
        let edges: Vec<(Point2, Point2)> = match part.len() {
            0 => continue,
            1 => vec![(part[0], part[0])],
            _ => part.windows(2).map(|w| (w[0], w[1])).collect(),
        };
        let line_edges: Vec<(Point2, Point2)> = match line.len() {
            0 => return f64::INFINITY,
            1 => vec![(line[0], line[0])],
            _ => line.windows(2).map(|w| (w[0], w[1])).collect(),
        };
        for &(a, b) in &line_edges {
            for &(c, d) in &edges {
                best = best.min(segment_segment_distance(a, b, c, d));
            }
        }
    }
    best
}

/// Footprints whose distance to `line` is at most `distance`.
pub fn buffer_query(line: &[Point2], footprints: &GeoFeatureSet, distance: f64) -> Result<BufferQueryResult, EvalError> {
    if !(distance > 0.0) {
        return Err(EvalError::InvalidDistance(distance));
    }
    let line_box = bbox(line);
    let mut hit_ids = BTreeSet::new();
    for (i, f) in footprints.features.iter().enumerate() {
        let fb = bbox(geometry_parts(&f.geometry).iter().flatten());
        if bbox_gap(&line_box, &fb) > distance {
            continue;
        }
        // Only line edges near the footprint can matter.
        let mut near: Vec<Point2> = Vec::new();
        let mut pieces: Vec<Vec<Point2>> = Vec::new();
        for w in line.windows(2) {
            if bbox_gap(&bbox(w), &fb) <= distance {
                if near.last() != Some(&w[0]) {
                    if !near.is_empty() {
                        pieces.push(std::mem::take(&mut near));
                    }
                    near.push(w[0]);
                }
                near.push(w[1]);
            }
        }
        if !near.is_empty() {
            pieces.push(near);
        }
        if line.len() == 1 {
            pieces.push(line.to_vec());
        }
        let inside = match &f.geometry {
            Geometry::Polygon(rings) if !rings.is_empty() => line.iter().any(|p| {
                point_in_ring(*p, &rings[0]) && !rings[1..].iter().any(|h| point_in_ring(*p, h))
            }),
            _ => false,
        };
        if inside || pieces.iter().any(|p| footprint_distance(p, &f.geometry) <= distance) {
            hit_ids.insert(feature_id(f, i));
        }
    }
    Ok(BufferQueryResult {
        buffer_distance: distance,
        hit_count: hit_ids.len(),
        hit_ids,
        comparison: None,
    })
}

/// Copy of `a` annotated with the symmetric difference against `b`.
pub fn compare_buffer_queries(a: &BufferQueryResult, b: &BufferQueryResult) -> Result<BufferQueryResult, EvalError> {
    let union = a.hit_ids.union(&b.hit_ids).count();
    if union == 0 {
        return Err(EvalError::UndefinedPercentage);
    }
    let sym = a.hit_ids.symmetric_difference(&b.hit_ids).count();
    let mut out = a.clone();
    out.comparison = Some(BufferComparison {
        other_hit_ids: b.hit_ids.clone(),
        symmetric_difference_count: sym,
        error_percent: 100.0 * sym as f64 / union as f64,
    });
    Ok(out)
}

/// The footprints with a `hit` property for GIS overlay.
pub fn hits_geojson(footprints: &GeoFeatureSet, result: &BufferQueryResult) -> GeoFeatureSet {
    let mut out = GeoFeatureSet::new(footprints.crs_epsg);
    for (i, f) in footprints.features.iter().enumerate() {
        let hit = result.hit_ids.contains(&feature_id(f, i));
        out.features.push(f.clone().with_property("hit", hit));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::assemble;
    use crate::fitting::{LineSegmentFit, SegmentFit};
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    fn square(cx: f64, cy: f64, half: f64) -> Geometry {
        Geometry::Polygon(vec![pts(&[
            (cx - half, cy - half),
            (cx + half, cy - half),
            (cx + half, cy + half),
            (cx - half, cy + half),
            (cx - half, cy - half),
        ])])
    }

    #[test]
    fn identical_and_shifted_same_x() {
        let refl = pts(&[(0.0, 0.0), (50.0, 0.0), (100.0, 0.0)]);
        let same = Polyline::new(refl.clone()).unwrap();
        let p = pair_vertices(&same, &refl, PairingMode::SameX).unwrap();
        assert!(p.deltas.iter().all(|&d| d == 0.0));
        assert_eq!(rmsd(&p), 0.0);
        assert_eq!(cv_rmsd(&p), Err(EvalError::UndefinedCv));

        let fit = SegmentFit::Line(LineSegmentFit::new(Point2::new(-10.0, 1.0), Point2::new(110.0, 1.0)));
        let a = assemble(&[fit], None, 25833, "t").unwrap();
        let p = pair_vertices(&a, &refl, PairingMode::SameX).unwrap();
        assert_eq!(p.n(), 3);
        assert!(p.deltas.iter().all(|&d| (d - 1.0).abs() < 1e-9));
        assert!((cv_rmsd(&p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_x_drops_and_no_overlap() {
        let line = Polyline::new(pts(&[(0.0, 0.0), (10.0, 0.0)])).unwrap();
        let p = pair_vertices(&line, &pts(&[(5.0, 1.0), (20.0, 1.0)]), PairingMode::SameX).unwrap();
        assert_eq!((p.n(), p.dropped), (1, 1));
        let e = pair_vertices(&line, &pts(&[(20.0, 0.0), (30.0, 0.0)]), PairingMode::SameX);
        assert_eq!(e, Err(EvalError::NoOverlap { dropped: 2 }));
        assert!(matches!(
            pair_vertices(&line, &pts(&[(1.0, 1.0)]), PairingMode::SameX),
            Err(EvalError::TooFewVertices(1))
        ));
    }

    #[test]
    fn hand_computed_metrics() {
        let p = EvaluationPair::from_points(pts(&[(3.0, 4.0), (0.0, 0.0)]), pts(&[(0.0, 0.0), (0.0, 0.0)]));
        assert!((rmsd(&p) - 12.5f64.sqrt()).abs() < 1e-12);
        let p = EvaluationPair::from_points(pts(&[(3.0, 0.0), (0.0, 4.0)]), pts(&[(0.0, 0.0), (0.0, 0.0)]));
        assert!((rmsd(&p) - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((cv_rmsd(&p).unwrap() - 12.5f64.sqrt() / 3.5).abs() < 1e-12);
    }

    #[test]
    fn nearest_point_matches_dense_oracle() {
        let wave: Vec<Point2> = (0..=2000).map(|k| {
            let x = k as f64 * 0.1;
            Point2::new(x, 5.0 * (x / 20.0).sin())
        }).collect();
        let curve = Polyline::new(wave.clone()).unwrap();
        let reference: Vec<Point2> = (1..40)
            .map(|k| {
                let x = k as f64 * 5.0;
                let n = Point2::new(-0.25 * (x / 20.0).cos(), 1.0);
                Point2::new(x, 5.0 * (x / 20.0).sin()) + n * (0.5 / n.norm())
            })
            .collect();
        let p = pair_vertices(&curve, &reference, PairingMode::NearestPoint).unwrap();
        for (t, d) in reference.iter().zip(&p.deltas) {
            let brute = (0..=200_000)
                .map(|k| curve.point_at(k as f64 * curve.length() / 200_000.0).distance(*t))
                .fold(f64::INFINITY, f64::min);
            assert!((d - brute).abs() < 1e-3, "{d} vs {brute}");
            assert!(*d <= brute + 1e-9);
        }
    }

    #[test]
    fn buffer_hits_and_misses() {
        let mut fp = GeoFeatureSet::new(25833);
        fp.features.push(GeoFeature::new(square(50.0, 55.0, 5.0)).with_property("id", "near"));
        fp.features.push(GeoFeature::new(square(50.0, 155.0, 5.0)).with_property("id", "far"));
        fp.features.push(GeoFeature::new(square(50.0, 0.0, 5.0)));
        let line = pts(&[(0.0, 0.0), (100.0, 0.0)]);
        let r = buffer_query(&line, &fp, 100.0).unwrap();
        assert_eq!(r.hit_ids, BTreeSet::from(["near".to_string(), "2".to_string()]));
        assert_eq!(r.hit_count, 2);
        assert!(buffer_query(&line, &fp, 0.0).is_err());
        let g = hits_geojson(&fp, &r);
        assert_eq!(g.features[1].properties["hit"], "false");
    }

    #[test]
    fn buffer_comparison() {
        let mk = |ids: &[&str]| BufferQueryResult {
            buffer_distance: 100.0,
            hit_ids: ids.iter().map(|s| s.to_string()).collect(),
            hit_count: ids.len(),
            comparison: None,
        };
        let c = compare_buffer_queries(&mk(&["1", "2", "3"]), &mk(&["2", "3", "4"])).unwrap();
        let cmp = c.comparison.unwrap();
        assert_eq!(cmp.symmetric_difference_count, 2);
        assert_eq!(cmp.error_percent, 50.0);
        let same = compare_buffer_queries(&mk(&["1"]), &mk(&["1"])).unwrap();
        assert_eq!(same.comparison.unwrap().error_percent, 0.0);
        assert_eq!(compare_buffer_queries(&mk(&[]), &mk(&[])), Err(EvalError::UndefinedPercentage));
    }

    #[test]
    fn pairing_mode_parses() {
        assert_eq!("same-x".parse::<PairingMode>(), Ok(PairingMode::SameX));
        assert_eq!("nearest-point".parse::<PairingMode>(), Ok(PairingMode::NearestPoint));
        assert!("median".parse::<PairingMode>().is_err());
    }

    fn brute_distance(line: &[Point2], g: &Geometry) -> f64 {
        let Geometry::Polygon(rings) = g else { unreachable!() };
        if line.iter().any(|p| point_in_ring(*p, &rings[0])) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for w in line.windows(2) {
            for e in rings[0].windows(2) {
                best = best.min(segment_segment_distance(w[0], w[1], e[0], e[1]));
            }
        }
        best
    }

    proptest! {
        #[test]
        fn rmsd_translation_invariant(
            v in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64), 1..20),
            dx in -1e4..1e4f64, dy in -1e4..1e4f64,
        ) {
            let s: Vec<Point2> = v.iter().map(|q| Point2::new(q.0, q.1)).collect();
            let t: Vec<Point2> = v.iter().map(|q| Point2::new(q.2, q.3)).collect();
            let shift = Point2::new(dx, dy);
            let a = rmsd(&EvaluationPair::from_points(s.clone(), t.clone()));
            let b = rmsd(&EvaluationPair::from_points(
                s.iter().map(|&p| p + shift).collect(),
                t.iter().map(|&p| p + shift).collect(),
            ));
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a) + 1e-9 * (dx.abs() + dy.abs()));
        }

        #[test]
        fn cv_scale_invariant(
            v in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64, 0.1..100.0f64), 1..20),
            lambda in 0.01..100.0f64,
        ) {
            let s: Vec<Point2> = v.iter().map(|q| Point2::new(q.0, q.1)).collect();
            let t: Vec<Point2> = v.iter().map(|q| Point2::new(q.0 + q.2, q.1)).collect();
            let a = cv_rmsd(&EvaluationPair::from_points(s.clone(), t.clone())).unwrap();
            let b = cv_rmsd(&EvaluationPair::from_points(
                s.iter().map(|&p| p * lambda).collect(),
                t.iter().map(|&p| p * lambda).collect(),
            )).unwrap();
            prop_assert!(a >= 1.0 - 1e-12);
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn buffer_matches_oracle_and_is_monotone(
            line in prop::collection::vec((0.0..500.0f64, 0.0..500.0f64), 2..8),
            boxes in prop::collection::vec((0.0..500.0f64, 0.0..500.0f64, 1.0..20.0f64), 1..30),
            d1 in 1.0..150.0f64, extra in 0.0..100.0f64,
        ) {
            let line: Vec<Point2> = line.iter().map(|q| Point2::new(q.0, q.1)).collect();
            let mut fp = GeoFeatureSet::new(25833);
            for b in &boxes {
                fp.features.push(GeoFeature::new(square(b.0, b.1, b.2)));
            }
            let r1 = buffer_query(&line, &fp, d1).unwrap();
            let r2 = buffer_query(&line, &fp, d1 + extra).unwrap();
            prop_assert!(r1.hit_ids.is_subset(&r2.hit_ids));
            for (i, f) in fp.features.iter().enumerate() {
                let want = brute_distance(&line, &f.geometry) <= d1;
                prop_assert_eq!(r1.hit_ids.contains(&i.to_string()), want);
            }
        }

        #[test]
        fn comparison_is_symmetric(
            a in prop::collection::btree_set(0u8..30, 0..20),
            b in prop::collection::btree_set(0u8..30, 1..20),
        ) {
            let mk = |s: &BTreeSet<u8>| BufferQueryResult {
                buffer_distance: 100.0,
                hit_ids: s.iter().map(|v| v.to_string()).collect(),
                hit_count: s.len(),
                comparison: None,
            };
            let x = compare_buffer_queries(&mk(&a), &mk(&b)).unwrap().comparison.unwrap();
            let y = compare_buffer_queries(&mk(&b), &mk(&a)).unwrap().comparison.unwrap();
            prop_assert_eq!(x.error_percent, y.error_percent);
            prop_assert_eq!(x.symmetric_difference_count, y.symmetric_difference_count);
        }
    }
}
