//! Ground-truth alignments and trackbed point clouds swept along them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;

use crate::alignment::{assemble, Alignment};
use crate::fitting::{ArcSegmentFit, ClothoidSegmentFit, LineSegmentFit, SegmentFit};
use crate::geom::Point2;
use crate::pcd_io::{LabeledPointCloud, PcdError, CLASS_GROUND, CLASS_RAIL, DEFAULT_EPSG};

/// Element lengths and arc radius of a symmetric transition curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSpec {
    pub origin: Point2,
    pub heading: f64,
    pub lead_in_m: f64,
    pub transition_m: f64,
    /// Signed: positive turns left.
    pub radius_m: f64,
    pub arc_m: f64,
    pub lead_out_m: f64,
}

impl Default for CurveSpec {
    fn default() -> Self {
        Self {
            origin: Point2::new(411_250.0, 5_656_100.0),
            heading: 0.35,
            lead_in_m: 500.0,
            transition_m: 120.0,
            radius_m: 800.0,
            arc_m: 400.0,
            lead_out_m: 500.0,
        }
    }
}

/// Line, clothoid, arc, clothoid, line with exact G² joins.
pub fn transition_curve(spec: &CurveSpec) -> Vec<SegmentFit> {
    let k = 1.0 / spec.radius_m;
    let dir = Point2::from_angle(spec.heading);
    let l1 = LineSegmentFit::new(spec.origin, spec.origin + dir * spec.lead_in_m);
    let c1 = ClothoidSegmentFit::from_parameters(l1.p_end, spec.heading, 0.0, k / spec.transition_m, spec.transition_m);
    let (p, t, _) = c1.state_at(spec.transition_m);
    let sense = k.signum();
    let center = p + Point2::from_angle(t + FRAC_PI_2) * spec.radius_m;
    let arc = ArcSegmentFit::new(
        center,
        spec.radius_m.abs(),
        t - sense * FRAC_PI_2,
        spec.arc_m / spec.radius_m,
    );
    let t2 = t + spec.arc_m * k;
    let c2 = ClothoidSegmentFit::from_parameters(arc.p_end, t2, k, -k / spec.transition_m, spec.transition_m);
    let (p3, t3, _) = c2.state_at(spec.transition_m);
    let l2 = LineSegmentFit::new(p3, p3 + Point2::from_angle(t3) * spec.lead_out_m);
    vec![
        SegmentFit::Line(l1),
        SegmentFit::Clothoid(c1),
        SegmentFit::Arc(arc),
        SegmentFit::Clothoid(c2),
        SegmentFit::Line(l2),
    ]
}

/// The default transition curve assembled as an alignment.
pub fn reference_alignment() -> Alignment {
    assemble(&transition_curve(&CurveSpec::default()), None, DEFAULT_EPSG, "reference")
        .expect("constructed joins are exact")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RibbonSpec {
    pub width_m: f64,
    pub density_per_m2: f64,
    pub base_height_m: f64,
    pub grade: f64,
    /// Extra points of an unrelated class scattered around the ribbon,
    /// as a fraction of the trackbed points.
    pub clutter_fraction: f64,
    pub seed: u64,
}

impl Default for RibbonSpec {
    fn default() -> Self {
        Self {
            width_m: 6.0,
            density_per_m2: 20.0,
            base_height_m: 120.0,
            grade: 0.004,
            clutter_fraction: 0.05,
            seed: 7,
        }
    }
}

/// Uniform random trackbed points in a band of `width_m` around the
/// alignment. Points are labelled ground or rail at random; clutter points
/// (class 1) lie within 30 m of the band.
pub fn ribbon_cloud(a: &Alignment, spec: &RibbonSpec) -> Result<LabeledPointCloud, PcdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = a.total_length();
    let n = (total * spec.width_m * spec.density_per_m2).round() as usize;
    let clutter = (n as f64 * spec.clutter_fraction).round() as usize;
    let mut points = Vec::with_capacity(n + clutter);
    let mut labels = Vec::with_capacity(n + clutter);
    let half = 0.5 * spec.width_m;
    for k in 0..n + clutter {
        let s = rng.gen_range(0.0..total);
        let (p, t) = a.point_at_station(s);
        let normal = Point2::from_angle(t + FRAC_PI_2);
        let z = spec.base_height_m + spec.grade * s;
        if k < n {
            let off = rng.gen_range(-half..half);
            let q = p + normal * off;
            points.push([q.x, q.y, z]);
            labels.push(if rng.gen_bool(0.5) { CLASS_GROUND } else { CLASS_RAIL });
        } else {
            let off = rng.gen_range(half + 2.0..half + 30.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let q = p + normal * off;
            points.push([q.x, q.y, z + rng.gen_range(0.0..15.0)]);
            labels.push(1);
        }
    }
    LabeledPointCloud::new(points, labels, a.crs_epsg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::wrap_pi;

    #[test]
    fn reference_is_g1_and_has_expected_lengths() {
        let a = reference_alignment();
        assert_eq!(a.horizontal.len(), 5);
        let (gap, kink) = a.join_errors();
        assert!(gap < 1e-9 && kink < 1e-12);
        assert!((a.total_length() - 1640.0).abs() < 1e-9);
        assert_eq!(a.horizontal[2].start_radius, 800.0);
        let turn = wrap_pi(a.horizontal[4].start_direction - a.horizontal[0].start_direction);
        assert!((turn - (400.0 / 800.0 + 120.0 / 800.0)).abs() < 1e-12);
    }

    #[test]
    fn ribbon_points_stay_in_band() {
        let a = reference_alignment();
        let cloud = ribbon_cloud(&a, &RibbonSpec { density_per_m2: 0.2, ..Default::default() }).unwrap();
        let expect = (1640.0f64 * 6.0 * 0.2).round() as usize;
        let rail = cloud.labels().iter().filter(|&&l| l != 1).count();
        assert_eq!(rail, expect);
        assert!(cloud.count() > expect);
    }
}
