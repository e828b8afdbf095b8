//! Segment classification and parametric fitting: probabilistic Hough lines,
//! circular arcs on a discrete radius grid, Visvalingam–Whyatt decimation,
//! G¹ clothoid bridges and the vertical profile.

mod chain;
mod circle;
mod classify;
mod clothoid;
mod decimate;
mod fresnel;
mod hough;
mod profile;

pub use chain::{build_chains, Chain};
pub use circle::{detect_circles, extract_arcs, fit_circle_algebraic, CircleCandidate};
pub use classify::{classify_and_fit, ChainFit, FitOutcome, SkipRecord};
pub use clothoid::{evaluate_clothoid, fit_clothoid_g1, spiral_transition, ClothoidSegmentFit};
pub use decimate::{visvalingam_whyatt, visvalingam_whyatt_indices};
pub use fresnel::{fresnel_cs, phase_moments};
pub use hough::{hough_lines, HoughLine};
pub use profile::{vertical_profile, VerticalProfile};

use crate::geom::{wrap_two_pi, Point2};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("clothoid endpoints coincide")]
    CoincidentPoints,
    #[error("degenerate G1 data: both tangents oppose the chord")]
    Degenerate,
    #[error("clothoid solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { residual: f64, iterations: usize },
    #[error("arc length {s} outside [0, {length}]")]
    Domain { s: f64, length: f64 },
    #[error("no occupied raster cell near the alignment")]
    EmptyProfile,
    #[error("invalid fit configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoughConfig {
    pub min_length_m: f64,
    pub max_gap_m: f64,
    pub threshold: u32,
    pub angular_resolution_deg: f64,
    pub radial_resolution_px: f64,
    pub seed: u64,
}

impl Default for HoughConfig {
    fn default() -> Self {
        Self {
            min_length_m: 25.0,
            max_gap_m: 2.0,
            threshold: 50,
            angular_resolution_deg: 1.0,
            radial_resolution_px: 1.0,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircleConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub r_step: f64,
    /// Distance from a skeleton pixel centre to the circle for it to count as an inlier.
    pub inlier_tolerance_m: f64,
    pub min_inliers: usize,
    pub min_subtended_deg: f64,
}

impl Default for CircleConfig {
    fn default() -> Self {
        Self {
            r_min: 450.0,
            r_max: 10_000.0,
            r_step: 5.0,
            inlier_tolerance_m: 0.4,
            min_inliers: 30,
            min_subtended_deg: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClothoidConfig {
    pub newton_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ClothoidConfig {
    fn default() -> Self {
        Self {
            newton_tolerance: 1e-10,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecimationConfig {
    pub area_threshold_m2: f64,
}

impl Default for DecimationConfig {
    fn default() -> Self {
        Self {
            area_threshold_m2: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    pub spacing_m: f64,
    pub search_radius_cells: usize,
    pub max_piece_m: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            spacing_m: 5.0,
            search_radius_cells: 5,
            max_piece_m: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub hough_line: HoughConfig,
    pub circle: CircleConfig,
    pub clothoid: ClothoidConfig,
    pub decimation: DecimationConfig,
    pub profile: ProfileConfig,
    /// Half-width (pixels) of the moving average applied to chains before fitting.
    pub smoothing_half_window_px: usize,
    /// Largest distance of a smoothed chain point from a line or arc it belongs to.
    pub fit_tolerance_m: f64,
    /// Largest heading change accepted across a straight element.
    pub max_line_turn_rad: f64,
    /// Free runs at a chain end shorter than this are skipped, not bridged.
    pub min_free_end_length_m: f64,
    /// Shortest clothoid bridge inserted between two anchored elements.
    pub min_bridge_length_m: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            hough_line: HoughConfig::default(),
            circle: CircleConfig::default(),
            clothoid: ClothoidConfig::default(),
            decimation: DecimationConfig::default(),
            profile: ProfileConfig::default(),
            smoothing_half_window_px: 10,
            fit_tolerance_m: 0.2,
            max_line_turn_rad: 0.01,
            min_free_end_length_m: 10.0,
            min_bridge_length_m: 4.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let c = &self.circle;
        let h = &self.hough_line;
        let checks = [
            (c.r_min > 0.0 && c.r_min < c.r_max, "circle.r_min must be positive and below r_max"),
            (c.r_step > 0.0, "circle.r_step must be positive"),
            (c.inlier_tolerance_m > 0.0, "circle.inlier_tolerance_m must be positive"),
            (h.min_length_m > 0.0 && h.max_gap_m >= 0.0, "hough_line lengths must be positive"),
            (h.angular_resolution_deg > 0.0 && h.radial_resolution_px > 0.0, "hough_line resolutions must be positive"),
            (self.clothoid.newton_tolerance > 0.0, "clothoid.newton_tolerance must be positive"),
            (self.decimation.area_threshold_m2 >= 0.0, "decimation.area_threshold_m2 must be non-negative"),
            (self.fit_tolerance_m > 0.0, "fit_tolerance_m must be positive"),
            (self.profile.spacing_m > 0.0 && self.profile.max_piece_m > 0.0, "profile spacing and piece length must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(FitError::Config(msg.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegmentFit {
    pub p_start: Point2,
    pub p_end: Point2,
    /// Heading in `[0, 2π)`.
    pub direction: f64,
    pub length: f64,
}

impl LineSegmentFit {
    pub fn new(p_start: Point2, p_end: Point2) -> Self {
        let d = p_end - p_start;
        Self {
            p_start,
            p_end,
            direction: wrap_two_pi(d.angle()),
            length: d.norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Clockwise,
    Counterclockwise,
}

impl Sense {
    pub fn sign(self) -> f64 {
        match self {
            Sense::Counterclockwise => 1.0,
            Sense::Clockwise => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcSegmentFit {
    pub center: Point2,
    pub radius: f64,
    /// Polar angles about the centre, in travel order (unwrapped: the end
    /// angle differs from the start by the signed sweep).
    pub theta_start: f64,
    pub theta_end: f64,
    pub sense: Sense,
    pub p_start: Point2,
    pub p_end: Point2,
    pub length: f64,
}

impl ArcSegmentFit {
    /// Arc from polar angle `theta_start` sweeping `sweep` radians (positive
    /// counter-clockwise).
    pub fn new(center: Point2, radius: f64, theta_start: f64, sweep: f64) -> Self {
        let theta_end = theta_start + sweep;
        let at = |t: f64| Point2::new(center.x + radius * t.cos(), center.y + radius * t.sin());
        Self {
            center,
            radius,
            theta_start,
            theta_end,
            sense: if sweep >= 0.0 {
                Sense::Counterclockwise
            } else {
                Sense::Clockwise
            },
            p_start: at(theta_start),
            p_end: at(theta_end),
            length: radius * sweep.abs(),
        }
    }

    pub fn sweep(&self) -> f64 {
        self.theta_end - self.theta_start
    }

    /// Signed radius: positive for counter-clockwise travel.
    pub fn signed_radius(&self) -> f64 {
        self.sense.sign() * self.radius
    }
}

/// One fitted horizontal element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SegmentFit {
    Line(LineSegmentFit),
    Arc(ArcSegmentFit),
    Clothoid(ClothoidSegmentFit),
}

impl SegmentFit {
    pub fn kind(&self) -> &'static str {
        match self {
            SegmentFit::Line(_) => "line",
            SegmentFit::Arc(_) => "arc",
            SegmentFit::Clothoid(_) => "clothoid",
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            SegmentFit::Line(l) => l.length,
            SegmentFit::Arc(a) => a.length,
            SegmentFit::Clothoid(c) => c.length,
        }
    }

    pub fn start_point(&self) -> Point2 {
        match self {
            SegmentFit::Line(l) => l.p_start,
            SegmentFit::Arc(a) => a.p_start,
            SegmentFit::Clothoid(c) => c.p_start,
        }
    }

    pub fn end_point(&self) -> Point2 {
        match self {
            SegmentFit::Line(l) => l.p_end,
            SegmentFit::Arc(a) => a.p_end,
            SegmentFit::Clothoid(c) => c.p_end,
        }
    }

    pub fn start_heading(&self) -> f64 {
        match self {
            SegmentFit::Line(l) => l.direction,
            SegmentFit::Arc(a) => a.theta_start + a.sense.sign() * FRAC_PI_2,
            SegmentFit::Clothoid(c) => c.theta_start,
        }
    }

    pub fn end_heading(&self) -> f64 {
        match self {
            SegmentFit::Line(l) => l.direction,
            SegmentFit::Arc(a) => a.theta_end + a.sense.sign() * FRAC_PI_2,
            SegmentFit::Clothoid(c) => c.theta_end,
        }
    }

    /// Signed curvature at the start and end (1/m, positive turning left).
    pub fn curvatures(&self) -> (f64, f64) {
        match self {
            SegmentFit::Line(_) => (0.0, 0.0),
            SegmentFit::Arc(a) => {
                let k = 1.0 / a.signed_radius();
                (k, k)
            }
            SegmentFit::Clothoid(c) => (c.kappa_start, c.kappa_end()),
        }
    }

    /// Position and heading at arc length `s` (clamped to the element).
    pub fn point_at(&self, s: f64) -> (Point2, f64) {
        let s = s.clamp(0.0, self.length());
        match self {
            SegmentFit::Line(l) => {
                let u = Point2::from_angle(l.direction);
                (l.p_start + u * s, l.direction)
            }
            SegmentFit::Arc(a) => {
                let t = a.theta_start + a.sense.sign() * s / a.radius;
                (
                    Point2::new(a.center.x + a.radius * t.cos(), a.center.y + a.radius * t.sin()),
                    t + a.sense.sign() * FRAC_PI_2,
                )
            }
            SegmentFit::Clothoid(c) => {
                let (p, t, _) = c.state_at(s);
                (p, t)
            }
        }
    }
}
