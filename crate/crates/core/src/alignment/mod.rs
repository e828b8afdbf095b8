//! Stationed horizontal alignment built from fitted elements, plus the
//! vertical profile, with GeoJSON and minimal IFC 4.3 export.

mod export;
mod step;

pub use export::{to_geojson, to_ifc_minimal};
pub use step::{parse_step, StepEntity, StepFile, StepValue};

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

use crate::fitting::{ClothoidSegmentFit, SegmentFit, VerticalProfile};
use crate::geom::{wrap_pi, wrap_two_pi, Point2};

/// Largest positional gap `assemble` will close at a join.
pub const MAX_JOIN_GAP_M: f64 = 0.5;
/// Largest tangent kink `assemble` will absorb at a join.
pub const MAX_JOIN_KINK_RAD: f64 = 0.1;
/// G⁰ tolerance of an assembled alignment.
pub const JOIN_TOLERANCE_M: f64 = 0.01;
/// G¹ tolerance of an assembled alignment.
pub const TANGENT_TOLERANCE_RAD: f64 = 0.005;

#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("no segments to assemble")]
    Empty,
    #[error("gap of {gap:.3} m at join {join}")]
    Discontinuity { join: usize, gap: f64 },
    #[error("tangent kink of {angle:.4} rad at join {join}")]
    Kink { join: usize, angle: f64 },
    #[error("invalid segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("sample spacing must be positive")]
    Spacing,
    #[error("STEP syntax: {0}")]
    Step(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SegmentKind {
    Line,
    #[serde(rename = "CIRCULARARC")]
    CircularArc,
    Clothoid,
}

impl SegmentKind {
    pub fn ifc_name(self) -> &'static str {
        match self {
            SegmentKind::Line => "LINE",
            SegmentKind::CircularArc => "CIRCULARARC",
            SegmentKind::Clothoid => "CLOTHOID",
        }
    }
}

/// One horizontal element in IFC terms. Radii are signed (positive turning
/// left) and infinite for straight ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalSegment {
    pub kind: SegmentKind,
    pub start_point: Point2,
    pub start_direction: f64,
    pub segment_length: f64,
    pub start_radius: f64,
    pub end_radius: f64,
}

fn curvature(radius: f64) -> f64 {
    if radius.is_infinite() {
        0.0
    } else {
        1.0 / radius
    }
}

fn radius(kappa: f64) -> f64 {
    if kappa == 0.0 {
        f64::INFINITY
    } else {
        1.0 / kappa
    }
}

impl HorizontalSegment {
    pub fn from_fit(fit: &SegmentFit) -> Self {
        let (k0, k1) = fit.curvatures();
        let kind = match fit {
            SegmentFit::Line(_) => SegmentKind::Line,
            SegmentFit::Arc(_) => SegmentKind::CircularArc,
            SegmentFit::Clothoid(_) => SegmentKind::Clothoid,
        };
        let (start_radius, end_radius) = match fit {
            SegmentFit::Arc(a) => (a.signed_radius(), a.signed_radius()),
            _ => (radius(k0), radius(k1)),
        };
        Self {
            kind,
            start_point: fit.start_point(),
            start_direction: wrap_two_pi(fit.start_heading()),
            segment_length: fit.length(),
            start_radius,
            end_radius,
        }
    }

    pub fn start_curvature(&self) -> f64 {
        curvature(self.start_radius)
    }

    pub fn end_curvature(&self) -> f64 {
        curvature(self.end_radius)
    }

    /// Position and heading at arc length `s` (clamped to the segment).
    pub fn point_at(&self, s: f64) -> (Point2, f64) {
        let s = s.clamp(0.0, self.segment_length);
        let (p0, t0) = (self.start_point, self.start_direction);
        match self.kind {
            SegmentKind::Line => (p0 + Point2::from_angle(t0) * s, t0),
            SegmentKind::CircularArc => {
                let r = self.start_radius;
                let center = p0 + Point2::from_angle(t0 + FRAC_PI_2) * r;
                let t = t0 + s / r;
                (center - Point2::from_angle(t + FRAC_PI_2) * r, t)
            }
            SegmentKind::Clothoid => {
                let (k0, k1) = (self.start_curvature(), self.end_curvature());
                let rate = (k1 - k0) / self.segment_length;
                let c = ClothoidSegmentFit::from_parameters(p0, t0, k0, rate, 0.0);
                let (p, t, _) = c.state_at(s);
                (p, t)
            }
        }
    }

    pub fn end_point(&self) -> Point2 {
        self.point_at(self.segment_length).0
    }

    pub fn end_direction(&self) -> f64 {
        self.point_at(self.segment_length).1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub name: String,
    pub crs_epsg: u32,
    pub horizontal: Vec<HorizontalSegment>,
    pub vertical: Option<VerticalProfile>,
    /// `stations[k]` is the start station of segment `k`; the last entry is the total length.
    pub stations: Vec<f64>,
}

/// A densified alignment vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSample {
    pub station: f64,
    pub point: Point2,
    pub z: Option<f64>,
}

impl Alignment {
    pub fn total_length(&self) -> f64 {
        self.stations.last().copied().unwrap_or(0.0)
    }

    /// Position and heading at a station (clamped to the alignment).
    pub fn point_at_station(&self, station: f64) -> (Point2, f64) {
        let n = self.horizontal.len();
        let k = self.stations[1..n].partition_point(|&s| s <= station);
        self.horizontal[k].point_at(station - self.stations[k])
    }

    /// Largest positional gap and tangent kink over all joins.
    pub fn join_errors(&self) -> (f64, f64) {
        self.horizontal.windows(2).fold((0.0, 0.0), |(g, k), w| {
            let gap = w[0].end_point().distance(w[1].start_point);
            let kink = wrap_pi(w[0].end_direction() - w[1].start_direction).abs();
            (f64::max(g, gap), f64::max(k, kink))
        })
    }
}

/// Converts fits to horizontal segments, checks and snaps every join and
/// computes stations.
pub fn assemble(
    fits: &[SegmentFit],
    profile: Option<VerticalProfile>,
    crs_epsg: u32,
    name: &str,
) -> Result<Alignment, AlignmentError> {
    if fits.is_empty() {
        return Err(AlignmentError::Empty);
    }
    let mut horizontal: Vec<HorizontalSegment> = Vec::with_capacity(fits.len());
    for (index, fit) in fits.iter().enumerate() {
        let mut seg = HorizontalSegment::from_fit(fit);
        if !(seg.segment_length > 0.0) || !seg.segment_length.is_finite() {
            return Err(AlignmentError::InvalidSegment {
                index,
                reason: format!("length {}", seg.segment_length),
            });
        }
        if let Some(prev) = horizontal.last() {
            let join = index - 1;
            let (end, dir) = prev.point_at(prev.segment_length);
            let gap = end.distance(seg.start_point);
            if gap > MAX_JOIN_GAP_M {
                return Err(AlignmentError::Discontinuity { join, gap });
            }
            let angle = wrap_pi(dir - seg.start_direction).abs();
            if angle > MAX_JOIN_KINK_RAD {
                return Err(AlignmentError::Kink { join, angle });
            }
            seg.start_point = end;
            seg.start_direction = wrap_two_pi(dir);
        }
        horizontal.push(seg);
    }
    let mut stations = vec![0.0];
    for s in &horizontal {
        stations.push(stations[stations.len() - 1] + s.segment_length);
    }
    Ok(Alignment {
        name: name.to_string(),
        crs_epsg,
        horizontal,
        vertical: profile,
        stations,
    })
}

/// Points at stations `0, spacing, 2·spacing, …` and the end station.
pub fn sample_alignment(a: &Alignment, spacing: f64) -> Result<Vec<AlignmentSample>, AlignmentError> {
    if !(spacing > 0.0) {
        return Err(AlignmentError::Spacing);
    }
    let total = a.total_length();
    let mut stations: Vec<f64> = (0..)
        .map(|k| k as f64 * spacing)
        .take_while(|&s| s < total - 1e-9)
        .collect();
    stations.push(total);
    Ok(stations
        .into_iter()
        .map(|station| AlignmentSample {
            station,
            point: a.point_at_station(station).0,
            z: a.vertical.as_ref().map(|v| v.height_at(station)),
        })
        .collect())
}
