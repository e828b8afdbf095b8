//! Point-cloud and vector-geometry ingest/export.
//!
//! Clouds come in as LAS 1.2–1.4 (point formats 0–3) or as plain-text
//! `x y z label` lines. Coordinates stay in the projected CRS they were
//! delivered in; the EPSG code is carried along but never used to reproject.

mod geojson;
mod las;
mod xyzl;

pub use self::geojson::{read_geojson, write_geojson, GeoFeature, GeoFeatureSet, Geometry};
pub use self::las::{read_las, write_las};
pub use self::xyzl::parse_xyzl;

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Default CRS: ETRS89 / UTM zone 33N, the Saxon survey grid.
pub const DEFAULT_EPSG: u32 = 25833;

/// LAS class code for ground returns.
pub const CLASS_GROUND: u8 = 2;
/// LAS class code for rail returns.
pub const CLASS_RAIL: u8 = 10;

#[derive(Debug, Error)]
pub enum PcdError {
    #[error("not a LAS file: {0}")]
    Format(String),
    #[error("unsupported LAS version {major}.{minor} (1.2 to 1.4 supported)")]
    UnsupportedVersion { major: u8, minor: u8 },
    #[error("unsupported LAS point format {0} (0 to 3 supported)")]
    UnsupportedFormat(u8),
    #[error("truncated LAS point record at byte offset {offset}")]
    Truncated { offset: usize },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid point cloud: {0}")]
    Invalid(String),
    #[error("unsupported geometry type {kind} in feature {index}")]
    UnsupportedGeometry { index: usize, kind: String },
    #[error("invalid GeoJSON: {0}")]
    GeoJson(String),
}

/// Georeferenced 3D points with one LAS class code per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPointCloud {
    points: Vec<[f64; 3]>,
    labels: Vec<u8>,
    crs_epsg: u32,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<[f64; 3]>, labels: Vec<u8>, crs_epsg: u32) -> Result<Self, PcdError> {
        if points.len() != labels.len() {
            return Err(PcdError::Invalid(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(PcdError::Invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self {
            points,
            labels,
            crs_epsg,
        })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn crs_epsg(&self) -> u32 {
        self.crs_epsg
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounds as `(min, max)`; `None` for an empty cloud.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(mut lo, mut hi), p| {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
            (lo, hi)
        }))
    }
}

/// Set of LAS class codes to keep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassFilter {
    include_codes: BTreeSet<u8>,
}

impl ClassFilter {
    pub fn new(codes: impl IntoIterator<Item = u8>) -> Result<Self, PcdError> {
        let include_codes: BTreeSet<u8> = codes.into_iter().collect();
        if include_codes.is_empty() {
            return Err(PcdError::Invalid("class filter must not be empty".into()));
        }
        Ok(Self { include_codes })
    }

    /// Ground + rail, the classes that carry the track alignment.
    pub fn track_alignment() -> Self {
        Self {
            include_codes: [CLASS_GROUND, CLASS_RAIL].into_iter().collect(),
        }
    }

    pub fn contains(&self, code: u8) -> bool {
        self.include_codes.contains(&code)
    }

    pub fn codes(&self) -> impl Iterator<Item = u8> + '_ {
        self.include_codes.iter().copied()
    }
}

/// Keeps the points whose label is in `filter`, preserving order.
pub fn filter_by_class(cloud: &LabeledPointCloud, filter: &ClassFilter) -> LabeledPointCloud {
    let (points, labels) = cloud
        .points
        .iter()
        .zip(&cloud.labels)
        .filter(|(_, l)| filter.contains(**l))
        .map(|(p, l)| (*p, *l))
        .unzip();
    LabeledPointCloud {
        points,
        labels,
        crs_epsg: cloud.crs_epsg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(labels: &[u8]) -> LabeledPointCloud {
        let pts = (0..labels.len()).map(|i| [i as f64, 0.0, 0.0]).collect();
        LabeledPointCloud::new(pts, labels.to_vec(), DEFAULT_EPSG).unwrap()
    }

    #[test]
    fn filter_single_class() {
        let c = cloud(&[2, 10, 6]);
        let f = filter_by_class(&c, &ClassFilter::new([10]).unwrap());
        assert_eq!(f.count(), 1);
        assert_eq!(f.labels(), &[10]);
        assert_eq!(f.points()[0], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn filter_all_present_is_identity() {
        let c = cloud(&[2, 10, 6, 2]);
        let f = filter_by_class(&c, &ClassFilter::new([2, 6, 10]).unwrap());
        assert_eq!(f, c);
    }

    #[test]
    fn filter_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let labels: Vec<u8> = (0..10_000).map(|_| rng.gen_range(0..20)).collect();
        let c = cloud(&labels);
        let f = filter_by_class(&c, &ClassFilter::track_alignment());
        let mut expected = 0;
        for l in &labels {
            if *l == 2 || *l == 10 {
                expected += 1;
            }
        }
        assert_eq!(f.count(), expected);
    }

    #[test]
    fn empty_filter_rejected() {
        assert!(ClassFilter::new([]).is_err());
    }

    #[test]
    fn rejects_mismatched_and_non_finite() {
        assert!(LabeledPointCloud::new(vec![[0.0; 3]], vec![], 1).is_err());
        assert!(LabeledPointCloud::new(vec![[f64::NAN, 0.0, 0.0]], vec![1], 1).is_err());
    }
}
