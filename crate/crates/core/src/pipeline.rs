//! End-to-end driver: filtered cloud to raster, centreline, fitted elements
//! and an assembled alignment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{assemble, Alignment, AlignmentError};
use crate::fitting::{classify_and_fit, vertical_profile, FitConfig, FitError, FitOutcome, VerticalProfile};
use crate::geom::Point2;
use crate::pcd_io::{filter_by_class, ClassFilter, LabeledPointCloud, PcdError};
use crate::raster::{
    edt, morph_close, morph_open, rasterize, remove_small_features, BinaryImage, DistanceField, FeatureMode,
    RasterError, RasterGrid, StructuringElement, WorldRect, DEFAULT_MAX_DIM,
};
use crate::skeleton::{extract_graph, Skeleton, SkeletonGraph};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Pcd(#[from] PcdError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error("no points left after filtering to classes {0:?}")]
    EmptyClass(Vec<u8>),
    #[error("no centreline found: the skeleton has no chain to fit")]
    NoCentreline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanupConfig {
    /// Side of the square open/close kernel.
    pub kernel_px: usize,
    /// Blobs under `min_feature_px²` pixels and skeleton spurs under
    /// `min_feature_px` pixels are removed.
    pub min_feature_px: usize,
}

impl Default for CleanupConfig {
    fn default() -> Self {
        Self {
            kernel_px: 3,
            min_feature_px: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub classes: Vec<u8>,
    pub resolution_m: f64,
    pub max_raster_dim: usize,
    /// Empty border added around the cloud's bounding box.
    pub margin_m: f64,
    pub cleanup: CleanupConfig,
    pub fit: FitConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            classes: ClassFilter::track_alignment().codes().collect(),
            resolution_m: 0.4,
            max_raster_dim: DEFAULT_MAX_DIM,
            margin_m: 2.0,
            cleanup: CleanupConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

/// Class filtering and rasterization with a `margin_m` border.
pub fn raster_stage(cloud: &LabeledPointCloud, cfg: &PipelineConfig) -> Result<RasterGrid, PipelineError> {
    let filter = ClassFilter::new(cfg.classes.iter().copied())?;
    let kept = filter_by_class(cloud, &filter);
    let (lo, hi) = kept.bounds().ok_or_else(|| PipelineError::EmptyClass(cfg.classes.clone()))?;
    let m = cfg.margin_m.max(0.0);
    let rect = WorldRect {
        min: Point2::new(lo[0] - m, lo[1] - m),
        max: Point2::new(hi[0] + m + cfg.resolution_m, hi[1] + m + cfg.resolution_m),
    };
    Ok(rasterize(&kept, cfg.resolution_m, Some(rect), cfg.max_raster_dim)?)
}

fn invert(img: &BinaryImage) -> BinaryImage {
    BinaryImage::from_vec(img.width(), img.height(), img.data().iter().map(|v| !v).collect())
}

/// One open then one close with a square kernel, then removal of blobs and
/// holes under `min_feature_px²` pixels.
pub fn clean_occupancy(occupancy: &BinaryImage, cfg: &CleanupConfig) -> BinaryImage {
    let se = StructuringElement::square(cfg.kernel_px.max(1));
    let img = morph_close(&morph_open(occupancy, &se), &se);
    let img = remove_small_features(&img, cfg.min_feature_px, FeatureMode::Area);
    invert(&remove_small_features(&invert(&img), cfg.min_feature_px, FeatureMode::Area))
}

#[derive(Debug, Clone)]
pub struct Centreline {
    pub cleaned: BinaryImage,
    pub field: DistanceField,
    pub skeleton: Skeleton,
    pub graph: SkeletonGraph,
}

pub fn centreline_stage(grid: &RasterGrid, cfg: &PipelineConfig) -> Result<Centreline, PipelineError> {
    let cleaned = clean_occupancy(&grid.occupancy, &cfg.cleanup);
    let field = edt(&cleaned, grid.geometry.resolution)?;
    let (skeleton, graph) = extract_graph(&cleaned, grid.geometry, cfg.cleanup.min_feature_px);
    Ok(Centreline {
        cleaned,
        field,
        skeleton,
        graph,
    })
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub grid: RasterGrid,
    pub centreline: Centreline,
    pub outcome: FitOutcome,
    pub profile: Option<VerticalProfile>,
    pub alignment: Alignment,
}

/// Fits the principal chain and assembles it with its vertical profile.
pub fn fit_stage(
    grid: &RasterGrid,
    centreline: &Centreline,
    cfg: &PipelineConfig,
    crs_epsg: u32,
    name: &str,
) -> Result<(FitOutcome, Option<VerticalProfile>, Alignment), PipelineError> {
    let outcome = classify_and_fit(&centreline.skeleton, &centreline.graph, &centreline.field, &cfg.fit)?;
    let principal = outcome
        .principal()
        .filter(|c| !c.fits.is_empty())
        .ok_or(PipelineError::NoCentreline)?;
    let profile = match vertical_profile(&principal.fits, grid, &cfg.fit.profile) {
        Ok(p) => Some(p),
        Err(FitError::EmptyProfile) => None,
        Err(e) => return Err(e.into()),
    };
    let alignment = assemble(&principal.fits, profile.clone(), crs_epsg, name)?;
    Ok((outcome, profile, alignment))
}

pub fn reconstruct(cloud: &LabeledPointCloud, cfg: &PipelineConfig, name: &str) -> Result<Reconstruction, PipelineError> {
    let grid = raster_stage(cloud, cfg)?;
    let centreline = centreline_stage(&grid, cfg)?;
    let (outcome, profile, alignment) = fit_stage(&grid, &centreline, cfg, cloud.crs_epsg(), name)?;
    Ok(Reconstruction {
        grid,
        centreline,
        outcome,
        profile,
        alignment,
    })
}
