//! 2.5D rasterization of a trackbed cloud and the binary image operators the
//! centreline extraction relies on.

mod edt;
mod morph;
mod render;

pub use edt::{edt, squared_edt, DistanceField};
pub use morph::{
    dilate, erode, hit_or_miss, label_components, morph_close, morph_open, remove_small_features,
    FeatureMode, SeCell, StructuringElement,
};
pub(crate) use morph::NEIGHBORS8;
pub use render::{
    binary_from_png, binary_to_png, distance_to_png, heights_from_png, heights_to_png,
    render_orientation_hsv, world_file, HeightEncoding,
};

use crate::geom::Point2;
use crate::pcd_io::LabeledPointCloud;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted raster side, in pixels.
pub const DEFAULT_MAX_DIM: usize = 20_000;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot rasterize an empty cloud")]
    EmptyCloud,
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("raster of {width}x{height} pixels exceeds the {max}x{max} limit")]
    TooLarge {
        width: usize,
        height: usize,
        max: usize,
    },
    #[error("distance transform needs at least one background pixel")]
    NoBackground,
    #[error("image dimensions do not match: {0}")]
    Dimensions(String),
    #[error("PNG error: {0}")]
    Png(String),
}

/// Placement of a pixel lattice in world coordinates. Pixel `(i, j)` covers
/// `[x0 + i·res, x0 + (i+1)·res) × [y0 + j·res, y0 + (j+1)·res)`; `j` grows
/// northwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    pub fn pixel_center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Pixel containing `p`, if inside the lattice.
    pub fn pixel_of(&self, p: Point2) -> Option<(usize, usize)> {
        let fi = ((p.x - self.origin.x) / self.resolution).floor();
        let fj = ((p.y - self.origin.y) / self.resolution).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.width as f64 || fj >= self.height as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major boolean lattice, row 0 at the south edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height, "lattice size mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    /// Builds an image from rows given top (north) first, `#` = foreground.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut img = Self::new(width, height);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), width, "ragged ascii image");
            for (i, ch) in row.bytes().enumerate() {
                img.set(i, height - 1 - r, ch == b'#');
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[j * self.width + i]
    }

    /// Out-of-bounds reads as background.
    #[inline]
    pub fn get_signed(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.width
            && (j as usize) < self.height
            && self.data[j as usize * self.width + i as usize]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let w = self.width;
        self.data[j * w + i] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.data.iter().zip(&other.data).all(|(a, b)| !*a || *b)
    }

    /// Foreground pixels in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(move |(k, _)| (k % self.width, k / self.width))
    }
}

/// Axis-aligned world rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldRect {
    pub min: Point2,
    pub max: Point2,
}

/// Binary occupancy plus per-cell maximum height.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub geometry: GridGeometry,
    pub occupancy: BinaryImage,
    /// NaN where the cell is empty.
    heights: Vec<f64>,
}

impl RasterGrid {
    pub fn from_parts(geometry: GridGeometry, heights: Vec<f64>) -> Result<Self, RasterError> {
        if heights.len() != geometry.len() {
            return Err(RasterError::Dimensions(format!(
                "{} heights for {}x{} grid",
                heights.len(),
                geometry.width,
                geometry.height
            )));
        }
        let occupancy = BinaryImage::from_vec(
            geometry.width,
            geometry.height,
            heights.iter().map(|h| !h.is_nan()).collect(),
        );
        Ok(Self {
            geometry,
            occupancy,
            heights,
        })
    }

    pub fn height_at(&self, i: usize, j: usize) -> Option<f64> {
        let h = self.heights[j * self.geometry.width + i];
        (!h.is_nan()).then_some(h)
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }
}

/// Bins the cloud into square cells of `resolution` meters. Without explicit
/// bounds the grid starts at the cloud's minimum corner and grows to whole
/// pixels until every point is covered.
pub fn rasterize(
    cloud: &LabeledPointCloud,
    resolution: f64,
    bounds: Option<WorldRect>,
    max_dim: usize,
) -> Result<RasterGrid, RasterError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(RasterError::InvalidResolution(resolution));
    }
    let (lo, hi) = cloud.bounds().ok_or(RasterError::EmptyCloud)?;
    let (origin, width, height) = match bounds {
        Some(r) => (
            r.min,
            (((r.max.x - r.min.x) / resolution).ceil() as usize).max(1),
            (((r.max.y - r.min.y) / resolution).ceil() as usize).max(1),
        ),
        None => {
            let w = ((hi[0] - lo[0]) / resolution).floor() + 1.0;
            let h = ((hi[1] - lo[1]) / resolution).floor() + 1.0;
            if w > max_dim as f64 || h > max_dim as f64 {
                return Err(RasterError::TooLarge {
                    width: w as usize,
                    height: h as usize,
                    max: max_dim,
                });
            }
            (Point2::new(lo[0], lo[1]), w as usize, h as usize)
        }
    };
    if width > max_dim || height > max_dim {
        return Err(RasterError::TooLarge {
            width,
            height,
            max: max_dim,
        });
    }
    let geometry = GridGeometry {
        origin,
        resolution,
        width,
        height,
    };
    let mut heights = vec![f64::NAN; width * height];
    for p in cloud.points() {
        if let Some((i, j)) = geometry.pixel_of(Point2::new(p[0], p[1])) {
            let cell = &mut heights[j * width + i];
            if cell.is_nan() || p[2] > *cell {
                *cell = p[2];
            }
        }
    }
    RasterGrid::from_parts(geometry, heights)
}
