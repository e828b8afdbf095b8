use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FitError, ProfileConfig, SegmentFit};
use crate::raster::RasterGrid;

/// Piecewise cubic height over station, continuous at the breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalProfile {
    /// `(station, height)` observations used for the fit.
    pub samples: Vec<(f64, f64)>,
    /// Piece boundaries, starting at 0 and ending at the alignment length.
    pub breakpoints: Vec<f64>,
    /// Per piece `[a0, a1, a2, a3]` in the local offset `u = s − breakpoint`.
    pub coefficients: Vec<[f64; 4]>,
}

impl VerticalProfile {
    /// Height at station `s` (clamped to the profile's extent).
    pub fn height_at(&self, s: f64) -> f64 {
        let last = self.coefficients.len() - 1;
        let k = self.breakpoints[1..].partition_point(|&b| b < s).min(last);
        let u = (s - self.breakpoints[k]).clamp(0.0, self.breakpoints[k + 1] - self.breakpoints[k]);
        let a = &self.coefficients[k];
        a[0] + u * (a[1] + u * (a[2] + u * a[3]))
    }
}

/// Nearest occupied cell to `(ci, cj)` within a square search window.
fn nearest_height(grid: &RasterGrid, ci: usize, cj: usize, radius: usize) -> Option<f64> {
    let g = &grid.geometry;
    let mut best: Option<(usize, f64)> = None;
    let (i0, i1) = (ci.saturating_sub(radius), (ci + radius).min(g.width - 1));
    let (j0, j1) = (cj.saturating_sub(radius), (cj + radius).min(g.height - 1));
    for j in j0..=j1 {
        for i in i0..=i1 {
            if let Some(h) = grid.height_at(i, j) {
                let d = i.abs_diff(ci).pow(2) + j.abs_diff(cj).pow(2);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, h));
                }
            }
        }
    }
    best.map(|b| b.1)
}

/// Samples the raster heights along the fitted horizontal elements every
/// `spacing_m` and fits a C⁰ piecewise cubic, pieces at most `max_piece_m`
/// long, by linear least squares.
///
/// Each piece `k` on `t ∈ [0, 1]` is `v_k(1−t) + v_{k+1}t + t(1−t)(c₁ + c₂t)`,
/// so continuity holds by construction. Weak ridge terms keep pieces
/// without samples determined.
pub fn vertical_profile(fits: &[SegmentFit], grid: &RasterGrid, cfg: &ProfileConfig) -> Result<VerticalProfile, FitError> {
    let total: f64 = fits.iter().map(SegmentFit::length).sum();
    if fits.is_empty() || total <= 0.0 {
        return Err(FitError::EmptyProfile);
    }
    let count = (total / cfg.spacing_m).floor() as usize;
    let mut samples = Vec::new();
    let mut offset = 0.0;
    let mut fi = 0;
    for k in 0..=count + 1 {
        let s = if k <= count { k as f64 * cfg.spacing_m } else { total };
        if k == count + 1 && (total - count as f64 * cfg.spacing_m) < 1e-9 {
            break;
        }
        while fi + 1 < fits.len() && s > offset + fits[fi].length() {
            offset += fits[fi].length();
            fi += 1;
        }
        let (p, _) = fits[fi].point_at(s - offset);
        let Some((ci, cj)) = grid.geometry.pixel_of(p) else {
            continue;
        };
        if let Some(h) = nearest_height(grid, ci, cj, cfg.search_radius_cells) {
            samples.push((s, h));
        }
    }
    if samples.is_empty() {
        return Err(FitError::EmptyProfile);
    }

    let pieces = ((total / cfg.max_piece_m).ceil() as usize).max(1);
    let h = total / pieces as f64;
    let breakpoints: Vec<f64> = (0..=pieces).map(|k| if k == pieces { total } else { k as f64 * h }).collect();
    let unknowns = (pieces + 1) + 2 * pieces;
    let ridge = 1e-6;
    let rows = samples.len() + 2 * pieces + pieces.saturating_sub(1);
    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let mut b = DVector::<f64>::zeros(rows);
    for (r, &(s, z)) in samples.iter().enumerate() {
        let k = ((s / h).floor() as usize).min(pieces - 1);
        let t = (s - breakpoints[k]) / h;
        let w = t * (1.0 - t);
        a[(r, k)] = 1.0 - t;
        a[(r, k + 1)] = t;
        a[(r, pieces + 1 + 2 * k)] = w;
        a[(r, pieces + 2 + 2 * k)] = w * t;
        b[r] = z;
    }
    let mut r = samples.len();
    for k in 0..2 * pieces {
        a[(r, pieces + 1 + k)] = ridge;
        r += 1;
    }
    for k in 1..pieces {
        a[(r, k - 1)] = -0.5 * ridge;
        a[(r, k)] = ridge;
        a[(r, k + 1)] = -0.5 * ridge;
        r += 1;
    }
    let x = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|_| FitError::EmptyProfile)?;
    let coefficients = (0..pieces)
        .map(|k| {
            let (va, vb) = (x[k], x[k + 1]);
            let (c1, c2) = (x[pieces + 1 + 2 * k], x[pieces + 2 + 2 * k]);
            let len = breakpoints[k + 1] - breakpoints[k];
            let tb = [va, vb - va + c1, c2 - c1, -c2];
            [tb[0], tb[1] / len, tb[2] / (len * len), tb[3] / (len * len * len)]
        })
        .collect();
    Ok(VerticalProfile {
        samples,
        breakpoints,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::LineSegmentFit;
    use crate::geom::Point2;
    use crate::raster::GridGeometry;

    fn grid_with(f: impl Fn(Point2) -> f64, hole: Option<(f64, f64)>) -> RasterGrid {
        let g = GridGeometry {
            origin: Point2::new(0.0, -4.0),
            resolution: 0.4,
            width: 3000,
            height: 20,
        };
        let mut heights = vec![f64::NAN; g.len()];
        for j in 5..15 {
            for i in 0..g.width {
                let p = g.pixel_center(i, j);
                if hole.is_some_and(|(a, b)| p.x >= a && p.x <= b) {
                    continue;
                }
                heights[j * g.width + i] = f(p);
            }
        }
        RasterGrid::from_parts(g, heights).unwrap()
    }

    fn straight() -> Vec<SegmentFit> {
        vec![SegmentFit::Line(LineSegmentFit::new(Point2::new(1.0, 0.0), Point2::new(1150.0, 0.0)))]
    }

    #[test]
    fn flat_track_is_constant() {
        let grid = grid_with(|_| 120.0, None);
        let vp = vertical_profile(&straight(), &grid, &ProfileConfig::default()).unwrap();
        assert_eq!(vp.coefficients.len(), 3);
        for s in [0.0, 17.0, 383.3, 700.0, 1149.0] {
            assert!((vp.height_at(s) - 120.0).abs() < 1e-6);
        }
    }

    #[test]
    fn one_percent_grade() {
        let grid = grid_with(|p| 100.0 + 0.01 * p.x, None);
        let vp = vertical_profile(&straight(), &grid, &ProfileConfig::default()).unwrap();
        for c in &vp.coefficients {
            assert!((c[1] - 0.01).abs() < 0.0005, "{c:?}");
        }
    }

    #[test]
    fn continuous_at_breakpoints_and_bridges_gaps() {
        let grid = grid_with(|p| 50.0 + 3.0 * (p.x / 150.0).sin(), Some((300.0, 310.0)));
        let vp = vertical_profile(&straight(), &grid, &ProfileConfig::default()).unwrap();
        for k in 1..vp.coefficients.len() {
            let left = {
                let a = &vp.coefficients[k - 1];
                let u = vp.breakpoints[k] - vp.breakpoints[k - 1];
                a[0] + u * (a[1] + u * (a[2] + u * a[3]))
            };
            assert!((left - vp.coefficients[k][0]).abs() < 1e-9);
        }
        let truth = 50.0 + 3.0 * (306.0f64 / 150.0).sin();
        assert!((vp.height_at(305.0) - truth).abs() < 0.2);
    }

    #[test]
    fn empty_grid_errors() {
        let grid = grid_with(|_| f64::NAN, None);
        assert_eq!(
            vertical_profile(&straight(), &grid, &ProfileConfig::default()),
            Err(FitError::EmptyProfile)
        );
        assert_eq!(vertical_profile(&[], &grid, &ProfileConfig::default()), Err(FitError::EmptyProfile));
    }
}
