//! Exact Euclidean distance transform (separable lower-envelope method) and
//! the Sobel gradient maps derived from it.

use super::{BinaryImage, GridGeometry, RasterError};

/// Distances in meters to the nearest background pixel centre, plus the
/// folded orientation (degrees, `[0, 180)`) and globally normalised
/// magnitude of the distance gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub distances: Vec<f64>,
    pub grad_orientation: Vec<f32>,
    pub grad_magnitude: Vec<f32>,
}

impl DistanceField {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[j * self.width + i]
    }

    pub fn orientation(&self, i: usize, j: usize) -> f32 {
        self.grad_orientation[j * self.width + i]
    }

    pub fn magnitude(&self, i: usize, j: usize) -> f32 {
        self.grad_magnitude[j * self.width + i]
    }
}

const INF: i64 = i64::MAX / 4;

/// 1D squared distance transform of `f` (entries `INF` are "no site").
fn transform_1d(f: &[i64], out: &mut [i64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    for q in 0..n {
        if f[q] >= INF {
            continue;
        }
        let fq = (f[q] + (q * q) as i64) as f64;
        while let Some(&top) = v.last() {
            let ft = (f[top] + (top * top) as i64) as f64;
            let s = (fq - ft) / (2.0 * (q as f64 - top as f64));
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                break;
            }
        }
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
        } else {
            let top = *v.last().unwrap();
            let ft = (f[top] + (top * top) as i64) as f64;
            z.push((fq - ft) / (2.0 * (q as f64 - top as f64)));
            v.push(q);
        }
    }
    if v.is_empty() {
        out.fill(INF);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as i64 - v[k] as i64;
        *o = d * d + f[v[k]];
    }
}

/// Squared pixel distances from every pixel to the nearest background pixel.
pub fn squared_edt(img: &BinaryImage) -> Result<Vec<i64>, RasterError> {
    let (w, h) = (img.width(), img.height());
    if img.count_ones() == w * h {
        return Err(RasterError::NoBackground);
    }
    let mut grid: Vec<i64> = img.data().iter().map(|&fg| if fg { INF } else { 0 }).collect();
    let (mut v, mut z) = (Vec::new(), Vec::new());
    let mut col = vec![0i64; h];
    let mut col_out = vec![0i64; h];
    for i in 0..w {
        for j in 0..h {
            col[j] = grid[j * w + i];
        }
        transform_1d(&col, &mut col_out, &mut v, &mut z);
        for j in 0..h {
            grid[j * w + i] = col_out[j];
        }
    }
    let mut row_out = vec![0i64; w];
    for j in 0..h {
        let row = &mut grid[j * w..(j + 1) * w];
        transform_1d(row, &mut row_out, &mut v, &mut z);
        row.copy_from_slice(&row_out);
    }
    Ok(grid)
}

/// Exact EDT scaled to meters, with Sobel gradient maps (edges replicated).
pub fn edt(img: &BinaryImage, resolution: f64) -> Result<DistanceField, RasterError> {
    let sq = squared_edt(img)?;
    let (w, h) = (img.width(), img.height());
    let distances: Vec<f64> = sq.iter().map(|&d| (d as f64).sqrt() * resolution).collect();

    let at = |i: isize, j: isize| {
        let ci = i.clamp(0, w as isize - 1) as usize;
        let cj = j.clamp(0, h as isize - 1) as usize;
        distances[cj * w + ci]
    };
    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    let mut max_mag = 0.0f64;
    for j in 0..h as isize {
        for i in 0..w as isize {
            let sx = (at(i + 1, j - 1) + 2.0 * at(i + 1, j) + at(i + 1, j + 1))
                - (at(i - 1, j - 1) + 2.0 * at(i - 1, j) + at(i - 1, j + 1));
            let sy = (at(i - 1, j + 1) + 2.0 * at(i, j + 1) + at(i + 1, j + 1))
                - (at(i - 1, j - 1) + 2.0 * at(i, j - 1) + at(i + 1, j - 1));
            let k = j as usize * w + i as usize;
            gx[k] = sx;
            gy[k] = sy;
            max_mag = max_mag.max(sx.hypot(sy));
        }
    }
    let mut grad_orientation = Vec::with_capacity(w * h);
    let mut grad_magnitude = Vec::with_capacity(w * h);
    for k in 0..w * h {
        let mut deg = gy[k].atan2(gx[k]).to_degrees().rem_euclid(180.0);
        if deg >= 180.0 {
            deg = 0.0;
        }
        grad_orientation.push(deg as f32);
        let m = if max_mag > 0.0 {
            gx[k].hypot(gy[k]) / max_mag
        } else {
            0.0
        };
        grad_magnitude.push(m as f32);
    }
    Ok(DistanceField {
        width: w,
        height: h,
        resolution,
        distances,
        grad_orientation,
        grad_magnitude,
    })
}

impl DistanceField {
    /// Convenience for callers holding a grid geometry.
    pub fn matches(&self, geometry: &GridGeometry) -> bool {
        self.width == geometry.width && self.height == geometry.height
    }
}
