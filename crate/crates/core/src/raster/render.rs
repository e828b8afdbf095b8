//! PNG encoding of the raster artifacts. Images are written north-up, so the
//! first PNG row is the grid's highest `j`.

use std::io::Cursor;

use super::{BinaryImage, DistanceField, GridGeometry, RasterError, RasterGrid};
use serde::{Deserialize, Serialize};

fn png_err(e: impl std::fmt::Display) -> RasterError {
    RasterError::Png(e.to_string())
}

fn encode(
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<Vec<u8>, RasterError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

fn decode(bytes: &[u8]) -> Result<(usize, usize, png::ColorType, png::BitDepth, Vec<u8>), RasterError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| RasterError::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(info.buffer_size());
    Ok((
        info.width as usize,
        info.height as usize,
        info.color_type,
        info.bit_depth,
        buf,
    ))
}

/// 8-bit grayscale, foreground = 255.
pub fn binary_to_png(img: &BinaryImage) -> Result<Vec<u8>, RasterError> {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h);
    for row in (0..h).rev() {
        data.extend((0..w).map(|i| if img.get(i, row) { 255u8 } else { 0 }));
    }
    encode(w, h, png::ColorType::Grayscale, png::BitDepth::Eight, &data)
}

/// Reads an 8-bit grayscale PNG; any non-zero value is foreground.
pub fn binary_from_png(bytes: &[u8]) -> Result<BinaryImage, RasterError> {
    let (w, h, color, depth, buf) = decode(bytes)?;
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Eight {
        return Err(RasterError::Png(format!(
            "expected 8-bit grayscale, found {color:?}/{depth:?}"
        )));
    }
    let mut img = BinaryImage::new(w, h);
    for (r, row) in buf.chunks(w).enumerate() {
        for (i, &v) in row.iter().enumerate() {
            img.set(i, h - 1 - r, v != 0);
        }
    }
    Ok(img)
}

/// Linear mapping of heights to 16-bit centimetres above `base_m`. Code 0
/// marks empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightEncoding {
    pub base_m: f64,
    pub units_per_m: f64,
}

impl HeightEncoding {
    /// Base one centimetre below the lowest occupied cell.
    pub fn for_grid(grid: &RasterGrid) -> Self {
        let min = grid
            .heights()
            .iter()
            .copied()
            .filter(|h| !h.is_nan())
            .fold(f64::INFINITY, f64::min);
        let base_m = if min.is_finite() { min - 0.01 } else { 0.0 };
        HeightEncoding {
            base_m,
            units_per_m: 100.0,
        }
    }

    pub fn encode(&self, h: f64) -> u16 {
        if h.is_nan() {
            return 0;
        }
        ((h - self.base_m) * self.units_per_m).round().clamp(1.0, 65535.0) as u16
    }

    pub fn decode(&self, v: u16) -> f64 {
        if v == 0 {
            f64::NAN
        } else {
            self.base_m + v as f64 / self.units_per_m
        }
    }
}

pub fn heights_to_png(grid: &RasterGrid, enc: &HeightEncoding) -> Result<Vec<u8>, RasterError> {
    let (w, h) = (grid.geometry.width, grid.geometry.height);
    let mut data = Vec::with_capacity(w * h * 2);
    for row in (0..h).rev() {
        for i in 0..w {
            let v = enc.encode(grid.heights()[row * w + i]);
            data.extend_from_slice(&v.to_be_bytes());
        }
    }
    encode(w, h, png::ColorType::Grayscale, png::BitDepth::Sixteen, &data)
}

pub fn heights_from_png(
    bytes: &[u8],
    geometry: GridGeometry,
    enc: &HeightEncoding,
) -> Result<RasterGrid, RasterError> {
    let (w, h, color, depth, buf) = decode(bytes)?;
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Sixteen {
        return Err(RasterError::Png(format!(
            "expected 16-bit grayscale, found {color:?}/{depth:?}"
        )));
    }
    if w != geometry.width || h != geometry.height {
        return Err(RasterError::Dimensions(format!(
            "PNG is {w}x{h}, grid is {}x{}",
            geometry.width, geometry.height
        )));
    }
    let mut heights = vec![f64::NAN; w * h];
    for (k, px) in buf.chunks(2).enumerate() {
        let (r, i) = (k / w, k % w);
        heights[(h - 1 - r) * w + i] = enc.decode(u16::from_be_bytes([px[0], px[1]]));
    }
    RasterGrid::from_parts(geometry, heights)
}

/// Distances scaled so the largest maps to 255.
pub fn distance_to_png(field: &DistanceField) -> Result<Vec<u8>, RasterError> {
    let (w, h) = (field.width, field.height);
    let max = field.distances.iter().copied().fold(0.0, f64::max);
    let mut data = Vec::with_capacity(w * h);
    for row in (0..h).rev() {
        for i in 0..w {
            let d = field.distance(i, row);
            data.push(if max > 0.0 { (d / max * 255.0).round() as u8 } else { 0 });
        }
    }
    encode(w, h, png::ColorType::Grayscale, png::BitDepth::Eight, &data)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let sector = h6.floor() as i32;
    let f = h6 - sector as f64;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [
        (r * 255.0).round() as u8,
        (g * 255.0).round() as u8,
        (b * 255.0).round() as u8,
    ]
}

/// Hue from orientation (`o / 180`), full saturation, value from magnitude.
pub fn render_orientation_hsv(field: &DistanceField) -> Result<Vec<u8>, RasterError> {
    let (w, h) = (field.width, field.height);
    let mut data = Vec::with_capacity(w * h * 3);
    for row in (0..h).rev() {
        for i in 0..w {
            let hue = field.orientation(i, row) as f64 / 180.0;
            let val = field.magnitude(i, row) as f64;
            data.extend_from_slice(&hsv_to_rgb(hue, 1.0, val));
        }
    }
    encode(w, h, png::ColorType::Rgb, png::BitDepth::Eight, &data)
}

/// Six-line world file for a north-up image of the grid.
pub fn world_file(geometry: &GridGeometry) -> String {
    let r = geometry.resolution;
    let x = geometry.origin.x + 0.5 * r;
    let y = geometry.origin.y + (geometry.height as f64 - 0.5) * r;
    format!("{r}\n0\n0\n{}\n{x}\n{y}\n", -r)
}
