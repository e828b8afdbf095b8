//! Uncompressed LAS reader (1.2–1.4, point formats 0–3) and a LAS 1.2 PF0 writer.

use super::{LabeledPointCloud, PcdError};

const HEADER_SIZE_12: usize = 227;
const WRITE_SCALE: f64 = 0.001;

fn min_record_len(format: u8) -> usize {
    match format {
        0 => 20,
        1 => 28,
        2 => 26,
        _ => 34,
    }
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn i32_at(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

/// Parses a LAS byte stream. The header carries no usable CRS for us (VLRs are
/// skipped), so `crs_epsg` is supplied by the caller.
pub fn read_las(bytes: &[u8], crs_epsg: u32) -> Result<LabeledPointCloud, PcdError> {
    if bytes.len() < 4 || &bytes[..4] != b"LASF" {
        return Err(PcdError::Format("missing LASF signature".into()));
    }
    if bytes.len() < HEADER_SIZE_12 {
        return Err(PcdError::Format(format!(
            "header truncated: {} bytes, need at least {HEADER_SIZE_12}",
            bytes.len()
        )));
    }
    let (major, minor) = (bytes[24], bytes[25]);
    if major != 1 || !(2..=4).contains(&minor) {
        return Err(PcdError::UnsupportedVersion { major, minor });
    }
    let header_size = u16_at(bytes, 94) as usize;
    let point_offset = u32_at(bytes, 96) as usize;
    // Compressed LAZ sets bit 7 of the format byte.
    let format = bytes[104];
    if format > 3 {
        return Err(PcdError::UnsupportedFormat(format));
    }
    let record_len = u16_at(bytes, 105) as usize;
    if record_len < min_record_len(format) {
        return Err(PcdError::Format(format!(
            "record length {record_len} too short for point format {format}"
        )));
    }
    let mut count = u32_at(bytes, 107) as u64;
    if minor == 4 && count == 0 && header_size >= 255 && bytes.len() >= 255 {
        count = u64_at(bytes, 247);
    }
    if header_size < HEADER_SIZE_12 || point_offset < header_size {
        return Err(PcdError::Format(format!(
            "inconsistent header size {header_size} / point offset {point_offset}"
        )));
    }
    let scale = [f64_at(bytes, 131), f64_at(bytes, 139), f64_at(bytes, 147)];
    let offset = [f64_at(bytes, 155), f64_at(bytes, 163), f64_at(bytes, 171)];

    let count = usize::try_from(count).map_err(|_| PcdError::Format("point count overflow".into()))?;
    let mut points = Vec::with_capacity(count.min(bytes.len() / record_len + 1));
    let mut labels = Vec::with_capacity(points.capacity());
    for k in 0..count {
        let start = point_offset + k * record_len;
        if start + record_len > bytes.len() {
            return Err(PcdError::Truncated { offset: start });
        }
        let rec = &bytes[start..start + record_len];
        let xyz = [
            i32_at(rec, 0) as f64 * scale[0] + offset[0],
            i32_at(rec, 4) as f64 * scale[1] + offset[1],
            i32_at(rec, 8) as f64 * scale[2] + offset[2],
        ];
        points.push(xyz);
        labels.push(rec[15] & 0x1f);
    }
    LabeledPointCloud::new(points, labels, crs_epsg)
}

/// Serializes a cloud as LAS 1.2, point format 0, scale 0.001 and offsets at
/// the floor of the per-axis minima.
pub fn write_las(cloud: &LabeledPointCloud) -> Result<Vec<u8>, PcdError> {
    let (lo, hi) = cloud
        .bounds()
        .ok_or_else(|| PcdError::Invalid("cannot write an empty cloud".into()))?;
    let offset = [lo[0].floor(), lo[1].floor(), lo[2].floor()];
    for axis in 0..3 {
        let span = (hi[axis] - offset[axis]) / WRITE_SCALE;
        if span.round() > i32::MAX as f64 {
            return Err(PcdError::Range(format!(
                "axis {axis} spans {:.3} m, beyond the 32-bit range at scale {WRITE_SCALE}",
                hi[axis] - offset[axis]
            )));
        }
    }
    if let Some(bad) = cloud.labels().iter().find(|l| **l > 31) {
        return Err(PcdError::Range(format!(
            "class {bad} does not fit the 5-bit classification field of point format 0"
        )));
    }
    let count = u32::try_from(cloud.count())
        .map_err(|_| PcdError::Range("more than 2^32-1 points".into()))?;

    let mut out = Vec::with_capacity(HEADER_SIZE_12 + 20 * cloud.count());
    out.extend_from_slice(b"LASF");
    out.extend_from_slice(&0u16.to_le_bytes()); // file source id
    out.extend_from_slice(&0u16.to_le_bytes()); // global encoding
    out.extend_from_slice(&[0u8; 16]); // project GUID
    out.extend_from_slice(&[1, 2]);
    let mut ident = [0u8; 32];
    ident[..5].copy_from_slice(b"OTHER");
    out.extend_from_slice(&ident);
    let mut software = [0u8; 32];
    software[..9].copy_from_slice(b"railalign");
    out.extend_from_slice(&software);
    out.extend_from_slice(&1u16.to_le_bytes()); // creation day
    out.extend_from_slice(&2024u16.to_le_bytes()); // creation year
    out.extend_from_slice(&(HEADER_SIZE_12 as u16).to_le_bytes());
    out.extend_from_slice(&(HEADER_SIZE_12 as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // VLR count
    out.push(0); // point format
    out.extend_from_slice(&20u16.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&[0u8; 16]); // returns 2..5
    for _ in 0..3 {
        out.extend_from_slice(&WRITE_SCALE.to_le_bytes());
    }
    for o in offset {
        out.extend_from_slice(&o.to_le_bytes());
    }
    for axis in 0..3 {
        out.extend_from_slice(&hi[axis].to_le_bytes());
        out.extend_from_slice(&lo[axis].to_le_bytes());
    }
    debug_assert_eq!(out.len(), HEADER_SIZE_12);

    for (p, label) in cloud.points().iter().zip(cloud.labels()) {
        for axis in 0..3 {
            let q = ((p[axis] - offset[axis]) / WRITE_SCALE).round() as i32;
            out.extend_from_slice(&q.to_le_bytes());
        }
        out.extend_from_slice(&0u16.to_le_bytes()); // intensity
        out.push(0b0000_1001); // return 1 of 1
        out.push(*label);
        out.push(0); // scan angle rank
        out.push(0); // user data
        out.extend_from_slice(&0u16.to_le_bytes()); // point source id
    }
    Ok(out)
}
