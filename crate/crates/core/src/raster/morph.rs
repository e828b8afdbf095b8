use super::BinaryImage;
use serde::{Deserialize, Serialize};

pub(crate) const NEIGHBORS8: [(isize, isize); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Cell of a structuring element. Plain morphology only looks at `Hit`
/// cells; hit-or-miss additionally requires `Miss` cells to be background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeCell {
    Hit,
    Miss,
    Any,
}

/// Small kernel with an anchor. Rows are stored south-first like
/// [`BinaryImage`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuringElement {
    width: usize,
    height: usize,
    anchor: (usize, usize),
    cells: Vec<SeCell>,
}

impl StructuringElement {
    pub fn new(width: usize, height: usize, anchor: (usize, usize), cells: Vec<SeCell>) -> Self {
        assert_eq!(cells.len(), width * height, "kernel size mismatch");
        assert!(anchor.0 < width && anchor.1 < height, "anchor outside kernel");
        Self {
            width,
            height,
            anchor,
            cells,
        }
    }

    /// Solid `n × n` square anchored at its centre (`n` odd).
    pub fn square(n: usize) -> Self {
        assert!(n % 2 == 1, "square kernel needs an odd side");
        Self::new(n, n, (n / 2, n / 2), vec![SeCell::Hit; n * n])
    }

    /// Ternary kernel from rows written north-first: `1` hit, `0` miss,
    /// anything else don't-care. The anchor is the centre cell.
    pub fn from_pattern(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows[0].len();
        let mut cells = vec![SeCell::Any; width * height];
        for (r, row) in rows.iter().enumerate() {
            for (i, ch) in row.bytes().enumerate() {
                cells[(height - 1 - r) * width + i] = match ch {
                    b'1' => SeCell::Hit,
                    b'0' => SeCell::Miss,
                    _ => SeCell::Any,
                };
            }
        }
        Self::new(width, height, (width / 2, height / 2), cells)
    }

    /// Offsets relative to the anchor, paired with the cell kind.
    fn offsets(&self) -> impl Iterator<Item = ((isize, isize), SeCell)> + '_ {
        self.cells.iter().enumerate().map(move |(k, c)| {
            let di = (k % self.width) as isize - self.anchor.0 as isize;
            let dj = (k / self.width) as isize - self.anchor.1 as isize;
            ((di, dj), *c)
        })
    }

    /// Rotated by 90 degrees counter-clockwise about the anchor (square kernels only).
    pub fn rotated(&self) -> Self {
        assert_eq!(self.width, self.height, "rotation needs a square kernel");
        let n = self.width;
        let mut cells = vec![SeCell::Any; n * n];
        for j in 0..n {
            for i in 0..n {
                // (i, j) -> (n-1-j, i)
                cells[i * n + (n - 1 - j)] = self.cells[j * n + i];
            }
        }
        Self::new(n, n, (n - 1 - self.anchor.1, self.anchor.0), cells)
    }
}

/// Erosion; pixels outside the image count as background.
pub fn erode(img: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    let hits: Vec<(isize, isize)> = se
        .offsets()
        .filter(|(_, c)| *c == SeCell::Hit)
        .map(|(o, _)| o)
        .collect();
    let (w, h) = (img.width(), img.height());
    let mut out = BinaryImage::new(w, h);
    for j in 0..h {
        for i in 0..w {
            let keep = hits
                .iter()
                .all(|&(di, dj)| img.get_signed(i as isize + di, j as isize + dj));
            out.set(i, j, keep);
        }
    }
    out
}

/// Dilation by the reflected kernel, so that `open`/`close` are the usual
/// adjunction pair.
pub fn dilate(img: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    let hits: Vec<(isize, isize)> = se
        .offsets()
        .filter(|(_, c)| *c == SeCell::Hit)
        .map(|(o, _)| o)
        .collect();
    let (w, h) = (img.width(), img.height());
    let mut out = BinaryImage::new(w, h);
    for j in 0..h {
        for i in 0..w {
            let any = hits
                .iter()
                .any(|&(di, dj)| img.get_signed(i as isize - di, j as isize - dj));
            out.set(i, j, any);
        }
    }
    out
}

pub fn morph_open(img: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    dilate(&erode(img, se), se)
}

pub fn morph_close(img: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    erode(&dilate(img, se), se)
}

/// Template match: every `Hit` cell on foreground and every `Miss` cell on
/// background (outside the image counts as background).
pub fn hit_or_miss(img: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    let cells: Vec<((isize, isize), SeCell)> =
        se.offsets().filter(|(_, c)| *c != SeCell::Any).collect();
    let (w, h) = (img.width(), img.height());
    let mut out = BinaryImage::new(w, h);
    for j in 0..h {
        for i in 0..w {
            let ok = cells.iter().all(|&((di, dj), c)| {
                img.get_signed(i as isize + di, j as isize + dj) == (c == SeCell::Hit)
            });
            out.set(i, j, ok);
        }
    }
    out
}

/// 8-connected component labels (0 = background, components numbered from 1
/// in raster order) and the component count.
pub fn label_components(img: &BinaryImage) -> (Vec<u32>, u32) {
    let (w, h) = (img.width(), img.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !img.data()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (i, j) = ((k % w) as isize, (k / w) as isize);
            for (di, dj) in NEIGHBORS8 {
                let (ni, nj) = (i + di, j + dj);
                if img.get_signed(ni, nj) {
                    let nk = nj as usize * w + ni as usize;
                    if labels[nk] == 0 {
                        labels[nk] = next;
                        stack.push(nk);
                    }
                }
            }
        }
    }
    (labels, next)
}

/// How [`remove_small_features`] measures a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Drop 8-connected blobs with fewer than `min_size²` pixels.
    Area,
    /// Drop endpoint-terminated spurs of a unit-width skeleton shorter than
    /// `min_size` pixels, including isolated short pieces.
    Length,
}

pub fn remove_small_features(img: &BinaryImage, min_size_px: usize, mode: FeatureMode) -> BinaryImage {
    let min_size_px = min_size_px.max(1);
    match mode {
        FeatureMode::Area => remove_small_blobs(img, min_size_px * min_size_px),
        FeatureMode::Length => prune_spurs(img, min_size_px),
    }
}

fn remove_small_blobs(img: &BinaryImage, min_area: usize) -> BinaryImage {
    let (labels, count) = label_components(img);
    let mut sizes = vec![0usize; count as usize + 1];
    for l in &labels {
        sizes[*l as usize] += 1;
    }
    let data = labels
        .iter()
        .map(|&l| l != 0 && sizes[l as usize] >= min_area)
        .collect();
    BinaryImage::from_vec(img.width(), img.height(), data)
}

pub(crate) fn degree(img: &BinaryImage, i: usize, j: usize) -> usize {
    NEIGHBORS8
        .iter()
        .filter(|(di, dj)| img.get_signed(i as isize + di, j as isize + dj))
        .count()
}

fn prune_spurs(img: &BinaryImage, min_len: usize) -> BinaryImage {
    let mut out = img.clone();
    let w = img.width();
    for (ei, ej) in img.ones() {
        if degree(img, ei, ej) != 1 {
            continue;
        }
        let mut path = vec![(ei, ej)];
        let mut cur = (ei, ej);
        let mut reached_junction = false;
        loop {
            let fwd: Vec<(usize, usize)> = NEIGHBORS8
                .iter()
                .map(|(di, dj)| (cur.0 as isize + di, cur.1 as isize + dj))
                .filter(|&(ni, nj)| img.get_signed(ni, nj))
                .map(|(ni, nj)| (ni as usize, nj as usize))
                .filter(|p| !path.contains(p))
                .collect();
            if fwd.is_empty() {
                break;
            }
            if fwd.len() > 1 || path.len() >= min_len {
                // Either branching off or already long enough to keep.
                reached_junction = fwd.len() > 1;
                break;
            }
            let next = fwd[0];
            if degree(img, next.0, next.1) >= 3 {
                reached_junction = true;
                break;
            }
            path.push(next);
            cur = next;
        }
        let short = path.len() < min_len;
        let isolated = !reached_junction && {
            let last = *path.last().unwrap();
            path.len() == 1 || degree(img, last.0, last.1) <= 1
        };
        if short && (reached_junction || isolated) {
            for (i, j) in path {
                out.data_mut()[j * w + i] = false;
            }
        }
    }
    out
}

impl BinaryImage {
    pub(crate) fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, p: f64) -> BinaryImage {
        BinaryImage::from_vec(w, h, (0..w * h).map(|_| rng.gen_bool(p)).collect())
    }

    /// Direct definition: min over the square window, then max.
    fn brute_open(img: &BinaryImage, r: isize) -> BinaryImage {
        let (w, h) = (img.width() as isize, img.height() as isize);
        let window = |src: &BinaryImage, i: isize, j: isize, all: bool| {
            let mut acc = all;
            for dj in -r..=r {
                for di in -r..=r {
                    let v = src.get_signed(i + di, j + dj);
                    acc = if all { acc && v } else { acc || v };
                }
            }
            acc
        };
        let mut eroded = BinaryImage::new(w as usize, h as usize);
        for j in 0..h {
            for i in 0..w {
                eroded.set(i as usize, j as usize, window(img, i, j, true));
            }
        }
        let mut out = BinaryImage::new(w as usize, h as usize);
        for j in 0..h {
            for i in 0..w {
                out.set(i as usize, j as usize, window(&eroded, i, j, false));
            }
        }
        out
    }

    #[test]
    fn isolated_pixel_opens_away() {
        let mut img = BinaryImage::new(7, 7);
        img.set(3, 3, true);
        assert_eq!(morph_open(&img, &StructuringElement::square(3)).count_ones(), 0);
    }

    #[test]
    fn solid_square_survives_open() {
        let mut img = BinaryImage::new(20, 20);
        for j in 5..15 {
            for i in 5..15 {
                img.set(i, j, true);
            }
        }
        assert_eq!(morph_open(&img, &StructuringElement::square(3)), img);
    }

    #[test]
    fn open_matches_brute_force_and_laws_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let se = StructuringElement::square(3);
        for _ in 0..10 {
            let img = random_image(&mut rng, 64, 64, 0.6);
            let opened = morph_open(&img, &se);
            assert_eq!(opened, brute_open(&img, 1));
            let closed = morph_close(&img, &se);
            assert_eq!(morph_open(&opened, &se), opened);
            assert_eq!(morph_close(&closed, &se), closed);
            assert!(opened.is_subset_of(&img));
            // Extensivity of closing holds away from the zero-padded border.
            for j in 1..63 {
                for i in 1..63 {
                    assert!(!img.get(i, j) || closed.get(i, j));
                }
            }
        }
    }

    #[test]
    fn small_blob_removal() {
        let mut img = BinaryImage::new(30, 30);
        for (i, j) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            img.set(i, j, true);
        }
        for j in 10..20 {
            for i in 10..20 {
                img.set(i, j, true);
            }
        }
        let out = remove_small_features(&img, 5, FeatureMode::Area);
        assert!(!out.get(1, 1));
        assert!(out.get(15, 15));
        assert_eq!(out.count_ones(), 100);
    }

    #[test]
    fn blob_filter_matches_component_areas() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let img = random_image(&mut rng, 48, 48, 0.35);
            let out = remove_small_features(&img, 3, FeatureMode::Area);
            // Flood fill each pixel independently.
            for (i, j) in img.ones() {
                let mut seen = std::collections::HashSet::new();
                let mut stack = vec![(i as isize, j as isize)];
                seen.insert((i as isize, j as isize));
                while let Some((a, b)) = stack.pop() {
                    for (di, dj) in NEIGHBORS8 {
                        let n = (a + di, b + dj);
                        if img.get_signed(n.0, n.1) && seen.insert(n) {
                            stack.push(n);
                        }
                    }
                }
                assert_eq!(out.get(i, j), seen.len() >= 9);
            }
        }
    }

    #[test]
    fn hit_or_miss_t_junction() {
        let img = BinaryImage::from_ascii(&[
            ".......",
            ".#####.",
            "...#...",
            "...#...",
            ".......",
        ]);
        let t = StructuringElement::from_pattern(&["111", "010", "010"]);
        let out = hit_or_miss(&img, &t);
        assert_eq!(out.ones().collect::<Vec<_>>(), vec![(3, 2)]);
        assert_eq!(hit_or_miss(&BinaryImage::new(5, 5), &t).count_ones(), 0);
    }

    #[test]
    fn hit_or_miss_matches_sliding_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let img = random_image(&mut rng, 32, 32, 0.5);
            let cells: Vec<SeCell> = (0..9)
                .map(|_| match rng.gen_range(0..3) {
                    0 => SeCell::Hit,
                    1 => SeCell::Miss,
                    _ => SeCell::Any,
                })
                .collect();
            let se = StructuringElement::new(3, 3, (1, 1), cells.clone());
            let out = hit_or_miss(&img, &se);
            for j in 0..32isize {
                for i in 0..32isize {
                    let mut ok = true;
                    for (k, c) in cells.iter().enumerate() {
                        let v = img.get_signed(i + (k % 3) as isize - 1, j + (k / 3) as isize - 1);
                        ok &= match c {
                            SeCell::Hit => v,
                            SeCell::Miss => !v,
                            SeCell::Any => true,
                        };
                    }
                    assert_eq!(out.get(i as usize, j as usize), ok);
                }
            }
        }
    }

    #[test]
    fn rotation_cycles() {
        let t = StructuringElement::from_pattern(&["111", "010", "0.0"]);
        assert_ne!(t.rotated(), t);
        assert_eq!(t.rotated().rotated().rotated().rotated(), t);
    }

    #[test]
    fn spur_pruning() {
        let img = BinaryImage::from_ascii(&[
            "..............",
            ".#####.######.",
            "......#.......",
            "......#.......",
            "......#.......",
            "..............",
        ]);
        let out = remove_small_features(&img, 5, FeatureMode::Length);
        // The 2-pixel spur below the junction at (6, 3) goes, the arms stay.
        assert!(!out.get(6, 1) && !out.get(6, 2));
        assert!(out.get(6, 3));
        assert!(out.get(1, 4) && out.get(12, 4));
        // An isolated 3-pixel dash disappears as well.
        let dash = BinaryImage::from_ascii(&[".....", ".###.", "....."]);
        assert_eq!(remove_small_features(&dash, 5, FeatureMode::Length).count_ones(), 0);
        assert_eq!(remove_small_features(&dash, 3, FeatureMode::Length).count_ones(), 3);
    }
}
