use crate::raster::{BinaryImage, GridGeometry};

/// Unit-width centreline of a binary raster together with the grid it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub image: BinaryImage,
    pub geometry: GridGeometry,
}

impl Skeleton {
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.image.ones()
    }

    pub fn len(&self) -> usize {
        self.image.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Neighbour values in the order E, NE, N, NW, W, SW, S, SE.
fn ring(img: &BinaryImage, i: usize, j: usize) -> [bool; 8] {
    let (i, j) = (i as isize, j as isize);
    [
        img.get_signed(i + 1, j),
        img.get_signed(i + 1, j + 1),
        img.get_signed(i, j + 1),
        img.get_signed(i - 1, j + 1),
        img.get_signed(i - 1, j),
        img.get_signed(i - 1, j - 1),
        img.get_signed(i, j - 1),
        img.get_signed(i + 1, j - 1),
    ]
}

/// Yokoi connectivity number for 8-connected foreground. A pixel is simple
/// (deletable without changing topology) when this equals 1.
fn yokoi8(n: &[bool; 8]) -> i32 {
    let x = |k: usize| i32::from(!n[k % 8]);
    [0, 2, 4, 6]
        .iter()
        .map(|&k| x(k) - x(k) * x(k + 1) * x(k + 2))
        .sum()
}

fn count(n: &[bool; 8]) -> usize {
    n.iter().filter(|v| **v).count()
}

fn is_simple_nonterminal(img: &BinaryImage, i: usize, j: usize) -> bool {
    let n = ring(img, i, j);
    count(&n) >= 2 && yokoi8(&n) == 1
}

/// Zhang–Suen candidate test on a snapshot. `first` selects the sub-iteration.
fn zs_candidate(n: &[bool; 8], first: bool) -> bool {
    let b = count(n);
    if !(2..=6).contains(&b) {
        return false;
    }
    // Clockwise from north: N, NE, E, SE, S, SW, W, NW.
    let seq = [n[2], n[1], n[0], n[7], n[6], n[5], n[4], n[3]];
    let transitions = (0..8).filter(|&k| !seq[k] && seq[(k + 1) % 8]).count();
    if transitions != 1 {
        return false;
    }
    let (north, east, south, west) = (n[2], n[0], n[6], n[4]);
    if first {
        !(north && east && south) && !(east && south && west)
    } else {
        !(north && east && west) && !(north && south && west)
    }
}

/// Thins the foreground to a unit-width, topology-preserving skeleton.
pub fn skeletonize(img: &BinaryImage, geometry: GridGeometry) -> Skeleton {
    let mut cur = img.clone();
    let mut active: Vec<(usize, usize)> = cur.ones().collect();
    loop {
        let mut changed = false;
        for first in [true, false] {
            let snapshot = cur.clone();
            let candidates: Vec<(usize, usize)> = active
                .iter()
                .copied()
                .filter(|&(i, j)| snapshot.get(i, j) && zs_candidate(&ring(&snapshot, i, j), first))
                .collect();
            // Candidates come from the snapshot; each deletion is re-checked
            // against the current image so the topology cannot change.
            for (i, j) in candidates {
                if yokoi8(&ring(&cur, i, j)) == 1 {
                    cur.set(i, j, false);
                    changed = true;
                }
            }
            active.retain(|&(i, j)| cur.get(i, j));
        }
        if !changed {
            break;
        }
    }
    cleanup(&mut cur, &mut active);
    Skeleton {
        image: cur,
        geometry,
    }
}

/// Removes simple pixels that have two perpendicular 4-neighbours. This
/// clears leftover 2×2 blocks and the corner pixels of staircases.
fn cleanup(img: &mut BinaryImage, active: &mut Vec<(usize, usize)>) {
    loop {
        let mut changed = false;
        for &(i, j) in active.iter() {
            if !img.get(i, j) {
                continue;
            }
            let n = ring(img, i, j);
            let (e, north, w, s) = (n[0], n[2], n[4], n[6]);
            let corner = (north && e) || (e && s) || (s && w) || (w && north);
            if corner && is_simple_nonterminal(img, i, j) {
                img.set(i, j, false);
                changed = true;
            }
        }
        active.retain(|&(i, j)| img.get(i, j));
        if !changed {
            break;
        }
    }
}

/// True when no 2×2 window is entirely foreground.
pub fn is_unit_width(img: &BinaryImage) -> bool {
    for j in 0..img.height().saturating_sub(1) {
        for i in 0..img.width().saturating_sub(1) {
            if img.get(i, j) && img.get(i + 1, j) && img.get(i, j + 1) && img.get(i + 1, j + 1) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use crate::raster::label_components;
    use proptest::prelude::*;

    fn geo(w: usize, h: usize) -> GridGeometry {
        GridGeometry {
            origin: Point2::new(0.0, 0.0),
            resolution: 1.0,
            width: w,
            height: h,
        }
    }

    fn skel(img: &BinaryImage) -> BinaryImage {
        skeletonize(img, geo(img.width(), img.height())).image
    }

    fn degree(img: &BinaryImage, i: usize, j: usize) -> usize {
        count(&ring(img, i, j))
    }

    #[test]
    fn yokoi_cases() {
        // Isolated pixel and chain end are not deletable by the nonterminal rule.
        let mut n = [false; 8];
        assert_eq!(yokoi8(&n), 0);
        n[0] = true;
        n[4] = true;
        assert_eq!(yokoi8(&n), 2);
        n[2] = true;
        assert_eq!(yokoi8(&n), 1);
        let plus = [true, false, true, false, true, false, true, false];
        assert_eq!(yokoi8(&plus), 0);
    }

    #[test]
    fn bar_thins_to_one_chain() {
        let mut img = BinaryImage::new(56, 7);
        for j in 2..5 {
            for i in 3..53 {
                img.set(i, j, true);
            }
        }
        let s = skel(&img);
        assert!(is_unit_width(&s) && s.is_subset_of(&img));
        assert_eq!(label_components(&s).1, 1);
        let ends = s.ones().filter(|&(i, j)| degree(&s, i, j) == 1).count();
        assert_eq!(ends, 2);
        assert!(s.count_ones() >= 45 && s.count_ones() <= 52, "{}", s.count_ones());
    }

    #[test]
    fn disk_collapses_near_centre() {
        let mut img = BinaryImage::new(25, 25);
        for j in 0..25 {
            for i in 0..25 {
                let (dx, dy) = (i as f64 - 12.0, j as f64 - 12.0);
                if dx * dx + dy * dy <= 100.0 {
                    img.set(i, j, true);
                }
            }
        }
        let s = skel(&img);
        assert_eq!(label_components(&s).1, 1);
        for (i, j) in s.ones() {
            assert!((i as f64 - 12.0).abs() <= 1.0 && (j as f64 - 12.0).abs() <= 1.0);
        }
    }

    #[test]
    fn plus_has_one_junction_and_four_ends() {
        let mut img = BinaryImage::new(41, 41);
        for j in 0..41 {
            for i in 0..41 {
                if (18..23).contains(&i) && (2..39).contains(&j)
                    || (18..23).contains(&j) && (2..39).contains(&i)
                {
                    img.set(i, j, true);
                }
            }
        }
        let s = skel(&img);
        assert!(is_unit_width(&s));
        let ends = s.ones().filter(|&(i, j)| degree(&s, i, j) == 1).count();
        let junction_px: BinaryImage = {
            let mut b = BinaryImage::new(41, 41);
            for (i, j) in s.ones().filter(|&(i, j)| degree(&s, i, j) >= 3) {
                b.set(i, j, true);
            }
            b
        };
        assert_eq!(ends, 4);
        assert_eq!(label_components(&junction_px).1, 1);
    }

    #[test]
    fn ring_keeps_its_hole() {
        let mut img = BinaryImage::new(30, 30);
        for j in 0..30 {
            for i in 0..30 {
                let r = ((i as f64 - 14.5).powi(2) + (j as f64 - 14.5).powi(2)).sqrt();
                if (8.0..12.0).contains(&r) {
                    img.set(i, j, true);
                }
            }
        }
        let s = skel(&img);
        assert!(is_unit_width(&s));
        assert_eq!(label_components(&s).1, 1);
        assert!(s.ones().all(|(i, j)| degree(&s, i, j) == 2));
    }

    #[test]
    fn two_by_two_block_survives_as_pixels() {
        let img = BinaryImage::from_ascii(&["....", ".##.", ".##.", "...."]);
        let s = skel(&img);
        assert!(is_unit_width(&s));
        assert_eq!(label_components(&s).1, 1);
        assert!(s.count_ones() >= 1);
    }

    proptest! {
        #[test]
        fn thinning_invariants(seed in any::<u64>()) {
            let img = crate::skeleton::test_shapes::strokes(seed, 48, 48);
            let s = skel(&img);
            prop_assert!(is_unit_width(&s));
            prop_assert!(s.is_subset_of(&img));
            prop_assert_eq!(label_components(&s).1, label_components(&img).1);
        }
    }
}
