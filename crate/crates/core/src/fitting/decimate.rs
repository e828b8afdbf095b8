use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::{triangle_area, Point2};

#[derive(PartialEq)]
struct Candidate {
    area: f64,
    index: usize,
    version: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // Reversed so the max-heap pops the smallest area, then the lowest index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .area
            .total_cmp(&self.area)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Indices of the vertices kept by Visvalingam–Whyatt decimation. The
/// interior vertex whose triangle with its current neighbours is smallest
/// goes first (ties to the lower index) until every survivor reaches
/// `area_threshold`. Endpoints always survive.
pub fn visvalingam_whyatt_indices(points: &[Point2], area_threshold: f64) -> Vec<usize> {
    let n = points.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
    let mut next: Vec<usize> = (1..=n).collect();
    let mut alive = vec![true; n];
    let mut version = vec![0u32; n];
    let area = |p: usize, i: usize, q: usize| triangle_area(points[p], points[i], points[q]);

    let mut heap: BinaryHeap<Candidate> = (1..n - 1)
        .map(|i| Candidate {
            area: area(i - 1, i, i + 1),
            index: i,
            version: 0,
        })
        .collect();
    while let Some(c) = heap.pop() {
        if !alive[c.index] || c.version != version[c.index] {
            continue;
        }
        if c.area >= area_threshold {
            break;
        }
        let (p, q) = (prev[c.index], next[c.index]);
        alive[c.index] = false;
        next[p] = q;
        prev[q] = p;
        for &k in &[p, q] {
            if k != 0 && k != n - 1 {
                version[k] += 1;
                heap.push(Candidate {
                    area: area(prev[k], k, next[k]),
                    index: k,
                    version: version[k],
                });
            }
        }
    }
    (0..n).filter(|&i| alive[i]).collect()
}

pub fn visvalingam_whyatt(points: &[Point2], area_threshold: f64) -> Vec<Point2> {
    visvalingam_whyatt_indices(points, area_threshold)
        .into_iter()
        .map(|i| points[i])
        .collect()
}
