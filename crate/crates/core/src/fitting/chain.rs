use std::collections::HashSet;

use crate::geom::{fit_line, Point2};
use crate::raster::DistanceField;
use crate::skeleton::{Pixel, Skeleton, SkeletonGraph};

/// An ordered pixel chain taken from the skeleton graph, with its world
/// coordinates, a smoothed copy and cumulative stations along the smoothed copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub branch_ids: Vec<usize>,
    pub pixels: Vec<Pixel>,
    pub raw: Vec<Point2>,
    pub smooth: Vec<Point2>,
    pub station: Vec<f64>,
    pub principal: bool,
}

impl Chain {
    /// With a distance field, each pixel is first moved to the centroid of
    /// the foreground inside a disk of twice its clearance, which cancels the
    /// lateral staircase of the skeleton.
    pub fn new(
        branch_ids: Vec<usize>,
        pixels: Vec<Pixel>,
        skel: &Skeleton,
        field: Option<&DistanceField>,
        half_window: usize,
        principal: bool,
    ) -> Self {
        let raw: Vec<Point2> = pixels.iter().map(|&(i, j)| skel.geometry.pixel_center(i, j)).collect();
        let centred: Vec<Point2> = match field {
            Some(f) => pixels.iter().map(|&p| local_centroid(f, skel, p)).collect(),
            None => raw.clone(),
        };
        let smooth = moving_average(&centred, half_window);
        let mut station = Vec::with_capacity(smooth.len());
        let mut acc = 0.0;
        for (k, p) in smooth.iter().enumerate() {
            if k > 0 {
                acc += p.distance(smooth[k - 1]);
            }
            station.push(acc);
        }
        Self {
            branch_ids,
            pixels,
            raw,
            smooth,
            station,
            principal,
        }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.station.last().copied().unwrap_or(0.0)
    }

    /// Arc length between two chain indices.
    pub fn span(&self, lo: usize, hi: usize) -> f64 {
        self.station[hi] - self.station[lo]
    }

    /// Unit travel direction at index `k`, from a TLS fit over `±half` points.
    pub fn direction_at(&self, k: usize, half: usize) -> Point2 {
        let lo = k.saturating_sub(half);
        let hi = (k + half).min(self.len() - 1);
        let travel = self.smooth[hi] - self.smooth[lo];
        match fit_line(&self.smooth[lo..=hi]) {
            Some((_, u)) if travel.dot(u) < 0.0 => u * -1.0,
            Some((_, u)) => u,
            None => Point2::new(1.0, 0.0),
        }
    }

    /// Index whose station is closest to `s` within `[lo, hi]`.
    pub fn index_at_station(&self, s: f64, lo: usize, hi: usize) -> usize {
        let slice = &self.station[lo..=hi];
        let k = slice.partition_point(|&v| v < s);
        if k == 0 {
            lo
        } else if k >= slice.len() {
            hi
        } else if (slice[k] - s).abs() < (s - slice[k - 1]).abs() {
            lo + k
        } else {
            lo + k - 1
        }
    }
}

/// Mean shift towards the middle of the foreground: the point repeatedly
/// moves to the centroid of the foreground inside a disk of twice the
/// clearance at its current pixel.
fn local_centroid(field: &DistanceField, skel: &Skeleton, p: Pixel) -> Point2 {
    let res = skel.geometry.resolution;
    // Continuous position in pixel units.
    let (mut x, mut y) = (p.0 as f64, p.1 as f64);
    for _ in 0..4 {
        let (ci, cj) = (x.round() as isize, y.round() as isize);
        if ci < 0 || cj < 0 || ci as usize >= field.width || cj as usize >= field.height {
            break;
        }
        let rad = (2.0 * field.distance(ci as usize, cj as usize) / res).clamp(2.0, 60.0);
        let r = rad.ceil() as isize;
        let (mut si, mut sj, mut n) = (0.0, 0.0, 0.0);
        for j in cj - r..=cj + r {
            for i in ci - r..=ci + r {
                let (dx, dy) = (i as f64 - x, j as f64 - y);
                if dx * dx + dy * dy > rad * rad
                    || i < 0
                    || j < 0
                    || i as usize >= field.width
                    || j as usize >= field.height
                {
                    continue;
                }
                if field.distance(i as usize, j as usize) > 0.0 {
                    si += i as f64;
                    sj += j as f64;
                    n += 1.0;
                }
            }
        }
        if n == 0.0 {
            break;
        }
        let (nx, ny) = (si / n, sj / n);
        let step = (nx - x).hypot(ny - y);
        (x, y) = (nx, ny);
        if step < 0.05 {
            break;
        }
    }
    let o = skel.geometry.origin;
    Point2::new(o.x + (x + 0.5) * res, o.y + (y + 0.5) * res)
}

/// Centred moving average; the window shrinks symmetrically near the ends
/// so the first and last points stay fixed.
pub(crate) fn moving_average(points: &[Point2], half: usize) -> Vec<Point2> {
    let n = points.len();
    (0..n)
        .map(|k| {
            let h = half.min(k).min(n - 1 - k);
            let w = &points[k - h..=k + h];
            let inv = 1.0 / w.len() as f64;
            w.iter().fold(Point2::default(), |a, &p| a + p) * inv
        })
        .collect()
}

/// Chains to fit: the principal path through the spanning tree first, then
/// every other branch with at least three pixels. Skeleton pixels covered by
/// no chain are returned separately.
pub fn build_chains(
    skel: &Skeleton,
    graph: &SkeletonGraph,
    field: Option<&DistanceField>,
    half_window: usize,
) -> (Vec<Chain>, Vec<Pixel>) {
    let mut chains = Vec::new();
    let mut used: HashSet<Pixel> = HashSet::new();
    let path = graph.longest_path();
    let on_path: HashSet<usize> = path.iter().map(|&(b, _)| b).collect();
    if !path.is_empty() {
        let px = graph.path_pixels(&path);
        if px.len() >= 3 {
            used.extend(px.iter().copied());
            chains.push(Chain::new(path.iter().map(|&(b, _)| b).collect(), px, skel, field, half_window, true));
        }
    }
    for b in &graph.branches {
        if on_path.contains(&b.id) || b.pixels.len() < 3 {
            continue;
        }
        used.extend(b.pixels.iter().copied());
        chains.push(Chain::new(vec![b.id], b.pixels.clone(), skel, field, half_window, false));
    }
    let leftover = skel.pixels().filter(|p| !used.contains(p)).collect();
    (chains, leftover)
}

/// Track heading at a chain pixel from the distance-field gradient: the
/// gradient orientation turned by 90°, averaged with doubled angles and
/// magnitude weights over a small window, then signed to follow `travel`.
pub(crate) fn field_heading(field: &DistanceField, pixel: Pixel, travel: Point2) -> Option<f64> {
    const RADIUS: isize = 3;
    let (mut sx, mut sy) = (0.0, 0.0);
    for dj in -RADIUS..=RADIUS {
        for di in -RADIUS..=RADIUS {
            let (i, j) = (pixel.0 as isize + di, pixel.1 as isize + dj);
            if i < 0 || j < 0 || i as usize >= field.width || j as usize >= field.height {
                continue;
            }
            let (i, j) = (i as usize, j as usize);
            let m = field.magnitude(i, j) as f64;
            let o = (field.orientation(i, j) as f64).to_radians();
            sx += m * (2.0 * o).cos();
            sy += m * (2.0 * o).sin();
        }
    }
    if sx.hypot(sy) < 1e-9 {
        return None;
    }
    let tangent = 0.5 * sy.atan2(sx) + std::f64::consts::FRAC_PI_2;
    let u = Point2::from_angle(tangent);
    Some(if u.dot(travel) < 0.0 {
        tangent + std::f64::consts::PI
    } else {
        tangent
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{edt, BinaryImage, GridGeometry};
    use crate::skeleton::extract_graph;

    fn geometry(w: usize, h: usize) -> GridGeometry {
        GridGeometry {
            origin: Point2::new(100.0, 200.0),
            resolution: 0.5,
            width: w,
            height: h,
        }
    }

    #[test]
    fn moving_average_keeps_ends_and_lines() {
        let pts: Vec<Point2> = (0..9).map(|i| Point2::new(i as f64, 3.0 * i as f64)).collect();
        let s = moving_average(&pts, 3);
        assert_eq!(s[0], pts[0]);
        assert_eq!(s[8], pts[8]);
        for (a, b) in s.iter().zip(&pts) {
            assert!(a.distance(*b) < 1e-12);
        }
    }

    #[test]
    fn chains_partition_skeleton() {
        let mut img = BinaryImage::new(60, 40);
        for i in 5..55 {
            for j in 18..23 {
                img.set(i, j, true);
            }
        }
        for j in 22..38 {
            for i in 28..33 {
                img.set(i, j, true);
            }
        }
        let (skel, graph) = extract_graph(&img, geometry(60, 40), 2);
        let (chains, leftover) = build_chains(&skel, &graph, None, 2);
        assert!(chains[0].principal);
        let total: usize = chains.iter().map(Chain::len).sum::<usize>() + leftover.len();
        assert_eq!(total, skel.len());
        let c = &chains[0];
        assert!(c.station.windows(2).all(|w| w[1] >= w[0]));
        assert!((c.length() - c.span(0, c.len() - 1)).abs() < 1e-12);
        let k = c.index_at_station(c.length() / 2.0, 0, c.len() - 1);
        assert!((c.station[k] - c.length() / 2.0).abs() <= 0.5 * std::f64::consts::SQRT_2);
    }

    #[test]
    fn field_heading_follows_ribbon() {
        let mut img = BinaryImage::new(80, 30);
        for i in 0..80 {
            for j in 10..21 {
                img.set(i, j, true);
            }
        }
        let field = edt(&img, 0.5).unwrap();
        let h = field_heading(&field, (40, 15), Point2::new(-1.0, 0.0)).unwrap();
        assert!((h - std::f64::consts::PI).abs() < 1e-6, "{h}");
        let h = field_heading(&field, (40, 15), Point2::new(1.0, 0.1)).unwrap();
        assert!(crate::geom::wrap_pi(h).abs() < 1e-6);
    }
}
