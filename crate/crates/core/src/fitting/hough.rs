use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

use super::{HoughConfig, LineSegmentFit};
use crate::geom::{fit_line, Point2};
use crate::skeleton::{Pixel, Skeleton};

/// A straight run found by the probabilistic Hough transform, with the
/// skeleton pixels it claimed.
#[derive(Debug, Clone, PartialEq)]
pub struct HoughLine {
    pub fit: LineSegmentFit,
    pub pixels: Vec<Pixel>,
    pub votes: u32,
}

struct Accumulator {
    trig: Vec<(f64, f64)>,
    offset: i64,
    numrho: usize,
    rho_res: f64,
    cells: Vec<i32>,
}

impl Accumulator {
    fn new(width: usize, height: usize, cfg: &HoughConfig) -> Self {
        let step = cfg.angular_resolution_deg.to_radians();
        let numangle = ((std::f64::consts::PI / step).round() as usize).max(1);
        let trig = (0..numangle)
            .map(|n| {
                let t = n as f64 * step;
                (t.cos(), t.sin())
            })
            .collect();
        let offset = ((width as f64).hypot(height as f64) / cfg.radial_resolution_px).ceil() as i64 + 1;
        let numrho = 2 * offset as usize + 1;
        Self {
            trig,
            offset,
            numrho,
            rho_res: cfg.radial_resolution_px,
            cells: vec![0; numangle * numrho],
        }
    }

    fn bin(&self, n: usize, p: Pixel) -> usize {
        let (c, s) = self.trig[n];
        let r = ((p.0 as f64 * c + p.1 as f64 * s) / self.rho_res).round() as i64 + self.offset;
        n * self.numrho + r as usize
    }

    /// Adds (or removes) the votes of `p`; returns the strongest bin touched.
    fn vote(&mut self, p: Pixel, delta: i32) -> (i32, usize) {
        let mut best = (i32::MIN, 0);
        for n in 0..self.trig.len() {
            let b = self.bin(n, p);
            self.cells[b] += delta;
            if self.cells[b] > best.0 {
                best = (self.cells[b], n);
            }
        }
        best
    }
}

/// Collects mask pixels within one pixel (across the walk) of the line
/// through `origin` along `u`, walking both ways until the gap exceeds `max_gap` steps.
fn walk(mask: &[bool], width: usize, height: usize, origin: Point2, u: Point2, max_gap: usize) -> BTreeSet<Pixel> {
    let major = u.x.abs().max(u.y.abs());
    let step = 1.0 / major;
    let across = if u.x.abs() >= u.y.abs() {
        Point2::new(0.0, 1.0)
    } else {
        Point2::new(1.0, 0.0)
    };
    let mut found = BTreeSet::new();
    for sign in [1.0, -1.0] {
        let mut gap = 0;
        let mut t = 0.0;
        loop {
            let p = origin + u * (sign * t);
            let mut hit = false;
            for k in [-1.0, 0.0, 1.0] {
                let q = p + across * k;
                let (qi, qj) = (q.x.round(), q.y.round());
                if qi < 0.0 || qj < 0.0 || qi >= width as f64 || qj >= height as f64 {
                    continue;
                }
                let px = (qi as usize, qj as usize);
                if mask[px.1 * width + px.0] {
                    found.insert(px);
                    hit = true;
                }
            }
            if hit {
                gap = 0;
            } else {
                gap += 1;
                if gap > max_gap {
                    break;
                }
            }
            t += step;
            let probe = origin + u * (sign * t);
            if probe.x < -1.5 || probe.y < -1.5 || probe.x > width as f64 + 0.5 || probe.y > height as f64 + 0.5 {
                break;
            }
        }
    }
    found
}

fn to_points(px: &BTreeSet<Pixel>) -> Vec<Point2> {
    px.iter().map(|&(i, j)| Point2::new(i as f64, j as f64)).collect()
}

/// Progressive probabilistic Hough transform over the skeleton pixels.
///
/// Pixels are visited in a seeded random order and vote into a (θ, ρ)
/// accumulator. When a bin reaches `threshold`, the line is followed from the
/// current pixel through a one-pixel corridor, re-fitted by total least
/// squares until the claimed set stops growing, and accepted if at least
/// `min_length_m` long. Walked pixels leave the candidate pool either way;
/// only accepted lines withdraw their votes and claim their pixels.
pub fn hough_lines(skel: &Skeleton, cfg: &HoughConfig) -> Vec<HoughLine> {
    let (w, h) = (skel.image.width(), skel.image.height());
    let res = skel.geometry.resolution;
    let mut mask: Vec<bool> = skel.image.data().to_vec();
    let mut voted = vec![false; w * h];
    let mut order: Vec<Pixel> = skel.pixels().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);
    let mut acc = Accumulator::new(w, h, cfg);
    let max_gap = (cfg.max_gap_m / res).round() as usize;
    let min_len = cfg.min_length_m / res;
    let mut lines = Vec::new();

    for &p in &order {
        let idx = p.1 * w + p.0;
        if !mask[idx] {
            continue;
        }
        let (votes, n) = acc.vote(p, 1);
        voted[idx] = true;
        if votes < cfg.threshold as i32 {
            continue;
        }
        let (c, s) = acc.trig[n];
        let seed = Point2::new(p.0 as f64, p.1 as f64);
        let mut u = Point2::new(-s, c);
        let mut origin = seed;
        let mut claimed = walk(&mask, w, h, origin, u, max_gap);
        for _ in 0..12 {
            let Some((centroid, dir)) = fit_line(&to_points(&claimed)) else {
                break;
            };
            u = dir;
            origin = centroid + u * (seed - centroid).dot(u);
            let next = walk(&mask, w, h, origin, u, max_gap);
            if next.len() <= claimed.len() {
                break;
            }
            claimed = next;
        }
        claimed.insert(p);
        let pts = to_points(&claimed);
        let (centroid, dir) = fit_line(&pts).unwrap_or((seed, u));
        let (mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY);
        for q in &pts {
            let t = (*q - centroid).dot(dir);
            t0 = t0.min(t);
            t1 = t1.max(t);
        }
        let good = t1 - t0 >= min_len;
        for &q in &claimed {
            let qi = q.1 * w + q.0;
            if !mask[qi] {
                continue;
            }
            if good && voted[qi] {
                acc.vote(q, -1);
            }
            mask[qi] = false;
        }
        if good {
            let world = |t: f64| {
                let q = centroid + dir * t;
                Point2::new(
                    skel.geometry.origin.x + (q.x + 0.5) * res,
                    skel.geometry.origin.y + (q.y + 0.5) * res,
                )
            };
            lines.push(HoughLine {
                fit: LineSegmentFit::new(world(t0), world(t1)),
                pixels: claimed.into_iter().collect(),
                votes: votes as u32,
            });
        }
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{BinaryImage, GridGeometry};

    fn skeleton(img: BinaryImage) -> Skeleton {
        let geometry = GridGeometry {
            origin: Point2::new(0.0, 0.0),
            resolution: 0.4,
            width: img.width(),
            height: img.height(),
        };
        Skeleton { image: img, geometry }
    }

    fn draw(img: &mut BinaryImage, a: Point2, b: Point2) {
        let n = (b - a).norm().ceil() as usize * 2;
        for k in 0..=n {
            let p = a.lerp(b, k as f64 / n as f64);
            img.set(p.x.round() as usize, p.y.round() as usize, true);
        }
    }

    #[test]
    fn finds_single_oblique_line() {
        let mut img = BinaryImage::new(300, 200);
        draw(&mut img, Point2::new(10.0, 20.0), Point2::new(280.0, 150.0));
        let lines = hough_lines(&skeleton(img.clone()), &HoughConfig::default());
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        let want = (270.0f64).hypot(130.0) * 0.4;
        assert!((l.fit.length - want).abs() < 1.0, "{} vs {want}", l.fit.length);
        assert!(l.pixels.len() as f64 >= 0.95 * img.count_ones() as f64);
        let ang = (130.0f64).atan2(270.0);
        let d = crate::geom::wrap_pi(l.fit.direction - ang);
        assert!(d.abs() < 0.01 || (d.abs() - std::f64::consts::PI).abs() < 0.01);
    }

    #[test]
    fn short_lines_are_rejected_and_gaps_bridged() {
        let mut img = BinaryImage::new(200, 60);
        // 20 m stroke: below the 25 m minimum.
        draw(&mut img, Point2::new(5.0, 10.0), Point2::new(55.0, 10.0));
        // 60 m stroke with a 3-pixel hole (1.2 m < 2 m max gap).
        draw(&mut img, Point2::new(20.0, 40.0), Point2::new(170.0, 40.0));
        for i in 90..93 {
            img.set(i, 40, false);
        }
        let lines = hough_lines(&skeleton(img), &HoughConfig::default());
        assert_eq!(lines.len(), 1);
        assert!((lines[0].fit.length - 60.0).abs() < 0.5);
        assert!(lines[0].pixels.iter().all(|p| p.1 == 40));
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let mut img = BinaryImage::new(200, 200);
        draw(&mut img, Point2::new(10.0, 10.0), Point2::new(190.0, 180.0));
        draw(&mut img, Point2::new(10.0, 150.0), Point2::new(190.0, 140.0));
        let sk = skeleton(img);
        let a = hough_lines(&sk, &HoughConfig::default());
        let b = hough_lines(&sk, &HoughConfig::default());
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn claimed_pixels_are_disjoint() {
        let mut img = BinaryImage::new(200, 200);
        draw(&mut img, Point2::new(10.0, 100.0), Point2::new(190.0, 100.0));
        draw(&mut img, Point2::new(100.0, 10.0), Point2::new(100.0, 190.0));
        let lines = hough_lines(&skeleton(img), &HoughConfig::default());
        assert!(lines.len() >= 2);
        let mut seen = BTreeSet::new();
        for l in &lines {
            for p in &l.pixels {
                assert!(seen.insert(*p));
            }
        }
    }
}
