use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::fresnel::phase_moments;
use super::{ClothoidConfig, FitError};
use crate::geom::{wrap_pi, Point2};

/// Curve whose curvature varies linearly with arc length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClothoidSegmentFit {
    pub p_start: Point2,
    pub theta_start: f64,
    pub kappa_start: f64,
    /// Curvature derivative with respect to arc length (1/m²).
    pub kappa_rate: f64,
    pub length: f64,
    pub p_end: Point2,
    pub theta_end: f64,
}

impl ClothoidSegmentFit {
    /// Builds the segment from its intrinsic parameters, deriving the end state.
    pub fn from_parameters(p_start: Point2, theta_start: f64, kappa_start: f64, kappa_rate: f64, length: f64) -> Self {
        let mut fit = ClothoidSegmentFit {
            p_start,
            theta_start,
            kappa_start,
            kappa_rate,
            length,
            p_end: p_start,
            theta_end: theta_start,
        };
        let (p, t, _) = fit.state_at(length);
        fit.p_end = p;
        fit.theta_end = t;
        fit
    }

    pub fn kappa_end(&self) -> f64 {
        self.kappa_start + self.kappa_rate * self.length
    }

    /// The same curve traversed from its end to its start.
    pub fn reversed(&self) -> Self {
        Self::from_parameters(self.p_end, self.theta_end + PI, -self.kappa_end(), self.kappa_rate, self.length)
    }

    /// Unchecked forward model.
    pub(crate) fn state_at(&self, s: f64) -> (Point2, f64, f64) {
        let theta = self.theta_start + self.kappa_start * s + 0.5 * self.kappa_rate * s * s;
        let kappa = self.kappa_start + self.kappa_rate * s;
        if s == 0.0 {
            return (self.p_start, theta, kappa);
        }
        let m = phase_moments(self.kappa_rate * s * s, self.kappa_start * s, 0)[0];
        let (c, sn) = (self.theta_start.cos(), self.theta_start.sin());
        let dx = s * (m.re * c - m.im * sn);
        let dy = s * (m.re * sn + m.im * c);
        (Point2::new(self.p_start.x + dx, self.p_start.y + dy), theta, kappa)
    }
}

/// Position, tangent angle and curvature at arc length `s`.
pub fn evaluate_clothoid(fit: &ClothoidSegmentFit, s: f64) -> Result<(Point2, f64, f64), FitError> {
    if !(0.0..=fit.length).contains(&s) {
        return Err(FitError::Domain {
            s,
            length: fit.length,
        });
    }
    Ok(fit.state_at(s))
}

const GUESS: [f64; 6] = [
    2.989696028701907,
    0.716228953608281,
    -0.458969738821509,
    -0.502821153340377,
    0.261062141752652,
    -0.045854475238709,
];

fn guess_a(phi0: f64, phi1: f64) -> f64 {
    let (x, y) = (phi0 / PI, phi1 / PI);
    let xy = x * y;
    let (x2, y2) = (x * x, y * y);
    (phi0 + phi1)
        * (GUESS[0] + xy * (GUESS[1] + xy * GUESS[2]) + (GUESS[3] + xy * GUESS[4]) * (x2 + y2) + GUESS[5] * (x2 * x2 + y2 * y2))
}

/// G¹ Hermite interpolation: the clothoid leaving `p0` at heading `theta0`
/// and arriving at `p1` with heading `theta1`.
///
/// In chord-normalised form the curve is `θ(t) = φ₀ + (δ − A)t + At²` on
/// `t ∈ [0, 1]`, and closing the chord reduces to one equation in `A`,
/// `∫₀¹ sin θ(t) dt = 0`, solved by Newton's method.
pub fn fit_clothoid_g1(
    p0: Point2,
    theta0: f64,
    p1: Point2,
    theta1: f64,
    cfg: &ClothoidConfig,
) -> Result<ClothoidSegmentFit, FitError> {
    let d = p1 - p0;
    let r = d.norm();
    if r <= 0.0 || !r.is_finite() {
        return Err(FitError::CoincidentPoints);
    }
    let chord = d.angle();
    let phi0 = wrap_pi(theta0 - chord);
    let phi1 = wrap_pi(theta1 - chord);
    let near_pi = |p: f64| (p.abs() - PI).abs() < 1e-10;
    if near_pi(phi0) && near_pi(phi1) {
        return Err(FitError::Degenerate);
    }
    if phi0 == 0.0 && phi1 == 0.0 {
        return Ok(ClothoidSegmentFit {
            p_start: p0,
            theta_start: theta0,
            kappa_start: 0.0,
            kappa_rate: 0.0,
            length: r,
            p_end: p1,
            theta_end: theta0,
        });
    }
    let delta = phi1 - phi0;

    let mut a = guess_a(phi0, phi1);
    let (mut g, mut x0);
    let mut iter = 0;
    loop {
        let m = phase_moments(2.0 * a, delta - a, 2);
        let rot = nalgebra::Complex::new(phi0.cos(), phi0.sin());
        let (f0, f1, f2) = (m[0] * rot, m[1] * rot, m[2] * rot);
        g = f0.im;
        x0 = f0.re;
        if g.abs() <= cfg.newton_tolerance * x0.abs().min(1.0) && x0 > 0.0 {
            break;
        }
        iter += 1;
        if iter > cfg.max_iterations {
            return Err(FitError::Convergence {
                residual: g.abs(),
                iterations: cfg.max_iterations,
            });
        }
        let dg = f2.re - f1.re;
        if dg == 0.0 || !dg.is_finite() {
            return Err(FitError::Convergence {
                residual: g.abs(),
                iterations: iter,
            });
        }
        a -= g / dg;
    }
    let length = r / x0;
    let kappa_start = (delta - a) / length;
    let kappa_rate = 2.0 * a / (length * length);
    let mut fit = ClothoidSegmentFit::from_parameters(p0, theta0, kappa_start, kappa_rate, length);
    // The closed form is exact up to the Newton residual; pin the end state
    // to the requested data so joins are bit-exact downstream.
    fit.p_end = p1;
    fit.theta_end = theta0 + kappa_start * length + 0.5 * kappa_rate * length * length;
    Ok(fit)
}

/// Transition spiral from a straight into a circle: starts on the line
/// through `line_point` with heading `heading` and zero curvature, ends
/// tangent to the circle with its curvature. The circle's turn direction
/// follows from the side of the line its centre lies on.
///
/// Returns `None` when the circle touches or crosses the line, or when the
/// spiral would need to turn by more than half a radian.
pub fn spiral_transition(line_point: Point2, heading: f64, center: Point2, radius: f64) -> Option<ClothoidSegmentFit> {
    let u = Point2::from_angle(heading);
    let rel = center - line_point;
    let side = u.cross(rel);
    let sigma = side.signum();
    let (xc, yc) = (rel.dot(u), side.abs());
    if !(radius > 0.0) || yc <= radius {
        return None;
    }
    let offset = |len: f64| {
        let end = ClothoidSegmentFit::from_parameters(Point2::default(), 0.0, 0.0, 1.0 / (radius * len), len).p_end;
        end.y + radius * (len / (2.0 * radius)).cos() - yc
    };
    let (mut lo, mut hi) = (0.0, radius);
    if offset(hi) < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if offset(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * radius {
            break;
        }
    }
    let len = 0.5 * (lo + hi);
    let tau = len / (2.0 * radius);
    let end = ClothoidSegmentFit::from_parameters(Point2::default(), 0.0, 0.0, 1.0 / (radius * len), len).p_end;
    let x0 = xc - end.x + radius * tau.sin();
    Some(ClothoidSegmentFit::from_parameters(
        line_point + u * x0,
        heading,
        0.0,
        sigma / (radius * len),
        len,
    ))
}
