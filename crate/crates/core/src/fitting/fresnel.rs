//! Fresnel integrals and the moment integrals of a quadratic phase used by
//! the clothoid forward model and solver.
//!
//! `fresnel_cs(x)` returns `(C(x), S(x))` with `C(x) = ∫₀ˣ cos(π/2·t²) dt`.
//! `phase_moments(a, b, n)` returns `∫₀¹ tᵏ exp(i(a t²/2 + b t)) dt` for
//! `k = 0..n`.

use nalgebra::Complex;
use std::f64::consts::{FRAC_PI_2, PI};

type C64 = Complex<f64>;

const EPS: f64 = 1e-17;
const MAX_ITER: usize = 2000;
/// Crossover between the power series and the continued fraction.
const SERIES_LIMIT: f64 = 1.5;

pub fn fresnel_cs(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (c, s) = if ax < 1e-154 {
        (ax, 0.0)
    } else if ax <= SERIES_LIMIT {
        series(ax)
    } else {
        continued_fraction(ax)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

fn series(x: f64) -> (f64, f64) {
    // Σ (-1)ⁿ (π/2)^{2n} x^{4n+1} / ((2n)! (4n+1)) and the sine analogue.
    let f = FRAC_PI_2 * x * x;
    let mut term = x;
    let (mut c, mut s) = (x, 0.0);
    let mut sign = 1.0;
    for k in 1..MAX_ITER {
        term *= f / k as f64;
        let contrib = term / (2 * k + 1) as f64;
        if k % 2 == 1 {
            s += sign * contrib;
            sign = -sign;
        } else {
            c += sign * contrib;
        }
        if contrib < EPS * c.abs().max(s.abs()) {
            break;
        }
    }
    (c, s)
}

fn continued_fraction(x: f64) -> (f64, f64) {
    // Modified Lentz evaluation of the complementary error function form.
    let pix2 = PI * x * x;
    let one = C64::new(1.0, 0.0);
    let tiny = 1e-300;
    let mut b = C64::new(1.0, -pix2);
    let mut cc = C64::new(1.0 / tiny, 0.0);
    let mut d = one / b;
    let mut h = d;
    let mut n = -1.0;
    for _ in 2..MAX_ITER {
        n += 2.0;
        let a = -n * (n + 1.0);
        b += C64::new(4.0, 0.0);
        d = one / (d * a + b);
        cc = b + C64::new(a, 0.0) / cc;
        let del = cc * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
            break;
        }
    }
    h *= C64::new(x, -x);
    let rot = C64::new((0.5 * pix2).cos(), (0.5 * pix2).sin());
    let cs = C64::new(0.5, 0.5) * (one - rot * h);
    (cs.re, cs.im)
}

/// `∫₀¹ tᵐ exp(i b t) dt` for `m = 0..=n`. Upward recurrence where it is
/// stable (`m < 2|b|`), downward recurrence from far above otherwise.
fn linear_phase_moments(b: f64, n: usize) -> Vec<C64> {
    let mut g = vec![C64::new(0.0, 0.0); n + 1];
    let e = C64::new(b.cos(), b.sin());
    let ib = C64::new(0.0, b);
    let split = ((2.0 * b.abs()).floor() as usize).min(n + 1);
    if split >= 1 {
        g[0] = (e - 1.0) / ib;
        for m in 1..split {
            g[m] = (e - g[m - 1] * m as f64) / ib;
        }
    }
    if split <= n {
        let top = n.max(split) + 80 + (2.0 * b.abs()) as usize;
        // Leading asymptotic term as the seed; its error decays by |b|/m per step.
        let mut cur = e / C64::new(top as f64 + 1.0, b);
        for m in (split..top).rev() {
            cur = (e - ib * cur) / (m as f64 + 1.0);
            if m <= n {
                g[m] = cur;
            }
        }
    }
    g
}

/// Below this |a| the moments come from a power series in `a`.
const SMALL_A: f64 = 2.0;

pub fn phase_moments(a: f64, b: f64, n: usize) -> Vec<C64> {
    if a.abs() < SMALL_A {
        small_a(a, b, n)
    } else {
        large_a(a, b, n)
    }
}

fn small_a(a: f64, b: f64, n: usize) -> Vec<C64> {
    // exp(i a t²/2) = Σ_j (i a/2)^j t^{2j} / j!
    let terms = 24;
    let g = linear_phase_moments(b, n + 2 * terms);
    let step = C64::new(0.0, a / 2.0);
    (0..=n)
        .map(|k| {
            let mut coef = C64::new(1.0, 0.0);
            let mut sum = g[k];
            for j in 1..terms {
                coef = coef * step / j as f64;
                let t = coef * g[k + 2 * j];
                sum += t;
                if t.norm() < 1e-18 * sum.norm() {
                    break;
                }
            }
            sum
        })
        .collect()
}

fn large_a(a: f64, b: f64, n: usize) -> Vec<C64> {
    let s = a.signum();
    let abs_a = a.abs();
    let z = (abs_a / PI).sqrt();
    let u0 = s * b / (PI * abs_a).sqrt();
    let (c0, s0) = fresnel_cs(u0);
    let (c1, s1) = fresnel_cs(u0 + z);
    let ph = -b * b / (2.0 * a);
    let f0 = C64::new(ph.cos(), ph.sin()) * C64::new(c1 - c0, s * (s1 - s0)) / z;
    let mut out = vec![f0];
    let phase1 = a / 2.0 + b;
    let e1 = C64::new(phase1.cos(), phase1.sin());
    let i = C64::new(0.0, 1.0);
    // a F_{k+1} = -i (e^{iφ(1)} - [k = 0]) + i k F_{k-1} - b F_k
    for k in 0..n {
        let mut rhs = -i * e1 - out[k] * b;
        if k == 0 {
            rhs += i;
        } else {
            rhs += i * out[k - 1] * k as f64;
        }
        out.push(rhs / a);
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Adaptive Simpson on a real integrand.
    pub(crate) fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    #[test]
    fn known_values() {
        // Tabulated C(1) = 0.7798934003768228, S(1) = 0.4382591473903548.
        let (c, s) = fresnel_cs(1.0);
        assert!((c - 0.779_893_400_376_822_8).abs() < 1e-15);
        assert!((s - 0.438_259_147_390_354_8).abs() < 1e-15);
        let (c, s) = fresnel_cs(-1.0);
        assert!((c + 0.779_893_400_376_822_8).abs() < 1e-15 && s < 0.0);
        let (c, s) = fresnel_cs(1e6);
        assert!((c - 0.5).abs() < 1e-6 && (s - 0.5).abs() < 1e-6);
        assert_eq!(fresnel_cs(0.0), (0.0, 0.0));
    }

    #[test]
    fn fresnel_matches_quadrature() {
        for k in 0..60 {
            let x = k as f64 * 0.11;
            let (c, s) = fresnel_cs(x);
            let qc = simpson(&|t| (FRAC_PI_2 * t * t).cos(), 0.0, x, 1e-15);
            let qs = simpson(&|t| (FRAC_PI_2 * t * t).sin(), 0.0, x, 1e-15);
            assert!((c - qc).abs() < 1e-12, "C({x}) {c} vs {qc}");
            assert!((s - qs).abs() < 1e-12, "S({x}) {s} vs {qs}");
        }
    }

    #[test]
    fn continuity_at_crossover() {
        let below = series(SERIES_LIMIT);
        let above = continued_fraction(SERIES_LIMIT);
        assert!((below.0 - above.0).abs() < 1e-14);
        assert!((below.1 - above.1).abs() < 1e-14);
    }

    #[test]
    fn moments_match_quadrature() {
        let cases = [
            (0.0, 0.0),
            (1e-9, 0.3),
            (0.5, -3.0),
            (-1.9, 7.5),
            (2.0, 0.0),
            (-2.1, -0.4),
            (15.0, -9.0),
            (-40.0, 22.0),
            (0.01, 25.0),
            (6.0, -3.0),
        ];
        for &(a, b) in &cases {
            let m = phase_moments(a, b, 3);
            for (k, got) in m.iter().enumerate() {
                let re = simpson(&|t| t.powi(k as i32) * (a * t * t / 2.0 + b * t).cos(), 0.0, 1.0, 1e-15);
                let im = simpson(&|t| t.powi(k as i32) * (a * t * t / 2.0 + b * t).sin(), 0.0, 1.0, 1e-15);
                assert!((got.re - re).abs() < 1e-12, "a={a} b={b} k={k}: {} vs {re}", got.re);
                assert!((got.im - im).abs() < 1e-12, "a={a} b={b} k={k}: {} vs {im}", got.im);
            }
        }
    }

    #[test]
    fn linear_moments_closed_form() {
        let g = linear_phase_moments(0.0, 5);
        for (m, v) in g.iter().enumerate() {
            assert!((v.re - 1.0 / (m + 1) as f64).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
        let b = 3.7;
        let g = linear_phase_moments(b, 1);
        assert!((g[0].re - b.sin() / b).abs() < 1e-15);
        assert!((g[0].im - (1.0 - b.cos()) / b).abs() < 1e-15);
    }
}
