//! Heisenberg heat kernel from its one-dimensional integral representation.
//!
//! For `L = ½(X₁² + X₂²)` with `X₁ = ∂x`, `X₂ = ∂y + x∂z`,
//!
//! ```text
//! p_t(x,y,z) = 1/(π² t²) ∫₀^∞ cos(2ua/t) · u/sinh u · exp(−(r²/2t) · u coth u) du
//! ```
//!
//! with `r² = x² + y²` and `a = z − xy/2` (the Lévy-area coordinate). The
//! integrand is even and analytic for `|Im u| < π`. The trapezoid rule runs
//! along a line shifted into that strip through the saddle of the
//! exponent, where it converges geometrically without cancellation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::models::{heisenberg_inv, heisenberg_mul, Point};

/// Value, coordinate gradient and the scale of the integrand, which bounds
/// the attainable absolute accuracy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelJet {
    pub value: f64,
    pub grad: [f64; 3],
    pub scale: f64,
}

/// Quotient of the full-group kernel by the integer lattice, truncated to
/// `shells` in each coordinate; `None` keeps the full group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergRepr {
    pub shells: Option<usize>,
}

/// `(u / sinh u, u coth u)` for `Re u ≥ 0`.
fn profile(u: Complex64) -> (Complex64, Complex64) {
    if u.norm() < 1e-4 {
        let u2 = u * u;
        (1.0 - u2 / 6.0, 1.0 + u2 / 3.0)
    } else {
        let e = (-2.0 * u).exp();
        let den = 1.0 - e;
        (2.0 * u * (-u).exp() / den, u * (1.0 + e) / den)
    }
}

/// Closest approach of the shifted contour to the pole at `iπ`.
const MIN_POLE_GAP: f64 = 0.05;

/// Height `θ` of the contour `Im u = θ` through the saddle of
/// `−κ u coth u + iωu` on the imaginary axis, where
/// `κ (θ − sin θ cos θ) / sin² θ = |ω|`.
fn contour_height(kappa: f64, omega: f64) -> f64 {
    let w = omega.abs();
    if w == 0.0 {
        return 0.0;
    }
    let h = |th: f64| (th - th.sin() * th.cos()) / th.sin().powi(2);
    let cap = PI - MIN_POLE_GAP;
    if kappa * h(cap) <= w {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if kappa * h(mid) < w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `p_t(g)` for the group element `g` (kernel from the identity) with its
/// coordinate gradient.
pub fn heisenberg_jet(t: f64, g: &Point) -> KernelJet {
    let (x, y, z) = (g[0], g[1], g[2]);
    let r2 = x * x + y * y;
    let a = z - 0.5 * x * y;
    let kappa = r2 / (2.0 * t);
    let omega = 2.0 * a / t;
    let w = omega.abs();

    // The even integrand is ½∫ e^{iωu} f(u) du over the real line; moving
    // the line to Im u = θ removes the cancellation of the oscillation.
    let theta = contour_height(kappa, omega);
    let gap = PI - theta;
    // trapezoid error decays like e^{−2πd/h} for a strip of half-width d
    // inside which the integrand grows by at most e^{ωd + κ(1 + 2π/gap)}
    let d = (0.5 * gap).min(0.5 * PI);
    let step = 2.0 * PI * d / (32.0 + w * d + kappa * (1.0 + 2.0 * PI / gap));
    let cutoff = 45.0 / (1.0 + kappa) + 2.0;
    let nodes = (cutoff / step).ceil() as usize;

    let (mut i0, mut ia, mut ir, mut scale) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..=nodes {
        let u = Complex64::new(k as f64 * step, theta);
        let wk = if k == 0 { 0.5 } else { 1.0 };
        let (ratio, uc) = profile(u);
        let f = ratio * (-kappa * uc + Complex64::i() * w * u).exp();
        let mag = f.norm();
        if k > 0 && mag < 1e-300 {
            break;
        }
        i0 += wk * f.re;
        ia += wk * (Complex64::i() * u * f).re * (2.0 / t);
        ir += wk * (f * uc).re * (-0.5 / t);
        scale += wk * mag;
    }
    let norm = step / (PI * PI * t * t);
    let pa = ia * norm * omega.signum();
    let (p, pr2) = (i0 * norm, ir * norm);
    KernelJet {
        value: p,
        grad: [2.0 * x * pr2 - 0.5 * y * pa, 2.0 * y * pr2 - 0.5 * x * pa, pa],
        scale: scale * norm,
    }
}

/// `p_t(g)` alone.
pub fn heisenberg_kernel(t: f64, g: &Point) -> f64 {
    heisenberg_jet(t, g).value
}

/// `∂_t p_t(g)` from the dilation identity
/// `p_t(x,y,z) = t^{−2} p_1(x/√t, y/√t, z/t)`.
pub fn heisenberg_time_derivative(t: f64, g: &Point) -> f64 {
    let j = heisenberg_jet(t, g);
    -2.0 * j.value / t - (g[0] * j.grad[0] + g[1] * j.grad[1]) / (2.0 * t) - g[2] * j.grad[2] / t
}

impl HeisenbergRepr {
    fn lattice(&self) -> Vec<Point> {
        match self.shells {
            None => vec![Point::zeros(3)],
            Some(k) => {
                let k = k as i64;
                let mut out = Vec::new();
                for a in -k..=k {
                    for b in -k..=k {
                        for c in -k..=k {
                            out.push(Point::new(&[a as f64, b as f64, c as f64]));
                        }
                    }
                }
                out
            }
        }
    }

    /// `q_t(x, y)` and the coordinate gradient of `p_t` at each lattice
    /// translate, combined into the value and the two horizontal
    /// derivatives `X_i q_t(·, y)` at `x`.
    pub fn two_point(&self, t: f64, x: &Point, y: &Point) -> (f64, [f64; 2], f64) {
        let xinv = heisenberg_inv(x);
        let mut value = 0.0;
        let mut dq = [0.0; 2];
        let mut scale = 0.0;
        for gamma in self.lattice() {
            let g = heisenberg_mul(&xinv, &heisenberg_mul(&gamma, y));
            let j = heisenberg_jet(t, &g);
            value += j.value;
            scale += j.scale;
            // moving x along X₁ sends g to (g₁ − s, g₂, g₃ − s g₂); along X₂ to (g₁, g₂ − s, g₃)
            dq[0] += -j.grad[0] - g[1] * j.grad[2];
            dq[1] += -j.grad[1];
        }
        (value, dq, scale)
    }

    pub fn value(&self, t: f64, x: &Point, y: &Point) -> f64 {
        self.two_point(t, x, y).0
    }

    pub fn time_derivative(&self, t: f64, x: &Point, y: &Point) -> f64 {
        let xinv = heisenberg_inv(x);
        self.lattice()
            .iter()
            .map(|gamma| heisenberg_time_derivative(t, &heisenberg_mul(&xinv, &heisenberg_mul(gamma, y))))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_value_is_quarter_over_t_squared() {
        for t in [0.05, 0.25, 1.0, 3.0] {
            let p = heisenberg_kernel(t, &Point::zeros(3));
            assert!((p * 4.0 * t * t - 1.0).abs() < 1e-10, "t={t} p={p}");
        }
    }

    #[test]
    fn dilation_scaling() {
        let g = Point::new(&[0.3, -0.2, 0.15]);
        let t = 0.4;
        let lam: f64 = 1.7;
        let scaled = Point::new(&[lam * g[0], lam * g[1], lam * lam * g[2]]);
        let a = heisenberg_kernel(t, &g);
        let b = heisenberg_kernel(lam * lam * t, &scaled);
        assert!((b * lam.powi(4) / a - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Point::new(&[0.4, 0.1, -0.3]);
        let t = 0.3;
        let j = heisenberg_jet(t, &g);
        for k in 0..3 {
            let h = 1e-5;
            let e = Point::basis(3, k) * h;
            let fd = (heisenberg_kernel(t, &(g + e)) - heisenberg_kernel(t, &(g - e))) / (2.0 * h);
            assert!((fd - j.grad[k]).abs() < 1e-6 * (1.0 + fd.abs()), "k={k} fd={fd} an={}", j.grad[k]);
        }
        let h = 1e-5;
        let fd = (heisenberg_kernel(t + h, &g) - heisenberg_kernel(t - h, &g)) / (2.0 * h);
        assert!((fd - heisenberg_time_derivative(t, &g)).abs() < 1e-6 * (1.0 + fd.abs()));
    }

    #[test]
    fn horizontal_derivatives_match_translated_differences() {
        let rep = HeisenbergRepr { shells: None };
        let x = Point::new(&[0.2, -0.1, 0.05]);
        let y = Point::new(&[-0.1, 0.3, 0.2]);
        let t = 0.5;
        let (_, dq, _) = rep.two_point(t, &x, &y);
        let h = 1e-5;
        for (i, dir) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]].iter().enumerate() {
            let plus = heisenberg_mul(&x, &(Point::new(dir) * h));
            let minus = heisenberg_mul(&x, &(Point::new(dir) * -h));
            let fd = (rep.value(t, &plus, &y) - rep.value(t, &minus, &y)) / (2.0 * h);
            assert!((fd - dq[i]).abs() < 1e-6 * (1.0 + fd.abs()), "i={i}");
        }
    }
}
