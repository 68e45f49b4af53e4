//! Reference values computed independently of the library.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Heat kernel of `½ d²/du²` on the unit circle by its Fourier series.
pub fn circle_fourier(t: f64, u: f64) -> f64 {
    let kmax = (1.0 + (60.0 / (2.0 * PI * PI * t)).sqrt()).ceil() as i32;
    1.0 + 2.0 * (1..=kmax).map(|k| (-2.0 * PI * PI * (k * k) as f64 * t).exp() * (2.0 * PI * k as f64 * u).cos()).sum::<f64>()
}

pub fn circle_fourier_du(t: f64, u: f64) -> f64 {
    let kmax = (1.0 + (60.0 / (2.0 * PI * PI * t)).sqrt()).ceil() as i32;
    -2.0 * (1..=kmax)
        .map(|k| {
            let w = 2.0 * PI * k as f64;
            (-2.0 * PI * PI * (k * k) as f64 * t).exp() * w * (w * u).sin()
        })
        .sum::<f64>()
}

/// Elliptic unit-torus kernel `q_t(x, y)`.
pub fn torus_theta(t: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    circle_fourier(t, y[0] - x[0]) * circle_fourier(t, y[1] - x[1])
}

/// `E ∫_0^{1−ε} |∂_x log q_{1−s}(X_s, z)| ds` for the one-dimensional
/// circle bridge from `a` to `b`, on a uniform grid in space and time.
pub fn circle_bridge_drift_integral(a: f64, b: f64, epsilon: f64) -> f64 {
    let ns = 800;
    let nx = 1600;
    let upper = 1.0 - epsilon;
    let h = upper / ns as f64;
    let norm = circle_fourier(1.0, b - a);
    let mut total = 0.0;
    for i in 0..ns {
        let s = (i as f64 + 0.5) * h;
        let mut e = 0.0;
        for j in 0..nx {
            let x = j as f64 / nx as f64;
            e += circle_fourier(s, x - a) * circle_fourier_du(1.0 - s, b - x).abs();
        }
        total += e / nx as f64 / norm * h;
    }
    total
}

/// Heisenberg kernel for `X = ∂x`, `Y = ∂y + x∂z` with generator
/// `½(X² + Y²)`: Lévy's area formula in the symmetric gauge,
/// inverted by quadrature in the Fourier variable.
pub fn heisenberg_levy(t: f64, x: f64, y: f64, z: f64) -> f64 {
    let area = z - 0.5 * x * y;
    let r2 = x * x + y * y;
    let n = 200_000;
    let lmax = 400.0 / t;
    let h = lmax / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let l = (i as f64 + 0.5) * h;
        let a = 0.5 * l * t;
        let ratio = a / a.sinh();
        let coth = if a < 1e-8 { 1.0 } else { a / a.tanh() };
        acc += (l * area).cos() * ratio * (-r2 / (2.0 * t) * coth).exp();
    }
    // symmetric in λ
    2.0 * acc * h / (2.0 * PI) / (2.0 * PI * t)
}

/// Heisenberg kernel on the vertical axis: the λ-integral of `u / sinh u`
/// against `cos(ωu)` is `π² / (4 cosh²(πω/2))`.
pub fn heisenberg_vertical_kernel(t: f64, z: f64) -> f64 {
    let omega = 2.0 * z / t;
    1.0 / (4.0 * t * t * (0.5 * PI * omega).cosh().powi(2))
}

/// Control distance from the origin to `(0, 0, z)`: an isoperimetric circle.
pub fn heisenberg_vertical_distance(z: f64) -> f64 {
    2.0 * (PI * z.abs()).sqrt()
}
