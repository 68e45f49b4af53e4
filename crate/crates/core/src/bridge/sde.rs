//! Stratonovich Heun stepping for `dx = X_0 dt + Σ X_k ∘ (dW_k + c_k dt)`.
//!
//! Torus states are not wrapped here; the fields are periodic, so callers
//! wrap only when recording. On SU(2) the step is taken in the algebra and
//! applied by right translation, so states stay in the chart.

use std::convert::Infallible;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::models::{su2, Point, SpaceKind, VectorFieldSystem};

/// Brownian increments for one step of length `dt`.
pub fn brownian<R: Rng>(rng: &mut R, m: usize, dt: f64) -> [f64; 3] {
    let s = dt.sqrt();
    let mut dw = [0.0; 3];
    for v in dw.iter_mut().take(m) {
        let z: f64 = rng.sample(StandardNormal);
        *v = s * z;
    }
    dw
}

fn algebra_increment(sys: &VectorFieldSystem, dt: f64, u: &[f64]) -> Point {
    let mut w = Point::zeros(3);
    if let Some(a0) = sys.drift.generator() {
        w = w.axpy(dt, &Point::new(&a0));
    }
    for (k, f) in sys.diffusion.iter().enumerate() {
        let a = f.generator().expect("su2 diffusion fields are left-invariant");
        w = w.axpy(u[k], &Point::new(&a));
    }
    w
}

fn chart_increment(sys: &VectorFieldSystem, x: &Point, dt: f64, u: &[f64]) -> Point {
    let mut f = sys.eval_drift(x) * dt;
    for (k, field) in sys.diffusion.iter().enumerate() {
        if u[k] != 0.0 {
            f = f.axpy(u[k], &field.eval(x));
        }
    }
    f
}

/// One Heun step with a state-dependent control `c(t, x)` added to the
/// Brownian increments as `c_k dt`.
pub fn heun_step<E, F>(
    sys: &VectorFieldSystem,
    x: &Point,
    t: f64,
    dt: f64,
    dw: &[f64; 3],
    mut control: F,
) -> Result<Point, E>
where
    F: FnMut(f64, &Point) -> Result<[f64; 3], E>,
{
    let m = sys.diffusion_count();
    let mut u1 = [0.0; 3];
    let c1 = control(t, x)?;
    for k in 0..m {
        u1[k] = dw[k] + c1[k] * dt;
    }
    match sys.space.kind {
        SpaceKind::Su2 => {
            let w1 = algebra_increment(sys, dt, &u1);
            let pred = su2::right_translate(x, &w1);
            let c2 = control(t + dt, &pred)?;
            let mut u2 = [0.0; 3];
            for k in 0..m {
                u2[k] = dw[k] + c2[k] * dt;
            }
            let w2 = algebra_increment(sys, dt, &u2);
            Ok(su2::right_translate(x, &((w1 + w2) * 0.5)))
        }
        _ => {
            let f1 = chart_increment(sys, x, dt, &u1);
            let pred = *x + f1;
            let c2 = control(t + dt, &pred)?;
            let mut u2 = [0.0; 3];
            for k in 0..m {
                u2[k] = dw[k] + c2[k] * dt;
            }
            let f2 = chart_increment(sys, &pred, dt, &u2);
            Ok(*x + (f1 + f2) * 0.5)
        }
    }
}

/// Heun step without control.
pub fn free_step(sys: &VectorFieldSystem, x: &Point, dt: f64, dw: &[f64; 3]) -> Point {
    let r: Result<Point, Infallible> = heun_step(sys, x, 0.0, dt, dw, |_, _| Ok([0.0; 3]));
    match r {
        Ok(p) => p,
        Err(e) => match e {},
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_step_is_stratonovich_midpoint() {
        let h = VectorFieldSystem::heisenberg();
        let x = Point::new(&[0.5, 0.0, 0.0]);
        let y = free_step(&h, &x, 0.01, &[0.2, 0.3, 0.0]);
        // z picks up the midpoint value of x times dW_2
        assert!((y[2] - 0.6 * 0.3).abs() < 1e-14);
        assert!((y[0] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn su2_free_step_is_group_exponential() {
        let s = VectorFieldSystem::su2();
        let x = Point::new(&[0.1, -0.2, 0.3]);
        let dw = [0.05, -0.02, 0.0];
        let y = free_step(&s, &x, 0.01, &dw);
        let a = s.diffusion[0].generator().unwrap();
        let b = s.diffusion[1].generator().unwrap();
        let w = Point::new(&a) * dw[0] + Point::new(&b) * dw[1];
        let direct = su2::right_translate(&x, &w);
        assert!((y - direct).max_abs() < 1e-14);
    }
}
