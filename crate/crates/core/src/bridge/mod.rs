//! Unconditioned diffusions, Doob-transform bridges and their weights.
//!
//! The bridge from `x₀` to `z₀` solves
//! `dy = Σ X_i(y)∘dw^i + X₀(y) dt + ∇^H log q_{1−t}(·, z₀)(y) dt` on
//! `[0, 1−ε]`; on `[1−ε, 1]` the noise is frozen and the path is steered
//! deterministically onto `z₀` (see [`Pinning`]).

mod io;
pub mod sde;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{read_ensemble, write_ensemble, write_paths_csv, ENSEMBLE_MAGIC};

use crate::heatkernel::{kernel_value, log_horizontal_gradient, KernelError, KernelEstimate, ABS_FLOOR};
use crate::models::{su2, Point, SpaceKind, VectorFieldSystem};
use crate::rng::{domain, stream};
use sde::{brownian, free_step, heun_step};

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("non-finite state at step {step} of path {path}")]
    NonFinite { step: usize, path: u64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("ensemble file: {0}")]
    Io(#[from] std::io::Error),
    #[error("ensemble file format: {0}")]
    Format(String),
}

/// A simulated trajectory on a uniform step grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    /// Recorded times (every `record_stride` steps, always including the end).
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    /// Brownian increments per step; empty unless requested.
    pub increments: Vec<[f64; 3]>,
    /// Per step: the bridge drift was clamped.
    pub clamped: Vec<bool>,
    /// Bridge control coefficients `c_i = X_i log q_{1−t}(·, z₀)` at each
    /// step time up to `1−ε` inclusive; empty for unconditioned paths.
    pub drift: Vec<[f64; 3]>,
    pub dt: f64,
    pub seed: u64,
    pub stream: u64,
    /// Step index where deterministic pinning took over.
    pub pinned_from: Option<usize>,
    pub retried: bool,
}

impl SamplePath {
    pub fn n_steps(&self) -> usize {
        self.clamped.len()
    }

    /// Recorded state at time `t`, if `t` is on the recorded grid.
    pub fn state_at(&self, t: f64) -> Option<Point> {
        let tol = 1e-9 * self.dt.max(1e-12);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol.max(1e-12)).then(|| self.states[i])
    }

    pub fn clamped_fraction(&self) -> f64 {
        if self.clamped.is_empty() {
            0.0
        } else {
            self.clamped.iter().filter(|c| **c).count() as f64 / self.clamped.len() as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub horizon: f64,
    pub dt: f64,
    pub record_stride: usize,
    pub keep_noise: bool,
}

impl DiffusionConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        DiffusionConfig {
            horizon,
            dt,
            record_stride: 1,
            keep_noise: false,
        }
    }
}

/// Deterministic motion onto `z₀` over `[1−ε, 1]` with the noise frozen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pinning {
    /// Follow a near-minimizing constant-control path from the control
    /// distance solver; falls back to `ChartLinear` if none is found.
    #[default]
    ControlPath,
    /// Straight line in the chart (minimal image on the torus, one-parameter
    /// subgroup on SU(2)).
    ChartLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub x0: Point,
    pub z0: Point,
    pub horizon: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub clamp_norm: f64,
    pub pinning: Pinning,
    pub record_stride: usize,
    pub keep_noise: bool,
    /// Free-form description of the kernel source, for manifests.
    pub kernel_ref: Option<String>,
    pub seed: u64,
}

impl BridgeConfig {
    pub fn new(x0: Point, z0: Point, seed: u64) -> Self {
        BridgeConfig {
            x0,
            z0,
            horizon: 1.0,
            dt: 1e-3,
            epsilon: 0.05,
            clamp_norm: 1e3,
            pinning: Pinning::ControlPath,
            record_stride: 1,
            keep_noise: false,
            kernel_ref: None,
            seed,
        }
    }

    fn steps(&self) -> Result<(usize, usize), BridgeError> {
        if !(self.dt > 0.0 && self.dt < self.epsilon && self.epsilon < 1.0) {
            return Err(BridgeError::Invalid(format!(
                "need 0 < dt < epsilon < 1, got dt = {}, epsilon = {}",
                self.dt, self.epsilon
            )));
        }
        if self.horizon != 1.0 {
            return Err(BridgeError::Invalid("bridge horizon is fixed at 1".into()));
        }
        if !(self.clamp_norm > 0.0) {
            return Err(BridgeError::Invalid("clamp_norm must be positive".into()));
        }
        if self.record_stride == 0 {
            return Err(BridgeError::Invalid("record_stride must be at least 1".into()));
        }
        let total = (1.0 / self.dt).round() as usize;
        let main = ((1.0 - self.epsilon) / self.dt).round() as usize;
        if ((total as f64) * self.dt - 1.0).abs() > 1e-9
            || ((main as f64) * self.dt - (1.0 - self.epsilon)).abs() > 1e-9
        {
            return Err(BridgeError::Invalid(
                "dt must divide both 1 and 1 − epsilon".into(),
            ));
        }
        Ok((total, main))
    }
}

/// Kernel times `{ε, ε+dt, …, 1}` needed by a bridge with these settings,
/// so that grid kernels are queried exactly at stored slices.
pub fn bridge_kernel_times(dt: f64, epsilon: f64) -> Vec<f64> {
    let main = ((1.0 - epsilon) / dt).round() as usize;
    (0..=main).rev().map(|k| 1.0 - k as f64 * dt).collect()
}

struct Recorder {
    stride: usize,
    times: Vec<f64>,
    states: Vec<Point>,
}

impl Recorder {
    fn new(stride: usize, steps: usize) -> Self {
        Recorder {
            stride,
            times: Vec::with_capacity(steps / stride + 2),
            states: Vec::with_capacity(steps / stride + 2),
        }
    }

    fn push(&mut self, step: usize, last: usize, dt: f64, x: Point) {
        if step % self.stride == 0 || step == last {
            self.times.push(if step == last { last as f64 * dt } else { step as f64 * dt });
            self.states.push(x);
        }
    }
}

fn run_free(
    sys: &VectorFieldSystem,
    x0: &Point,
    cfg: &DiffusionConfig,
    seed: u64,
    id: u64,
) -> Result<SamplePath, BridgeError> {
    if !(cfg.dt > 0.0 && cfg.horizon > 0.0) || cfg.record_stride == 0 {
        return Err(BridgeError::Invalid("need dt > 0, horizon > 0 and stride >= 1".into()));
    }
    let n = (cfg.horizon / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.horizon / n as f64;
    let m = sys.diffusion_count();
    let mut rng = stream(seed, domain::PATHS + id);
    let mut rec = Recorder::new(cfg.record_stride, n);
    let mut x = *x0;
    rec.push(0, n, dt, sys.space.wrap(&x));
    let mut increments = Vec::new();
    for step in 0..n {
        let dw = brownian(&mut rng, m, dt);
        if cfg.keep_noise {
            increments.push(dw);
        }
        x = free_step(sys, &x, dt, &dw);
        if !x.is_finite() {
            return Err(BridgeError::NonFinite { step, path: id });
        }
        rec.push(step + 1, n, dt, sys.space.wrap(&x));
    }
    Ok(SamplePath {
        times: rec.times,
        states: rec.states,
        increments,
        clamped: vec![false; n],
        drift: Vec::new(),
        dt,
        seed,
        stream: id,
        pinned_from: None,
        retried: false,
    })
}

/// Unconditioned path from `x₀` on `[0, T]`, stream 0, every step recorded
/// with its noise.
pub fn simulate_diffusion(
    sys: &VectorFieldSystem,
    x0: &Point,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<SamplePath, BridgeError> {
    let cfg = DiffusionConfig {
        keep_noise: true,
        ..DiffusionConfig::new(horizon, dt)
    };
    run_free(sys, x0, &cfg, seed, 0)
}

/// Unconditioned path on stream `id`.
pub fn simulate_diffusion_stream(
    sys: &VectorFieldSystem,
    x0: &Point,
    cfg: &DiffusionConfig,
    seed: u64,
    id: u64,
) -> Result<SamplePath, BridgeError> {
    run_free(sys, x0, cfg, seed, id)
}

/// `n` unconditioned paths on streams `0..n`, in stream order.
pub fn diffusion_ensemble(
    sys: &VectorFieldSystem,
    x0: &Point,
    cfg: &DiffusionConfig,
    seed: u64,
    n: usize,
) -> Result<Vec<SamplePath>, BridgeError> {
    (0..n as u64)
        .into_par_iter()
        .map(|id| run_free(sys, x0, cfg, seed, id))
        .collect()
}

fn drift_norm(sys: &VectorFieldSystem, x: &Point, c: &[f64; 3]) -> f64 {
    let m = sys.diffusion_count();
    match sys.space.kind {
        SpaceKind::Su2 => c[..m].iter().map(|v| v * v).sum::<f64>().sqrt(),
        _ => {
            let mut v = Point::zeros(sys.dim());
            for (i, ci) in c.iter().enumerate().take(m) {
                v = v.axpy(*ci, &sys.eval_diffusion(i, x));
            }
            v.norm()
        }
    }
}

fn bridge_control(
    sys: &VectorFieldSystem,
    kernel: &KernelEstimate,
    cfg: &BridgeConfig,
    t: f64,
    x: &Point,
) -> Result<([f64; 3], bool), KernelError> {
    let g = log_horizontal_gradient(kernel, sys, cfg.horizon - t, x, &cfg.z0)?;
    let mut c = [0.0; 3];
    c[..g.len()].copy_from_slice(&g);
    let norm = drift_norm(sys, x, &c);
    if norm > cfg.clamp_norm {
        let s = cfg.clamp_norm / norm;
        for v in c.iter_mut() {
            *v *= s;
        }
        Ok((c, true))
    } else {
        Ok((c, false))
    }
}

/// States along the pinning curve at fractions `1/K, …, 1` from `from` to `to`.
pub fn pinning_curve(
    sys: &VectorFieldSystem,
    from: &Point,
    to: &Point,
    steps: usize,
    mode: Pinning,
    seed: u64,
) -> Vec<Point> {
    if mode == Pinning::ControlPath {
        if let Some(curve) = crate::ccdist::pinning_states(sys, from, to, steps, seed) {
            return curve;
        }
    }
    let d = sys.space.displacement(from, to);
    (1..=steps)
        .map(|j| {
            let s = j as f64 / steps as f64;
            if j == steps {
                return *to;
            }
            match sys.space.kind {
                SpaceKind::Su2 => su2::right_translate(from, &(d * s)),
                SpaceKind::Heisenberg3 => *from + (*to - *from) * s,
                SpaceKind::Torus2 => *from + d * s,
            }
        })
        .collect()
}

fn bridge_attempt(
    cfg: &BridgeConfig,
    sys: &VectorFieldSystem,
    kernel: &KernelEstimate,
    id: u64,
    rng_id: u64,
) -> Result<SamplePath, BridgeError> {
    let (total, main) = cfg.steps()?;
    let dt = cfg.dt;
    let m = sys.diffusion_count();
    let mut rng = stream(cfg.seed, rng_id);
    let mut rec = Recorder::new(cfg.record_stride, total);
    let mut clamped = vec![false; total];
    let mut drift = Vec::with_capacity(main + 1);
    let mut increments = Vec::new();
    let mut y = cfg.x0;
    rec.push(0, total, dt, sys.space.wrap(&y));
    for step in 0..main {
        let t = step as f64 * dt;
        let dw = brownian(&mut rng, m, dt);
        if cfg.keep_noise {
            increments.push(dw);
        }
        let mut first: Option<[f64; 3]> = None;
        let mut hit = false;
        y = heun_step(sys, &y, t, dt, &dw, |s, p| {
            let (c, cl) = bridge_control(sys, kernel, cfg, s, p)?;
            hit |= cl;
            first.get_or_insert(c);
            Ok::<_, KernelError>(c)
        })?;
        clamped[step] = hit;
        drift.push(first.unwrap_or([0.0; 3]));
        if !y.is_finite() {
            return Err(BridgeError::NonFinite { step, path: id });
        }
        rec.push(step + 1, total, dt, sys.space.wrap(&y));
    }
    drift.push(bridge_control(sys, kernel, cfg, main as f64 * dt, &y)?.0);
    if cfg.keep_noise {
        increments.extend(std::iter::repeat_n([0.0; 3], total - main));
    }
    let curve = pinning_curve(sys, &y, &cfg.z0, total - main, cfg.pinning, cfg.seed ^ id);
    for (j, p) in curve.into_iter().enumerate() {
        rec.push(main + j + 1, total, dt, sys.space.wrap(&p));
    }
    Ok(SamplePath {
        times: rec.times,
        states: rec.states,
        increments,
        clamped,
        drift,
        dt,
        seed: cfg.seed,
        stream: rng_id,
        pinned_from: Some(main),
        retried: false,
    })
}

/// Outcome of one bridge path under the retry policy.
fn bridge_with_retry(
    cfg: &BridgeConfig,
    sys: &VectorFieldSystem,
    kernel: &KernelEstimate,
    id: u64,
) -> Result<SamplePath, BridgeError> {
    match bridge_attempt(cfg, sys, kernel, id, domain::PATHS + id) {
        Err(BridgeError::Kernel(KernelError::DriftUnavailable { .. })) => {
            let mut p = bridge_attempt(cfg, sys, kernel, id, domain::RETRY + id)?;
            p.retried = true;
            Ok(p)
        }
        other => other,
    }
}

/// One bridge path on stream 0, retried once with fresh noise if the
/// drift becomes unavailable.
pub fn simulate_bridge(
    cfg: &BridgeConfig,
    sys: &VectorFieldSystem,
    kernel: &KernelEstimate,
) -> Result<SamplePath, BridgeError> {
    bridge_with_retry(cfg, sys, kernel, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathFailure {
    pub id: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeEnsemble {
    pub cfg: BridgeConfig,
    pub model: String,
    pub requested: usize,
    pub paths: Vec<SamplePath>,
    pub failures: Vec<PathFailure>,
}

impl BridgeEnsemble {
    pub fn failure_fraction(&self) -> f64 {
        if self.requested == 0 {
            0.0
        } else {
            self.failures.len() as f64 / self.requested as f64
        }
    }

    pub fn retried(&self) -> usize {
        self.paths.iter().filter(|p| p.retried).count()
    }

    pub fn clamped_fraction(&self) -> f64 {
        let steps: usize = self.paths.iter().map(SamplePath::n_steps).sum();
        let hits: usize = self
            .paths
            .iter()
            .map(|p| p.clamped.iter().filter(|c| **c).count())
            .sum();
        if steps == 0 {
            0.0
        } else {
            hits as f64 / steps as f64
        }
    }
}

/// `n` bridge paths on streams `0..n`; paths that fail after one retry are
/// excluded and listed.
pub fn bridge_ensemble(
    cfg: &BridgeConfig,
    sys: &VectorFieldSystem,
    kernel: &KernelEstimate,
    n: usize,
) -> Result<BridgeEnsemble, BridgeError> {
    cfg.steps()?;
    let results: Vec<Result<SamplePath, BridgeError>> = (0..n as u64)
        .into_par_iter()
        .map(|id| bridge_with_retry(cfg, sys, kernel, id))
        .collect();
    let mut paths = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (id, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => paths.push(p),
            Err(e @ (BridgeError::Kernel(_) | BridgeError::NonFinite { .. })) => failures.push(PathFailure {
                id: id as u64,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(BridgeEnsemble {
        cfg: cfg.clone(),
        model: sys.name.clone(),
        requested: n,
        paths,
        failures,
    })
}

/// Doob weight `e^{N_t} = q_{1−t}(x_t, z₀) / q_1(x₀, z₀)` of an unconditioned path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub value: f64,
    /// The kernel at `x_t` fell below the floor; the weight was set to 0.
    pub floored: bool,
}

pub fn girsanov_weight(
    path: &SamplePath,
    kernel: &KernelEstimate,
    t: f64,
    z0: &Point,
) -> Result<Weight, BridgeError> {
    if t == 0.0 {
        return Ok(Weight {
            value: 1.0,
            floored: false,
        });
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(BridgeError::Invalid(format!("weight time {t} must lie in [0, 1)")));
    }
    let xt = path
        .state_at(t)
        .ok_or_else(|| BridgeError::Invalid(format!("t = {t} is not on the recorded grid")))?;
    let x0 = path.states[0];
    let denom = kernel_value(kernel, 1.0, &x0, z0)?.value;
    if !(denom > ABS_FLOOR) {
        return Err(BridgeError::Invalid(format!("q_1(x0, z0) = {denom:e} is not positive")));
    }
    let num = kernel_value(kernel, 1.0 - t, &xt, z0)?.value;
    if !(num > ABS_FLOOR) {
        return Ok(Weight {
            value: 0.0,
            floored: true,
        });
    }
    Ok(Weight {
        value: num / denom,
        floored: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fields_give_constant_paths() {
        let mut sys = VectorFieldSystem::torus_elliptic();
        sys.diffusion = vec![crate::models::VectorField::zero(2); 2];
        let x0 = Point::new(&[0.3, 0.4]);
        let p = simulate_diffusion(&sys, &x0, 1.0, 0.01, 3).unwrap();
        assert_eq!(p.states.len(), p.times.len());
        assert!(p.states.iter().all(|s| (*s - x0).max_abs() < 1e-15));
    }

    #[test]
    fn stride_keeps_end_point() {
        let sys = VectorFieldSystem::heisenberg();
        let cfg = DiffusionConfig {
            record_stride: 7,
            ..DiffusionConfig::new(1.0, 0.01)
        };
        let p = simulate_diffusion_stream(&sys, &Point::zeros(3), &cfg, 1, 0).unwrap();
        assert_eq!(*p.times.last().unwrap(), 1.0);
        assert_eq!(p.times[1], 0.07);
        assert!(p.state_at(0.14).is_some());
        assert!(p.state_at(0.15).is_none());
    }

    #[test]
    fn config_validation() {
        let mut cfg = BridgeConfig::new(Point::zeros(2), Point::zeros(2), 0);
        assert!(cfg.steps().is_ok());
        cfg.epsilon = 0.0005;
        assert!(cfg.steps().is_err());
        cfg.epsilon = 0.0505;
        assert!(cfg.steps().is_err());
    }

    #[test]
    fn kernel_times_cover_bridge_queries() {
        let t = bridge_kernel_times(0.01, 0.1);
        assert_eq!(t.len(), 91);
        assert!((t[0] - 0.1).abs() < 1e-12);
        assert_eq!(*t.last().unwrap(), 1.0);
    }
}
