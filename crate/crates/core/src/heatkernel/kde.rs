//! Kernel density estimates from simulated diffusion endpoints.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Anchor, KernelError, KernelEstimate, KernelMethod, KernelRepr};
use crate::bridge::sde::{brownian, free_step};
use crate::models::{su2, ModelSpace, Point, SpaceKind, VectorFieldSystem};
use crate::rng::{domain, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `factor · σ_j · n^{−1/(d+4)}` per coordinate.
    Scott { factor: f64 },
    /// Fixed per-coordinate bandwidths.
    Fixed(Vec<f64>),
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::Scott { factor: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeOptions {
    /// Largest integrator step.
    pub dt: f64,
    pub bandwidth: BandwidthRule,
    /// Bandwidth floor for degenerate sample clouds.
    pub min_bandwidth: f64,
}

impl Default for KdeOptions {
    fn default() -> Self {
        KdeOptions {
            dt: 2e-3,
            bandwidth: BandwidthRule::default(),
            min_bandwidth: 1e-3,
        }
    }
}

/// Sample clouds per stored time with their bandwidths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeRepr {
    pub samples: Vec<Vec<Point>>,
    pub bandwidth: Vec<Vec<f64>>,
    /// Kernel height at zero offset, an upper bound for the estimate.
    pub peak: Vec<f64>,
}

#[inline]
fn phi(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Gaussian of width `h` wrapped on the unit circle, and its derivative in `d`.
fn wrapped(d: f64, h: f64) -> (f64, f64) {
    let images = if h < 0.15 { 1 } else { (4.0 * h).ceil() as i64 + 1 };
    let mut v = 0.0;
    let mut dv = 0.0;
    for m in -images..=images {
        let u = (d + m as f64) / h;
        let p = phi(u) / h;
        v += p;
        dv -= u / h * p;
    }
    (v, dv)
}

fn line(d: f64, h: f64) -> (f64, f64) {
    let u = d / h;
    let p = phi(u) / h;
    (p, -u / h * p)
}

impl KdeRepr {
    fn contribution(&self, space: &ModelSpace, k: usize, y: &Point, s: &Point) -> (f64, [f64; 3]) {
        let h = &self.bandwidth[k];
        let dim = y.dim();
        match space.kind {
            SpaceKind::Torus2 | SpaceKind::Heisenberg3 => {
                let d = *y - *s;
                let mut vals = [1.0; 3];
                let mut ders = [0.0; 3];
                for j in 0..dim {
                    let (v, dv) = if space.kind == SpaceKind::Torus2 {
                        wrapped(d[j] - d[j].round(), h[j])
                    } else {
                        line(d[j], h[j])
                    };
                    vals[j] = v;
                    ders[j] = dv;
                }
                let value: f64 = vals[..dim].iter().product();
                let mut grad = [0.0; 3];
                for j in 0..dim {
                    grad[j] = (0..dim)
                        .map(|l| if l == j { ders[l] } else { vals[l] })
                        .product();
                }
                (value, grad)
            }
            SpaceKind::Su2 => {
                let xi = su2::relative(y, s);
                let value = (0..3).map(|j| phi(xi[j] / h[j]) / h[j]).product::<f64>()
                    / su2::haar_density(&xi);
                (value, [0.0; 3])
            }
        }
    }

    /// Estimate, its standard error and the chart gradient at `y`.
    pub fn eval(&self, space: &ModelSpace, k: usize, y: &Point) -> (f64, f64, [f64; 3]) {
        let samples = &self.samples[k];
        let n = samples.len() as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut grad = [0.0; 3];
        for s in samples {
            let (v, g) = self.contribution(space, k, y, s);
            s1 += v;
            s2 += v * v;
            for j in 0..3 {
                grad[j] += g[j];
            }
        }
        let mean = s1 / n;
        let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
        for g in grad.iter_mut() {
            *g /= n;
        }
        if space.kind == SpaceKind::Su2 {
            grad = self.chart_gradient_fd(space, k, y);
        }
        (mean, (var / n).sqrt(), grad)
    }

    fn value(&self, space: &ModelSpace, k: usize, y: &Point) -> f64 {
        let samples = &self.samples[k];
        samples
            .iter()
            .map(|s| self.contribution(space, k, y, s).0)
            .sum::<f64>()
            / samples.len() as f64
    }

    fn chart_gradient_fd(&self, space: &ModelSpace, k: usize, y: &Point) -> [f64; 3] {
        let mut g = [0.0; 3];
        let h = 1e-3 * self.bandwidth[k].iter().cloned().fold(f64::INFINITY, f64::min);
        for (j, gj) in g.iter_mut().enumerate() {
            let e = Point::basis(3, j) * h;
            *gj = (self.value(space, k, &(*y + e)) - self.value(space, k, &(*y - e))) / (2.0 * h);
        }
        g
    }
}

/// Simulates `n_paths` unconditioned paths from `x0` and records the
/// unwrapped state at each time; indexed `[path][time]`.
pub(crate) fn sample_endpoints(
    sys: &VectorFieldSystem,
    x0: &Point,
    times: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Vec<Vec<Point>> {
    let m = sys.diffusion_count();
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, domain::PATHS + i as u64);
            let mut x = *x0;
            let mut t = 0.0;
            let mut out = Vec::with_capacity(times.len());
            for &target in times {
                let steps = ((target - t) / dt).ceil().max(1.0) as usize;
                let h = (target - t) / steps as f64;
                for _ in 0..steps {
                    let dw = brownian(&mut rng, m, h);
                    x = free_step(sys, &x, h, &dw);
                }
                t = target;
                out.push(x);
            }
            out
        })
        .collect()
}

/// Monte Carlo kernel density estimate of `q_t(x₀, ·)`.
pub fn mc_kde_kernel(
    sys: &VectorFieldSystem,
    x0: &Point,
    times: &[f64],
    n_paths: usize,
    opts: &KdeOptions,
    seed: u64,
) -> Result<KernelEstimate, KernelError> {
    super::check_times(times)?;
    if n_paths < 1000 {
        return Err(KernelError::Invalid(format!(
            "n_paths = {n_paths}; at least 1000 paths are needed"
        )));
    }
    if !(opts.dt > 0.0) {
        return Err(KernelError::Invalid("integrator step must be positive".into()));
    }
    let space = sys.space;
    let dim = space.dim();
    let paths = sample_endpoints(sys, x0, times, n_paths, opts.dt, seed);
    let n = n_paths as f64;
    let mut samples = Vec::with_capacity(times.len());
    let mut bandwidth = Vec::with_capacity(times.len());
    let mut peak = Vec::with_capacity(times.len());
    let mut mass = Vec::with_capacity(times.len());
    let mut flags = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let raw: Vec<Point> = paths.iter().map(|p| p[k]).collect();
        let offsets: Vec<Point> = match space.kind {
            SpaceKind::Su2 => raw.iter().map(|p| su2::relative(x0, p)).collect(),
            _ => raw.iter().map(|p| *p - *x0).collect(),
        };
        let h: Vec<f64> = match &opts.bandwidth {
            BandwidthRule::Fixed(h) if h.len() == dim => h.clone(),
            BandwidthRule::Fixed(h) => {
                return Err(KernelError::Invalid(format!(
                    "fixed bandwidth has {} entries, model has dimension {dim}",
                    h.len()
                )))
            }
            BandwidthRule::Scott { factor } => {
                let scale = n.powf(-1.0 / (dim as f64 + 4.0));
                (0..dim)
                    .map(|j| {
                        let mean = offsets.iter().map(|p| p[j]).sum::<f64>() / n;
                        let var =
                            offsets.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                        factor * var.sqrt() * scale
                    })
                    .collect()
            }
        };
        let h: Vec<f64> = h
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                if v < opts.min_bandwidth || !v.is_finite() {
                    flags.push(format!(
                        "bandwidth in coordinate {j} widened to {} at t = {t}",
                        opts.min_bandwidth
                    ));
                    opts.min_bandwidth
                } else {
                    v
                }
            })
            .collect();
        let top: f64 = h
            .iter()
            .map(|&hj| {
                if space.kind == SpaceKind::Torus2 {
                    wrapped(0.0, hj).0
                } else {
                    1.0 / ((2.0 * PI).sqrt() * hj)
                }
            })
            .product();
        peak.push(top);
        bandwidth.push(h);
        samples.push(raw.iter().map(|p| space.wrap(p)).collect());
        mass.push(1.0);
    }
    Ok(KernelEstimate {
        model: sys.name.clone(),
        space,
        method: KernelMethod::MonteCarloKde,
        anchor: Anchor::Source(space.wrap(x0)),
        symmetric: super::is_symmetric(sys),
        times: times.to_vec(),
        mass,
        seed: Some(seed),
        flags,
        rel_floor: super::DEFAULT_REL_FLOOR,
        repr: KernelRepr::Kde(KdeRepr {
            samples,
            bandwidth,
            peak,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapped_gaussian_integrates_to_one() {
        for h in [0.05, 0.3, 0.8] {
            let n = 2000;
            let s: f64 = (0..n).map(|i| wrapped(i as f64 / n as f64 - 0.5, h).0).sum::<f64>() / n as f64;
            assert!((s - 1.0).abs() < 1e-6, "h={h} s={s}");
        }
    }

    #[test]
    fn wrapped_derivative_matches_difference() {
        let (h, d) = (0.2, 0.13);
        let e = 1e-6;
        let fd = (wrapped(d + e, h).0 - wrapped(d - e, h).0) / (2.0 * e);
        assert!((fd - wrapped(d, h).1).abs() < 1e-5);
    }

    #[test]
    fn too_few_paths_is_an_error() {
        let sys = VectorFieldSystem::torus_elliptic();
        let r = mc_kde_kernel(&sys, &Point::zeros(2), &[0.1], 10, &KdeOptions::default(), 1);
        assert!(matches!(r, Err(KernelError::Invalid(_))));
    }
}
