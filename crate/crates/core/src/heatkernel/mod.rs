//! Evaluable approximations of the heat kernel `q_t(x, y)` of `∂_t = L`.
//!
//! Three representations are available:
//!
//! - [`solve_heat_grid`] / [`solve_heat_grid_to`]: explicit finite
//!   differences on the torus, anchored at a source or a target point.
//! - [`mc_kde_kernel`]: kernel density estimates of simulated endpoints,
//!   with per-point standard errors.
//! - [`heisenberg_quadrature_kernel`]: the Heisenberg kernel from its
//!   integral representation, exact up to quadrature error, for any pair
//!   of points.
//!
//! Queries interpolate between stored times log-linearly and refuse to
//! extrapolate.

mod bounds;
mod cache;
mod grid;
mod heisenberg;
mod kde;

use serde::{Deserialize, Serialize};

pub use bounds::{
    check_gaussian_bounds, on_diagonal_exponent, BoundFitReport, BoundOptions, ExponentFit,
    FittedBound,
};
pub use cache::{read_kernel, write_kernel, CACHE_MAGIC};
pub use grid::{evolve_grid, solve_heat_grid, solve_heat_grid_to, Direction, GridMesh, GridRepr};
pub use heisenberg::{
    heisenberg_jet, heisenberg_kernel, heisenberg_time_derivative, HeisenbergRepr, KernelJet,
};
pub use kde::{mc_kde_kernel, BandwidthRule, KdeOptions, KdeRepr};

use crate::models::{divergence, Backend, ModelError, ModelSpace, Point, SpaceKind, VectorFieldSystem};

/// Relative floor below which log-derivatives are not reported.
pub const DEFAULT_REL_FLOOR: f64 = 1e-12;
/// Absolute guard on kernel values used in logarithms.
pub const ABS_FLOOR: f64 = 1e-300;

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("time step {requested:e} violates the stability bound; use dt <= {suggested:e}")]
    Cfl { requested: f64, suggested: f64 },
    #[error("unstable solve: negative mass {negative:e} at t = {t}")]
    Instability { t: f64, negative: f64 },
    #[error("t = {t} is outside the stored range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("kernel value {value:e} at {at} (t = {t}) is below the floor; drift unavailable")]
    DriftUnavailable { t: f64, at: Point, value: f64 },
    #[error("estimate is anchored at {anchor:?}; cannot evaluate at ({x}, {y})")]
    AnchorMismatch { anchor: Anchor, x: Point, y: Point },
    #[error("need at least {need} stored times in the window, found {found}")]
    TooFewTimes { need: usize, found: usize },
    #[error("non-positive kernel value {value:e} at t = {t}")]
    NonPositive { t: f64, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("kernel cache: {0}")]
    Io(#[from] std::io::Error),
    #[error("kernel cache format: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    GridPde,
    MonteCarloKde,
    HeisenbergQuadrature,
}

/// Which argument of `q_t(x, y)` is fixed by the representation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// `q_t(x₀, ·)`.
    Source(Point),
    /// `q_t(·, z₀)`.
    Target(Point),
    /// Both arguments free.
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelRepr {
    Grid(GridRepr),
    Kde(KdeRepr),
    Heisenberg(HeisenbergRepr),
}

/// Immutable kernel estimate; queries take `&self` and are thread safe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub model: String,
    pub space: ModelSpace,
    pub method: KernelMethod,
    pub anchor: Anchor,
    /// `q_t(x, y) = q_t(y, x)` for the underlying system.
    pub symmetric: bool,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub seed: Option<u64>,
    pub flags: Vec<String>,
    pub rel_floor: f64,
    pub repr: KernelRepr,
}

/// A value with its standard error (zero for deterministic methods).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeDerivative {
    pub value: f64,
    pub std_error: f64,
    /// A one-sided difference was used at the end of the stored range.
    pub one_sided: bool,
}

pub(crate) fn check_times(times: &[f64]) -> Result<(), KernelError> {
    if times.is_empty() {
        return Err(KernelError::Invalid("time grid is empty".into()));
    }
    if !times.iter().all(|t| t.is_finite() && *t > 0.0) {
        return Err(KernelError::Invalid("times must be positive and finite".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KernelError::Invalid("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Driftless systems with divergence-free fields have symmetric kernels
/// with respect to the reference volume.
pub fn is_symmetric(sys: &VectorFieldSystem) -> bool {
    if sys.has_drift() {
        return false;
    }
    let probes: Vec<Point> = (0..27)
        .map(|i| {
            let c = [(i % 3) as f64, ((i / 3) % 3) as f64, (i / 9) as f64];
            let mut p = Point::zeros(sys.dim());
            for j in 0..sys.dim() {
                p[j] = 0.13 + 0.29 * c[j];
            }
            p
        })
        .collect();
    (1..=sys.diffusion_count()).all(|k| {
        probes
            .iter()
            .all(|p| matches!(divergence(sys, k, p, Backend::Symbolic), Ok(d) if d.abs() < 1e-9))
    })
}

/// Closed-form Heisenberg kernel valid on `[t_min, t_max]`; with `shells`
/// the lattice quotient is approximated by a truncated sum.
pub fn heisenberg_quadrature_kernel(
    sys: &VectorFieldSystem,
    t_min: f64,
    t_max: f64,
    shells: Option<usize>,
) -> Result<KernelEstimate, KernelError> {
    let standard = VectorFieldSystem::heisenberg();
    if sys.space.kind != SpaceKind::Heisenberg3 || sys.diffusion != standard.diffusion || sys.has_drift()
    {
        return Err(KernelError::Unsupported(format!(
            "closed-form kernel exists only for the driftless Heisenberg model, got {}",
            sys.name
        )));
    }
    check_times(&[t_min, t_max])?;
    Ok(KernelEstimate {
        model: sys.name.clone(),
        space: sys.space,
        method: KernelMethod::HeisenbergQuadrature,
        anchor: Anchor::Free,
        symmetric: true,
        times: vec![t_min, t_max],
        mass: vec![1.0, 1.0],
        seed: None,
        flags: Vec::new(),
        rel_floor: DEFAULT_REL_FLOOR,
        repr: KernelRepr::Heisenberg(HeisenbergRepr { shells }),
    })
}

/// Spatial evaluation of one stored slice.
struct Sample {
    value: f64,
    se: f64,
    grad: [f64; 3],
}

impl KernelEstimate {
    pub fn t_range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn with_rel_floor(mut self, floor: f64) -> Self {
        self.rel_floor = floor;
        self
    }

    /// Value below which slice `k` is treated as unresolved.
    pub fn floor_at(&self, k: usize) -> f64 {
        ABS_FLOOR.max(self.rel_floor * self.slice_max(k))
    }

    /// Bracketing stored indices and the interpolation weight of the upper one.
    fn locate(&self, t: f64) -> Result<(usize, usize, f64), KernelError> {
        let (lo, hi) = self.t_range();
        let tol = 1e-12 * hi.max(1.0);
        if !(t >= lo - tol && t <= hi + tol) {
            return Err(KernelError::OutOfRange { t, lo, hi });
        }
        let k = self.times.partition_point(|&s| s < t - tol);
        if k < self.times.len() && (self.times[k] - t).abs() <= tol {
            return Ok((k, k, 0.0));
        }
        let k = k.max(1).min(self.times.len() - 1);
        let (a, b) = (self.times[k - 1], self.times[k]);
        Ok((k - 1, k, (t - a) / (b - a)))
    }

    /// Grid anchors sit on the nearest node, so any point snapping to that
    /// node matches.
    fn close(&self, a: &Point, b: &Point) -> bool {
        if a.dim() != b.dim() {
            return false;
        }
        match &self.repr {
            KernelRepr::Grid(g) => {
                let half = 0.5 / g.n as f64 + 1e-12;
                self.space.displacement(a, b).iter().all(|d| d.abs() <= half)
            }
            _ => self.space.distance(a, b) <= 1e-9 * (1.0 + a.norm()),
        }
    }

    /// The argument that varies over the stored representation.
    fn free_point(&self, x: &Point, y: &Point) -> Result<Point, KernelError> {
        let mismatch = || KernelError::AnchorMismatch {
            anchor: self.anchor,
            x: *x,
            y: *y,
        };
        match self.anchor {
            Anchor::Source(a) => {
                if self.close(x, &a) {
                    Ok(*y)
                } else if self.symmetric && self.close(y, &a) {
                    Ok(*x)
                } else {
                    Err(mismatch())
                }
            }
            Anchor::Target(b) => {
                if self.close(y, &b) {
                    Ok(*x)
                } else if self.symmetric && self.close(x, &b) {
                    Ok(*y)
                } else {
                    Err(mismatch())
                }
            }
            Anchor::Free => Ok(*y),
        }
    }

    fn slice_max(&self, k: usize) -> f64 {
        match &self.repr {
            KernelRepr::Grid(g) => g.slice_max[k],
            KernelRepr::Kde(d) => d.peak[k],
            KernelRepr::Heisenberg(_) => f64::INFINITY,
        }
    }

    fn sample(&self, k: usize, p: &Point) -> Sample {
        match &self.repr {
            KernelRepr::Grid(g) => {
                let (value, gr) = g.eval(k, p);
                Sample {
                    value,
                    se: 0.0,
                    grad: [gr[0], gr[1], 0.0],
                }
            }
            KernelRepr::Kde(d) => {
                let (value, se, grad) = d.eval(&self.space, k, p);
                Sample { value, se, grad }
            }
            KernelRepr::Heisenberg(_) => unreachable!("closed form has no stored slices"),
        }
    }

    /// Stored slice `k` evaluated at the free point `p`.
    pub fn slice_value(&self, k: usize, p: &Point) -> Estimate {
        let s = self.sample(k, p);
        Estimate {
            value: s.value,
            std_error: s.se,
        }
    }
}

/// `q_t(x, y)` with interpolation in space and log-linear interpolation in time.
pub fn kernel_value(k: &KernelEstimate, t: f64, x: &Point, y: &Point) -> Result<Estimate, KernelError> {
    let (k0, k1, w) = k.locate(t)?;
    if let KernelRepr::Heisenberg(h) = &k.repr {
        return Ok(Estimate {
            value: h.value(t, x, y),
            std_error: 0.0,
        });
    }
    let p = k.free_point(x, y)?;
    let a = k.sample(k0, &p);
    if k0 == k1 {
        return Ok(Estimate {
            value: a.value,
            std_error: a.se,
        });
    }
    let b = k.sample(k1, &p);
    if a.value > 0.0 && b.value > 0.0 {
        let value = ((1.0 - w) * a.value.ln() + w * b.value.ln()).exp();
        let rel = (1.0 - w) * a.se / a.value + w * b.se / b.value;
        Ok(Estimate {
            value,
            std_error: value * rel,
        })
    } else {
        Ok(Estimate {
            value: (1.0 - w) * a.value + w * b.value,
            std_error: (1.0 - w) * a.se + w * b.se,
        })
    }
}

/// `X_i log q_t(·, z₀)` at `x` for each diffusion field.
pub fn log_horizontal_gradient(
    k: &KernelEstimate,
    sys: &VectorFieldSystem,
    t: f64,
    x: &Point,
    z0: &Point,
) -> Result<Vec<f64>, KernelError> {
    let (k0, k1, w) = k.locate(t)?;
    if let KernelRepr::Heisenberg(h) = &k.repr {
        let (v, dq, scale) = h.two_point(t, x, z0);
        // the quadrature cannot resolve values far below the integrand scale
        if !(v > ABS_FLOOR.max(k.rel_floor / (4.0 * t * t)).max(1e-11 * scale)) {
            return Err(KernelError::DriftUnavailable { t, at: *x, value: v });
        }
        return Ok(vec![dq[0] / v, dq[1] / v]);
    }
    let ok = match k.anchor {
        Anchor::Target(b) => k.close(&b, z0),
        Anchor::Source(a) => k.symmetric && k.close(&a, z0),
        Anchor::Free => true,
    };
    if !ok {
        return Err(KernelError::AnchorMismatch {
            anchor: k.anchor,
            x: *x,
            y: *z0,
        });
    }
    let mut g = [0.0; 3];
    let parts = if k0 == k1 {
        vec![(k0, 1.0)]
    } else {
        vec![(k0, 1.0 - w), (k1, w)]
    };
    for (idx, wt) in parts {
        let s = k.sample(idx, x);
        if !(s.value > ABS_FLOOR.max(k.rel_floor * k.slice_max(idx))) {
            return Err(KernelError::DriftUnavailable {
                t,
                at: *x,
                value: s.value,
            });
        }
        for j in 0..3 {
            g[j] += wt * s.grad[j] / s.value;
        }
    }
    let grad = Point::new(&g[..sys.dim()]);
    Ok((0..sys.diffusion_count())
        .map(|i| grad.dot(&sys.eval_diffusion(i, x)))
        .collect())
}

/// Chart gradient of `log q_t(x, y)` in the argument that is not anchored;
/// zero where the value vanishes.
pub fn log_free_gradient(
    k: &KernelEstimate,
    t: f64,
    x: &Point,
    y: &Point,
) -> Result<Point, KernelError> {
    let (k0, k1, w) = k.locate(t)?;
    if let KernelRepr::Heisenberg(_) = &k.repr {
        return Err(KernelError::Unsupported("chart gradient of the closed form".into()));
    }
    let p = k.free_point(x, y)?;
    let dim = k.space.dim();
    let mut g = Point::zeros(dim);
    let parts = if k0 == k1 {
        vec![(k0, 1.0)]
    } else {
        vec![(k0, 1.0 - w), (k1, w)]
    };
    for (idx, wt) in parts {
        let s = k.sample(idx, &p);
        if s.value > ABS_FLOOR {
            g = g.axpy(wt / s.value, &Point::new(&s.grad[..dim]));
        }
    }
    Ok(g)
}

fn node_derivative(k: &KernelEstimate, idx: usize, p: &Point) -> Result<TimeDerivative, KernelError> {
    let n = k.times.len();
    if n < 2 {
        return Err(KernelError::TooFewTimes { need: 2, found: n });
    }
    let t = &k.times;
    let f = |i: usize| k.sample(i, p);
    if idx == 0 || idx == n - 1 {
        let (a, b) = if idx == 0 { (0, 1) } else { (n - 2, n - 1) };
        let (fa, fb) = (f(a), f(b));
        let h = t[b] - t[a];
        return Ok(TimeDerivative {
            value: (fb.value - fa.value) / h,
            std_error: (fa.se.powi(2) + fb.se.powi(2)).sqrt() / h,
            one_sided: true,
        });
    }
    let (h1, h2) = (t[idx] - t[idx - 1], t[idx + 1] - t[idx]);
    let c = [
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    ];
    let s = [f(idx - 1), f(idx), f(idx + 1)];
    Ok(TimeDerivative {
        value: c.iter().zip(&s).map(|(c, s)| c * s.value).sum(),
        std_error: c.iter().zip(&s).map(|(c, s)| (c * s.se).powi(2)).sum::<f64>().sqrt(),
        one_sided: false,
    })
}

/// `∂_t q_t(x, y)` by finite differences over the stored times (exact for
/// the closed-form kernel).
pub fn time_derivative(
    k: &KernelEstimate,
    t: f64,
    x: &Point,
    y: &Point,
) -> Result<TimeDerivative, KernelError> {
    let (k0, k1, w) = k.locate(t)?;
    if let KernelRepr::Heisenberg(h) = &k.repr {
        return Ok(TimeDerivative {
            value: h.time_derivative(t, x, y),
            std_error: 0.0,
            one_sided: false,
        });
    }
    let p = k.free_point(x, y)?;
    let a = node_derivative(k, k0, &p)?;
    if k0 == k1 {
        return Ok(a);
    }
    let b = node_derivative(k, k1, &p)?;
    Ok(TimeDerivative {
        value: (1.0 - w) * a.value + w * b.value,
        std_error: ((1.0 - w) * a.std_error).hypot(w * b.std_error),
        one_sided: a.one_sided || b.one_sided,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn elliptic() -> KernelEstimate {
        let sys = VectorFieldSystem::torus_elliptic();
        solve_heat_grid(&sys, &Point::new(&[0.0, 0.0]), &[0.05, 0.1, 0.2], &GridMesh::new(32)).unwrap()
    }

    #[test]
    fn node_queries_return_stored_values() {
        let k = elliptic();
        let x0 = Point::new(&[0.0, 0.0]);
        let y = Point::new(&[0.25, 0.125]);
        let KernelRepr::Grid(g) = &k.repr else { unreachable!() };
        let stored = g.slices[1][8 * 32 + 4];
        assert_eq!(kernel_value(&k, 0.1, &x0, &y).unwrap().value, stored);
    }

    #[test]
    fn extrapolation_is_refused() {
        let k = elliptic();
        let x0 = Point::new(&[0.0, 0.0]);
        assert!(matches!(
            kernel_value(&k, 0.3, &x0, &x0),
            Err(KernelError::OutOfRange { .. })
        ));
        assert!(matches!(
            kernel_value(&k, 0.01, &x0, &x0),
            Err(KernelError::OutOfRange { .. })
        ));
    }

    #[test]
    fn wrong_anchor_is_refused() {
        let k = elliptic();
        let a = Point::new(&[0.3, 0.3]);
        let b = Point::new(&[0.6, 0.1]);
        assert!(matches!(
            kernel_value(&k, 0.1, &a, &b),
            Err(KernelError::AnchorMismatch { .. })
        ));
    }

    #[test]
    fn endpoint_derivatives_are_flagged() {
        let k = elliptic();
        let x0 = Point::new(&[0.0, 0.0]);
        assert!(time_derivative(&k, 0.05, &x0, &x0).unwrap().one_sided);
        assert!(!time_derivative(&k, 0.1, &x0, &x0).unwrap().one_sided);
    }

    #[test]
    fn symmetry_detection() {
        assert!(is_symmetric(&VectorFieldSystem::torus_grushin()));
        assert!(is_symmetric(&VectorFieldSystem::heisenberg()));
        assert!(is_symmetric(&VectorFieldSystem::su2()));
        assert!(!is_symmetric(&VectorFieldSystem::torus_elliptic().with_constant_drift(&[0.5, 0.0])));
    }
}
