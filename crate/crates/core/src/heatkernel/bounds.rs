use serde::{Deserialize, Serialize};

use super::{kernel_value, KernelError, KernelEstimate, KernelRepr};
use crate::models::Point;
use crate::stats::{ols, quantile, wls, LineFit};

/// `Q̂(x) = −2 · d log q_t(x,x) / d log t` with a normal-approximation interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub q_hat: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Times of `k` inside `window`; the closed form gets `count` log-spaced times.
fn window_times(k: &KernelEstimate, window: (f64, f64), count: usize) -> Vec<f64> {
    let tol = 1e-12;
    match k.repr {
        KernelRepr::Heisenberg(_) => {
            let (lo, hi) = (window.0.max(k.times[0]), window.1.min(k.times[1]));
            if hi <= lo {
                return Vec::new();
            }
            (0..count)
                .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
                .collect()
        }
        _ => k
            .times
            .iter()
            .cloned()
            .filter(|t| *t >= window.0 - tol && *t <= window.1 + tol)
            .collect(),
    }
}

/// Fits the on-diagonal decay exponent at `x` over the stored times in `window`.
pub fn on_diagonal_exponent(
    k: &KernelEstimate,
    x: &Point,
    window: (f64, f64),
) -> Result<ExponentFit, KernelError> {
    let times = window_times(k, window, 12);
    if times.len() < 5 {
        return Err(KernelError::TooFewTimes {
            need: 5,
            found: times.len(),
        });
    }
    let mut values = Vec::with_capacity(times.len());
    let mut rel_se = Vec::with_capacity(times.len());
    for &t in &times {
        let e = kernel_value(k, t, x, x)?;
        if !(e.value > 0.0) {
            return Err(KernelError::NonPositive { t, value: e.value });
        }
        values.push(e.value);
        rel_se.push(e.std_error / e.value);
    }
    let lt: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let lv: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = ols(&lt, &lv);
    let mut slope_se = fit.slope_se;
    if rel_se.iter().all(|s| *s > 0.0) {
        let w: Vec<f64> = rel_se.iter().map(|s| 1.0 / (s * s)).collect();
        slope_se = slope_se.max(wls(&lt, &lv, &w, false).slope_se);
    }
    let q_hat = -2.0 * fit.slope;
    let std_error = 2.0 * slope_se;
    Ok(ExponentFit {
        q_hat,
        std_error,
        ci_low: q_hat - 1.96 * std_error,
        ci_high: q_hat + 1.96 * std_error,
        times,
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    /// Fixed first argument `x` of `q_t(x, y)`.
    pub base: Point,
    /// Second arguments `y`.
    pub points: Vec<Point>,
    pub t_window: (f64, f64),
    /// Number of times for closed-form kernels.
    pub n_times: usize,
}

/// `C / vol(B_x(√t)) · exp(−rate · d²/t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedBound {
    pub constant: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundFitReport {
    /// `C₂`, `C₄`.
    pub upper: FittedBound,
    /// `C₁`, `C₃`.
    pub lower: FittedBound,
    /// Least-squares line of `log(q V)` against `d²/t`.
    pub fit: LineFit,
    /// 5%, 50% and 95% quantiles of the fit residuals.
    pub residual_quantiles: [f64; 3],
    pub violation_fraction: f64,
    pub n_points: usize,
    pub t_range: (f64, f64),
}

impl BoundFitReport {
    pub fn is_finite(&self) -> bool {
        [self.upper.constant, self.upper.rate, self.lower.constant, self.lower.rate]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Fits `C₁ e^{−C₃ d²/t}/V ≤ q_t(x,y) ≤ C₂ e^{−C₄ d²/t}/V` with
/// `V = vol(B_x(√t))` over the evaluation set.
///
/// The exponential rates share the least-squares slope of `log(qV)`
/// against `d²/t`; `C₂` is then the smallest and `C₁` the largest constant
/// for which the bounds hold at every evaluated point.
pub fn check_gaussian_bounds(
    k: &KernelEstimate,
    d: &dyn Fn(&Point, &Point) -> f64,
    ball_volume: &dyn Fn(&Point, f64) -> f64,
    opts: &BoundOptions,
) -> Result<BoundFitReport, KernelError> {
    let times = window_times(k, opts.t_window, opts.n_times.max(2));
    let mut rs = Vec::new();
    let mut logs = Vec::new();
    let mut raw = Vec::new();
    for &t in &times {
        let vol = ball_volume(&opts.base, t.sqrt());
        for y in &opts.points {
            let q = kernel_value(k, t, &opts.base, y)?.value;
            let dist = d(&opts.base, y);
            if !(q > 0.0) || !vol.is_finite() || !dist.is_finite() {
                continue;
            }
            rs.push(dist * dist / t);
            logs.push((q * vol).ln());
            raw.push((q, vol, dist * dist / t));
        }
    }
    if rs.len() < 3 {
        return Err(KernelError::TooFewTimes {
            need: 3,
            found: rs.len(),
        });
    }
    let fit = ols(&rs, &logs);
    let rate = (-fit.slope).max(0.0);
    let shifted: Vec<f64> = rs.iter().zip(&logs).map(|(r, l)| l + rate * r).collect();
    let c2 = shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    let c1 = shifted.iter().cloned().fold(f64::INFINITY, f64::min).exp();
    let violations = raw
        .iter()
        .filter(|(q, vol, r)| {
            let up = c2 / vol * (-rate * r).exp();
            let lo = c1 / vol * (-rate * r).exp();
            *q > up * (1.0 + 1e-9) || *q < lo * (1.0 - 1e-9)
        })
        .count();
    let residuals: Vec<f64> = rs
        .iter()
        .zip(&logs)
        .map(|(r, l)| l - fit.intercept - fit.slope * r)
        .collect();
    Ok(BoundFitReport {
        upper: FittedBound {
            constant: c2,
            rate,
        },
        lower: FittedBound {
            constant: c1,
            rate,
        },
        fit,
        residual_quantiles: [
            quantile(&residuals, 0.05),
            quantile(&residuals, 0.5),
            quantile(&residuals, 0.95),
        ],
        violation_fraction: violations as f64 / raw.len() as f64,
        n_points: raw.len(),
        t_range: (times[0], *times.last().unwrap()),
    })
}
