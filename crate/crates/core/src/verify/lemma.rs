//! Ensemble checks: Doob weights and bridge laws, time reversal, the moment
//! criterion and the drift integral along bridges.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::energy::energy_test;
use super::{Comparison, Criterion, Fitted, SweepRow, VerificationReport, VerifyError};
use crate::bridge::{girsanov_weight, BridgeEnsemble, SamplePath};
use crate::heatkernel::{kernel_value, KernelEstimate, KernelRepr};
use crate::models::{ModelSpace, Point};
use crate::stats::{effective_sample_size, mean_se, ols, wls};

/// Most states taken from each sample in a two-sample test.
pub const MAX_TEST_SAMPLES: usize = 600;

/// A bounded cylinder functional of a path, reading states at `times`.
#[derive(Clone)]
pub struct Functional {
    pub name: String,
    pub times: Vec<f64>,
    f: Arc<dyn Fn(&[Point]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Functional({} at {:?})", self.name, self.times)
    }
}

impl Functional {
    /// `f` receives the states at `times`, in order.
    pub fn new<F>(name: impl Into<String>, times: Vec<f64>, f: F) -> Self
    where
        F: Fn(&[Point]) -> f64 + Send + Sync + 'static,
    {
        Functional {
            name: name.into(),
            times,
            f: Arc::new(f),
        }
    }

    pub fn one() -> Self {
        Functional::new("one", Vec::new(), |_| 1.0)
    }

    pub fn coordinate(t: f64, j: usize) -> Self {
        Functional::new(format!("x{j}@{t}"), vec![t], move |s| s[0][j])
    }

    pub fn indicator<P>(name: impl Into<String>, t: f64, pred: P) -> Self
    where
        P: Fn(&Point) -> bool + Send + Sync + 'static,
    {
        Functional::new(name, vec![t], move |s| f64::from(u8::from(pred(&s[0]))))
    }

    pub fn eval(&self, path: &SamplePath) -> Option<f64> {
        let states: Option<Vec<Point>> = self.times.iter().map(|t| path.state_at(*t)).collect();
        states.map(|s| (self.f)(&s))
    }
}

fn z_score(a: (f64, f64), b: (f64, f64)) -> f64 {
    let se = a.1.hypot(b.1);
    if se > 0.0 {
        (a.0 - b.0).abs() / se
    } else if a.0 == b.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Compares Doob-weighted averages of unconditioned paths with bridge
/// averages on `[0, t]`, and checks `E e^{N_t} = 1`.
pub fn weighted_law_check(
    unconditioned: &[SamplePath],
    bridge: &BridgeEnsemble,
    kernel: &KernelEstimate,
    functionals: &[Functional],
    t: f64,
) -> Result<VerificationReport, VerifyError> {
    if !(t > 0.0 && t <= 0.75) {
        return Err(VerifyError::Invalid(format!("t = {t} must lie in (0, 3/4]")));
    }
    if let Some(f) = functionals.iter().find(|f| f.times.iter().any(|s| *s > t + 1e-12)) {
        return Err(VerifyError::Invalid(format!("functional {} reads beyond t", f.name)));
    }
    let z0 = bridge.cfg.z0;
    let mut w = Vec::with_capacity(unconditioned.len());
    let mut floored = 0;
    for p in unconditioned {
        let wt = girsanov_weight(p, kernel, t, &z0)?;
        floored += usize::from(wt.floored);
        w.push(wt.value);
    }
    let (wm, wse) = mean_se(&w);
    let ess = effective_sample_size(&w);
    let mut r = VerificationReport::new("weighted_law", wm, wse);
    r.excluded_fraction = bridge.failure_fraction();
    r.fit(Fitted::with_se("mean_weight", wm, wse));
    r.fit(Fitted::plain("effective_sample_size", ess));
    r.criterion(Criterion::new("weight_mean_z", z_score((wm, wse), (1.0, 0.0)), Comparison::Le, 3.0));
    if floored > 0 {
        r.note(format!("{floored} weights fell below the kernel floor and were set to 0"));
    }
    for f in functionals {
        let mut fw = Vec::with_capacity(unconditioned.len());
        for (p, wt) in unconditioned.iter().zip(&w) {
            let v = f.eval(p).ok_or_else(|| {
                VerifyError::Invalid(format!("unconditioned path lacks a state needed by {}", f.name))
            })?;
            fw.push(v * wt);
        }
        let fb: Vec<f64> = bridge
            .paths
            .iter()
            .map(|p| f.eval(p))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| VerifyError::Invalid(format!("bridge path lacks a state needed by {}", f.name)))?;
        let a = mean_se(&fw);
        let b = mean_se(&fb);
        r.fit(Fitted::with_se(format!("{}_weighted", f.name), a.0, a.1));
        r.fit(Fitted::with_se(format!("{}_bridge", f.name), b.0, b.1));
        r.criterion(Criterion::new(format!("{}_z", f.name), z_score(a, b), Comparison::Le, 3.0));
    }
    if ess < 50.0 {
        r.unreliable = true;
        r.note(format!("effective sample size {ess:.1} below 50"));
    }
    Ok(r.finish())
}

/// Kernels for the duality residual `|m(x)q_t(x,y) − m(y)q̂_t(y,x)|`.
pub struct Duality<'a> {
    /// `q_t(x, ·)`, anchored at source `x`.
    pub forward: &'a KernelEstimate,
    /// `q̂_t(·, x)` of the adjoint system, anchored at target `x`.
    pub adjoint: &'a KernelEstimate,
    pub x: Point,
    pub density: &'a dyn Fn(&Point) -> f64,
    /// Threshold on the residual relative to the largest `m q`.
    pub tol: f64,
}

/// Two-sample tests of forward bridge marginals at `t_k` against reversed
/// adjoint bridge marginals at `1 − t_k`, plus an optional duality residual.
pub fn time_reversal_check(
    space: &ModelSpace,
    forward: &BridgeEnsemble,
    reversed: &BridgeEnsemble,
    times: &[f64],
    duality: Option<Duality<'_>>,
    permutations: usize,
    seed: u64,
) -> Result<VerificationReport, VerifyError> {
    if space.distance(&forward.cfg.x0, &reversed.cfg.z0) > 1e-9
        || space.distance(&forward.cfg.z0, &reversed.cfg.x0) > 1e-9
    {
        return Err(VerifyError::Invalid("reversed bridge must swap the endpoints".into()));
    }
    let mut r = VerificationReport::new("time_reversal", 0.0, 0.0);
    r.sweep_param = Some("t".into());
    r.excluded_fraction = forward.failure_fraction().max(reversed.failure_fraction());
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut min_p = 1.0f64;
    for (k, &t) in sorted.iter().enumerate() {
        let take = |e: &BridgeEnsemble, s: f64| -> Result<Vec<Point>, VerifyError> {
            e.paths
                .iter()
                .take(MAX_TEST_SAMPLES)
                .map(|p| p.state_at(s).ok_or_else(|| VerifyError::Invalid(format!("no state at t = {s}"))))
                .collect()
        };
        let xs = take(forward, t)?;
        let ys = take(reversed, 1.0 - t)?;
        let test = energy_test(space, &xs, &ys, permutations, seed.wrapping_add(k as u64));
        min_p = min_p.min(test.p_value);
        r.sweep.push(SweepRow {
            param: t,
            estimate: test.statistic,
            std_error: 0.0,
            extra: vec![("p_value".into(), test.p_value)],
        });
    }
    r.estimate = min_p;
    // family-wise 1% level over the tested times
    let level = 0.01 / sorted.len().max(1) as f64;
    r.fit(Fitted::plain("per_time_level", level));
    r.criterion(Criterion::new("min_p_value", min_p, Comparison::Ge, level));
    if let Some(d) = duality {
        let (resid, scale) = duality_residual(&d)?;
        r.fit(Fitted::plain("duality_max_residual", resid));
        r.fit(Fitted::plain("duality_scale", scale));
        r.criterion(Criterion::new("duality_relative_residual", resid / scale, Comparison::Le, d.tol));
    }
    Ok(r.finish())
}

fn duality_residual(d: &Duality<'_>) -> Result<(f64, f64), VerifyError> {
    let KernelRepr::Grid(g) = &d.forward.repr else {
        return Err(VerifyError::Invalid("duality residual needs grid kernels".into()));
    };
    let n = g.n;
    let mx = (d.density)(&d.x);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &t in &d.forward.times {
        if !d.adjoint.times.iter().any(|s| (s - t).abs() <= 1e-12) {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let y = Point::new(&[i as f64 / n as f64, j as f64 / n as f64]);
                let a = mx * kernel_value(d.forward, t, &d.x, &y)?.value;
                let b = (d.density)(&y) * kernel_value(d.adjoint, t, &y, &d.x)?.value;
                worst = worst.max((a - b).abs());
                scale = scale.max(a.abs()).max(b.abs());
            }
        }
    }
    if scale == 0.0 {
        return Err(VerifyError::TooFew {
            what: "common kernel times",
            need: 1,
            found: 0,
        });
    }
    Ok((worst, scale))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovOptions {
    /// Time pairs `(s, t)`.
    pub pairs: Vec<(f64, f64)>,
    /// Largest admissible `|t − s|`.
    pub t0: f64,
}

impl KolmogorovOptions {
    /// Pairs `(s, s + h)` for every start and lag.
    pub fn grid(starts: &[f64], lags: &[f64]) -> Self {
        let pairs = starts
            .iter()
            .flat_map(|s| lags.iter().map(move |h| (*s, s + h)))
            .collect();
        KolmogorovOptions { pairs, t0: 0.25 }
    }
}

/// Fits `E ρ^p(y_s, y_t) ≈ C |t − s|^{1+δ}` over the pair grid.
pub fn kolmogorov_fit(
    paths: &[SamplePath],
    space: &ModelSpace,
    p: f64,
    opts: &KolmogorovOptions,
) -> Result<VerificationReport, VerifyError> {
    if !(p > 1.0) {
        return Err(VerifyError::Invalid(format!("moment order p = {p} must exceed 1")));
    }
    let mut rows = Vec::new();
    for &(s, t) in &opts.pairs {
        let lag = (t - s).abs();
        if lag == 0.0 || lag > opts.t0 + 1e-12 {
            continue;
        }
        let vals: Option<Vec<f64>> = paths
            .iter()
            .map(|path| Some(space.distance(&path.state_at(s)?, &path.state_at(t)?).powf(p)))
            .collect();
        let Some(vals) = vals else { continue };
        let (m, se) = mean_se(&vals);
        if m > 0.0 {
            rows.push((lag, m, se));
        }
    }
    if rows.len() < 6 {
        return Err(VerifyError::TooFew {
            what: "time pairs",
            need: 6,
            found: rows.len(),
        });
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let fit = ols(&x, &y);
    let mut se = fit.slope_se;
    if rows.iter().all(|r| r.2 > 0.0) {
        let w: Vec<f64> = rows.iter().map(|r| (r.1 / r.2).powi(2)).collect();
        se = se.max(wls(&x, &y, &w, false).slope_se);
    }
    let delta = fit.slope - 1.0;
    let mut r = VerificationReport::new("kolmogorov_delta", delta, se);
    r.sweep_param = Some("lag".into());
    r.sweep = rows
        .iter()
        .map(|(lag, m, s)| SweepRow {
            param: *lag,
            estimate: *m,
            std_error: *s,
            extra: Vec::new(),
        })
        .collect();
    r.fit(Fitted::with_se("slope", fit.slope, se));
    r.fit(Fitted::with_se("delta", delta, se));
    r.fit(Fitted::plain("constant", fit.intercept.exp()));
    r.fit(Fitted::plain("p", p));
    r.criterion(Criterion::new("delta_minus_2se", delta - 2.0 * se, Comparison::Gt, 0.0));
    Ok(r.finish())
}

/// `∫_a^b |c_i(s)| ds` by the trapezoid rule over the drift records of one
/// bridge path; `field` is 1-based.
pub fn path_drift_integral(path: &SamplePath, field: usize, a: f64, b: f64) -> Option<f64> {
    let ia = (a / path.dt).round() as usize;
    let ib = (b / path.dt).round() as usize;
    if ib < ia || ib >= path.drift.len() || field == 0 || field > 3 {
        return None;
    }
    let mut acc = 0.0;
    for j in ia + 1..=ib {
        acc += 0.5 * path.dt * (path.drift[j - 1][field - 1].abs() + path.drift[j][field - 1].abs());
    }
    Some(acc)
}

/// `E ∫_0^{1−ε} |X_i log q_{1−s}(·, z₀)(y_s)| ds` for each `ε` in the sweep,
/// from the drift records of one ensemble.
pub fn semimartingale_integral(
    ens: &BridgeEnsemble,
    field: usize,
    epsilons: &[f64],
) -> Result<VerificationReport, VerifyError> {
    if epsilons.len() < 2 {
        return Err(VerifyError::TooFew {
            what: "sweep values",
            need: 2,
            found: epsilons.len(),
        });
    }
    if ens.paths.is_empty() {
        return Err(VerifyError::TooFew {
            what: "bridge paths",
            need: 1,
            found: 0,
        });
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    if eps.windows(2).any(|w| w[0] == w[1]) {
        return Err(VerifyError::Invalid("sweep values must be distinct".into()));
    }
    let dt = ens.cfg.dt;
    let idx: Vec<usize> = eps.iter().map(|e| ((1.0 - e) / dt).round() as usize).collect();
    let last = *idx.last().unwrap();
    let mut per_eps = vec![Vec::with_capacity(ens.paths.len()); eps.len()];
    for p in &ens.paths {
        if p.drift.len() <= last {
            return Err(VerifyError::Invalid(format!(
                "drift records end at {}, sweep needs {}",
                (p.drift.len() - 1) as f64 * dt,
                last as f64 * dt
            )));
        }
        let mut acc = 0.0;
        let mut k = 0;
        for j in 0..=last {
            if j > 0 {
                acc += 0.5 * dt * (p.drift[j - 1][field - 1].abs() + p.drift[j][field - 1].abs());
            }
            while k < idx.len() && idx[k] == j {
                per_eps[k].push(acc);
                k += 1;
            }
        }
    }
    let stats: Vec<(f64, f64)> = per_eps.iter().map(|v| mean_se(v)).collect();
    let (fin, fin_se) = *stats.last().unwrap();
    let prev = stats[stats.len() - 2].0;
    let rel = if fin > 0.0 { (fin - prev).abs() / fin } else { 0.0 };
    let mut r = VerificationReport::new(format!("semimartingale_integral_x{field}"), fin, fin_se);
    r.sweep_param = Some("one_minus_epsilon".into());
    r.sweep = eps
        .iter()
        .zip(&stats)
        .map(|(e, (m, s))| SweepRow {
            param: 1.0 - e,
            estimate: *m,
            std_error: *s,
            extra: vec![("epsilon".into(), *e)],
        })
        .collect();
    r.excluded_fraction = ens.failure_fraction();
    r.fit(Fitted::plain("relative_change_last_halving", rel));
    r.fit(Fitted::plain("clamped_fraction", ens.clamped_fraction()));
    r.criterion(Criterion::new("relative_change", rel, Comparison::Le, 0.15));
    r.criterion(Criterion::new("excluded_fraction", r.excluded_fraction, Comparison::Le, 0.1));
    if r.excluded_fraction > 0.2 {
        r.unreliable = true;
        r.note(format!("{:.1}% of paths excluded", 100.0 * r.excluded_fraction));
    }
    Ok(r.finish())
}
