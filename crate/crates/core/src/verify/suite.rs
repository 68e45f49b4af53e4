//! Named collections of checks run end to end from a master seed.

use serde::{Deserialize, Serialize};

use super::analytic::{
    caoyau_check, expectation_identity_check, flat_torus_drift_integral, gradient_log_bound_check, CaoYauOptions,
};
use super::lemma::{
    kolmogorov_fit, semimartingale_integral, time_reversal_check, weighted_law_check, Duality, Functional,
    KolmogorovOptions,
};
use super::{Comparison, Criterion, Fitted, SweepRow, VerificationReport, VerifyError};
use crate::bridge::{bridge_ensemble, bridge_kernel_times, diffusion_ensemble, BridgeConfig, DiffusionConfig, Pinning};
use crate::ccdist::{cc_distance, distance_compare_fit, CcOptions};
use crate::heatkernel::{
    heisenberg_kernel, heisenberg_quadrature_kernel, kernel_value, mc_kde_kernel, on_diagonal_exponent,
    solve_heat_grid, solve_heat_grid_to, BandwidthRule, GridMesh, KdeOptions,
};
use crate::models::{adjoint_system, hormander_level, Expr, Point, VectorFieldSystem};
use crate::stats::ols;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Baseline,
    Heisenberg,
    Grushin,
    Full,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Suite::Baseline),
            "heisenberg" => Ok(Suite::Heisenberg),
            "grushin" => Ok(Suite::Grushin),
            "full" => Ok(Suite::Full),
            other => Err(format!("unknown suite {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Paths per ensemble.
    pub paths: usize,
    /// Grid resolution for torus kernels.
    pub mesh: usize,
    pub dt: f64,
    pub epsilons: Vec<f64>,
    pub permutations: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 42,
            paths: 4000,
            mesh: 64,
            dt: 1e-3,
            epsilons: vec![0.1, 0.05, 0.025],
            permutations: 500,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    match suite {
        Suite::Baseline => baseline(opts),
        Suite::Heisenberg => heisenberg(opts),
        Suite::Grushin => grushin(opts),
        Suite::Full => {
            let mut all = baseline(opts)?;
            all.extend(heisenberg(opts)?);
            all.extend(grushin(opts)?);
            Ok(all)
        }
    }
}

fn tag(mut r: VerificationReport, prefix: &str) -> VerificationReport {
    r.statistic = format!("{prefix}/{}", r.statistic);
    r
}

fn smallest_eps(opts: &SuiteOptions) -> f64 {
    opts.epsilons.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn baseline(opts: &SuiteOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let sys = VectorFieldSystem::torus_elliptic();
    let x0 = Point::new(&[0.25, 0.25]);
    let z0 = Point::new(&[0.5, 0.625]);
    let eps = smallest_eps(opts);
    let mesh = GridMesh::new(opts.mesh);
    let times = bridge_kernel_times(opts.dt, eps);
    let k = solve_heat_grid_to(&sys, &z0, &times, &mesh)?;
    let mut out = Vec::new();

    let unc = diffusion_ensemble(&sys, &x0, &DiffusionConfig::new(0.5, opts.dt), opts.seed, opts.paths)?;
    let mut cfg = BridgeConfig::new(x0, z0, opts.seed.wrapping_add(1));
    cfg.dt = opts.dt;
    cfg.epsilon = eps;
    cfg.pinning = Pinning::ChartLinear;
    let br = bridge_ensemble(&cfg, &sys, &k, opts.paths)?;

    let fs = vec![
        Functional::coordinate(0.5, 0),
        Functional::coordinate(0.25, 1),
        Functional::indicator("quadrant", 0.5, |p: &Point| p[0] < 0.5 && p[1] < 0.5),
    ];
    out.push(weighted_law_check(&unc, &br, &k, &fs, 0.5)?);

    let lags = [0.002, 0.004, 0.008, 0.016, 0.032];
    out.push(tag(
        kolmogorov_fit(&unc, &sys.space, 4.0, &KolmogorovOptions::grid(&[0.1, 0.3], &lags))?,
        "unconditioned",
    ));
    out.push(tag(
        kolmogorov_fit(&br.paths, &sys.space, 4.0, &KolmogorovOptions::grid(&[0.3, 0.5], &lags))?,
        "bridge",
    ));
    // flat torus: no stabilization claim, compared with the exact value instead
    for i in 1..=sys.diffusion_count() {
        let mut r = semimartingale_integral(&br, i, &opts.epsilons)?;
        r.criteria.retain(|c| c.name != "relative_change");
        let exact = flat_torus_drift_integral(x0[i - 1], z0[i - 1], eps);
        r.fit(Fitted::plain("exact", exact));
        r.criterion(Criterion::new(
            "relative_error_vs_exact",
            (r.estimate - exact).abs() / exact,
            Comparison::Le,
            0.2,
        ));
        out.push(tag(r.finish(), "control"));
    }

    // time reversal on the symmetric case started and pinned at x₀
    let ks = solve_heat_grid_to(&sys, &x0, &times, &mesh)?;
    let mut c1 = BridgeConfig::new(x0, x0, opts.seed.wrapping_add(2));
    c1.dt = opts.dt;
    c1.epsilon = eps;
    c1.pinning = Pinning::ChartLinear;
    let mut c2 = c1.clone();
    c2.seed = opts.seed.wrapping_add(3);
    let n_rev = opts.paths.min(super::lemma::MAX_TEST_SAMPLES);
    let f = bridge_ensemble(&c1, &sys, &ks, n_rev)?;
    let r = bridge_ensemble(&c2, &sys, &ks, n_rev)?;
    let src = solve_heat_grid(&sys, &x0, &[0.1, 0.2, 0.5], &mesh)?;
    let adj = solve_heat_grid_to(&sys, &x0, &[0.1, 0.2, 0.5], &mesh)?;
    let unit = |_: &Point| 1.0;
    out.push(tag(
        time_reversal_check(
            &sys.space,
            &f,
            &r,
            &[0.25, 0.5, 0.75],
            Some(Duality {
                forward: &src,
                adjoint: &adj,
                x: x0,
                density: &unit,
                tol: 1e-6,
            }),
            opts.permutations,
            opts.seed,
        )?,
        "symmetric",
    ));

    let dense: Vec<f64> = (0..=200).map(|i| 0.02 + 0.005 * i as f64).collect();
    let kt = solve_heat_grid_to(&sys, &z0, &dense, &mesh)?;
    let ksrc = solve_heat_grid(&sys, &x0, &dense, &mesh)?;
    out.push(caoyau_check(&kt, &sys, &CaoYauOptions::default())?);
    out.push(gradient_bound(&sys, &z0, opts.mesh.max(128))?);
    out.push(expectation_identity_check(&ksrc, &kt, &sys, &[0.05, 0.1, 0.25, 0.5])?);

    let pairs: Vec<(Point, Point)> = (0..8)
        .map(|i| {
            let a = i as f64 * 0.7;
            let r = 0.05 + 0.03 * i as f64;
            (x0, x0 + Point::new(&[r * a.cos(), r * a.sin()]))
        })
        .collect();
    let cmp = distance_compare_fit(&sys, &pairs, &|_| 1, &CcOptions::coarse(), opts.seed);
    let mut rep = VerificationReport::new("distance_compare", cmp.c, 0.0);
    rep.fit(Fitted::plain("c_upper", cmp.c_upper));
    rep.fit(Fitted::plain("c_lower", cmp.c_lower));
    rep.fit(Fitted::plain("lower_violations", cmp.lower_violations as f64));
    rep.criterion(Criterion::new("upper_violations", cmp.upper_violations as f64, Comparison::Le, 0.0));
    rep.criterion(Criterion::new("c", cmp.c, Comparison::Le, 1.5));
    rep.criterion(Criterion::new("unreachable", cmp.unreachable as f64, Comparison::Le, 0.0));
    out.push(rep.finish());
    Ok(out.into_iter().map(|r| tag(r, "baseline")).collect())
}

fn gradient_bound(sys: &VectorFieldSystem, z0: &Point, n: usize) -> Result<VerificationReport, VerifyError> {
    let times: Vec<f64> = (0..=60).map(|i| 0.01 * 1.05f64.powi(i)).filter(|t| *t <= 0.31).collect();
    let k = solve_heat_grid_to(sys, z0, &times, &GridMesh::new(n))?;
    let rho = |a: &Point, b: &Point| sys.space.distance(a, b);
    gradient_log_bound_check(&k, sys, &rho, &[(0.0125, 0.025), (0.025, 0.05), (0.05, 0.1)])
}

fn heisenberg(opts: &SuiteOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let sys = VectorFieldSystem::heisenberg();
    let origin = Point::zeros(3);
    let mut out = Vec::new();

    // levels
    let mut bad = 0;
    for i in 0..50 {
        let p = Point::new(&[i as f64 * 0.37 - 9.0, (i as f64 * 1.3).sin() * 4.0, i as f64 * 0.1]);
        if hormander_level(&sys, &p, 3)?.level() != Some(2) {
            bad += 1;
        }
    }
    let mut lv = VerificationReport::new("hormander_level", 2.0, 0.0);
    lv.criterion(Criterion::new("points_not_level_2", bad as f64, Comparison::Le, 0.0));
    out.push(lv.finish());

    // KDE against the closed form, and the on-diagonal exponent
    let kde_times = [0.05, 0.075, 0.1, 0.15, 0.2, 0.25];
    let kde = mc_kde_kernel(
        &sys,
        &origin,
        &kde_times,
        opts.paths.max(1000) * 50,
        &KdeOptions {
            bandwidth: BandwidthRule::Scott { factor: 0.4 },
            ..KdeOptions::default()
        },
        opts.seed,
    )?;
    let probes = [
        Point::new(&[0.0, 0.0, 0.0]),
        Point::new(&[0.2, 0.0, 0.0]),
        Point::new(&[0.0, -0.15, 0.05]),
        Point::new(&[0.1, 0.1, -0.05]),
        Point::new(&[0.0, 0.0, 0.1]),
    ];
    let mut worst: f64 = 0.0;
    let mut kr = VerificationReport::new("kde_vs_closed_form", 0.0, 0.0);
    kr.sweep_param = Some("probe".into());
    for (i, p) in probes.iter().enumerate() {
        let e = kernel_value(&kde, 0.25, &origin, p)?;
        let exact = heisenberg_kernel(0.25, p);
        let z = (e.value - exact).abs() / e.std_error.max(1e-300);
        worst = worst.max(z);
        kr.sweep.push(SweepRow {
            param: i as f64,
            estimate: e.value,
            std_error: e.std_error,
            extra: vec![
                ("closed_form".into(), exact),
                ("z".into(), z),
                ("x0".into(), p[0]),
                ("x1".into(), p[1]),
                ("x2".into(), p[2]),
            ],
        });
    }
    kr.estimate = worst;
    kr.criterion(Criterion::new("max_z", worst, Comparison::Le, 3.0));
    out.push(kr.finish());

    let fit = on_diagonal_exponent(&kde, &origin, (0.05, 0.25))?;
    let mut qr = VerificationReport::new("on_diagonal_exponent_kde", fit.q_hat, fit.std_error);
    qr.fit(Fitted::with_se("q_hat", fit.q_hat, fit.std_error));
    qr.criterion(Criterion::new("q_hat_low", fit.q_hat, Comparison::Ge, 3.6));
    qr.criterion(Criterion::new("q_hat_high", fit.q_hat, Comparison::Le, 4.4));
    out.push(qr.finish());

    // bridges with the closed-form kernel
    let kq = heisenberg_quadrature_kernel(&sys, 0.02, 1.0, None)?;
    let z0 = Point::new(&[1.0, 1.0, 0.5]);
    let mut cfg = BridgeConfig::new(origin, z0, opts.seed.wrapping_add(5));
    cfg.dt = 2.5e-3;
    cfg.epsilon = smallest_eps(opts);
    cfg.pinning = Pinning::ChartLinear;
    let n_br = (opts.paths / 2).max(200);
    let br = bridge_ensemble(&cfg, &sys, &kq, n_br)?;
    for i in 1..=2 {
        out.push(semimartingale_integral(&br, i, &opts.epsilons)?);
    }
    let unc = diffusion_ensemble(&sys, &origin, &DiffusionConfig::new(0.25, 2.5e-3), opts.seed.wrapping_add(6), opts.paths)?;
    let fs = vec![
        Functional::indicator("quadrant", 0.25, |p: &Point| p[0] > 0.0 && p[1] > 0.0),
        Functional::coordinate(0.25, 2),
        Functional::coordinate(0.1, 0),
    ];
    out.push(weighted_law_check(&unc, &br, &kq, &fs, 0.25)?);

    // control distance along the axes
    let line = cc_distance(&sys, &origin, &Point::new(&[0.3, 0.0, 0.0]), 32, 8, opts.seed);
    let mut lr = VerificationReport::new("cc_straight_line", line.d_upper, 0.0);
    lr.criterion(Criterion::new("relative_error", (line.d_upper - 0.3).abs() / 0.3, Comparison::Le, 0.01));
    out.push(lr.finish());
    let zs = [0.05, 0.1, 0.2, 0.4];
    let ds: Vec<f64> = zs
        .iter()
        .map(|z| cc_distance(&sys, &origin, &Point::new(&[0.0, 0.0, *z]), 32, 8, opts.seed).d_upper)
        .collect();
    let lf = ols(&zs.map(f64::ln), &ds.iter().map(|d| d.ln()).collect::<Vec<_>>());
    let mut zr = VerificationReport::new("cc_z_axis_exponent", lf.slope, lf.slope_se);
    zr.fit(Fitted::with_se("exponent", lf.slope, lf.slope_se));
    zr.criterion(Criterion::new("exponent_error", (lf.slope - 0.5).abs(), Comparison::Le, 0.05));
    out.push(zr.finish());
    let pairs: Vec<(Point, Point)> = zs.iter().map(|z| (origin, Point::new(&[0.0, 0.0, *z]))).collect();
    let cmp = distance_compare_fit(&sys, &pairs, &|_| 2, &CcOptions::default(), opts.seed);
    let mut cr = VerificationReport::new("distance_compare", cmp.c, 0.0);
    cr.fit(Fitted::plain("c_upper", cmp.c_upper));
    cr.fit(Fitted::plain("c_lower", cmp.c_lower));
    cr.criterion(Criterion::new("upper_violations", cmp.upper_violations as f64, Comparison::Le, 0.0));
    cr.criterion(Criterion::new("c_finite", f64::from(u8::from(cmp.c.is_finite())), Comparison::Ge, 1.0));
    out.push(cr.finish());
    Ok(out.into_iter().map(|r| tag(r, "heisenberg")).collect())
}

fn grushin(opts: &SuiteOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let sys = VectorFieldSystem::torus_grushin();
    let mut out = Vec::new();

    let degenerate = Point::new(&[0.0, 0.5]);
    let qt: Vec<f64> = (0..12).map(|i| 0.005 * 10f64.powf(i as f64 / 11.0)).collect();
    let kq = solve_heat_grid(&sys, &degenerate, &qt, &GridMesh::new(opts.mesh.max(128)))?;
    let fit = on_diagonal_exponent(&kq, &degenerate, (0.005, 0.05))?;
    let mut qr = VerificationReport::new("on_diagonal_exponent_degenerate", fit.q_hat, fit.std_error);
    qr.fit(Fitted::with_se("q_hat", fit.q_hat, fit.std_error));
    qr.criterion(Criterion::new("q_hat_minus_2se", fit.q_hat - 2.0 * fit.std_error, Comparison::Gt, 2.2));
    out.push(qr.finish());

    let z0 = Point::new(&[0.7, 0.6]);
    let dense: Vec<f64> = (0..=60).map(|i| 0.04 + 0.005 * i as f64).collect();
    let kt = solve_heat_grid_to(&sys, &z0, &dense, &GridMesh::new(opts.mesh))?;
    out.push(caoyau_check(&kt, &sys, &CaoYauOptions::default())?);
    out.push(gradient_bound(&sys, &z0, opts.mesh.max(128))?);

    let x0 = Point::new(&[0.3, 0.2]);
    let eps = smallest_eps(opts);
    let times = bridge_kernel_times(opts.dt, eps);
    let k = solve_heat_grid_to(&sys, &z0, &times, &GridMesh::new(opts.mesh))?;
    let mut cfg = BridgeConfig::new(x0, z0, opts.seed.wrapping_add(7));
    cfg.dt = opts.dt;
    cfg.epsilon = eps;
    cfg.pinning = Pinning::ChartLinear;
    let br = bridge_ensemble(&cfg, &sys, &k, opts.paths)?;
    for i in 1..=2 {
        out.push(semimartingale_integral(&br, i, &opts.epsilons)?);
    }
    let lags = [0.002, 0.004, 0.008, 0.016, 0.032];
    out.push(tag(
        kolmogorov_fit(&br.paths, &sys.space, 4.0, &KolmogorovOptions::grid(&[0.3, 0.5], &lags))?,
        "bridge",
    ));

    // constant-drift torus: forward bridge against the reversed adjoint bridge
    let sd = VectorFieldSystem::torus_elliptic().with_constant_drift(&[0.5, 0.25]);
    let adj = adjoint_system(&sd, &Expr::one())?;
    let mesh = GridMesh::new(opts.mesh);
    let xa = Point::new(&[0.25, 0.25]);
    let za = Point::new(&[0.5, 0.625]);
    let kf = solve_heat_grid_to(&sd, &za, &times, &mesh)?;
    let ka = solve_heat_grid_to(&adj, &xa, &times, &mesh)?;
    let n_rev = opts.paths.min(super::lemma::MAX_TEST_SAMPLES);
    let mut c1 = BridgeConfig::new(xa, za, opts.seed.wrapping_add(8));
    c1.dt = opts.dt;
    c1.epsilon = eps;
    c1.pinning = Pinning::ChartLinear;
    let mut c2 = BridgeConfig::new(za, xa, opts.seed.wrapping_add(9));
    c2.dt = opts.dt;
    c2.epsilon = eps;
    c2.pinning = Pinning::ChartLinear;
    let f = bridge_ensemble(&c1, &sd, &kf, n_rev)?;
    let r = bridge_ensemble(&c2, &adj, &ka, n_rev)?;
    let src = solve_heat_grid(&sd, &xa, &[0.1, 0.2, 0.5], &mesh)?;
    let kad = solve_heat_grid_to(&adj, &xa, &[0.1, 0.2, 0.5], &mesh)?;
    let unit = |_: &Point| 1.0;
    out.push(tag(
        time_reversal_check(
            &sd.space,
            &f,
            &r,
            &[0.25, 0.5, 0.75],
            Some(Duality {
                forward: &src,
                adjoint: &kad,
                x: xa,
                density: &unit,
                tol: 1e-6,
            }),
            opts.permutations,
            opts.seed,
        )?,
        "constant_drift",
    ));
    Ok(out.into_iter().map(|r| tag(r, "grushin")).collect())
}
