//! Acceptance checks, one test per property, each printing a PASS/FAIL line.
//!
//! The suites are run once at seed 42 and shared between tests; the first
//! test to need a suite is charged its runtime. Tests hold a lock so that
//! the printed runtimes are not inflated by each other.

mod common;

use std::io::Write;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::Rng;

use hypobridge::bridge::{bridge_ensemble, bridge_kernel_times, diffusion_ensemble, BridgeConfig, DiffusionConfig, Pinning};
use hypobridge::heatkernel::{kernel_value, on_diagonal_exponent, solve_heat_grid, solve_heat_grid_to, GridMesh, KernelRepr};
use hypobridge::models::{hormander_level, HormanderLevel, Point, VectorFieldSystem, RANK_TOLERANCE};
use hypobridge::rng::stream;
use hypobridge::verify::{run_suite, weighted_law_check, Functional, Suite, SuiteOptions, VerificationReport};

static LOCK: Mutex<()> = Mutex::new(());

fn lock() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn suite(which: Suite) -> &'static [VerificationReport] {
    static BASE: OnceLock<Vec<VerificationReport>> = OnceLock::new();
    static HEIS: OnceLock<Vec<VerificationReport>> = OnceLock::new();
    static GRU: OnceLock<Vec<VerificationReport>> = OnceLock::new();
    let cell = match which {
        Suite::Baseline => &BASE,
        Suite::Heisenberg => &HEIS,
        Suite::Grushin => &GRU,
        Suite::Full => unreachable!(),
    };
    cell.get_or_init(|| run_suite(which, &SuiteOptions::default()).expect("suite runs"))
}

fn report<'a>(reports: &'a [VerificationReport], name: &str) -> &'a VerificationReport {
    reports
        .iter()
        .find(|r| r.statistic == name)
        .unwrap_or_else(|| panic!("no report {name}"))
}

fn criterion(r: &VerificationReport, name: &str) -> f64 {
    r.criteria
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("{} has no criterion {name}", r.statistic))
        .value
}

struct Outcome {
    label: &'static str,
    checks: Vec<(String, bool)>,
    started: Instant,
    limit: Duration,
}

impl Outcome {
    fn new(label: &'static str, limit_secs: u64) -> Self {
        Outcome {
            label,
            checks: Vec::new(),
            started: Instant::now(),
            limit: Duration::from_secs(limit_secs),
        }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn finish(mut self) {
        let elapsed = self.started.elapsed();
        self.check(format!("runtime {:.1}s < {}s", elapsed.as_secs_f64(), self.limit.as_secs()), elapsed < self.limit);
        let ok = self.checks.iter().all(|c| c.1);
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        // written to the process stdout so the line survives output capture
        let line = format!(
            "{} {}: {}\n",
            if ok { "PASS" } else { "FAIL" },
            self.label,
            self.checks.iter().map(|c| c.0.as_str()).collect::<Vec<_>>().join("; ")
        );
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(line.as_bytes());
        let _ = out.flush();
        assert!(ok, "{} failed: {}", self.label, failed.join("; "));
    }
}

#[test]
fn hormander_levels() {
    let _g = lock();
    let mut o = Outcome::new("hormander levels", 10);
    let mut rng = stream(42, 1);
    let h = VectorFieldSystem::heisenberg();
    let bad = (0..1000)
        .filter(|_| {
            let p = Point::new(&[rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]);
            hormander_level(&h, &p, 3).unwrap() != HormanderLevel::Spanned(2)
        })
        .count();
    o.check(format!("heisenberg mismatches {bad}/1000"), bad == 0);

    let g = VectorFieldSystem::torus_grushin();
    let mut pts: Vec<Point> = (0..900).map(|_| Point::new(&[rng.random(), rng.random()])).collect();
    for i in 0..100 {
        pts.push(Point::new(&[if i % 2 == 0 { 0.0 } else { 0.5 }, rng.random()]));
    }
    let mut mismatches = 0;
    let mut degenerate = 0;
    for p in &pts {
        let expected = if (2.0 * std::f64::consts::PI * p[0]).sin().abs() > RANK_TOLERANCE {
            1
        } else {
            degenerate += 1;
            2
        };
        if hormander_level(&g, p, 3).unwrap() != HormanderLevel::Spanned(expected) {
            mismatches += 1;
        }
    }
    o.check(format!("grushin mismatches {mismatches}/1000 ({degenerate} degenerate)"), mismatches == 0 && degenerate >= 100);
    o.finish();
}

fn grid_mass(k: &hypobridge::heatkernel::KernelEstimate, slice: usize) -> f64 {
    let KernelRepr::Grid(g) = &k.repr else { panic!("grid kernel expected") };
    g.slices[slice].iter().sum::<f64>() / (g.n * g.n) as f64
}

#[test]
fn kernel_correctness() {
    let _g = lock();
    let mut o = Outcome::new("kernel correctness", 300);
    let heis = suite(Suite::Heisenberg);
    let sys = VectorFieldSystem::torus_elliptic();
    let x0 = Point::new(&[0.25, 0.25]);
    let k = solve_heat_grid(&sys, &x0, &[0.05, 0.1, 0.2, 0.5], &GridMesh::new(64)).unwrap();
    for t in [0.1, 0.2] {
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let y = Point::new(&[i as f64 / 64.0, j as f64 / 64.0]);
                let v = kernel_value(&k, t, &x0, &y).unwrap().value;
                let exact = common::torus_theta(t, [0.25, 0.25], [y[0], y[1]]);
                worst = worst.max((v - exact).abs() / exact);
            }
        }
        o.check(format!("theta max rel error at t={t}: {worst:.2e}"), worst <= 0.01);
    }

    let kde = report(heis, "heisenberg/kde_vs_closed_form");
    let mut worst_z: f64 = 0.0;
    for row in &kde.sweep {
        let get = |n: &str| row.extra.iter().find(|e| e.0 == n).unwrap().1;
        let exact = common::heisenberg_levy(0.25, get("x0"), get("x1"), get("x2"));
        worst_z = worst_z.max((row.estimate - exact).abs() / row.std_error);
    }
    o.check(format!("heisenberg kde {} points, max |z| {worst_z:.2}", kde.sweep.len()), kde.sweep.len() >= 5 && worst_z <= 3.0);

    let grushin = VectorFieldSystem::torus_grushin();
    let kg = solve_heat_grid(&grushin, &Point::new(&[0.0, 0.5]), &[0.01, 0.05, 0.1, 0.3, 1.0], &GridMesh::new(64)).unwrap();
    let mut worst_mass: f64 = 0.0;
    for kk in [&k, &kg] {
        for (s, m) in kk.mass.iter().enumerate() {
            worst_mass = worst_mass.max((m - 1.0).abs()).max((grid_mass(kk, s) - 1.0).abs());
        }
    }
    o.check(format!("max mass defect {worst_mass:.1e}"), worst_mass <= 1e-3);
    o.finish();
}

#[test]
fn on_diagonal_exponents() {
    let _g = lock();
    let mut o = Outcome::new("on-diagonal exponents", 600);
    let heis = suite(Suite::Heisenberg);
    let gru = suite(Suite::Grushin);
    let sys = VectorFieldSystem::torus_elliptic();
    let x = Point::new(&[0.5, 0.5]);
    let times: Vec<f64> = (0..12).map(|i| 0.005 * 6f64.powf(i as f64 / 11.0)).collect();
    let k = solve_heat_grid(&sys, &x, &times, &GridMesh::new(128)).unwrap();
    let q = on_diagonal_exponent(&k, &x, (0.005, 0.03)).unwrap().q_hat;
    o.check(format!("elliptic Q {q:.3}"), (1.8..=2.2).contains(&q));
    let qh = report(heis, "heisenberg/on_diagonal_exponent_kde").estimate;
    o.check(format!("heisenberg Q {qh:.3}"), (3.6..=4.4).contains(&qh));
    let r = report(gru, "grushin/on_diagonal_exponent_degenerate");
    o.check(format!("grushin degenerate Q {:.3} se {:.3}", r.estimate, r.std_error), r.estimate - 2.0 * r.std_error > 2.2);
    o.finish();
}

#[test]
fn bridge_law_identities() {
    let _g = lock();
    let mut o = Outcome::new("bridge law identities", 900);
    let base = suite(Suite::Baseline);
    let gru = suite(Suite::Grushin);
    let sys = VectorFieldSystem::torus_elliptic();
    let x0 = Point::new(&[0.25, 0.25]);
    let z0 = Point::new(&[0.5, 0.625]);
    let k = solve_heat_grid_to(&sys, &z0, &bridge_kernel_times(1e-3, 0.025), &GridMesh::new(64)).unwrap();
    let n = 10_000;
    let unc = diffusion_ensemble(&sys, &x0, &DiffusionConfig::new(0.5, 1e-3), 42, n).unwrap();
    let mut cfg = BridgeConfig::new(x0, z0, 43);
    cfg.dt = 1e-3;
    cfg.pinning = Pinning::ChartLinear;
    let br = bridge_ensemble(&cfg, &sys, &k, n).unwrap();
    let fs = vec![
        Functional::coordinate(0.5, 0),
        Functional::coordinate(0.25, 1),
        Functional::indicator("quadrant", 0.5, |p: &Point| p[0] < 0.5 && p[1] < 0.5),
    ];
    let w = weighted_law_check(&unc, &br, &k, &fs, 0.5).unwrap();
    let wz = criterion(&w, "weight_mean_z");
    o.check(format!("weight mean {:.4} (|z| {wz:.2}) at {n} paths", w.estimate), wz <= 3.0);
    let fz: Vec<String> = w.criteria.iter().filter(|c| c.name != "weight_mean_z").map(|c| format!("{} {:.2}", c.name, c.value)).collect();
    o.check(format!("functionals {}", fz.join(", ")), fz.len() == 3 && w.pass);
    for name in ["baseline/symmetric/time_reversal", "grushin/constant_drift/time_reversal"] {
        let r = report(if name.starts_with("baseline") { base } else { gru }, name);
        o.check(
            format!("{name} min p {:.4} (per-time level {:.4})", r.estimate, r.fitted_value("per_time_level").unwrap()),
            r.pass,
        );
    }
    o.finish();
}

#[test]
fn kolmogorov_exponent() {
    let _g = lock();
    let mut o = Outcome::new("kolmogorov exponent", 600);
    let base = suite(Suite::Baseline);
    let gru = suite(Suite::Grushin);
    let r = report(base, "baseline/unconditioned/kolmogorov_delta");
    o.check(format!("elliptic delta {:.3} ± {:.3}", r.estimate, r.std_error), (r.estimate - 1.0).abs() <= 0.15);
    let g = report(gru, "grushin/bridge/kolmogorov_delta");
    o.check(format!("grushin bridge delta {:.3} ± {:.3}", g.estimate, g.std_error), g.estimate - 2.0 * g.std_error > 0.0);
    o.finish();
}

#[test]
fn drift_integral_stabilizes() {
    let _g = lock();
    let mut o = Outcome::new("drift integral", 1800);
    let base = suite(Suite::Baseline);
    let heis = suite(Suite::Heisenberg);
    let gru = suite(Suite::Grushin);
    for (reports, prefix) in [(gru, "grushin"), (heis, "heisenberg")] {
        for i in 1..=2 {
            let r = report(reports, &format!("{prefix}/semimartingale_integral_x{i}"));
            let change = criterion(r, "relative_change");
            o.check(
                format!("{prefix} x{i} {:.4}, last change {:.1}%, excluded {:.1}%", r.estimate, 100.0 * change, 100.0 * r.excluded_fraction),
                change <= 0.15 && r.excluded_fraction <= 0.1,
            );
        }
    }
    let ends = [(0.25, 0.5), (0.25, 0.625)];
    for (i, (a, b)) in ends.iter().enumerate() {
        let r = report(base, &format!("baseline/control/semimartingale_integral_x{}", i + 1));
        let exact = common::circle_bridge_drift_integral(*a, *b, 0.025);
        let rel = (r.estimate - exact).abs() / exact;
        o.check(format!("elliptic x{} {:.4} vs oracle {exact:.4} ({:.1}%)", i + 1, r.estimate, 100.0 * rel), rel <= 0.2);
    }
    o.finish();
}

#[test]
fn heat_kernel_inequalities() {
    let _g = lock();
    let mut o = Outcome::new("heat kernel inequalities", 600);
    let base = suite(Suite::Baseline);
    let gru = suite(Suite::Grushin);
    for (reports, prefix) in [(base, "baseline"), (gru, "grushin")] {
        let r = report(reports, &format!("{prefix}/caoyau"));
        let row = r.sweep.iter().find(|s| s.param == 2.0).expect("delta 2 row");
        let get = |n: &str| row.extra.iter().find(|e| e.0 == n).unwrap().1;
        let (c1, c2, v) = (row.estimate, get("c2"), get("violations"));
        o.check(
            format!("{prefix} delta=2 C1 {c1:.3} C2 {c2:.3} violations {v}"),
            c1.is_finite() && c2.is_finite() && v == 0.0,
        );
        let gb = report(reports, &format!("{prefix}/gradient_log_bound"));
        let ratio = criterion(gb, "adjacent_window_ratio");
        o.check(format!("{prefix} gradient bound window ratio {ratio:.2}"), ratio <= 2.0 && gb.pass);
    }
    let e = report(base, "baseline/expectation_identity");
    let d = criterion(e, "max_relative_discrepancy");
    o.check(format!("expectation identities max discrepancy {d:.1e}"), d <= 0.05);
    o.finish();
}

#[test]
fn control_distance() {
    let _g = lock();
    let mut o = Outcome::new("control distance", 1200);
    let heis = suite(Suite::Heisenberg);
    let line = report(heis, "heisenberg/cc_straight_line");
    o.check(format!("straight line {:.5} vs 0.3", line.estimate), (line.estimate - 0.3).abs() / 0.3 <= 0.01);
    let z = report(heis, "heisenberg/cc_z_axis_exponent");
    o.check(format!("z-axis exponent {:.4}", z.estimate), (z.estimate - 0.5).abs() <= 0.05);
    let c = report(heis, "heisenberg/distance_compare");
    let up = criterion(c, "upper_violations");
    o.check(format!("compare c {:.3}, upper violations {up}", c.estimate), up == 0.0 && c.estimate.is_finite());
    o.finish();
}

#[test]
fn baseline_is_deterministic() {
    let _g = lock();
    let mut o = Outcome::new("determinism", 1200);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let reports = pool.install(|| run_suite(Suite::Baseline, &SuiteOptions::default()).unwrap());
        serde_json::to_string(&reports).unwrap()
    };
    let a = run(1);
    let b = run(3);
    o.check(format!("baseline reports {} bytes, 1 vs 3 threads identical", a.len()), a == b);
    o.finish();
}
