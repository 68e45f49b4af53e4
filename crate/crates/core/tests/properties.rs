use proptest::prelude::*;

use hypobridge::bridge::{bridge_ensemble, bridge_kernel_times, BridgeConfig, Pinning};
use hypobridge::cli::Config;
use hypobridge::heatkernel::{heisenberg_kernel, solve_heat_grid, solve_heat_grid_to, GridMesh};
use hypobridge::models::{heisenberg_inv, heisenberg_mul, ModelSpace, Point, VectorFieldSystem};
use hypobridge::verify::{energy_distance, Comparison, Criterion, VerificationReport};

fn unit() -> impl Strategy<Value = f64> {
    0.0..1.0f64
}

fn coord() -> impl Strategy<Value = f64> {
    -2.0..2.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torus_distance_is_a_metric(a in (unit(), unit()), b in (unit(), unit()), c in (unit(), unit())) {
        let s = ModelSpace::TORUS2;
        let (a, b, c) = (Point::new(&[a.0, a.1]), Point::new(&[b.0, b.1]), Point::new(&[c.0, c.1]));
        prop_assert!((s.distance(&a, &b) - s.distance(&b, &a)).abs() < 1e-12);
        prop_assert!(s.distance(&a, &b) <= 0.5f64.hypot(0.5) + 1e-12);
        prop_assert!(s.distance(&a, &c) <= s.distance(&a, &b) + s.distance(&b, &c) + 1e-12);
        let shifted = Point::new(&[a[0] + 3.0, a[1] - 2.0]);
        prop_assert!(s.distance(&a, &shifted) < 1e-9);
    }

    #[test]
    fn heisenberg_group_law(g in (coord(), coord(), coord()), h in (coord(), coord(), coord()), k in (coord(), coord(), coord())) {
        let (g, h, k) = (Point::new(&[g.0, g.1, g.2]), Point::new(&[h.0, h.1, h.2]), Point::new(&[k.0, k.1, k.2]));
        let left = heisenberg_mul(&heisenberg_mul(&g, &h), &k);
        let right = heisenberg_mul(&g, &heisenberg_mul(&h, &k));
        prop_assert!((left - right).max_abs() < 1e-12);
        prop_assert!(heisenberg_mul(&g, &heisenberg_inv(&g)).max_abs() < 1e-12);
    }

    #[test]
    fn heisenberg_kernel_dilation(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -0.5..0.5f64, t in 0.05..2.0f64) {
        // p_t(x, y, z) = t^{-2} p_1(x/√t, y/√t, z/t)
        let s = t.sqrt();
        let a = heisenberg_kernel(t, &Point::new(&[x, y, z]));
        let b = heisenberg_kernel(1.0, &Point::new(&[x / s, y / s, z / t])) / (t * t);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300), "{} vs {}", a, b);
    }

    #[test]
    fn pass_flag_is_the_conjunction(vals in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, 0..4u8), 1..8), unreliable: bool) {
        let mut r = VerificationReport::new("p", 0.0, 0.0);
        let ops = [Comparison::Le, Comparison::Lt, Comparison::Ge, Comparison::Gt];
        let mut all = true;
        for (i, (v, th, op)) in vals.iter().enumerate() {
            let op = ops[*op as usize];
            all &= match op {
                Comparison::Le => v <= th,
                Comparison::Lt => v < th,
                Comparison::Ge => v >= th,
                Comparison::Gt => v > th,
            };
            r.criterion(Criterion::new(format!("c{i}"), *v, op, *th));
        }
        r.unreliable = unreliable;
        let r = r.finish();
        prop_assert_eq!(r.pass, all && !unreliable);
        prop_assert_eq!(r.rederive(), r.pass);
    }

    #[test]
    fn config_round_trip(paths in 1..100_000usize, dt in 1e-4..1e-2f64, mesh in 8..256usize, seed: u64, from in (unit(), unit())) {
        let c = Config::default()
            .apply(&[
                format!("paths={paths}"),
                format!("dt={dt}"),
                format!("mesh={mesh}"),
                format!("seed={seed}"),
                format!("from={},{}", from.0, from.1),
            ])
            .unwrap();
        let back: Config = serde_json::from_str(&c.to_json()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(c.dt, dt);
        prop_assert_eq!(c.seed, seed);
    }

    #[test]
    fn energy_distance_is_symmetric(xs in prop::collection::vec((unit(), unit()), 2..20), ys in prop::collection::vec((unit(), unit()), 2..20)) {
        let s = ModelSpace::TORUS2;
        let xs: Vec<Point> = xs.iter().map(|p| Point::new(&[p.0, p.1])).collect();
        let ys: Vec<Point> = ys.iter().map(|p| Point::new(&[p.0, p.1])).collect();
        let a = energy_distance(&s, &xs, &ys);
        let b = energy_distance(&s, &ys, &xs);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(energy_distance(&s, &xs, &xs).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn grid_solves_conserve_mass(x in (unit(), unit()), grushin: bool) {
        let sys = if grushin { VectorFieldSystem::torus_grushin() } else { VectorFieldSystem::torus_elliptic() };
        let p = Point::new(&[x.0, x.1]);
        let mesh = GridMesh::new(32);
        for k in [
            solve_heat_grid(&sys, &p, &[0.01, 0.1, 0.5], &mesh).unwrap(),
            solve_heat_grid_to(&sys, &p, &[0.01, 0.1, 0.5], &mesh).unwrap(),
        ] {
            for m in &k.mass {
                prop_assert!((m - 1.0).abs() < 1e-9, "mass {}", m);
            }
        }
    }

    #[test]
    fn bridges_end_at_the_target(x in (unit(), unit()), z in (0.0..32.0f64, 0.0..32.0f64), seed: u64) {
        // targets on grid nodes
        let sys = VectorFieldSystem::torus_elliptic();
        let z0 = Point::new(&[z.0.floor() / 32.0, z.1.floor() / 32.0]);
        let k = solve_heat_grid_to(&sys, &z0, &bridge_kernel_times(2e-3, 0.05), &GridMesh::new(32)).unwrap();
        let mut cfg = BridgeConfig::new(Point::new(&[x.0, x.1]), z0, seed);
        cfg.dt = 2e-3;
        cfg.epsilon = 0.05;
        cfg.pinning = Pinning::ChartLinear;
        let ens = bridge_ensemble(&cfg, &sys, &k, 8).unwrap();
        for p in &ens.paths {
            let end = p.states.last().unwrap();
            prop_assert!(sys.space.distance(end, &z0) < 1e-9);
            prop_assert!((p.times.last().unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
