mod common;

use hypobridge::ccdist::{cc_distance, cc_distance_with, CcOptions, CcStatus};
use hypobridge::heatkernel::{
    heisenberg_kernel, kernel_value, solve_heat_grid, solve_heat_grid_to, GridMesh,
};
use hypobridge::models::{Point, VectorFieldSystem};
use hypobridge::verify::flat_torus_drift_integral;

#[test]
fn levy_oracle_matches_on_diagonal_closed_form() {
    // p_t(0) = 1 / (4 t²)
    for t in [0.1, 0.25, 1.0] {
        let v = common::heisenberg_levy(t, 0.0, 0.0, 0.0);
        assert!((v * 4.0 * t * t - 1.0).abs() < 1e-6, "t={t}: {v}");
    }
}

#[test]
fn heisenberg_kernel_matches_levy_oracle() {
    let probes = [
        [0.0, 0.0, 0.0],
        [0.3, -0.2, 0.1],
        [0.0, 0.0, 0.2],
        [-0.5, 0.4, -0.3],
        [0.8, 0.8, 0.32],
    ];
    for t in [0.1, 0.5] {
        for p in probes {
            let v = heisenberg_kernel(t, &Point::new(&p));
            let exact = common::heisenberg_levy(t, p[0], p[1], p[2]);
            assert!((v - exact).abs() <= 1e-9 * exact, "t={t} {p:?}: {v} vs {exact}");
        }
    }
}

#[test]
fn heisenberg_kernel_is_accurate_far_up_the_vertical_axis() {
    // the value falls to e^{−π|ω|} of the integrand scale here
    for t in [0.05, 0.2, 1.0] {
        for z in [0.05, 0.3, 0.8, 2.0] {
            let v = heisenberg_kernel(t, &Point::new(&[0.0, 0.0, z]));
            let exact = common::heisenberg_vertical_kernel(t, z);
            assert!((v - exact).abs() <= 1e-9 * exact, "t={t} z={z}: {v} vs {exact}");
        }
    }
}

#[test]
fn elliptic_grid_matches_theta_series() {
    let sys = VectorFieldSystem::torus_elliptic();
    // a grid node, so the source is not snapped
    let x = Point::new(&[0.125, 0.6875]);
    let k = solve_heat_grid(&sys, &x, &[0.05, 0.1, 0.3], &GridMesh::new(64)).unwrap();
    for t in [0.05, 0.1, 0.3] {
        for y in [[0.125, 0.6875], [0.4, 0.2], [0.6, 0.95], [0.0, 0.0]] {
            let v = kernel_value(&k, t, &x, &Point::new(&y)).unwrap().value;
            let exact = common::torus_theta(t, [0.125, 0.6875], y);
            assert!((v - exact).abs() / exact < 5e-3, "t={t} y={y:?}: {v} vs {exact}");
        }
    }
}

#[test]
fn backward_solve_is_the_transpose_for_a_symmetric_model() {
    let sys = VectorFieldSystem::torus_elliptic();
    let x = Point::new(&[0.25, 0.5]);
    let z = Point::new(&[0.75, 0.125]);
    let mesh = GridMesh::new(32);
    let fwd = solve_heat_grid(&sys, &x, &[0.1, 0.2], &mesh).unwrap();
    let bwd = solve_heat_grid_to(&sys, &z, &[0.1, 0.2], &mesh).unwrap();
    for t in [0.1, 0.2] {
        let a = kernel_value(&fwd, t, &x, &z).unwrap().value;
        let b = kernel_value(&bwd, t, &x, &z).unwrap().value;
        assert!((a - b).abs() < 1e-9 * a, "{a} vs {b}");
    }
}

#[test]
fn flat_torus_drift_integral_matches_fourier_oracle() {
    for (a, b, eps) in [(0.25, 0.5, 0.1), (0.25, 0.625, 0.05), (0.1, 0.9, 0.025)] {
        let lib = flat_torus_drift_integral(a, b, eps);
        let oracle = common::circle_bridge_drift_integral(a, b, eps);
        assert!((lib - oracle).abs() / oracle < 2e-3, "({a},{b},{eps}): {lib} vs {oracle}");
    }
}

#[test]
fn heisenberg_distance_closed_forms() {
    let h = VectorFieldSystem::heisenberg();
    let o = Point::zeros(3);
    // horizontal lines through the identity end at (a, b, ab/2)
    let line = cc_distance(&h, &o, &Point::new(&[0.3, -0.4, -0.06]), 32, 8, 1);
    assert_eq!(line.status, CcStatus::Converged);
    assert!((line.d_upper - 0.5).abs() < 5e-3, "{}", line.d_upper);
    for z in [0.05, 0.3] {
        let r = cc_distance(&h, &o, &Point::new(&[0.0, 0.0, z]), 32, 8, 2);
        let exact = common::heisenberg_vertical_distance(z);
        assert!(r.d_upper >= exact * (1.0 - 1e-3), "z={z}: {} below {exact}", r.d_upper);
        assert!(r.d_upper <= exact * 1.02, "z={z}: {} vs {exact}", r.d_upper);
    }
}

#[test]
fn heisenberg_distance_is_left_invariant() {
    let h = VectorFieldSystem::heisenberg();
    let g = Point::new(&[0.7, -1.1, 0.4]);
    let y = Point::new(&[0.0, 0.0, 0.1]);
    let gy = hypobridge::models::heisenberg_mul(&g, &y);
    let opts = CcOptions::default();
    let a = cc_distance_with(&h, &Point::zeros(3), &y, &opts, 3).d_upper;
    let b = cc_distance_with(&h, &g, &gy, &opts, 3).d_upper;
    assert!((a - b).abs() / a < 0.02, "{a} vs {b}");
}

#[test]
fn grushin_distance_is_bounded_by_the_linearized_model() {
    // near x = 0 the second field is 2πx ∂y and sin only slows it down
    let g = VectorFieldSystem::torus_grushin();
    let b = 0.05;
    let r = cc_distance_with(&g, &Point::new(&[0.0, 0.0]), &Point::new(&[0.0, b]), &CcOptions::default(), 4);
    let lin = b.sqrt();
    assert!(r.d_upper >= lin * (1.0 - 1e-3), "{} below {lin}", r.d_upper);
    assert!(r.d_upper <= lin * 1.05, "{} vs {lin}", r.d_upper);
}
