//! Li–Yau type inequalities and the drift expectation identity on grid kernels.
use hypobridge::heatkernel::{solve_heat_grid, solve_heat_grid_to, GridMesh};
use hypobridge::models::{Point, VectorFieldSystem};
use hypobridge::verify::{caoyau_check, expectation_identity_check, gradient_log_bound_check, CaoYauOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = VectorFieldSystem::torus_grushin();
    let x0 = Point::new(&[0.3, 0.2]);
    let z0 = Point::new(&[0.7, 0.6]);
    let mesh = GridMesh::new(64);
    let dense: Vec<f64> = (0..=200).map(|i| 0.02 + 0.005 * i as f64).collect();
    let target = solve_heat_grid_to(&sys, &z0, &dense, &mesh)?;
    let source = solve_heat_grid(&sys, &x0, &dense, &mesh)?;

    println!("{}", caoyau_check(&target, &sys, &CaoYauOptions::default())?);
    println!("{}", expectation_identity_check(&source, &target, &sys, &[0.1, 0.25, 0.5])?);

    let times: Vec<f64> = (0..=60).map(|i| 0.01 * 1.05f64.powi(i)).filter(|t| *t <= 0.31).collect();
    let k = solve_heat_grid_to(&sys, &z0, &times, &mesh)?;
    let rho = |a: &Point, b: &Point| sys.space.distance(a, b);
    println!("{}", gradient_log_bound_check(&k, &sys, &rho, &[(0.025, 0.05), (0.05, 0.1), (0.1, 0.2)])?);
    Ok(())
}
