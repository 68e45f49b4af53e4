//! Forward bridges against reversed bridges of the adjoint system.
use hypobridge::bridge::{bridge_ensemble, bridge_kernel_times, BridgeConfig, Pinning};
use hypobridge::heatkernel::{solve_heat_grid_to, GridMesh};
use hypobridge::models::{adjoint_system, Expr, Point, VectorFieldSystem};
use hypobridge::verify::time_reversal_check;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = VectorFieldSystem::torus_elliptic().with_constant_drift(&[0.5, 0.25]);
    let adj = adjoint_system(&sys, &Expr::one())?;
    println!("forward {sys}\nadjoint {adj}");

    let x = Point::new(&[0.25, 0.25]);
    let z = Point::new(&[0.5, 0.625]);
    let (dt, eps) = (1e-3, 0.025);
    let mesh = GridMesh::new(64);
    let times = bridge_kernel_times(dt, eps);
    let kf = solve_heat_grid_to(&sys, &z, &times, &mesh)?;
    let ka = solve_heat_grid_to(&adj, &x, &times, &mesh)?;
    let cfg = |a: Point, b: Point, seed| {
        let mut c = BridgeConfig::new(a, b, seed);
        c.dt = dt;
        c.epsilon = eps;
        c.pinning = Pinning::ChartLinear;
        c
    };
    let fwd = bridge_ensemble(&cfg(x, z, 11), &sys, &kf, 500)?;
    let rev = bridge_ensemble(&cfg(z, x, 12), &adj, &ka, 500)?;
    println!("{}", time_reversal_check(&sys.space, &fwd, &rev, &[0.25, 0.5, 0.75], None, 300, 1)?);
    Ok(())
}
