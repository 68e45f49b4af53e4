//! Doob weights of unconditioned paths reproduce the bridge law.
use hypobridge::bridge::{
    bridge_ensemble, bridge_kernel_times, diffusion_ensemble, girsanov_weight, BridgeConfig, DiffusionConfig,
    Pinning,
};
use hypobridge::heatkernel::{solve_heat_grid_to, GridMesh};
use hypobridge::models::{Point, VectorFieldSystem};
use hypobridge::stats::{effective_sample_size, mean_se};
use hypobridge::verify::{weighted_law_check, Functional};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = VectorFieldSystem::torus_grushin();
    let x0 = Point::new(&[0.3, 0.2]);
    let z0 = Point::new(&[0.7, 0.6]);
    let dt = 1e-3;
    let k = solve_heat_grid_to(&sys, &z0, &bridge_kernel_times(dt, 0.025), &GridMesh::new(64))?;

    let unc = diffusion_ensemble(&sys, &x0, &DiffusionConfig::new(0.5, dt), 1, 4000)?;
    let w: Vec<f64> = unc
        .iter()
        .map(|p| girsanov_weight(p, &k, 0.5, &z0).map(|w| w.value))
        .collect::<Result<_, _>>()?;
    let (m, se) = mean_se(&w);
    println!("E e^N at t = 1/2: {m:.4} ± {se:.4}, effective sample size {:.0}", effective_sample_size(&w));

    let mut cfg = BridgeConfig::new(x0, z0, 2);
    cfg.dt = dt;
    cfg.epsilon = 0.025;
    cfg.pinning = Pinning::ChartLinear;
    let br = bridge_ensemble(&cfg, &sys, &k, 4000)?;
    let fs = [
        Functional::coordinate(0.5, 0),
        Functional::coordinate(0.25, 1),
        Functional::indicator("left half", 0.5, |p: &Point| p[0] < 0.5),
    ];
    println!("{}", weighted_law_check(&unc, &br, &k, &fs, 0.5)?);
    Ok(())
}
