//! Moment scaling of increments: E ρ⁴(y_s, y_t) against |t − s|.
use hypobridge::bridge::{bridge_ensemble, bridge_kernel_times, diffusion_ensemble, BridgeConfig, DiffusionConfig, Pinning};
use hypobridge::heatkernel::{solve_heat_grid_to, GridMesh};
use hypobridge::models::{Point, VectorFieldSystem};
use hypobridge::verify::{kolmogorov_fit, KolmogorovOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lags = [0.002, 0.004, 0.008, 0.016, 0.032];
    let sys = VectorFieldSystem::torus_elliptic();
    let x0 = Point::new(&[0.25, 0.25]);
    let unc = diffusion_ensemble(&sys, &x0, &DiffusionConfig::new(0.5, 1e-3), 42, 2000)?;
    println!("{}", kolmogorov_fit(&unc, &sys.space, 4.0, &KolmogorovOptions::grid(&[0.1, 0.3], &lags))?);

    let g = VectorFieldSystem::torus_grushin();
    let z0 = Point::new(&[0.7, 0.6]);
    let k = solve_heat_grid_to(&g, &z0, &bridge_kernel_times(1e-3, 0.025), &GridMesh::new(64))?;
    let mut cfg = BridgeConfig::new(Point::new(&[0.3, 0.2]), z0, 43);
    cfg.epsilon = 0.025;
    cfg.pinning = Pinning::ChartLinear;
    let br = bridge_ensemble(&cfg, &g, &k, 2000)?;
    println!("{}", kolmogorov_fit(&br.paths, &g.space, 4.0, &KolmogorovOptions::grid(&[0.3, 0.5], &lags))?);
    Ok(())
}
