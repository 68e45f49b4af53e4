//! Grushin bridges on the torus driven by a grid kernel anchored at the target.
use hypobridge::bridge::{bridge_ensemble, bridge_kernel_times, write_paths_csv, BridgeConfig, Pinning};
use hypobridge::heatkernel::{solve_heat_grid_to, GridMesh};
use hypobridge::models::{Point, VectorFieldSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = VectorFieldSystem::torus_grushin();
    let x0 = Point::new(&[0.3, 0.2]);
    let z0 = Point::new(&[0.75, 0.625]);
    let (dt, eps) = (1e-3, 0.025);
    let k = solve_heat_grid_to(&sys, &z0, &bridge_kernel_times(dt, eps), &GridMesh::new(64))?;

    for pinning in [Pinning::ChartLinear, Pinning::ControlPath] {
        let mut cfg = BridgeConfig::new(x0, z0, 42);
        cfg.dt = dt;
        cfg.epsilon = eps;
        cfg.pinning = pinning;
        let ens = bridge_ensemble(&cfg, &sys, &k, 200)?;
        let worst = ens
            .paths
            .iter()
            .map(|p| sys.space.distance(p.states.last().unwrap(), &z0))
            .fold(0.0, f64::max);
        println!(
            "{pinning:?}: {} paths, failures {:.3}, clamped {:.4}, retried {}, max end error {worst:.1e}",
            ens.paths.len(),
            ens.failure_fraction(),
            ens.clamped_fraction(),
            ens.retried()
        );
        if pinning == Pinning::ChartLinear {
            let file = std::env::temp_dir().join("grushin-bridges.csv");
            write_paths_csv(std::fs::File::create(&file)?, &ens.paths[..5])?;
            println!("  first five paths in {}", file.display());
        }
    }
    Ok(())
}
