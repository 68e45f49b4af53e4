//! Heisenberg bridges with the closed-form kernel, against the pinning target.
use hypobridge::bridge::{bridge_ensemble, BridgeConfig, Pinning};
use hypobridge::heatkernel::heisenberg_quadrature_kernel;
use hypobridge::models::{Point, VectorFieldSystem};
use hypobridge::stats::mean_se;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = VectorFieldSystem::heisenberg();
    let z0 = Point::new(&[1.0, 1.0, 0.5]);
    let k = heisenberg_quadrature_kernel(&sys, 0.02, 1.0, None)?;
    let mut cfg = BridgeConfig::new(Point::zeros(3), z0, 3);
    cfg.dt = 2.5e-3;
    cfg.epsilon = 0.025;
    cfg.pinning = Pinning::ChartLinear;
    let ens = bridge_ensemble(&cfg, &sys, &k, 400)?;
    println!("{} paths, failure fraction {:.3}", ens.paths.len(), ens.failure_fraction());
    for t in [0.25, 0.5, 0.75, 1.0] {
        let mean: Vec<String> = (0..3)
            .map(|j| {
                let xs: Vec<f64> = ens.paths.iter().map(|p| p.state_at(t).unwrap()[j]).collect();
                let (m, se) = mean_se(&xs);
                format!("{m:+.3}±{se:.3}")
            })
            .collect();
        println!("t = {t}: E y_t = ({})", mean.join(", "));
    }
    Ok(())
}
