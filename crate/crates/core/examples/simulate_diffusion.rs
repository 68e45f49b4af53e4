//! Unconditioned paths: one path per model and a reproducible ensemble on disk.
use hypobridge::bridge::{diffusion_ensemble, read_ensemble, simulate_diffusion, write_ensemble, DiffusionConfig};
use hypobridge::models::{Point, VectorFieldSystem};
use hypobridge::stats::mean_se;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in ["torus-grushin", "heisenberg", "su2"] {
        let sys = VectorFieldSystem::from_name(name)?;
        let p = simulate_diffusion(&sys, &Point::zeros(sys.dim()), 1.0, 1e-3, 42)?;
        println!("{name}: {} steps, end {}", p.n_steps(), p.states.last().unwrap());
    }

    // Heisenberg: the vertical coordinate grows like t, not √t
    let sys = VectorFieldSystem::heisenberg();
    let cfg = DiffusionConfig {
        record_stride: 10,
        ..DiffusionConfig::new(1.0, 1e-3)
    };
    let ens = diffusion_ensemble(&sys, &Point::zeros(3), &cfg, 42, 2000)?;
    for t in [0.25, 1.0] {
        let z: Vec<f64> = ens.iter().map(|p| p.state_at(t).unwrap()[2].abs()).collect();
        let (m, se) = mean_se(&z);
        println!("E|z_{t}| = {m:.4} ± {se:.4}");
    }

    let file = std::env::temp_dir().join("hypobridge-example.hbe");
    write_ensemble(&file, &sys.name, &ens, serde_json::json!({ "seed": 42 }))?;
    let (model, meta, back) = read_ensemble(&file)?;
    println!("read {} {model} paths from {} ({meta})", back.len(), file.display());
    Ok(())
}
