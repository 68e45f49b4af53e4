//! Finite-difference heat kernels on the torus and the on-diagonal exponent.
use hypobridge::heatkernel::{kernel_value, on_diagonal_exponent, solve_heat_grid, GridMesh};
use hypobridge::models::{Point, VectorFieldSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = GridMesh::new(64);
    let times: Vec<f64> = (0..12).map(|i| 0.005 * 10f64.powf(i as f64 / 11.0)).collect();

    for (sys, x) in [
        (VectorFieldSystem::torus_elliptic(), Point::new(&[0.25, 0.5])),
        (VectorFieldSystem::torus_grushin(), Point::new(&[0.25, 0.5])),
        (VectorFieldSystem::torus_grushin(), Point::new(&[0.0, 0.5])),
    ] {
        let k = solve_heat_grid(&sys, &x, &times, &mesh)?;
        println!("{} from {x}", sys.name);
        for (t, m) in k.times.iter().zip(&k.mass).step_by(3) {
            let v = kernel_value(&k, *t, &x, &x)?.value;
            println!("  t = {t:.4}  mass = {m:.12}  q_t(x, x) = {v:.4}");
        }
        let fit = on_diagonal_exponent(&k, &x, (0.005, 0.05))?;
        println!("  Q = {:.3} ± {:.3}", fit.q_hat, fit.std_error);
    }
    Ok(())
}
