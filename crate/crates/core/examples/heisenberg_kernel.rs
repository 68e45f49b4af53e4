//! The Heisenberg heat kernel: closed form by quadrature against a Monte Carlo KDE.
use hypobridge::heatkernel::{
    heisenberg_kernel, heisenberg_quadrature_kernel, kernel_value, mc_kde_kernel, on_diagonal_exponent,
    BandwidthRule, KdeOptions,
};
use hypobridge::models::{Point, VectorFieldSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = VectorFieldSystem::heisenberg();
    let o = Point::zeros(3);
    for t in [0.1, 0.5, 1.0] {
        println!("p_{t}(0) = {:.6}  (1/(4t²) = {:.6})", heisenberg_kernel(t, &o), 0.25 / (t * t));
    }

    let exact = heisenberg_quadrature_kernel(&sys, 0.05, 1.0, None)?;
    let opts = KdeOptions {
        bandwidth: BandwidthRule::Scott { factor: 0.4 },
        ..KdeOptions::default()
    };
    let times = [0.05, 0.1, 0.15, 0.2, 0.25];
    let kde = mc_kde_kernel(&sys, &o, &times, 50_000, &opts, 7)?;
    for y in [[0.0, 0.0, 0.0], [0.3, 0.0, 0.0], [0.0, 0.2, 0.05], [0.0, 0.0, 0.1]] {
        let y = Point::new(&y);
        let a = kernel_value(&exact, 0.25, &o, &y)?.value;
        let b = kernel_value(&kde, 0.25, &o, &y)?;
        println!("y = {y}: quadrature {a:.4}  kde {:.4} ± {:.4}", b.value, b.std_error);
    }
    let q = on_diagonal_exponent(&kde, &o, (0.05, 0.25))?;
    println!("KDE on-diagonal exponent {:.2} ± {:.2}", q.q_hat, q.std_error);
    Ok(())
}
