//! Two-sided Gaussian bounds for the Heisenberg kernel with fitted constants.
use hypobridge::ccdist::{ball_volume, cc_distance_with, CcOptions};
use hypobridge::heatkernel::{check_gaussian_bounds, heisenberg_quadrature_kernel, BoundOptions};
use hypobridge::models::{Point, VectorFieldSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = VectorFieldSystem::heisenberg();
    let o = Point::zeros(3);
    let k = heisenberg_quadrature_kernel(&sys, 0.05, 1.0, None)?;
    let v1 = ball_volume(&sys, &o, 1.0, 8000, 1).volume;
    let opts = CcOptions::coarse();
    let d = |x: &Point, y: &Point| cc_distance_with(&sys, x, y, &opts, 2).d_upper;
    let vol = |_: &Point, r: f64| v1 * r.powi(4);
    let points: Vec<Point> = (0..12)
        .map(|i| {
            let a = i as f64 * 0.9;
            let r = 0.1 + 0.05 * i as f64;
            Point::new(&[r * a.cos(), r * a.sin(), 0.3 * r * r * (2.0 * a).sin()])
        })
        .collect();
    let rep = check_gaussian_bounds(
        &k,
        &d,
        &vol,
        &BoundOptions {
            base: o,
            points,
            t_window: (0.05, 1.0),
            n_times: 8,
        },
    )?;
    println!("upper: C = {:.3}, rate {:.3}", rep.upper.constant, rep.upper.rate);
    println!("lower: C = {:.3}, rate {:.3}", rep.lower.constant, rep.lower.rate);
    println!(
        "{} evaluations, violations {:.3}, residual quantiles {:?}",
        rep.n_points, rep.violation_fraction, rep.residual_quantiles
    );
    Ok(())
}
