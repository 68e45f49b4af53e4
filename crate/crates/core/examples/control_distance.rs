//! Control distance by optimization, ball volumes and the comparison with ρ.
use hypobridge::ccdist::{ball_volume, cc_distance, cc_distance_with, distance_compare_fit, CcOptions};
use hypobridge::models::{Point, VectorFieldSystem};

fn main() {
    let h = VectorFieldSystem::heisenberg();
    let o = Point::zeros(3);
    let line = cc_distance(&h, &o, &Point::new(&[0.3, -0.4, -0.06]), 32, 8, 1);
    println!("heisenberg (0.3, -0.4, -0.06): d = {:.4} ({:?}), exact 0.5", line.d_upper, line.status);
    for z in [0.05, 0.1, 0.2, 0.4] {
        let r = cc_distance(&h, &o, &Point::new(&[0.0, 0.0, z]), 32, 8, 2);
        println!("  (0, 0, {z}): d = {:.4}, isoperimetric {:.4}", r.d_upper, 2.0 * (std::f64::consts::PI * z).sqrt());
    }

    let g = VectorFieldSystem::torus_grushin();
    for b in [0.01, 0.05] {
        let r = cc_distance_with(&g, &Point::new(&[0.0, 0.0]), &Point::new(&[0.0, b]), &CcOptions::default(), 4);
        println!("grushin (0, {b}) from the origin: d = {:.4}, √b = {:.4}", r.d_upper, b.sqrt());
    }

    let su2 = VectorFieldSystem::su2();
    let r = cc_distance(&su2, &o, &Point::new(&[0.0, 0.0, 0.2]), 32, 8, 5);
    println!("su2 to exp(0.2 e3): d = {:.4}, residual {:.1e}", r.d_upper, r.residual);

    // a Heisenberg ball of radius r has volume V(1) r⁴
    for r in [0.5, 1.0] {
        let v = ball_volume(&h, &o, r, 4000, 9);
        println!("vol B(0, {r}) = {:.4} ± {:.4}", v.volume, v.std_error);
    }

    let pairs: Vec<(Point, Point)> = [0.05, 0.1, 0.2].iter().map(|z| (o, Point::new(&[0.1, 0.0, *z]))).collect();
    let cmp = distance_compare_fit(&h, &pairs, &|_| 2, &CcOptions::coarse(), 3);
    println!(
        "ρ/d comparison: c = {:.3}, upper violations {}, lower violations {}",
        cmp.c, cmp.upper_violations, cmp.lower_violations
    );
}
