//! Writing a kernel to disk and reading it back bit for bit.
use hypobridge::heatkernel::{kernel_value, read_kernel, solve_heat_grid_to, write_kernel, GridMesh};
use hypobridge::models::{Point, VectorFieldSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = VectorFieldSystem::torus_grushin();
    let z0 = Point::new(&[0.5, 0.5]);
    let k = solve_heat_grid_to(&sys, &z0, &[0.05, 0.1, 0.2], &GridMesh::new(32))?;
    let file = std::env::temp_dir().join("grushin-kernel.hbk");
    write_kernel(&k, &file)?;
    let back = read_kernel(&file)?;
    assert_eq!(back, k);
    let x = Point::new(&[0.2, 0.4]);
    println!(
        "{} ({:?}, anchored {:?}): q_0.1(x, z0) = {:.6} from {}",
        back.model,
        back.method,
        back.anchor,
        kernel_value(&back, 0.1, &x, &z0)?.value,
        file.display()
    );
    Ok(())
}
