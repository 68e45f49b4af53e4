//! Bracket tables and Hörmander levels for the bundled models.
use hypobridge::models::{hormander_level, Backend, BracketTable, Point, VectorFieldSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in ["torus-elliptic", "torus-grushin", "heisenberg", "su2"] {
        let sys = VectorFieldSystem::from_name(name)?;
        println!("{sys}");
        let table = BracketTable::build(&sys, 2);
        let x = if sys.dim() == 2 { Point::new(&[0.1, 0.3]) } else { Point::new(&[0.2, -0.1, 0.4]) };
        for (w, _) in &table.entries {
            println!("  {w} at {x} = {}", table.eval(&sys, w, &x, Backend::Symbolic)?);
        }
    }

    // Grushin degenerates on the lines x = 0 and x = 1/2
    let g = VectorFieldSystem::torus_grushin();
    for x in [0.0, 0.1, 0.25, 0.5, 0.75] {
        let p = Point::new(&[x, 0.3]);
        println!("grushin level at {p}: {:?}", hormander_level(&g, &p, 3)?.level());
    }
    Ok(())
}
