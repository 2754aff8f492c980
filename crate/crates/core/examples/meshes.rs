//! Builds the three benchmark meshes, refines them and prints connectivity
//! counts. The slit square keeps two face records per crack edge.

use stokes_hybrid::mesh::{cracked_square_mesh, lshape_mesh, unit_square_mesh};
use stokes_hybrid::Result;

fn main() -> Result<()> {
    let meshes = [
        ("unit square", unit_square_mesh(4)?),
        ("L-shape", lshape_mesh(2)?),
        ("cracked square", cracked_square_mesh(4)?),
    ];
    println!(
        "{:<15} {:>5} {:>7} {:>9} {:>6} {:>9} {:>11} {:>5}",
        "mesh", "level", "cells", "vertices", "faces", "boundary", "crack faces", "chi"
    );
    for (name, base) in meshes {
        let mut m = base;
        for level in 0..3 {
            let boundary = m.faces().iter().filter(|f| f.is_boundary()).count();
            let crack = m.faces().iter().filter(|f| f.on_crack).count();
            println!(
                "{name:<15} {level:>5} {:>7} {:>9} {:>6} {boundary:>9} {crack:>11} {:>5}",
                m.n_cells(),
                m.n_vertices(),
                m.n_faces(),
                m.geometric_euler_characteristic()
            );
            m = m.refine_uniform();
        }
    }
    Ok(())
}
