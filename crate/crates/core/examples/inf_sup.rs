//! Discrete inf-sup constant of `b_h` on `unit_square_mesh(n)`, n = 1, 2, 4.
//! EDG-HDG tests with fewer velocities than HDG, so its constant is smaller.

use stokes_hybrid::analysis::inf_sup_probe;
use stokes_hybrid::mesh::unit_square_mesh;
use stokes_hybrid::spaces::build_spaces;
use stokes_hybrid::{Method, MethodConfig, Result};

fn main() -> Result<()> {
    println!("{:<8} {:>2} {:>8} {:>8} {:>8}", "method", "k", "n=1", "n=2", "n=4");
    for method in [Method::Hdg, Method::EdgHdg, Method::Edg] {
        for k in [1, 2] {
            let cfg = MethodConfig::new(method, k, 1.0);
            let mut row = format!("{method:<8} {k:>2}");
            for n in [1, 2, 4] {
                let mesh = unit_square_mesh(n)?;
                let beta = inf_sup_probe(&mesh, &cfg, &build_spaces(&mesh, &cfg)?)?;
                row.push_str(&format!(" {beta:>8.4}"));
            }
            println!("{row}");
        }
    }
    Ok(())
}
