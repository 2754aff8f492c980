//! Writes the assembled saddle-point matrix of a small problem in
//! `row col value` coordinate format, for inspection with external tools.
//!
//! `cargo run --example matrix_dump -- out.txt`

use stokes_hybrid::assembly::assemble;
use stokes_hybrid::cases::{ExactSolution, LinearFlow};
use stokes_hybrid::mesh::unit_square_mesh;
use stokes_hybrid::spaces::{build_spaces, interpolate_facet_dirichlet};
use stokes_hybrid::{Method, MethodConfig, Point, Result};

fn main() -> Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "saddle.txt".into());
    let mesh = unit_square_mesh(2)?;
    let cfg = MethodConfig::new(Method::EdgHdg, 1, 1.0);
    let spaces = build_spaces(&mesh, &cfg)?;
    let exact = LinearFlow::patch();
    let bc = interpolate_facet_dirichlet(&exact, &mesh, &spaces.facet_velocity)?;
    let force = |x: Point| exact.body_force(x);
    let sys = assemble(&mesh, &cfg, &spaces, &force, &bc)?;
    std::fs::write(&path, sys.to_coordinate_text())?;
    println!("{} unknowns, max |M - Mᵀ| = {:e}, written to {path}", sys.n(), sys.max_asymmetry());
    Ok(())
}
