//! Full saddle-point solve against static condensation: same coefficients,
//! far fewer globally coupled unknowns.

use std::time::Instant;

use stokes_hybrid::assembly::assemble;
use stokes_hybrid::cases::CornerSingularFlow;
use stokes_hybrid::cases::ExactSolution;
use stokes_hybrid::mesh::unit_square_mesh;
use stokes_hybrid::solver::{solve_condensed, solve_full};
use stokes_hybrid::spaces::{build_spaces, interpolate_facet_dirichlet};
use stokes_hybrid::{Method, MethodConfig, Point, Result};

fn main() -> Result<()> {
    let mesh = unit_square_mesh(16)?;
    let exact = CornerSingularFlow::unit_square();
    let force = |x: Point| exact.body_force(x);
    println!(
        "{:<8} {:>2} {:>8} {:>10} {:>8} {:>10} {:>10}",
        "method", "k", "full", "time", "facet", "time", "max diff"
    );
    for method in [Method::Hdg, Method::EdgHdg, Method::Edg] {
        for k in [1, 2] {
            let cfg = MethodConfig::new(method, k, 1.0);
            let spaces = build_spaces(&mesh, &cfg)?;
            let mut bc = interpolate_facet_dirichlet(&exact, &mesh, &spaces.facet_velocity)?;
            bc.balance_flux(&mesh, &spaces.facet_velocity);

            let t = Instant::now();
            let full = solve_full(&assemble(&mesh, &cfg, &spaces, &force, &bc)?)?;
            let t_full = t.elapsed();
            let t = Instant::now();
            let cond = solve_condensed(&mesh, &cfg, &spaces, &force, &bc)?;
            let t_cond = t.elapsed();

            let diff = full
                .to_vector()
                .iter()
                .zip(cond.to_vector())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            println!(
                "{method:<8} {k:>2} {:>8} {:>10.1?} {:>8} {:>10.1?} {diff:>10.1e}",
                full.global_dofs, t_full, cond.global_dofs, t_cond
            );
        }
    }
    Ok(())
}
