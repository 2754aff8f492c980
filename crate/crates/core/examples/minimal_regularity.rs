//! Convergence on the unit square with the corner-singular flow
//! (`u ∈ H^{3/2−ε}`). Rates stay near 1.5 / 0.5 / 0.5 for both degrees.
//!
//! `cargo run --release --example minimal_regularity -- [method] [levels]`

use stokes_hybrid::cases::{run_convergence, Case};
use stokes_hybrid::{Method, MethodConfig, Result};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let method: Method = args.get(1).map_or(Ok(Method::EdgHdg), |s| s.parse())?;
    let levels = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    for k in [1, 2] {
        let cfg = MethodConfig::new(method, k, 1.0);
        let report = run_convergence(Case::SquareMinReg, &cfg, levels)?;
        println!("{}", report.table());
        println!("final rates {:?}\n", report.final_rates());
    }
    Ok(())
}
