//! EDG-HDG on the slit square. The velocity trace is single valued on the
//! slit but the pressure is not; the L² velocity rate drops to 1.
//!
//! `cargo run --release --example cracked_domain -- [levels] [csv path]`

use stokes_hybrid::cases::{run_convergence, Case};
use stokes_hybrid::{Method, MethodConfig, Result};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let levels = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let cfg = MethodConfig::new(Method::EdgHdg, 1, 1.0);
    let report = run_convergence(Case::Crack, &cfg, levels)?;
    println!("{}", report.table());
    println!("final rates {:?}", report.final_rates());
    if let Some(path) = args.get(2) {
        std::fs::write(path, report.to_csv())?;
    }
    Ok(())
}
