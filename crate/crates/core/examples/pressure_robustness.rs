//! L-shape with gradient forcing at ν = 1 and ν = 1e-5. EDG-HDG gives the
//! same velocity for both viscosities; the EDG velocity error scales like 1/ν.

use stokes_hybrid::cases::run_pressure_robustness;
use stokes_hybrid::{Method, Result};

fn main() -> Result<()> {
    let levels = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let r = run_pressure_robustness(levels)?;
    println!("{:<8} {:>8} {:>5} {:>12} {:>12}", "method", "nu", "level", "|u-uh|", "|||u-uh|||");
    for method in [Method::Edg, Method::EdgHdg] {
        for nu in [1.0, 1e-5] {
            let run = r.run(method, nu).expect("run present");
            for l in &run.levels {
                println!(
                    "{method:<8} {nu:>8.0e} {:>5} {:>12.4e} {:>12.4e}",
                    l.level, l.errors.u_l2, l.errors.u_energy
                );
            }
        }
    }
    println!("edg-hdg velocity difference between viscosities: {:e}", r.max_velocity_difference);
    Ok(())
}
