//! Command-line front end: `convergence`, `robustness` and `verify`.
//!
//! Exit codes: 0 on success, 1 on a numerical failure or a failed suite,
//! 2 on an invalid invocation.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::cases::{run_convergence, run_pressure_robustness, Case};
use crate::error::{Error, Result};
use crate::spaces::{Method, MethodConfig};
use crate::verify::{run_all, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stokes-hybrid", version, about = "HDG / EDG-HDG / EDG Stokes experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence study of one case on successively refined meshes.
    Convergence(ConvergenceArgs),
    /// EDG and EDG-HDG on the L-shape at nu = 1 and nu = 1e-5.
    Robustness(RobustnessArgs),
    /// Patch test, assembly oracle, condensation, coercivity, structure and
    /// exact-solution checks.
    Verify(VerifyArgs),
}

/// `auto` (6k²) or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Auto,
    Value(f64),
}

fn parse_alpha(s: &str) -> std::result::Result<Alpha, String> {
    if s == "auto" {
        return Ok(Alpha::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Alpha::Value(v)),
        _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
    }
}

impl Alpha {
    pub fn resolve(&self, degree: usize) -> f64 {
        match *self {
            Alpha::Auto => crate::spaces::default_alpha(degree),
            Alpha::Value(v) => v,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[arg(long, default_value = "square-mr")]
    pub case: Case,
    #[arg(long, default_value = "edg-hdg")]
    pub method: Method,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value = "auto", value_parser = parse_alpha)]
    pub alpha: Alpha,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RobustnessArgs {
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Penalty for every suite; `auto` is 6k².
    #[arg(long, default_value = "auto", value_parser = parse_alpha)]
    pub alpha: Alpha,
}

impl ConvergenceArgs {
    /// Checks the run against the solver preconditions.
    pub fn config(&self) -> Result<MethodConfig> {
        if self.levels < 2 {
            return Err(Error::InvalidArgument(format!("--levels must be at least 2, got {}", self.levels)));
        }
        let cfg = MethodConfig::new(self.method, self.degree, self.nu);
        if !(1..=2).contains(&self.degree) {
            return Err(Error::UnsupportedDegree(self.degree));
        }
        let cfg = cfg.with_alpha(self.alpha.resolve(self.degree));
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_csv(path: &Option<PathBuf>, csv: &str) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, csv)?;
    }
    Ok(())
}

pub fn cmd_convergence(args: &ConvergenceArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = run_convergence(args.case, &cfg, args.levels).and_then(|r| {
        write_csv(&args.out, &r.to_csv())?;
        Ok(r)
    });
    match result {
        Ok(r) => {
            let _ = write!(out, "{}", r.table());
            let rates = r.final_rates().map(|v| v.map_or("-".to_string(), |x| format!("{x:.2}")));
            let _ = writeln!(
                out,
                "mean of last two rates: u_l2 {}, u_energy {}, p_l2 {}",
                rates[0], rates[1], rates[2]
            );
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

pub fn cmd_robustness(args: &RobustnessArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if args.levels < 3 {
        let _ = writeln!(err, "error: --levels must be at least 3, got {}", args.levels);
        return EXIT_USAGE;
    }
    let result = run_pressure_robustness(args.levels).and_then(|r| {
        write_csv(&args.out, &r.to_csv())?;
        Ok(r)
    });
    match result {
        Ok(r) => {
            for run in &r.runs {
                let _ = writeln!(out, "{}", run.table());
            }
            let _ = writeln!(
                out,
                "max relative edg-hdg velocity difference between nu=1 and nu=1e-5: {:e}",
                r.max_velocity_difference
            );
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> i32 {
    let opts = VerifyOptions {
        seed: args.seed,
        alpha: match args.alpha {
            Alpha::Auto => None,
            Alpha::Value(v) => Some(v),
        },
    };
    let _ = writeln!(out, "seed {}", opts.seed);
    let mut ok = true;
    for suite in run_all(&opts) {
        ok &= suite.passed;
        let _ = write!(out, "{suite}");
    }
    let _ = writeln!(out, "{}", if ok { "all suites passed" } else { "some suites FAILED" });
    if ok {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match &cli.command {
        Command::Convergence(a) => cmd_convergence(a, out, err),
        Command::Robustness(a) => cmd_robustness(a, out, err),
        Command::Verify(a) => cmd_verify(a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("stokes-hybrid").chain(args.iter().copied()))
    }

    #[test]
    fn alpha_auto_resolves_to_6k2() {
        let cli = parse(&["convergence", "--alpha", "auto", "--degree", "2"]).unwrap();
        let Command::Convergence(a) = cli.command else { panic!() };
        assert_eq!(a.config().unwrap().alpha, 24.0);
    }

    #[test]
    fn bad_flags_rejected() {
        assert!(parse(&["convergence", "--case", "cube"]).is_err());
        assert!(parse(&["convergence", "--alpha", "-1"]).is_err());
        assert!(parse(&["convergence", "--method", "dg"]).is_err());
        let cli = parse(&["convergence", "--degree", "3"]).unwrap();
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(&cli, &mut out, &mut err), EXIT_USAGE);
        let cli = parse(&["convergence", "--levels", "1"]).unwrap();
        assert_eq!(run(&cli, &mut out, &mut err), EXIT_USAGE);
        let cli = parse(&["robustness", "--levels", "2"]).unwrap();
        assert_eq!(run(&cli, &mut out, &mut err), EXIT_USAGE);
        assert!(out.is_empty());
    }

    #[test]
    fn parse_errors_exit_with_usage_code() {
        let e = parse(&["convergence", "--nu", "x"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }
}
