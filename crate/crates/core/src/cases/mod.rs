//! Benchmark problems and the convergence / pressure-robustness drivers.

mod exact;

pub use exact::*;

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::analysis::{eoc, error_report, final_rate, ErrorReport};
use crate::error::{Error, Result};
use crate::mesh::{cracked_square_mesh, lshape_mesh, unit_square_mesh, Mesh, Point};
use crate::solver::{solve_condensed, DiscreteStokesSolution};
use crate::spaces::{build_spaces, interpolate_facet_dirichlet, Method, MethodConfig};

/// Cells per side of the coarsest mesh of each case.
pub const SQUARE_BASE: usize = 4;
pub const LSHAPE_BASE: usize = 2;
pub const CRACK_BASE: usize = 4;

/// The three benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Corner singularity on the unit square, `u ∈ H^{3/2−ε}`.
    SquareMinReg,
    /// Re-entrant corner on the L-shape with gradient forcing.
    LShape,
    /// Crack tip singularity on the slit square.
    Crack,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::SquareMinReg, Case::LShape, Case::Crack];

    pub fn name(&self) -> &'static str {
        match self {
            Case::SquareMinReg => "square-mr",
            Case::LShape => "lshape",
            Case::Crack => "crack",
        }
    }

    pub fn base_mesh(&self) -> Result<Mesh> {
        match self {
            Case::SquareMinReg => unit_square_mesh(SQUARE_BASE),
            Case::LShape => lshape_mesh(LSHAPE_BASE),
            Case::Crack => cracked_square_mesh(CRACK_BASE),
        }
    }

    pub fn exact(&self, nu: f64) -> Box<dyn ExactSolution> {
        match self {
            Case::SquareMinReg => Box::new(CornerSingularFlow::unit_square().with_viscosity(nu)),
            Case::LShape => Box::new(LShapeFlow::new(nu)),
            Case::Crack => Box::new(CornerSingularFlow::cracked_square().with_viscosity(nu)),
        }
    }

    /// Base mesh refined `level` times.
    pub fn mesh(&self, level: usize) -> Result<Mesh> {
        let mut m = self.base_mesh()?;
        for _ in 0..level {
            m = m.refine_uniform();
        }
        Ok(m)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown case `{s}`")))
    }
}

/// Unit square with the corner-singular flow, `f = 0`, `ν = 1`.
pub fn case_square_min_reg() -> Result<(Mesh, CornerSingularFlow)> {
    Ok((unit_square_mesh(SQUARE_BASE)?, CornerSingularFlow::unit_square()))
}

pub fn case_lshape(nu: f64) -> Result<(Mesh, LShapeFlow)> {
    Ok((lshape_mesh(LSHAPE_BASE)?, LShapeFlow::new(nu)))
}

pub fn case_cracked_square() -> Result<(Mesh, CornerSingularFlow)> {
    Ok((cracked_square_mesh(CRACK_BASE)?, CornerSingularFlow::cracked_square()))
}

/// Interpolates and flux-balances the boundary data of `exact`, then solves
/// with static condensation.
pub fn solve_exact(mesh: &Mesh, cfg: &MethodConfig, exact: &dyn ExactSolution) -> Result<DiscreteStokesSolution> {
    if (exact.viscosity() - cfg.nu).abs() > 1e-14 * cfg.nu {
        return Err(Error::InvalidArgument(format!(
            "exact solution has ν = {}, config has ν = {}",
            exact.viscosity(),
            cfg.nu
        )));
    }
    let spaces = build_spaces(mesh, cfg)?;
    let mut bc = interpolate_facet_dirichlet(exact, mesh, &spaces.facet_velocity)?;
    bc.balance_flux(mesh, &spaces.facet_velocity);
    let force = |x: Point| exact.body_force(x);
    solve_condensed(mesh, cfg, &spaces, &force, &bc)
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub cells: usize,
    pub h: f64,
    /// Unknowns of the condensed (facet) system.
    pub dofs_condensed: usize,
    pub errors: ErrorReport,
    /// `[u_h, ū_h]` coefficients.
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub case: Case,
    pub cfg: MethodConfig,
    pub levels: Vec<LevelResult>,
}

/// Column header of the convergence CSV.
pub const CSV_HEADER: &str = "level,cells,h,dofs_condensed,err_u_l2,rate_u_l2,err_u_energy,rate_u_energy,err_p_l2,rate_p_l2,div_sup,normal_jump_sup";

fn csv_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:?}")).unwrap_or_default()
}

impl ConvergenceReport {
    fn column(&self, f: impl Fn(&ErrorReport) -> f64) -> Vec<f64> {
        self.levels.iter().map(|l| f(&l.errors)).collect()
    }

    pub fn rates_u_l2(&self) -> Vec<Option<f64>> {
        eoc(&self.column(|e| e.u_l2))
    }

    pub fn rates_u_energy(&self) -> Vec<Option<f64>> {
        eoc(&self.column(|e| e.u_energy))
    }

    pub fn rates_p_l2(&self) -> Vec<Option<f64>> {
        eoc(&self.column(|e| e.p_l2))
    }

    /// Mean of the last two rates for `(‖u−u_h‖, |||u−u_h|||, ‖p−p_h‖)`.
    pub fn final_rates(&self) -> [Option<f64>; 3] {
        [
            final_rate(&self.rates_u_l2()),
            final_rate(&self.rates_u_energy()),
            final_rate(&self.rates_p_l2()),
        ]
    }

    /// CSV rows (without header), optionally prefixed by extra columns.
    pub fn csv_rows(&self, prefix: &str) -> String {
        let (ru, re, rp) = (self.rates_u_l2(), self.rates_u_energy(), self.rates_p_l2());
        let mut out = String::new();
        for (i, l) in self.levels.iter().enumerate() {
            let e = &l.errors;
            writeln!(
                out,
                "{prefix}{},{},{:?},{},{:?},{},{:?},{},{:?},{},{:?},{:?}",
                l.level,
                l.cells,
                l.h,
                l.dofs_condensed,
                e.u_l2,
                csv_rate(ru[i]),
                e.u_energy,
                csv_rate(re[i]),
                e.p_l2,
                csv_rate(rp[i]),
                e.div_sup,
                e.normal_jump_sup
            )
            .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows(""))
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        let (ru, re, rp) = (self.rates_u_l2(), self.rates_u_energy(), self.rates_p_l2());
        let rate = |r: Option<f64>| r.map(|v| format!("{v:5.2}")).unwrap_or_else(|| "    -".into());
        let mut out = format!(
            "{} / {} k={} alpha={} nu={}\n{:>5} {:>7} {:>9} {:>8} {:>10} {:>5} {:>10} {:>5} {:>10} {:>5} {:>9} {:>9}\n",
            self.case,
            self.cfg.method,
            self.cfg.degree,
            self.cfg.alpha,
            self.cfg.nu,
            "level",
            "cells",
            "h",
            "dofs",
            "|u-uh|",
            "rate",
            "|||u-uh|||",
            "rate",
            "|p-ph|",
            "rate",
            "div",
            "jump"
        );
        for (i, l) in self.levels.iter().enumerate() {
            let e = &l.errors;
            writeln!(
                out,
                "{:>5} {:>7} {:>9.3e} {:>8} {:>10.3e} {} {:>10.3e} {} {:>10.3e} {} {:>9.1e} {:>9.1e}",
                l.level,
                l.cells,
                l.h,
                l.dofs_condensed,
                e.u_l2,
                rate(ru[i]),
                e.u_energy,
                rate(re[i]),
                e.p_l2,
                rate(rp[i]),
                e.div_sup,
                e.normal_jump_sup
            )
            .unwrap();
        }
        out
    }
}

/// Solves `case` on `levels` successively refined meshes and measures errors.
pub fn run_convergence(case: Case, cfg: &MethodConfig, levels: usize) -> Result<ConvergenceReport> {
    if levels < 2 {
        return Err(Error::InvalidArgument("a convergence study needs at least 2 levels".into()));
    }
    cfg.validate()?;
    let exact = case.exact(cfg.nu);
    let mut mesh = case.base_mesh()?;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let sol = solve_exact(&mesh, cfg, exact.as_ref())?;
        let errors = error_report(exact.as_ref(), &sol, &mesh)?;
        let mut velocity = sol.u;
        velocity.extend_from_slice(&sol.ubar);
        out.push(LevelResult {
            level,
            cells: mesh.n_cells(),
            h: mesh.h(),
            dofs_condensed: sol.global_dofs,
            errors,
            velocity,
        });
    }
    Ok(ConvergenceReport {
        case,
        cfg: *cfg,
        levels: out,
    })
}

/// Viscosities of the robustness study.
pub const ROBUSTNESS_NU: [f64; 2] = [1.0, 1e-5];

/// EDG and EDG–HDG on the L-shape at `ν = 1` and `ν = 10⁻⁵`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    /// Blocks in the order (EDG, 1), (EDG, 1e-5), (EDG–HDG, 1), (EDG–HDG, 1e-5).
    pub runs: Vec<ConvergenceReport>,
    /// `max_level ‖v₁ − v₂‖_∞ / ‖v₁‖_∞` over the EDG–HDG velocity coefficients.
    pub max_velocity_difference: f64,
}

impl RobustnessReport {
    pub fn run(&self, method: Method, nu: f64) -> Option<&ConvergenceReport> {
        self.runs.iter().find(|r| r.cfg.method == method && r.cfg.nu == nu)
    }

    /// One block per `(method, nu)`, each row prefixed with those two columns.
    pub fn to_csv(&self) -> String {
        let mut out = format!("method,nu,{CSV_HEADER}\n");
        for r in &self.runs {
            out.push_str(&r.csv_rows(&format!("{},{:?},", r.cfg.method, r.cfg.nu)));
        }
        out
    }
}

pub fn run_pressure_robustness(levels: usize) -> Result<RobustnessReport> {
    if levels < 3 {
        return Err(Error::InvalidArgument("the robustness study needs at least 3 levels".into()));
    }
    let mut runs = Vec::new();
    for method in [Method::Edg, Method::EdgHdg] {
        for nu in ROBUSTNESS_NU {
            runs.push(run_convergence(Case::LShape, &MethodConfig::new(method, 1, nu), levels)?);
        }
    }
    let (a, b) = (&runs[2], &runs[3]);
    let mut diff: f64 = 0.0;
    for (la, lb) in a.levels.iter().zip(&b.levels) {
        let scale = la.velocity.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let d = la
            .velocity
            .iter()
            .zip(&lb.velocity)
            .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
        diff = diff.max(d / scale);
    }
    Ok(RobustnessReport {
        runs,
        max_velocity_difference: diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_names_round_trip() {
        for c in Case::ALL {
            assert_eq!(c.name().parse::<Case>().unwrap(), c);
        }
        assert!("square".parse::<Case>().is_err());
    }

    #[test]
    fn csv_schema() {
        let cfg = MethodConfig::new(Method::EdgHdg, 1, 1.0);
        let r = run_convergence(Case::SquareMinReg, &cfg, 2).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        let first: Vec<&str> = lines[1].split(',').collect();
        let second: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(first.len(), 12);
        assert_eq!(first[5], "");
        assert!(second[5].parse::<f64>().is_ok());
        // shortest round trip
        assert_eq!(first[4].parse::<f64>().unwrap(), r.levels[0].errors.u_l2);
    }

    #[test]
    fn levels_validated() {
        let cfg = MethodConfig::new(Method::Hdg, 1, 1.0);
        assert!(run_convergence(Case::Crack, &cfg, 1).is_err());
        assert!(run_pressure_robustness(2).is_err());
    }

    #[test]
    fn viscosity_mismatch_rejected() {
        let (m, flow) = case_lshape(1.0).unwrap();
        let cfg = MethodConfig::new(Method::EdgHdg, 1, 0.5);
        assert!(solve_exact(&m, &cfg, &flow).is_err());
    }
}
