//! Runtime verification suites behind `stokes-hybrid verify`.
//!
//! The assembly oracle rebuilds the element matrices from scratch: a monomial
//! basis inverted through a Vandermonde matrix, Gauss-Legendre nodes computed by
//! Newton iteration, a collapsed (Duffy) volume rule and normals taken from the
//! vertex coordinates. It shares only the node layout with [`crate::assembly`].

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{coercivity_sampling, error_report, structure_checks};
use crate::assembly::{assemble, local_a, local_b, AssemblyOptions};
use crate::cases::{Case, ExactSolution, LShapeFlow, LinearFlow};
use crate::error::Result;
use crate::mesh::{cracked_square_mesh, local_face_vertices, lshape_mesh, unit_square_mesh, Domain, Mesh, Point};
use crate::solver::{solve_condensed, solve_condensed_with, solve_full, DiscreteStokesSolution};
use crate::spaces::{
    build_spaces, interpolate_facet_dirichlet, segment_node_params, triangle_node_coords, Method, MethodConfig,
};

const METHODS: [Method; 3] = [Method::Hdg, Method::EdgHdg, Method::Edg];

/// Knobs shared by all suites.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyOptions {
    /// Seed for the randomized suites.
    pub seed: u64,
    /// Penalty override; `None` means `6k²`.
    pub alpha: Option<f64>,
}

impl VerifyOptions {
    fn cfg(&self, method: Method, degree: usize, nu: f64) -> MethodConfig {
        let cfg = MethodConfig::new(method, degree, nu);
        match self.alpha {
            Some(a) => cfg.with_alpha(a),
            None => cfg,
        }
    }
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    /// One line per check.
    pub details: Vec<String>,
    pub warnings: Vec<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        SuiteResult {
            name,
            passed: true,
            details: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.details.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn error(&mut self, what: &str, e: crate::Error) {
        self.check(false, format!("{what}: {e}"));
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}] {}", if self.passed { "PASS" } else { "FAIL" }, self.name)?;
        for d in &self.details {
            writeln!(f, "    {d}")?;
        }
        for w in &self.warnings {
            writeln!(f, "    warning: {w}")?;
        }
        Ok(())
    }
}

/// Runs every suite in a fixed order.
pub fn run_all(opts: &VerifyOptions) -> Vec<SuiteResult> {
    vec![
        patch_suite(opts),
        assembly_oracle_suite(opts),
        equivalence_suite(opts),
        coercivity_suite(opts),
        structure_suite(opts),
        exact_solution_suite(opts),
    ]
}

fn patch_meshes() -> Result<Vec<(&'static str, Mesh)>> {
    Ok(vec![
        ("square", unit_square_mesh(2)?),
        ("lshape", lshape_mesh(1)?),
        ("crack", cracked_square_mesh(2)?),
    ])
}

fn solve_both(mesh: &Mesh, cfg: &MethodConfig, exact: &dyn ExactSolution) -> Result<[DiscreteStokesSolution; 2]> {
    let spaces = build_spaces(mesh, cfg)?;
    let mut bc = interpolate_facet_dirichlet(exact, mesh, &spaces.facet_velocity)?;
    bc.balance_flux(mesh, &spaces.facet_velocity);
    let force = |x: Point| exact.body_force(x);
    let full = solve_full(&assemble(mesh, cfg, &spaces, &force, &bc)?)?;
    let condensed = solve_condensed(mesh, cfg, &spaces, &force, &bc)?;
    Ok([full, condensed])
}

/// `u = (x + 2y, −x − y)`, `p = 0` is reproduced by both solvers.
pub fn patch_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut r = SuiteResult::new("patch test");
    let exact = LinearFlow::patch();
    let meshes = match patch_meshes() {
        Ok(m) => m,
        Err(e) => {
            r.error("mesh", e);
            return r;
        }
    };
    for (name, mesh) in &meshes {
        for method in METHODS {
            for k in [1, 2] {
                let cfg = opts.cfg(method, k, 1.0);
                let what = format!("{name} {method} k={k}");
                match solve_both(mesh, &cfg, &exact) {
                    Ok(sols) => {
                        let mut worst: f64 = 0.0;
                        for sol in &sols {
                            match error_report(&exact, sol, mesh) {
                                Ok(e) => {
                                    for v in [e.u_l2, e.u_energy, e.p_l2, e.div_sup, e.normal_jump_sup] {
                                        worst = worst.max(v);
                                    }
                                }
                                Err(e) => r.error(&what, e),
                            }
                        }
                        r.check(worst <= 1e-10, format!("{what}: max error {worst:.2e}"));
                    }
                    Err(e) => r.error(&what, e),
                }
            }
        }
    }
    r
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x.push(0.5 * (1.0 - z));
        w.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    (x, w)
}

/// Monomial exponents `x^a y^b`, `a + b ≤ k`.
fn exponents(k: usize) -> Vec<(i32, i32)> {
    (0..=k as i32).flat_map(|d| (0..=d).map(move |b| (d - b, b))).collect()
}

/// Lagrange basis on a physical triangle built from monomials in scaled
/// coordinates `(x − c) / h`.
struct NodalBasis {
    exps: Vec<(i32, i32)>,
    coef: DMatrix<f64>,
    center: Point,
    scale: f64,
}

impl NodalBasis {
    fn new(k: usize, nodes: &[Point], center: Point, scale: f64) -> Self {
        let exps = exponents(k);
        let n = exps.len();
        assert_eq!(n, nodes.len());
        let v = DMatrix::from_fn(n, n, |j, m| {
            let (a, b) = exps[m];
            ((nodes[j][0] - center[0]) / scale).powi(a) * ((nodes[j][1] - center[1]) / scale).powi(b)
        });
        let coef = v.try_inverse().expect("unisolvent nodes");
        NodalBasis {
            exps,
            coef,
            center,
            scale,
        }
    }

    fn len(&self) -> usize {
        self.exps.len()
    }

    fn value(&self, i: usize, x: Point) -> f64 {
        let (s, t) = ((x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale);
        self.exps
            .iter()
            .enumerate()
            .map(|(m, &(a, b))| self.coef[(m, i)] * s.powi(a) * t.powi(b))
            .sum()
    }

    fn gradient(&self, i: usize, x: Point) -> [f64; 2] {
        let (s, t) = ((x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale);
        let mut g = [0.0; 2];
        for (m, &(a, b)) in self.exps.iter().enumerate() {
            let c = self.coef[(m, i)] / self.scale;
            if a > 0 {
                g[0] += c * a as f64 * s.powi(a - 1) * t.powi(b);
            }
            if b > 0 {
                g[1] += c * b as f64 * s.powi(a) * t.powi(b - 1);
            }
        }
        g
    }
}

fn segment_lagrange(nodes: &[f64], m: usize, t: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != m)
        .map(|(_, &tj)| (t - tj) / (nodes[m] - tj))
        .product()
}

struct OracleFace {
    start: Point,
    end: Point,
    normal: [f64; 2],
    length: f64,
    boundary: bool,
}

struct OracleCell {
    pts: [Point; 3],
    area: f64,
    h: f64,
    velocity: NodalBasis,
    pressure: NodalBasis,
    faces: Vec<OracleFace>,
}

const ORACLE_POINTS: usize = 8;

impl OracleCell {
    fn new(mesh: &Mesh, cell: usize, k: usize) -> Self {
        let pts = mesh.cell_points(cell);
        let map = |xi: [f64; 2]| -> Point {
            [
                pts[0][0] + xi[0] * (pts[1][0] - pts[0][0]) + xi[1] * (pts[2][0] - pts[0][0]),
                pts[0][1] + xi[0] * (pts[1][1] - pts[0][1]) + xi[1] * (pts[2][1] - pts[0][1]),
            ]
        };
        let e = |a: Point, b: Point| (b[0] - a[0]).hypot(b[1] - a[1]);
        let h = e(pts[0], pts[1]).max(e(pts[1], pts[2])).max(e(pts[2], pts[0]));
        let area =
            0.5 * ((pts[1][0] - pts[0][0]) * (pts[2][1] - pts[0][1]) - (pts[2][0] - pts[0][0]) * (pts[1][1] - pts[0][1]));
        let center = [(pts[0][0] + pts[1][0] + pts[2][0]) / 3.0, (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0];
        let vnodes: Vec<Point> = triangle_node_coords(k).into_iter().map(map).collect();
        let pnodes: Vec<Point> = triangle_node_coords(k - 1).into_iter().map(map).collect();
        let faces = (0..3)
            .map(|local| {
                let (a, b) = local_face_vertices(local);
                let (pa, pb) = (pts[a], pts[b]);
                let len = e(pa, pb);
                let mut n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
                let opp = pts[local];
                if n[0] * (opp[0] - pa[0]) + n[1] * (opp[1] - pa[1]) > 0.0 {
                    n = [-n[0], -n[1]];
                }
                let face = &mesh.faces()[mesh.cell_faces(cell)[local].face];
                let start = mesh.vertices()[face.vertices[0]];
                let end = mesh.vertices()[face.vertices[1]];
                OracleFace {
                    start,
                    end,
                    normal: n,
                    length: len,
                    boundary: face.is_boundary(),
                }
            })
            .collect();
        OracleCell {
            pts,
            area,
            h,
            velocity: NodalBasis::new(k, &vnodes, center, h),
            pressure: NodalBasis::new(k - 1, &pnodes, center, h),
            faces,
        }
    }

    /// Collapsed tensor Gauss rule on the cell: `(point, weight)`.
    fn volume_rule(&self) -> Vec<(Point, f64)> {
        let (x, w) = gauss_legendre(ORACLE_POINTS);
        let p = &self.pts;
        let mut out = Vec::new();
        for (u, wu) in x.iter().zip(&w) {
            for (v, wv) in x.iter().zip(&w) {
                let (s, t) = (*u, v * (1.0 - u));
                let pt = [
                    p[0][0] + s * (p[1][0] - p[0][0]) + t * (p[2][0] - p[0][0]),
                    p[0][1] + s * (p[1][1] - p[0][1]) + t * (p[2][1] - p[0][1]),
                ];
                out.push((pt, wu * wv * (1.0 - u) * 2.0 * self.area));
            }
        }
        out
    }

    /// `(point, parameter from face.vertices[0], weight)` on local face `local`.
    fn face_rule(&self, local: usize) -> Vec<(Point, f64, f64)> {
        let f = &self.faces[local];
        let (x, w) = gauss_legendre(ORACLE_POINTS);
        x.iter()
            .zip(&w)
            .map(|(&t, &wt)| {
                let pt = [f.start[0] + t * (f.end[0] - f.start[0]), f.start[1] + t * (f.end[1] - f.start[1])];
                (pt, t, wt * f.length)
            })
            .collect()
    }
}

/// Scalar `a_h` over `[cell nodes, facet nodes]` computed independently.
pub fn oracle_local_a(mesh: &Mesh, cell: usize, degree: usize, alpha: f64) -> DMatrix<f64> {
    let oc = OracleCell::new(mesh, cell, degree);
    let nc = oc.velocity.len();
    let nf = degree + 1;
    let seg = segment_node_params(degree);
    let n = nc + 3 * nf;
    let mut a = DMatrix::zeros(n, n);
    for (x, w) in oc.volume_rule() {
        let g: Vec<[f64; 2]> = (0..nc).map(|i| oc.velocity.gradient(i, x)).collect();
        for i in 0..nc {
            for j in 0..nc {
                a[(i, j)] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    for local in 0..3 {
        let nrm = oc.faces[local].normal;
        for (x, t, w) in oc.face_rule(local) {
            let mut d = vec![0.0; n];
            let mut dn = vec![0.0; n];
            for i in 0..nc {
                d[i] = oc.velocity.value(i, x);
                let g = oc.velocity.gradient(i, x);
                dn[i] = g[0] * nrm[0] + g[1] * nrm[1];
            }
            for m in 0..nf {
                d[nc + local * nf + m] = -segment_lagrange(seg, m, t);
            }
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] += w * (alpha / oc.h * d[i] * d[j] - d[i] * dn[j] - dn[i] * d[j]);
                }
            }
        }
    }
    a
}

/// `b_h` on one cell in the layout of [`crate::assembly::local_b`], computed independently.
pub fn oracle_local_b(mesh: &Mesh, cell: usize, degree: usize) -> DMatrix<f64> {
    let oc = OracleCell::new(mesh, cell, degree);
    let nc = oc.velocity.len();
    let np = oc.pressure.len();
    let nf = degree + 1;
    let seg = segment_node_params(degree);
    let wv = nc + 3 * nf;
    let mut b = DMatrix::zeros(np + 3 * nf, 2 * wv);
    for (x, w) in oc.volume_rule() {
        for r in 0..np {
            let q = oc.pressure.value(r, x);
            for i in 0..nc {
                let g = oc.velocity.gradient(i, x);
                for comp in 0..2 {
                    b[(r, comp * wv + i)] -= w * g[comp] * q;
                }
            }
        }
    }
    for local in 0..3 {
        let f = &oc.faces[local];
        for (x, t, w) in oc.face_rule(local) {
            for m in 0..nf {
                let row = np + local * nf + m;
                let q = segment_lagrange(seg, m, t);
                for comp in 0..2 {
                    for i in 0..nc {
                        b[(row, comp * wv + i)] += w * oc.velocity.value(i, x) * f.normal[comp] * q;
                    }
                    if f.boundary {
                        for mm in 0..nf {
                            b[(row, comp * wv + nc + local * nf + mm)] -=
                                w * segment_lagrange(seg, mm, t) * f.normal[comp] * q;
                        }
                    }
                }
            }
        }
    }
    b
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    (a - b).amax()
}

/// Single reference triangle `(0,0), (1,0), (0,1)`.
pub fn reference_triangle() -> Result<Mesh> {
    Mesh::from_cells(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2]],
        vec![],
        Domain::Custom,
    )
}

/// Element matrices against the independent oracle, entrywise to 1e-12.
pub fn assembly_oracle_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut r = SuiteResult::new("assembly oracle");
    let meshes = match (reference_triangle(), lshape_mesh(1), cracked_square_mesh(2)) {
        (Ok(a), Ok(b), Ok(c)) => vec![("reference", a), ("lshape", b), ("crack", c)],
        _ => {
            r.check(false, "mesh construction".into());
            return r;
        }
    };
    for (name, mesh) in &meshes {
        for k in [1, 2] {
            let cfg = opts.cfg(Method::Hdg, k, 1.0);
            let (mut da, mut db): (f64, f64) = (0.0, 0.0);
            for cell in 0..mesh.n_cells() {
                match (local_a(mesh, cell, &cfg), local_b(mesh, cell, k)) {
                    (Ok(a), Ok(b)) => {
                        da = da.max(max_abs_diff(&a, &oracle_local_a(mesh, cell, k, cfg.alpha)));
                        db = db.max(max_abs_diff(&b, &oracle_local_b(mesh, cell, k)));
                    }
                    (Err(e), _) | (_, Err(e)) => r.error(name, e),
                }
            }
            r.check(
                da <= 1e-12 && db <= 1e-12,
                format!("{name} k={k} alpha={}: max |a - oracle| {da:.1e}, max |b - oracle| {db:.1e}", cfg.alpha),
            );
        }
    }
    r
}

/// Static condensation reproduces the full solve on every case's coarsest mesh.
pub fn equivalence_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut r = SuiteResult::new("condensed vs full");
    for case in Case::ALL {
        let mesh = match case.base_mesh() {
            Ok(m) => m,
            Err(e) => {
                r.error(case.name(), e);
                continue;
            }
        };
        let exact = case.exact(1.0);
        for method in METHODS {
            for k in [1, 2] {
                let cfg = opts.cfg(method, k, 1.0);
                let what = format!("{case} {method} k={k}");
                match solve_both(&mesh, &cfg, exact.as_ref()) {
                    Ok([full, cond]) => {
                        let (a, b) = (full.to_vector(), cond.to_vector());
                        let d = a.iter().zip(&b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
                        r.check(
                            d <= 1e-10 && cond.global_dofs < full.global_dofs,
                            format!(
                                "{what}: max difference {d:.1e}, unknowns {} -> {}",
                                full.global_dofs, cond.global_dofs
                            ),
                        );
                    }
                    Err(e) => r.error(&what, e),
                }
            }
        }
    }
    r
}

/// Samples of the `a_h` Rayleigh quotient.
pub const COERCIVITY_SAMPLES: usize = 100;

/// Minimum of `a_h(v, v) / |||v|||²` over seeded random fields on
/// `unit_square_mesh(4)`; passes when every sampled minimum is positive.
pub fn coercivity_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut r = SuiteResult::new("coercivity sampling");
    let mesh = match unit_square_mesh(4) {
        Ok(m) => m,
        Err(e) => {
            r.error("mesh", e);
            return r;
        }
    };
    for method in METHODS {
        for k in [1, 2] {
            let cfg = opts.cfg(method, k, 1.0);
            let what = format!("{method} k={k} alpha={}", cfg.alpha);
            let sample = build_spaces(&mesh, &cfg)
                .and_then(|sp| coercivity_sampling(&mesh, &cfg, &sp, COERCIVITY_SAMPLES, opts.seed));
            match sample {
                Ok(s) => {
                    let exact = s.exact_min.map_or("n/a".to_string(), |v| format!("{v:.4}"));
                    r.check(
                        s.min_quotient > 0.0,
                        format!("{what}: seed {} min quotient {:.4}, exact minimum {exact}", s.seed, s.min_quotient),
                    );
                    if s.min_quotient <= 0.0 {
                        r.warnings.push(format!("{what}: a_h is not positive on sampled fields; penalty too small"));
                    } else if s.exact_min.is_some_and(|v| v <= 0.0) {
                        r.warnings.push(format!(
                            "{what}: sampling stays positive but the smallest eigenvalue is {exact}; \
                             a_h is indefinite on this mesh"
                        ));
                    }
                }
                Err(e) => r.error(&what, e),
            }
        }
    }
    r
}

/// Divergence and normal-jump checks on every case, plus the negative control
/// with the facet-pressure coupling removed.
pub fn structure_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut r = SuiteResult::new("structure");
    for case in Case::ALL {
        let exact = case.exact(1.0);
        for level in 0..2 {
            let mesh = match case.mesh(level) {
                Ok(m) => m,
                Err(e) => {
                    r.error(case.name(), e);
                    continue;
                }
            };
            for method in [Method::Hdg, Method::EdgHdg] {
                for k in [1, 2] {
                    let cfg = opts.cfg(method, k, 1.0);
                    let what = format!("{case} level {level} {method} k={k}");
                    match crate::cases::solve_exact(&mesh, &cfg, exact.as_ref()).and_then(|sol| {
                        let e = error_report(exact.as_ref(), &sol, &mesh)?;
                        Ok((e.div_sup, e.normal_jump_sup, e.u_max))
                    }) {
                        Ok((div, jump, umax)) => {
                            let tol = 1e-9 * umax.max(1.0);
                            r.check(
                                div <= tol && jump <= tol,
                                format!("{what}: div {div:.1e}, normal jump {jump:.1e} (tol {tol:.1e})"),
                            );
                        }
                        Err(e) => r.error(&what, e),
                    }
                }
            }
        }
    }

    let control = || -> Result<f64> {
        let mesh = unit_square_mesh(4)?;
        let exact = Case::SquareMinReg.exact(1.0);
        let cfg = opts.cfg(Method::EdgHdg, 1, 1.0);
        let spaces = build_spaces(&mesh, &cfg)?;
        let mut bc = interpolate_facet_dirichlet(exact.as_ref(), &mesh, &spaces.facet_velocity)?;
        bc.balance_flux(&mesh, &spaces.facet_velocity);
        let force = |x: Point| exact.body_force(x);
        let opts = AssemblyOptions {
            drop_facet_pressure: true,
        };
        let sol = solve_condensed_with(&mesh, &cfg, &spaces, &force, &bc, &opts)?;
        Ok(structure_checks(&sol, &mesh).1)
    };
    match control() {
        Ok(jump) => r.check(
            jump > 1e-3,
            format!("negative control without facet pressure: normal jump {jump:.1e} > 1e-3"),
        ),
        Err(e) => r.error("negative control", e),
    }
    r
}

/// Central-difference `∂u_i/∂x_j` with step `h`.
pub fn fd_gradient(exact: &dyn ExactSolution, x: Point, hint: Option<Point>, h: f64) -> [[f64; 2]; 2] {
    let mut g = [[0.0; 2]; 2];
    for j in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[j] += h;
        xm[j] -= h;
        let (up, um) = (exact.velocity(xp, hint), exact.velocity(xm, hint));
        for i in 0..2 {
            g[i][j] = (up[i] - um[i]) / (2.0 * h);
        }
    }
    g
}

/// `−ν∆u + ∇p − f` with five-point Laplacian (step `h`) and central pressure
/// differences (step `hp`).
pub fn fd_momentum_residual(exact: &dyn ExactSolution, x: Point, hint: Option<Point>, h: f64, hp: f64) -> [f64; 2] {
    let u0 = exact.velocity(x, hint);
    let mut lap = [-4.0 * u0[0] / (h * h), -4.0 * u0[1] / (h * h)];
    for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
        let u = exact.velocity([x[0] + dx, x[1] + dy], hint);
        lap[0] += u[0] / (h * h);
        lap[1] += u[1] / (h * h);
    }
    let p = |dx: f64, dy: f64| exact.pressure([x[0] + dx, x[1] + dy], hint);
    let gp = [(p(hp, 0.0) - p(-hp, 0.0)) / (2.0 * hp), (p(0.0, hp) - p(0.0, -hp)) / (2.0 * hp)];
    let f = exact.body_force(x);
    let nu = exact.viscosity();
    [-nu * lap[0] + gp[0] - f[0], -nu * lap[1] + gp[1] - f[1]]
}

/// Random points of the case domain at distance ≥ `r_min` from the singular
/// corner and ≥ `margin` from the positive x-axis (where the polar angle is cut).
fn sample_points(case: Case, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let (lo, hi, r_min, margin) = match case {
        Case::SquareMinReg => (0.0, 1.0, 0.05, 0.0),
        Case::LShape => (-1.0, 1.0, 0.05, 0.01),
        Case::Crack => (-0.1, 0.1, 0.005, 0.001),
    };
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: Point = [rng.random_range(lo..hi), rng.random_range(lo..hi)];
        if case == Case::LShape && x[0] > 0.0 && x[1] < 0.0 {
            continue;
        }
        if x[0].hypot(x[1]) < r_min || (x[0] > 0.0 && x[1].abs() < margin) {
            continue;
        }
        out.push(x);
    }
    out
}

/// Worst violations of `∇·u = 0`, the momentum equation, and the closed-form
/// gradient, over `n` random points of `case` at viscosity `nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolutionCheck {
    pub divergence: f64,
    /// `|−ν∆u + ∇p − f| / max(1, |∇p|)`
    pub momentum: f64,
    /// `|∇u − FD| / max(1, |∇u|)`
    pub gradient: f64,
}

pub fn check_exact_solution(case: Case, nu: f64, n: usize, seed: u64) -> ExactSolutionCheck {
    let exact = case.exact(nu);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = ExactSolutionCheck {
        divergence: 0.0,
        momentum: 0.0,
        gradient: 0.0,
    };
    for x in sample_points(case, n, &mut rng) {
        let r = x[0].hypot(x[1]);
        let hint = Some(x);
        let fd = fd_gradient(exact.as_ref(), x, hint, 1e-5 * r);
        c.divergence = c.divergence.max((fd[0][0] + fd[1][1]).abs());
        let g = exact.velocity_gradient(x, hint);
        let gmax = g.iter().flatten().fold(1.0, |m: f64, v| m.max(v.abs()));
        let gerr = (0..4).fold(0.0, |m: f64, i| m.max((g[i / 2][i % 2] - fd[i / 2][i % 2]).abs()));
        c.gradient = c.gradient.max(gerr / gmax);
        let res = fd_momentum_residual(exact.as_ref(), x, hint, 1e-3 * r, 1e-6 * r);
        let p = |dx: f64, dy: f64| exact.pressure([x[0] + dx, x[1] + dy], hint);
        let hp = 1e-6 * r;
        let gp = ((p(hp, 0.0) - p(-hp, 0.0)) / (2.0 * hp)).hypot((p(0.0, hp) - p(0.0, -hp)) / (2.0 * hp));
        c.momentum = c.momentum.max(res[0].hypot(res[1]) / gp.max(1.0));
    }
    c
}

/// Largest `|ψ‴ − FD₃ψ|` over `n` angles in `[0, 3π/2]`, third-order central
/// differences with step `h`.
pub fn check_psi_third_derivative(n: usize, h: f64) -> f64 {
    let l = LShapeFlow::new(1.0);
    let omega = 1.5 * std::f64::consts::PI;
    (0..=n)
        .map(|i| {
            let t = omega * i as f64 / n as f64;
            let v = |s: f64| l.psi(t + s).value;
            let fd = (v(2.0 * h) - 2.0 * v(h) + 2.0 * v(-h) - v(-2.0 * h)) / (2.0 * h * h * h);
            (l.psi(t).d3 - fd).abs()
        })
        .fold(0.0, f64::max)
}

/// Finite-difference self-consistency of the closed-form solutions.
pub fn exact_solution_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut r = SuiteResult::new("exact solutions");
    for case in Case::ALL {
        let nus: &[f64] = if case == Case::LShape { &[1.0, 1e-5] } else { &[1.0] };
        for &nu in nus {
            let c = check_exact_solution(case, nu, 100, opts.seed);
            r.check(
                c.divergence <= 1e-6 && c.momentum <= 1e-4 && c.gradient <= 1e-7,
                format!(
                    "{case} nu={nu}: div {:.1e}, momentum {:.1e}, gradient {:.1e}",
                    c.divergence, c.momentum, c.gradient
                ),
            );
        }
    }
    let psi = check_psi_third_derivative(200, 1e-3);
    r.check(psi <= 1e-5, format!("psi''' against finite differences: {psi:.1e}"));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        for d in 0..10 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d)).sum();
            assert!((q - 1.0 / (d + 1) as f64).abs() < 1e-15, "degree {d}");
        }
    }

    #[test]
    fn nodal_basis_is_lagrange() {
        let m = reference_triangle().unwrap();
        let oc = OracleCell::new(&m, 0, 2);
        for (j, xi) in triangle_node_coords(2).into_iter().enumerate() {
            for i in 0..6 {
                let v = oc.velocity.value(i, xi);
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn oracle_reference_triangle_k1() {
        let m = reference_triangle().unwrap();
        let cfg = MethodConfig::new(Method::Hdg, 1, 1.0);
        let a = local_a(&m, 0, &cfg).unwrap();
        assert!(max_abs_diff(&a, &oracle_local_a(&m, 0, 1, 6.0)) <= 1e-12);
        let b = local_b(&m, 0, 1).unwrap();
        assert!(max_abs_diff(&b, &oracle_local_b(&m, 0, 1)) <= 1e-12);
    }

    #[test]
    fn small_penalty_flagged() {
        let opts = VerifyOptions {
            seed: 0,
            alpha: Some(0.01),
        };
        let r = coercivity_suite(&opts);
        assert!(!r.passed || !r.warnings.is_empty());
    }
}
