//! Errors, norms and structural diagnostics of discrete solutions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{edge_rule, face_quadrature, local_a, local_a_parts, local_b, LocalSizes};
use crate::cases::ExactSolution;
use crate::concurrency::map_cells;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{LineRule, TriangleRule};
use crate::solver::DiscreteStokesSolution;
use crate::spaces::{
    lagrange_segment, lagrange_triangle, lagrange_triangle_grad, triangle_node_coords, triangle_nodes, CellGeometry,
    DofLayout, MethodConfig, Spaces,
};

/// Degree of the base rule used for error integrals.
pub const ERROR_RULE_DEGREE: usize = 10;
/// Levels of geometric refinement toward a singular vertex.
pub const SINGULAR_DEPTH: usize = 8;

/// Quadrature on a cell as `(reference point, physical weight)` pairs.
///
/// If the cell has a vertex at one of `singular`, the corner sub-triangle at
/// that vertex is split recursively `depth` times; every other piece gets the
/// base rule.
pub fn cell_quadrature(mesh: &Mesh, cell: usize, singular: &[Point], depth: usize) -> Vec<([f64; 2], f64)> {
    let base = TriangleRule::exact_for(ERROR_RULE_DEGREE);
    let scale = 2.0 * mesh.cell_area(cell).unwrap();
    let corner = singular.iter().find_map(|&p| mesh.cell_touches(cell, p));
    let refs: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut out = Vec::new();
    let push = |tri: [[f64; 2]; 3], out: &mut Vec<([f64; 2], f64)>| {
        let d1 = [tri[1][0] - tri[0][0], tri[1][1] - tri[0][1]];
        let d2 = [tri[2][0] - tri[0][0], tri[2][1] - tri[0][1]];
        let det = (d1[0] * d2[1] - d1[1] * d2[0]).abs();
        for (xi, w) in base.points.iter().zip(&base.weights) {
            let p = [
                tri[0][0] + xi[0] * d1[0] + xi[1] * d2[0],
                tri[0][1] + xi[0] * d1[1] + xi[1] * d2[1],
            ];
            out.push((p, w * det * scale));
        }
    };
    match corner {
        None => push(refs, &mut out),
        Some(v) => {
            let mut tri = [refs[v], refs[(v + 1) % 3], refs[(v + 2) % 3]];
            let mid = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            for _ in 0..depth {
                let (m01, m12, m20) = (mid(tri[0], tri[1]), mid(tri[1], tri[2]), mid(tri[2], tri[0]));
                push([m01, tri[1], m12], &mut out);
                push([m20, m12, tri[2]], &mut out);
                push([m01, m12, m20], &mut out);
                tri = [tri[0], m01, m20];
            }
            push(tri, &mut out);
        }
    }
    out
}

fn cell_coeffs<'a>(layout: &DofLayout, values: &'a [f64], cell: usize, comp: usize) -> impl Iterator<Item = f64> + 'a {
    let nodes: Vec<usize> = layout.nodes(cell).to_vec();
    let n = layout.n_nodes();
    nodes.into_iter().map(move |node| values[comp * n + node])
}

/// Evaluates a cell velocity field (coefficients in `layout`) at a reference point.
pub fn eval_cell_velocity(layout: &DofLayout, values: &[f64], cell: usize, xi: [f64; 2]) -> [f64; 2] {
    let k = layout.degree();
    let mut phi = vec![0.0; triangle_nodes(k)];
    lagrange_triangle(k, xi, &mut phi);
    let mut u = [0.0; 2];
    for (comp, uc) in u.iter_mut().enumerate() {
        *uc = cell_coeffs(layout, values, cell, comp).zip(&phi).map(|(c, p)| c * p).sum();
    }
    u
}

/// `g[i][j] = ∂u_i/∂x_j` of a cell velocity field.
pub fn eval_cell_velocity_gradient(
    layout: &DofLayout,
    values: &[f64],
    geo: &CellGeometry,
    cell: usize,
    xi: [f64; 2],
) -> [[f64; 2]; 2] {
    let k = layout.degree();
    let mut rg = vec![[0.0; 2]; triangle_nodes(k)];
    lagrange_triangle_grad(k, xi, &mut rg);
    let mut g = [[0.0; 2]; 2];
    for (comp, row) in g.iter_mut().enumerate() {
        for (c, r) in cell_coeffs(layout, values, cell, comp).zip(&rg) {
            let pg = geo.physical_gradient(*r);
            row[0] += c * pg[0];
            row[1] += c * pg[1];
        }
    }
    g
}

pub fn eval_cell_pressure(layout: &DofLayout, values: &[f64], cell: usize, xi: [f64; 2]) -> f64 {
    let k = layout.degree() - 1;
    let mut q = vec![0.0; triangle_nodes(k)];
    lagrange_triangle(k, xi, &mut q);
    layout.nodes(cell).iter().zip(&q).map(|(&n, q)| values[n] * q).sum()
}

/// Facet field at parameter `t` along `face` (from `face.vertices[0]`).
pub fn eval_facet(layout: &DofLayout, values: &[f64], face: usize, t: f64) -> [f64; 2] {
    let k = layout.degree();
    let mut psi = vec![0.0; k + 1];
    lagrange_segment(k, t, &mut psi);
    let mut out = [0.0; 2];
    for (comp, o) in out.iter_mut().enumerate().take(layout.components()) {
        *o = layout
            .nodes(face)
            .iter()
            .zip(&psi)
            .map(|(&n, p)| values[layout.dof(n, comp)] * p)
            .sum();
    }
    out
}

/// Error norms and diagnostics of one discrete solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// `‖u − u_h‖`
    pub u_l2: f64,
    /// `|||(u − u_h, u − ū_h)|||_v`
    pub u_energy: f64,
    /// `‖p − p_h‖` after removing both means.
    pub p_l2: f64,
    /// `max_K ‖∇·u_h‖_{L∞(K)}`
    pub div_sup: f64,
    /// `max |⟦u_h⟧·n_F|` over Gauss points of interior faces.
    pub normal_jump_sup: f64,
    /// `max |u_h|` over the Lagrange nodes.
    pub u_max: f64,
    /// `|u_h|_j`
    pub jump: f64,
    /// `|u_h|_g`
    pub gradient_jump: f64,
    /// `osc(f)`
    pub osc_f: f64,
    /// `osc(ℙf)`: zero when the force is a gradient, otherwise bounded by `osc(f)`.
    pub osc_projected_f: f64,
}

/// `|||(u − u_h, u − ū_h)|||_v`. The facet part reduces to the discrete
/// `Σ_K h_K⁻¹ ‖ū_h − u_h‖²_∂K`; the gradient part uses singular quadrature.
pub fn energy_error(exact: &dyn ExactSolution, sol: &DiscreteStokesSolution, mesh: &Mesh) -> Result<f64> {
    let cv = &sol.spaces.cell_velocity;
    let parts = map_cells(mesh.n_cells(), |cell| -> Result<f64> {
        let geo = CellGeometry::new(mesh, cell);
        let hint = mesh.cell_centroid(cell);
        let mut sum = 0.0;
        for (xi, w) in cell_quadrature(mesh, cell, exact.singular_points(), SINGULAR_DEPTH) {
            let x = geo.to_physical(xi);
            let g = exact.velocity_gradient(x, Some(hint));
            let gh = eval_cell_velocity_gradient(cv, &sol.u, &geo, cell, xi);
            for i in 0..2 {
                for j in 0..2 {
                    sum += w * (g[i][j] - gh[i][j]).powi(2);
                }
            }
        }
        Ok(sum + facet_difference_sq(mesh, &sol.spaces, &sol.u, &sol.ubar, cell)?)
    });
    finite_sqrt(parts, "energy error")
}

/// `h_K⁻¹ ‖v − v̄‖²_∂K` on one cell.
fn facet_difference_sq(mesh: &Mesh, spaces: &Spaces, u: &[f64], ubar: &[f64], cell: usize) -> Result<f64> {
    let geo = CellGeometry::new(mesh, cell);
    let h = mesh.cell_diameter(cell)?;
    let rule = edge_rule(spaces.degree());
    let mut sum = 0.0;
    for local in 0..3 {
        let face = mesh.cell_faces(cell)[local].face;
        for (x, t, w) in face_quadrature(mesh, cell, local, &rule) {
            let v = eval_cell_velocity(&spaces.cell_velocity, u, cell, geo.to_reference(x));
            let vb = eval_facet(&spaces.facet_velocity, ubar, face, t);
            sum += w / h * ((v[0] - vb[0]).powi(2) + (v[1] - vb[1]).powi(2));
        }
    }
    Ok(sum)
}

fn finite_sqrt(parts: Vec<Result<f64>>, what: &str) -> Result<f64> {
    let total: f64 = parts.into_iter().sum::<Result<f64>>()?;
    if !total.is_finite() || total < 0.0 {
        return Err(Error::InvalidArgument(format!("{what} integral is not finite")));
    }
    Ok(total.sqrt())
}

/// `(‖u − u_h‖, ‖p − p_h‖)`, the pressures compared after removing their means.
pub fn l2_errors(exact: &dyn ExactSolution, sol: &DiscreteStokesSolution, mesh: &Mesh) -> Result<(f64, f64)> {
    let cv = &sol.spaces.cell_velocity;
    let cp = &sol.spaces.cell_pressure;
    // per cell: ∫|u − u_h|², ∫ p, ∫ p_h, ∫ (p − p_h)²
    let parts = map_cells(mesh.n_cells(), |cell| {
        let geo = CellGeometry::new(mesh, cell);
        let hint = mesh.cell_centroid(cell);
        let mut acc = [0.0; 4];
        for (xi, w) in cell_quadrature(mesh, cell, exact.singular_points(), SINGULAR_DEPTH) {
            let x = geo.to_physical(xi);
            let u = exact.velocity(x, Some(hint));
            let uh = eval_cell_velocity(cv, &sol.u, cell, xi);
            let p = exact.pressure(x, Some(hint));
            let ph = eval_cell_pressure(cp, &sol.p, cell, xi);
            acc[0] += w * ((u[0] - uh[0]).powi(2) + (u[1] - uh[1]).powi(2));
            acc[1] += w * p;
            acc[2] += w * ph;
            acc[3] += w * (p - ph).powi(2);
        }
        acc
    });
    let mut tot = [0.0; 4];
    for a in parts {
        for i in 0..4 {
            tot[i] += a[i];
        }
    }
    let area = mesh.total_area();
    // ∫ ((p − p̄) − (p_h − p̄_h))² = ∫ (p − p_h)² − |Ω| (p̄ − p̄_h)²
    let shift = (tot[1] - tot[2]) / area;
    let p_sq = (tot[3] - area * shift * shift).max(0.0);
    if !(tot[0].is_finite() && p_sq.is_finite()) {
        return Err(Error::InvalidArgument("L2 error integral is not finite".into()));
    }
    Ok((tot[0].sqrt(), p_sq.sqrt()))
}

/// `(div_sup, normal_jump_sup)`.
///
/// `∇·u_h` is a polynomial of degree `k − 1`, so its maximum on a cell is
/// attained at a vertex; the normal jump is sampled at `k + 1` Gauss points.
pub fn structure_checks(sol: &DiscreteStokesSolution, mesh: &Mesh) -> (f64, f64) {
    let cv = &sol.spaces.cell_velocity;
    let div = map_cells(mesh.n_cells(), |cell| {
        let geo = CellGeometry::new(mesh, cell);
        triangle_node_coords(1)
            .into_iter()
            .map(|xi| {
                let g = eval_cell_velocity_gradient(cv, &sol.u, &geo, cell, xi);
                (g[0][0] + g[1][1]).abs()
            })
            .fold(0.0, f64::max)
    });
    let div_sup = div.into_iter().fold(0.0, f64::max);
    (div_sup, normal_jump_sup(cv, &sol.u, mesh))
}

pub fn normal_jump_sup(cv: &DofLayout, u: &[f64], mesh: &Mesh) -> f64 {
    let rule = LineRule::gauss(cv.degree() + 1);
    let mut sup: f64 = 0.0;
    for face in mesh.faces() {
        if face.is_boundary() {
            continue;
        }
        let a = mesh.vertices()[face.vertices[0]];
        let b = mesh.vertices()[face.vertices[1]];
        for &t in &rule.points {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let side = |cell: usize| eval_cell_velocity(cv, u, cell, CellGeometry::new(mesh, cell).to_reference(x));
            let (up, um) = (side(face.parents[0].cell), side(face.parents[1].cell));
            sup = sup.max(((up[0] - um[0]) * face.normal[0] + (up[1] - um[1]) * face.normal[1]).abs());
        }
    }
    sup
}

/// `|v|_j² = Σ_F h_F⁻¹ ‖⟦v⟧‖²_F`, with `⟦v⟧ = v` on boundary faces.
pub fn jump_seminorm(cv: &DofLayout, u: &[f64], mesh: &Mesh) -> f64 {
    let rule = edge_rule(cv.degree());
    let mut sum = 0.0;
    for face in mesh.faces() {
        let a = mesh.vertices()[face.vertices[0]];
        let b = mesh.vertices()[face.vertices[1]];
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let side = |cell: usize| eval_cell_velocity(cv, u, cell, CellGeometry::new(mesh, cell).to_reference(x));
            let mut j = side(face.parents[0].cell);
            if let Some(other) = face.parents.get(1) {
                let o = side(other.cell);
                j = [j[0] - o[0], j[1] - o[1]];
            }
            sum += w * (j[0] * j[0] + j[1] * j[1]);
        }
    }
    sum.sqrt()
}

/// `|v, v̄|_f² = Σ_K h_K⁻¹ ‖v − v̄‖²_∂K`
pub fn facet_seminorm(spaces: &Spaces, u: &[f64], ubar: &[f64], mesh: &Mesh) -> f64 {
    (0..mesh.n_cells())
        .map(|c| facet_difference_sq(mesh, spaces, u, ubar, c).unwrap())
        .sum::<f64>()
        .sqrt()
}

/// `|v|_g² = Σ_{F interior} h_F ‖⟦∇_h v⟧ n_F‖²_F`
pub fn gradient_jump_seminorm(cv: &DofLayout, u: &[f64], mesh: &Mesh) -> f64 {
    let rule = edge_rule(cv.degree());
    let mut sum = 0.0;
    for face in mesh.faces() {
        if face.is_boundary() {
            continue;
        }
        let a = mesh.vertices()[face.vertices[0]];
        let b = mesh.vertices()[face.vertices[1]];
        let n = face.normal;
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let side = |cell: usize| {
                let geo = CellGeometry::new(mesh, cell);
                let g = eval_cell_velocity_gradient(cv, u, &geo, cell, geo.to_reference(x));
                [g[0][0] * n[0] + g[0][1] * n[1], g[1][0] * n[0] + g[1][1] * n[1]]
            };
            let (gp, gm) = (side(face.parents[0].cell), side(face.parents[1].cell));
            sum += w * face.diameter * ((gp[0] - gm[0]).powi(2) + (gp[1] - gm[1]).powi(2));
        }
    }
    sum.sqrt()
}

/// `osc(g)² = Σ_K h_K² ‖g‖²_K`
pub fn oscillation(g: &(dyn Fn(Point) -> [f64; 2] + Sync), mesh: &Mesh) -> f64 {
    let parts = map_cells(mesh.n_cells(), |cell| {
        let geo = CellGeometry::new(mesh, cell);
        let h = mesh.cell_diameter(cell).unwrap();
        cell_quadrature(mesh, cell, &[], 0)
            .into_iter()
            .map(|(xi, w)| {
                let v = g(geo.to_physical(xi));
                w * h * h * (v[0] * v[0] + v[1] * v[1])
            })
            .sum::<f64>()
    });
    parts.into_iter().sum::<f64>().sqrt()
}

/// `(|u_h|_j, |u_h|_g, osc(f))`
pub fn seminorm_diagnostics(exact: &dyn ExactSolution, sol: &DiscreteStokesSolution, mesh: &Mesh) -> (f64, f64, f64) {
    let cv = &sol.spaces.cell_velocity;
    let f = |x: Point| exact.body_force(x);
    (
        jump_seminorm(cv, &sol.u, mesh),
        gradient_jump_seminorm(cv, &sol.u, mesh),
        oscillation(&f, mesh),
    )
}

/// All error norms and diagnostics of `sol` against `exact`.
pub fn error_report(exact: &dyn ExactSolution, sol: &DiscreteStokesSolution, mesh: &Mesh) -> Result<ErrorReport> {
    let (u_l2, p_l2) = l2_errors(exact, sol, mesh)?;
    let u_energy = energy_error(exact, sol, mesh)?;
    let (div_sup, normal_jump_sup) = structure_checks(sol, mesh);
    let (jump, gradient_jump, osc_f) = seminorm_diagnostics(exact, sol, mesh);
    let u_max = sol.u.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(ErrorReport {
        u_l2,
        u_energy,
        p_l2,
        div_sup,
        normal_jump_sup,
        u_max,
        jump,
        gradient_jump,
        osc_f,
        osc_projected_f: if exact.helmholtz_projection_is_zero() { 0.0 } else { osc_f },
    })
}

/// Experimental orders of convergence for successive halvings of `h`:
/// `rate_i = log₂(e_{i−1} / e_i)`, absent for the first level and for
/// non-positive errors.
pub fn eoc(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; errors.len()];
    for i in 1..errors.len() {
        let (a, b) = (errors[i - 1], errors[i]);
        if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            out[i] = Some((a / b).log2());
        }
    }
    out
}

/// Mean of the last two rates.
pub fn final_rate(rates: &[Option<f64>]) -> Option<f64> {
    let n = rates.len();
    if n < 2 {
        return None;
    }
    Some(0.5 * (rates[n - 2]? + rates[n - 1]?))
}

/// Scalar Gram matrix of `|||·|||_v² = Σ ‖∇v‖²_K + h_K⁻¹ ‖v − v̄‖²_∂K` on one
/// cell, over `[cell nodes, facet nodes]`.
pub fn local_energy_gram(mesh: &Mesh, cell: usize, degree: usize) -> Result<DMatrix<f64>> {
    let p = local_a_parts(mesh, cell, degree)?;
    Ok(p.stiffness + p.penalty)
}

/// Free velocity unknowns (cell velocity and unconstrained facet velocity)
/// and the dense index of every local velocity dof of a cell.
struct VelocityIndex {
    n: usize,
    facet: Vec<Option<usize>>,
    n_cell: usize,
}

impl VelocityIndex {
    fn new(spaces: &Spaces) -> Self {
        let n_cell = spaces.cell_velocity.n_dofs();
        let mut next = n_cell;
        let facet = (0..spaces.facet_velocity.n_dofs())
            .map(|d| {
                (!spaces.facet_velocity.is_constrained(d)).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        VelocityIndex { n: next, facet, n_cell }
    }

    /// Local velocity column `comp * (cell + facet) + s` → dense index.
    fn local(&self, mesh: &Mesh, spaces: &Spaces, cell: usize) -> Vec<Option<usize>> {
        let s = LocalSizes::new(spaces.degree());
        let nf = spaces.degree() + 1;
        let cv = &spaces.cell_velocity;
        let fv = &spaces.facet_velocity;
        let mut out = vec![None; 2 * (s.cell + s.facet)];
        for comp in 0..2 {
            let base = comp * (s.cell + s.facet);
            for (i, &node) in cv.nodes(cell).iter().enumerate() {
                out[base + i] = Some(cv.dof(node, comp));
            }
            for (local, cf) in mesh.cell_faces(cell).iter().enumerate() {
                for (m, &node) in fv.nodes(cf.face).iter().enumerate() {
                    out[base + s.cell + local * nf + m] = self.facet[fv.dof(node, comp)];
                }
            }
        }
        debug_assert!(out.iter().flatten().all(|&i| i < self.n || i < self.n_cell));
        out
    }
}

/// Scatters a scalar local matrix (block diagonal per component) into a dense one.
fn scatter_vector_block(dense: &mut DMatrix<f64>, local: &DMatrix<f64>, idx: &[Option<usize>]) {
    let w = local.nrows();
    for comp in 0..2 {
        for i in 0..w {
            let Some(gi) = idx[comp * w + i] else { continue };
            for j in 0..w {
                if let Some(gj) = idx[comp * w + j] {
                    dense[(gi, gj)] += local[(i, j)];
                }
            }
        }
    }
}

/// Upper bound on the size of dense eigenproblems.
pub const DENSE_LIMIT: usize = 2000;

/// Smallest `β` with `sup_v b_h(v, q) / |||v|||_v ≥ β |||q|||_p` for all `q`
/// with `∫ p_h = 0`, where `|||q|||_p² = ‖q‖² + Σ_K h_K ‖q̄‖²_∂K`. Dense.
pub fn inf_sup_probe(mesh: &Mesh, cfg: &MethodConfig, spaces: &Spaces) -> Result<f64> {
    let vi = VelocityIndex::new(spaces);
    let np = spaces.cell_pressure.n_dofs();
    let nq = np + spaces.facet_pressure.n_dofs();
    if vi.n + nq > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dofs: vi.n + nq,
            limit: DENSE_LIMIT,
        });
    }
    let k = cfg.degree;
    let s = LocalSizes::new(k);
    let nf = k + 1;
    let mut x = DMatrix::zeros(vi.n, vi.n);
    let mut b = DMatrix::zeros(nq, vi.n);
    let mut p = DMatrix::zeros(nq, nq);
    let mut mean = DVector::zeros(nq);
    let rule = edge_rule(k);
    for cell in 0..mesh.n_cells() {
        let idx = vi.local(mesh, spaces, cell);
        scatter_vector_block(&mut x, &local_energy_gram(mesh, cell, k)?, &idx);
        let mut qidx: Vec<usize> = spaces.cell_pressure.nodes(cell).to_vec();
        for cf in mesh.cell_faces(cell) {
            qidx.extend(spaces.facet_pressure.nodes(cf.face).iter().map(|&n| np + n));
        }
        let lb = local_b(mesh, cell, k)?;
        for (r, &gr) in qidx.iter().enumerate() {
            for (c, gc) in idx.iter().enumerate() {
                if let Some(gc) = gc {
                    b[(gr, *gc)] += lb[(r, c)];
                }
            }
        }
        // ‖q‖²_K and h_K ‖q̄‖²_∂K
        let area = mesh.cell_area(cell)?;
        let h = mesh.cell_diameter(cell)?;
        let mut q = vec![0.0; s.cell_pressure];
        let vol = TriangleRule::exact_for(2 * k);
        for (xi, w) in vol.points.iter().zip(&vol.weights) {
            lagrange_triangle(k - 1, *xi, &mut q);
            for i in 0..s.cell_pressure {
                mean[qidx[i]] += w * 2.0 * area * q[i];
                for j in 0..s.cell_pressure {
                    p[(qidx[i], qidx[j])] += w * 2.0 * area * q[i] * q[j];
                }
            }
        }
        let mut psi = vec![0.0; nf];
        for local in 0..3 {
            for (_, t, w) in face_quadrature(mesh, cell, local, &rule) {
                lagrange_segment(k, t, &mut psi);
                for i in 0..nf {
                    for j in 0..nf {
                        let (gi, gj) = (qidx[s.cell_pressure + local * nf + i], qidx[s.cell_pressure + local * nf + j]);
                        p[(gi, gj)] += w * h * psi[i] * psi[j];
                    }
                }
            }
        }
    }
    let z = orthogonal_complement(&mean);
    let xc = x.cholesky().ok_or_else(|| Error::SingularSystem("velocity Gram matrix not positive definite".into()))?;
    let bz = &b.transpose() * &z;
    let s_mat = bz.transpose() * xc.solve(&bz);
    let pz = z.transpose() * &p * &z;
    smallest_generalized_eigenvalue(&s_mat, &pz).map(|l| l.max(0.0).sqrt())
}

/// Orthonormal basis of `{q : mᵀ q = 0}` from a Householder reflector.
fn orthogonal_complement(m: &DVector<f64>) -> DMatrix<f64> {
    let n = m.len();
    let norm = m.norm();
    let mut w = m.clone();
    w[0] -= norm;
    let ww = w.dot(&w);
    let mut h = DMatrix::identity(n, n);
    if ww > 0.0 {
        h -= (2.0 / ww) * &w * w.transpose();
    }
    h.columns(1, n - 1).into_owned()
}

/// Smallest `λ` with `A x = λ M x`, `M` symmetric positive definite.
fn smallest_generalized_eigenvalue(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let l = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("norm Gram matrix not positive definite".into()))?
        .l();
    let li = l
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("norm Gram matrix not invertible".into()))?;
    let mut c = &li * a * li.transpose();
    c = 0.5 * (&c + c.transpose());
    Ok(c.symmetric_eigen().eigenvalues.min())
}

/// Result of sampling `a_h(v, v) / |||v|||_v²` over random discrete fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivitySample {
    pub seed: u64,
    pub samples: usize,
    /// Minimum sampled Rayleigh quotient.
    pub min_quotient: f64,
    /// Minimum over the whole space (dense generalized eigenvalue), when small enough.
    pub exact_min: Option<f64>,
}

/// Samples `a_h(v, v) / |||v|||_v²` over `samples` random fields with free
/// cell and facet velocity dofs uniform in `[−1, 1]`.
pub fn coercivity_sampling(
    mesh: &Mesh,
    cfg: &MethodConfig,
    spaces: &Spaces,
    samples: usize,
    seed: u64,
) -> Result<CoercivitySample> {
    let vi = VelocityIndex::new(spaces);
    let locals = (0..mesh.n_cells())
        .map(|cell| -> Result<_> {
            Ok((
                vi.local(mesh, spaces, cell),
                local_a(mesh, cell, cfg)?,
                local_energy_gram(mesh, cell, cfg.degree)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_quotient = f64::INFINITY;
    for _ in 0..samples {
        let v: Vec<f64> = (0..vi.n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let (mut num, mut den) = (0.0, 0.0);
        for (idx, a, g) in &locals {
            let w = a.nrows();
            for comp in 0..2 {
                let local = DVector::from_iterator(w, (0..w).map(|i| idx[comp * w + i].map_or(0.0, |d| v[d])));
                num += local.dot(&(a * &local));
                den += local.dot(&(g * &local));
            }
        }
        min_quotient = min_quotient.min(num / den);
    }
    let exact_min = if vi.n <= DENSE_LIMIT {
        let mut a = DMatrix::zeros(vi.n, vi.n);
        let mut g = DMatrix::zeros(vi.n, vi.n);
        for (idx, la, lg) in &locals {
            scatter_vector_block(&mut a, la, idx);
            scatter_vector_block(&mut g, lg, idx);
        }
        Some(smallest_generalized_eigenvalue(&a, &g)?)
    } else {
        None
    };
    Ok(CoercivitySample {
        seed,
        samples,
        min_quotient,
        exact_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::LinearFlow;
    use crate::mesh::unit_square_mesh;
    use crate::spaces::{build_spaces, Method};
    use approx::assert_relative_eq;

    #[test]
    fn singular_quadrature_integrates_polynomials_and_r_inverse() {
        let m = unit_square_mesh(1).unwrap();
        let origin = [[0.0, 0.0]];
        let area: f64 = (0..2)
            .flat_map(|c| cell_quadrature(&m, c, &origin, SINGULAR_DEPTH))
            .map(|(_, w)| w)
            .sum();
        assert_relative_eq!(area, 1.0, epsilon = 1e-13);
        // ∫_{(0,1)²} 1/r = 2 asinh(1)
        let mut total = 0.0;
        for c in 0..2 {
            let geo = CellGeometry::new(&m, c);
            for (xi, w) in cell_quadrature(&m, c, &origin, SINGULAR_DEPTH) {
                let x = geo.to_physical(xi);
                total += w / x[0].hypot(x[1]);
            }
        }
        assert_relative_eq!(total, 2.0 * 1f64.asinh(), max_relative = 1e-3);
    }

    #[test]
    fn eoc_examples() {
        let r = eoc(&[4.0, 2.0, 1.0]);
        assert_eq!(r[0], None);
        assert_relative_eq!(r[1].unwrap(), 1.0);
        assert_relative_eq!(r[2].unwrap(), 1.0);
        assert!((eoc(&[7.2e-2, 2.2e-2])[1].unwrap() - 1.7).abs() < 0.05);
        assert!((eoc(&[4.5e-1, 3.2e-1])[1].unwrap() - 0.49).abs() < 0.01);
        assert_eq!(eoc(&[1.0, 0.0])[1], None);
        assert_eq!(final_rate(&eoc(&[4.0, 2.0, 1.0])), Some(1.0));
    }

    #[test]
    fn seminorms_of_linear_interpolant_vanish() {
        let m = unit_square_mesh(3).unwrap();
        let cfg = MethodConfig::new(Method::Hdg, 2, 1.0);
        let sp = build_spaces(&m, &cfg).unwrap();
        let flow = LinearFlow::patch();
        let cv = &sp.cell_velocity;
        let mut u = vec![0.0; cv.n_dofs()];
        let nodes = triangle_node_coords(2);
        for cell in 0..m.n_cells() {
            let geo = CellGeometry::new(&m, cell);
            for (i, &node) in cv.nodes(cell).iter().enumerate() {
                let v = flow.velocity(geo.to_physical(nodes[i]), None);
                u[cv.dof(node, 0)] = v[0];
                u[cv.dof(node, 1)] = v[1];
            }
        }
        assert!(gradient_jump_seminorm(cv, &u, &m) < 1e-13);
        assert!(normal_jump_sup(cv, &u, &m) < 1e-13);
        // interior faces contribute nothing; boundary faces carry the trace
        let interior_only: f64 = jump_seminorm(cv, &u, &m);
        assert!(interior_only > 0.0);
    }

    #[test]
    fn oscillation_matches_closed_form() {
        // ‖(3x², 3y²)‖² on the unit square is 18/5; every cell has h_K = √2/n
        let f = |x: Point| [3.0 * x[0] * x[0], 3.0 * x[1] * x[1]];
        let mut prev = None;
        for n in [1, 2, 4, 8] {
            let m = unit_square_mesh(n).unwrap();
            let osc = oscillation(&f, &m);
            assert_relative_eq!(osc, 2f64.sqrt() / n as f64 * 3.6f64.sqrt(), max_relative = 1e-12);
            if let Some(p) = prev {
                assert_relative_eq!(p / osc, 2.0, max_relative = 1e-12);
            }
            prev = Some(osc);
        }
    }

    #[test]
    fn inf_sup_positive_and_ordered() {
        let m = unit_square_mesh(2).unwrap();
        let hdg = MethodConfig::new(Method::Hdg, 1, 1.0);
        let edg = MethodConfig::new(Method::EdgHdg, 1, 1.0);
        let bh = inf_sup_probe(&m, &hdg, &build_spaces(&m, &hdg).unwrap()).unwrap();
        let be = inf_sup_probe(&m, &edg, &build_spaces(&m, &edg).unwrap()).unwrap();
        assert!(be > 0.0 && be <= bh + 1e-12, "{be} {bh}");
    }

    #[test]
    fn dense_guard() {
        let m = unit_square_mesh(16).unwrap();
        let cfg = MethodConfig::new(Method::Hdg, 2, 1.0);
        let sp = build_spaces(&m, &cfg).unwrap();
        assert!(matches!(inf_sup_probe(&m, &cfg, &sp), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn coercivity_is_seed_deterministic() {
        let m = unit_square_mesh(2).unwrap();
        let cfg = MethodConfig::new(Method::Hdg, 1, 1.0);
        let sp = build_spaces(&m, &cfg).unwrap();
        let a = coercivity_sampling(&m, &cfg, &sp, 20, 7).unwrap();
        let b = coercivity_sampling(&m, &cfg, &sp, 20, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.min_quotient > 0.0);
        let exact = a.exact_min.unwrap();
        assert!(exact <= a.min_quotient * (1.0 + 1e-12), "{exact} {}", a.min_quotient);
        let cfg = MethodConfig::new(Method::EdgHdg, 1, 1.0);
        let sp = build_spaces(&m, &cfg).unwrap();
        let c = coercivity_sampling(&m, &cfg, &sp, 20, 7).unwrap();
        let exact = c.exact_min.unwrap();
        assert!(exact > 0.0 && exact <= c.min_quotient * (1.0 + 1e-12), "{exact} {}", c.min_quotient);
    }

    // On diagonal-split squares the lowest-order HDG form needs alpha above
    // 4 + 2 sqrt(2), so the default alpha = 6 leaves a negative direction that
    // random sampling does not find.
    #[test]
    fn hdg_k1_penalty_threshold() {
        let m = unit_square_mesh(2).unwrap();
        let exact = |alpha| {
            let cfg = MethodConfig::new(Method::Hdg, 1, 1.0).with_alpha(alpha);
            let sp = build_spaces(&m, &cfg).unwrap();
            coercivity_sampling(&m, &cfg, &sp, 1, 0).unwrap().exact_min.unwrap()
        };
        assert!(exact(6.0) < 0.0);
        assert!(exact(7.0) > 0.0);
    }
}
