//! Element matrices for `a_h` and `b_h`, and the global saddle-point system.
//!
//! Unknowns of the full system are ordered as cell velocity, cell pressure,
//! facet velocity, facet pressure and the mean-value multiplier `μ`, so the
//! facet block (everything that survives static condensation) is a contiguous
//! tail.

use std::collections::HashMap;
use std::fmt::Write as _;

use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};

use crate::concurrency::map_cells;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{LineRule, TriangleRule};
use crate::spaces::{
    lagrange_segment, lagrange_triangle, lagrange_triangle_grad, triangle_nodes, CellGeometry, DirichletValues,
    MethodConfig, Spaces,
};

/// Body force `x ↦ f(x)`.
pub type Force<'a> = &'a (dyn Fn(Point) -> [f64; 2] + Sync);

/// Sizes of the local blocks on one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalSizes {
    /// Scalar `P_k` nodes of the cell.
    pub cell: usize,
    /// Scalar facet nodes on the three faces, `3(k + 1)`.
    pub facet: usize,
    /// Cell pressure nodes, `dim P_{k-1}`.
    pub cell_pressure: usize,
}

impl LocalSizes {
    pub fn new(degree: usize) -> Self {
        LocalSizes {
            cell: triangle_nodes(degree),
            facet: 3 * (degree + 1),
            cell_pressure: triangle_nodes(degree - 1),
        }
    }

    /// Interior (condensed away) unknowns: cell velocity and cell pressure.
    pub fn interior(&self) -> usize {
        2 * self.cell + self.cell_pressure
    }

    /// All unknowns of the element system, `μ` included.
    pub fn total(&self) -> usize {
        self.interior() + 2 * self.facet + self.facet + 1
    }

    pub fn cell_velocity(&self, comp: usize, i: usize) -> usize {
        comp * self.cell + i
    }

    pub fn cell_pressure(&self, j: usize) -> usize {
        2 * self.cell + j
    }

    /// `s = face * (k + 1) + m`
    pub fn facet_velocity(&self, comp: usize, s: usize) -> usize {
        self.interior() + comp * self.facet + s
    }

    pub fn facet_pressure(&self, s: usize) -> usize {
        self.interior() + 2 * self.facet + s
    }

    pub fn multiplier(&self) -> usize {
        self.total() - 1
    }
}

/// `a_h` and `b_h` restricted to one cell, plus the load.
///
/// `a` is the scalar matrix over `[cell nodes, facet nodes]`; the vector form is
/// block diagonal with one copy per component. `b` has one row per pressure
/// node `[cell pressure, facet pressure]` and one column per velocity dof,
/// column `comp * (cell + facet) + s` with `s` running over `[cell, facet]`.
#[derive(Debug, Clone)]
pub struct LocalBlocks {
    pub sizes: LocalSizes,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// `∫_K f · φ`, index `comp * cell + i`.
    pub load: DVector<f64>,
}

impl LocalBlocks {
    pub fn a_kk(&self) -> DMatrix<f64> {
        let n = self.sizes.cell;
        self.a.view((0, 0), (n, n)).into_owned()
    }

    pub fn a_kf(&self) -> DMatrix<f64> {
        let (n, m) = (self.sizes.cell, self.sizes.facet);
        self.a.view((0, n), (n, m)).into_owned()
    }

    pub fn a_ff(&self) -> DMatrix<f64> {
        let (n, m) = (self.sizes.cell, self.sizes.facet);
        self.a.view((n, n), (m, m)).into_owned()
    }

    /// Cell velocity against cell pressure.
    pub fn b_k(&self) -> DMatrix<f64> {
        let s = self.sizes;
        let w = s.cell + s.facet;
        DMatrix::from_fn(s.cell_pressure, 2 * s.cell, |r, c| self.b[(r, (c / s.cell) * w + c % s.cell)])
    }

    /// Cell velocity against facet pressure.
    pub fn b_f(&self) -> DMatrix<f64> {
        let s = self.sizes;
        let w = s.cell + s.facet;
        DMatrix::from_fn(s.facet, 2 * s.cell, |r, c| {
            self.b[(s.cell_pressure + r, (c / s.cell) * w + c % s.cell)]
        })
    }
}

/// Quadrature points on local face `local` of `cell`: physical point, face
/// parameter `t` (from `face.vertices[0]`), weight including `|F|`.
pub(crate) fn face_quadrature(mesh: &Mesh, cell: usize, local: usize, rule: &LineRule) -> Vec<(Point, f64, f64)> {
    let face = &mesh.faces()[mesh.cell_faces(cell)[local].face];
    let a = mesh.vertices()[face.vertices[0]];
    let b = mesh.vertices()[face.vertices[1]];
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], t, w * face.diameter))
        .collect()
}

pub(crate) fn edge_rule(degree: usize) -> LineRule {
    LineRule::gauss((2 * degree + 1).div_ceil(2) + 1)
}

/// The three terms of the scalar `a_h` on one cell, over `[cell nodes, facet nodes]`.
#[derive(Debug, Clone)]
pub struct LocalAParts {
    /// `∫_K ∇v·∇w`
    pub stiffness: DMatrix<f64>,
    /// `h_K⁻¹ ∫_∂K (v−v̄)(w−w̄)`
    pub penalty: DMatrix<f64>,
    /// `−∫_∂K [(v−v̄) ∂_n w + (w−w̄) ∂_n v]`
    pub consistency: DMatrix<f64>,
}

pub fn local_a_parts(mesh: &Mesh, cell: usize, degree: usize) -> Result<LocalAParts> {
    let k = degree;
    let s = LocalSizes::new(k);
    let n = s.cell + s.facet;
    let geo = CellGeometry::new(mesh, cell);
    let area = mesh.cell_area(cell)?;
    let h = mesh.cell_diameter(cell)?;
    let mut stiffness = DMatrix::zeros(n, n);
    let mut penalty = DMatrix::zeros(n, n);
    let mut consistency = DMatrix::zeros(n, n);

    let mut ref_grad = vec![[0.0; 2]; s.cell];
    let vol = TriangleRule::exact_for(2 * k);
    for (xi, w) in vol.points.iter().zip(&vol.weights) {
        lagrange_triangle_grad(k, *xi, &mut ref_grad);
        let g: Vec<[f64; 2]> = ref_grad.iter().map(|r| geo.physical_gradient(*r)).collect();
        let wt = w * 2.0 * area;
        for i in 0..s.cell {
            for j in 0..s.cell {
                stiffness[(i, j)] += wt * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }

    let rule = edge_rule(k);
    let nf = k + 1;
    let mut phi = vec![0.0; s.cell];
    let mut psi = vec![0.0; nf];
    let mut d = vec![0.0; n];
    let mut dn = vec![0.0; n];
    for local in 0..3 {
        let normal = mesh.outward_normal(cell, local)?;
        for (x, t, w) in face_quadrature(mesh, cell, local, &rule) {
            let xi = geo.to_reference(x);
            lagrange_triangle(k, xi, &mut phi);
            lagrange_triangle_grad(k, xi, &mut ref_grad);
            lagrange_segment(k, t, &mut psi);
            d.fill(0.0);
            dn.fill(0.0);
            for i in 0..s.cell {
                d[i] = phi[i];
                let g = geo.physical_gradient(ref_grad[i]);
                dn[i] = g[0] * normal[0] + g[1] * normal[1];
            }
            for m in 0..nf {
                d[s.cell + local * nf + m] = -psi[m];
            }
            for i in 0..n {
                for j in 0..n {
                    penalty[(i, j)] += w / h * d[i] * d[j];
                    consistency[(i, j)] -= w * (d[i] * dn[j] + dn[i] * d[j]);
                }
            }
        }
    }
    Ok(LocalAParts {
        stiffness,
        penalty,
        consistency,
    })
}

/// Scalar `a_h` on one cell:
/// `∫_K ∇v·∇w + (α/h_K)∫_∂K (v−v̄)(w−w̄) − ∫_∂K [(v−v̄) ∂_n w + (w−w̄) ∂_n v]`.
pub fn local_a(mesh: &Mesh, cell: usize, cfg: &MethodConfig) -> Result<DMatrix<f64>> {
    let p = local_a_parts(mesh, cell, cfg.degree)?;
    Ok(p.stiffness + p.penalty * cfg.alpha + p.consistency)
}

/// `b_h` on one cell: `−∫_K (∇·v) q + ∫_∂K (v·n_K) q̄`, and on faces lying on
/// `∂Ω` additionally `−∫_F (v̄·n_K) q̄`.
///
/// The boundary term makes the facet pressure enforce `(v − v̄)·n = 0` on `∂Ω`,
/// so inhomogeneous Dirichlet data enter consistently; it vanishes for
/// homogeneous data.
pub fn local_b(mesh: &Mesh, cell: usize, degree: usize) -> Result<DMatrix<f64>> {
    let k = degree;
    let s = LocalSizes::new(k);
    let w_v = s.cell + s.facet;
    let geo = CellGeometry::new(mesh, cell);
    let area = mesh.cell_area(cell)?;
    let mut b = DMatrix::zeros(s.cell_pressure + s.facet, 2 * w_v);

    let mut ref_grad = vec![[0.0; 2]; s.cell];
    let mut q = vec![0.0; s.cell_pressure];
    let vol = TriangleRule::exact_for(2 * k);
    for (xi, w) in vol.points.iter().zip(&vol.weights) {
        lagrange_triangle_grad(k, *xi, &mut ref_grad);
        lagrange_triangle(k - 1, *xi, &mut q);
        let wt = w * 2.0 * area;
        for i in 0..s.cell {
            let g = geo.physical_gradient(ref_grad[i]);
            for (r, &qr) in q.iter().enumerate() {
                for comp in 0..2 {
                    b[(r, comp * w_v + i)] -= wt * g[comp] * qr;
                }
            }
        }
    }

    let rule = edge_rule(k);
    let nf = k + 1;
    let mut phi = vec![0.0; s.cell];
    let mut psi = vec![0.0; nf];
    for local in 0..3 {
        let normal = mesh.outward_normal(cell, local)?;
        let boundary = mesh.faces()[mesh.cell_faces(cell)[local].face].is_boundary();
        for (x, t, w) in face_quadrature(mesh, cell, local, &rule) {
            lagrange_triangle(k, geo.to_reference(x), &mut phi);
            lagrange_segment(k, t, &mut psi);
            for (m, &qm) in psi.iter().enumerate() {
                let row = s.cell_pressure + local * nf + m;
                for comp in 0..2 {
                    for i in 0..s.cell {
                        b[(row, comp * w_v + i)] += w * phi[i] * normal[comp] * qm;
                    }
                    if boundary {
                        for (mm, &pm) in psi.iter().enumerate() {
                            b[(row, comp * w_v + s.cell + local * nf + mm)] -= w * pm * normal[comp] * qm;
                        }
                    }
                }
            }
        }
    }
    Ok(b)
}

/// `∫_K f · φ_i` for the cell velocity basis.
pub fn local_load(mesh: &Mesh, cell: usize, degree: usize, force: Force<'_>) -> Result<DVector<f64>> {
    let n = triangle_nodes(degree);
    let geo = CellGeometry::new(mesh, cell);
    let area = mesh.cell_area(cell)?;
    let mut load = DVector::zeros(2 * n);
    let mut phi = vec![0.0; n];
    let rule = TriangleRule::exact_for(2 * degree + 2);
    for (xi, w) in rule.points.iter().zip(&rule.weights) {
        let x = geo.to_physical(*xi);
        let f = force(x);
        if !(f[0].is_finite() && f[1].is_finite()) {
            return Err(Error::NonFiniteForce { x: x[0], y: x[1] });
        }
        lagrange_triangle(degree, *xi, &mut phi);
        let wt = w * 2.0 * area;
        for i in 0..n {
            load[i] += wt * f[0] * phi[i];
            load[n + i] += wt * f[1] * phi[i];
        }
    }
    Ok(load)
}

/// `∫_K q_j` for the cell pressure basis.
pub fn pressure_means(mesh: &Mesh, cell: usize, degree: usize) -> Result<Vec<f64>> {
    let n = triangle_nodes(degree - 1);
    let area = mesh.cell_area(cell)?;
    let mut q = vec![0.0; n];
    let mut out = vec![0.0; n];
    let rule = TriangleRule::exact_for(degree - 1);
    for (xi, w) in rule.points.iter().zip(&rule.weights) {
        lagrange_triangle(degree - 1, *xi, &mut q);
        for j in 0..n {
            out[j] += w * 2.0 * area * q[j];
        }
    }
    Ok(out)
}

pub fn local_blocks(mesh: &Mesh, cell: usize, cfg: &MethodConfig, force: Force<'_>) -> Result<LocalBlocks> {
    Ok(LocalBlocks {
        sizes: LocalSizes::new(cfg.degree),
        a: local_a(mesh, cell, cfg)?,
        b: local_b(mesh, cell, cfg.degree)?,
        load: local_load(mesh, cell, cfg.degree, force)?,
    })
}

/// Switches for deliberately broken systems used as negative controls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Drop the facet-pressure part of `b_h`; facet pressures are then pinned to 0.
    pub drop_facet_pressure: bool,
}

/// Global offsets of the unknown groups of the full system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Offsets {
    pub u: usize,
    pub p: usize,
    pub ubar: usize,
    pub pbar: usize,
    pub mu: usize,
    pub total: usize,
}

impl Offsets {
    pub fn new(spaces: &Spaces) -> Self {
        let u = 0;
        let p = u + spaces.cell_velocity.n_dofs();
        let ubar = p + spaces.cell_pressure.n_dofs();
        let pbar = ubar + spaces.facet_velocity.n_dofs();
        let mu = pbar + spaces.facet_pressure.n_dofs();
        Offsets {
            u,
            p,
            ubar,
            pbar,
            mu,
            total: mu + 1,
        }
    }

    /// Number of unknowns left after eliminating cell velocity and pressure.
    pub fn n_facet(&self) -> usize {
        self.total - self.ubar
    }
}

/// Element system of one cell in the local ordering of [`LocalSizes`], with
/// the full-system index of every local unknown.
#[derive(Debug, Clone)]
pub struct ElementSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub dofs: Vec<usize>,
    pub sizes: LocalSizes,
}

/// Full-system indices of the local unknowns of `cell`.
pub fn cell_dofs(mesh: &Mesh, spaces: &Spaces, cell: usize, off: &Offsets) -> Vec<usize> {
    let s = LocalSizes::new(spaces.degree());
    let nf = spaces.degree() + 1;
    let mut dofs = vec![0; s.total()];
    let cv = &spaces.cell_velocity;
    for (i, &node) in cv.nodes(cell).iter().enumerate() {
        for comp in 0..2 {
            dofs[s.cell_velocity(comp, i)] = off.u + cv.dof(node, comp);
        }
    }
    for (j, &node) in spaces.cell_pressure.nodes(cell).iter().enumerate() {
        dofs[s.cell_pressure(j)] = off.p + node;
    }
    for (local, cf) in mesh.cell_faces(cell).iter().enumerate() {
        let fv = &spaces.facet_velocity;
        for (m, &node) in fv.nodes(cf.face).iter().enumerate() {
            for comp in 0..2 {
                dofs[s.facet_velocity(comp, local * nf + m)] = off.ubar + fv.dof(node, comp);
            }
        }
        for (m, &node) in spaces.facet_pressure.nodes(cf.face).iter().enumerate() {
            dofs[s.facet_pressure(local * nf + m)] = off.pbar + node;
        }
    }
    dofs[s.multiplier()] = off.mu;
    dofs
}

/// `ν a_h`, `b_h`, the mean-value row and the load, arranged as one
/// symmetric element matrix.
pub fn element_system(
    mesh: &Mesh,
    cfg: &MethodConfig,
    spaces: &Spaces,
    cell: usize,
    force: Force<'_>,
    opts: &AssemblyOptions,
) -> Result<ElementSystem> {
    let blocks = local_blocks(mesh, cell, cfg, force)?;
    let s = blocks.sizes;
    let n = s.total();
    let w_v = s.cell + s.facet;
    let velocity = |comp: usize, i: usize| {
        if i < s.cell {
            s.cell_velocity(comp, i)
        } else {
            s.facet_velocity(comp, i - s.cell)
        }
    };
    let mut e = DMatrix::zeros(n, n);
    for comp in 0..2 {
        for i in 0..w_v {
            for j in 0..w_v {
                e[(velocity(comp, i), velocity(comp, j))] = cfg.nu * blocks.a[(i, j)];
            }
        }
    }
    for r in 0..s.cell_pressure + s.facet {
        let row = if r < s.cell_pressure {
            s.cell_pressure(r)
        } else {
            if opts.drop_facet_pressure {
                continue;
            }
            s.facet_pressure(r - s.cell_pressure)
        };
        for c in 0..2 * w_v {
            let col = velocity(c / w_v, c % w_v);
            let v = blocks.b[(r, c)];
            e[(row, col)] = v;
            e[(col, row)] = v;
        }
    }
    for (j, m) in pressure_means(mesh, cell, cfg.degree)?.into_iter().enumerate() {
        e[(s.cell_pressure(j), s.multiplier())] = m;
        e[(s.multiplier(), s.cell_pressure(j))] = m;
    }
    let mut rhs = DVector::zeros(n);
    for comp in 0..2 {
        for i in 0..s.cell {
            rhs[s.cell_velocity(comp, i)] = blocks.load[comp * s.cell + i];
        }
    }
    Ok(ElementSystem {
        matrix: e,
        rhs,
        dofs: cell_dofs(mesh, spaces, cell, &Offsets::new(spaces)),
        sizes: s,
    })
}

/// Checks `bc` against the facet velocity layout and returns the prescribed
/// value of every constrained dof, indexed by facet velocity dof.
pub(crate) fn checked_boundary_values(mesh: &Mesh, spaces: &Spaces, bc: &DirichletValues) -> Result<Vec<Option<f64>>> {
    let fv = &spaces.facet_velocity;
    if bc.values.len() != fv.n_dofs() {
        return Err(Error::InvalidArgument(format!(
            "boundary data has {} entries, facet velocity layout has {} dofs",
            bc.values.len(),
            fv.n_dofs()
        )));
    }
    let mut out = vec![None; fv.n_dofs()];
    for d in fv.constrained_dofs() {
        let v = bc.get(d).ok_or(Error::MissingBoundaryValue(d))?;
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("boundary value of dof {d} is not finite")));
        }
        out[d] = Some(v);
    }
    let (net, abs) = bc.boundary_flux(mesh, fv);
    if net.abs() > 1e-10 * abs.max(1.0) {
        return Err(Error::IncompatibleFlux(net));
    }
    Ok(out)
}

/// Symmetric Dirichlet elimination on a triplet list: constrained rows and
/// columns are removed, column contributions move to the right-hand side and
/// constrained unknowns get a unit diagonal with the prescribed value.
/// Returns the matrix and the lifted contribution `−M[:, D] g`.
pub(crate) fn eliminate(
    n: usize,
    triplets: &[Triplet<usize, usize, f64>],
    rhs: &mut [f64],
    fixed: &[Option<f64>],
) -> Result<(SparseColMat<usize, f64>, Vec<f64>)> {
    let mut kept = Vec::with_capacity(triplets.len() + n);
    let mut lift = vec![0.0; n];
    for t in triplets {
        if fixed[t.row].is_some() {
            continue;
        }
        if let Some(g) = fixed[t.col] {
            lift[t.row] -= t.val * g;
            continue;
        }
        kept.push(*t);
    }
    for (i, g) in fixed.iter().enumerate() {
        if let Some(g) = g {
            kept.push(Triplet::new(i, i, 1.0));
            rhs[i] = *g;
        } else {
            rhs[i] += lift[i];
        }
    }
    let matrix = SparseColMat::try_new_from_triplets(n, n, &kept)
        .map_err(|e| Error::SingularSystem(format!("cannot build sparse matrix: {e:?}")))?;
    Ok((matrix, lift))
}

/// The assembled full saddle-point system.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
    pub offsets: Offsets,
    /// Eliminated unknowns (full-system index) and their values.
    pub dirichlet: Vec<(usize, f64)>,
    /// Right-hand side contribution of the eliminated values.
    pub lift: Vec<f64>,
    /// `∫_K q` for every cell pressure dof (the multiplier row).
    pub mean_weights: Vec<f64>,
    pub cfg: MethodConfig,
    pub spaces: Spaces,
}

impl SaddleSystem {
    pub fn n(&self) -> usize {
        self.offsets.total
    }

    /// `max |M − Mᵀ|`
    pub fn max_asymmetry(&self) -> f64 {
        max_asymmetry(&self.matrix)
    }

    /// Coordinate dump, one `row col value` line per stored entry.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for t in self.matrix.triplet_iter() {
            writeln!(out, "{} {} {:?}", t.row, t.col, t.val).unwrap();
        }
        out
    }
}

pub fn max_asymmetry(m: &SparseColMat<usize, f64>) -> f64 {
    let entries: HashMap<(usize, usize), f64> = m.triplet_iter().map(|t| ((t.row, t.col), *t.val)).collect();
    entries
        .iter()
        .map(|(&(r, c), &v)| (v - entries.get(&(c, r)).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// `y = M x`
pub fn matvec(m: &SparseColMat<usize, f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.nrows()];
    let (col_ptr, row_idx, val) = (m.col_ptr(), m.row_idx(), m.val());
    for (j, &xj) in x.iter().enumerate() {
        for p in col_ptr[j]..col_ptr[j + 1] {
            y[row_idx[p]] += val[p] * xj;
        }
    }
    y
}

/// Assembles the full system `[ν A, Bᵀ; B, 0]` with the mean-value multiplier
/// and eliminates the Dirichlet facet velocities.
pub fn assemble(
    mesh: &Mesh,
    cfg: &MethodConfig,
    spaces: &Spaces,
    force: Force<'_>,
    bc: &DirichletValues,
) -> Result<SaddleSystem> {
    assemble_with(mesh, cfg, spaces, force, bc, &AssemblyOptions::default())
}

pub fn assemble_with(
    mesh: &Mesh,
    cfg: &MethodConfig,
    spaces: &Spaces,
    force: Force<'_>,
    bc: &DirichletValues,
    opts: &AssemblyOptions,
) -> Result<SaddleSystem> {
    cfg.validate()?;
    let boundary = checked_boundary_values(mesh, spaces, bc)?;
    let off = Offsets::new(spaces);
    let elements = map_cells(mesh.n_cells(), |k| element_system(mesh, cfg, spaces, k, force, opts));

    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; off.total];
    let mut mean_weights = vec![0.0; spaces.cell_pressure.n_dofs()];
    for el in elements {
        let el = el?;
        let s = el.sizes;
        for (i, &gi) in el.dofs.iter().enumerate() {
            rhs[gi] += el.rhs[i];
            for (j, &gj) in el.dofs.iter().enumerate() {
                let v = el.matrix[(i, j)];
                if v != 0.0 {
                    triplets.push(Triplet::new(gi, gj, v));
                }
            }
        }
        for j in 0..s.cell_pressure {
            mean_weights[el.dofs[s.cell_pressure(j)] - off.p] = el.matrix[(s.cell_pressure(j), s.multiplier())];
        }
    }
    if opts.drop_facet_pressure {
        for d in off.pbar..off.mu {
            triplets.push(Triplet::new(d, d, 1.0));
        }
    }

    let mut fixed = vec![None; off.total];
    let mut dirichlet = Vec::new();
    for (d, v) in boundary.iter().enumerate() {
        if let Some(v) = v {
            fixed[off.ubar + d] = Some(*v);
            dirichlet.push((off.ubar + d, *v));
        }
    }
    let (matrix, lift) = eliminate(off.total, &triplets, &mut rhs, &fixed)?;
    Ok(SaddleSystem {
        matrix,
        rhs,
        offsets: off,
        dirichlet,
        lift,
        mean_weights,
        cfg: *cfg,
        spaces: spaces.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_square_mesh, Domain};
    use crate::spaces::{build_spaces, Method};
    use approx::assert_abs_diff_eq;

    fn reference_mesh() -> Mesh {
        Mesh::from_cells(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![],
            Domain::Custom,
        )
        .unwrap()
    }

    fn zero_force(_: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    #[test]
    fn constants_are_in_the_kernel_of_a() {
        let m = unit_square_mesh(2).unwrap();
        for k in 1..=2 {
            let cfg = MethodConfig::new(Method::Hdg, k, 1.0);
            for cell in 0..m.n_cells() {
                let a = local_a(&m, cell, &cfg).unwrap();
                let ones = DVector::from_element(a.nrows(), 1.0);
                assert!((&a * &ones).amax() < 1e-12);
                assert!((&a - a.transpose()).amax() < 1e-13);
            }
        }
    }

    #[test]
    fn penalty_is_linear_in_alpha() {
        let m = reference_mesh();
        let cfg = MethodConfig::new(Method::Hdg, 1, 1.0);
        let a1 = local_a(&m, 0, &cfg).unwrap();
        let a2 = local_a(&m, 0, &cfg.with_alpha(2.0 * cfg.alpha)).unwrap();
        let parts = local_a_parts(&m, 0, 1).unwrap();
        assert!(((&a2 - &a1) - parts.penalty * cfg.alpha).amax() < 1e-12);
        assert!((&a2 - &a1).amax() > 1.0);
    }

    #[test]
    fn divergence_terms_on_reference_triangle() {
        let m = reference_mesh();
        let b = local_b(&m, 0, 1).unwrap();
        let s = LocalSizes::new(1);
        let w = s.cell + s.facet;
        // v = x: nodal values (0,0), (1,0), (0,1)
        let mut v = DVector::zeros(2 * w);
        v[1] = 1.0;
        v[w + 2] = 1.0;
        assert_abs_diff_eq!((&b * &v)[0], -1.0, epsilon = 1e-14);
        // v = (y, x) is divergence free
        let mut v = DVector::zeros(2 * w);
        v[2] = 1.0;
        v[w + 1] = 1.0;
        assert_abs_diff_eq!((&b * &v)[0], 0.0, epsilon = 1e-14);
        // v = (1, 0), v̄ = 0, q̄ = 1: per-face fluxes (0, 1, −1) sum to zero
        let mut v = DVector::zeros(2 * w);
        v.rows_mut(0, s.cell).fill(1.0);
        let bv = &b * &v;
        let faces: Vec<f64> = (0..3).map(|f| bv[1 + 2 * f] + bv[2 + 2 * f]).collect();
        assert_abs_diff_eq!(faces[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(faces[1], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(faces[2], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn boundary_facet_velocity_cancels_cell_flux() {
        let m = reference_mesh();
        let b = local_b(&m, 0, 2).unwrap();
        // v = v̄ = const: every facet-pressure row vanishes on boundary faces
        let s = LocalSizes::new(2);
        let w = s.cell + s.facet;
        let mut v = DVector::zeros(2 * w);
        v.rows_mut(0, w).fill(0.3);
        v.rows_mut(w, w).fill(-1.1);
        let bv = &b * &v;
        assert!(bv.rows(s.cell_pressure, s.facet).amax() < 1e-14);
    }

    #[test]
    fn element_system_is_symmetric() {
        let m = unit_square_mesh(2).unwrap();
        for method in [Method::Hdg, Method::EdgHdg, Method::Edg] {
            for k in 1..=2 {
                let cfg = MethodConfig::new(method, k, 0.3);
                let sp = build_spaces(&m, &cfg).unwrap();
                let el = element_system(&m, &cfg, &sp, 3, &zero_force, &AssemblyOptions::default()).unwrap();
                assert!((&el.matrix - el.matrix.transpose()).amax() < 1e-14);
                assert_eq!(el.dofs.len(), el.sizes.total());
            }
        }
    }

    #[test]
    fn assembled_matrix_is_symmetric() {
        let m = unit_square_mesh(2).unwrap();
        let cfg = MethodConfig::new(Method::EdgHdg, 2, 1.0);
        let sp = build_spaces(&m, &cfg).unwrap();
        let bc = DirichletValues::zeros(&sp.facet_velocity);
        let sys = assemble(&m, &cfg, &sp, &zero_force, &bc).unwrap();
        assert!(sys.max_asymmetry() <= 1e-14);
        assert!(sys.rhs.iter().all(|&r| r == 0.0));
        let total: f64 = sys.mean_weights.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn missing_and_incompatible_boundary_data_rejected() {
        let m = unit_square_mesh(1).unwrap();
        let cfg = MethodConfig::new(Method::Hdg, 1, 1.0);
        let sp = build_spaces(&m, &cfg).unwrap();
        let mut bc = DirichletValues::zeros(&sp.facet_velocity);
        let d = sp.facet_velocity.constrained_dofs().next().unwrap();
        bc.values[d] = None;
        assert!(matches!(
            assemble(&m, &cfg, &sp, &zero_force, &bc),
            Err(Error::MissingBoundaryValue(x)) if x == d
        ));
        // uniform inflow u = (1, 0) through the left side only
        let mut bc = DirichletValues::zeros(&sp.facet_velocity);
        let coords = crate::spaces::facet_node_coordinates(&m, &sp.facet_velocity);
        for (node, x) in coords.iter().enumerate() {
            if x[0] == 0.0 {
                bc.values[sp.facet_velocity.dof(node, 0)] = Some(1.0);
            }
        }
        assert!(matches!(
            assemble(&m, &cfg, &sp, &zero_force, &bc),
            Err(Error::IncompatibleFlux(_))
        ));
    }

    #[test]
    fn nan_force_rejected() {
        let m = unit_square_mesh(1).unwrap();
        let cfg = MethodConfig::new(Method::Hdg, 1, 1.0);
        let sp = build_spaces(&m, &cfg).unwrap();
        let bc = DirichletValues::zeros(&sp.facet_velocity);
        let f = |_: Point| [f64::NAN, 0.0];
        assert!(matches!(
            assemble(&m, &cfg, &sp, &f, &bc),
            Err(Error::NonFiniteForce { .. })
        ));
    }

    #[test]
    fn coordinate_dump_lists_every_entry() {
        let m = unit_square_mesh(1).unwrap();
        let cfg = MethodConfig::new(Method::Hdg, 1, 1.0);
        let sp = build_spaces(&m, &cfg).unwrap();
        let bc = DirichletValues::zeros(&sp.facet_velocity);
        let sys = assemble(&m, &cfg, &sp, &zero_force, &bc).unwrap();
        let text = sys.to_coordinate_text();
        assert_eq!(text.lines().count(), sys.matrix.compute_nnz());
        let first: Vec<&str> = text.lines().next().unwrap().split(' ').collect();
        assert_eq!(first.len(), 3);
    }
}
