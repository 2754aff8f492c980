//! Direct solution of the saddle-point system, either in full or after
//! static condensation of the cell unknowns.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::assembly::{
    checked_boundary_values, element_system, eliminate, matvec, AssemblyOptions, Force, Offsets, SaddleSystem,
};
use crate::concurrency::map_cells;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::spaces::{DirichletValues, MethodConfig, Spaces};

/// Coefficients of `(u_h, ū_h, p_h, p̄_h)` in the layouts of `spaces`.
#[derive(Debug, Clone)]
pub struct DiscreteStokesSolution {
    pub u: Vec<f64>,
    pub ubar: Vec<f64>,
    pub p: Vec<f64>,
    pub pbar: Vec<f64>,
    /// Value of the mean-value multiplier.
    pub multiplier: f64,
    pub cfg: MethodConfig,
    pub spaces: Spaces,
    /// Size of the linear system that was factorized.
    pub global_dofs: usize,
}

impl DiscreteStokesSolution {
    fn from_full(x: &[f64], off: &Offsets, cfg: MethodConfig, spaces: Spaces, global_dofs: usize) -> Self {
        DiscreteStokesSolution {
            u: x[off.u..off.p].to_vec(),
            p: x[off.p..off.ubar].to_vec(),
            ubar: x[off.ubar..off.pbar].to_vec(),
            pbar: x[off.pbar..off.mu].to_vec(),
            multiplier: x[off.mu],
            cfg,
            spaces,
            global_dofs,
        }
    }

    /// All coefficients in full-system order.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.u.len() + self.p.len() + self.ubar.len() + self.pbar.len() + 1);
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.p);
        x.extend_from_slice(&self.ubar);
        x.extend_from_slice(&self.pbar);
        x.push(self.multiplier);
        x
    }

    /// Shifts `p_h` and `p̄_h` by the same constant so that `∫ p_h = 0`.
    fn recenter(&mut self, weights: &[f64]) {
        let area: f64 = weights.iter().sum();
        let mean = weights.iter().zip(&self.p).map(|(w, p)| w * p).sum::<f64>() / area;
        self.p.iter_mut().for_each(|p| *p -= mean);
        self.pbar.iter_mut().for_each(|p| *p -= mean);
    }

    /// `∫ p_h / |Ω|`
    pub fn pressure_mean(&self, mesh: &Mesh) -> Result<f64> {
        let mut total = 0.0;
        for cell in 0..mesh.n_cells() {
            let w = crate::assembly::pressure_means(mesh, cell, self.cfg.degree)?;
            for (j, &node) in self.spaces.cell_pressure.nodes(cell).iter().enumerate() {
                total += w[j] * self.p[node];
            }
        }
        Ok(total / mesh.total_area())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lower triangle of a structurally symmetric CSC matrix.
fn lower_triangle(m: &SparseColMat<usize, f64>) -> Result<SparseColMat<usize, f64>> {
    let mut t = Vec::with_capacity(m.compute_nnz() / 2 + m.ncols());
    for j in 0..m.ncols() {
        let col = m.col_range(j);
        let rows = &m.symbolic().row_idx()[col.clone()];
        let vals = &m.val()[col];
        for (&i, &v) in rows.iter().zip(vals) {
            if i >= j {
                t.push(Triplet::new(i, j, v));
            }
        }
    }
    SparseColMat::try_new_from_triplets(m.nrows(), m.ncols(), &t)
        .map_err(|e| Error::SingularSystem(format!("{e:?}")))
}

/// Solves with a sparse Bunch-Kaufman LBLᵀ factorization (AMD ordering).
fn lblt_solve(m: &SparseColMat<usize, f64>, b: &[f64], steps: usize) -> Result<Vec<f64>> {
    use faer::dyn_stack::{MemBuffer, MemStack};
    use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, SymmetricOrdering};
    use faer::{Conj, Par, Side};

    let n = b.len();
    let lower = lower_triangle(m)?;
    let symbolic = factorize_symbolic_cholesky(lower.symbolic(), Side::Lower, SymmetricOrdering::Amd, Default::default())
        .map_err(|e| Error::SingularSystem(format!("symbolic factorization: {e:?}")))?;
    let mut l_val = vec![0.0; symbolic.len_val()];
    let mut subdiag = vec![0.0; n];
    let mut fwd = vec![0usize; n];
    let mut bwd = vec![0usize; n];
    let scratch = symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, Default::default());
    let lblt = symbolic.factorize_numeric_intranode_lblt(
        &mut l_val,
        &mut subdiag,
        &mut fwd,
        &mut bwd,
        lower.rb(),
        Side::Lower,
        Par::Seq,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    );
    let mut solve_scratch = MemBuffer::new(lblt.solve_in_place_scratch::<f64>(1, Par::Seq));
    let mut solve = |rhs: &[f64]| -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        lblt.solve_in_place_with_conj(Conj::No, x.as_mut(), Par::Seq, MemStack::new(&mut solve_scratch));
        (0..n).map(|i| x[(i, 0)]).collect()
    };
    refine(m, b, &mut solve, steps)
}

/// Sparse LU (COLAMD ordering).
fn lu_solve(m: &SparseColMat<usize, f64>, b: &[f64], steps: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let lu = m
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("{e:?} (penalty too small or broken mesh?)")))?;
    let mut solve = |rhs: &[f64]| -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        lu.solve_in_place(x.as_mut());
        (0..n).map(|i| x[(i, 0)]).collect()
    };
    refine(m, b, &mut solve, steps)
}

fn refine(
    m: &SparseColMat<usize, f64>,
    b: &[f64],
    solve: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    steps: usize,
) -> Result<Vec<f64>> {
    let residual = |x: &[f64]| -> Vec<f64> { matvec(m, x).iter().zip(b).map(|(mx, bi)| bi - mx).collect() };
    let mut x = solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("factorization produced non-finite values".into()));
    }
    for _ in 0..steps {
        let corr = solve(&residual(&x));
        for (xi, c) in x.iter_mut().zip(corr) {
            *xi += c;
        }
    }
    let res = norm(&residual(&x));
    let tol = 1e-10 * (1.0 + norm(b));
    if !(res <= tol) {
        return Err(Error::Residual {
            residual: res,
            tolerance: tol,
        });
    }
    Ok(x)
}

/// Direct solve of a symmetric indefinite system followed by iterative
/// refinement and a residual check `‖Mx − b‖ ≤ 1e-10 (1 + ‖b‖)`.
///
/// Uses sparse LBLᵀ with pivoting inside supernodes. If that misses the
/// residual tolerance (a pivot the intranode search could not fix), the
/// system is refactorized with sparse LU.
pub fn sparse_solve(m: &SparseColMat<usize, f64>, b: &[f64]) -> Result<Vec<f64>> {
    match lblt_solve(m, b, 2) {
        Ok(x) => Ok(x),
        Err(_) => lu_solve(m, b, 1),
    }
}

/// Factorizes the full system and returns the mean-free solution.
pub fn solve_full(sys: &SaddleSystem) -> Result<DiscreteStokesSolution> {
    let x = sparse_solve(&sys.matrix, &sys.rhs)?;
    let mut sol = DiscreteStokesSolution::from_full(&x, &sys.offsets, sys.cfg, sys.spaces.clone(), sys.n());
    sol.recenter(&sys.mean_weights);
    Ok(sol)
}

/// Per-cell data for recovering the interior unknowns: `x_I = z − Y x_X`.
struct CondensedCell {
    y: DMatrix<f64>,
    z: DVector<f64>,
    schur: DMatrix<f64>,
    g: DVector<f64>,
    dofs: Vec<usize>,
    n_interior: usize,
    means: Vec<(usize, f64)>,
}

fn condense_cell(
    mesh: &Mesh,
    cfg: &MethodConfig,
    spaces: &Spaces,
    cell: usize,
    force: Force<'_>,
    opts: &AssemblyOptions,
) -> Result<CondensedCell> {
    let el = element_system(mesh, cfg, spaces, cell, force, opts)?;
    let s = el.sizes;
    let ni = s.interior();
    let nx = s.total() - ni;
    let e = &el.matrix;
    let e_ii = e.view((0, 0), (ni, ni)).into_owned();
    let e_ix = e.view((0, ni), (ni, nx)).into_owned();
    let e_xi = e.view((ni, 0), (nx, ni));
    let e_xx = e.view((ni, ni), (nx, nx));
    let lu = e_ii.lu();
    let y = lu.solve(&e_ix).ok_or(Error::SingularLocalBlock { cell })?;
    let z = lu.solve(&el.rhs.rows(0, ni).into_owned()).ok_or(Error::SingularLocalBlock { cell })?;
    if y.iter().chain(z.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SingularLocalBlock { cell });
    }
    let schur = e_xx - e_xi * &y;
    let g = el.rhs.rows(ni, nx) - e_xi * &z;
    let means = (0..s.cell_pressure)
        .map(|j| (el.dofs[s.cell_pressure(j)], e[(s.cell_pressure(j), s.multiplier())]))
        .collect();
    Ok(CondensedCell {
        y,
        z,
        schur,
        g,
        dofs: el.dofs,
        n_interior: ni,
        means,
    })
}

/// Eliminates cell velocity and cell pressure per cell, solves the facet
/// system (facet velocity, facet pressure, `μ`) and reconstructs the cell
/// unknowns.
pub fn solve_condensed(
    mesh: &Mesh,
    cfg: &MethodConfig,
    spaces: &Spaces,
    force: Force<'_>,
    bc: &DirichletValues,
) -> Result<DiscreteStokesSolution> {
    solve_condensed_with(mesh, cfg, spaces, force, bc, &AssemblyOptions::default())
}

pub fn solve_condensed_with(
    mesh: &Mesh,
    cfg: &MethodConfig,
    spaces: &Spaces,
    force: Force<'_>,
    bc: &DirichletValues,
    opts: &AssemblyOptions,
) -> Result<DiscreteStokesSolution> {
    cfg.validate()?;
    let boundary = checked_boundary_values(mesh, spaces, bc)?;
    let off = Offsets::new(spaces);
    let nx = off.n_facet();
    let cells = map_cells(mesh.n_cells(), |k| condense_cell(mesh, cfg, spaces, k, force, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; nx];
    for c in &cells {
        let ext = &c.dofs[c.n_interior..];
        for (i, &gi) in ext.iter().enumerate() {
            rhs[gi - off.ubar] += c.g[i];
            for (j, &gj) in ext.iter().enumerate() {
                let v = c.schur[(i, j)];
                if v != 0.0 {
                    triplets.push(Triplet::new(gi - off.ubar, gj - off.ubar, v));
                }
            }
        }
    }
    if opts.drop_facet_pressure {
        for d in off.pbar..off.mu {
            triplets.push(Triplet::new(d - off.ubar, d - off.ubar, 1.0));
        }
    }
    let mut fixed = vec![None; nx];
    for (d, v) in boundary.iter().enumerate() {
        fixed[d] = *v;
    }
    let (matrix, _) = eliminate(nx, &triplets, &mut rhs, &fixed)?;
    let xf = sparse_solve(&matrix, &rhs)?;

    let mut x = vec![0.0; off.total];
    x[off.ubar..].copy_from_slice(&xf);
    let mut weights = vec![0.0; spaces.cell_pressure.n_dofs()];
    for c in &cells {
        let ext = DVector::from_iterator(
            c.dofs.len() - c.n_interior,
            c.dofs[c.n_interior..].iter().map(|&g| x[g]),
        );
        let interior = &c.z - &c.y * ext;
        for (i, &gi) in c.dofs[..c.n_interior].iter().enumerate() {
            x[gi] = interior[i];
        }
        for &(g, w) in &c.means {
            weights[g - off.p] = w;
        }
    }
    let mut sol = DiscreteStokesSolution::from_full(&x, &off, *cfg, spaces.clone(), nx);
    sol.recenter(&weights);
    Ok(sol)
}
