//! Property tests over meshes, bases, assembly and the solvers.

use proptest::prelude::*;

use stokes_hybrid::analysis::{
    coercivity_sampling, eval_cell_pressure, eval_cell_velocity, facet_seminorm, jump_seminorm,
};
use stokes_hybrid::assembly::assemble;
use stokes_hybrid::cases::{solve_exact, CornerSingularFlow, LShapeFlow};
use stokes_hybrid::mesh::{cracked_square_mesh, lshape_mesh, unit_square_mesh, Mesh};
use stokes_hybrid::solver::{solve_condensed, solve_full, DiscreteStokesSolution};
use stokes_hybrid::spaces::{build_spaces, interpolate_facet_dirichlet, DirichletValues, Spaces};
use stokes_hybrid::{Method, MethodConfig, Point};

const METHODS: [Method; 3] = [Method::Hdg, Method::EdgHdg, Method::Edg];

fn mesh_of(kind: usize, n: usize) -> Mesh {
    match kind {
        0 => unit_square_mesh(n).unwrap(),
        1 => lshape_mesh(n).unwrap(),
        _ => cracked_square_mesh(2 * n).unwrap(),
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Solves with homogeneous boundary data.
fn solve_zero_bc(
    mesh: &Mesh,
    cfg: &MethodConfig,
    force: &(dyn Fn(Point) -> [f64; 2] + Sync),
) -> (Spaces, DiscreteStokesSolution) {
    let spaces = build_spaces(mesh, cfg).unwrap();
    let bc = DirichletValues::zeros(&spaces.facet_velocity);
    let sol = solve_condensed(mesh, cfg, &spaces, force, &bc).unwrap();
    (spaces, sol)
}

fn velocity(sol: &DiscreteStokesSolution) -> Vec<f64> {
    let mut v = sol.u.clone();
    v.extend_from_slice(&sol.ubar);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refinement_preserves_geometry(kind in 0usize..3, n in 1usize..3, levels in 0usize..3) {
        let base = mesh_of(kind, n);
        let area = base.domain().area().unwrap();
        let boundary0 = base.faces().iter().filter(|f| f.is_boundary()).count();
        let mut m = base.clone();
        for _ in 0..levels {
            m = m.refine_uniform();
        }
        prop_assert_eq!(m.n_cells(), base.n_cells() * 4usize.pow(levels as u32));
        prop_assert!((m.total_area() - area).abs() < 1e-12 * area);
        prop_assert_eq!(m.geometric_euler_characteristic(), 1);
        for c in 0..m.n_cells() {
            prop_assert!(m.cell_area(c).unwrap() > 0.0);
        }
        for f in m.faces() {
            prop_assert_eq!(f.parents.len(), if f.is_boundary() { 1 } else { 2 });
        }
        let boundary = m.faces().iter().filter(|f| f.is_boundary()).count();
        prop_assert_eq!(boundary, boundary0 << levels);
    }

    #[test]
    fn basis_partition_of_unity(k in 1usize..3, a in 0.0f64..1.0, b in 0.0f64..1.0, cell in 0usize..24) {
        let mesh = lshape_mesh(2).unwrap();
        let cfg = MethodConfig::new(Method::Hdg, k, 1.0);
        let sp = build_spaces(&mesh, &cfg).unwrap();
        let xi = if a + b <= 1.0 { [a, b] } else { [1.0 - a, 1.0 - b] };
        let bv = sp.cell_velocity.eval_basis(&mesh, cell, &xi).unwrap();
        prop_assert!((bv.values.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let g = bv.gradients.unwrap().iter().fold([0.0, 0.0], |s, g| [s[0] + g[0], s[1] + g[1]]);
        prop_assert!(g[0].abs() < 1e-11 && g[1].abs() < 1e-11);
        let fv = sp.facet_velocity.eval_basis(&mesh, 0, &[a]).unwrap();
        prop_assert!((fv.values.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn condensed_matches_full(
        m in 0usize..3,
        k in 1usize..3,
        c in proptest::array::uniform6(-1.0f64..1.0),
    ) {
        let mesh = unit_square_mesh(2).unwrap();
        let cfg = MethodConfig::new(METHODS[m], k, 1.0);
        let force = move |x: Point| [c[0] + c[1] * x[0] + c[2] * x[1], c[3] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1]];
        let (spaces, cond) = solve_zero_bc(&mesh, &cfg, &force);
        let bc = DirichletValues::zeros(&spaces.facet_velocity);
        let full = solve_full(&assemble(&mesh, &cfg, &spaces, &force, &bc).unwrap()).unwrap();
        let (a, b) = (full.to_vector(), cond.to_vector());
        prop_assert!(max_diff(&a, &b) <= 1e-10 * max_abs(&a).max(1.0));
        prop_assert!(cond.global_dofs < full.global_dofs);
    }

    #[test]
    fn solution_is_linear_in_force(m in 0usize..3, c in proptest::array::uniform4(-2.0f64..2.0)) {
        let mesh = lshape_mesh(1).unwrap();
        let cfg = MethodConfig::new(METHODS[m], 1, 1.0);
        let f1 = move |x: Point| [c[0] * x[1], c[1]];
        let f2 = move |x: Point| [c[2], c[3] * x[0] * x[0]];
        let f12 = move |x: Point| [c[0] * x[1] + c[2], c[1] + c[3] * x[0] * x[0]];
        let s1 = solve_zero_bc(&mesh, &cfg, &f1).1.to_vector();
        let s2 = solve_zero_bc(&mesh, &cfg, &f2).1.to_vector();
        let s12 = solve_zero_bc(&mesh, &cfg, &f12).1.to_vector();
        let sum: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + b).collect();
        prop_assert!(max_diff(&sum, &s12) <= 1e-10 * max_abs(&s12).max(1.0));
    }

    #[test]
    fn velocity_independent_of_viscosity_for_gradient_forcing(
        m in 0usize..2,
        k in 1usize..3,
        c in proptest::array::uniform3(-3.0f64..3.0),
    ) {
        // f = ∇(c0 x² + c1 x y + c2 y³), boundary data from the corner flow
        let mesh = unit_square_mesh(2).unwrap();
        let force = move |x: Point| [2.0 * c[0] * x[0] + c[1] * x[1], c[1] * x[0] + 3.0 * c[2] * x[1] * x[1]];
        let method = [Method::Hdg, Method::EdgHdg][m];
        let solve = |nu: f64| {
            let cfg = MethodConfig::new(method, k, nu);
            let sp = build_spaces(&mesh, &cfg).unwrap();
            let mut bc = interpolate_facet_dirichlet(&CornerSingularFlow::unit_square(), &mesh, &sp.facet_velocity).unwrap();
            bc.balance_flux(&mesh, &sp.facet_velocity);
            velocity(&solve_condensed(&mesh, &cfg, &sp, &force, &bc).unwrap())
        };
        let (v1, v2) = (solve(1.0), solve(1e-5));
        prop_assert!(max_diff(&v1, &v2) <= 1e-8 * max_abs(&v1));
    }

    #[test]
    fn jump_bounded_by_facet_seminorm(
        kind in 0usize..3,
        m in 0usize..3,
        k in 1usize..3,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mesh = mesh_of(kind, 1);
        let cfg = MethodConfig::new(METHODS[m], k, 1.0);
        let sp = build_spaces(&mesh, &cfg).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..sp.cell_velocity.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ubar: Vec<f64> = (0..sp.facet_velocity.n_dofs())
            .map(|d| if sp.facet_velocity.is_constrained(d) { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect();
        let j = jump_seminorm(&sp.cell_velocity, &u, &mesh);
        let f = facet_seminorm(&sp, &u, &ubar, &mesh);
        let h_max = (0..mesh.n_cells()).map(|c| mesh.cell_diameter(c).unwrap()).fold(0.0, f64::max);
        let hf_min = mesh.faces().iter().map(|f| f.diameter).fold(f64::INFINITY, f64::min);
        prop_assert!(j * j <= 2.0 * f * f * (h_max / hf_min) * (1.0 + 1e-12), "{} > bound {}", j * j, 2.0 * f * f * h_max / hf_min);
    }

    #[test]
    fn sampled_quotient_bounds_exact_minimum(m in 0usize..3, k in 1usize..3, seed in any::<u64>()) {
        let mesh = unit_square_mesh(2).unwrap();
        let cfg = MethodConfig::new(METHODS[m], k, 1.0);
        let sp = build_spaces(&mesh, &cfg).unwrap();
        let s = coercivity_sampling(&mesh, &cfg, &sp, 20, seed).unwrap();
        prop_assert!(s.min_quotient > 0.0);
        prop_assert!(s.exact_min.unwrap() <= s.min_quotient * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cell_reordering_invariance(
        perm in Just((0..24).collect::<Vec<usize>>()).prop_shuffle(),
        rot in proptest::collection::vec(0usize..3, 24),
        m in 0usize..3,
    ) {
        let mesh = lshape_mesh(2).unwrap();
        let cells: Vec<[usize; 3]> = perm
            .iter()
            .zip(&rot)
            .map(|(&c, &r)| {
                let v = mesh.cells()[c];
                [v[r], v[(r + 1) % 3], v[(r + 2) % 3]]
            })
            .collect();
        let other = Mesh::from_cells(mesh.vertices().to_vec(), cells, vec![], mesh.domain()).unwrap();
        let cfg = MethodConfig::new(METHODS[m], 1, 1.0);
        let exact = LShapeFlow::new(1.0);
        let (sa, sb) = (solve_exact(&mesh, &cfg, &exact).unwrap(), solve_exact(&other, &cfg, &exact).unwrap());
        // cell c of `other` is cell perm[c] of `mesh` with its vertices rotated by rot[c]
        let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let centroid = [1.0 / 3.0, 1.0 / 3.0];
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for c in 0..other.n_cells() {
            let old = perm[c];
            for i in 0..4 {
                let (xi_new, xi_old) = if i == 3 { (centroid, centroid) } else { (corners[i], corners[(rot[c] + i) % 3]) };
                let ua = eval_cell_velocity(&sa.spaces.cell_velocity, &sa.u, old, xi_old);
                let ub = eval_cell_velocity(&sb.spaces.cell_velocity, &sb.u, c, xi_new);
                worst = worst.max((ua[0] - ub[0]).abs()).max((ua[1] - ub[1]).abs());
                scale = scale.max(ua[0].abs()).max(ua[1].abs());
            }
            let pa = eval_cell_pressure(&sa.spaces.cell_pressure, &sa.p, old, centroid);
            let pb = eval_cell_pressure(&sb.spaces.cell_pressure, &sb.p, c, centroid);
            worst = worst.max((pa - pb).abs());
        }
        prop_assert!(worst <= 1e-10 * scale.max(1.0), "{worst}");

        // same matrix up to a permutation: compare the sorted entries
        let entries = |mesh: &Mesh| {
            let sp = build_spaces(mesh, &cfg).unwrap();
            let bc = DirichletValues::zeros(&sp.facet_velocity);
            let sys = assemble(mesh, &cfg, &sp, &|_| [0.0, 0.0], &bc).unwrap();
            let mut v: Vec<f64> = sys.matrix.val().iter().copied().filter(|v| v.abs() > 1e-13).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (ea, eb) = (entries(&mesh), entries(&other));
        prop_assert_eq!(ea.len(), eb.len());
        prop_assert!(max_diff(&ea, &eb) <= 1e-12 * max_abs(&ea));
    }
}
