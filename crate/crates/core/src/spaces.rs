//! Degree-of-freedom layouts and Lagrange bases for the cell and facet spaces.
//!
//! Every layout numbers scalar nodes; vector layouts (velocity) carry two
//! components with global index `component * n_nodes + node`.

use std::fmt;
use std::str::FromStr;

use crate::cases::ExactSolution;
use crate::error::{Error, Result};
use crate::mesh::{local_face_vertices, Mesh, Point};

/// Discretization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Discontinuous facet velocity and facet pressure.
    Hdg,
    /// Continuous facet velocity, discontinuous facet pressure.
    EdgHdg,
    /// Continuous facet velocity and facet pressure; not pressure-robust.
    Edg,
}

impl Method {
    pub fn continuous_facet_velocity(&self) -> bool {
        matches!(self, Method::EdgHdg | Method::Edg)
    }

    pub fn continuous_facet_pressure(&self) -> bool {
        matches!(self, Method::Edg)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Hdg => "hdg",
            Method::EdgHdg => "edg-hdg",
            Method::Edg => "edg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hdg" => Ok(Method::Hdg),
            "edg-hdg" => Ok(Method::EdgHdg),
            "edg" => Ok(Method::Edg),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

/// Method, polynomial degree, penalty and viscosity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub degree: usize,
    pub alpha: f64,
    pub nu: f64,
}

impl MethodConfig {
    /// Config with the default penalty `α = 6k²`.
    pub fn new(method: Method, degree: usize, nu: f64) -> Self {
        MethodConfig {
            method,
            degree,
            alpha: default_alpha(degree),
            nu,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.degree) {
            return Err(Error::UnsupportedDegree(self.degree));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("penalty must be positive, got {}", self.alpha)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("viscosity must be positive, got {}", self.nu)));
        }
        Ok(())
    }
}

pub fn default_alpha(degree: usize) -> f64 {
    6.0 * (degree * degree) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    CellVelocity,
    FacetVelocityDiscontinuous,
    FacetVelocityContinuous,
    CellPressure,
    FacetPressureDiscontinuous,
    FacetPressureContinuous,
}

impl SpaceKind {
    pub fn is_cell(&self) -> bool {
        matches!(self, SpaceKind::CellVelocity | SpaceKind::CellPressure)
    }

    pub fn components(&self) -> usize {
        match self {
            SpaceKind::CellVelocity | SpaceKind::FacetVelocityDiscontinuous | SpaceKind::FacetVelocityContinuous => 2,
            _ => 1,
        }
    }
}

/// Number of Lagrange nodes of `P_k` on a triangle.
pub fn triangle_nodes(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Entity-to-node map for one discrete space.
#[derive(Debug, Clone)]
pub struct DofLayout {
    kind: SpaceKind,
    degree: usize,
    /// Nodes per entity (cells for cell spaces, faces for facet spaces).
    per_entity: usize,
    entity_nodes: Vec<usize>,
    n_nodes: usize,
    /// Per scalar node: Dirichlet-constrained (facet velocity on ∂Ω).
    constrained: Vec<bool>,
}

impl DofLayout {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        self.components() * self.n_nodes
    }

    pub fn n_entities(&self) -> usize {
        self.entity_nodes.len() / self.per_entity.max(1)
    }

    /// Scalar nodes per entity.
    pub fn nodes_per_entity(&self) -> usize {
        self.per_entity
    }

    /// Scalar nodes on an entity, in local order.
    pub fn nodes(&self, entity: usize) -> &[usize] {
        &self.entity_nodes[entity * self.per_entity..(entity + 1) * self.per_entity]
    }

    pub fn dof(&self, node: usize, component: usize) -> usize {
        component * self.n_nodes + node
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof % self.n_nodes]
    }

    pub fn constrained_dofs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_dofs()).filter(|&d| self.is_constrained(d))
    }

    pub fn n_free_dofs(&self) -> usize {
        self.components() * self.constrained.iter().filter(|c| !**c).count()
    }

    fn check_entity(&self, entity: usize) -> Result<()> {
        let n = self.n_entities();
        if entity >= n {
            return Err(Error::IndexOutOfRange {
                what: "entity",
                index: entity,
                len: n,
            });
        }
        Ok(())
    }

    /// Basis values at a reference point of `entity`: `(ξ, η)` on the reference
    /// triangle for cell spaces, `t ∈ [0, 1]` along the face for facet spaces.
    /// Cell velocity bases also return physical gradients.
    pub fn eval_basis(&self, mesh: &Mesh, entity: usize, point: &[f64]) -> Result<BasisValues> {
        self.check_entity(entity)?;
        match self.kind {
            SpaceKind::CellVelocity | SpaceKind::CellPressure => {
                let xi = [point[0], point[1]];
                let k = match self.kind {
                    SpaceKind::CellVelocity => self.degree,
                    _ => self.degree - 1,
                };
                let mut values = vec![0.0; triangle_nodes(k)];
                lagrange_triangle(k, xi, &mut values);
                let gradients = if self.kind == SpaceKind::CellVelocity {
                    let geo = CellGeometry::new(mesh, entity);
                    let mut g = vec![[0.0; 2]; values.len()];
                    lagrange_triangle_grad(k, xi, &mut g);
                    Some(g.iter().map(|r| geo.physical_gradient(*r)).collect())
                } else {
                    None
                };
                Ok(BasisValues { values, gradients })
            }
            _ => {
                let mut values = vec![0.0; self.degree + 1];
                lagrange_segment(self.degree, point[0], &mut values);
                Ok(BasisValues {
                    values,
                    gradients: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BasisValues {
    pub values: Vec<f64>,
    pub gradients: Option<Vec<[f64; 2]>>,
}

/// The four layouts of one discretization.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub cell_velocity: DofLayout,
    pub facet_velocity: DofLayout,
    pub cell_pressure: DofLayout,
    pub facet_pressure: DofLayout,
}

impl Spaces {
    pub fn degree(&self) -> usize {
        self.cell_velocity.degree
    }
}

/// Builds the cell/facet velocity and pressure layouts for `cfg` on `mesh`.
pub fn build_spaces(mesh: &Mesh, cfg: &MethodConfig) -> Result<Spaces> {
    cfg.validate()?;
    let k = cfg.degree;
    let cell_velocity = cell_layout(mesh, SpaceKind::CellVelocity, k, triangle_nodes(k));
    let cell_pressure = cell_layout(mesh, SpaceKind::CellPressure, k, triangle_nodes(k - 1));
    let facet_velocity = if cfg.method.continuous_facet_velocity() {
        continuous_facet_layout(mesh, SpaceKind::FacetVelocityContinuous, k)
    } else {
        discontinuous_facet_layout(mesh, SpaceKind::FacetVelocityDiscontinuous, k)
    };
    let facet_pressure = if cfg.method.continuous_facet_pressure() {
        continuous_facet_layout(mesh, SpaceKind::FacetPressureContinuous, k)
    } else {
        discontinuous_facet_layout(mesh, SpaceKind::FacetPressureDiscontinuous, k)
    };
    Ok(Spaces {
        cell_velocity,
        facet_velocity,
        cell_pressure,
        facet_pressure,
    })
}

fn cell_layout(mesh: &Mesh, kind: SpaceKind, degree: usize, per_cell: usize) -> DofLayout {
    let n = mesh.n_cells() * per_cell;
    DofLayout {
        kind,
        degree,
        per_entity: per_cell,
        entity_nodes: (0..n).collect(),
        n_nodes: n,
        constrained: vec![false; n],
    }
}

fn is_velocity(kind: SpaceKind) -> bool {
    kind.components() == 2
}

fn discontinuous_facet_layout(mesh: &Mesh, kind: SpaceKind, degree: usize) -> DofLayout {
    let per = degree + 1;
    let n = mesh.n_faces() * per;
    let mut constrained = vec![false; n];
    if is_velocity(kind) {
        for (f, face) in mesh.faces().iter().enumerate() {
            if face.is_boundary() {
                constrained[f * per..(f + 1) * per].fill(true);
            }
        }
    }
    DofLayout {
        kind,
        degree,
        per_entity: per,
        entity_nodes: (0..n).collect(),
        n_nodes: n,
        constrained,
    }
}

/// Nodes at mesh vertices (shared between faces) plus one midpoint node per
/// face record when `degree = 2`.
fn continuous_facet_layout(mesh: &Mesh, kind: SpaceKind, degree: usize) -> DofLayout {
    let per = degree + 1;
    let nv = mesh.n_vertices();
    let mut vertex_node = vec![usize::MAX; nv];
    let mut next = 0;
    // number vertices in order of first appearance on the skeleton
    for face in mesh.faces() {
        for &v in &face.vertices {
            if vertex_node[v] == usize::MAX {
                vertex_node[v] = next;
                next += 1;
            }
        }
    }
    let mut entity_nodes = Vec::with_capacity(mesh.n_faces() * per);
    for face in mesh.faces() {
        entity_nodes.push(vertex_node[face.vertices[0]]);
        entity_nodes.push(vertex_node[face.vertices[1]]);
        if degree == 2 {
            entity_nodes.push(next);
            next += 1;
        }
    }
    let mut constrained = vec![false; next];
    if is_velocity(kind) {
        for (f, face) in mesh.faces().iter().enumerate() {
            if face.is_boundary() {
                for &n in &entity_nodes[f * per..(f + 1) * per] {
                    constrained[n] = true;
                }
            }
        }
    }
    DofLayout {
        kind,
        degree,
        per_entity: per,
        entity_nodes,
        n_nodes: next,
        constrained,
    }
}

/// Lagrange basis of `P_k` on the reference triangle (vertices, then edge
/// midpoints opposite vertex 0, 1, 2).
pub fn lagrange_triangle(k: usize, xi: [f64; 2], out: &mut [f64]) {
    let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
    match k {
        0 => out[0] = 1.0,
        1 => out[..3].copy_from_slice(&l),
        2 => {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
                let (a, b) = local_face_vertices(i);
                out[3 + i] = 4.0 * l[a] * l[b];
            }
        }
        _ => unreachable!("degree checked at layout construction"),
    }
}

/// Reference-coordinate gradients of [`lagrange_triangle`].
pub fn lagrange_triangle_grad(k: usize, xi: [f64; 2], out: &mut [[f64; 2]]) {
    let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
    let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    match k {
        0 => out[0] = [0.0, 0.0],
        1 => out[..3].copy_from_slice(&dl),
        2 => {
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                out[i] = [s * dl[i][0], s * dl[i][1]];
                let (a, b) = local_face_vertices(i);
                out[3 + i] = [
                    4.0 * (l[a] * dl[b][0] + l[b] * dl[a][0]),
                    4.0 * (l[a] * dl[b][1] + l[b] * dl[a][1]),
                ];
            }
        }
        _ => unreachable!("degree checked at layout construction"),
    }
}

/// Reference coordinates of the `P_k` triangle nodes.
pub fn triangle_node_coords(k: usize) -> Vec<[f64; 2]> {
    match k {
        0 => vec![[1.0 / 3.0, 1.0 / 3.0]],
        1 => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        _ => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]],
    }
}

/// Lagrange basis of `P_k` on `[0, 1]` with nodes `0, 1` (and `1/2` for `k = 2`).
pub fn lagrange_segment(k: usize, t: f64, out: &mut [f64]) {
    match k {
        1 => {
            out[0] = 1.0 - t;
            out[1] = t;
        }
        2 => {
            out[0] = (1.0 - t) * (1.0 - 2.0 * t);
            out[1] = t * (2.0 * t - 1.0);
            out[2] = 4.0 * t * (1.0 - t);
        }
        _ => unreachable!("degree checked at layout construction"),
    }
}

/// Parameters of the facet nodes along a face.
pub fn segment_node_params(k: usize) -> &'static [f64] {
    match k {
        1 => &[0.0, 1.0],
        _ => &[0.0, 1.0, 0.5],
    }
}

/// Affine map from the reference triangle to a mesh cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: Point,
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    /// `J^{-1}`
    pub inverse: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, cell: usize) -> Self {
        let [a, b, c] = mesh.cell_points(cell);
        Self::from_points(a, b, c)
    }

    pub fn from_points(a: Point, b: Point, c: Point) -> Self {
        let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inverse = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        CellGeometry {
            origin: a,
            jacobian: j,
            det,
            inverse,
        }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let m = &self.inverse;
        [m[0][0] * d[0] + m[0][1] * d[1], m[1][0] * d[0] + m[1][1] * d[1]]
    }

    /// `J^{-T} ∇̂φ`
    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inverse;
        [m[0][0] * g[0] + m[1][0] * g[1], m[0][1] * g[0] + m[1][1] * g[1]]
    }
}

/// Boundary values of a vector facet layout, one entry per dof; entries are
/// `Some` exactly on constrained dofs once complete.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletValues {
    pub values: Vec<Option<f64>>,
}

impl DirichletValues {
    pub fn zeros(layout: &DofLayout) -> Self {
        let values = (0..layout.n_dofs())
            .map(|d| layout.is_constrained(d).then_some(0.0))
            .collect();
        DirichletValues { values }
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.values.get(dof).copied().flatten()
    }

    /// `∫_∂Ω g_h · n` and `∫_∂Ω |g_h · n|` over boundary face records.
    pub fn boundary_flux(&self, mesh: &Mesh, layout: &DofLayout) -> (f64, f64) {
        let k = layout.degree();
        let rule = crate::quadrature::LineRule::exact_for(k);
        let mut basis = vec![0.0; k + 1];
        let (mut net, mut abs) = (0.0, 0.0);
        for (f, face) in mesh.faces().iter().enumerate() {
            if !face.is_boundary() {
                continue;
            }
            let nodes = layout.nodes(f);
            let mut face_flux = 0.0;
            for (&t, &w) in rule.points.iter().zip(&rule.weights) {
                lagrange_segment(k, t, &mut basis);
                let mut g = [0.0; 2];
                for (m, &node) in nodes.iter().enumerate() {
                    for (c, gc) in g.iter_mut().enumerate() {
                        *gc += basis[m] * self.get(layout.dof(node, c)).unwrap_or(0.0);
                    }
                }
                face_flux += w * face.diameter * (g[0] * face.normal[0] + g[1] * face.normal[1]);
            }
            net += face_flux;
            abs += face_flux.abs();
        }
        (net, abs)
    }

    /// Removes the net boundary flux by subtracting `c · x` from the data,
    /// with `c = Φ / (2|Ω|)` (the field `x` has flux `2|Ω|` and zero flux
    /// through any straight crack through the origin). Returns the removed flux.
    ///
    /// Nodal interpolation of a divergence-free field does not conserve its
    /// boundary flux exactly, and a non-zero net flux is incompatible with a
    /// pointwise divergence-free discrete velocity.
    pub fn balance_flux(&mut self, mesh: &Mesh, layout: &DofLayout) -> f64 {
        let (flux, _) = self.boundary_flux(mesh, layout);
        let c = flux / (2.0 * mesh.total_area());
        let coords = facet_node_coordinates(mesh, layout);
        for (node, x) in coords.iter().enumerate() {
            for comp in 0..2 {
                let d = layout.dof(node, comp);
                if let Some(v) = self.values[d].as_mut() {
                    *v -= c * x[comp];
                }
            }
        }
        flux
    }
}

/// Physical coordinates of every scalar node of a facet layout.
pub fn facet_node_coordinates(mesh: &Mesh, layout: &DofLayout) -> Vec<Point> {
    let params = segment_node_params(layout.degree());
    let mut coords = vec![[f64::NAN; 2]; layout.n_nodes()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let (a, b) = (mesh.vertices()[face.vertices[0]], mesh.vertices()[face.vertices[1]]);
        for (m, &node) in layout.nodes(f).iter().enumerate() {
            let t = params[m];
            coords[node] = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        }
    }
    coords
}

/// Nodal interpolant of the exact velocity at the constrained facet nodes.
///
/// Each node is evaluated from a face record that owns it, with the centroid of
/// that face's parent cell as the branch hint (this selects the side of a crack).
pub fn interpolate_facet_dirichlet(
    exact: &dyn ExactSolution,
    mesh: &Mesh,
    layout: &DofLayout,
) -> Result<DirichletValues> {
    if layout.components() != 2 || layout.kind().is_cell() {
        return Err(Error::InvalidArgument("Dirichlet data lives on a facet velocity layout".into()));
    }
    let params = segment_node_params(layout.degree());
    let mut values = vec![None; layout.n_dofs()];
    for (f, face) in mesh.faces().iter().enumerate() {
        if !face.is_boundary() {
            continue;
        }
        let hint = mesh.cell_centroid(face.parents[0].cell);
        let (a, b) = (mesh.vertices()[face.vertices[0]], mesh.vertices()[face.vertices[1]]);
        for (m, &node) in layout.nodes(f).iter().enumerate() {
            if values[layout.dof(node, 0)].is_some() {
                continue;
            }
            let t = params[m];
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let u = exact.velocity(x, Some(hint));
            if !(u[0].is_finite() && u[1].is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "exact velocity undefined at ({}, {})",
                    x[0], x[1]
                )));
            }
            values[layout.dof(node, 0)] = Some(u[0]);
            values[layout.dof(node, 1)] = Some(u[1]);
        }
    }
    Ok(DirichletValues { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cracked_square_mesh, lshape_mesh, unit_square_mesh};

    fn spaces(mesh: &Mesh, method: Method, k: usize) -> Spaces {
        build_spaces(mesh, &MethodConfig::new(method, k, 1.0)).unwrap()
    }

    #[test]
    fn unit_square_dof_counts() {
        let m = unit_square_mesh(1).unwrap();
        let s = spaces(&m, Method::Hdg, 1);
        assert_eq!(s.cell_velocity.n_dofs(), 12);
        assert_eq!(s.facet_velocity.n_free_dofs(), 4);
        let s = spaces(&m, Method::EdgHdg, 1);
        assert_eq!(s.facet_velocity.n_free_dofs(), 0);
        let m2 = unit_square_mesh(2).unwrap();
        let s = spaces(&m2, Method::Hdg, 1);
        assert_eq!(s.facet_velocity.n_free_dofs(), 4 * m2.n_interior_faces());
        assert_eq!(s.facet_velocity.n_free_dofs(), 32);
    }

    #[test]
    fn closed_form_counts() {
        let meshes = [
            unit_square_mesh(1).unwrap(),
            unit_square_mesh(2).unwrap(),
            unit_square_mesh(4).unwrap(),
            lshape_mesh(1).unwrap(),
            lshape_mesh(2).unwrap(),
            cracked_square_mesh(2).unwrap(),
            cracked_square_mesh(4).unwrap(),
        ];
        for m in &meshes {
            let (c, f, v) = (m.n_cells(), m.n_faces(), m.n_vertices());
            for k in [1, 2] {
                let hdg = spaces(m, Method::Hdg, k);
                assert_eq!(hdg.cell_velocity.n_dofs(), c * 2 * triangle_nodes(k));
                assert_eq!(hdg.cell_pressure.n_dofs(), c * triangle_nodes(k - 1));
                assert_eq!(hdg.facet_velocity.n_dofs(), 2 * f * (k + 1));
                assert_eq!(hdg.facet_pressure.n_dofs(), f * (k + 1));
                let edg = spaces(m, Method::Edg, k);
                let cont = v + if k == 2 { f } else { 0 };
                assert_eq!(edg.facet_velocity.n_dofs(), 2 * cont);
                assert_eq!(edg.facet_pressure.n_dofs(), cont);
                // every boundary facet velocity dof is constrained
                for layout in [&hdg.facet_velocity, &edg.facet_velocity] {
                    for (fi, face) in m.faces().iter().enumerate() {
                        for &node in layout.nodes(fi) {
                            for comp in 0..2 {
                                let d = layout.dof(node, comp);
                                if face.is_boundary() {
                                    assert!(layout.is_constrained(d));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn duplicated_crack_vertices_have_distinct_dofs() {
        let m = cracked_square_mesh(4).unwrap();
        let s = spaces(&m, Method::EdgHdg, 1);
        let coords = facet_node_coordinates(&m, &s.facet_velocity);
        let at_slit: Vec<_> = coords
            .iter()
            .enumerate()
            .filter(|(_, p)| p[1] == 0.0 && (p[0] - 0.05).abs() < 1e-15)
            .map(|(n, _)| n)
            .collect();
        assert_eq!(at_slit.len(), 2);
        assert_ne!(at_slit[0], at_slit[1]);
    }

    #[test]
    fn basis_partition_of_unity() {
        let m = unit_square_mesh(2).unwrap();
        let s = spaces(&m, Method::Hdg, 2);
        for k in [1, 2] {
            let s1 = spaces(&m, Method::Hdg, k);
            let b = s1.cell_velocity.eval_basis(&m, 3, &[1.0 / 3.0, 1.0 / 3.0]).unwrap();
            if k == 1 {
                for v in &b.values {
                    assert!((v - 1.0 / 3.0).abs() < 1e-15);
                }
            }
            for xi in [[0.1, 0.2], [0.7, 0.05], [0.3, 0.3]] {
                let b = s1.cell_velocity.eval_basis(&m, 5, &xi).unwrap();
                let sum: f64 = b.values.iter().sum();
                assert!((sum - 1.0).abs() < 1e-14);
                let g = b.gradients.unwrap();
                let gs = g.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
                assert!(gs[0].abs() < 1e-12 && gs[1].abs() < 1e-12);
            }
        }
        assert!(s.cell_velocity.eval_basis(&m, 8, &[0.0, 0.0]).is_err());
        let fb = s.facet_velocity.eval_basis(&m, 0, &[0.3]).unwrap();
        assert!((fb.values.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_gradients_match_finite_differences() {
        let m = lshape_mesh(1).unwrap();
        for k in [1, 2] {
            let s = spaces(&m, Method::Hdg, k);
            let cell = 4;
            let geo = CellGeometry::new(&m, cell);
            let xi = [0.21, 0.37];
            let x = geo.to_physical(xi);
            let g = s.cell_velocity.eval_basis(&m, cell, &xi).unwrap().gradients.unwrap();
            let eps = 1e-6;
            for dir in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[dir] += eps;
                xm[dir] -= eps;
                let vp = s.cell_velocity.eval_basis(&m, cell, &geo.to_reference(xp)).unwrap().values;
                let vm = s.cell_velocity.eval_basis(&m, cell, &geo.to_reference(xm)).unwrap().values;
                for i in 0..vp.len() {
                    let fd = (vp[i] - vm[i]) / (2.0 * eps);
                    assert!((fd - g[i][dir]).abs() < 1e-7, "k={k} i={i} dir={dir}");
                }
            }
        }
    }

    #[test]
    fn lagrange_nodes_are_nodal() {
        for k in 0..=2 {
            let nodes = triangle_node_coords(k);
            let mut v = vec![0.0; nodes.len()];
            for (i, p) in nodes.iter().enumerate() {
                lagrange_triangle(k, *p, &mut v);
                for (j, vj) in v.iter().enumerate() {
                    assert!((vj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
            }
        }
        for k in 1..=2 {
            let mut v = vec![0.0; k + 1];
            for (i, &t) in segment_node_params(k).iter().enumerate() {
                lagrange_segment(k, t, &mut v);
                for (j, vj) in v.iter().enumerate() {
                    assert!((vj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn unsupported_degree() {
        let m = unit_square_mesh(1).unwrap();
        let err = build_spaces(&m, &MethodConfig::new(Method::Hdg, 3, 1.0));
        assert!(matches!(err, Err(Error::UnsupportedDegree(3))));
    }
}
