//! Conforming triangulations with faces stored as equivalence classes of
//! `(edge, cell)` pairs.
//!
//! An edge shared by two cells is a single interior [`Face`] unless it lies on
//! a declared crack segment, in which case each parent cell gets its own
//! boundary [`Face`] record. Vertices strictly inside a crack are duplicated,
//! one copy per side, so any space that is continuous through vertices is
//! automatically discontinuous across the crack.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Geometric domain a mesh discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `(0, 1)²`
    UnitSquare,
    /// `(-1, 1)² \ ([0, 1] × [-1, 0])`
    LShape,
    /// `(-1/10, 1/10)² \ ([0, 1/10) × {0})`
    CrackedSquare,
    /// Anything built directly from vertex and cell lists.
    Custom,
}

impl Domain {
    /// Analytic area, if known.
    pub fn area(&self) -> Option<f64> {
        match self {
            Domain::UnitSquare => Some(1.0),
            Domain::LShape => Some(3.0),
            Domain::CrackedSquare => Some(0.04),
            Domain::Custom => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Boundary,
}

/// A `(cell, local face)` pair owning a [`Face`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceParent {
    pub cell: usize,
    /// Local face index in `0..3`; local face `i` is opposite cell vertex `i`.
    pub local: usize,
}

#[derive(Debug, Clone)]
pub struct Face {
    /// Endpoints, ordered counter-clockwise as seen from the first parent.
    pub vertices: [usize; 2],
    /// One parent for boundary faces, two for interior faces (lower cell id first).
    pub parents: Vec<FaceParent>,
    pub kind: FaceKind,
    /// Edge length `h_F`.
    pub diameter: f64,
    /// Unit normal pointing out of the first parent.
    pub normal: [f64; 2],
    /// True if the face lies on a declared crack segment.
    pub on_crack: bool,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.kind == FaceKind::Boundary
    }
}

/// Face incidence of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFace {
    pub face: usize,
    /// `+1` if the outward cell normal equals `n_F`, `-1` otherwise.
    pub sign: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    faces: Vec<Face>,
    cell_faces: Vec<[CellFace; 3]>,
    cracks: Vec<[Point; 2]>,
    domain: Domain,
}

/// Endpoints of local face `i` of a cell, in counter-clockwise order.
#[inline]
pub fn local_face_vertices(i: usize) -> (usize, usize) {
    ((i + 1) % 3, (i + 2) % 3)
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

fn on_segment(p: Point, seg: &[Point; 2]) -> bool {
    let [a, b] = *seg;
    let len = dist(a, b);
    let tol = 1e-12 * len.max(1.0);
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if cross.abs() > tol * len {
        return false;
    }
    let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (len * len);
    (-1e-12..=1.0 + 1e-12).contains(&t)
}

impl Mesh {
    /// Builds face connectivity for the given cells.
    ///
    /// Cells must be counter-clockwise. Shared edges whose endpoints both lie on
    /// one of `cracks` are split into two boundary faces.
    pub fn from_cells(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        cracks: Vec<[Point; 2]>,
        domain: Domain,
    ) -> Result<Self> {
        for (k, c) in cells.iter().enumerate() {
            for &v in c {
                if v >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "vertex",
                        index: v,
                        len: vertices.len(),
                    });
                }
            }
            let area = signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]);
            if area <= 0.0 {
                return Err(Error::DegenerateCell { cell: k, area });
            }
        }

        let mut edge_to_face: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let placeholder = CellFace {
            face: usize::MAX,
            sign: 0.0,
        };
        let mut cell_faces = vec![[placeholder; 3]; cells.len()];

        let new_face = |k: usize, i: usize, a: usize, b: usize| {
            let (pa, pb) = (vertices[a], vertices[b]);
            let len = dist(pa, pb);
            Face {
                vertices: [a, b],
                parents: vec![FaceParent { cell: k, local: i }],
                kind: FaceKind::Boundary,
                diameter: len,
                normal: [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len],
                on_crack: false,
            }
        };

        for (k, c) in cells.iter().enumerate() {
            for i in 0..3 {
                let (la, lb) = local_face_vertices(i);
                let (a, b) = (c[la], c[lb]);
                let key = (a.min(b), a.max(b));
                match edge_to_face.get(&key) {
                    Some(&f) => {
                        let on_crack = cracks.iter().any(|s| {
                            on_segment(vertices[a], s) && on_segment(vertices[b], s)
                        });
                        if faces[f].parents.len() != 1 || faces[f].vertices != [b, a] {
                            return Err(Error::InvalidArgument(format!(
                                "edge ({a}, {b}) is not shared consistently (non-manifold or misoriented)"
                            )));
                        }
                        if on_crack {
                            faces[f].on_crack = true;
                            let mut twin = new_face(k, i, a, b);
                            twin.on_crack = true;
                            cell_faces[k][i] = CellFace {
                                face: faces.len(),
                                sign: 1.0,
                            };
                            faces.push(twin);
                            edge_to_face.remove(&key);
                        } else {
                            faces[f].parents.push(FaceParent { cell: k, local: i });
                            faces[f].kind = FaceKind::Interior;
                            cell_faces[k][i] = CellFace { face: f, sign: -1.0 };
                        }
                    }
                    None => {
                        edge_to_face.insert(key, faces.len());
                        cell_faces[k][i] = CellFace {
                            face: faces.len(),
                            sign: 1.0,
                        };
                        faces.push(new_face(k, i, a, b));
                    }
                }
            }
        }

        // Boundary edges lying on a crack (e.g. a slit face next to a
        // duplicated vertex) are still crack faces.
        for f in faces.iter_mut().filter(|f| f.is_boundary()) {
            let [a, b] = f.vertices;
            if cracks
                .iter()
                .any(|s| on_segment(vertices[a], s) && on_segment(vertices[b], s))
            {
                f.on_crack = true;
            }
        }

        Ok(Mesh {
            vertices,
            cells,
            faces,
            cell_faces,
            cracks,
            domain,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn cell_faces(&self, cell: usize) -> &[CellFace; 3] {
        &self.cell_faces[cell]
    }

    pub fn cracks(&self) -> &[[Point; 2]] {
        &self.cracks
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| !f.is_boundary()).count()
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.cells.len() {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: cell,
                len: self.cells.len(),
            });
        }
        Ok(())
    }

    /// Vertex coordinates of a cell.
    pub fn cell_points(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn cell_area(&self, cell: usize) -> Result<f64> {
        self.check_cell(cell)?;
        let [a, b, c] = self.cell_points(cell);
        Ok(signed_area(a, b, c))
    }

    /// `h_K`, the longest edge.
    pub fn cell_diameter(&self, cell: usize) -> Result<f64> {
        self.check_cell(cell)?;
        let [a, b, c] = self.cell_points(cell);
        Ok(dist(a, b).max(dist(b, c)).max(dist(c, a)))
    }

    pub fn cell_centroid(&self, cell: usize) -> Point {
        let [a, b, c] = self.cell_points(cell);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn face_normal(&self, face: usize) -> Result<[f64; 2]> {
        self.faces
            .get(face)
            .map(|f| f.normal)
            .ok_or(Error::IndexOutOfRange {
                what: "face",
                index: face,
                len: self.faces.len(),
            })
    }

    /// Outward unit normal `n_K` on local face `local` of `cell`.
    pub fn outward_normal(&self, cell: usize, local: usize) -> Result<[f64; 2]> {
        self.check_cell(cell)?;
        if local >= 3 {
            return Err(Error::IndexOutOfRange {
                what: "local face",
                index: local,
                len: 3,
            });
        }
        let cf = self.cell_faces[cell][local];
        let n = self.faces[cf.face].normal;
        Ok([cf.sign * n[0], cf.sign * n[1]])
    }

    /// Mesh size `h = max_K h_K`.
    pub fn h(&self) -> f64 {
        (0..self.n_cells())
            .map(|k| self.cell_diameter(k).unwrap())
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|k| self.cell_area(k).unwrap()).sum()
    }

    /// True if `cell` has a vertex at `p`.
    pub fn cell_touches(&self, cell: usize, p: Point) -> Option<usize> {
        self.cells[cell]
            .iter()
            .position(|&v| dist(self.vertices[v], p) < 1e-13)
    }

    /// Number of vertices whose coordinates coincide with another vertex.
    pub fn duplicated_vertex_count(&self) -> usize {
        let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
        for p in &self.vertices {
            *seen.entry(coord_key(*p)).or_default() += 1;
        }
        seen.values().map(|&n| n - 1).sum()
    }

    /// `V - E + C` counted on geometric entities (coincident vertices and
    /// edges merged), i.e. on the mesh before slitting.
    pub fn geometric_euler_characteristic(&self) -> i64 {
        let verts: HashSet<(u64, u64)> = self.vertices.iter().map(|&p| coord_key(p)).collect();
        let edges: HashSet<[(u64, u64); 2]> = self
            .faces
            .iter()
            .map(|f| {
                let a = coord_key(self.vertices[f.vertices[0]]);
                let b = coord_key(self.vertices[f.vertices[1]]);
                if a < b {
                    [a, b]
                } else {
                    [b, a]
                }
            })
            .collect();
        verts.len() as i64 - edges.len() as i64 + self.cells.len() as i64
    }

    /// Splits every cell into four similar children through edge midpoints.
    ///
    /// Each face record gets its own midpoint, so the two sides of a crack
    /// receive distinct midpoint vertices.
    pub fn refine_uniform(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint = Vec::with_capacity(self.faces.len());
        for f in &self.faces {
            let (a, b) = (self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]);
            midpoint.push(vertices.len());
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (k, c) in self.cells.iter().enumerate() {
            let m = [
                midpoint[self.cell_faces[k][0].face],
                midpoint[self.cell_faces[k][1].face],
                midpoint[self.cell_faces[k][2].face],
            ];
            cells.push([c[0], m[2], m[1]]);
            cells.push([m[2], c[1], m[0]]);
            cells.push([m[1], m[0], c[2]]);
            cells.push([m[0], m[1], m[2]]);
        }
        Mesh::from_cells(vertices, cells, self.cracks.clone(), self.domain)
            .expect("refinement of a valid mesh is valid")
    }

    /// Plain-text dump: one `vertices x y`, `cells i j k` or
    /// `faces v0 v1 interior|boundary` record per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.vertices {
            writeln!(out, "vertices {:?} {:?}", p[0], p[1]).unwrap();
        }
        for c in &self.cells {
            writeln!(out, "cells {} {} {}", c[0], c[1], c[2]).unwrap();
        }
        for f in &self.faces {
            let class = match f.kind {
                FaceKind::Interior => "interior",
                FaceKind::Boundary => "boundary",
            };
            writeln!(out, "faces {} {} {}", f.vertices[0], f.vertices[1], class).unwrap();
        }
        out
    }

    /// Parses the vertex and cell records of [`Mesh::to_text`]; face records
    /// are rebuilt from the cells and checked against the dump.
    pub fn from_text(text: &str, cracks: Vec<[Point; 2]>) -> Result<Mesh> {
        let mut vertices = Vec::new();
        let mut cells = Vec::new();
        let mut faces = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let parse_err = |reason: &str| Error::Parse {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let mut it = line.split_whitespace();
            match it.next() {
                None => continue,
                Some("vertices") => {
                    let x: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("bad x"))?;
                    let y: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("bad y"))?;
                    vertices.push([x, y]);
                }
                Some("cells") => {
                    let mut c = [0usize; 3];
                    for v in &mut c {
                        *v = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("bad index"))?;
                    }
                    cells.push(c);
                }
                Some("faces") => {
                    let a: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("bad index"))?;
                    let b: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("bad index"))?;
                    let class = it.next().ok_or_else(|| parse_err("missing class"))?.to_string();
                    faces.push((a, b, class));
                }
                Some(other) => return Err(parse_err(&format!("unknown record `{other}`"))),
            }
        }
        let mesh = Mesh::from_cells(vertices, cells, cracks, Domain::Custom)?;
        if !faces.is_empty() {
            let rebuilt: Vec<_> = mesh
                .faces
                .iter()
                .map(|f| {
                    let class = if f.is_boundary() { "boundary" } else { "interior" };
                    (f.vertices[0], f.vertices[1], class.to_string())
                })
                .collect();
            if rebuilt != faces {
                return Err(Error::Parse {
                    line: 0,
                    reason: "face records do not match the cell connectivity".into(),
                });
            }
        }
        Ok(mesh)
    }
}

fn coord_key(p: Point) -> (u64, u64) {
    // +0.0 and -0.0 must merge
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

/// Structured grid on `[x0, x1] × [y0, y1]` with `nx × ny` squares, each split
/// along its positive-slope diagonal. Squares for which `keep(i, j)` is false
/// are omitted and unused vertices dropped.
fn structured(
    lo: Point,
    hi: Point,
    nx: usize,
    ny: usize,
    keep: impl Fn(usize, usize) -> bool,
) -> (Vec<Point>, Vec<[usize; 3]>, Vec<(usize, usize)>) {
    let lerp = |a: f64, b: f64, i: usize, n: usize| a * ((n - i) as f64 / n as f64) + b * (i as f64 / n as f64);
    let grid_id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut used = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    let mut grid_index = Vec::new();
    let mut cells = Vec::new();
    let mut id = |i: usize, j: usize, vertices: &mut Vec<Point>, grid_index: &mut Vec<(usize, usize)>| {
        let g = grid_id(i, j);
        if used[g] == usize::MAX {
            used[g] = vertices.len();
            vertices.push([lerp(lo[0], hi[0], i, nx), lerp(lo[1], hi[1], j, ny)]);
            grid_index.push((i, j));
        }
        used[g]
    };
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let v00 = id(i, j, &mut vertices, &mut grid_index);
            let v10 = id(i + 1, j, &mut vertices, &mut grid_index);
            let v11 = id(i + 1, j + 1, &mut vertices, &mut grid_index);
            let v01 = id(i, j + 1, &mut vertices, &mut grid_index);
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    (vertices, cells, grid_index)
}

fn require_positive(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("mesh resolution must be at least 1".into()));
    }
    Ok(())
}

/// `2n²` triangles on `(0, 1)²`.
pub fn unit_square_mesh(n: usize) -> Result<Mesh> {
    require_positive(n)?;
    let (v, c, _) = structured([0.0, 0.0], [1.0, 1.0], n, n, |_, _| true);
    Mesh::from_cells(v, c, vec![], Domain::UnitSquare)
}

/// `6n²` triangles on the L-shape; each unit quadrant carries an `n × n` grid.
pub fn lshape_mesh(n: usize) -> Result<Mesh> {
    require_positive(n)?;
    let (v, c, _) = structured([-1.0, -1.0], [1.0, 1.0], 2 * n, 2 * n, |i, j| !(i >= n && j < n));
    Mesh::from_cells(v, c, vec![], Domain::LShape)
}

/// `2n²` triangles on `(-1/10, 1/10)²` with a slit along `[0, 1/10) × {0}`.
///
/// `n` must be even so the slit lies on grid lines. Vertices strictly inside
/// the slit are duplicated; the tip at the origin is shared.
pub fn cracked_square_mesh(n: usize) -> Result<Mesh> {
    require_positive(n)?;
    if n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "cracked square needs an even resolution, got {n}"
        )));
    }
    let (mut vertices, mut cells, grid) = structured([-0.1, -0.1], [0.1, 0.1], n, n, |_, _| true);
    let mid = n / 2;
    let mut lower_copy = HashMap::new();
    for (v, &(i, j)) in grid.iter().enumerate() {
        if j == mid && i > mid && i < n {
            lower_copy.insert(v, vertices.len());
            let p = vertices[v];
            vertices.push(p);
        }
    }
    for c in cells.iter_mut() {
        let below = c.iter().map(|&v| grid[v].1).min().unwrap() < mid;
        if below {
            for v in c.iter_mut() {
                if let Some(&w) = lower_copy.get(v) {
                    *v = w;
                }
            }
        }
    }
    Mesh::from_cells(vertices, cells, vec![[[0.0, 0.0], [0.1, 0.0]]], Domain::CrackedSquare)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(m: &Mesh) {
        for k in 0..m.n_cells() {
            assert!(m.cell_area(k).unwrap() > 0.0);
        }
        let mut refs = vec![0usize; m.n_faces()];
        for k in 0..m.n_cells() {
            for i in 0..3 {
                let cf = m.cell_faces(k)[i];
                refs[cf.face] += 1;
                let f = &m.faces()[cf.face];
                assert!(f.parents.contains(&FaceParent { cell: k, local: i }));
            }
        }
        for (f, face) in m.faces().iter().enumerate() {
            let expected = if face.is_boundary() { 1 } else { 2 };
            assert_eq!(refs[f], expected);
            assert_eq!(face.parents.len(), expected);
            if !face.is_boundary() {
                let (k1, k2) = (face.parents[0].cell, face.parents[1].cell);
                assert!(k1 < k2);
                // normal points from k1 towards k2
                let (c1, c2) = (m.cell_centroid(k1), m.cell_centroid(k2));
                let d = [c2[0] - c1[0], c2[1] - c1[1]];
                assert!(d[0] * face.normal[0] + d[1] * face.normal[1] > 0.0);
                let shared: Vec<_> = m.cells()[k1].iter().filter(|v| m.cells()[k2].contains(v)).collect();
                assert_eq!(shared.len(), 2);
            }
        }
        assert_eq!(m.geometric_euler_characteristic(), 1);
    }

    #[test]
    fn unit_square_counts() {
        let m = unit_square_mesh(1).unwrap();
        assert_eq!((m.n_cells(), m.n_faces(), m.n_interior_faces()), (2, 5, 1));
        let m = unit_square_mesh(2).unwrap();
        assert_eq!((m.n_cells(), m.n_faces(), m.n_interior_faces()), (8, 16, 8));
        let m = unit_square_mesh(4).unwrap();
        assert_eq!(m.n_cells(), 32);
        assert_eq!(m.refine_uniform().refine_uniform().n_cells(), 512);
        for n in [1, 2, 3, 5] {
            check_invariants(&unit_square_mesh(n).unwrap());
        }
        assert!(unit_square_mesh(0).is_err());
    }

    #[test]
    fn lshape_geometry() {
        let m = lshape_mesh(1).unwrap();
        assert_eq!(m.n_cells(), 6);
        for n in [1, 2, 3] {
            let m = lshape_mesh(n).unwrap();
            check_invariants(&m);
            assert_eq!(m.n_cells(), 6 * n * n);
            assert!((m.total_area() - 3.0).abs() < 1e-12);
            assert!(m.vertices().iter().all(|p| p[0] <= 0.0 || p[1] >= 0.0));
        }
    }

    #[test]
    fn lshape_reentrant_corner_incidence() {
        let m = lshape_mesh(2).unwrap();
        // brute force: count cells with a vertex at the origin by coordinates
        let brute = m
            .cells()
            .iter()
            .filter(|c| c.iter().any(|&v| m.vertices()[v] == [0.0, 0.0]))
            .count();
        let via_query = (0..m.n_cells()).filter(|&k| m.cell_touches(k, [0.0, 0.0]).is_some()).count();
        assert_eq!(brute, via_query);
        // three quadrants around the corner: 2 + 1 + 2 cells
        assert_eq!(brute, 5);
    }

    #[test]
    fn crack_duplication() {
        assert!(cracked_square_mesh(3).is_err());
        assert_eq!(cracked_square_mesh(2).unwrap().duplicated_vertex_count(), 0);
        let m = cracked_square_mesh(4).unwrap();
        assert_eq!(m.duplicated_vertex_count(), 1);
        let dup: Vec<_> = m.vertices().iter().filter(|p| p[1] == 0.0 && p[0] > 0.0 && p[0] < 0.1).collect();
        assert_eq!(dup.len(), 2);
        assert!((dup[0][0] - 0.05).abs() < 1e-15);
        for n in [2, 4, 6] {
            let m = cracked_square_mesh(n).unwrap();
            check_invariants(&m);
            assert!((m.total_area() - 0.04).abs() < 1e-12);
        }
    }

    #[test]
    fn crack_faces_against_control_mesh() {
        for n in [2, 4] {
            let cracked = cracked_square_mesh(n).unwrap();
            let (v, c, _) = structured([-0.1, -0.1], [0.1, 0.1], n, n, |_, _| true);
            let control = Mesh::from_cells(v, c, vec![], Domain::Custom).unwrap();
            // n/2 slit edges, each counted twice instead of once as interior
            assert_eq!(cracked.n_faces(), control.n_faces() + n / 2);
            assert_eq!(cracked.n_interior_faces(), control.n_interior_faces() - n / 2);
            let crack_faces: Vec<_> = cracked.faces().iter().filter(|f| f.on_crack).collect();
            assert_eq!(crack_faces.len(), n);
            for f in &crack_faces {
                assert!(f.is_boundary());
                let below = cracked.cell_centroid(f.parents[0].cell)[1] < 0.0;
                // outward normal of the upper side points down and vice versa
                assert_eq!(f.normal[1] > 0.0, below);
            }
        }
    }

    #[test]
    fn refinement_preserves_crack() {
        let mut m = cracked_square_mesh(2).unwrap();
        let mut dup = m.duplicated_vertex_count();
        for _ in 0..3 {
            let r = m.refine_uniform();
            check_invariants(&r);
            assert_eq!(r.duplicated_vertex_count(), 2 * dup + 1);
            assert_eq!(r.faces().iter().filter(|f| f.on_crack).count(), 2 * m.faces().iter().filter(|f| f.on_crack).count());
            dup = r.duplicated_vertex_count();
            m = r;
        }
    }

    #[test]
    fn refinement_halves_h() {
        let m = unit_square_mesh(1).unwrap();
        let r = m.refine_uniform();
        assert_eq!(r.n_cells(), 8);
        assert_eq!(r.h(), 0.5 * m.h());
        check_invariants(&r);
        assert!((r.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_triangle_geometry() {
        let m = Mesh::from_cells(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![],
            Domain::Custom,
        )
        .unwrap();
        assert_eq!(m.cell_area(0).unwrap(), 0.5);
        assert!((m.cell_diameter(0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let n = m.outward_normal(0, 0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((n[0] - s).abs() < 1e-15 && (n[1] - s).abs() < 1e-15);
        assert!(m.outward_normal(1, 0).is_err());
        assert!(m.face_normal(3).is_err());
    }

    #[test]
    fn closed_boundary_normal_sum() {
        let m = lshape_mesh(2).unwrap();
        for k in 0..m.n_cells() {
            let mut s = [0.0, 0.0];
            for i in 0..3 {
                let n = m.outward_normal(k, i).unwrap();
                let len = m.faces()[m.cell_faces(k)[i].face].diameter;
                s[0] += len * n[0];
                s[1] += len * n[1];
            }
            assert!(s[0].abs() < 1e-14 && s[1].abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_cells_rejected() {
        let err = Mesh::from_cells(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            vec![],
            Domain::Custom,
        );
        assert!(matches!(err, Err(Error::DegenerateCell { .. })));
    }

    #[test]
    fn text_dump_golden() {
        let m = unit_square_mesh(1).unwrap();
        let text = m.to_text();
        let expected = "\
vertices 0.0 0.0
vertices 1.0 0.0
vertices 1.0 1.0
vertices 0.0 1.0
cells 0 1 2
cells 0 2 3
faces 1 2 boundary
faces 2 0 interior
faces 0 1 boundary
faces 2 3 boundary
faces 3 0 boundary
";
        assert_eq!(text, expected);
        let back = Mesh::from_text(&text, vec![]).unwrap();
        assert_eq!(back.cells(), m.cells());
    }
}
