//! Conforming simplicial triangulations of polyhedral domains in dimension 2
//! and 3, with a partition of the boundary into Dirichlet and Neumann parts.
//!
//! Sides (edges in 2d, faces in 3d) are extracted by deduplicating sorted
//! vertex tuples. Every side stores its unit normal `n_S`, oriented from the
//! adjacent element with the smaller index (`T_-`) into the one with the
//! larger index (`T_+`); boundary normals point outward.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Relative volume threshold below which an element counts as degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-14;

const BOUNDARY_COORD_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("unsupported dimension {0}, expected 2 or 3")]
    UnsupportedDimension(usize),
    #[error("side {side:?} is shared by more than two elements")]
    NonConforming { side: Vec<usize> },
    #[error("boundary side {side:?} carries no marker")]
    UnmarkedBoundary { side: Vec<usize> },
    #[error("element {element} is degenerate (volume {volume:.3e})")]
    DegenerateElement { element: usize, volume: f64 },
    #[error("vertex index {index} out of range (mesh has {limit} vertices)")]
    InvalidIndex { index: usize, limit: usize },
    #[error("marker refers to {side:?} which is not a boundary side")]
    InvalidMarker { side: Vec<usize> },
    #[error("unknown mesh kind `{0}`")]
    UnknownKind(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("mesh file: {0}")]
    Parse(String),
}

/// Classification of a side: interior, or boundary with its marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SideMarker {
    Interior,
    #[serde(rename = "D")]
    Dirichlet,
    #[serde(rename = "N")]
    Neumann,
}

#[derive(Debug, Clone)]
pub struct Element {
    /// The d+1 vertex indices.
    pub vertices: Vec<usize>,
    /// Volume |T| (length/area/volume measure of the simplex).
    pub volume: f64,
    /// Barycenter x_T (vertex average).
    pub barycenter: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Side {
    /// The d vertex indices, sorted ascending.
    pub vertices: Vec<usize>,
    /// (d-1)-dimensional measure |S|.
    pub area: f64,
    /// Barycenter x_S.
    pub midpoint: Vec<f64>,
    /// Unit normal n_S, pointing from `minus` into `plus` (outward on the boundary).
    pub normal: Vec<f64>,
    /// Adjacent element T_- (the one with the smaller index).
    pub minus: usize,
    /// Adjacent element T_+; absent for boundary sides.
    pub plus: Option<usize>,
    /// Vertex of T_- opposite to this side.
    pub opposite_minus: usize,
    /// Vertex of T_+ opposite to this side.
    pub opposite_plus: Option<usize>,
    pub marker: SideMarker,
}

impl Side {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none()
    }

    /// Adjacent elements together with the sign of n_S relative to the
    /// outward normal of the element (+1 for T_-, -1 for T_+).
    pub fn adjacent(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        std::iter::once((self.minus, 1.0)).chain(self.plus.map(|t| (t, -1.0)))
    }

    /// Vertex of `element` opposite to this side.
    pub fn opposite_vertex(&self, element: usize) -> usize {
        if element == self.minus {
            self.opposite_minus
        } else {
            debug_assert_eq!(Some(element), self.plus);
            self.opposite_plus.expect("element not adjacent to side")
        }
    }
}

/// A conforming simplicial mesh. Immutable after construction.
#[derive(Debug)]
pub struct Triangulation {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub elements: Vec<Element>,
    pub sides: Vec<Side>,
    /// For each element its d+1 sides as `(side index, sign)` where the sign
    /// is +1 if n_S is the outward normal of the element and -1 otherwise.
    pub element_sides: Vec<Vec<(usize, f64)>>,
}

impl Triangulation {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_sides(&self) -> usize {
        self.sides.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.elements.iter().map(|e| e.volume).sum()
    }

    pub fn n_dirichlet_sides(&self) -> usize {
        self.sides
            .iter()
            .filter(|s| s.marker == SideMarker::Dirichlet)
            .count()
    }

    pub fn n_neumann_sides(&self) -> usize {
        self.sides
            .iter()
            .filter(|s| s.marker == SideMarker::Neumann)
            .count()
    }

    /// True when every boundary side is Dirichlet.
    pub fn dirichlet_is_whole_boundary(&self) -> bool {
        self.sides
            .iter()
            .all(|s| !s.is_boundary() || s.marker == SideMarker::Dirichlet)
    }

    /// Local index (0..=d) of a vertex within an element.
    pub fn local_vertex_index(&self, element: usize, vertex: usize) -> usize {
        self.elements[element]
            .vertices
            .iter()
            .position(|&v| v == vertex)
            .expect("vertex not in element")
    }

    /// Barycentric coordinates of `x` with respect to `element`.
    pub fn barycentric(&self, element: usize, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let verts = &self.elements[element].vertices;
        let mut a = nalgebra::DMatrix::zeros(d + 1, d + 1);
        let mut b = nalgebra::DVector::zeros(d + 1);
        for (j, &v) in verts.iter().enumerate() {
            a[(0, j)] = 1.0;
            for i in 0..d {
                a[(i + 1, j)] = self.vertices[v][i];
            }
        }
        b[0] = 1.0;
        for i in 0..d {
            b[i + 1] = x[i];
        }
        let sol = a.lu().solve(&b).expect("element is non-degenerate");
        sol.iter().copied().collect()
    }

    /// Maps barycentric coordinates on `element` to physical coordinates.
    pub fn from_barycentric(&self, element: usize, lambda: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (j, &v) in self.elements[element].vertices.iter().enumerate() {
            for i in 0..self.dim {
                x[i] += lambda[j] * self.vertices[v][i];
            }
        }
        x
    }
}

/// Componentwise difference of two coordinate slices.
pub fn vsub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Euclidean inner product of two coordinate slices.
pub fn vdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm of a coordinate slice.
pub fn vnorm(a: &[f64]) -> f64 {
    vdot(a, a).sqrt()
}

fn cross3(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn simplex_volume(dim: usize, pts: &[&[f64]]) -> f64 {
    match dim {
        2 => {
            let u = vsub(pts[1], pts[0]);
            let v = vsub(pts[2], pts[0]);
            0.5 * (u[0] * v[1] - u[1] * v[0]).abs()
        }
        3 => {
            let u = vsub(pts[1], pts[0]);
            let v = vsub(pts[2], pts[0]);
            let w = vsub(pts[3], pts[0]);
            vdot(&cross3(&u, &v), &w).abs() / 6.0
        }
        _ => unreachable!("dimension checked at build time"),
    }
}

/// Area and unit normal (unoriented) of a side given its vertex coordinates.
fn side_area_normal(dim: usize, pts: &[&[f64]]) -> (f64, Vec<f64>) {
    match dim {
        2 => {
            let t = vsub(pts[1], pts[0]);
            let len = vnorm(&t);
            (len, vec![t[1] / len, -t[0] / len])
        }
        3 => {
            let u = vsub(pts[1], pts[0]);
            let v = vsub(pts[2], pts[0]);
            let c = cross3(&u, &v);
            let norm = vnorm(&c);
            (0.5 * norm, c.iter().map(|x| x / norm).collect())
        }
        _ => unreachable!(),
    }
}

/// Builds a triangulation from explicit boundary markers.
///
/// Every boundary side must appear exactly once in `boundary_markers`,
/// identified by its vertex tuple in any order.
pub fn build(
    dim: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    boundary_markers: &[(Vec<usize>, SideMarker)],
) -> Result<Triangulation, MeshError> {
    let mut map: BTreeMap<Vec<usize>, SideMarker> = BTreeMap::new();
    for (verts, marker) in boundary_markers {
        if *marker == SideMarker::Interior {
            return Err(MeshError::InvalidMarker { side: verts.clone() });
        }
        let mut key = verts.clone();
        key.sort_unstable();
        if map.insert(key, *marker).is_some() {
            return Err(MeshError::InvalidMarker { side: verts.clone() });
        }
    }
    let mut used: BTreeMap<Vec<usize>, bool> = map.keys().map(|k| (k.clone(), false)).collect();
    let mesh = build_impl(dim, vertices, cells, |key, _mid| {
        if let Some(m) = map.get(key) {
            *used.get_mut(key).unwrap() = true;
            Ok(*m)
        } else {
            Err(MeshError::UnmarkedBoundary { side: key.to_vec() })
        }
    })?;
    if let Some((key, _)) = used.iter().find(|(_, &u)| !u) {
        return Err(MeshError::InvalidMarker { side: key.clone() });
    }
    Ok(mesh)
}

/// Builds a triangulation, marking boundary sides by a rule on side midpoints.
pub fn build_with_rule(
    dim: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    rule: impl Fn(&[f64]) -> SideMarker,
) -> Result<Triangulation, MeshError> {
    build_impl(dim, vertices, cells, |key, mid| {
        let m = rule(mid);
        if m == SideMarker::Interior {
            Err(MeshError::UnmarkedBoundary { side: key.to_vec() })
        } else {
            Ok(m)
        }
    })
}

fn build_impl(
    dim: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    mut boundary_marker: impl FnMut(&[usize], &[f64]) -> Result<SideMarker, MeshError>,
) -> Result<Triangulation, MeshError> {
    if dim != 2 && dim != 3 {
        return Err(MeshError::UnsupportedDimension(dim));
    }
    for (i, v) in vertices.iter().enumerate() {
        if v.len() != dim {
            return Err(MeshError::InvalidParams(format!(
                "vertex {i} has {} coordinates, expected {dim}",
                v.len()
            )));
        }
    }

    let mut elements = Vec::with_capacity(cells.len());
    for (t, cell) in cells.iter().enumerate() {
        if cell.len() != dim + 1 {
            return Err(MeshError::InvalidParams(format!(
                "cell {t} has {} vertices, expected {}",
                cell.len(),
                dim + 1
            )));
        }
        for &v in cell {
            if v >= vertices.len() {
                return Err(MeshError::InvalidIndex {
                    index: v,
                    limit: vertices.len(),
                });
            }
        }
        let pts: Vec<&[f64]> = cell.iter().map(|&v| vertices[v].as_slice()).collect();
        let volume = simplex_volume(dim, &pts);
        let mut max_edge: f64 = 0.0;
        for i in 0..cell.len() {
            for j in (i + 1)..cell.len() {
                max_edge = max_edge.max(vnorm(&vsub(pts[i], pts[j])));
            }
        }
        if volume <= DEGENERACY_RTOL * max_edge.powi(dim as i32) {
            return Err(MeshError::DegenerateElement { element: t, volume });
        }
        let mut barycenter = vec![0.0; dim];
        for p in &pts {
            for i in 0..dim {
                barycenter[i] += p[i] / (dim + 1) as f64;
            }
        }
        elements.push(Element {
            vertices: cell.clone(),
            volume,
            barycenter,
        });
    }

    // side key -> adjacent (element, local index of the opposite vertex)
    let mut side_map: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
    for (t, cell) in cells.iter().enumerate() {
        for local in 0..=dim {
            let mut key: Vec<usize> = cell
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != local)
                .map(|(_, &v)| v)
                .collect();
            key.sort_unstable();
            let entry = side_map.entry(key.clone()).or_default();
            entry.push((t, local));
            if entry.len() > 2 {
                return Err(MeshError::NonConforming { side: key });
            }
        }
    }

    let mut sides = Vec::with_capacity(side_map.len());
    let mut element_sides = vec![Vec::with_capacity(dim + 1); elements.len()];
    for (key, mut adj) in side_map {
        adj.sort_unstable_by_key(|&(t, _)| t);
        let (minus, minus_local) = adj[0];
        let opposite_minus = cells[minus][minus_local];
        let pts: Vec<&[f64]> = key.iter().map(|&v| vertices[v].as_slice()).collect();
        let (area, mut normal) = side_area_normal(dim, &pts);
        let mut midpoint = vec![0.0; dim];
        for p in &pts {
            for i in 0..dim {
                midpoint[i] += p[i] / dim as f64;
            }
        }
        // orient away from the opposite vertex of T_-
        let away = vsub(&midpoint, &vertices[opposite_minus]);
        if vdot(&normal, &away) < 0.0 {
            for n in &mut normal {
                *n = -*n;
            }
        }
        let (plus, opposite_plus, marker) = if adj.len() == 2 {
            let (plus, plus_local) = adj[1];
            (Some(plus), Some(cells[plus][plus_local]), SideMarker::Interior)
        } else {
            (None, None, boundary_marker(&key, &midpoint)?)
        };
        let id = sides.len();
        element_sides[minus].push((id, 1.0));
        if let Some(p) = plus {
            element_sides[p].push((id, -1.0));
        }
        sides.push(Side {
            vertices: key,
            area,
            midpoint,
            normal,
            minus,
            plus,
            opposite_minus,
            opposite_plus,
            marker,
        });
    }

    Ok(Triangulation {
        dim,
        vertices,
        elements,
        sides,
        element_sides,
    })
}

/// Diagonal pattern for `square_diag` grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagonal {
    /// Split along (i,j)-(i+1,j+1).
    Right,
    /// Split along (i+1,j)-(i,j+1).
    Left,
    /// Split into four triangles around the square center.
    Crisscross,
}

/// Built-in mesh generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    /// The reference triangle (0,0), (1,0), (0,1).
    SingleSimplex,
    /// n x n grid on the unit square, each cell split by `diagonal`.
    SquareDiag { n: usize, diagonal: Diagonal },
    /// Macro triangle split at its barycenter into three subtriangles.
    Bary3,
    /// Unit square halved along the right diagonal.
    TwoTriangles,
    /// Unit cube split into six tetrahedra around the main diagonal.
    Cube6,
}

impl MeshKind {
    pub fn label(&self) -> String {
        match self {
            MeshKind::SingleSimplex => "single_simplex".into(),
            MeshKind::SquareDiag { n, diagonal } => {
                let d = match diagonal {
                    Diagonal::Right => "right",
                    Diagonal::Left => "left",
                    Diagonal::Crisscross => "crisscross",
                };
                format!("square_diag({n},{d})")
            }
            MeshKind::Bary3 => "bary3".into(),
            MeshKind::TwoTriangles => "two_triangles".into(),
            MeshKind::Cube6 => "cube6".into(),
        }
    }
}

/// Named boundary partitions, decided on side midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryConfig {
    AllDirichlet,
    AllNeumann,
    /// Sides whose midpoint has vanishing last coordinate are Dirichlet.
    BottomDirichlet,
    /// Last coordinate 0 or 1 gives Dirichlet; the two parts are disjoint.
    TopBottomDirichlet,
}

impl BoundaryConfig {
    pub fn marker_at(&self, midpoint: &[f64]) -> SideMarker {
        let last = *midpoint.last().unwrap();
        match self {
            BoundaryConfig::AllDirichlet => SideMarker::Dirichlet,
            BoundaryConfig::AllNeumann => SideMarker::Neumann,
            BoundaryConfig::BottomDirichlet => {
                if last.abs() < BOUNDARY_COORD_TOL {
                    SideMarker::Dirichlet
                } else {
                    SideMarker::Neumann
                }
            }
            BoundaryConfig::TopBottomDirichlet => {
                if last.abs() < BOUNDARY_COORD_TOL || (last - 1.0).abs() < BOUNDARY_COORD_TOL {
                    SideMarker::Dirichlet
                } else {
                    SideMarker::Neumann
                }
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BoundaryConfig::AllDirichlet => "all-d",
            BoundaryConfig::AllNeumann => "all-n",
            BoundaryConfig::BottomDirichlet => "bottom-d",
            BoundaryConfig::TopBottomDirichlet => "topbottom-d",
        }
    }
}

/// Generates one of the built-in meshes with a named boundary partition.
pub fn generate(kind: MeshKind, boundary: BoundaryConfig) -> Result<Triangulation, MeshError> {
    generate_with(kind, |mid| boundary.marker_at(mid))
}

/// Generates one of the built-in meshes, marking boundary sides by a rule
/// evaluated at side midpoints.
pub fn generate_with(
    kind: MeshKind,
    rule: impl Fn(&[f64]) -> SideMarker,
) -> Result<Triangulation, MeshError> {
    let (dim, vertices, cells) = match kind {
        MeshKind::SingleSimplex => (
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0, 1, 2]],
        ),
        MeshKind::Bary3 => (
            2,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0 / 3.0, 1.0 / 3.0],
            ],
            vec![vec![0, 1, 3], vec![1, 2, 3], vec![2, 0, 3]],
        ),
        MeshKind::TwoTriangles => square_diag_cells(1, Diagonal::Right)?,
        MeshKind::SquareDiag { n, diagonal } => square_diag_cells(n, diagonal)?,
        MeshKind::Cube6 => cube6_cells(),
    };
    build_with_rule(dim, vertices, cells, rule)
}

fn square_diag_cells(
    n: usize,
    diagonal: Diagonal,
) -> Result<(usize, Vec<Vec<f64>>, Vec<Vec<usize>>), MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParams("square_diag requires n >= 1".into()));
    }
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(vec![i as f64 * h, j as f64 * h]);
        }
    }
    let mut cells = Vec::new();
    match diagonal {
        Diagonal::Right => {
            for j in 0..n {
                for i in 0..n {
                    cells.push(vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                    cells.push(vec![idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
                }
            }
        }
        Diagonal::Left => {
            for j in 0..n {
                for i in 0..n {
                    cells.push(vec![idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
                    cells.push(vec![idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
                }
            }
        }
        Diagonal::Crisscross => {
            let center = |i: usize, j: usize| (n + 1) * (n + 1) + j * n + i;
            for j in 0..n {
                for i in 0..n {
                    vertices.push(vec![(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
                    let c = center(i, j);
                    debug_assert_eq!(c, vertices.len() - 1);
                    cells.push(vec![idx(i, j), idx(i + 1, j), c]);
                    cells.push(vec![idx(i + 1, j), idx(i + 1, j + 1), c]);
                    cells.push(vec![idx(i + 1, j + 1), idx(i, j + 1), c]);
                    cells.push(vec![idx(i, j + 1), idx(i, j), c]);
                }
            }
        }
    }
    Ok((2, vertices, cells))
}

/// Kuhn triangulation: six tetrahedra sharing the main diagonal.
fn cube6_cells() -> (usize, Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let corner = |p: [usize; 3]| p[0] + 2 * p[1] + 4 * p[2];
    let mut vertices = Vec::with_capacity(8);
    for k in 0..2 {
        for j in 0..2 {
            for i in 0..2 {
                vertices.push(vec![i as f64, j as f64, k as f64]);
            }
        }
    }
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(6);
    for perm in perms {
        let mut p = [0usize; 3];
        let mut cell = vec![corner(p)];
        for axis in perm {
            p[axis] = 1;
            cell.push(corner(p));
        }
        cells.push(cell);
    }
    (3, vertices, cells)
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    boundary: Vec<BoundaryEntry>,
}

#[derive(Serialize, Deserialize)]
struct BoundaryEntry {
    side: Vec<usize>,
    marker: SideMarker,
}

impl Triangulation {
    /// Reads the JSON interchange format; rejects files violating the
    /// `build` preconditions.
    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let file: MeshFile =
            serde_json::from_str(text).map_err(|e| MeshError::Parse(e.to_string()))?;
        let markers: Vec<(Vec<usize>, SideMarker)> = file
            .boundary
            .into_iter()
            .map(|b| (b.side, b.marker))
            .collect();
        build(file.dim, file.vertices, file.cells, &markers)
    }

    pub fn to_json(&self) -> String {
        let file = MeshFile {
            dim: self.dim,
            vertices: self.vertices.clone(),
            cells: self.elements.iter().map(|e| e.vertices.clone()).collect(),
            boundary: self
                .sides
                .iter()
                .filter(|s| s.is_boundary())
                .map(|s| BoundaryEntry {
                    side: s.vertices.clone(),
                    marker: s.marker,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("mesh serialization cannot fail")
    }
}

/// Undirected graph over elements with interior sides as edges.
#[derive(Debug)]
pub struct ElementGraph {
    pub n_elements: usize,
    /// Edges `(smaller element, larger element, side index)`.
    pub edges: Vec<(usize, usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Builds the element adjacency graph of a mesh.
pub fn element_adjacency(mesh: &Triangulation) -> ElementGraph {
    let n = mesh.n_elements();
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); n];
    for (s, side) in mesh.sides.iter().enumerate() {
        if let Some(plus) = side.plus {
            edges.push((side.minus, plus, s));
            adjacency[side.minus].push((plus, s));
            adjacency[plus].push((side.minus, s));
        }
    }
    ElementGraph {
        n_elements: n,
        edges,
        adjacency,
    }
}

impl ElementGraph {
    pub fn neighbors(&self, element: usize) -> &[(usize, usize)] {
        &self.adjacency[element]
    }

    /// BFS spanning forest: `parent[t] = (parent element, connecting side)`.
    pub fn spanning_forest(&self) -> Vec<Option<(usize, usize)>> {
        let mut parent = vec![None; self.n_elements];
        let mut seen = vec![false; self.n_elements];
        for root in 0..self.n_elements {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(t) = queue.pop_front() {
                for &(u, s) in &self.adjacency[t] {
                    if !seen[u] {
                        seen[u] = true;
                        parent[u] = Some((t, s));
                        queue.push_back(u);
                    }
                }
            }
        }
        parent
    }

    pub fn n_components(&self) -> usize {
        let parent = self.spanning_forest();
        (0..self.n_elements).filter(|&t| parent[t].is_none()).count()
    }

    /// Dimension of the cycle space (edges - elements + components).
    pub fn cycle_space_dim(&self) -> usize {
        self.edges.len() + self.n_components() - self.n_elements
    }

    /// Fundamental cycles of a BFS spanning forest. Each cycle is a closed
    /// walk `[(element, side to the next element); ...]`.
    pub fn cycle_basis(&self) -> Vec<Vec<(usize, usize)>> {
        let parent = self.spanning_forest();
        let tree_sides: std::collections::BTreeSet<usize> = parent
            .iter()
            .filter_map(|p| p.map(|(_, s)| s))
            .collect();

        let path_to_root = |mut t: usize| {
            let mut path = vec![t];
            while let Some((p, _)) = parent[t] {
                path.push(p);
                t = p;
            }
            path
        };

        let mut cycles = Vec::new();
        for &(u, v, s) in &self.edges {
            if tree_sides.contains(&s) {
                continue;
            }
            let pu = path_to_root(u);
            let pv = path_to_root(v);
            let in_pu: std::collections::BTreeMap<usize, usize> =
                pu.iter().enumerate().map(|(i, &t)| (t, i)).collect();
            let (lca_v, lca_u) = pv
                .iter()
                .enumerate()
                .find_map(|(j, t)| in_pu.get(t).map(|&i| (j, i)))
                .expect("elements in one component");
            // walk u -> lca along pu, then lca -> v along pv reversed, close via s
            let mut walk = Vec::new();
            for i in 0..lca_u {
                walk.push((pu[i], parent[pu[i]].unwrap().1));
            }
            for j in (0..lca_v).rev() {
                let (from, side) = parent[pv[j]].unwrap();
                debug_assert_eq!(from, pv[j + 1]);
                walk.push((pv[j + 1], side));
            }
            walk.push((v, s));
            cycles.push(walk);
        }
        cycles
    }
}
