//! Discrete 2-manifolds with an intrinsic metric, geodesic-distance Morse
//! functions and vertex-induced sublevel-set domains.

mod build;
mod geodesic;
mod morse;
mod off;
mod stretch;
mod sublevel;

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build_surface, SurfaceKind};
pub use geodesic::{distance_to_boundary, geodesic_distance, multi_source_distance};
pub use morse::{morse_function, CriticalCatalog, CriticalKind, CriticalPoint, MorseOptions};
pub use off::{read_off, write_off};
pub use stretch::stretch_metric;
pub use sublevel::{euler_characteristic, sublevel_domain, Filtration, SublevelDomain};

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("resolution must be at least 4, got {0}")]
    Resolution(usize),
    #[error("dimensions must be positive and finite, got {0:?}")]
    Dimensions(Vec<f64>),
    #[error("triangle {triangle} references vertex {vertex} out of range")]
    VertexOutOfRange { triangle: usize, vertex: usize },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("edge {a}-{b} has non-positive length {length}")]
    EdgeLength { a: usize, b: usize, length: f64 },
    #[error("triangle {0} violates the triangle inequality")]
    TriangleInequality(usize),
    #[error("edge {a}-{b} is not manifold ({count} incident triangles)")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("inconsistent orientation along edge {a}-{b}")]
    Orientation { a: usize, b: usize },
    #[error("vertex {0} has a non-manifold link")]
    NonManifoldVertex(usize),
    #[error("vertex {0} is not used by any triangle")]
    IsolatedVertex(usize),
    #[error("surface is disconnected: vertex {unreachable} is not reachable from vertex {source_vertex}")]
    Disconnected { source_vertex: usize, unreachable: usize },
    #[error("vertex index {index} out of range for {count} vertices")]
    InvalidVertex { index: usize, count: usize },
    #[error("field length {got} does not match vertex count {expected}")]
    FieldLength { expected: usize, got: usize },
    #[error("field value at vertex {0} is not finite")]
    NonFiniteField(usize),
    #[error("field belongs to a different surface")]
    SurfaceMismatch,
    #[error("perturbation scale must be finite and non-negative, got {0}")]
    PerturbationScale(f64),
    #[error("critical values still coincide after {0} perturbation retries")]
    CoincidentCriticalValues(usize),
    #[error("surface has no boundary")]
    NoBoundary,
    #[error("invalid stretch parameters: band width {band_width}, strength {strength}")]
    StretchParameters { band_width: f64, strength: f64 },
    #[error("conformal factor must be positive and finite at every vertex")]
    ConformalFactor,
    #[error("OFF parse error on line {line}: {message}")]
    OffParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Gluing of the parameter rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Identification {
    None,
    PeriodicX { period: f64 },
    PeriodicXY { period_x: f64, period_y: f64 },
}

impl Identification {
    fn periods(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            Identification::None => (None, None),
            Identification::PeriodicX { period } => (Some(period), None),
            Identification::PeriodicXY { period_x, period_y } => (Some(period_x), Some(period_y)),
        }
    }
}

/// Stable fingerprint tying fields and operator data to one surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceId(pub u64);

/// A connected, oriented triangulated 2-manifold (possibly with boundary).
///
/// Positions are parameter coordinates; across a periodic seam the
/// corners of a triangle are unwrapped to the nearest deck translate.
/// The intrinsic metric lives in `edge_lengths`, which already includes
/// any conformal factor.
#[derive(Debug, Clone)]
pub struct TriangulatedSurface {
    positions: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    identification: Identification,
    conformal_factor: Option<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    edge_lengths: Vec<f64>,
    // edge opposite corner i of each triangle
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<Vec<usize>>,
    vertex_triangles: Vec<Vec<usize>>,
    vertex_neighbors: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    id: SurfaceId,
}

impl TriangulatedSurface {
    /// Validates and builds a surface. Edge lengths are measured from the
    /// unwrapped parameter positions.
    pub fn new(
        positions: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        identification: Identification,
    ) -> Result<Self, SurfaceError> {
        let surface = Self::assemble(positions, triangles, identification, None, None)?;
        surface.check_connected()?;
        Ok(surface)
    }

    /// Same as [`TriangulatedSurface::new`] without the connectivity check.
    #[cfg(test)]
    pub(crate) fn new_unchecked_connectivity(
        positions: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        identification: Identification,
    ) -> Result<Self, SurfaceError> {
        Self::assemble(positions, triangles, identification, None, None)
    }

    pub(crate) fn with_metric(
        &self,
        conformal_factor: Vec<f64>,
        edge_lengths: Vec<f64>,
    ) -> Result<Self, SurfaceError> {
        Self::assemble(
            self.positions.clone(),
            self.triangles.clone(),
            self.identification,
            Some(conformal_factor),
            Some(edge_lengths),
        )
    }

    fn assemble(
        positions: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        identification: Identification,
        conformal_factor: Option<Vec<f64>>,
        edge_lengths: Option<Vec<f64>>,
    ) -> Result<Self, SurfaceError> {
        let n = positions.len();
        if let Some(f) = &conformal_factor {
            if f.len() != n || f.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(SurfaceError::ConformalFactor);
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(SurfaceError::VertexOutOfRange { triangle: t, vertex: v });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(SurfaceError::DegenerateTriangle(t));
            }
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                if directed.insert((a, b), t).is_some() {
                    return Err(SurfaceError::Orientation { a, b });
                }
                let key = [a.min(b), a.max(b)];
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push(Vec::new());
                    edges.len() - 1
                });
                edge_triangles[e].push(t);
                te[i] = e;
            }
            triangle_edges.push(te);
        }
        for (e, tris) in edge_triangles.iter().enumerate() {
            if tris.len() > 2 {
                return Err(SurfaceError::NonManifoldEdge {
                    a: edges[e][0],
                    b: edges[e][1],
                    count: tris.len(),
                });
            }
        }

        let mut vertex_triangles = vec![Vec::new(); n];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_triangles[v].push(t);
            }
        }
        let mut vertex_neighbors = vec![Vec::new(); n];
        for &[a, b] in &edges {
            vertex_neighbors[a].push(b);
            vertex_neighbors[b].push(a);
        }
        for nb in &mut vertex_neighbors {
            nb.sort_unstable();
        }
        let mut boundary_vertex = vec![false; n];
        for (e, tris) in edge_triangles.iter().enumerate() {
            if tris.len() == 1 {
                boundary_vertex[edges[e][0]] = true;
                boundary_vertex[edges[e][1]] = true;
            }
        }

        let mut surface = TriangulatedSurface {
            positions,
            triangles,
            identification,
            conformal_factor,
            edges,
            edge_lengths: Vec::new(),
            triangle_edges,
            edge_triangles,
            vertex_triangles,
            vertex_neighbors,
            boundary_vertex,
            id: SurfaceId(0),
        };

        for v in 0..n {
            if surface.vertex_triangles[v].is_empty() {
                return Err(SurfaceError::IsolatedVertex(v));
            }
            if !surface.link_is_manifold(v) {
                return Err(SurfaceError::NonManifoldVertex(v));
            }
        }

        let lengths = match edge_lengths {
            Some(l) => l,
            None => surface.parameter_edge_lengths(),
        };
        for (e, &len) in lengths.iter().enumerate() {
            if !(len.is_finite() && len > 0.0) {
                return Err(SurfaceError::EdgeLength {
                    a: surface.edges[e][0],
                    b: surface.edges[e][1],
                    length: len,
                });
            }
        }
        surface.edge_lengths = lengths;
        for t in 0..surface.triangles.len() {
            let [a, b, c] = surface.triangle_edge_lengths(t);
            if a >= b + c || b >= a + c || c >= a + b {
                return Err(SurfaceError::TriangleInequality(t));
            }
            if surface.parameter_area(t) <= 0.0 {
                return Err(SurfaceError::DegenerateTriangle(t));
            }
        }
        surface.id = surface.fingerprint();
        Ok(surface)
    }

    fn link_is_manifold(&self, v: usize) -> bool {
        // the link edges must form a single cycle (interior) or a single path (boundary)
        let mut degree: HashMap<usize, usize> = HashMap::new();
        let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
        for &t in &self.vertex_triangles[v] {
            let (a, b) = self.link_edge(t, v);
            *degree.entry(a).or_default() += 1;
            *degree.entry(b).or_default() += 1;
            adjacency.entry(a).or_default().push(b);
            adjacency.entry(b).or_default().push(a);
        }
        if degree.values().any(|&d| d > 2) {
            return false;
        }
        let ends = degree.values().filter(|&&d| d == 1).count();
        if ends != 0 && ends != 2 {
            return false;
        }
        let start = *adjacency.keys().min().unwrap();
        let mut seen = vec![start];
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for &y in &adjacency[&x] {
                if !seen.contains(&y) {
                    seen.push(y);
                    stack.push(y);
                }
            }
        }
        seen.len() == adjacency.len()
    }

    fn check_connected(&self) -> Result<(), SurfaceError> {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.vertex_neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(u) => Err(SurfaceError::Disconnected { source_vertex: 0, unreachable: u }),
            None => Ok(()),
        }
    }

    fn fingerprint(&self) -> SurfaceId {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.positions.len().hash(&mut hasher);
        self.triangles.hash(&mut hasher);
        for p in &self.positions {
            p[0].to_bits().hash(&mut hasher);
            p[1].to_bits().hash(&mut hasher);
        }
        for l in &self.edge_lengths {
            l.to_bits().hash(&mut hasher);
        }
        SurfaceId(hasher.finish())
    }

    fn parameter_edge_lengths(&self) -> Vec<f64> {
        let mut lengths = vec![0.0; self.edges.len()];
        for t in 0..self.triangles.len() {
            let p = self.corner_positions(t);
            for i in 0..3 {
                let a = p[(i + 1) % 3];
                let b = p[(i + 2) % 3];
                lengths[self.triangle_edges[t][i]] = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            }
        }
        lengths
    }

    pub fn id(&self) -> SurfaceId {
        self.id
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn identification(&self) -> Identification {
        self.identification
    }

    pub fn conformal_factor(&self) -> Option<&[f64]> {
        self.conformal_factor.as_deref()
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn edge_triangles(&self, e: usize) -> &[usize] {
        &self.edge_triangles[e]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.vertex_neighbors[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn has_boundary(&self) -> bool {
        self.boundary_vertex.iter().any(|&b| b)
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_triangles[e].len() == 1
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edge_lengths.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn check_vertex(&self, v: usize) -> Result<(), SurfaceError> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(SurfaceError::InvalidVertex { index: v, count: self.vertex_count() })
        }
    }

    /// The two vertices of triangle `t` other than `v`, in triangle orientation.
    pub fn link_edge(&self, t: usize, v: usize) -> (usize, usize) {
        let tri = self.triangles[t];
        let i = tri.iter().position(|&x| x == v).expect("vertex not in triangle");
        (tri[(i + 1) % 3], tri[(i + 2) % 3])
    }

    /// Edge lengths of triangle `t`, opposite corners 0, 1, 2.
    pub fn triangle_edge_lengths(&self, t: usize) -> [f64; 3] {
        let te = self.triangle_edges[t];
        [self.edge_lengths[te[0]], self.edge_lengths[te[1]], self.edge_lengths[te[2]]]
    }

    /// Corners of triangle `t` in parameter coordinates, unwrapped across
    /// periodic seams to the translate nearest corner 0.
    pub fn corner_positions(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        let base = self.positions[tri[0]];
        let (px, py) = self.identification.periods();
        let mut out = [base; 3];
        for i in 1..3 {
            let mut p = self.positions[tri[i]];
            if let Some(px) = px {
                p[0] -= px * ((p[0] - base[0]) / px).round();
            }
            if let Some(py) = py {
                p[1] -= py * ((p[1] - base[1]) / py).round();
            }
            out[i] = p;
        }
        out
    }

    /// Signed area of triangle `t` in parameter coordinates.
    pub fn parameter_area(&self, t: usize) -> f64 {
        let p = self.corner_positions(t);
        0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
    }

    /// Conformal factor averaged over the corners of triangle `t` (1 when absent).
    pub fn triangle_conformal_factor(&self, t: usize) -> f64 {
        match &self.conformal_factor {
            None => 1.0,
            Some(f) => {
                let tri = self.triangles[t];
                (f[tri[0]] + f[tri[1]] + f[tri[2]]) / 3.0
            }
        }
    }

    /// Vertex nearest the given parameter coordinates (periodic aware).
    pub fn nearest_vertex(&self, at: [f64; 2]) -> usize {
        let (px, py) = self.identification.periods();
        let wrap = |d: f64, p: Option<f64>| match p {
            Some(p) => d - p * (d / p).round(),
            None => d,
        };
        let mut best = (f64::INFINITY, 0);
        for (v, p) in self.positions.iter().enumerate() {
            let dx = wrap(p[0] - at[0], px);
            let dy = wrap(p[1] - at[1], py);
            let d = dx * dx + dy * dy;
            if d < best.0 {
                best = (d, v);
            }
        }
        best.1
    }

    /// Euler characteristic of the whole complex.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.triangle_count() as i64
    }

    /// Number of closed boundary loops.
    pub fn boundary_loop_count(&self) -> usize {
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        for (e, tris) in self.edge_triangles.iter().enumerate() {
            if tris.len() == 1 {
                let [a, b] = self.edges[e];
                next.entry(a).or_default().push(b);
                next.entry(b).or_default().push(a);
            }
        }
        let mut seen = std::collections::HashSet::new();
        let mut loops = 0;
        let mut keys: Vec<usize> = next.keys().copied().collect();
        keys.sort_unstable();
        for start in keys {
            if !seen.insert(start) {
                continue;
            }
            loops += 1;
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for &y in &next[&x] {
                    if seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
        }
        loops
    }
}

/// One real value per vertex of a specific surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    values: Vec<f64>,
    surface_id: SurfaceId,
}

impl ScalarField {
    pub fn new(surface: &TriangulatedSurface, values: Vec<f64>) -> Result<Self, SurfaceError> {
        if values.len() != surface.vertex_count() {
            return Err(SurfaceError::FieldLength { expected: surface.vertex_count(), got: values.len() });
        }
        if let Some(v) = values.iter().position(|x| !x.is_finite()) {
            return Err(SurfaceError::NonFiniteField(v));
        }
        Ok(ScalarField { values, surface_id: surface.id() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn surface_id(&self) -> SurfaceId {
        self.surface_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_surface(&self, surface: &TriangulatedSurface) -> Result<(), SurfaceError> {
        if self.surface_id == surface.id() && self.values.len() == surface.vertex_count() {
            Ok(())
        } else {
            Err(SurfaceError::SurfaceMismatch)
        }
    }
}
