//! Shortest-path distances on the edge graph refined by one level of edge
//! midpoints; every segment is a straight line inside one flat triangle,
//! so the result is an upper bound on the polyhedral geodesic distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{ScalarField, SurfaceError, TriangulatedSurface};

#[derive(Copy, Clone, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Intrinsic planar layout of triangle `t` from its edge lengths.
fn layout(surface: &TriangulatedSurface, t: usize) -> [[f64; 2]; 3] {
    // corner 0 at origin, corner 1 on the x axis
    let [l0, l1, l2] = surface.triangle_edge_lengths(t);
    let x = (l1 * l1 + l2 * l2 - l0 * l0) / (2.0 * l2);
    let y = (l1 * l1 - x * x).max(0.0).sqrt();
    [[0.0, 0.0], [l2, 0.0], [x, y]]
}

/// Adjacency of the subdivided graph: original vertices then edge midpoints.
fn subdivided_graph(surface: &TriangulatedSurface) -> Vec<Vec<(usize, f64)>> {
    let nv = surface.vertex_count();
    let mut adj = vec![Vec::new(); nv + surface.edge_count()];
    for t in 0..surface.triangle_count() {
        let p = layout(surface, t);
        let tri = surface.triangles()[t];
        let te = surface.triangle_edges(t);
        let mut nodes = [(0usize, [0.0f64; 2]); 6];
        for i in 0..3 {
            nodes[i] = (tri[i], p[i]);
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            nodes[3 + i] = (nv + te[i], [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]);
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                let (a, pa) = nodes[i];
                let (b, pb) = nodes[j];
                let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
                adj[a].push((b, d));
                adj[b].push((a, d));
            }
        }
    }
    adj
}

fn dijkstra(adj: &[Vec<(usize, f64)>], sources: &[usize]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(State { dist: 0.0, node: s });
    }
    while let Some(State { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(State { dist: nd, node: next });
            }
        }
    }
    dist
}

/// Distance from a set of source vertices to every vertex.
pub fn multi_source_distance(
    surface: &TriangulatedSurface,
    sources: &[usize],
) -> Result<ScalarField, SurfaceError> {
    for &s in sources {
        surface.check_vertex(s)?;
    }
    let adj = subdivided_graph(surface);
    let dist = dijkstra(&adj, sources);
    let nv = surface.vertex_count();
    if let Some(u) = dist[..nv].iter().position(|d| !d.is_finite()) {
        return Err(SurfaceError::Disconnected {
            source_vertex: sources.first().copied().unwrap_or(0),
            unreachable: u,
        });
    }
    ScalarField::new(surface, dist[..nv].to_vec())
}

pub fn geodesic_distance(surface: &TriangulatedSurface, source: usize) -> Result<ScalarField, SurfaceError> {
    multi_source_distance(surface, &[source])
}

/// Distance to the surface boundary (the `ζ` of the metric stretch).
pub fn distance_to_boundary(surface: &TriangulatedSurface) -> Result<ScalarField, SurfaceError> {
    let sources: Vec<usize> = (0..surface.vertex_count()).filter(|&v| surface.is_boundary_vertex(v)).collect();
    if sources.is_empty() {
        return Err(SurfaceError::NoBoundary);
    }
    multi_source_distance(surface, &sources)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_surface, Identification, SurfaceKind};
    use rand::{Rng, SeedableRng};

    // Worst graph-distance overshoot over the exact flat distance, measured
    // over all vertices at resolutions 16, 32 and 64 on the rectangle and
    // torus: 0.0824 (it does not shrink with refinement).
    const EPS_MESH: f64 = 0.085;

    #[test]
    fn source_is_zero_and_edges_relax() {
        let s = build_surface(SurfaceKind::Cylinder, 8, &[1.0, 1.0]).unwrap();
        let d = geodesic_distance(&s, 5).unwrap();
        assert_eq!(d.values()[5], 0.0);
        for (e, &[a, b]) in s.edges().iter().enumerate() {
            let l = s.edge_lengths()[e];
            assert!(d.values()[a] <= d.values()[b] + l + 1e-12);
            assert!(d.values()[b] <= d.values()[a] + l + 1e-12);
        }
    }

    #[test]
    fn rectangle_corner_to_corner() {
        let s = build_surface(SurfaceKind::Rectangle, 32, &[1.0, 1.0]).unwrap();
        let src = s.nearest_vertex([0.0, 0.0]);
        let d = geodesic_distance(&s, src).unwrap();
        let far = d.values()[s.nearest_vertex([1.0, 1.0])];
        assert!(far >= 2f64.sqrt() - 1e-12);
        assert!(far <= 2f64.sqrt() * (1.0 + EPS_MESH));
        // against the grain of the diagonals
        let src = s.nearest_vertex([1.0, 0.0]);
        let d = geodesic_distance(&s, src).unwrap();
        let far = d.values()[s.nearest_vertex([0.0, 1.0])];
        assert!(far >= 2f64.sqrt() - 1e-12);
        assert!(far <= 2f64.sqrt() * (1.0 + EPS_MESH));
    }

    #[test]
    fn overshoot_bound_everywhere() {
        for kind in [SurfaceKind::Rectangle, SurfaceKind::FlatTorus] {
            let s = build_surface(kind, 32, &[1.0, 1.0]).unwrap();
            let src = s.nearest_vertex([0.5, 0.5]);
            let d = geodesic_distance(&s, src).unwrap();
            for (v, p) in s.positions().iter().enumerate() {
                let mut dx = (p[0] - 0.5).abs();
                let mut dy = (p[1] - 0.5).abs();
                if kind == SurfaceKind::FlatTorus {
                    dx = dx.min(1.0 - dx);
                    dy = dy.min(1.0 - dy);
                }
                let exact = (dx * dx + dy * dy).sqrt();
                assert!(d.values()[v] >= exact - 1e-12);
                assert!(d.values()[v] <= exact * (1.0 + EPS_MESH) + 1e-12, "{kind:?} {v}");
            }
        }
    }

    #[test]
    fn torus_antipode() {
        let s = build_surface(SurfaceKind::FlatTorus, 32, &[1.0, 1.0]).unwrap();
        let d = geodesic_distance(&s, 0).unwrap();
        let far = d.values()[s.nearest_vertex([0.5, 0.5])];
        // min over deck translates of |(0.5, 0.5) + (i, j)|
        let exact = (0.5f64 * 0.5 + 0.5 * 0.5).sqrt();
        assert!(far >= exact - 1e-12 && far <= exact * (1.0 + EPS_MESH));
        assert!((exact - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        // wraps around: the far corner of the parameter square is a neighbor of 0
        let corner = d.values()[s.nearest_vertex([31.0 / 32.0, 31.0 / 32.0])];
        assert!(corner < 0.05);
    }

    #[test]
    fn symmetric_in_source_and_target() {
        let s = build_surface(SurfaceKind::Cylinder, 16, &[1.0, 1.0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u = rng.gen_range(0..s.vertex_count());
            let v = rng.gen_range(0..s.vertex_count());
            let duv = geodesic_distance(&s, u).unwrap().values()[v];
            let dvu = geodesic_distance(&s, v).unwrap().values()[u];
            assert!((duv - dvu).abs() <= 1e-12 * duv.max(1.0), "{duv} {dvu}");
        }
    }

    #[test]
    fn disconnected_names_unreachable_vertex() {
        let p = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0], [6.0, 5.0], [5.0, 6.0]];
        let s = TriangulatedSurface::new_unchecked_connectivity(p, vec![[0, 1, 2], [3, 4, 5]], Identification::None)
            .unwrap();
        match geodesic_distance(&s, 0) {
            Err(SurfaceError::Disconnected { source_vertex: 0, unreachable }) => assert_eq!(unreachable, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn boundary_distance_requires_boundary() {
        let s = build_surface(SurfaceKind::FlatTorus, 8, &[1.0, 1.0]).unwrap();
        assert!(matches!(distance_to_boundary(&s), Err(SurfaceError::NoBoundary)));
        let s = build_surface(SurfaceKind::Rectangle, 8, &[1.0, 1.0]).unwrap();
        let z = distance_to_boundary(&s).unwrap();
        assert!((z.values()[s.nearest_vertex([0.5, 0.5])] - 0.5).abs() < 1e-12);
    }
}
