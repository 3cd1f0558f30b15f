use serde::Serialize;

use super::{ScalarField, SurfaceError, SurfaceId, TriangulatedSurface};

/// The vertex-induced subcomplex `{v : h(v) < t}`.
#[derive(Debug, Clone, Serialize)]
pub struct SublevelDomain {
    threshold: f64,
    #[serde(skip)]
    vertex_active: Vec<bool>,
    active_vertices: Vec<usize>,
    active_triangles: Vec<usize>,
    active_edge_count: usize,
    boundary_edges: Vec<usize>,
    interior_vertices: Vec<usize>,
    euler_characteristic: i64,
    #[serde(skip)]
    surface_id: SurfaceId,
}

impl SublevelDomain {
    pub(crate) fn from_mask(surface: &TriangulatedSurface, threshold: f64, vertex_active: Vec<bool>) -> Self {
        let active_vertices: Vec<usize> = (0..vertex_active.len()).filter(|&v| vertex_active[v]).collect();
        let active_triangles: Vec<usize> = (0..surface.triangle_count())
            .filter(|&t| surface.triangles()[t].iter().all(|&v| vertex_active[v]))
            .collect();
        let mut triangle_active = vec![false; surface.triangle_count()];
        for &t in &active_triangles {
            triangle_active[t] = true;
        }
        let mut active_edge_count = 0;
        let mut boundary_edges = Vec::new();
        for (e, &[a, b]) in surface.edges().iter().enumerate() {
            if vertex_active[a] && vertex_active[b] {
                active_edge_count += 1;
                let incident = surface.edge_triangles(e).iter().filter(|&&t| triangle_active[t]).count();
                if incident == 1 {
                    boundary_edges.push(e);
                }
            }
        }
        let interior_vertices: Vec<usize> = active_vertices
            .iter()
            .copied()
            .filter(|&v| {
                !surface.is_boundary_vertex(v) && surface.vertex_triangles(v).iter().all(|&t| triangle_active[t])
            })
            .collect();
        let euler_characteristic =
            active_vertices.len() as i64 - active_edge_count as i64 + active_triangles.len() as i64;
        SublevelDomain {
            threshold,
            vertex_active,
            active_vertices,
            active_triangles,
            active_edge_count,
            boundary_edges,
            interior_vertices,
            euler_characteristic,
            surface_id: surface.id(),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_active(&self, v: usize) -> bool {
        self.vertex_active[v]
    }

    pub fn active_vertices(&self) -> &[usize] {
        &self.active_vertices
    }

    pub fn active_triangles(&self) -> &[usize] {
        &self.active_triangles
    }

    pub fn active_edge_count(&self) -> usize {
        self.active_edge_count
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    /// Active vertices whose whole star is active and which are not on the
    /// surface boundary: the Dirichlet degrees of freedom.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior_vertices
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.euler_characteristic
    }

    pub fn is_empty(&self) -> bool {
        self.active_vertices.is_empty()
    }

    pub fn surface_id(&self) -> SurfaceId {
        self.surface_id
    }
}

pub fn sublevel_domain(
    surface: &TriangulatedSurface,
    h: &ScalarField,
    t: f64,
) -> Result<SublevelDomain, SurfaceError> {
    h.check_surface(surface)?;
    let mask = h.values().iter().map(|&x| x < t).collect();
    Ok(SublevelDomain::from_mask(surface, t, mask))
}

pub fn euler_characteristic(domain: &SublevelDomain) -> i64 {
    domain.euler_characteristic()
}

/// Vertices sorted by `(h, index)`; every prefix is a member of the
/// discrete filtration.
#[derive(Debug, Clone)]
pub struct Filtration {
    order: Vec<usize>,
    sorted_values: Vec<f64>,
}

impl Filtration {
    pub fn new(surface: &TriangulatedSurface, h: &ScalarField) -> Result<Self, SurfaceError> {
        h.check_surface(surface)?;
        let values = h.values();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let sorted_values = order.iter().map(|&v| values[v]).collect();
        Ok(Filtration { order, sorted_values })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Value at which the `j`-th vertex (0-based, sorted) enters: it is
    /// active for every `t > entry_value(j)`.
    pub fn entry_value(&self, j: usize) -> f64 {
        self.sorted_values[j]
    }

    /// Number of vertices with `h < t`.
    pub fn count_below(&self, t: f64) -> usize {
        self.sorted_values.partition_point(|&x| x < t)
    }

    /// The domain containing the first `count` vertices.
    pub fn prefix(&self, surface: &TriangulatedSurface, count: usize) -> SublevelDomain {
        let count = count.min(self.order.len());
        let mut mask = vec![false; self.order.len()];
        for &v in &self.order[..count] {
            mask[v] = true;
        }
        let threshold = if count < self.sorted_values.len() {
            self.sorted_values[count]
        } else {
            let last = self.sorted_values[count - 1];
            last + (last.abs() + 1.0) * 1e-12
        };
        SublevelDomain::from_mask(surface, threshold, mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_surface, morse_function, CriticalCatalog, MorseOptions, SurfaceKind};
    use proptest::prelude::*;

    #[test]
    fn empty_below_minimum() {
        let s = build_surface(SurfaceKind::Rectangle, 8, &[1.0, 1.0]).unwrap();
        let (h, _) = morse_function(&s, 40, MorseOptions::default()).unwrap();
        let d = sublevel_domain(&s, &h, -1.0).unwrap();
        assert!(d.is_empty());
        assert_eq!(euler_characteristic(&d), 0);
        let d = sublevel_domain(&s, &h, 0.0).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn small_ball_is_a_disk() {
        let s = build_surface(SurfaceKind::Cylinder, 32, &[1.0, 2.0]).unwrap();
        let p0 = s.nearest_vertex([0.5, 1.0]);
        let (h, _) = morse_function(&s, p0, MorseOptions::default()).unwrap();
        let d = sublevel_domain(&s, &h, 0.01).unwrap();
        assert_eq!(d.euler_characteristic(), 1);
        assert!(!d.interior_vertices().is_empty());
    }

    #[test]
    fn full_domain_counts() {
        let s = build_surface(SurfaceKind::Rectangle, 8, &[1.0, 1.0]).unwrap();
        let (h, _) = morse_function(&s, 0, MorseOptions::default()).unwrap();
        let d = sublevel_domain(&s, &h, h.max() + 1.0).unwrap();
        assert_eq!(d.active_vertices().len(), 81);
        assert_eq!(d.active_triangles().len(), 128);
        assert_eq!(d.boundary_edges().len(), 32);
        assert_eq!(d.interior_vertices().len(), 49);
        assert_eq!(d.euler_characteristic(), 1);
    }

    #[test]
    fn boundary_edges_have_one_active_triangle() {
        let s = build_surface(SurfaceKind::FlatTorus, 16, &[1.0, 1.0]).unwrap();
        let (h, _) = morse_function(&s, 0, MorseOptions::default()).unwrap();
        let d = sublevel_domain(&s, &h, 0.1).unwrap();
        for &e in d.boundary_edges() {
            let n = s.edge_triangles(e).iter().filter(|t| d.active_triangles().contains(t)).count();
            assert_eq!(n, 1);
        }
    }

    fn setup() -> (TriangulatedSurface, ScalarField, CriticalCatalog) {
        let s = build_surface(SurfaceKind::Cylinder, 16, &[1.0, 1.5]).unwrap();
        let p0 = s.nearest_vertex([0.5, 0.75]);
        let (h, c) = morse_function(&s, p0, MorseOptions { perturbation_scale: 1e-2, seed: 3 }).unwrap();
        (s, h, c)
    }

    #[test]
    fn chi_constant_between_critical_values() {
        let (s, h, cat) = setup();
        let f = Filtration::new(&s, &h).unwrap();
        let crit: Vec<f64> = cat.values().collect();
        let mut prev: Option<(usize, i64)> = None;
        for j in 0..=f.len() {
            let chi = f.prefix(&s, j).euler_characteristic();
            if let Some((pj, pchi)) = prev {
                if chi != pchi {
                    // the vertex that just entered must be critical
                    let entered = f.entry_value(pj);
                    assert!(crit.contains(&entered), "chi changed at non-critical value {entered}");
                }
            }
            prev = Some((j, chi));
        }
        assert_eq!(cat.alternating_sum(), s.euler_characteristic());
    }

    #[test]
    fn prefix_matches_threshold_domain() {
        let (s, h, _) = setup();
        let f = Filtration::new(&s, &h).unwrap();
        for j in [0, 1, 17, 100, f.len()] {
            let p = f.prefix(&s, j);
            let d = sublevel_domain(&s, &h, p.threshold()).unwrap();
            assert_eq!(p.active_vertices(), d.active_vertices());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn nested_and_exhaustive(t1 in -0.1f64..0.7, dt in 0.0f64..0.3) {
            let (s, h, _) = setup();
            let t2 = t1 + dt;
            let a = sublevel_domain(&s, &h, t1).unwrap();
            let b = sublevel_domain(&s, &h, t2).unwrap();
            for &v in a.active_vertices() {
                prop_assert!(b.is_active(v));
            }
            for &v in a.interior_vertices() {
                prop_assert!(b.interior_vertices().binary_search(&v).is_ok());
            }
            let strictly = h.values().iter().any(|&x| x >= t1 && x < t2);
            prop_assert_eq!(strictly, b.active_vertices().len() > a.active_vertices().len());
            // left continuity: the union of D(s) for s < t2 equals D(t2)
            let f = Filtration::new(&s, &h).unwrap();
            let below = f.count_below(t2);
            let union = if below == 0 { 0 } else { f.count_below(f.entry_value(below - 1) + 1e-15 * (1.0 + t2.abs())) };
            prop_assert_eq!(union, b.active_vertices().len());
        }
    }
}
