//! Squared-distance Morse functions and lower-star critical point catalogs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{geodesic_distance, ScalarField, SurfaceError, TriangulatedSurface};

const MAX_RETRIES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
}

impl CriticalKind {
    pub fn index(self) -> u8 {
        match self {
            CriticalKind::Minimum => 0,
            CriticalKind::Saddle => 1,
            CriticalKind::Maximum => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub vertex: usize,
    pub value: f64,
    pub kind: CriticalKind,
    pub index: u8,
    /// More than one for a degenerate (monkey) saddle: lower link with
    /// `multiplicity + 1` components.
    pub multiplicity: usize,
}

/// Critical points sorted by strictly increasing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCatalog {
    pub entries: Vec<CriticalPoint>,
    pub base_point: usize,
}

impl CriticalCatalog {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.value)
    }

    /// Morse alternating sum, counted with multiplicity.
    pub fn alternating_sum(&self) -> i64 {
        self.entries
            .iter()
            .map(|e| if e.index % 2 == 0 { e.multiplicity as i64 } else { -(e.multiplicity as i64) })
            .sum()
    }

    pub fn count(&self, kind: CriticalKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).map(|e| e.multiplicity).sum()
    }

    /// Builds the catalog for `h` using the (value, index) total order.
    pub fn from_field(surface: &TriangulatedSurface, h: &ScalarField, base_point: usize) -> Self {
        let values = h.values();
        let below = |a: usize, b: usize| (values[a], a) < (values[b], b);
        let mut entries = Vec::new();
        for v in 0..surface.vertex_count() {
            let lower: Vec<usize> = surface.neighbors(v).iter().copied().filter(|&w| below(w, v)).collect();
            let lower_faces = surface
                .vertex_triangles(v)
                .iter()
                .filter(|&&t| {
                    let (a, b) = surface.link_edge(t, v);
                    below(a, v) && below(b, v)
                })
                .count();
            // Euler characteristic change when v enters the vertex-induced complex
            let delta = 1 - lower.len() as i64 + lower_faces as i64;
            let (kind, multiplicity) = match delta {
                0 => continue,
                1 if lower.is_empty() => (CriticalKind::Minimum, 1),
                1 => (CriticalKind::Maximum, 1),
                d => (CriticalKind::Saddle, (-d) as usize),
            };
            entries.push(CriticalPoint { vertex: v, value: values[v], kind, index: kind.index(), multiplicity });
        }
        entries.sort_by(|a, b| (a.value, a.vertex).partial_cmp(&(b.value, b.vertex)).unwrap());
        CriticalCatalog { entries, base_point }
    }

    fn has_coincident_values(&self, range: f64) -> bool {
        self.entries.windows(2).any(|w| (w[1].value - w[0].value).abs() <= 1e-12 * range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorseOptions {
    pub perturbation_scale: f64,
    pub seed: u64,
}

impl Default for MorseOptions {
    fn default() -> Self {
        MorseOptions { perturbation_scale: 1e-3, seed: 0 }
    }
}

/// `h = dist(., p0)^2` plus a seeded perturbation in
/// `[0, perturbation_scale * min_edge^2]` (zero at `p0`).
pub fn morse_function(
    surface: &TriangulatedSurface,
    p0: usize,
    options: MorseOptions,
) -> Result<(ScalarField, CriticalCatalog), SurfaceError> {
    surface.check_vertex(p0)?;
    let scale = options.perturbation_scale;
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(SurfaceError::PerturbationScale(scale));
    }
    let dist = geodesic_distance(surface, p0)?;
    let amplitude = scale * surface.min_edge_length().powi(2);
    for attempt in 0..MAX_RETRIES {
        let seed = options.seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = dist
            .values()
            .iter()
            .enumerate()
            .map(|(v, d)| {
                let noise: f64 = rng.gen();
                if v == p0 {
                    0.0
                } else {
                    d * d + amplitude * noise
                }
            })
            .collect();
        let h = ScalarField::new(surface, values)?;
        let catalog = CriticalCatalog::from_field(surface, &h, p0);
        let range = h.max() - h.min();
        if !catalog.has_coincident_values(range) {
            return Ok((h, catalog));
        }
        log::debug!("critical values coincide on attempt {attempt}; reseeding");
    }
    Err(SurfaceError::CoincidentCriticalValues(MAX_RETRIES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_surface, sublevel_domain, SurfaceKind};

    #[test]
    fn rectangle_center_unperturbed() {
        let s = build_surface(SurfaceKind::Rectangle, 16, &[1.0, 1.0]).unwrap();
        let p0 = s.nearest_vertex([0.5, 0.5]);
        let (h, cat) = morse_function(&s, p0, MorseOptions { perturbation_scale: 0.0, seed: 1 }).unwrap();
        assert_eq!(cat.count(CriticalKind::Minimum), 1);
        assert_eq!(cat.entries[0].vertex, p0);
        assert_eq!(cat.entries[0].value, 0.0);
        assert_eq!(h.values()[p0], 0.0);
        assert_eq!(cat.alternating_sum(), 1);
    }

    #[test]
    fn torus_morse_inequalities() {
        let s = build_surface(SurfaceKind::FlatTorus, 16, &[1.0, 1.0]).unwrap();
        let (_, cat) = morse_function(&s, 0, MorseOptions::default()).unwrap();
        assert!(cat.count(CriticalKind::Minimum) >= 1);
        assert!(cat.count(CriticalKind::Saddle) >= 2);
        assert!(cat.count(CriticalKind::Maximum) >= 1);
        assert_eq!(cat.alternating_sum(), 0);
    }

    #[test]
    fn cylinder_cut_locus_saddle() {
        let s = build_surface(SurfaceKind::Cylinder, 64, &[1.0, 2.0]).unwrap();
        let p0 = s.nearest_vertex([0.25, 1.0]);
        let (h, cat) = morse_function(&s, p0, MorseOptions::default()).unwrap();
        let saddle = cat.entries.iter().find(|e| e.kind == CriticalKind::Saddle).expect("saddle");
        assert!((saddle.value - 0.25).abs() <= 0.25 * 0.06, "{}", saddle.value);
        // ball before, ring after
        let before = sublevel_domain(&s, &h, saddle.value - 1e-9).unwrap();
        let after = sublevel_domain(&s, &h, saddle.value + 1e-9).unwrap();
        assert_eq!(before.euler_characteristic(), 1);
        assert_eq!(after.euler_characteristic(), 0);
        assert_eq!(cat.alternating_sum(), 0);
    }

    #[test]
    fn catalog_sorted_distinct_and_seeded() {
        let s = build_surface(SurfaceKind::Cylinder, 16, &[1.0, 1.0]).unwrap();
        let opts = MorseOptions { perturbation_scale: 1e-2, seed: 42 };
        let (h1, c1) = morse_function(&s, 3, opts).unwrap();
        let (h2, c2) = morse_function(&s, 3, opts).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(c1, c2);
        assert!(c1.entries.windows(2).all(|w| w[0].value < w[1].value));
        let bound = 1e-2 * s.min_edge_length().powi(2);
        let d = geodesic_distance(&s, 3).unwrap();
        for (x, y) in h1.values().iter().zip(d.values()) {
            assert!(*x >= y * y && *x <= y * y + bound);
        }
    }

    #[test]
    fn rejects_negative_scale() {
        let s = build_surface(SurfaceKind::Rectangle, 4, &[1.0, 1.0]).unwrap();
        assert!(morse_function(&s, 0, MorseOptions { perturbation_scale: -1.0, seed: 0 }).is_err());
    }
}
