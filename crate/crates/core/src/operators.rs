//! Coefficient data for `L u = -div(a grad u) + c u`.
//!
//! `c_field` stores the zeroth-order coefficient exactly as it appears in
//! `L`; presets spell out the resulting sign (`shifted_laplacian(c0)` has
//! `c = -c0`, the cylinder stability operator has `c = -|B|^2`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::surface::{Identification, SurfaceId, TriangulatedSurface};

pub type Matrix2 = [[f64; 2]; 2];

pub const IDENTITY: Matrix2 = [[1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("coefficient field length {got} does not match vertex count {expected}")]
    FieldLength { expected: usize, got: usize },
    #[error("coefficient matrix is not symmetric at vertices {0:?}")]
    NotSymmetric(Vec<usize>),
    #[error("non-finite coefficient at vertex {0}")]
    NonFinite(usize),
    #[error("stability operator needs a cylinder surface")]
    NotACylinder,
    #[error("cylinder circumference {circumference} does not match 2*pi*r = {expected}")]
    Circumference { circumference: f64, expected: f64 },
    #[error("radius must be positive, got {0}")]
    Radius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    #[default]
    Dirichlet,
    /// Mean-zero test space: `sum_v u(v) m_v = 0` with lumped mass `m`.
    VolumeConstrained,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Laplacian,
    ShiftedLaplacian { c0: f64 },
    Custom { a_field: Vec<Matrix2>, c_field: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub a_field: Vec<Matrix2>,
    pub c_field: Vec<f64>,
    pub constraint: ConstraintMode,
    pub surface_id: SurfaceId,
}

impl OperatorSpec {
    pub fn with_constraint(mut self, constraint: ConstraintMode) -> Self {
        self.constraint = constraint;
        self
    }

    pub fn c_min(&self) -> f64 {
        self.c_field.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn c_max_abs(&self) -> f64 {
        self.c_field.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

pub fn make_operator(kind: OperatorKind, surface: &TriangulatedSurface) -> Result<OperatorSpec, OperatorError> {
    let n = surface.vertex_count();
    let (a_field, c_field) = match kind {
        OperatorKind::Laplacian => (vec![IDENTITY; n], vec![0.0; n]),
        OperatorKind::ShiftedLaplacian { c0 } => (vec![IDENTITY; n], vec![-c0; n]),
        OperatorKind::Custom { a_field, c_field } => {
            for len in [a_field.len(), c_field.len()] {
                if len != n {
                    return Err(OperatorError::FieldLength { expected: n, got: len });
                }
            }
            (a_field, c_field)
        }
    };
    for (v, (a, c)) in a_field.iter().zip(&c_field).enumerate() {
        if !c.is_finite() || a.iter().flatten().any(|x| !x.is_finite()) {
            return Err(OperatorError::NonFinite(v));
        }
    }
    let asymmetric: Vec<usize> = a_field
        .iter()
        .enumerate()
        .filter(|(_, a)| a[0][1] != a[1][0])
        .map(|(v, _)| v)
        .collect();
    if !asymmetric.is_empty() {
        return Err(OperatorError::NotSymmetric(asymmetric));
    }
    Ok(OperatorSpec { a_field, c_field, constraint: ConstraintMode::Dirichlet, surface_id: surface.id() })
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigenvalue(a: &Matrix2) -> f64 {
    let mean = 0.5 * (a[0][0] + a[1][1]);
    let half_diff = 0.5 * (a[0][0] - a[1][1]);
    mean - (half_diff * half_diff + a[0][1] * a[0][1]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipticity {
    /// Minimum over vertices of the smallest eigenvalue of `a(v)`.
    pub alpha: f64,
    pub worst_vertex: usize,
    pub strongly_elliptic: bool,
}

pub fn check_ellipticity(spec: &OperatorSpec) -> Ellipticity {
    let (worst_vertex, alpha) = spec
        .a_field
        .iter()
        .map(min_eigenvalue)
        .enumerate()
        .fold((0, f64::INFINITY), |best, (v, l)| if l < best.1 { (v, l) } else { best });
    Ellipticity { alpha, worst_vertex, strongly_elliptic: alpha > 0.0 }
}

/// `L f = -Δ f - |B|^2 f` on the round cylinder of radius `r` in R^3,
/// whose principal curvatures are `1/r` and `0`.
pub fn cmc_cylinder_stability(radius: f64, surface: &TriangulatedSurface) -> Result<OperatorSpec, OperatorError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(OperatorError::Radius(radius));
    }
    let circumference = match surface.identification() {
        Identification::PeriodicX { period } => period,
        _ => return Err(OperatorError::NotACylinder),
    };
    let expected = 2.0 * PI * radius;
    if (circumference - expected).abs() > 1e-9 * expected {
        return Err(OperatorError::Circumference { circumference, expected });
    }
    let second_fundamental_sq = (1.0 / radius).powi(2) + 0.0f64.powi(2);
    make_operator(
        OperatorKind::Custom {
            a_field: vec![IDENTITY; surface.vertex_count()],
            c_field: vec![-second_fundamental_sq; surface.vertex_count()],
        },
        surface,
    )
}
