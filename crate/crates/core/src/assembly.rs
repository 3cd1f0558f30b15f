//! Conforming P1 discretization of the bilinear form
//! `B(u, v) = ∫ a^{ij} ∂_j u ∂_i v + c u v` on a sublevel domain, with
//! homogeneous Dirichlet values imposed by dropping boundary vertices.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::operators::{check_ellipticity, ConstraintMode, Matrix2, OperatorSpec};
use crate::sparse::{CsrMatrix, EnvelopeCholesky, FactorError};
use crate::surface::{SublevelDomain, TriangulatedSurface};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("domain below first spectral threshold: no interior vertices")]
    EmptyInterior,
    #[error("operator is not strongly elliptic (alpha = {alpha} at vertex {vertex})")]
    NotElliptic { alpha: f64, vertex: usize },
    #[error("operator, domain and surface do not belong together")]
    SurfaceMismatch,
    #[error("vector length {got} does not match DOF count {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// The mean-zero test space `{u : z^T u = 0}` with `z` the lumped mass.
#[derive(Debug, Clone)]
pub struct MeanZeroConstraint {
    weights: Vec<f64>,
    // M^{-1} z, spans the M-orthogonal complement
    complement: Vec<f64>,
    weights_dot_complement: f64,
}

impl MeanZeroConstraint {
    fn new(weights: Vec<f64>, mass_factor: &EnvelopeCholesky) -> Self {
        let complement = mass_factor.solve(&weights);
        let weights_dot_complement = dot(&weights, &complement);
        MeanZeroConstraint { weights, complement, weights_dot_complement }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `z^T u`
    pub fn mean(&self, u: &[f64]) -> f64 {
        dot(&self.weights, u)
    }

    /// M-orthogonal projector onto the constrained subspace.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let s = self.mean(u) / self.weights_dot_complement;
        u.iter().zip(&self.complement).map(|(a, b)| a - s * b).collect()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        let scale: f64 = self.weights.iter().zip(u).map(|(w, x)| (w * x).abs()).sum();
        self.mean(u).abs() <= tol * scale.max(f64::MIN_POSITIVE)
    }
}

/// Assembled Dirichlet pencil `(K, M)` over the interior vertices of a domain.
#[derive(Debug)]
pub struct AssembledSystem {
    stiffness: CsrMatrix,
    stiffness_grad: CsrMatrix,
    zeroth_order: CsrMatrix,
    mass: CsrMatrix,
    lumped_mass: Vec<f64>,
    dof_vertices: Vec<usize>,
    vertex_dofs: Vec<Option<usize>>,
    constraint: Option<MeanZeroConstraint>,
    c_min: f64,
    domain: SublevelDomain,
    mass_factor: OnceLock<EnvelopeCholesky>,
}

struct Element {
    dofs: [Option<usize>; 3],
    grad: [[f64; 3]; 3],
    mass: [[f64; 3]; 3],
    lumped: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mean_matrix(a: &[Matrix2], tri: [usize; 3]) -> Matrix2 {
    let mut m = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            m[r][c] = (a[tri[0]][r][c] + a[tri[1]][r][c] + a[tri[2]][r][c]) / 3.0;
        }
    }
    m
}

fn element(surface: &TriangulatedSurface, spec: &OperatorSpec, vertex_dofs: &[Option<usize>], t: usize) -> Element {
    let tri = surface.triangles()[t];
    let p = surface.corner_positions(t);
    let area = surface.parameter_area(t);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        g[i] = [-(b[1] - a[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
    }
    let a = mean_matrix(&spec.a_field, tri);
    let weighted_area = area * surface.triangle_conformal_factor(t);
    let mut grad = [[0.0; 3]; 3];
    let mut mass = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let ag = [a[0][0] * g[j][0] + a[0][1] * g[j][1], a[1][0] * g[j][0] + a[1][1] * g[j][1]];
            grad[i][j] = area * (g[i][0] * ag[0] + g[i][1] * ag[1]);
            mass[i][j] = weighted_area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    Element { dofs: tri.map(|v| vertex_dofs[v]), grad, mass, lumped: weighted_area / 3.0 }
}

pub fn assemble(
    surface: &TriangulatedSurface,
    domain: &SublevelDomain,
    spec: &OperatorSpec,
) -> Result<AssembledSystem, AssemblyError> {
    if domain.surface_id() != surface.id() || spec.surface_id != surface.id() {
        return Err(AssemblyError::SurfaceMismatch);
    }
    let ell = check_ellipticity(spec);
    if !ell.strongly_elliptic {
        return Err(AssemblyError::NotElliptic { alpha: ell.alpha, vertex: ell.worst_vertex });
    }
    let dof_vertices = domain.interior_vertices().to_vec();
    if dof_vertices.is_empty() {
        return Err(AssemblyError::EmptyInterior);
    }
    let mut vertex_dofs = vec![None; surface.vertex_count()];
    for (d, &v) in dof_vertices.iter().enumerate() {
        vertex_dofs[v] = Some(d);
    }
    let pattern: Vec<Vec<usize>> = dof_vertices
        .iter()
        .map(|&v| {
            let mut row: Vec<usize> = surface.neighbors(v).iter().filter_map(|&w| vertex_dofs[w]).collect();
            row.push(vertex_dofs[v].unwrap());
            row
        })
        .collect();
    let mut stiffness = CsrMatrix::from_pattern(pattern);
    let mut stiffness_grad = stiffness.clone();
    let mut zeroth_order = stiffness.clone();
    let mut mass = stiffness.clone();
    let mut lumped_mass = vec![0.0; dof_vertices.len()];

    // element matrices in parallel, scattered in ascending triangle order so
    // every entry is summed in the same order regardless of scheduling
    let elements: Vec<(usize, Element)> = domain
        .active_triangles()
        .par_iter()
        .map(|&t| (t, element(surface, spec, &vertex_dofs, t)))
        .collect();
    let mut c_min = f64::INFINITY;
    for (t, el) in &elements {
        let tri = surface.triangles()[*t];
        let c = (spec.c_field[tri[0]] + spec.c_field[tri[1]] + spec.c_field[tri[2]]) / 3.0;
        c_min = c_min.min(c);
        for i in 0..3 {
            let Some(di) = el.dofs[i] else { continue };
            lumped_mass[di] += el.lumped;
            for j in 0..3 {
                let Some(dj) = el.dofs[j] else { continue };
                let kc = c * el.mass[i][j];
                stiffness_grad.add(di, dj, el.grad[i][j]);
                zeroth_order.add(di, dj, kc);
                stiffness.add(di, dj, el.grad[i][j] + kc);
                mass.add(di, dj, el.mass[i][j]);
            }
        }
    }
    let mut system = AssembledSystem {
        stiffness,
        stiffness_grad,
        zeroth_order,
        mass,
        lumped_mass,
        dof_vertices,
        vertex_dofs,
        constraint: None,
        c_min,
        domain: domain.clone(),
        mass_factor: OnceLock::new(),
    };
    if spec.constraint == ConstraintMode::VolumeConstrained {
        let weights = system.lumped_mass.clone();
        let constraint = MeanZeroConstraint::new(weights, system.mass_factor()?);
        system.constraint = Some(constraint);
    }
    Ok(system)
}

impl AssembledSystem {
    pub fn dof_count(&self) -> usize {
        self.dof_vertices.len()
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Gradient part `K_a` of the stiffness.
    pub fn stiffness_grad(&self) -> &CsrMatrix {
        &self.stiffness_grad
    }

    /// Zeroth-order part `K_c` (the `c`-weighted mass).
    pub fn zeroth_order(&self) -> &CsrMatrix {
        &self.zeroth_order
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn dof_vertices(&self) -> &[usize] {
        &self.dof_vertices
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.vertex_dofs.get(v).copied().flatten()
    }

    pub fn constraint(&self) -> Option<&MeanZeroConstraint> {
        self.constraint.as_ref()
    }

    pub fn domain(&self) -> &SublevelDomain {
        &self.domain
    }

    /// Lower bound on the spectrum: `K_c >= c_min M` and `K_a >= 0`.
    pub fn spectrum_lower_bound(&self) -> f64 {
        self.c_min
    }

    pub fn mass_factor(&self) -> Result<&EnvelopeCholesky, AssemblyError> {
        if let Some(f) = self.mass_factor.get() {
            return Ok(f);
        }
        let f = EnvelopeCholesky::factor(&self.mass)?;
        Ok(self.mass_factor.get_or_init(|| f))
    }

    /// Same pencil with `penalty[d]` added to the stiffness diagonal.
    pub fn with_diagonal_penalty(&self, penalty: &[f64]) -> AssembledSystem {
        AssembledSystem {
            stiffness: self.stiffness.add_diagonal(penalty),
            stiffness_grad: self.stiffness_grad.clone(),
            zeroth_order: self.zeroth_order.clone(),
            mass: self.mass.clone(),
            lumped_mass: self.lumped_mass.clone(),
            dof_vertices: self.dof_vertices.clone(),
            vertex_dofs: self.vertex_dofs.clone(),
            constraint: self.constraint.clone(),
            c_min: self.c_min,
            domain: self.domain.clone(),
            mass_factor: self.mass_factor.clone(),
        }
    }

    /// Same system with DOFs renumbered: new DOF `i` is old DOF `perm[i]`.
    pub fn renumbered(&self, perm: &[usize]) -> AssembledSystem {
        let dof_vertices: Vec<usize> = perm.iter().map(|&p| self.dof_vertices[p]).collect();
        let mut vertex_dofs = vec![None; self.vertex_dofs.len()];
        for (d, &v) in dof_vertices.iter().enumerate() {
            vertex_dofs[v] = Some(d);
        }
        let gather = |x: &[f64]| -> Vec<f64> { perm.iter().map(|&p| x[p]).collect() };
        AssembledSystem {
            stiffness: self.stiffness.permuted(perm),
            stiffness_grad: self.stiffness_grad.permuted(perm),
            zeroth_order: self.zeroth_order.permuted(perm),
            mass: self.mass.permuted(perm),
            lumped_mass: gather(&self.lumped_mass),
            dof_vertices,
            vertex_dofs,
            constraint: self.constraint.as_ref().map(|c| MeanZeroConstraint {
                weights: gather(&c.weights),
                complement: gather(&c.complement),
                weights_dot_complement: c.weights_dot_complement,
            }),
            c_min: self.c_min,
            domain: self.domain.clone(),
            mass_factor: OnceLock::new(),
        }
    }

    /// Zero extension of a DOF vector of `self` to the DOFs of `larger`.
    pub fn extend_by_zero(&self, u: &[f64], larger: &AssembledSystem) -> Vec<f64> {
        let mut out = vec![0.0; larger.dof_count()];
        for (d, &v) in self.dof_vertices.iter().enumerate() {
            let target = larger.dof_of_vertex(v).expect("domains are not nested");
            out[target] = u[d];
        }
        out
    }

    fn check_len(&self, u: &[f64]) -> Result<(), AssemblyError> {
        if u.len() == self.dof_count() {
            Ok(())
        } else {
            Err(AssemblyError::SizeMismatch { expected: self.dof_count(), got: u.len() })
        }
    }

    pub fn mass_norm(&self, u: &[f64]) -> f64 {
        self.mass.bilinear(u, u).max(0.0).sqrt()
    }

    /// Explicit M-orthonormal basis of the constrained subspace (dense,
    /// for small systems and verification).
    pub fn constraint_basis(&self) -> Option<DMatrix<f64>> {
        let c = self.constraint.as_ref()?;
        let n = self.dof_count();
        let pivot = (0..n).max_by(|&a, &b| c.weights[a].total_cmp(&c.weights[b])).unwrap();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
        for i in (0..n).filter(|&i| i != pivot) {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e[pivot] = -c.weights[i] / c.weights[pivot];
            for _ in 0..2 {
                for q in &cols {
                    let s = self.mass.bilinear(q, &e);
                    for (x, y) in e.iter_mut().zip(q) {
                        *x -= s * y;
                    }
                }
            }
            let norm = self.mass_norm(&e);
            for x in &mut e {
                *x /= norm;
            }
            cols.push(e);
        }
        Some(DMatrix::from_fn(n, n - 1, |i, j| cols[j][i]))
    }
}

/// `u^T K v`.
pub fn bilinear_form(system: &AssembledSystem, u: &[f64], v: &[f64]) -> Result<f64, AssemblyError> {
    system.check_len(u)?;
    system.check_len(v)?;
    Ok(system.stiffness.bilinear(u, v))
}

/// `||K u||_{M^{-1}} / ||u||_M`, with the constraint multiplier removed in
/// volume-constrained mode. Zero exactly for discrete Jacobi fields.
pub fn jacobi_residual(system: &AssembledSystem, u: &[f64]) -> Result<f64, AssemblyError> {
    system.check_len(u)?;
    let norm_u = system.mass_norm(u);
    if norm_u == 0.0 {
        return Err(AssemblyError::ZeroVector);
    }
    let factor = system.mass_factor()?;
    let mut r = system.stiffness.matvec(u);
    let mut minv_r = factor.solve(&r);
    if let Some(c) = &system.constraint {
        // r - mu z minimizing the M^{-1} norm: mu = z^T M^{-1} r / z^T M^{-1} z
        let mu = dot(&c.weights, &minv_r) / c.weights_dot_complement;
        for (i, x) in r.iter_mut().enumerate() {
            *x -= mu * c.weights[i];
        }
        minv_r = factor.solve(&r);
    }
    Ok(dot(&r, &minv_r).max(0.0).sqrt() / norm_u)
}
