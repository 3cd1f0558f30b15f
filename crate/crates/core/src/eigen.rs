//! Smallest generalized eigenpairs of the pencil `(K, M)`.
//!
//! Restarted block Krylov iteration on the shift-inverted operator
//! `(K - σM)^{-1} M` with Rayleigh-Ritz extraction on `(K, M)`. The shift
//! sits below the spectrum lower bound reported by the assembly, so
//! `K - σM` is positive definite and a Cholesky factor suffices. Small
//! systems use a dense solver.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{AssembledSystem, AssemblyError, MeanZeroConstraint};
use crate::sparse::{EnvelopeCholesky, FactorError};

const DENSE_LIMIT: usize = 200;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("requested {k} eigenpairs but the system has only {available} degrees of freedom")]
    TooManyEigenpairs { k: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("zero vector")]
    ZeroVector,
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenOptions {
    pub tol: f64,
    pub seed: u64,
    /// Relative gap below which neighbouring eigenvalues form a cluster.
    pub cluster_tol: f64,
    /// Cap on the number of block applications of the shift-inverted operator.
    pub max_blocks: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-10, seed: 0, cluster_tol: 1e-6, max_blocks: 500 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    /// Euclidean norm of `K u - λ M u` (constraint multiplier removed).
    pub residual_norms: Vec<f64>,
    pub k_requested: usize,
    /// Length of the leading run of converged pairs.
    pub k_converged: usize,
    /// `tol * (||K|| + |λ| ||M||)` is the residual bound per pair.
    pub stiffness_norm: f64,
    pub mass_norm: f64,
    pub tol: f64,
}

impl EigenResult {
    pub fn is_complete(&self) -> bool {
        self.k_converged == self.k_requested
    }

    /// Clusters of the computed eigenvalues as `(first index, size)`.
    pub fn clusters(&self, cluster_tol: f64) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            match out.last_mut() {
                Some((start, len)) if (l - self.eigenvalues[*start + *len - 1]).abs() <= cluster_tol * l.abs().max(1.0) => {
                    *len += 1
                }
                _ => out.push((i, 1)),
            }
        }
        out
    }

    pub fn residual_bound(&self, i: usize) -> f64 {
        self.tol * (self.stiffness_norm + self.eigenvalues[i].abs() * self.mass_norm)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Number of eigenpairs the (possibly constrained) pencil has.
pub fn available_dofs(system: &AssembledSystem) -> usize {
    system.dof_count() - usize::from(system.constraint().is_some())
}

/// `u^T K u / u^T M u`.
pub fn rayleigh_quotient(system: &AssembledSystem, u: &[f64]) -> Result<f64, EigenError> {
    let den = system.mass().bilinear(u, u);
    if den == 0.0 || u.iter().all(|&x| x == 0.0) {
        return Err(EigenError::ZeroVector);
    }
    Ok(crate::assembly::bilinear_form(system, u, u)? / den)
}

pub fn smallest_eigenpairs(system: &AssembledSystem, k: usize, tol: f64, seed: u64) -> Result<EigenResult, EigenError> {
    smallest_eigenpairs_with(system, k, &EigenOptions { tol, seed, ..EigenOptions::default() })
}

pub fn smallest_eigenpairs_with(
    system: &AssembledSystem,
    k: usize,
    opts: &EigenOptions,
) -> Result<EigenResult, EigenError> {
    if k == 0 {
        return Err(EigenError::ZeroK);
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(EigenError::Tolerance(opts.tol));
    }
    let available = available_dofs(system);
    if k > available {
        return Err(EigenError::TooManyEigenpairs { k, available });
    }
    let n = system.dof_count();
    let block = (k + 2).min(available);
    if n <= DENSE_LIMIT || 4 * block >= available {
        dense_eigenpairs(system, k, opts)
    } else {
        krylov_eigenpairs(system, k, block, opts)
    }
}

fn finish(system: &AssembledSystem, k: usize, values: Vec<f64>, vectors: Vec<Vec<f64>>, opts: &EigenOptions) -> EigenResult {
    let stiffness_norm = system.stiffness().inf_norm();
    let mass_norm = system.mass().inf_norm();
    let residual_norms: Vec<f64> =
        values.iter().zip(&vectors).map(|(&l, u)| residual(system, u, l)).collect();
    let k_converged = values
        .iter()
        .zip(&residual_norms)
        .take_while(|(&l, &r)| r <= opts.tol * (stiffness_norm + l.abs() * mass_norm))
        .count();
    EigenResult {
        eigenvalues: values,
        eigenvectors: vectors,
        residual_norms,
        k_requested: k,
        k_converged,
        stiffness_norm,
        mass_norm,
        tol: opts.tol,
    }
}

fn residual(system: &AssembledSystem, u: &[f64], lambda: f64) -> f64 {
    let mut r = system.stiffness().matvec(u);
    let mu = system.mass().matvec(u);
    axpy(-lambda, &mu, &mut r);
    if let Some(c) = system.constraint() {
        let z = c.weights();
        let s = dot(z, &r) / dot(z, z);
        axpy(-s, z, &mut r);
    }
    dot(&r, &r).sqrt()
}

fn dense_eigenpairs(system: &AssembledSystem, k: usize, opts: &EigenOptions) -> Result<EigenResult, EigenError> {
    let kd = system.stiffness().to_dense();
    let (reduced_k, reduced_m, basis) = match system.constraint_basis() {
        Some(q) => {
            let kr = q.transpose() * &kd * &q;
            let mr = q.transpose() * system.mass().to_dense() * &q;
            (kr, mr, Some(q))
        }
        None => (kd, system.mass().to_dense(), None),
    };
    let chol = reduced_m
        .clone()
        .cholesky()
        .ok_or(FactorError::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let l = chol.l();
    let linv_k = l.solve_lower_triangular(&reduced_k).expect("triangular solve");
    let c = l.solve_lower_triangular(&linv_k.transpose()).expect("triangular solve");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        values.push(eig.eigenvalues[i]);
        let y = l.transpose().solve_upper_triangular(&eig.eigenvectors.column(i).into_owned()).expect("triangular solve");
        let u = match &basis {
            Some(q) => q * y,
            None => y,
        };
        let mut u: Vec<f64> = u.iter().copied().collect();
        canonical_sign(&mut u);
        vectors.push(u);
    }
    Ok(finish(system, k, values, vectors, opts))
}

/// Fixes the sign so the entry of largest magnitude is positive.
fn canonical_sign(u: &mut [f64]) {
    let big = u.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if big < 0.0 {
        for x in u.iter_mut() {
            *x = -*x;
        }
    }
}

/// M-orthonormal basis with the images `M v` kept alongside.
struct Basis {
    vectors: Vec<Vec<f64>>,
    mass_images: Vec<Vec<f64>>,
}

impl Basis {
    fn new() -> Self {
        Basis { vectors: Vec::new(), mass_images: Vec::new() }
    }

    fn len(&self) -> usize {
        self.vectors.len()
    }

    /// Orthogonalizes `y` against the basis and appends it unless it is
    /// numerically dependent. Passes repeat while a pass cancels more than
    /// half the norm. Returns whether it was kept.
    fn push(&mut self, system: &AssembledSystem, y: Vec<f64>) -> bool {
        // rounding leaks out of the constrained subspace grow under
        // shift-invert and cancellation, so every pass projects back; the
        // projector is M-self-adjoint and fixes the basis
        let project = |y: Vec<f64>| match system.constraint() {
            Some(c) => c.project(&y),
            None => y,
        };
        let mut y = project(y);
        let initial = system.mass_norm(&y);
        if initial == 0.0 || !initial.is_finite() {
            return false;
        }
        let mut before = initial;
        let mut my = Vec::new();
        let mut norm = 0.0;
        for _ in 0..4 {
            for (v, mv) in self.vectors.iter().zip(&self.mass_images) {
                let s = dot(mv, &y);
                axpy(-s, v, &mut y);
            }
            y = project(y);
            my = system.mass().matvec(&y);
            norm = dot(&y, &my).max(0.0).sqrt();
            if norm > 0.5 * before {
                break;
            }
            before = norm;
        }
        if norm <= 1e-13 * initial {
            return false;
        }
        for (a, b) in y.iter_mut().zip(my.iter_mut()) {
            *a /= norm;
            *b /= norm;
        }
        self.vectors.push(y);
        self.mass_images.push(my);
        true
    }
}

struct ShiftInvert<'a> {
    system: &'a AssembledSystem,
    factor: EnvelopeCholesky,
    // (K - σM)^{-1} z and z^T of it, for the constrained solve
    constrained: Option<(&'a MeanZeroConstraint, Vec<f64>, f64)>,
}

impl<'a> ShiftInvert<'a> {
    fn new(system: &'a AssembledSystem, shift: f64) -> Result<Self, EigenError> {
        let shifted = system.stiffness().add_scaled(-shift, system.mass());
        let factor = EnvelopeCholesky::factor(&shifted)?;
        let constrained = system.constraint().map(|c| {
            let w = factor.solve(c.weights());
            let s = dot(c.weights(), &w);
            (c, w, s)
        });
        Ok(ShiftInvert { system, factor, constrained })
    }

    /// `x = (K - σM)^{-1} M v` restricted to the constrained subspace.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut x = self.factor.solve(&self.system.mass().matvec(v));
        if let Some((c, w, s)) = &self.constrained {
            let mean = c.mean(&x);
            axpy(-mean / s, w, &mut x);
        }
        x
    }
}

fn krylov_eigenpairs(
    system: &AssembledSystem,
    k: usize,
    block: usize,
    opts: &EigenOptions,
) -> Result<EigenResult, EigenError> {
    let n = system.dof_count();
    let shift = system.spectrum_lower_bound() - 1.0;
    let op = ShiftInvert::new(system, shift)?;
    let max_basis = (6 * block).max(40).min(n / 2);
    let stiffness_norm = system.stiffness().inf_norm();
    let mass_norm = system.mass().inf_norm();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<Vec<f64>> = (0..block)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            match system.constraint() {
                Some(c) => c.project(&v),
                None => v,
            }
        })
        .collect();
    let mut blocks_used = 0;
    let mut locked = 0;
    loop {
        let mut basis = Basis::new();
        let mut frontier = Vec::new();
        for (i, v) in start.drain(..).enumerate() {
            if basis.push(system, v) && i >= locked {
                frontier.push(basis.len() - 1);
            }
        }
        while basis.len() + frontier.len() <= max_basis && !frontier.is_empty() {
            let images: Vec<Vec<f64>> = frontier.iter().map(|&i| op.apply(&basis.vectors[i])).collect();
            blocks_used += 1;
            frontier.clear();
            for y in images {
                let before = basis.len();
                if basis.push(system, y) {
                    frontier.push(before);
                }
            }
        }
        // Rayleigh-Ritz on (K, M) over the M-orthonormal basis
        let m = basis.len();
        let kv: Vec<Vec<f64>> = basis.vectors.iter().map(|v| system.stiffness().matvec(v)).collect();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let x = 0.5 * (dot(&basis.vectors[i], &kv[j]) + dot(&basis.vectors[j], &kv[i]));
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let keep = block.min(m);
        if keep < k {
            // the Krylov space collapsed; cannot happen for a sane start block
            return dense_eigenpairs(system, k, opts);
        }
        let mut values = Vec::with_capacity(keep);
        let mut ritz = Vec::with_capacity(keep);
        for &i in order.iter().take(keep) {
            let mut u = vec![0.0; n];
            for (j, v) in basis.vectors.iter().enumerate() {
                axpy(eig.eigenvectors[(j, i)], v, &mut u);
            }
            values.push(eig.eigenvalues[i]);
            ritz.push(u);
        }
        let converged = (0..k.min(keep))
            .take_while(|&i| residual(system, &ritz[i], values[i]) <= opts.tol * (stiffness_norm + values[i].abs() * mass_norm))
            .count();
        if converged == k || blocks_used >= opts.max_blocks {
            values.truncate(k);
            ritz.truncate(k);
            for u in ritz.iter_mut() {
                canonical_sign(u);
            }
            let result = finish(system, k, values, ritz, opts);
            if !result.is_complete() {
                log::warn!(
                    "eigensolver stopped after {blocks_used} blocks with {} of {k} pairs converged",
                    result.k_converged
                );
            }
            return Ok(result);
        }
        // converged leading pairs stay in the basis but are not expanded
        locked = converged;
        start = ritz;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinmaxEntry {
    pub k: usize,
    pub lambda_k: f64,
    /// Smallest max-Rayleigh value over the random subspaces.
    pub min_sampled_max: f64,
    /// Max-Rayleigh value on the span of the first `k` eigenvectors.
    pub attained: f64,
    pub violations: usize,
    pub attained_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinmaxReport {
    pub trials: usize,
    pub tol: f64,
    pub entries: Vec<MinmaxEntry>,
}

impl MinmaxReport {
    pub fn violations(&self) -> usize {
        self.entries.iter().map(|e| e.violations + usize::from(!e.attained_ok)).sum()
    }
}

/// Largest Rayleigh quotient on the span of `cols`.
fn max_rayleigh(system: &AssembledSystem, cols: &[Vec<f64>]) -> f64 {
    let q = cols.len();
    let kc: Vec<Vec<f64>> = cols.iter().map(|c| system.stiffness().matvec(c)).collect();
    let mc: Vec<Vec<f64>> = cols.iter().map(|c| system.mass().matvec(c)).collect();
    let kp = DMatrix::from_fn(q, q, |i, j| 0.5 * (dot(&cols[i], &kc[j]) + dot(&cols[j], &kc[i])));
    let mp = DMatrix::from_fn(q, q, |i, j| 0.5 * (dot(&cols[i], &mc[j]) + dot(&cols[j], &mc[i])));
    let Some(chol) = mp.cholesky() else { return f64::INFINITY };
    let l = chol.l();
    let a = l.solve_lower_triangular(&kp).expect("triangular solve");
    let c = l.solve_lower_triangular(&a.transpose()).expect("triangular solve");
    let c = (&c + c.transpose()) * 0.5;
    SymmetricEigen::new(c).eigenvalues.max()
}

/// Checks `λ_k = min_{V^k} max_{u ∈ V^k} R(u)` on random subspaces: every
/// sampled max must be at least `λ_k - tol`, and the span of the first `k`
/// eigenvectors must attain `λ_k`. `tol` is relative to `max(1, |λ_k|)`.
pub fn minmax_verify(system: &AssembledSystem, result: &EigenResult, trials: usize, seed: u64, tol: f64) -> MinmaxReport {
    let n = system.dof_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for k in 1..=result.k_converged {
        let lambda_k = result.eigenvalues[k - 1];
        let scale = tol * lambda_k.abs().max(1.0);
        let mut min_sampled_max = f64::INFINITY;
        let mut violations = 0;
        for _ in 0..trials {
            let cols: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    match system.constraint() {
                        Some(c) => c.project(&v),
                        None => v,
                    }
                })
                .collect();
            let top = max_rayleigh(system, &cols);
            min_sampled_max = min_sampled_max.min(top);
            if top < lambda_k - scale {
                violations += 1;
            }
        }
        let attained = max_rayleigh(system, &result.eigenvectors[..k]);
        entries.push(MinmaxEntry {
            k,
            lambda_k,
            min_sampled_max,
            attained,
            violations,
            attained_ok: (attained - lambda_k).abs() <= scale,
        });
    }
    MinmaxReport { trials, tol, entries }
}
