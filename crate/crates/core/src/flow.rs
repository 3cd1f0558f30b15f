//! Deformation sweeps `t -> λ_k(D(t))` along a sublevel filtration.
//!
//! The discrete branches are step functions of `t`: the domain changes only
//! when a vertex enters the filtration. A sign change of a branch is first
//! bracketed on the sample grid, then narrowed to a single filtration step
//! by integer bisection, and finally resolved inside that step by a penalty
//! homotopy that continuously releases the newly interior DOFs: at
//! `θ -> 0` the pencil is that of the smaller domain, at `θ = 1` that of the
//! larger one, and the eigenvalue passes through zero in between.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{assemble, jacobi_residual, AssembledSystem, AssemblyError};
use crate::eigen::{available_dofs, smallest_eigenpairs_with, EigenError, EigenOptions};
use crate::operators::OperatorSpec;
use crate::surface::{CriticalCatalog, Filtration, ScalarField, SurfaceError, TriangulatedSurface};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("k too small: index may exceed computed branches (lambda_{k} = {value} at the final sample)")]
    KTooSmall { k: usize, value: f64 },
    #[error("final sample is missing or did not converge")]
    FinalSample,
    #[error("sign change of branch {branch} near t = {t} was not refined")]
    Unrefined { branch: usize, t: f64 },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub base_samples: usize,
    /// Dyadic refinement depth around critical values and sign changes.
    pub refine_depth: usize,
    pub k: usize,
    pub eigen: EigenOptions,
    /// `None` selects `1e-6 * max(1, |λ_k(final)|)`.
    pub null_tol: Option<f64>,
    /// Relative monotonicity allowance: `mono_tol * max(1, |λ|)`.
    pub mono_tol: f64,
}

impl SweepConfig {
    pub fn new(t_start: f64, t_end: f64, k: usize) -> Self {
        SweepConfig {
            t_start,
            t_end,
            base_samples: 64,
            refine_depth: 8,
            k,
            eigen: EigenOptions::default(),
            null_tol: None,
            mono_tol: 1e-8,
        }
    }

    fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::Config(m.to_string()));
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_start < self.t_end) {
            return bad("t_start must be below t_end");
        }
        if self.base_samples < 2 {
            return bad("base_samples must be at least 2");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if let Some(tol) = self.null_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return bad("null_tol must be positive");
            }
        }
        if !(self.mono_tol > 0.0 && self.mono_tol.is_finite()) {
            return bad("mono_tol must be positive");
        }
        if !(self.eigen.tol > 0.0 && self.eigen.tol.is_finite()) {
            return bad("eig_tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSample {
    pub t: f64,
    /// Number of filtration vertices below `t`.
    pub filtration_count: usize,
    pub dof_count: usize,
    pub euler_characteristic: i64,
    /// Ascending; shorter than `k` when the domain has fewer DOFs.
    pub eigenvalues: Vec<f64>,
    pub nullity: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSample {
    pub t: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    /// Lowest branch index (0-based) of the crossing cluster.
    pub branch: usize,
    pub branches: Vec<usize>,
    pub t_minus: f64,
    pub t_plus: f64,
    /// Filtration value at which the crossing step happens.
    pub t_star: f64,
    /// Filtration count of the larger domain of the crossing step.
    pub step: usize,
    /// Homotopy parameter of the root inside the step.
    pub theta: f64,
    pub lambda_at_root: f64,
    pub jacobi_residual: f64,
    pub multiplicity: usize,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub branch: usize,
    pub t_before: f64,
    pub t_after: f64,
    pub increase: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub null_tol: f64,
    pub samples: Vec<SpectralSample>,
    pub skipped: Vec<SkippedSample>,
    pub critical_values: Vec<f64>,
    pub crossings: Vec<Crossing>,
    pub index_direct: Option<usize>,
    pub index_summed: Option<usize>,
    pub index_errors: Vec<String>,
    pub endpoint_nullity: usize,
    /// Per branch, largest `|λ_k(t_{i+1}) - λ_k(t_i)|` over adjacent samples.
    pub max_jump: Vec<f64>,
    pub crossings_per_branch: Vec<usize>,
    pub monotonicity_violations: Vec<MonotonicityViolation>,
    pub unconverged_samples: usize,
}

impl SweepReport {
    pub fn final_sample(&self) -> Option<&SpectralSample> {
        self.samples.last()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), FlowError> {
        serde_json::to_writer_pretty(out, self).map_err(std::io::Error::from)?;
        Ok(())
    }

    /// Columns `t,k,lambda,nullity,euler_char`, with `k` 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), FlowError> {
        writeln!(out, "t,k,lambda,nullity,euler_char")?;
        for s in &self.samples {
            for (i, l) in s.eigenvalues.iter().enumerate() {
                writeln!(out, "{:?},{},{:?},{},{}", s.t, i + 1, l, s.nullity, s.euler_characteristic)?;
            }
        }
        Ok(())
    }
}

/// `#{i : |λ_i| <= null_tol}`.
pub fn nullity_of_sample(eigenvalues: &[f64], null_tol: f64) -> usize {
    eigenvalues.iter().filter(|l| l.abs() <= null_tol).count()
}

/// `#{i : λ_i < -null_tol}` at the final sample.
pub fn morse_index_direct(sample: &SpectralSample, k: usize, null_tol: f64) -> Result<usize, FlowError> {
    if !sample.converged {
        return Err(FlowError::FinalSample);
    }
    if sample.eigenvalues.len() == k {
        let last = sample.eigenvalues[k - 1];
        if last < -null_tol {
            return Err(FlowError::KTooSmall { k, value: last });
        }
    }
    Ok(sample.eigenvalues.iter().filter(|&&l| l < -null_tol).count())
}

/// Sum of crossing multiplicities with `t* < t_end`.
pub fn morse_index_summed(report: &SweepReport) -> Result<usize, FlowError> {
    if let Some(c) = report.crossings.iter().find(|c| !c.refined) {
        return Err(FlowError::Unrefined { branch: c.branch, t: c.t_minus });
    }
    Ok(report.crossings.iter().filter(|c| c.t_star < report.config.t_end).map(|c| c.multiplicity).sum())
}

/// Adjacent sample pairs (in report order) where a branch increases by more
/// than `mono_tol * max(1, |λ|)`.
pub fn check_monotonicity(samples: &[SpectralSample], mono_tol: f64) -> Vec<MonotonicityViolation> {
    let mut out = Vec::new();
    for w in samples.windows(2) {
        for (i, (a, b)) in w[0].eigenvalues.iter().zip(&w[1].eigenvalues).enumerate() {
            if *b > a + mono_tol * a.abs().max(1.0) {
                out.push(MonotonicityViolation { branch: i, t_before: w[0].t, t_after: w[1].t, increase: b - a });
            }
        }
    }
    out
}

/// Per branch, largest jump between adjacent samples where both exist.
pub fn max_jump(samples: &[SpectralSample], k: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; k];
    for w in samples.windows(2) {
        for (i, (a, b)) in w[0].eigenvalues.iter().zip(&w[1].eigenvalues).enumerate() {
            out[i] = out[i].max((b - a).abs());
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sign {
    Positive,
    Zero,
    Negative,
}

fn sign_of(samples: &SpectralSample, branch: usize, tol: f64) -> Sign {
    // absent branches sit above the computed spectrum
    match samples.eigenvalues.get(branch) {
        None => Sign::Positive,
        Some(&l) if l > tol => Sign::Positive,
        Some(&l) if l < -tol => Sign::Negative,
        Some(_) => Sign::Zero,
    }
}

/// Index pairs `(last positive sample, first negative sample)` per branch.
fn sign_changes(samples: &[SpectralSample], k: usize, tol: f64) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for branch in 0..k {
        let mut last_positive: Option<usize> = None;
        for (i, s) in samples.iter().enumerate() {
            match sign_of(s, branch, tol) {
                Sign::Positive => last_positive = Some(i),
                Sign::Negative => {
                    if let Some(p) = last_positive.take() {
                        out.push((branch, p, i));
                    }
                }
                Sign::Zero => {}
            }
        }
    }
    out
}

#[derive(Debug)]
struct Solved {
    eigenvalues: Vec<f64>,
    converged: bool,
}

fn mix_seed(seed: u64, key: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shared state of a sweep: the filtration and a solve cache keyed by the
/// interior DOF count, which identifies the DOF set along a filtration.
pub struct SweepEngine<'a> {
    surface: &'a TriangulatedSurface,
    filtration: Filtration,
    spec: &'a OperatorSpec,
    k: usize,
    eigen: EigenOptions,
    cache: Mutex<BTreeMap<usize, Arc<Solved>>>,
}

enum Outcome {
    Sample(SpectralSample),
    Skipped(SkippedSample),
}

impl<'a> SweepEngine<'a> {
    pub fn new(
        surface: &'a TriangulatedSurface,
        h: &ScalarField,
        spec: &'a OperatorSpec,
        k: usize,
        eigen: EigenOptions,
    ) -> Result<Self, FlowError> {
        if spec.surface_id != surface.id() {
            return Err(FlowError::Assembly(AssemblyError::SurfaceMismatch));
        }
        let filtration = Filtration::new(surface, h)?;
        Ok(SweepEngine { surface, filtration, spec, k, eigen, cache: Mutex::new(BTreeMap::new()) })
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    /// Assembled system of the filtration prefix with `count` vertices.
    pub fn system_at_count(&self, count: usize) -> Result<AssembledSystem, AssemblyError> {
        assemble(self.surface, &self.filtration.prefix(self.surface, count), self.spec)
    }

    fn solve_system(&self, system: &AssembledSystem, key: u64) -> Result<(Vec<f64>, Vec<Vec<f64>>, bool), FlowError> {
        let k = self.k.min(available_dofs(system));
        let opts = EigenOptions { seed: mix_seed(self.eigen.seed, key), ..self.eigen };
        let r = smallest_eigenpairs_with(system, k, &opts)?;
        let converged = r.is_complete();
        Ok((r.eigenvalues, r.eigenvectors, converged))
    }

    /// Computes samples at the given `t` values (any order, duplicates
    /// allowed); results are independent of evaluation order.
    fn evaluate(&self, points: &[(f64, usize)]) -> Result<Vec<Outcome>, FlowError> {
        let prepared: Vec<(f64, usize, crate::surface::SublevelDomain)> = points
            .par_iter()
            .map(|&(t, count)| (t, count, self.filtration.prefix(self.surface, count)))
            .collect();
        let mut todo: BTreeMap<usize, usize> = BTreeMap::new();
        {
            let cache = self.cache.lock().unwrap();
            for (i, (_, _, d)) in prepared.iter().enumerate() {
                let n = d.interior_vertices().len();
                if n > 0 && !cache.contains_key(&n) {
                    todo.entry(n).or_insert(i);
                }
            }
        }
        let solved: Vec<(usize, Result<Solved, FlowError>)> = todo
            .into_par_iter()
            .map(|(n, i)| {
                let (_, count, d) = &prepared[i];
                let result = assemble(self.surface, d, self.spec).map_err(FlowError::from).and_then(|sys| {
                    let (eigenvalues, _, converged) = self.solve_system(&sys, *count as u64 ^ (n as u64) << 32)?;
                    Ok(Solved { eigenvalues, converged })
                });
                (n, result)
            })
            .collect();
        {
            let mut cache = self.cache.lock().unwrap();
            for (n, r) in solved {
                cache.insert(n, Arc::new(r?));
            }
        }
        let cache = self.cache.lock().unwrap();
        Ok(prepared
            .into_iter()
            .map(|(t, count, d)| {
                let n = d.interior_vertices().len();
                if n == 0 {
                    log::info!("skipping t = {t}: domain below first spectral threshold");
                    return Outcome::Skipped(SkippedSample {
                        t,
                        reason: "domain below first spectral threshold".to_string(),
                    });
                }
                let s = &cache[&n];
                Outcome::Sample(SpectralSample {
                    t,
                    filtration_count: count,
                    dof_count: n,
                    euler_characteristic: d.euler_characteristic(),
                    eigenvalues: s.eigenvalues.clone(),
                    nullity: 0,
                    converged: s.converged,
                })
            })
            .collect())
    }

    fn samples(&self, ts: &[f64]) -> Result<(Vec<SpectralSample>, Vec<SkippedSample>), FlowError> {
        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        let points: Vec<(f64, usize)> = ts.iter().map(|&t| (t, self.filtration.count_below(t))).collect();
        for o in self.evaluate(&points)? {
            match o {
                Outcome::Sample(s) => samples.push(s),
                Outcome::Skipped(s) => skipped.push(s),
            }
        }
        Ok((samples, skipped))
    }

    /// Uniform samples on `[a, b]` (both ends included).
    pub fn uniform_samples(&self, a: f64, b: f64, n: usize) -> Result<Vec<SpectralSample>, FlowError> {
        Ok(self.samples(&linspace(a, b, n))?.0)
    }

    fn eigen_at_count(&self, count: usize) -> Result<Arc<Solved>, FlowError> {
        let t = if count == 0 { f64::NEG_INFINITY } else { self.filtration.entry_value(count - 1) };
        match self.evaluate(&[(t, count)])?.pop() {
            Some(Outcome::Sample(s)) => Ok(Arc::new(Solved { eigenvalues: s.eigenvalues, converged: s.converged })),
            _ => Ok(Arc::new(Solved { eigenvalues: Vec::new(), converged: true })),
        }
    }

    pub fn run(&self, catalog: &CriticalCatalog, config: &SweepConfig) -> Result<SweepReport, FlowError> {
        config.validate()?;
        if config.k != self.k {
            return Err(FlowError::Config("k differs from the engine's k".to_string()));
        }
        let (a, b) = (config.t_start, config.t_end);
        let base = linspace(a, b, config.base_samples);
        let dt = (b - a) / (config.base_samples - 1) as f64;
        let critical_values: Vec<f64> = catalog.values().into_iter().filter(|&v| v > a && v < b).collect();
        let mut ts = base.clone();
        for &c in &critical_values {
            for d in 1..=config.refine_depth {
                let off = dt / 2f64.powi(d as i32);
                ts.extend([c - off, c + off].into_iter().filter(|&t| t > a && t < b));
            }
        }
        let (mut samples, mut skipped) = self.samples(&ts)?;
        sort_samples(&mut samples);

        let final_lambda_k = samples.last().and_then(|s| s.eigenvalues.last().copied()).unwrap_or(0.0);
        let null_tol = config.null_tol.unwrap_or(1e-6 * final_lambda_k.abs().max(1.0));

        // dyadic refinement of every sign change on the t-grid
        let mut extra = Vec::new();
        for (branch, lo, hi) in sign_changes(&samples, self.k, null_tol) {
            let (mut ta, mut tb) = (samples[lo].t, samples[hi].t);
            for _ in 0..config.refine_depth {
                let mid = 0.5 * (ta + tb);
                let (mut s, _) = self.samples(&[mid])?;
                match s.pop() {
                    Some(s) => {
                        extra.push(s.clone());
                        if sign_of(&s, branch, null_tol) == Sign::Positive {
                            ta = mid;
                        } else {
                            tb = mid;
                        }
                    }
                    None => ta = mid,
                }
            }
        }
        samples.extend(extra);
        sort_samples(&mut samples);
        for s in &mut samples {
            s.nullity = nullity_of_sample(&s.eigenvalues, null_tol);
        }
        skipped.sort_by(|x, y| x.t.total_cmp(&y.t));
        skipped.dedup();

        let changes = sign_changes(&samples, self.k, null_tol);
        let mut crossings_per_branch = vec![0; self.k];
        for &(branch, _, _) in &changes {
            crossings_per_branch[branch] += 1;
        }
        let mut crossings: Vec<Crossing> = Vec::new();
        for (branch, lo, hi) in changes {
            if crossings.iter().any(|c| c.branches.contains(&branch) && c.t_minus <= samples[lo].t && samples[hi].t <= c.t_plus) {
                continue;
            }
            crossings.push(self.refine_crossing(branch, &samples[lo], &samples[hi], null_tol)?);
        }
        crossings.sort_by(|x, y| x.t_star.total_cmp(&y.t_star).then(x.branch.cmp(&y.branch)));

        let unconverged_samples = samples.iter().filter(|s| !s.converged).count();
        let endpoint_nullity = samples.last().map_or(0, |s| s.nullity);
        let mut report = SweepReport {
            config: config.clone(),
            null_tol,
            max_jump: max_jump(&samples, self.k),
            monotonicity_violations: check_monotonicity(&samples, config.mono_tol),
            samples,
            skipped,
            critical_values,
            crossings,
            index_direct: None,
            index_summed: None,
            index_errors: Vec::new(),
            endpoint_nullity,
            crossings_per_branch,
            unconverged_samples,
        };
        if endpoint_nullity > 0 {
            report.index_errors.push(format!("nullity at endpoint: {endpoint_nullity}"));
        }
        match report.final_sample().ok_or(FlowError::FinalSample).and_then(|s| morse_index_direct(s, self.k, null_tol)) {
            Ok(i) => report.index_direct = Some(i),
            Err(e) => report.index_errors.push(e.to_string()),
        }
        match morse_index_summed(&report) {
            Ok(i) => report.index_summed = Some(i),
            Err(e) => report.index_errors.push(e.to_string()),
        }
        Ok(report)
    }

    fn branch_value(&self, count: usize, branch: usize) -> Result<f64, FlowError> {
        Ok(self.eigen_at_count(count)?.eigenvalues.get(branch).copied().unwrap_or(f64::INFINITY))
    }

    fn refine_crossing(
        &self,
        branch: usize,
        minus: &SpectralSample,
        plus: &SpectralSample,
        null_tol: f64,
    ) -> Result<Crossing, FlowError> {
        // integer bisection: λ(lo) > tol, λ(hi) <= tol
        let (mut lo, mut hi) = (minus.filtration_count, plus.filtration_count);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.branch_value(mid, branch)? > null_tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_star = self.filtration.entry_value(hi - 1);
        let small = self.system_at_count(lo).ok();
        let large = self.system_at_count(hi)?;
        let mut crossing = Crossing {
            branch,
            branches: vec![branch],
            t_minus: minus.t,
            t_plus: plus.t,
            t_star,
            step: hi,
            theta: 1.0,
            lambda_at_root: f64::NAN,
            jacobi_residual: f64::NAN,
            multiplicity: 0,
            refined: false,
        };
        // penalty on the DOFs that are interior in the larger domain only
        let released: Vec<bool> = large
            .dof_vertices()
            .iter()
            .map(|&v| small.as_ref().map_or(true, |s| s.dof_of_vertex(v).is_none()))
            .collect();
        let kappa = large.stiffness_grad().diagonal();
        let at = |theta: f64| -> Result<(AssembledSystem, Vec<f64>, Vec<Vec<f64>>), FlowError> {
            let p = (1.0 - theta) / theta;
            let penalty: Vec<f64> =
                released.iter().zip(&kappa).map(|(&r, &k)| if r { p * k } else { 0.0 }).collect();
            let sys = large.with_diagonal_penalty(&penalty);
            let key = mix_seed(hi as u64, theta.to_bits());
            let (values, vectors, _) = self.solve_system(&sys, key)?;
            Ok((sys, values, vectors))
        };
        let value = |values: &[f64]| values.get(branch).copied().unwrap_or(f64::INFINITY);

        let (mut ta, mut tb) = (1e-12, 1.0);
        let (_, va, _) = at(ta)?;
        let (sys_b, vb_all, vecs_b) = at(tb)?;
        let (mut fa, mut fb) = (value(&va), value(&vb_all));
        let mut root = if fb.abs() <= null_tol { Some((tb, sys_b, vb_all, vecs_b)) } else { None };
        if root.is_none() && fa > null_tol && fb < -null_tol {
            // Illinois regula falsi on θ, with bisection when a side is unbounded
            let mut side = 0i8;
            for _ in 0..200 {
                let tc = if fa.is_finite() && fa < 1e12 {
                    let r = tb - fb * (tb - ta) / (fb - fa);
                    if r > ta && r < tb {
                        r
                    } else {
                        0.5 * (ta + tb)
                    }
                } else {
                    (ta * tb).sqrt()
                };
                let (sys_c, vc, vecs_c) = at(tc)?;
                let fc = value(&vc);
                if fc.abs() <= null_tol {
                    root = Some((tc, sys_c, vc, vecs_c));
                    break;
                }
                if fc > 0.0 {
                    ta = tc;
                    fa = fc;
                    if side == 1 {
                        fb *= 0.5;
                    }
                    side = 1;
                } else {
                    tb = tc;
                    fb = fc;
                    if side == -1 {
                        fa *= 0.5;
                    }
                    side = -1;
                }
                if tb - ta <= 1e-15 * tb {
                    break;
                }
            }
        }
        if let Some((theta, sys, values, vectors)) = root {
            let branches: Vec<usize> = (0..values.len()).filter(|&i| values[i].abs() <= null_tol).collect();
            crossing.theta = theta;
            crossing.lambda_at_root = values[branch];
            crossing.jacobi_residual = jacobi_residual(&sys, &vectors[branch])?;
            crossing.multiplicity = branches.len();
            crossing.branch = branches[0].min(branch);
            crossing.branches = branches;
            crossing.refined = true;
        } else {
            log::warn!("crossing of branch {branch} near t = {t_star} was not resolved");
        }
        Ok(crossing)
    }

    /// Maximum per-branch jump on uniform grids of increasing size, on the
    /// whole range and optionally on a window.
    pub fn continuity_report(
        &self,
        range: (f64, f64),
        levels: &[usize],
        window: Option<(f64, f64)>,
    ) -> Result<ContinuityReport, FlowError> {
        if levels.len() < 2 {
            return Err(FlowError::Config("continuity needs at least two refinement levels".to_string()));
        }
        let mut whole = Vec::new();
        let mut windowed = Vec::new();
        for &n in levels {
            let samples = self.uniform_samples(range.0, range.1, n)?;
            whole.push(ContinuityLevel::new(n, range, &samples, self.k));
            if let Some(w) = window {
                let samples = self.uniform_samples(w.0, w.1, n)?;
                windowed.push(ContinuityLevel::new(n, w, &samples, self.k));
            }
        }
        Ok(ContinuityReport::from_levels(whole, windowed))
    }

    /// Jump statistics of a uniform grid of `n` samples on `range`.
    pub fn continuity_level(&self, range: (f64, f64), n: usize) -> Result<ContinuityLevel, FlowError> {
        let samples = self.uniform_samples(range.0, range.1, n)?;
        Ok(ContinuityLevel::new(n, range, &samples, self.k))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityLevel {
    pub samples: usize,
    pub range: (f64, f64),
    pub max_jump: Vec<f64>,
    pub modulus: f64,
    pub euler_characteristics: Vec<i64>,
}

impl ContinuityLevel {
    pub fn new(n: usize, range: (f64, f64), samples: &[SpectralSample], k: usize) -> Self {
        let jumps = max_jump(samples, k);
        let mut chis: Vec<i64> = samples.iter().map(|s| s.euler_characteristic).collect();
        chis.dedup();
        ContinuityLevel {
            samples: n,
            range,
            modulus: jumps.iter().copied().fold(0.0, f64::max),
            max_jump: jumps,
            euler_characteristics: chis,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub whole: Vec<ContinuityLevel>,
    pub window: Vec<ContinuityLevel>,
    pub modulus_non_increasing: bool,
    pub strictly_decreasing_per_branch: bool,
}

impl ContinuityReport {
    /// Levels must be ordered from coarse to fine.
    pub fn from_levels(whole: Vec<ContinuityLevel>, window: Vec<ContinuityLevel>) -> Self {
        let decreasing = |levels: &[ContinuityLevel]| {
            levels.windows(2).all(|w| {
                w[0].max_jump.iter().zip(&w[1].max_jump).all(|(a, b)| b < a || (*a == 0.0 && *b == 0.0))
            })
        };
        let non_increasing = |levels: &[ContinuityLevel]| levels.windows(2).all(|w| w[1].modulus <= w[0].modulus);
        ContinuityReport {
            strictly_decreasing_per_branch: decreasing(&whole) && decreasing(&window),
            modulus_non_increasing: non_increasing(&whole) && non_increasing(&window),
            whole,
            window,
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

fn sort_samples(samples: &mut Vec<SpectralSample>) {
    samples.sort_by(|x, y| x.t.total_cmp(&y.t));
    samples.dedup_by(|x, y| x.t == y.t);
}

/// Runs a full sweep with refinement, crossing resolution and index counts.
pub fn run_sweep(
    surface: &TriangulatedSurface,
    h: &ScalarField,
    catalog: &CriticalCatalog,
    spec: &OperatorSpec,
    config: &SweepConfig,
) -> Result<SweepReport, FlowError> {
    config.validate()?;
    let engine = SweepEngine::new(surface, h, spec, config.k, config.eigen)?;
    engine.run(catalog, config)
}
