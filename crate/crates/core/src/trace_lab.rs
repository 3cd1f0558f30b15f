//! Boundary-layer constructions on a Lipschitz graph domain
//! `U = {(x, r) : u(x) < r < v(x)}` over a 1D base interval: the mollified
//! graph `w = (u + 2δ) * φ_α`, the cut-off `η = η₀((r - w(x)) / δ)` and the
//! `W^{1,2}` size of `f - f η` as the tube shrinks.
//!
//! Fields on the tube `{u < r < u + 4δ}` live on a body-fitted grid
//! `(x_i, s_j)` with `r = u(x_i) + s_j`; the map has unit Jacobian, and `x`
//! derivatives are recovered through the chain rule.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("mollifier radius {alpha} is below two grid spacings ({dx})")]
    UnderResolved { alpha: f64, dx: f64 },
    #[error("grid needs at least {min} points, got {got}")]
    GridTooCoarse { min: usize, got: usize },
    #[error("u violates the Lipschitz bound between grid points {0} and {1}")]
    NotLipschitz(usize, usize),
    #[error("top graph does not lie above u at grid point {0}")]
    TopBelowBottom(usize),
    #[error("tube of width {width} does not fit below the top graph")]
    TubeTooWide { width: f64 },
    #[error("mollified graph has length {got}, grid has {expected}")]
    Mismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Graph domain over a uniform base grid.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzTriple {
    x: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    l0: f64,
    r_resolution: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphCase {
    Constant,
    Linear,
    Corner,
}

impl LipschitzTriple {
    pub fn new(x: Vec<f64>, u: Vec<f64>, v: Vec<f64>, l0: f64, r_resolution: usize) -> Result<Self, TraceError> {
        if x.len() < 3 {
            return Err(TraceError::GridTooCoarse { min: 3, got: x.len() });
        }
        if r_resolution < 3 {
            return Err(TraceError::GridTooCoarse { min: 3, got: r_resolution });
        }
        if u.len() != x.len() || v.len() != x.len() {
            return Err(TraceError::Mismatch { expected: x.len(), got: u.len().min(v.len()) });
        }
        if !(l0 > 0.0 && l0.is_finite()) {
            return Err(TraceError::Parameter("Lipschitz constant must be positive"));
        }
        let dx = x[1] - x[0];
        if !(dx > 0.0) || x.windows(2).any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx) {
            return Err(TraceError::Parameter("base grid must be uniform and increasing"));
        }
        // on a uniform grid adjacent pairs bound every pair by the triangle inequality
        for i in 0..x.len() - 1 {
            if (u[i + 1] - u[i]).abs() > l0 * dx * (1.0 + 1e-12) {
                return Err(TraceError::NotLipschitz(i, i + 1));
            }
        }
        if let Some(i) = (0..x.len()).find(|&i| !(v[i] > u[i])) {
            return Err(TraceError::TopBelowBottom(i));
        }
        Ok(LipschitzTriple { x, u, v, l0, r_resolution })
    }

    /// One of the reference graphs on `[0, 1]` with `v = u + 1`.
    pub fn reference(case: GraphCase, n: usize, l0: f64, r_resolution: usize) -> Result<Self, TraceError> {
        if n < 3 {
            return Err(TraceError::GridTooCoarse { min: 3, got: n });
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let u: Vec<f64> = x
            .iter()
            .map(|&x| match case {
                GraphCase::Constant => 0.25,
                GraphCase::Linear => l0 * x,
                GraphCase::Corner => l0 * (x - 0.5).abs(),
            })
            .collect();
        let v = u.iter().map(|u| u + 1.0).collect();
        Self::new(x, u, v, l0, r_resolution)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// `u` at grid offset `i`, continued linearly past the ends (the
    /// continuation keeps the Lipschitz constant).
    fn u_extended(&self, i: isize) -> f64 {
        let n = self.u.len() as isize;
        if i < 0 {
            self.u[0] + i as f64 * (self.u[1] - self.u[0])
        } else if i >= n {
            let last = self.u[(n - 1) as usize];
            last + (i - n + 1) as f64 * (last - self.u[(n - 2) as usize])
        } else {
            self.u[i as usize]
        }
    }
}

/// Normalized discrete weights of the bump `(1 - (x/α)^2)^3` on `|x| <= α`.
fn bump_weights(alpha: f64, dx: f64) -> Vec<f64> {
    let m = (alpha / dx).floor() as usize;
    let raw: Vec<f64> = (0..=m)
        .map(|j| {
            let q = j as f64 * dx / alpha;
            (1.0 - q * q).max(0.0).powi(3)
        })
        .collect();
    let total = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    raw.into_iter().map(|w| w / total).collect()
}

/// `w = (u + 2δ) * φ_α` with `α = δ / L0`.
pub fn mollify_boundary(triple: &LipschitzTriple, delta: f64) -> Result<Vec<f64>, TraceError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(TraceError::Parameter("delta must be positive"));
    }
    let alpha = delta / triple.l0;
    let dx = triple.dx();
    if alpha < 2.0 * dx {
        return Err(TraceError::UnderResolved { alpha, dx });
    }
    let weights = bump_weights(alpha, dx);
    let m = weights.len() as isize - 1;
    Ok((0..triple.x.len() as isize)
        .map(|i| {
            let mut acc = weights[0] * triple.u_extended(i);
            for j in 1..=m {
                acc += weights[j as usize] * (triple.u_extended(i - j) + triple.u_extended(i + j));
            }
            acc + 2.0 * delta
        })
        .collect())
}

/// Largest finite-difference slope of `w`.
pub fn lipschitz_bound_check(w: &[f64], dx: f64) -> f64 {
    w.windows(2).map(|p| (p[1] - p[0]).abs() / dx).fold(0.0, f64::max)
}

/// `max |w - (u + 2δ)|`.
pub fn mollifier_deviation(triple: &LipschitzTriple, w: &[f64], delta: f64) -> f64 {
    w.iter().zip(&triple.u).map(|(w, u)| (w - u - 2.0 * delta).abs()).fold(0.0, f64::max)
}

/// Smoothstep `η₀`: 0 for `s <= 0`, `3s^2 - 2s^3` on `[0, 1]`, 1 beyond.
pub fn eta0(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

/// Scalar field on the body-fitted tube grid `s_j = j * 4δ / (m - 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct TubularField {
    pub delta: f64,
    pub ds: f64,
    /// `values[i][j]` at `(x_i, u(x_i) + s_j)`.
    pub values: Vec<Vec<f64>>,
}

impl TubularField {
    fn sample(triple: &LipschitzTriple, delta: f64, f: impl Fn(usize, f64, f64) -> f64) -> Self {
        let m = triple.r_resolution;
        let ds = 4.0 * delta / (m - 1) as f64;
        let values = (0..triple.x.len())
            .map(|i| (0..m).map(|j| f(i, triple.x[i], triple.u[i] + j as f64 * ds)).collect())
            .collect();
        TubularField { delta, ds, values }
    }

    pub fn inner_row(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|c| c[0])
    }

    pub fn outer_row(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|c| *c.last().unwrap())
    }

    /// Physical gradient `(∂_x, ∂_r)` at every grid node by finite differences
    /// (central inside, one-sided at the edges).
    fn gradient(&self, triple: &LipschitzTriple) -> Vec<Vec<[f64; 2]>> {
        let n = self.values.len();
        let m = self.values[0].len();
        let dx = triple.dx();
        let diff = |lo: usize, hi: usize, a: f64, b: f64, h: f64| (b - a) / ((hi - lo) as f64 * h);
        (0..n)
            .map(|i| {
                let (il, ih) = (i.saturating_sub(1), (i + 1).min(n - 1));
                let du = diff(il, ih, triple.u[il], triple.u[ih], dx);
                (0..m)
                    .map(|j| {
                        let (jl, jh) = (j.saturating_sub(1), (j + 1).min(m - 1));
                        let d_s = diff(jl, jh, self.values[i][jl], self.values[i][jh], self.ds);
                        let d_x_fitted = diff(il, ih, self.values[il][j], self.values[ih][j], dx);
                        [d_x_fitted - du * d_s, d_s]
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn build_cutoff(triple: &LipschitzTriple, w: &[f64], delta: f64) -> Result<TubularField, TraceError> {
    if w.len() != triple.x.len() {
        return Err(TraceError::Mismatch { expected: triple.x.len(), got: w.len() });
    }
    let deviation = mollifier_deviation(triple, w, delta);
    if deviation > delta * (1.0 + 1e-9) {
        return Err(TraceError::Parameter("w was not mollified with this delta"));
    }
    if triple.u.iter().zip(&triple.v).any(|(u, v)| u + 4.0 * delta >= *v) {
        return Err(TraceError::TubeTooWide { width: 4.0 * delta });
    }
    Ok(TubularField::sample(triple, delta, |i, _, r| eta0((r - w[i]) / delta)))
}

/// `sup |Dη|^2 δ^2` on the tube grid.
pub fn cutoff_gradient_bound(triple: &LipschitzTriple, eta: &TubularField) -> f64 {
    let d2 = eta.delta * eta.delta;
    eta.gradient(triple)
        .iter()
        .flatten()
        .map(|g| (g[0] * g[0] + g[1] * g[1]) * d2)
        .fold(0.0, f64::max)
}

/// The bound `2 max|η₀'|^2 (1 + L0^2)` with `max|η₀'| = 3/2`.
pub fn cutoff_constant(l0: f64) -> f64 {
    2.0 * 1.5f64.powi(2) * (1.0 + l0 * l0)
}

fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// Discrete `W^{1,2}` norm of a tube field (values and gradient in `L^2`).
fn sobolev_norm(triple: &LipschitzTriple, g: &TubularField) -> f64 {
    let grad = g.gradient(triple);
    let (n, m) = (g.values.len(), g.values[0].len());
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..m {
            let w = trapezoid_weight(i, n) * trapezoid_weight(j, m);
            let d = grad[i][j];
            acc += w * (g.values[i][j].powi(2) + d[0] * d[0] + d[1] * d[1]);
        }
    }
    (acc * triple.dx() * g.ds).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub delta: f64,
    /// `||f - f η||_{W^{1,2}}`
    pub norm: f64,
    pub sup_grad_eta_sq_times_delta_sq: f64,
    pub mollifier_deviation: f64,
    pub max_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// `max |f|` on the discrete boundary graph.
    pub trace_max: f64,
    pub strictly_decreasing: bool,
    pub floor: f64,
}

impl DecayTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), TraceError> {
        writeln!(out, "delta,norm,sup_grad_eta_sq_times_delta_sq")?;
        for r in &self.rows {
            writeln!(out, "{:?},{:?},{:?}", r.delta, r.norm, r.sup_grad_eta_sq_times_delta_sq)?;
        }
        Ok(())
    }
}

/// `||f - f η_δ||_{W^{1,2}(U)}` for each `δ`; `f` is given in `(x, r)`.
/// Outside the tube `η = 1`, so the integral is over the tube only.
pub fn decay_experiment(
    triple: &LipschitzTriple,
    f: &dyn Fn(f64, f64) -> f64,
    deltas: &[f64],
) -> Result<DecayTable, TraceError> {
    if deltas.is_empty() || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(TraceError::Parameter("delta sequence must be non-empty and decreasing"));
    }
    let trace_max = triple.x.iter().zip(&triple.u).map(|(&x, &u)| f(x, u).abs()).fold(0.0, f64::max);
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let w = mollify_boundary(triple, delta)?;
        let eta = build_cutoff(triple, &w, delta)?;
        let g = TubularField::sample(triple, delta, |i, x, r| {
            let j = ((r - triple.u[i]) / eta.ds).round() as usize;
            f(x, r) * (1.0 - eta.values[i][j])
        });
        rows.push(DecayRow {
            delta,
            norm: sobolev_norm(triple, &g),
            sup_grad_eta_sq_times_delta_sq: cutoff_gradient_bound(triple, &eta),
            mollifier_deviation: mollifier_deviation(triple, &w, delta),
            max_slope: lipschitz_bound_check(&w, triple.dx()),
        });
    }
    Ok(DecayTable {
        strictly_decreasing: rows.windows(2).all(|w| w[1].norm < w[0].norm),
        floor: rows.iter().map(|r| r.norm).fold(f64::INFINITY, f64::min),
        rows,
        trace_max,
    })
}

/// `δ_0, δ_0/2, ..., δ_0/2^halvings`.
pub fn halving_sequence(delta0: f64, halvings: usize) -> Vec<f64> {
    (0..=halvings).map(|i| delta0 / 2f64.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = 400;

    fn triple(case: GraphCase) -> LipschitzTriple {
        LipschitzTriple::reference(case, N, 1.0, 81).unwrap()
    }

    #[test]
    fn constant_graph_mollifies_exactly() {
        let t = triple(GraphCase::Constant);
        let w = mollify_boundary(&t, 0.05).unwrap();
        for x in &w {
            assert!((x - 0.35).abs() < 1e-14);
        }
        assert!(lipschitz_bound_check(&w, t.dx()) < 1e-12);
    }

    #[test]
    fn linear_graph_is_reproduced() {
        let t = triple(GraphCase::Linear);
        let w = mollify_boundary(&t, 0.05).unwrap();
        for (w, u) in w.iter().zip(t.u()) {
            assert!((w - u - 0.1).abs() < 1e-13);
        }
        let slope = lipschitz_bound_check(&w, t.dx());
        assert!((slope - 1.0).abs() < 1e-8);
    }

    #[test]
    fn corner_graph_bounds() {
        let t = triple(GraphCase::Corner);
        for delta in halving_sequence(0.1, 4) {
            let w = mollify_boundary(&t, delta).unwrap();
            assert!(mollifier_deviation(&t, &w, delta) <= delta);
            assert!(lipschitz_bound_check(&w, t.dx()) <= t.l0() * (1.0 + 1e-8));
            // the corner itself is smoothed
            assert!(w[N / 2] > t.u()[N / 2] + 2.0 * delta);
        }
    }

    #[test]
    fn cutoff_vanishes_on_graph_and_saturates_at_tube_edge() {
        for case in [GraphCase::Constant, GraphCase::Linear, GraphCase::Corner] {
            let t = triple(case);
            let delta = 0.025;
            let w = mollify_boundary(&t, delta).unwrap();
            let eta = build_cutoff(&t, &w, delta).unwrap();
            assert!(eta.inner_row().all(|e| e == 0.0));
            assert!(eta.outer_row().all(|e| e == 1.0));
            let sup = cutoff_gradient_bound(&t, &eta);
            assert!(sup <= cutoff_constant(t.l0()), "{case:?} {sup}");
            assert!(sup > 0.0);
        }
    }

    #[test]
    fn eta0_profile() {
        assert_eq!(eta0(-1.0), 0.0);
        assert_eq!(eta0(0.0), 0.0);
        assert_eq!(eta0(0.5), 0.5);
        assert_eq!(eta0(1.0), 1.0);
        assert_eq!(eta0(7.0), 1.0);
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let t = triple(GraphCase::Corner);
        let table = decay_experiment(&t, &|_, _| 0.0, &halving_sequence(0.1, 4)).unwrap();
        assert!(table.rows.iter().all(|r| r.norm == 0.0));
    }

    #[test]
    fn zero_trace_decays_and_constant_does_not() {
        let t = triple(GraphCase::Corner);
        let u: Vec<f64> = t.u().to_vec();
        let x0 = t.x()[0];
        let dx = t.dx();
        let zero_trace = move |x: f64, r: f64| r - u[((x - x0) / dx).round() as usize];
        let deltas = halving_sequence(0.1, 4);
        let table = decay_experiment(&t, &zero_trace, &deltas).unwrap();
        assert!(table.trace_max < 1e-15);
        assert!(table.strictly_decreasing);
        let control = decay_experiment(&t, &|_, _| 1.0, &deltas).unwrap();
        assert!(control.trace_max == 1.0);
        assert!(control.floor > 0.5);
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), deltas.len() + 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = triple(GraphCase::Linear);
        assert!(matches!(mollify_boundary(&t, 1e-4), Err(TraceError::UnderResolved { .. })));
        assert!(matches!(build_cutoff(&t, &[0.0; 3], 0.1), Err(TraceError::Mismatch { .. })));
        let w = mollify_boundary(&t, 0.1).unwrap();
        assert!(build_cutoff(&t, &w, 0.01).is_err());
        assert!(matches!(
            LipschitzTriple::reference(GraphCase::Linear, N, 1.0, 81).and_then(|t| mollify_boundary(&t, 0.3).and_then(|w| build_cutoff(&t, &w, 0.3))),
            Err(TraceError::TubeTooWide { .. })
        ));
        let x = vec![0.0, 0.5, 1.0];
        assert!(matches!(
            LipschitzTriple::new(x.clone(), vec![0.0, 1.0, 0.0], vec![2.0; 3], 1.0, 5),
            Err(TraceError::NotLipschitz(0, 1))
        ));
        assert!(matches!(
            LipschitzTriple::new(x, vec![0.0; 3], vec![1.0, 0.0, 1.0], 1.0, 5),
            Err(TraceError::TopBelowBottom(1))
        ));
    }
}
