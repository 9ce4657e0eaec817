//! The regularized operator `B = A - rho * 1 1^T` and the first-stage power
//! method.
//!
//! `B` is never formed: a product costs one sparse pass over `A` plus one
//! dense reduction for the rank-one correction.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::rng::stream_rng;
use crate::sbm::SbmGraph;

/// Residual tolerance used for the early exit of the first stage.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
pub const PM_ITERS_MIN: usize = 10;
pub const PM_ITERS_MAX: usize = 200;

/// Rows per rayon task in the parallel product.
const PAR_CHUNK: usize = 4096;

/// A symmetric linear map on `R^n`.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;

    /// Writes `self * v` into `out`. Both slices have length `dim()`.
    fn apply(&self, v: &[f64], out: &mut [f64]);
}

/// `rho = 1^T A 1 / n^2`, taken from the exact integer entry count.
pub fn compute_rho(graph: &SbmGraph) -> f64 {
    let n = graph.n() as f64;
    graph.nnz() as f64 / (n * n)
}

#[derive(Debug, Clone, Copy)]
pub struct RegularizedOperator<'g> {
    graph: &'g SbmGraph,
    rho: f64,
    parallel: bool,
}

impl<'g> RegularizedOperator<'g> {
    pub fn new(graph: &'g SbmGraph) -> Self {
        Self { graph, rho: compute_rho(graph), parallel: false }
    }

    /// Splits products across the rayon pool. Each output entry is written by
    /// one task and summed in the same order, so results are unchanged.
    pub fn parallel(mut self, enabled: bool) -> Self {
        self.parallel = enabled;
        self
    }

    pub fn graph(&self) -> &'g SbmGraph {
        self.graph
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n()];
        self.matvec_into(v, &mut out)?;
        Ok(out)
    }

    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.n(), v.len())?;
        check_len(self.n(), out.len())?;
        let shift = self.rho * v.iter().sum::<f64>();
        let g = self.graph;
        let row_value = |i: usize| g.row(i).iter().map(|&j| v[j as usize]).sum::<f64>() - shift;
        if self.parallel && out.len() > PAR_CHUNK {
            out.par_chunks_mut(PAR_CHUNK).enumerate().for_each(|(c, chunk)| {
                let base = c * PAR_CHUNK;
                for (k, o) in chunk.iter_mut().enumerate() {
                    *o = row_value(base + k);
                }
            });
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = row_value(i);
            }
        }
        Ok(())
    }

    /// Signs of `B x` for a `±1` vector, evaluated exactly.
    ///
    /// With integer `x`, `(Bx)_i = d_i - nnz * s / n^2` where `d_i` is the
    /// signed neighbour count and `s = 1^T x`; the comparison
    /// `n^2 d_i >= nnz * s` is done in `i128`, so zero entries are detected
    /// without rounding.
    pub fn label_product_signs(&self, x: &[i8], out: &mut [i8]) -> Result<()> {
        check_len(self.n(), x.len())?;
        check_len(self.n(), out.len())?;
        let n = self.n() as i128;
        let s: i64 = x.iter().map(|&l| l as i64).sum();
        let rhs = self.graph.nnz() as i128 * s as i128;
        let g = self.graph;
        for (i, o) in out.iter_mut().enumerate() {
            let d: i64 = g.row(i).iter().map(|&j| x[j as usize] as i64).sum();
            *o = if n * n * d as i128 >= rhs { 1 } else { -1 };
        }
        Ok(())
    }
}

impl SymmetricOperator for RegularizedOperator<'_> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.matvec_into(v, out).expect("operator dimension");
    }
}

/// Plain adjacency matrix `A`.
#[derive(Debug, Clone, Copy)]
pub struct AdjacencyOperator<'g>(pub &'g SbmGraph);

impl SymmetricOperator for AdjacencyOperator<'_> {
    fn dim(&self) -> usize {
        self.0.n()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0.row(i).iter().map(|&j| v[j as usize]).sum();
        }
    }
}

/// `M - lambda u u^T` for a unit vector `u`.
pub struct Deflated<'a, O> {
    pub inner: &'a O,
    pub lambda: f64,
    pub vector: &'a [f64],
}

impl<O: SymmetricOperator> SymmetricOperator for Deflated<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.inner.apply(v, out);
        let c = self.lambda * dot(self.vector, v);
        for (o, u) in out.iter_mut().zip(self.vector) {
            *o -= c * u;
        }
    }
}

/// A vector of unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Rescales `v` to unit length; `None` for a zero or non-finite vector.
    pub fn normalize(mut v: Vec<f64>) -> Option<Self> {
        let norm = norm2(&v);
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Some(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Uniform sample from the unit sphere of `R^n` (normalized Gaussian).
pub fn sample_unit_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitVector> {
    if n == 0 {
        return Err(Error::InvalidParams("cannot sample the unit sphere of R^0".into()));
    }
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = UnitVector::normalize(v) {
            return Ok(u);
        }
    }
}

/// The first-stage start vector for a given algorithm seed.
pub fn initial_vector(n: usize, seed: u64) -> Result<UnitVector> {
    sample_unit_sphere(n, &mut stream_rng(seed, 0))
}

#[derive(Debug, Clone)]
pub struct PmReport {
    pub iterations_run: usize,
    pub final_vector: UnitVector,
    /// `y^T B y` at the returned vector.
    pub rayleigh_quotient: f64,
    /// `min_s ||y^k - s y^{k-1}||_2` at exit.
    pub residual: f64,
}

/// One step of the power method, as seen by an observer.
#[derive(Debug, Clone, Copy)]
pub struct PmStep<'a> {
    pub iteration: usize,
    pub vector: &'a [f64],
    pub rayleigh: f64,
    pub residual: f64,
}

pub fn power_method<O: SymmetricOperator + ?Sized>(
    op: &O,
    y0: &UnitVector,
    max_iters: usize,
    residual_tol: f64,
) -> Result<PmReport> {
    power_method_observed(op, y0, max_iters, residual_tol, |_| {})
}

/// Runs `y^k = B y^{k-1} / ||B y^{k-1}||` until `max_iters` steps or until
/// the sign-aligned step length drops to `residual_tol`.
pub fn power_method_observed<O, F>(
    op: &O,
    y0: &UnitVector,
    max_iters: usize,
    residual_tol: f64,
    mut observer: F,
) -> Result<PmReport>
where
    O: SymmetricOperator + ?Sized,
    F: FnMut(&PmStep<'_>),
{
    let n = op.dim();
    check_len(n, y0.len())?;
    if max_iters == 0 {
        return Err(Error::InvalidParams("power method needs max_iters >= 1".into()));
    }
    if residual_tol.is_nan() || residual_tol < 0.0 {
        return Err(Error::InvalidParams(format!("residual_tol must be >= 0, got {residual_tol}")));
    }

    let mut y = y0.as_slice().to_vec();
    let mut next = vec![0.0; n];
    let mut by = vec![0.0; n];
    op.apply(&y, &mut by);
    let mut rayleigh = dot(&y, &by);
    let mut residual = f64::INFINITY;
    let mut k = 0;
    while k < max_iters {
        k += 1;
        let norm = norm2(&by);
        if !norm.is_finite() {
            return Err(Error::NonFinite { context: "in the power iterate", iteration: k });
        }
        if norm == 0.0 {
            return Err(Error::Breakdown { iteration: k });
        }
        for (t, b) in next.iter_mut().zip(&by) {
            *t = b / norm;
        }
        residual = sign_aligned_distance(&next, &y);
        std::mem::swap(&mut y, &mut next);
        op.apply(&y, &mut by);
        rayleigh = dot(&y, &by);
        observer(&PmStep { iteration: k, vector: &y, rayleigh, residual });
        if residual <= residual_tol {
            break;
        }
    }
    Ok(PmReport { iterations_run: k, final_vector: UnitVector(y), rayleigh_quotient: rayleigh, residual })
}

/// Iteration budget for the first stage: the smallest `N` for which the
/// linear-rate bound `n (6 c / ((alpha - beta) sqrt(ln n)))^N` falls below
/// `3 sqrt(2) c / ((alpha - beta) sqrt(ln n))`, evaluated with the
/// non-constructive spectral constant `c` set to 1 and clamped to
/// `[PM_ITERS_MIN, PM_ITERS_MAX]`.
pub fn default_pm_iters(n: usize, alpha: f64, beta: f64) -> Result<usize> {
    if !(alpha > beta) {
        return Err(Error::InvalidParams(format!(
            "alpha > beta is required for a spectral gap (alpha = {alpha}, beta = {beta})"
        )));
    }
    if n < 8 {
        return Err(Error::InvalidParams(format!("default_pm_iters needs n >= 8, got {n}")));
    }
    let gap = alpha - beta;
    let ln_n = (n as f64).ln();
    let num = (gap * n as f64 * ln_n.sqrt()).ln() - (3.0 * 2f64.sqrt()).ln();
    let den = (gap * ln_n.sqrt()).ln() - 6f64.ln();
    if !(den > 0.0) || !num.is_finite() {
        return Ok(PM_ITERS_MAX);
    }
    let raw = (num / den).ceil();
    Ok(raw.clamp(PM_ITERS_MIN as f64, PM_ITERS_MAX as f64) as usize)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `min_{s = ±1} ||a - s b||_2`, computed without cancellation.
pub fn sign_aligned_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut plus, mut minus) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        plus += (x - y) * (x - y);
        minus += (x + y) * (x + y);
    }
    plus.min(minus).sqrt()
}
