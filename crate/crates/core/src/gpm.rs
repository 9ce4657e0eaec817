//! Second stage: the generalized power method `x <- sign(B x)` on the
//! hypercube, and the complete two-stage recovery driver.

use std::time::Instant;

use rand::seq::index::sample;

use crate::error::{check_len, Error, Result};
use crate::rng::stream_rng;
use crate::sbm::{GroundTruth, SbmGraph};
use crate::spectral::{
    default_pm_iters, initial_vector, norm2, power_method_observed, RegularizedOperator, DEFAULT_RESIDUAL_TOL,
    PM_ITERS_MAX,
};

pub const DEFAULT_GPM_MAX_ITERS: usize = 100;

/// A `±1` vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::InvalidParams("label entries must be +1 or -1".into()));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&v| -v).collect())
    }

    /// Copy with entry `i` negated.
    pub fn with_flip(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v[i] = -v[i];
        Self(v)
    }
}

impl From<&GroundTruth> for LabelVector {
    fn from(truth: &GroundTruth) -> Self {
        Self(truth.as_slice().to_vec())
    }
}

/// Entrywise sign with `sign(0) = +1`.
pub fn sign_map(v: &[f64]) -> Result<LabelVector> {
    if v.is_empty() {
        return Err(Error::InvalidParams("sign_map of an empty vector".into()));
    }
    v.iter()
        .map(|&x| {
            if x.is_nan() {
                Err(Error::NonFinite { context: "in sign_map input", iteration: 0 })
            } else {
                Ok(if x >= 0.0 { 1 } else { -1 })
            }
        })
        .collect::<Result<Vec<i8>>>()
        .map(LabelVector)
}

/// One generalized power step `sign(B x)`, evaluated exactly.
pub fn gpm_step(op: &RegularizedOperator<'_>, x: &LabelVector) -> Result<LabelVector> {
    let mut out = vec![0i8; x.len()];
    op.label_product_signs(x.as_slice(), &mut out)?;
    Ok(LabelVector(out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpmOutcome {
    pub labels: LabelVector,
    pub iterations: usize,
    /// `x^k = x^{k-1}` was reached.
    pub converged: bool,
    /// Stopped on `x^k = x^{k-2} != x^{k-1}`.
    pub cycled: bool,
}

pub fn gpm_run(op: &RegularizedOperator<'_>, x0: &[f64], max_iters: usize) -> Result<GpmOutcome> {
    gpm_run_observed(op, x0, max_iters, |_, _| {})
}

/// Iterates from a real start `x0` with `||x0|| = sqrt(n)` until a fixed
/// point, a 2-cycle, or `max_iters` steps. The observer sees `(k, x^k)`.
pub fn gpm_run_observed<F>(op: &RegularizedOperator<'_>, x0: &[f64], max_iters: usize, mut observer: F) -> Result<GpmOutcome>
where
    F: FnMut(usize, &LabelVector),
{
    let n = op.n();
    check_len(n, x0.len())?;
    if max_iters == 0 {
        return Err(Error::InvalidParams("gpm_run needs max_iters >= 1".into()));
    }
    let root_n = (n as f64).sqrt();
    let norm = norm2(x0);
    if !((norm - root_n).abs() <= 1e-9 * root_n) {
        return Err(Error::InvalidParams(format!("gpm start must have norm sqrt(n) = {root_n}, got {norm}")));
    }

    let first = sign_map(&op.matvec(x0)?)?;
    observer(1, &first);
    if x0.iter().zip(first.as_slice()).all(|(&a, &b)| a == b as f64) {
        return Ok(GpmOutcome { labels: first, iterations: 1, converged: true, cycled: false });
    }

    let mut before: Option<LabelVector> = None;
    let mut current = first;
    for k in 2..=max_iters {
        let next = gpm_step(op, &current)?;
        observer(k, &next);
        if next == current {
            return Ok(GpmOutcome { labels: next, iterations: k, converged: true, cycled: false });
        }
        if before.as_ref() == Some(&next) {
            return Ok(GpmOutcome { labels: next, iterations: k, converged: false, cycled: true });
        }
        before = Some(std::mem::replace(&mut current, next));
    }
    Ok(GpmOutcome { labels: current, iterations: max_iters, converged: false, cycled: false })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    /// First-stage iteration cap; `None` picks [`default_pm_iters`] from the
    /// graph's generating rates, or [`PM_ITERS_MAX`] when they are unknown.
    pub pm_iters: Option<usize>,
    pub residual_tol: f64,
    pub gpm_max_iters: usize,
    /// Row-parallel products.
    pub parallel: bool,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self { pm_iters: None, residual_tol: DEFAULT_RESIDUAL_TOL, gpm_max_iters: DEFAULT_GPM_MAX_ITERS, parallel: false }
    }
}

impl RecoveryConfig {
    pub fn pm_budget(&self, graph: &SbmGraph) -> usize {
        self.pm_iters.unwrap_or_else(|| {
            graph
                .rates()
                .and_then(|r| default_pm_iters(graph.n(), r.alpha, r.beta).ok())
                .unwrap_or(PM_ITERS_MAX)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub labels: LabelVector,
    pub pm_iterations: usize,
    pub gpm_iterations: usize,
    pub converged: bool,
    pub cycled: bool,
    pub wall_time_ns: u128,
}

/// Hooks into both stages of [`two_stage_recover_observed`].
pub trait RecoveryObserver {
    fn pm_step(&mut self, _iteration: usize, _y: &[f64], _rayleigh: f64, _residual: f64) {}
    fn gpm_step(&mut self, _iteration: usize, _x: &LabelVector) {}
}

impl RecoveryObserver for () {}

pub fn two_stage_recover(graph: &SbmGraph, config: &RecoveryConfig, seed: u64) -> Result<RecoveryResult> {
    two_stage_recover_observed(graph, config, seed, &mut ())
}

/// Power method from a random point on the sphere, then the generalized
/// power method from `sqrt(n) y^N`.
pub fn two_stage_recover_observed<O: RecoveryObserver + ?Sized>(
    graph: &SbmGraph,
    config: &RecoveryConfig,
    seed: u64,
    observer: &mut O,
) -> Result<RecoveryResult> {
    let start = Instant::now();
    let n = graph.n();
    let op = RegularizedOperator::new(graph).parallel(config.parallel);
    let y0 = initial_vector(n, seed)?;
    let pm = power_method_observed(&op, &y0, config.pm_budget(graph), config.residual_tol, |s| {
        observer.pm_step(s.iteration, s.vector, s.rayleigh, s.residual)
    })?;

    let y = pm.final_vector.as_slice();
    let scale = (n as f64).sqrt() / norm2(y);
    let x0: Vec<f64> = y.iter().map(|v| v * scale).collect();
    let gpm = gpm_run_observed(&op, &x0, config.gpm_max_iters, |k, x| observer.gpm_step(k, x))?;

    Ok(RecoveryResult {
        labels: gpm.labels,
        pm_iterations: pm.iterations_run,
        gpm_iterations: gpm.iterations,
        converged: gpm.converged,
        cycled: gpm.cycled,
        wall_time_ns: start.elapsed().as_nanos(),
    })
}

/// `min_i x*_i (B x*)_i`. A positive value makes `x*` a fixed point.
pub fn positivity_certificate(op: &RegularizedOperator<'_>, truth: &GroundTruth) -> Result<f64> {
    let bx = op.matvec(&truth.to_f64())?;
    Ok(bx.iter().zip(truth.as_slice()).map(|(b, &x)| b * x as f64).fold(f64::INFINITY, f64::min))
}

/// Whether every `±1` vector at Hamming distance one from `x*` is mapped to
/// `x*` by a single step. Checked exhaustively.
pub fn single_flips_recover(op: &RegularizedOperator<'_>, truth: &GroundTruth) -> Result<bool> {
    let target = LabelVector::from(truth);
    for l in 0..target.len() {
        if gpm_step(op, &target.with_flip(l))? != target {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest Hamming radius `h <= max_flips` such that every sampled start
/// with `1..=h` flipped entries reaches `x*` in one step. Sampled, not
/// exhaustive, beyond radius one.
pub fn one_step_radius(
    op: &RegularizedOperator<'_>,
    truth: &GroundTruth,
    max_flips: usize,
    samples: usize,
    seed: u64,
) -> Result<usize> {
    check_len(op.n(), truth.len())?;
    let target = LabelVector::from(truth);
    if gpm_step(op, &target)? != target {
        return Ok(0);
    }
    let mut rng = stream_rng(seed, 0);
    let n = target.len();
    for h in 1..=max_flips.min(n) {
        for _ in 0..samples {
            let mut x = target.clone().into_inner();
            for i in sample(&mut rng, n, h) {
                x[i] = -x[i];
            }
            if gpm_step(op, &LabelVector(x))? != target {
                return Ok(h - 1);
            }
        }
    }
    Ok(max_flips.min(n))
}
