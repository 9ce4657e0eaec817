//! Comparison methods: spectral clustering by sign rounding, and manifold
//! gradient ascent on the rank-2 Burer–Monteiro factorization
//! `max <Q, B Q>` over `n x 2` matrices with unit-norm rows.

use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gpm::{sign_map, LabelVector};
use crate::metrics::factor_distance;
use crate::rng::stream_rng;
use crate::sbm::{GroundTruth, SbmGraph};
use crate::spectral::{
    dot, initial_vector, power_method, AdjacencyOperator, Deflated, RegularizedOperator, SymmetricOperator,
    DEFAULT_RESIDUAL_TOL,
};

/// Which matrix spectral clustering takes its eigenvector from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScMatrix {
    /// Dominant eigenvector of `B = A - rho 1 1^T`.
    #[default]
    Regularized,
    /// Second eigenvector of `A`, by deflating the Perron vector.
    Adjacency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub matrix: ScMatrix,
}

impl Default for ScConfig {
    fn default() -> Self {
        Self { tol: DEFAULT_RESIDUAL_TOL, max_iters: 5000, matrix: ScMatrix::Regularized }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScOutcome {
    pub labels: LabelVector,
    pub iterations: usize,
    pub eigenvector: Vec<f64>,
    pub wall_time_ns: u128,
}

pub fn spectral_clustering(graph: &SbmGraph, config: &ScConfig, seed: u64) -> Result<ScOutcome> {
    let start = Instant::now();
    let n = graph.n();
    let y0 = initial_vector(n, seed)?;
    let (vector, iterations) = match config.matrix {
        ScMatrix::Regularized => {
            let op = RegularizedOperator::new(graph);
            let pm = power_method(&op, &y0, config.max_iters, config.tol)?;
            (pm.final_vector.into_inner(), pm.iterations_run)
        }
        ScMatrix::Adjacency => {
            let adj = AdjacencyOperator(graph);
            let perron = power_method(&adj, &y0, config.max_iters, config.tol)?;
            let deflated =
                Deflated { inner: &adj, lambda: perron.rayleigh_quotient, vector: perron.final_vector.as_slice() };
            let z0 = initial_vector(n, seed ^ 0x5c5c_5c5c)?;
            let second = power_method(&deflated, &z0, config.max_iters, config.tol)?;
            (second.final_vector.into_inner(), perron.iterations_run + second.iterations_run)
        }
    };
    Ok(ScOutcome {
        labels: sign_map(&vector)?,
        iterations,
        eigenvector: vector,
        wall_time_ns: start.elapsed().as_nanos(),
    })
}

/// Point on the oblique manifold of `n x 2` matrices with unit rows, stored
/// by columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliquePoint {
    cols: [Vec<f64>; 2],
}

impl ObliquePoint {
    /// Normalizes every row of the given columns; fails on a zero row.
    pub fn from_columns(c0: Vec<f64>, c1: Vec<f64>) -> Result<Self> {
        if c0.len() != c1.len() {
            return Err(Error::DimensionMismatch { expected: c0.len(), got: c1.len() });
        }
        let mut p = Self { cols: [c0, c1] };
        if !p.retract_in_place() {
            return Err(Error::InvalidParams("oblique point has a zero or non-finite row".into()));
        }
        Ok(p)
    }

    /// Rows drawn uniformly from the unit circle.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut c0 = Vec::with_capacity(n);
        let mut c1 = Vec::with_capacity(n);
        for _ in 0..n {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            c0.push(theta.cos());
            c1.push(theta.sin());
        }
        Self { cols: [c0, c1] }
    }

    pub fn n(&self) -> usize {
        self.cols[0].len()
    }

    pub fn row(&self, i: usize) -> [f64; 2] {
        [self.cols[0][i], self.cols[1][i]]
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.cols[k]
    }

    pub fn columns(&self) -> [&[f64]; 2] {
        [&self.cols[0], &self.cols[1]]
    }

    /// Row renormalization. Returns false if some row is zero or non-finite.
    fn retract_in_place(&mut self) -> bool {
        let [c0, c1] = &mut self.cols;
        for (a, b) in c0.iter_mut().zip(c1.iter_mut()) {
            let r = a.hypot(*b);
            if r == 0.0 || !r.is_finite() {
                return false;
            }
            *a /= r;
            *b /= r;
        }
        true
    }

    /// `retract(Q + t V)` for a direction given by columns.
    pub fn step(&self, dir: &[Vec<f64>; 2], t: f64) -> Option<Self> {
        let mut next = self.clone();
        for k in 0..2 {
            for (q, d) in next.cols[k].iter_mut().zip(&dir[k]) {
                *q += t * d;
            }
        }
        next.retract_in_place().then_some(next)
    }
}

/// `B Q`, column by column.
pub fn apply_columns<O: SymmetricOperator + ?Sized>(op: &O, q: &ObliquePoint) -> [Vec<f64>; 2] {
    let n = q.n();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for k in 0..2 {
        op.apply(q.column(k), &mut out[k]);
    }
    out
}

/// `<Q, B Q>` given a precomputed `B Q`.
pub fn objective(q: &ObliquePoint, bq: &[Vec<f64>; 2]) -> f64 {
    dot(q.column(0), &bq[0]) + dot(q.column(1), &bq[1])
}

/// Projects the Euclidean gradient `2 B Q` row-wise onto the tangent space:
/// `g_i - (g_i . q_i) q_i`.
pub fn riemannian_gradient(q: &ObliquePoint, bq: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
    let n = q.n();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let [q0, q1] = q.row(i);
        let (g0, g1) = (2.0 * bq[0][i], 2.0 * bq[1][i]);
        let along = g0 * q0 + g1 * q1;
        out[0][i] = g0 - along * q0;
        out[1][i] = g1 - along * q1;
    }
    out
}

/// Sign of `Q w` with `w` the top right-singular vector of `Q`.
pub fn round_factor(q: &ObliquePoint) -> Result<LabelVector> {
    let (c0, c1) = (q.column(0), q.column(1));
    let a = dot(c0, c0);
    let b = dot(c0, c1);
    let c = dot(c1, c1);
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (w0, w1) = (theta.cos(), theta.sin());
    let proj: Vec<f64> = c0.iter().zip(c1).map(|(x, y)| w0 * x + w1 * y).collect();
    sign_map(&proj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgdConfig {
    /// Fixed step; `None` uses `1 / (2 lambda_1)` from a power-method estimate.
    pub step_size: Option<f64>,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub max_halvings: usize,
}

impl Default for MgdConfig {
    fn default() -> Self {
        Self { step_size: None, max_iters: 2000, grad_tol: 1e-8, max_halvings: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgdOutcome {
    pub labels: LabelVector,
    pub iterations: usize,
    pub converged: bool,
    /// Step in use at exit (after any halving).
    pub step_size: f64,
    pub objective: Vec<f64>,
    /// `||Q^k Q^k^T - x* x*^T||_F` for `k = 0, 1, ...`; empty without truth.
    pub trace: Vec<f64>,
    pub wall_time_ns: u128,
}

/// Estimates `lambda_1(B)` the same way the first stage does; falls back to
/// the bound `max degree + rho n >= ||B||` if that breaks down.
pub fn default_step_size(graph: &SbmGraph, seed: u64) -> Result<f64> {
    let op = RegularizedOperator::new(graph);
    let n = graph.n();
    let y0 = initial_vector(n, seed)?;
    let estimate = power_method(&op, &y0, crate::gpm::RecoveryConfig::default().pm_budget(graph), DEFAULT_RESIDUAL_TOL)
        .ok()
        .map(|r| r.rayleigh_quotient)
        .filter(|&l| l > 0.0 && l.is_finite());
    let lambda = estimate.unwrap_or_else(|| {
        let dmax = (0..n).map(|i| graph.degree(i)).max().unwrap_or(0) as f64;
        dmax + op.rho() * n as f64
    });
    Ok(if lambda > 0.0 { 1.0 / (2.0 * lambda) } else { 1.0 })
}

pub fn mgd_recover(graph: &SbmGraph, config: &MgdConfig, seed: u64, truth: Option<&GroundTruth>) -> Result<MgdOutcome> {
    let start = Instant::now();
    let n = graph.n();
    if let Some(t) = truth {
        crate::error::check_len(n, t.len())?;
    }
    let mut step = match config.step_size {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::InvalidParams(format!("MGD step size must be positive, got {s}"))),
        None => default_step_size(graph, seed)?,
    };
    let op = RegularizedOperator::new(graph);
    let mut q = ObliquePoint::random(n, &mut stream_rng(seed, 1));
    let mut bq = apply_columns(&op, &q);
    let mut f = objective(&q, &bq);
    let mut objective_trace = vec![f];
    let mut trace = Vec::new();
    if let Some(t) = truth {
        trace.push(factor_distance(&q.columns(), t)?);
    }

    let mut iterations = 0;
    let mut converged = false;
    for k in 1..=config.max_iters {
        let grad = riemannian_gradient(&q, &bq);
        let gnorm = (dot(&grad[0], &grad[0]) + dot(&grad[1], &grad[1])).sqrt();
        if !gnorm.is_finite() {
            return Err(Error::NonFinite { context: "in the MGD gradient", iteration: k });
        }
        if gnorm < config.grad_tol {
            converged = true;
            break;
        }
        let mut halvings = 0;
        let (next, next_bq, next_f) = loop {
            let candidate = q
                .step(&grad, step)
                .ok_or(Error::NonFinite { context: "in the MGD retraction", iteration: k })?;
            let cbq = apply_columns(&op, &candidate);
            let cf = objective(&candidate, &cbq);
            if cf + 1e-12 * f.abs().max(1.0) >= f || halvings >= config.max_halvings {
                break (candidate, cbq, cf);
            }
            step *= 0.5;
            halvings += 1;
        };
        q = next;
        bq = next_bq;
        f = next_f;
        iterations = k;
        objective_trace.push(f);
        if let Some(t) = truth {
            trace.push(factor_distance(&q.columns(), t)?);
        }
    }

    Ok(MgdOutcome {
        labels: round_factor(&q)?,
        iterations,
        converged,
        step_size: step,
        objective: objective_trace,
        trace,
        wall_time_ns: start.elapsed().as_nanos(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::is_exact;
    use crate::sbm::{generate, generate_raw, SbmParams};

    fn dense_b(graph: &SbmGraph) -> Vec<Vec<f64>> {
        let n = graph.n();
        let rho = graph.nnz() as f64 / (n * n) as f64;
        let mut b = vec![vec![-rho; n]; n];
        for i in 0..n {
            for &j in graph.row(i) {
                b[i][j as usize] += 1.0;
            }
        }
        b
    }

    fn dense_objective(b: &[Vec<f64>], q: &ObliquePoint) -> f64 {
        let n = q.n();
        let mut f = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (qi, qj) = (q.row(i), q.row(j));
                f += b[i][j] * (qi[0] * qj[0] + qi[1] * qj[1]);
            }
        }
        f
    }

    /// Central differences of the objective along the retracted curve
    /// `retract(Q + h t_i e_i)` with `t_i` the unit tangent of row `i`.
    fn fd_directional(b: &[Vec<f64>], q: &ObliquePoint, i: usize, h: f64) -> f64 {
        let [q0, q1] = q.row(i);
        let n = q.n();
        let mut dir = [vec![0.0; n], vec![0.0; n]];
        dir[0][i] = -q1;
        dir[1][i] = q0;
        let plus = q.step(&dir, h).unwrap();
        let minus = q.step(&dir, -h).unwrap();
        (dense_objective(b, &plus) - dense_objective(b, &minus)) / (2.0 * h)
    }

    #[test]
    fn gradient_vanishes_at_aligned_rows_on_block_graph() {
        let (g, _) = generate_raw(8, 1.0, 0.0, 3).unwrap();
        let op = RegularizedOperator::new(&g);
        let q = ObliquePoint::from_columns(vec![1.0; 8], vec![0.0; 8]).unwrap();
        let bq = apply_columns(&op, &q);
        let grad = riemannian_gradient(&q, &bq);
        let b = dense_b(&g);
        for i in 0..8 {
            assert_eq!(grad[1][i], 0.0);
            let fd = fd_directional(&b, &q, i, 1e-5);
            let analytic = -grad[0][i] * q.row(i)[1] + grad[1][i] * q.row(i)[0];
            assert!((fd - analytic).abs() < 1e-5, "row {i}: fd {fd} vs {analytic}");
        }
    }

    #[test]
    fn riemannian_gradient_matches_finite_differences() {
        let (g, _) = generate(&SbmParams::new(40, 8.0, 2.0, 9).unwrap());
        let op = RegularizedOperator::new(&g);
        let b = dense_b(&g);
        let q = ObliquePoint::random(40, &mut stream_rng(4, 4));
        let bq = apply_columns(&op, &q);
        let grad = riemannian_gradient(&q, &bq);
        for i in 0..40 {
            let [q0, q1] = q.row(i);
            let analytic = -grad[0][i] * q1 + grad[1][i] * q0;
            let fd = fd_directional(&b, &q, i, 1e-5);
            assert!((fd - analytic).abs() < 1e-5, "row {i}: fd {fd} vs {analytic}");
            // Tangency.
            assert!((grad[0][i] * q0 + grad[1][i] * q1).abs() < 1e-10);
        }
        assert!((objective(&q, &bq) - dense_objective(&b, &q)).abs() < 1e-9);
    }

    #[test]
    fn oblique_point_validation() {
        assert!(ObliquePoint::from_columns(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(ObliquePoint::from_columns(vec![1.0], vec![0.0, 0.0]).is_err());
        let p = ObliquePoint::from_columns(vec![3.0, 0.0], vec![4.0, -2.0]).unwrap();
        assert_eq!(p.row(0), [0.6, 0.8]);
        assert_eq!(p.row(1), [0.0, -1.0]);
    }

    #[test]
    fn rounding_uses_dominant_direction() {
        // Rows spread along the direction (1, 1)/sqrt(2) with signs.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = ObliquePoint::from_columns(vec![s, -s, s, -s], vec![s, -s, s, -s]).unwrap();
        let x = round_factor(&q).unwrap();
        assert!(x.as_slice() == [1, -1, 1, -1] || x.as_slice() == [-1, 1, -1, 1]);
    }

    #[test]
    fn mgd_keeps_rows_on_the_manifold_and_ascends() {
        let (g, truth) = generate(&SbmParams::new(300, 20.0, 2.0, 2).unwrap());
        let out = mgd_recover(&g, &MgdConfig { max_iters: 300, ..Default::default() }, 5, Some(&truth)).unwrap();
        assert!(out.objective.windows(2).all(|w| w[1] + 1e-9 * w[0].abs() >= w[0]));
        assert_eq!(out.trace.len(), out.iterations + 1);
        assert!(is_exact(&out.labels, &truth).unwrap());
    }

    #[test]
    fn mgd_rejects_bad_step() {
        let (g, _) = generate_raw(4, 1.0, 0.0, 0).unwrap();
        assert!(mgd_recover(&g, &MgdConfig { step_size: Some(-1.0), ..Default::default() }, 0, None).is_err());
    }

    #[test]
    fn mgd_on_empty_graph_stops_immediately() {
        let g = SbmGraph::from_edges(10, &[]).unwrap();
        let out = mgd_recover(&g, &MgdConfig::default(), 0, None).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn sc_recovers_well_separated_instance() {
        for matrix in [ScMatrix::Regularized, ScMatrix::Adjacency] {
            let (g, truth) = generate_raw(100, 1.0, 0.1, 8).unwrap();
            let out = spectral_clustering(&g, &ScConfig { matrix, ..Default::default() }, 3).unwrap();
            assert!(is_exact(&out.labels, &truth).unwrap(), "{matrix:?}");
        }
    }

    #[test]
    fn sc_variants_agree_well_above_threshold() {
        let (g, truth) = generate(&SbmParams::new(400, 25.0, 2.0, 12).unwrap());
        for matrix in [ScMatrix::Regularized, ScMatrix::Adjacency] {
            let out = spectral_clustering(&g, &ScConfig { matrix, ..Default::default() }, 3).unwrap();
            assert!(crate::metrics::misclassification(&out.labels, &truth).unwrap() <= 2, "{matrix:?}");
        }
    }
}
