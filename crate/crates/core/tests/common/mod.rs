//! Dense brute-force references built with nalgebra, independent of the
//! sparse code paths under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use sbm_recover::sbm::SbmGraph;

pub fn dense_adjacency(g: &SbmGraph) -> DMatrix<f64> {
    let n = g.n();
    DMatrix::from_fn(n, n, |i, j| if g.has_edge(i, j) { 1.0 } else { 0.0 })
}

/// `A - (1^T A 1 / n^2) 1 1^T`.
pub fn dense_b(g: &SbmGraph) -> DMatrix<f64> {
    let a = dense_adjacency(g);
    let n = g.n() as f64;
    let rho = a.sum() / (n * n);
    a.map(|v| v - rho)
}

/// `sign(B x)` for `x in {±1}^n`, evaluated in integers as
/// `sign(n^2 (A x)_i - (1^T A 1)(1^T x))`.
pub fn exact_sign_step(g: &SbmGraph, x: &[i8]) -> Vec<i8> {
    let n = g.n();
    let mut total = 0i64;
    for i in 0..n {
        for j in 0..n {
            total += g.has_edge(i, j) as i64;
        }
    }
    let s: i64 = x.iter().map(|&v| v as i64).sum();
    (0..n)
        .map(|i| {
            let ax: i64 = (0..n).filter(|&j| g.has_edge(i, j)).map(|j| x[j] as i64).sum();
            if (n * n) as i64 * ax - total * s >= 0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

pub fn sign(v: &DVector<f64>) -> Vec<i8> {
    v.iter().map(|&t| if t >= 0.0 { 1 } else { -1 }).collect()
}

pub fn to_dvec(x: &[i8]) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().map(|&v| v as f64))
}

/// `||x x^T - t t^T||_F` by forming both outer products.
pub fn dense_rank_one_distance(x: &[i8], t: &[i8]) -> f64 {
    let x = to_dvec(x);
    let t = to_dvec(t);
    (&x * x.transpose() - &t * t.transpose()).norm()
}

/// Dominant eigenpair (largest algebraic eigenvalue) of a symmetric matrix.
pub fn top_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let second = order.get(1).map(|&i| eig.eigenvalues[i]).unwrap_or(f64::NEG_INFINITY);
    (eig.eigenvalues[top], eig.eigenvectors.column(top).into_owned(), second)
}

pub struct DenseTrajectory {
    pub pm_vector: DVector<f64>,
    pub gpm: Vec<Vec<i8>>,
    pub converged: bool,
    pub cycled: bool,
}

/// Fixed-length power method followed by the sign iteration, with the same
/// stopping rules (fixed point, 2-cycle, cap) as the recovery pipeline.
pub fn dense_two_stage(g: &SbmGraph, y0: &[f64], pm_iters: usize, gpm_max: usize) -> DenseTrajectory {
    let b = dense_b(g);
    let n = g.n();
    let mut y = DVector::from_column_slice(y0);
    for _ in 0..pm_iters {
        let by = &b * &y;
        y = &by / by.norm();
    }
    let x0 = &y * ((n as f64).sqrt() / y.norm());
    let mut xs = vec![sign(&(&b * &x0))];
    if x0.iter().zip(&xs[0]).all(|(&a, &s)| a == s as f64) {
        return DenseTrajectory { pm_vector: y, gpm: xs, converged: true, cycled: false };
    }
    for k in 2..=gpm_max {
        let next = exact_sign_step(g, xs.last().unwrap());
        let fixed = &next == xs.last().unwrap();
        let cycled = k >= 3 && next == xs[xs.len() - 2];
        xs.push(next);
        if fixed || cycled {
            return DenseTrajectory { pm_vector: y, gpm: xs, converged: fixed, cycled: !fixed };
        }
    }
    DenseTrajectory { pm_vector: y, gpm: xs, converged: false, cycled: false }
}

pub fn relative_error(a: &[f64], b: &DVector<f64>) -> f64 {
    let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.norm().max(f64::MIN_POSITIVE)
}
