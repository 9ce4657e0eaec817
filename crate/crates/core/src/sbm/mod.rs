//! Binary symmetric stochastic block model.
//!
//! Two communities of size `n/2`; each unordered pair `{i, j}` with `i <= j`
//! carries an edge with probability `p` inside a community and `q` across.
//! With rate constants `alpha`, `beta` the probabilities are
//! `p = alpha ln(n) / n` and `q = beta ln(n) / n` (natural log).

pub mod io;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Rate constants a graph was generated from, when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub alpha: f64,
    pub beta: f64,
}

/// Generator parameters. Construct through [`SbmParams::new`] or
/// [`SbmParams::from_probabilities`]; both validate.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmParams {
    n: usize,
    p: f64,
    q: f64,
    rates: Option<Rates>,
    pub seed: u64,
    pub include_diagonal: bool,
}

impl SbmParams {
    pub fn new(n: usize, alpha: f64, beta: f64, seed: u64) -> Result<Self> {
        check_n(n)?;
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be a finite nonnegative number, got {v}")));
            }
        }
        let scale = (n as f64).ln() / n as f64;
        let (p, q) = (alpha * scale, beta * scale);
        if p > 1.0 {
            return Err(Error::InvalidParams(format!(
                "p = alpha*ln(n)/n = {p} exceeds 1 (alpha = {alpha}, n = {n})"
            )));
        }
        if q > 1.0 {
            return Err(Error::InvalidParams(format!(
                "q = beta*ln(n)/n = {q} exceeds 1 (beta = {beta}, n = {n})"
            )));
        }
        Ok(Self { n, p, q, rates: Some(Rates { alpha, beta }), seed, include_diagonal: true })
    }

    /// Edge probabilities given directly. `p < q` is allowed.
    pub fn from_probabilities(n: usize, p: f64, q: f64, seed: u64) -> Result<Self> {
        check_n(n)?;
        for (name, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        let ln_n = (n as f64).ln();
        let rates = (ln_n > 0.0).then(|| Rates { alpha: p * n as f64 / ln_n, beta: q * n as f64 / ln_n });
        Ok(Self { n, p, q, rates, seed, include_diagonal: true })
    }

    pub fn with_diagonal(mut self, include_diagonal: bool) -> Self {
        self.include_diagonal = include_diagonal;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn rates(&self) -> Option<Rates> {
        self.rates
    }

    /// Expected number of stored entries of `A` (both triangles plus diagonal).
    pub fn expected_nnz(&self) -> f64 {
        let n = self.n as f64;
        let half = n / 2.0;
        let off = 2.0 * (self.p * half * (half - 1.0) + self.q * half * half);
        if self.include_diagonal {
            off + n * self.p
        } else {
            off
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!("n must be even and at least 2, got {n}")));
    }
    if n > u32::MAX as usize {
        return Err(Error::InvalidParams(format!("n = {n} exceeds the u32 index range")));
    }
    Ok(())
}

/// Balanced `±1` community assignment `x*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    labels: Vec<i8>,
}

impl GroundTruth {
    pub fn new(labels: Vec<i8>) -> Result<Self> {
        if labels.iter().any(|&l| l != 1 && l != -1) {
            return Err(Error::InvalidParams("ground truth entries must be +1 or -1".into()));
        }
        let sum: i64 = labels.iter().map(|&l| l as i64).sum();
        if sum != 0 {
            return Err(Error::InvalidParams(format!("ground truth is unbalanced (sum = {sum})")));
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.labels
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| l as f64).collect()
    }
}

/// Symmetric 0/1 adjacency matrix in CSR form. Values are implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmGraph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    rates: Option<Rates>,
}

impl SbmGraph {
    /// Builds a graph from raw CSR arrays, checking every structural invariant.
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, col_idx: Vec<u32>) -> Result<Self> {
        let g = Self { n, row_ptr, col_idx, rates: None };
        g.validate()?;
        Ok(g)
    }

    /// Symmetrizes and deduplicates an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(Error::InvalidParams(format!("n = {n} exceeds the u32 index range")));
        }
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParams(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            rows[i].push(j as u32);
            if i != j {
                rows[j].push(i as u32);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        Ok(Self { n, row_ptr, col_idx, rates: None })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Format(msg));
        if self.row_ptr.len() != self.n + 1 {
            return bad(format!("row_ptr has length {}, expected {}", self.row_ptr.len(), self.n + 1));
        }
        if self.row_ptr[0] != 0 || self.row_ptr[self.n] != self.col_idx.len() {
            return bad("row_ptr does not span col_idx".into());
        }
        for i in 0..self.n {
            if self.row_ptr[i] > self.row_ptr[i + 1] {
                return bad(format!("row_ptr decreases at row {i}"));
            }
            let row = self.row(i);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("column indices of row {i} are not strictly increasing"));
            }
            if let Some(&j) = row.last() {
                if j as usize >= self.n {
                    return bad(format!("column index {j} in row {i} out of range"));
                }
            }
        }
        for i in 0..self.n {
            for &j in self.row(i) {
                if !self.has_edge(j as usize, i) {
                    return bad(format!("entry ({i}, {j}) has no mirror ({j}, {i})"));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries, counting `(i, j)` and `(j, i)` separately.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&(j as u32)).is_ok()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    /// Rate constants of the generating model, if the graph came from [`generate`].
    pub fn rates(&self) -> Option<Rates> {
        self.rates
    }

    pub fn with_rates(mut self, rates: Option<Rates>) -> Self {
        self.rates = rates;
        self
    }
}

pub fn nnz(graph: &SbmGraph) -> usize {
    graph.nnz()
}

/// Samples the graph and the planted partition.
///
/// Stream 0 of the seed drives the label permutation; stream `i + 1` drives
/// row `i`, whose upper-triangle entries are drawn by geometric skipping over
/// the same-community and cross-community candidates in turn.
pub fn generate(params: &SbmParams) -> (SbmGraph, GroundTruth) {
    let n = params.n;
    let mut labels: Vec<i8> = (0..n).map(|i| if i < n / 2 { 1 } else { -1 }).collect();
    labels.shuffle(&mut stream_rng(params.seed, 0));

    let mut plus = Vec::with_capacity(n / 2);
    let mut minus = Vec::with_capacity(n / 2);
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            plus.push(i as u32);
        } else {
            minus.push(i as u32);
        }
    }

    // Upper triangle (j >= i), row by row.
    let mut upper_ptr = Vec::with_capacity(n + 1);
    let mut upper: Vec<u32> = Vec::new();
    let mut degree = vec![0usize; n];
    let mut same_hits = Vec::new();
    let mut cross_hits = Vec::new();
    upper_ptr.push(0);
    for i in 0..n {
        let (same, cross) = if labels[i] > 0 { (&plus, &minus) } else { (&minus, &plus) };
        let first_same = same.partition_point(|&j| (j as usize) < i + usize::from(!params.include_diagonal));
        let first_cross = cross.partition_point(|&j| (j as usize) < i);
        let same = &same[first_same..];
        let cross = &cross[first_cross..];

        let mut rng = stream_rng(params.seed, i as u64 + 1);
        same_hits.clear();
        cross_hits.clear();
        bernoulli_positions(same.len(), params.p, &mut rng, &mut same_hits);
        bernoulli_positions(cross.len(), params.q, &mut rng, &mut cross_hits);

        let start = upper.len();
        merge_sorted(
            same_hits.iter().map(|&k| same[k]),
            cross_hits.iter().map(|&k| cross[k]),
            &mut upper,
        );
        for &j in &upper[start..] {
            degree[i] += 1;
            if j as usize != i {
                degree[j as usize] += 1;
            }
        }
        upper_ptr.push(upper.len());
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    for d in &degree {
        row_ptr.push(row_ptr.last().unwrap() + d);
    }
    let mut cursor = row_ptr[..n].to_vec();
    let mut col_idx = vec![0u32; row_ptr[n]];
    // Row j receives its lower entries (from rows i < j) before its own upper
    // entries, so every row ends up strictly increasing.
    for i in 0..n {
        for &j in &upper[upper_ptr[i]..upper_ptr[i + 1]] {
            col_idx[cursor[i]] = j;
            cursor[i] += 1;
            let j = j as usize;
            if j != i {
                col_idx[cursor[j]] = i as u32;
                cursor[j] += 1;
            }
        }
    }

    let graph = SbmGraph { n, row_ptr, col_idx, rates: params.rates };
    (graph, GroundTruth { labels })
}

/// Direct-rate constructor with the diagonal included.
pub fn generate_raw(n: usize, p: f64, q: f64, seed: u64) -> Result<(SbmGraph, GroundTruth)> {
    let params = SbmParams::from_probabilities(n, p, q, seed)?;
    Ok(generate(&params))
}

/// Appends to `out` the indices in `0..len` that succeed in `len` independent
/// Bernoulli(`p`) trials, skipping the failures geometrically.
pub(crate) fn bernoulli_positions<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R, out: &mut Vec<usize>) {
    if len == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        out.extend(0..len);
        return;
    }
    let log_fail = (-p).ln_1p();
    let mut pos = 0usize;
    while pos < len {
        let u = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_fail).floor();
        if skip >= (len - pos) as f64 {
            break;
        }
        pos += skip as usize;
        out.push(pos);
        pos += 1;
    }
}

fn merge_sorted(a: impl Iterator<Item = u32>, b: impl Iterator<Item = u32>, out: &mut Vec<u32>) {
    let mut a = a.peekable();
    let mut b = b.peekable();
    loop {
        let next = match (a.peek(), b.peek()) {
            (Some(&x), Some(&y)) => {
                if x < y {
                    a.next()
                } else {
                    b.next()
                }
            }
            (Some(_), None) => a.next(),
            (None, Some(_)) => b.next(),
            (None, None) => break,
        };
        out.push(next.unwrap());
    }
}
