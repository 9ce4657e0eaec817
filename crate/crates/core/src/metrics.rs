//! Success scoring and distances to the planted partition. All of them are
//! invariant under a global flip of either argument.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gpm::LabelVector;
use crate::sbm::GroundTruth;

fn overlap(x: &[i8], truth: &[i8]) -> i64 {
    x.iter().zip(truth).map(|(&a, &b)| (a * b) as i64).sum()
}

/// `x = x*` or `x = -x*`.
pub fn is_exact(x: &LabelVector, truth: &GroundTruth) -> Result<bool> {
    check_len(truth.len(), x.len())?;
    Ok(overlap(x.as_slice(), truth.as_slice()).unsigned_abs() as usize == truth.len())
}

/// Number of misplaced nodes after the better of the two global flips.
pub fn misclassification(x: &LabelVector, truth: &GroundTruth) -> Result<usize> {
    check_len(truth.len(), x.len())?;
    let disagree = x.as_slice().iter().zip(truth.as_slice()).filter(|(a, b)| a != b).count();
    Ok(disagree.min(x.len() - disagree))
}

/// `||x x^T - x* x*^T||_F = sqrt(2 n^2 - 2 (x^T x*)^2)` for `±1` vectors.
pub fn rank_one_distance(x: &LabelVector, truth: &GroundTruth) -> Result<f64> {
    check_len(truth.len(), x.len())?;
    let n = x.len() as f64;
    let o = overlap(x.as_slice(), truth.as_slice()) as f64;
    Ok((2.0 * n * n - 2.0 * o * o).max(0.0).sqrt())
}

/// `||Q Q^T - x* x*^T||_F` for `Q` given by its columns, using
/// `||Q^T Q||_F^2 - 2 ||Q^T x*||^2 + n^2` so no `n x n` object is formed.
pub fn factor_distance(columns: &[&[f64]], truth: &GroundTruth) -> Result<f64> {
    let n = truth.len();
    for c in columns {
        check_len(n, c.len())?;
    }
    let t = truth.to_f64();
    let mut gram_sq = 0.0;
    for a in columns {
        for b in columns {
            let g: f64 = a.iter().zip(*b).map(|(x, y)| x * y).sum();
            gram_sq += g * g;
        }
    }
    let proj_sq: f64 = columns
        .iter()
        .map(|c| {
            let p: f64 = c.iter().zip(&t).map(|(x, y)| x * y).sum();
            p * p
        })
        .sum();
    let nf = n as f64;
    Ok((gram_sq - 2.0 * proj_sq + nf * nf).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TwoStage,
    Sc,
    Mgd,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::TwoStage, Method::Sc, Method::Mgd];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TwoStage => "two_stage",
            Method::Sc => "sc",
            Method::Mgd => "mgd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_stage" | "two-stage" | "gpm" => Ok(Method::TwoStage),
            "sc" => Ok(Method::Sc),
            "mgd" => Ok(Method::Mgd),
            other => Err(Error::InvalidParams(format!("unknown method {other:?} (expected two_stage, sc or mgd)"))),
        }
    }
}

/// Outcome of one method on one Monte-Carlo instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    pub exact: bool,
    pub misclassified: usize,
    pub pm_iters: usize,
    pub gpm_iters: usize,
    pub wall_time_ns: u128,
    pub nnz: usize,
}

impl TrialRecord {
    pub const SCHEMA_COMMENT: &'static str = "# sbm-recover trial records, schema v1";
    pub const CSV_HEADER: &'static str = "alpha,beta,n,seed,method,exact,misclassified,pm_iters,gpm_iters,wall_time_ns,nnz";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.alpha,
            self.beta,
            self.n,
            self.seed,
            self.method,
            self.exact,
            self.misclassified,
            self.pm_iters,
            self.gpm_iters,
            self.wall_time_ns,
            self.nnz
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth4() -> GroundTruth {
        GroundTruth::new(vec![1, -1, 1, -1]).unwrap()
    }

    #[test]
    fn exactness_up_to_flip() {
        let t = truth4();
        let x = LabelVector::from(&t);
        assert!(is_exact(&x, &t).unwrap());
        assert!(is_exact(&x.negated(), &t).unwrap());
        assert!(!is_exact(&x.with_flip(2), &t).unwrap());
        assert!(is_exact(&LabelVector::new(vec![1, 1]).unwrap(), &t).is_err());
    }

    #[test]
    fn misclassification_counts() {
        let t = truth4();
        let x = LabelVector::from(&t);
        assert_eq!(misclassification(&x.negated(), &t).unwrap(), 0);
        let labels: Vec<i8> = (0..100).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let t = GroundTruth::new(labels).unwrap();
        let x = LabelVector::from(&t).with_flip(3).with_flip(10).with_flip(99);
        assert_eq!(misclassification(&x, &t).unwrap(), 3);
        assert_eq!(misclassification(&x.negated(), &t).unwrap(), 3);
    }

    #[test]
    fn one_flip_distance_at_n4() {
        let t = truth4();
        let x = LabelVector::from(&t).with_flip(0);
        // Dense check: x x^T - x* x*^T is nonzero exactly in row/column 0
        // off the diagonal, each entry of magnitude 2: 6 entries * 4 = 24.
        assert_eq!(rank_one_distance(&x, &t).unwrap(), 24f64.sqrt());
        assert_eq!(rank_one_distance(&LabelVector::from(&t).negated(), &t).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_labels_hit_the_maximum() {
        let t = truth4();
        let x = LabelVector::new(vec![1, 1, -1, -1]).unwrap();
        assert_eq!(rank_one_distance(&x, &t).unwrap(), (2.0f64 * 16.0).sqrt());
    }

    #[test]
    fn factor_distance_of_labels_matches_rank_one() {
        let t = truth4();
        let x = LabelVector::from(&t).with_flip(1);
        let zeros = vec![0.0; 4];
        let a = factor_distance(&[&x.to_f64(), &zeros], &t).unwrap();
        let b = rank_one_distance(&x, &t).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn method_parsing() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("sdp".parse::<Method>().is_err());
    }

    #[test]
    fn record_row_matches_header_arity() {
        let r = TrialRecord {
            alpha: 20.0,
            beta: 2.0,
            n: 300,
            seed: 9,
            method: Method::TwoStage,
            exact: true,
            misclassified: 0,
            pm_iters: 10,
            gpm_iters: 3,
            wall_time_ns: 12345,
            nnz: 4000,
        };
        let row = r.to_csv_row();
        assert_eq!(row, "20,2,300,9,two_stage,true,0,10,3,12345,4000");
        assert_eq!(row.split(',').count(), TrialRecord::CSV_HEADER.split(',').count());
    }
}
