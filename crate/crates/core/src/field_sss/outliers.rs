//! Redundancy-based detection of corrupted shares.
//!
//! With more than `degree + 1` shares the honest polynomial is over-determined.
//! Every `(degree + 1)`-subset is interpolated and scored by how many of the
//! given shares lie on it; the best-supported candidate wins. This is the
//! brute-force cousin of Berlekamp-Welch and is fine for a handful of workers.

use std::collections::BTreeSet;

use super::field::FieldElement;
use super::sharing::{check_share_set, lagrange_at, Share};
use super::SharingError;

/// Consensus secret plus the shares that disagree with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutlierReport {
    pub consensus: FieldElement,
    /// Evaluation points (as residues) of the shares on the consensus polynomial.
    pub support: BTreeSet<u64>,
    /// Evaluation points of the shares off the consensus polynomial.
    pub outliers: BTreeSet<u64>,
}

/// Finds the degree-`degree` polynomial agreeing with the most shares.
///
/// Needs at least `degree + 2` shares. A winner supported by only
/// `degree + 1` shares is indistinguishable from any other interpolant and
/// yields [`SharingError::Ambiguous`]. Equal support is resolved towards the
/// lexicographically smallest set of agreeing evaluation points.
pub fn detect_outliers(shares: &[Share], degree: usize) -> Result<OutlierReport, SharingError> {
    if shares.len() < degree + 2 {
        return Err(SharingError::CannotDetect {
            shares: shares.len(),
            needed: degree + 2,
        });
    }
    check_share_set(shares, degree)?;

    let mut ordered = shares.to_vec();
    ordered.sort_by_key(|s| s.eval_point().value());
    let points: Vec<_> = ordered.iter().map(|s| (s.eval_point(), s.value())).collect();
    let zero = ordered[0].field().zero();

    let mut best: Option<(Vec<u64>, FieldElement)> = None;
    for subset in Combinations::new(points.len(), degree + 1) {
        let basis: Vec<_> = subset.iter().map(|&i| points[i]).collect();
        let agreeing: Vec<u64> = points
            .iter()
            .filter(|&&(x, y)| lagrange_at(&basis, x) == y)
            .map(|(x, _)| x.value())
            .collect();
        let better = match &best {
            None => true,
            Some((current, _)) => {
                agreeing.len() > current.len()
                    || (agreeing.len() == current.len() && agreeing < *current)
            }
        };
        if better {
            let secret = lagrange_at(&basis, zero);
            best = Some((agreeing, secret));
        }
    }

    let (support, consensus) = best.expect("at least one subset exists");
    if support.len() <= degree + 1 {
        return Err(SharingError::Ambiguous {
            support: support.len(),
            needed: degree + 2,
        });
    }
    let support: BTreeSet<u64> = support.into_iter().collect();
    let outliers = points
        .iter()
        .map(|(x, _)| x.value())
        .filter(|x| !support.contains(x))
        .collect();
    Ok(OutlierReport {
        consensus,
        support,
        outliers,
    })
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    indices: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            indices: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let current = self.indices.clone();
        let k = self.indices.len();
        match (0..k).rev().find(|&i| self.indices[i] != i + self.n - k) {
            Some(i) => {
                self.indices[i] += 1;
                for j in i + 1..k {
                    self.indices[j] = self.indices[j - 1] + 1;
                }
            }
            None => self.done = true,
        }
        Some(current)
    }
}
