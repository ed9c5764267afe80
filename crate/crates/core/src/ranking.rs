//! Score vectors, conditional distributions and worst-case-tie ranking.
//!
//! Every rank in this crate is computed by exact comparison on raw `f64`
//! values. A tie involving the ground-truth label is always broken against
//! it, so `worst_case_rank` counts every other class whose score is `>=`.

use std::cmp::Ordering;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Class scores produced by a model for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewClasses(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ScoreVector> for Vec<f64> {
    fn from(s: ScoreVector) -> Self {
        s.0
    }
}

/// A point on the probability simplex with strictly distinct entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CondDist(Vec<f64>);

impl CondDist {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::TooFewClasses(probs.len()));
        }
        if let Some(i) = probs
            .iter()
            .position(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} = {} is outside [0, 1]",
                probs[i]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, not 1"
            )));
        }
        if min_pairwise_gap(&probs) <= 0.0 {
            return Err(Error::InvalidDistribution(
                "entries must be strictly distinct".into(),
            ));
        }
        Ok(Self(probs))
    }

    /// Normalizes positive weights onto the simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Classes ordered by decreasing probability.
    pub fn descending_order(&self) -> Vec<usize> {
        top_m_indices(&self.0, self.0.len()).expect("length checked at construction")
    }

    /// The k-th largest probability, 1-based.
    pub fn kth(&self, k: usize) -> f64 {
        kth_largest(&self.0, k).expect("k in range")
    }
}

impl Deref for CondDist {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for CondDist {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CondDist> for Vec<f64> {
    fn from(d: CondDist) -> Self {
        d.0
    }
}

/// Smallest absolute difference between any two entries (`inf` for < 2 entries).
pub fn min_pairwise_gap(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn check_label(scores: &[f64], y: usize) -> Result<()> {
    if y >= scores.len() {
        Err(Error::LabelOutOfRange {
            label: y,
            classes: scores.len(),
        })
    } else {
        Ok(())
    }
}

fn descending(a: &f64, b: &f64) -> Ordering {
    b.total_cmp(a)
}

/// Rank of `y` when every tie is broken against it: `|{j : s_j >= s_y}|`.
pub fn worst_case_rank(scores: &[f64], y: usize) -> Result<usize> {
    check_label(scores, y)?;
    let sy = scores[y];
    Ok(scores.iter().filter(|&&s| s >= sy).count())
}

/// `s_[k]`: the k-th greatest entry with duplicates retained (1-based).
pub fn kth_largest(scores: &[f64], k: usize) -> Result<f64> {
    check_range("k", k, 1, scores.len())?;
    let mut buf = scores.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, descending);
    Ok(*v)
}

/// `(s_\y)_[k]`: the k-th greatest entry among classes other than `y`.
pub fn kth_largest_excluding(scores: &[f64], y: usize, k: usize) -> Result<f64> {
    check_label(scores, y)?;
    check_range("k", k, 1, scores.len().saturating_sub(1))?;
    let mut buf: Vec<f64> = scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != y)
        .map(|(_, &s)| s)
        .collect();
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, descending);
    Ok(*v)
}

/// Indices of the `m` greatest entries in rank order; ties go to the lower index.
pub fn top_m_indices(scores: &[f64], m: usize) -> Result<Vec<usize>> {
    check_range("m", m, 1, scores.len())?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let cmp = |a: &usize, b: &usize| descending(&scores[*a], &scores[*b]).then(a.cmp(b));
    if m < idx.len() {
        idx.select_nth_unstable_by(m - 1, cmp);
        idx.truncate(m);
    }
    idx.sort_unstable_by(cmp);
    Ok(idx)
}

/// Same as [`top_m_indices`] restricted to classes other than `exclude`.
pub(crate) fn top_m_indices_excluding(scores: &[f64], exclude: usize, m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&j| j != exclude).collect();
    let cmp = |a: &usize, b: &usize| descending(&scores[*a], &scores[*b]).then(a.cmp(b));
    if m < idx.len() {
        idx.select_nth_unstable_by(m - 1, cmp);
        idx.truncate(m);
    }
    idx.sort_unstable_by(cmp);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use proptest::prelude::*;

    /// Enumerates every total order consistent with the scores and returns the
    /// worst position `y` can land in.
    fn rank_by_tie_enumeration(s: &[f64], y: usize) -> usize {
        (0..s.len())
            .permutations(s.len())
            .filter(|p| p.windows(2).all(|w| s[w[0]] >= s[w[1]]))
            .map(|p| p.iter().position(|&c| c == y).unwrap() + 1)
            .max()
            .unwrap()
    }

    fn sorted_desc(s: &[f64]) -> Vec<f64> {
        let mut v = s.to_vec();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }

    #[test]
    fn rank_examples() {
        assert_eq!(worst_case_rank(&[3., 1., 2.], 0).unwrap(), 1);
        assert_eq!(rank_by_tie_enumeration(&[2., 2., 2.], 1), 3);
        assert_eq!(worst_case_rank(&[2., 2., 2.], 1).unwrap(), 3);
        // Lake, Sky, Cloud, Beach, Valley: Beach outranks Lake.
        assert_eq!(worst_case_rank(&[4., 3., 2., 5., 1.], 0).unwrap(), 2);
        assert!(worst_case_rank(&[1., 2.], 2).is_err());
    }

    #[test]
    fn kth_examples() {
        assert_eq!(kth_largest(&[1., 3., 3., 0.], 2).unwrap(), 3.);
        assert_eq!(kth_largest(&[1., 3., 3., 0.], 4).unwrap(), 0.);
        assert_eq!(kth_largest(&[5., 4., 3., 2., 1.], 3).unwrap(), sorted_desc(&[5., 4., 3., 2., 1.])[2]);
        assert!(kth_largest(&[1., 2.], 0).is_err());
        assert!(kth_largest(&[1., 2.], 3).is_err());

        assert_eq!(kth_largest_excluding(&[9., 1., 2.], 0, 1).unwrap(), 2.);
        assert_eq!(kth_largest_excluding(&[9., 1., 2.], 1, 2).unwrap(), 2.);
        assert_eq!(kth_largest_excluding(&[2., 2., 1.], 0, 1).unwrap(), 2.);
        assert!(kth_largest_excluding(&[9., 1., 2.], 0, 3).is_err());
    }

    #[test]
    fn top_m_examples() {
        assert_eq!(top_m_indices(&[1., 5., 5., 0.], 2).unwrap(), vec![1, 2]);
        assert_eq!(top_m_indices(&[3., 2., 1.], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(top_m_indices(&[0.2, 0.9, 0.4, 0.9], 3).unwrap(), vec![1, 3, 2]);
        assert!(top_m_indices(&[1., 2.], 3).is_err());
    }

    #[test]
    fn score_vector_validation() {
        assert!(ScoreVector::new(vec![1.0]).is_err());
        assert!(ScoreVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ScoreVector::new(vec![1.0, 2.0]).is_ok());
        let parsed: std::result::Result<ScoreVector, _> = serde_json::from_str("[1.0]");
        assert!(parsed.is_err());
    }

    #[test]
    fn cond_dist_validation() {
        assert!(CondDist::new(vec![0.5, 0.3, 0.2]).is_ok());
        assert!(CondDist::new(vec![0.5, 0.25, 0.25]).is_err());
        assert!(CondDist::new(vec![0.5, 0.3, 0.1]).is_err());
        assert!(CondDist::new(vec![1.2, -0.2]).is_err());
        let d = CondDist::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(d.descending_order(), vec![1, 2, 0]);
        assert_eq!(d.kth(2), 0.3);
    }

    fn tied_scores() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (2usize..7)
            .prop_flat_map(|c| (prop::collection::vec(0i32..4, c), 0..c))
            .prop_map(|(v, y)| (v.into_iter().map(f64::from).collect(), y))
    }

    proptest! {
        #[test]
        fn rank_counting_forms_agree((s, y) in tied_scores()) {
            let sy = s[y];
            let greater = s.iter().filter(|&&v| v > sy).count();
            let tied_others = s.iter().enumerate().filter(|&(j, &v)| j != y && v == sy).count();
            prop_assert_eq!(worst_case_rank(&s, y).unwrap(), 1 + greater + tied_others);
            prop_assert_eq!(worst_case_rank(&s, y).unwrap(), rank_by_tie_enumeration(&s, y));
        }

        #[test]
        fn kth_at_rank_recovers_own_score((s, y) in tied_scores()) {
            let r = worst_case_rank(&s, y).unwrap();
            prop_assert_eq!(kth_largest(&s, r).unwrap(), s[y]);
        }

        #[test]
        fn excluding_matches_dropped_vector((s, y) in tied_scores(), k in 1usize..6) {
            prop_assume!(k < s.len());
            let mut dropped = s.clone();
            dropped.remove(y);
            prop_assert_eq!(kth_largest_excluding(&s, y, k).unwrap(), sorted_desc(&dropped)[k - 1]);
        }

        #[test]
        fn distinct_scores_rank_like_sort(v in prop::collection::vec(-1e3f64..1e3, 2..20)) {
            prop_assume!(min_pairwise_gap(&v) > 0.0);
            let order = top_m_indices(&v, v.len()).unwrap();
            for (pos, &c) in order.iter().enumerate() {
                prop_assert_eq!(worst_case_rank(&v, c).unwrap(), pos + 1);
            }
        }
    }
}
