//! Top-k error, AUTKC and the dataset-level ↑ metrics.
//!
//! Dataset aggregates are computed from integer hit counts and divided once at
//! the end, so they are bit-stable regardless of evaluation order and the
//! identity `autkc_up(K) == mean(topk_up(1..=K))` holds exactly when both are
//! taken from the same [`TopKCurve`].

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{check_range, Error, Result};
use crate::ranking::{check_label, worst_case_rank};

/// Top-k error: 1 iff the worst-case rank of `y` exceeds `k`.
pub fn err_k(scores: &[f64], y: usize, k: usize) -> Result<u8> {
    check_range("k", k, 1, scores.len())?;
    Ok(u8::from(worst_case_rank(scores, y)? > k))
}

/// AUTKC error for one instance: `min(rank - 1, K) / K`.
pub fn aerr_k(scores: &[f64], y: usize, big_k: usize) -> Result<f64> {
    check_range("K", big_k, 1, scores.len().saturating_sub(1))?;
    let r = worst_case_rank(scores, y)?;
    Ok((r - 1).min(big_k) as f64 / big_k as f64)
}

/// The reformulated 0-1 objective, evaluated through order statistics:
/// `(1/K) * (-1 + sum_{k=1}^{K+1} [s_y <= s_[k]])`.
///
/// Mathematically identical to [`aerr_k`] for every input including ties; it
/// takes a different computational route (sorted values, not a rank count).
pub fn op1_loss_01(scores: &[f64], y: usize, big_k: usize) -> Result<f64> {
    check_label(scores, y)?;
    check_range("K", big_k, 1, scores.len().saturating_sub(1))?;
    if let Some(i) = scores.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite(i));
    }
    let sy = scores[y];
    // sorted[k - 1] is s_[k]
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let hits = sorted[..=big_k].iter().filter(|&&v| sy <= v).count();
    Ok((hits - 1) as f64 / big_k as f64)
}

/// A batch of score vectors with ground-truth labels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    classes: usize,
    scores: Vec<f64>,
    labels: Vec<usize>,
}

impl ScoredSet {
    pub fn new(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::TooFewClasses(classes));
        }
        Ok(Self {
            classes,
            scores: Vec::new(),
            labels: Vec::new(),
        })
    }

    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: AsRef<[f64]>,
    {
        let mut rows = rows.into_iter().peekable();
        let classes = rows
            .peek()
            .map(|(s, _)| s.as_ref().len())
            .ok_or(Error::EmptyDataset)?;
        let mut set = Self::new(classes)?;
        for (s, y) in rows {
            set.push(s.as_ref(), y)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, scores: &[f64], y: usize) -> Result<()> {
        if scores.len() != self.classes {
            return Err(Error::ClassMismatch {
                expected: self.classes,
                got: scores.len(),
            });
        }
        if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        check_label(scores, y)?;
        self.scores.extend_from_slice(scores);
        self.labels.push(y);
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> (&[f64], usize) {
        let c = self.classes;
        (&self.scores[i * c..(i + 1) * c], self.labels[i])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.scores
            .chunks_exact(self.classes)
            .zip(self.labels.iter().copied())
    }

    /// Worst-case rank of the label in every row.
    pub fn ranks(&self) -> Vec<usize> {
        self.scores
            .par_chunks_exact(self.classes)
            .zip(self.labels.par_iter())
            .map(|(s, &y)| {
                let sy = s[y];
                s.iter().filter(|&&v| v >= sy).count()
            })
            .collect()
    }

    fn non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyDataset)
        } else {
            Ok(())
        }
    }
}

/// AUTKC↑: `(1/nK) * sum_i |{k <= K+1 : s_y > s_[k]}|`.
pub fn autkc_up(set: &ScoredSet, big_k: usize) -> Result<f64> {
    set.non_empty()?;
    check_range("K", big_k, 1, set.classes() - 1)?;
    // Positions k <= K+1 strictly below s_y are exactly those after rank r.
    let hits: u64 = set
        .ranks()
        .into_iter()
        .map(|r| (big_k + 1).saturating_sub(r) as u64)
        .sum();
    Ok(hits as f64 / (set.len() * big_k) as f64)
}

/// Mean AUTKC error over the set; `autkc_up + mean_aerr == 1`.
pub fn mean_aerr(set: &ScoredSet, big_k: usize) -> Result<f64> {
    set.non_empty()?;
    check_range("K", big_k, 1, set.classes() - 1)?;
    let misses: u64 = set
        .rows()
        .map(|(s, y)| {
            let r = worst_case_rank(s, y).expect("label validated on push");
            (r - 1).min(big_k) as u64
        })
        .sum();
    Ok(misses as f64 / (set.len() * big_k) as f64)
}

/// TOP-k↑: fraction of rows whose label has worst-case rank at most `k`.
pub fn topk_up(set: &ScoredSet, k: usize) -> Result<f64> {
    set.non_empty()?;
    check_range("k", k, 1, set.classes())?;
    let hits = set.ranks().into_iter().filter(|&r| r <= k).count();
    Ok(hits as f64 / set.len() as f64)
}

/// The top-k accuracy curve for `k = 1..=k_max`, kept as integer hit counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopKCurve {
    hits: Vec<u64>,
    n: u64,
}

impl TopKCurve {
    pub fn k_max(&self) -> usize {
        self.hits.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn hits(&self) -> &[u64] {
        &self.hits
    }

    /// `acc[k-1]` is TOP-k↑.
    pub fn acc(&self) -> Vec<f64> {
        self.hits
            .iter()
            .map(|&h| h as f64 / self.n as f64)
            .collect()
    }

    /// AUTKC↑ as the average of the first `K` curve points.
    pub fn autkc_up(&self, big_k: usize) -> Result<f64> {
        check_range("K", big_k, 1, self.k_max())?;
        let total: u64 = self.hits[..big_k].iter().sum();
        Ok(total as f64 / (self.n as usize * big_k) as f64)
    }
}

impl Serialize for TopKCurve {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.acc().serialize(serializer)
    }
}

pub fn topk_curve(set: &ScoredSet, k_max: usize) -> Result<TopKCurve> {
    set.non_empty()?;
    check_range("k_max", k_max, 1, set.classes())?;
    let mut per_rank = vec![0u64; k_max];
    for r in set.ranks() {
        if r <= k_max {
            per_rank[r - 1] += 1;
        }
    }
    let hits = per_rank
        .iter()
        .scan(0u64, |acc, &c| {
            *acc += c;
            Some(*acc)
        })
        .collect();
    Ok(TopKCurve {
        hits,
        n: set.len() as u64,
    })
}

/// Serialized metric report: `{"K", "autkc_up", "topk_curve", "n"}`.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    #[serde(rename = "K")]
    pub big_k: usize,
    pub autkc_up: f64,
    pub topk_curve: Vec<f64>,
    pub n: usize,
}

impl MetricReport {
    pub fn compute(set: &ScoredSet, big_k: usize, k_max: usize) -> Result<Self> {
        let curve = topk_curve(set, k_max)?;
        Ok(Self {
            big_k,
            autkc_up: autkc_up(set, big_k)?,
            topk_curve: curve.acc(),
            n: set.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedGains {
    pub gains: BTreeMap<String, Vec<f64>>,
    /// Set when `G+` or `G-` is zero; `gains` then holds raw differences.
    pub degenerate: bool,
}

/// Top-k accuracy gain of each method over `baseline`, with positive gains
/// divided by `G+ = |max gain|` and the rest by `G- = |min gain|`, both taken
/// jointly over all methods and cutoffs.
pub fn normalized_gain(
    curves: &BTreeMap<String, Vec<f64>>,
    baseline: &str,
) -> Result<NormalizedGains> {
    let base = curves
        .get(baseline)
        .ok_or_else(|| Error::InvalidArgument(format!("baseline method {baseline:?} missing")))?;
    let mut raw = BTreeMap::new();
    for (name, curve) in curves {
        if curve.len() != base.len() {
            return Err(Error::InvalidArgument(format!(
                "curve {name:?} has {} points, baseline has {}",
                curve.len(),
                base.len()
            )));
        }
        let gain: Vec<f64> = curve.iter().zip(base).map(|(a, b)| a - b).collect();
        raw.insert(name.clone(), gain);
    }
    let all = || raw.values().flatten().copied();
    let g_plus = all().fold(f64::NEG_INFINITY, f64::max).abs();
    let g_minus = all().fold(f64::INFINITY, f64::min).abs();
    if g_plus == 0.0 || g_minus == 0.0 {
        log::warn!("normalized gain degenerate (G+ = {g_plus}, G- = {g_minus}); returning raw gains");
        return Ok(NormalizedGains {
            gains: raw,
            degenerate: true,
        });
    }
    let gains = raw
        .into_iter()
        .map(|(name, g)| {
            let norm = g
                .into_iter()
                .map(|v| if v > 0.0 { v / g_plus } else { v / g_minus })
                .collect();
            (name, norm)
        })
        .collect();
    Ok(NormalizedGains {
        gains,
        degenerate: false,
    })
}

/// Pair counts comparing AUTKC accuracy `f` against top-k accuracy `g` over
/// ordered pairs of ground-truth ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonCounts {
    /// `f(a) > f(b)` and `g(a) > g(b)`
    #[serde(rename = "R")]
    pub r: u64,
    /// `f(a) > f(b)` and `g(a) < g(b)`
    #[serde(rename = "S")]
    pub s: u64,
    /// `f(a) > f(b)` and `g(a) == g(b)`
    #[serde(rename = "P")]
    pub p: u64,
    /// `g(a) > g(b)` and `f(a) == f(b)`
    #[serde(rename = "Q")]
    pub q: u64,
}

/// A ratio that may legitimately be infinite; serialized as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degree {
    Finite(f64),
    Infinite,
}

impl Serialize for Degree {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Degree::Finite(v) => serializer.serialize_f64(*v),
            Degree::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl ComparisonCounts {
    pub fn degree_of_consistency(&self) -> Option<f64> {
        let denom = self.r + self.s;
        (denom > 0).then(|| self.r as f64 / denom as f64)
    }

    pub fn degree_of_discriminancy(&self) -> Degree {
        if self.q == 0 {
            Degree::Infinite
        } else {
            Degree::Finite(self.p as f64 / self.q as f64)
        }
    }

    /// Closed forms for `1 <= k < K <= C`.
    pub fn closed_form(classes: usize, k: usize, big_k: usize) -> Result<Self> {
        check_comparison_args(classes, k, big_k)?;
        let (c, k, bk) = (classes as u64, k as u64, big_k as u64);
        Ok(Self {
            r: k * (c - k),
            s: 0,
            p: k * (k - 1) / 2 + (2 * c - k - bk - 1) * (bk - k) / 2,
            q: 0,
        })
    }
}

fn check_comparison_args(classes: usize, k: usize, big_k: usize) -> Result<()> {
    if !(1 <= k && k < big_k && big_k <= classes) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k < K <= C, got C={classes}, k={k}, K={big_k}"
        )));
    }
    Ok(())
}

/// Exhaustively tallies [`ComparisonCounts`] over all ordered pairs of
/// distinct ground-truth ranks in `1..=C`.
pub fn enumerate_comparison(classes: usize, k: usize, big_k: usize) -> Result<ComparisonCounts> {
    check_comparison_args(classes, k, big_k)?;
    // K * AUTKC accuracy at rank r, kept integral for exact comparison.
    let f = |r: usize| (big_k + 1).saturating_sub(r);
    let g = |r: usize| usize::from(r <= k);
    let mut counts = ComparisonCounts {
        r: 0,
        s: 0,
        p: 0,
        q: 0,
    };
    for a in 1..=classes {
        for b in (1..=classes).filter(|&b| b != a) {
            let (fa, fb, ga, gb) = (f(a), f(b), g(a), g(b));
            if fa > fb {
                match ga.cmp(&gb) {
                    std::cmp::Ordering::Greater => counts.r += 1,
                    std::cmp::Ordering::Less => counts.s += 1,
                    std::cmp::Ordering::Equal => counts.p += 1,
                }
            }
            if ga > gb && fa == fb {
                counts.q += 1;
            }
        }
    }
    Ok(counts)
}
