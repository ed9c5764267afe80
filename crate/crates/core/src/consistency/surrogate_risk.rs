//! Conditional surrogate risk `R(s) = sum_y η_y L_K(s, y)` on raw scores in
//! the box `[0, 1]^C`, with a projected-gradient minimizer and a brute-force
//! grid oracle for small `C`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_range, Error, Result};
use crate::losses::Surrogate;
use crate::ranking::{top_m_indices, CondDist};
use crate::rng::{self, Stream};

fn risk_into(
    surrogate: Surrogate,
    eta: &[f64],
    big_k: usize,
    s: &[f64],
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let top = top_m_indices(s, big_k + 1).expect("K validated by caller");
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let inv_k = 1.0 / big_k as f64;
    let mut risk = 0.0;
    for (y, &p) in eta.iter().enumerate() {
        let mut value = 0.0;
        for &j in &top {
            let (l, dl) = surrogate.eval(s[y] - s[j]);
            value += l;
            if let Some(g) = grad.as_deref_mut() {
                if j != y {
                    let w = p * inv_k * dl;
                    g[y] += w;
                    g[j] -= w;
                }
            }
        }
        risk += p * value;
    }
    risk * inv_k
}

/// Value and (sub)gradient of the conditional surrogate risk at `s`.
pub fn surrogate_conditional_risk(
    surrogate: Surrogate,
    eta: &CondDist,
    big_k: usize,
    scores: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if scores.len() != eta.classes() {
        return Err(Error::ClassMismatch {
            expected: eta.classes(),
            got: scores.len(),
        });
    }
    check_range("K", big_k, 1, eta.classes() - 1)?;
    let mut grad = vec![0.0; scores.len()];
    let risk = risk_into(surrogate, eta, big_k, scores, Some(&mut grad));
    Ok((risk, grad))
}

#[derive(Debug, Clone, Serialize)]
pub struct PgdConfig {
    pub restarts: usize,
    pub steps: usize,
    pub step_size: f64,
    /// The step size is halved every this many steps.
    pub halve_every: usize,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            steps: 5000,
            step_size: 0.05,
            halve_every: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PgdResult {
    pub minimizer: Vec<f64>,
    pub risk: f64,
    /// Restart that produced the minimizer.
    pub restart: usize,
}

fn pgd_run(
    surrogate: Surrogate,
    eta: &[f64],
    big_k: usize,
    mut s: Vec<f64>,
    config: &PgdConfig,
) -> Option<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; s.len()];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut step = config.step_size;
    for t in 0..=config.steps {
        let risk = risk_into(surrogate, eta, big_k, &s, Some(&mut grad));
        if !risk.is_finite() {
            break;
        }
        if best.as_ref().map_or(true, |(b, _)| risk < *b) {
            best = Some((risk, s.clone()));
        }
        if t == config.steps {
            break;
        }
        if t > 0 && config.halve_every > 0 && t % config.halve_every == 0 {
            step *= 0.5;
        }
        for (v, g) in s.iter_mut().zip(&grad) {
            *v = (*v - step * g).clamp(0.0, 1.0);
        }
    }
    best
}

/// Projected gradient descent over `[0, 1]^C` with uniform random restarts.
/// Each restart keeps its best iterate; the lowest-risk restart wins, ties
/// going to the lower restart index.
pub fn minimize_surrogate_conditional_risk(
    surrogate: Surrogate,
    eta: &CondDist,
    big_k: usize,
    seed: u64,
    config: &PgdConfig,
) -> Result<PgdResult> {
    check_range("K", big_k, 1, eta.classes() - 1)?;
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("PGD needs at least one restart".into()));
    }
    let runs: Vec<Option<(f64, Vec<f64>)>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::child(seed, Stream::Restart, &[r as u64]);
            let init: Vec<f64> = (0..eta.classes()).map(|_| rng.random::<f64>()).collect();
            pgd_run(surrogate, eta, big_k, init, config)
        })
        .collect();
    let mut winner: Option<PgdResult> = None;
    for (restart, run) in runs.into_iter().enumerate() {
        if let Some((risk, minimizer)) = run {
            if winner.as_ref().map_or(true, |w| risk < w.risk) {
                winner = Some(PgdResult { minimizer, risk, restart });
            }
        }
    }
    winner.ok_or(Error::Diverged { epoch: 0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridResult {
    pub minimizer: Vec<f64>,
    pub risk: f64,
    pub points: u64,
}

/// Largest grid the oracle will evaluate.
const MAX_GRID_POINTS: u64 = 50_000_000;

/// Evaluates the risk at every point of `{0, h, 2h, ..., 1}^C` and returns
/// the first (lexicographic) point of lowest risk.
pub fn grid_search(
    surrogate: Surrogate,
    eta: &CondDist,
    big_k: usize,
    resolution: f64,
) -> Result<GridResult> {
    check_range("K", big_k, 1, eta.classes() - 1)?;
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid resolution {resolution} not in (0, 1]")));
    }
    let steps = (1.0 / resolution).round() as u64;
    let side = steps + 1;
    let c = eta.classes();
    let points = side
        .checked_pow(c as u32)
        .filter(|&p| p <= MAX_GRID_POINTS)
        .ok_or_else(|| Error::InvalidArgument(format!("grid of {side}^{c} points is too large")))?;
    let coord = |i: u64| i as f64 / steps as f64;
    let decode = |mut idx: u64, s: &mut [f64]| {
        for v in s.iter_mut().rev() {
            *v = coord(idx % side);
            idx /= side;
        }
    };
    let chunk = side.pow(c as u32 - 1);
    let (risk, idx) = (0..side)
        .into_par_iter()
        .map(|lead| {
            let mut s = vec![0.0; c];
            let mut best = (f64::INFINITY, u64::MAX);
            for idx in lead * chunk..(lead + 1) * chunk {
                decode(idx, &mut s);
                let r = risk_into(surrogate, eta, big_k, &s, None);
                if r < best.0 {
                    best = (r, idx);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let mut minimizer = vec![0.0; c];
    decode(idx, &mut minimizer);
    Ok(GridResult { minimizer, risk, points })
}
