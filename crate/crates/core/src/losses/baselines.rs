//! Cross-entropy, multiclass hinge and the top-k baselines L1–L5 and TCE.

use super::{check_inputs, log_sum_exp, softmax, LossFamily, LossSpec, LossValueGrad};
use crate::error::{Error, Result};
use crate::ranking::{top_m_indices, top_m_indices_excluding};

pub fn baseline_loss(spec: &LossSpec, scores: &[f64], y: usize) -> Result<LossValueGrad> {
    check_inputs(spec, scores, y)?;
    let c = scores.len();
    let k = spec.cutoff;
    let sy = scores[y];
    let mut grad = vec![0.0; c];
    let value = match spec.family {
        LossFamily::Ce => {
            let p = softmax(scores);
            grad.copy_from_slice(&p);
            grad[y] -= 1.0;
            log_sum_exp(scores) - sy
        }
        LossFamily::MultiHinge => {
            let j = top_m_indices_excluding(scores, y, 1)[0];
            hinge_pair(1.0 + scores[j] - sy, j, y, 1.0, &mut grad)
        }
        LossFamily::L1 => {
            // (s_\y)_[k]
            let j = top_m_indices_excluding(scores, y, k)[k - 1];
            hinge_pair(1.0 + scores[j] - sy, j, y, 1.0, &mut grad)
        }
        LossFamily::L2 => {
            let a = plus_one_except(scores, y);
            let top = top_m_indices(&a, k)?;
            let mean = top.iter().map(|&j| a[j]).sum::<f64>() / k as f64;
            let margin = mean - sy;
            if margin > 0.0 {
                top.iter().for_each(|&j| grad[j] += 1.0 / k as f64);
                grad[y] -= 1.0;
                margin
            } else {
                0.0
            }
        }
        LossFamily::L3 => {
            let a = plus_one_except(scores, y);
            let top = top_m_indices(&a, k)?;
            let w = 1.0 / k as f64;
            top.iter()
                .map(|&j| hinge_pair(a[j] - sy, j, y, w, &mut grad))
                .sum::<f64>()
                * w
        }
        LossFamily::L4 => {
            let top = top_m_indices_excluding(scores, y, k);
            let mean = top.iter().map(|&j| 1.0 + scores[j]).sum::<f64>() / k as f64;
            let margin = mean - sy;
            if margin > 0.0 {
                top.iter().for_each(|&j| grad[j] += 1.0 / k as f64);
                grad[y] -= 1.0;
                margin
            } else {
                0.0
            }
        }
        LossFamily::L5 => {
            // s_[k+1]; when that position is y itself the loss is the constant 1
            let j = top_m_indices(scores, k + 1)?[k];
            hinge_pair(1.0 + scores[j] - sy, j, y, 1.0, &mut grad)
        }
        LossFamily::Tce => {
            let top = top_m_indices(scores, k)?;
            let t: Vec<f64> = top.iter().map(|&j| scores[j] - sy).collect();
            // ln(1 + sum exp(t)) = m + ln(exp(-m) + sum exp(t - m))
            let m = t.iter().copied().fold(0.0, f64::max);
            let z = (-m).exp() + t.iter().map(|&v| (v - m).exp()).sum::<f64>();
            for (&j, &tj) in top.iter().zip(&t) {
                let p = (tj - m).exp() / z;
                grad[j] += p;
                grad[y] -= p;
            }
            m + z.ln()
        }
        LossFamily::Autkc(_) => {
            return Err(Error::InvalidLoss {
                spec: spec.to_string(),
                reason: "AUTKC families are evaluated by autkc_loss".into(),
            })
        }
    };
    Ok(LossValueGrad { value, grad })
}

/// `s + 1̄_y`: every entry but `y` shifted up by one.
fn plus_one_except(scores: &[f64], y: usize) -> Vec<f64> {
    scores
        .iter()
        .enumerate()
        .map(|(j, &s)| if j == y { s } else { s + 1.0 })
        .collect()
}

/// `weight * [margin]_+` where `margin` increases with `s_j` and decreases
/// with `s_y`; accumulates the subgradient (zero at the kink).
fn hinge_pair(margin: f64, j: usize, y: usize, weight: f64, grad: &mut [f64]) -> f64 {
    if margin > 0.0 && j != y {
        grad[j] += weight;
        grad[y] -= weight;
    }
    margin.max(0.0)
}
