use super::{check_inputs, softmax, softmax_backward, LossFamily, LossSpec, LossValueGrad, Surrogate};
use crate::error::{Error, Result};
use crate::ranking::top_m_indices;

/// `L_K(u, y) = (1/K) * sum_{k=1}^{K+1} ℓ(u_y - u_[k])` and its gradient in `u`.
///
/// The `K + 1` selected positions include `y` itself whenever it ranks that
/// high; that self-term contributes `ℓ(0)` to the value and nothing to the
/// gradient.
pub fn autkc_value_grad(surrogate: Surrogate, big_k: usize, u: &[f64], y: usize) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; u.len()];
    let value = autkc_accumulate(surrogate, big_k, u, y, 1.0, &mut grad);
    (value, grad)
}

/// Adds `weight * ∇L_K(u, y)` into `grad` and returns `weight * L_K(u, y)`.
pub(crate) fn autkc_accumulate(
    surrogate: Surrogate,
    big_k: usize,
    u: &[f64],
    y: usize,
    weight: f64,
    grad: &mut [f64],
) -> f64 {
    let top = top_m_indices(u, big_k + 1).expect("K validated by caller");
    let scale = weight / big_k as f64;
    let mut value = 0.0;
    for j in top {
        let (l, dl) = surrogate.eval(u[y] - u[j]);
        value += l;
        if j != y {
            grad[y] += scale * dl;
            grad[j] -= scale * dl;
        }
    }
    value * scale
}

pub fn autkc_loss(spec: &LossSpec, scores: &[f64], y: usize) -> Result<LossValueGrad> {
    let LossFamily::Autkc(surrogate) = spec.family else {
        return Err(Error::InvalidLoss {
            spec: spec.to_string(),
            reason: "not an AUTKC family".into(),
        });
    };
    check_inputs(spec, scores, y)?;
    if spec.normalize {
        let u = softmax(scores);
        let (value, grad_u) = autkc_value_grad(surrogate, spec.cutoff, &u, y);
        Ok(LossValueGrad {
            value,
            grad: softmax_backward(&u, &grad_u),
        })
    } else {
        let (value, grad) = autkc_value_grad(surrogate, spec.cutoff, scores, y);
        Ok(LossValueGrad { value, grad })
    }
}
