use serde::{Deserialize, Serialize};

/// Scalar surrogates `ℓ(t)` for the margin `t = s_y - s_[k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surrogate {
    /// `[1 - t]_+`
    Hinge,
    /// `(1 - t)^2`
    Square,
    /// `exp(-t)`
    Exp,
    /// `ln(1 + exp(-t))`
    Logit,
}

impl Surrogate {
    pub const ALL: [Surrogate; 4] = [
        Surrogate::Hinge,
        Surrogate::Square,
        Surrogate::Exp,
        Surrogate::Logit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Surrogate::Hinge => "hinge",
            Surrogate::Square => "square",
            Surrogate::Exp => "exp",
            Surrogate::Logit => "logit",
        }
    }

    /// `(ℓ(t), ℓ'(t))`. The hinge kink at `t = 1` takes subgradient 0.
    #[inline]
    pub fn eval(self, t: f64) -> (f64, f64) {
        match self {
            Surrogate::Hinge => {
                if t < 1.0 {
                    (1.0 - t, -1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Surrogate::Square => ((1.0 - t) * (1.0 - t), -2.0 * (1.0 - t)),
            Surrogate::Exp => {
                let e = (-t).exp();
                (e, -e)
            }
            Surrogate::Logit => {
                // ln(1 + e^{-t}) = softplus(-t); derivative -sigmoid(-t)
                let value = if t > 0.0 {
                    (-t).exp().ln_1p()
                } else {
                    -t + t.exp().ln_1p()
                };
                let sig = if t >= 0.0 {
                    let e = (-t).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + t.exp())
                };
                (value, -sig)
            }
        }
    }
}

pub fn scalar_surrogate(kind: Surrogate, t: f64) -> (f64, f64) {
    kind.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn examples() {
        assert_eq!(scalar_surrogate(Surrogate::Square, 1.0), (0.0, 0.0));
        assert_eq!(scalar_surrogate(Surrogate::Exp, 0.0), (1.0, -1.0));
        let (v, d) = scalar_surrogate(Surrogate::Logit, 0.0);
        assert_abs_diff_eq!(v, std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(d, -0.5, epsilon = 1e-15);
        assert_eq!(scalar_surrogate(Surrogate::Hinge, 1.0), (0.0, 0.0));
        assert_eq!(scalar_surrogate(Surrogate::Hinge, 0.5), (0.5, -1.0));
        assert_eq!(scalar_surrogate(Surrogate::Hinge, 2.0), (0.0, 0.0));
    }

    #[test]
    fn logit_matches_naive_formula_and_is_stable() {
        for t in [-5.0f64, -0.3, 0.0, 0.7, 4.0] {
            let (v, d) = Surrogate::Logit.eval(t);
            assert_abs_diff_eq!(v, (1.0 + (-t).exp()).ln(), epsilon = 1e-14);
            assert_abs_diff_eq!(d, -(-t).exp() / (1.0 + (-t).exp()), epsilon = 1e-14);
        }
        let (v, d) = Surrogate::Logit.eval(-800.0);
        assert_abs_diff_eq!(v, 800.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d, -1.0, epsilon = 1e-15);
        assert!(Surrogate::Logit.eval(800.0).0 >= 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for kind in Surrogate::ALL {
            for t in [-1.3, -0.2, 0.4, 0.9, 1.7] {
                let fd = (kind.eval(t + h).0 - kind.eval(t - h).0) / (2.0 * h);
                assert_abs_diff_eq!(kind.eval(t).1, fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn strictly_decreasing_where_it_matters() {
        for kind in [Surrogate::Square, Surrogate::Exp, Surrogate::Logit] {
            let mut prev = f64::INFINITY;
            for i in -10..=10 {
                let v = kind.eval(f64::from(i) / 10.0).0;
                assert!(v < prev, "{kind:?}");
                prev = v;
            }
        }
    }
}
