//! Richardson-Romberg level weights.
//!
//! For a bias expansion in powers of `n^-α`, the estimator
//! `Σ_r w_r θ^{rn}` cancels the first `R - 1` bias terms when the weights
//! solve the scalar Vandermonde system
//!
//! ```text
//! Σ_r w_r              = 1
//! Σ_r w_r / r^{α p}    = 0,   p = 1..R-1
//! ```
//!
//! The closed form is
//!
//! ```text
//! w_r = (-1)^{R-r} r^{αR} / ( Π_{j=0}^{r-1} (r^α - j^α) · Π_{j=r+1}^{R} (j^α - r^α) )
//! ```
//!
//! and the surviving `n^{-αR}` term is scaled by the damped weight
//! `(-1)^{R-1} / (R!)^α`.
//!
//! Every factor of the two products is positive. Their log-magnitudes are
//! summed first; when both products fit comfortably in an `f64` they are
//! formed directly, otherwise the weight is `sign · exp(Σ log factor)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest supported number of levels.
pub const MAX_LEVELS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtrapolationWeights {
    levels: usize,
    weak_order: f64,
    weights: Vec<f64>,
    damped: f64,
}

impl ExtrapolationWeights {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn weak_order(&self) -> f64 {
        self.weak_order
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coefficient of the leading bias term left after extrapolation.
    pub fn damped(&self) -> f64 {
        self.damped
    }

    /// `Σ_r w_r values[r]`.
    ///
    /// Panics if `values.len()` differs from the number of levels.
    pub fn combine(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.levels, "one value per level");
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

fn check_inputs(levels: usize, weak_order: f64) -> Result<()> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(Error::invalid(
            "levels",
            format!("must be in 1..={MAX_LEVELS}, got {levels}"),
        ));
    }
    if !weak_order.is_finite() || weak_order <= 0.0 {
        return Err(Error::invalid(
            "weak_order",
            format!("must be finite and positive, got {weak_order}"),
        ));
    }
    Ok(())
}

/// Above this log-magnitude the products are not formed directly.
const SAFE_LN_MAGNITUDE: f64 = 600.0;

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// Closed-form Richardson-Romberg weights for `levels` schemes with steps
/// `T/n, T/(2n), ..., T/(Rn)` and weak-error exponent `weak_order`.
pub fn compute_weights(levels: usize, weak_order: f64) -> Result<ExtrapolationWeights> {
    check_inputs(levels, weak_order)?;
    let alpha = weak_order;
    let big_r = levels;

    let weights = (1..=big_r)
        .map(|r| {
            let r_pow = (r as f64).powf(alpha);
            let factors = (0..r)
                .map(|j| r_pow - (j as f64).powf(alpha))
                .chain(((r + 1)..=big_r).map(|j| (j as f64).powf(alpha) - r_pow));
            let ln_num = alpha * big_r as f64 * (r as f64).ln();
            let ln_den: f64 = factors.clone().map(f64::ln).sum();
            let sign = if (big_r - r).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            if ln_num.max(ln_den) < SAFE_LN_MAGNITUDE {
                // both products representable: one rounding per factor, and
                // exact for integer factors (α = 1)
                sign * (r as f64).powf(alpha * big_r as f64) / factors.product::<f64>()
            } else {
                sign * (ln_num - ln_den).exp()
            }
        })
        .collect();

    let damped_sign = if (big_r - 1).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let ln_fact = ln_factorial(big_r);
    let damped = if alpha * ln_fact < SAFE_LN_MAGNITUDE {
        let fact: f64 = (2..=big_r).map(|j| j as f64).product();
        damped_sign / fact.powf(alpha)
    } else {
        damped_sign * (-alpha * ln_fact).exp()
    };

    Ok(ExtrapolationWeights {
        levels,
        weak_order,
        weights,
        damped,
    })
}

/// Max-norm of `Ṽ w - E₁`, where `Ṽ[p][r] = 1 / r^{pα}` for `p = 0..R-1`.
pub fn vandermonde_residual(weights: &ExtrapolationWeights) -> f64 {
    let alpha = weights.weak_order;
    (0..weights.levels)
        .map(|p| {
            let row: f64 = weights
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| w / ((i + 1) as f64).powf(alpha * p as f64))
                .sum();
            let target = if p == 0 { 1.0 } else { 0.0 };
            (row - target).abs()
        })
        .fold(0.0, f64::max)
}

/// `Σ_r w_r²`: the factor multiplying `E|H(θ*, U)|²` in the asymptotic
/// variance when each level is driven by its own Brownian motion.
pub fn independent_variance_multiplier(levels: usize, weak_order: f64) -> Result<f64> {
    let w = compute_weights(levels, weak_order)?;
    Ok(w.weights.iter().map(|x| x * x).sum())
}
