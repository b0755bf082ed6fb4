//! Gain sequence `γ(p) = γ₀ / p^β` for the Robbins-Monro recursion.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub gamma0: f64,
    pub beta: f64,
    /// Estimate of the lower bound on the eigenvalues of the symmetrized
    /// Jacobian of the mean field. Usually unknown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleWarning {
    /// `β = 1` but `2 λ̲ γ₀ ≤ 1`: the `1/√γ(M)` rate of the statistical error
    /// is lost.
    GainTooSmall { product: f64 },
    /// `β < 1` converges but with a worse asymptotic complexity than `β = 1`.
    SuboptimalExponent { beta: f64 },
    /// No `λ̲` estimate was given, so `2 λ̲ γ₀ > 1` could not be checked.
    LambdaUnknown,
}

impl fmt::Display for ScheduleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleWarning::GainTooSmall { product } => {
                write!(f, "2λ̲γ₀ ≤ 1 (2λ̲γ₀ = {product}); increase gamma0")
            }
            ScheduleWarning::SuboptimalExponent { beta } => {
                write!(
                    f,
                    "beta = {beta} < 1 gives suboptimal complexity; beta = 1 is optimal"
                )
            }
            ScheduleWarning::LambdaUnknown => {
                write!(f, "lambda_lower not provided; 2λ̲γ₀ > 1 not checked")
            }
        }
    }
}

impl StepSchedule {
    /// Builds a schedule, rejecting `γ₀ ≤ 0` and `β ∉ (1/2, 1]`.
    pub fn new(gamma0: f64, beta: f64, lambda_lower: Option<f64>) -> Result<Self> {
        let s = StepSchedule {
            gamma0,
            beta,
            lambda_lower,
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if !self.gamma0.is_finite() || self.gamma0 <= 0.0 {
            return Err(Error::invalid(
                "gamma0",
                format!("must be positive, got {}", self.gamma0),
            ));
        }
        if !(self.beta > 0.5 && self.beta <= 1.0) {
            return Err(Error::invalid(
                "beta",
                format!("must lie in (1/2, 1], got {}", self.beta),
            ));
        }
        if let Some(l) = self.lambda_lower {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::invalid(
                    "lambda_lower",
                    format!("must be positive, got {l}"),
                ));
            }
        }
        Ok(())
    }

    /// `γ₀ / p^β`. `p` starts at 1.
    pub fn gamma(&self, p: u64) -> Result<f64> {
        if p == 0 {
            return Err(Error::invalid("p", "step index starts at 1"));
        }
        Ok(self.gamma_unchecked(p))
    }

    #[inline]
    pub(crate) fn gamma_unchecked(&self, p: u64) -> f64 {
        if self.beta == 1.0 {
            self.gamma0 / p as f64
        } else {
            self.gamma0 / (p as f64).powf(self.beta)
        }
    }

    /// Hard errors for invalid parameters, soft warnings for admissible but
    /// poor choices.
    pub fn validate(&self) -> Result<Vec<ScheduleWarning>> {
        self.check()?;
        let mut warnings = Vec::new();
        if self.beta < 1.0 {
            warnings.push(ScheduleWarning::SuboptimalExponent { beta: self.beta });
        } else {
            match self.lambda_lower {
                Some(l) => {
                    let product = 2.0 * l * self.gamma0;
                    if product <= 1.0 {
                        warnings.push(ScheduleWarning::GainTooSmall { product });
                    }
                }
                None => warnings.push(ScheduleWarning::LambdaUnknown),
            }
        }
        Ok(warnings)
    }
}
