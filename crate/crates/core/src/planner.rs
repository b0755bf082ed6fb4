//! Asymptotically optimal simulation budgets for a target `L¹` accuracy `ε`.
//!
//! With `γ(p) = γ₀/p^β`, the RR estimator of order `R` balances the bias
//! `μ_R n^{-αR}` against the statistical error `ν_R √γ(M)`:
//!
//! ```text
//! n = ⌈ (2αR/β + 1)^{1/(αR)} μ_R^{1/(αR)} ε^{-1/(αR)} ⌉
//! M = ⌈ γ₀^{1/β} ν_R^{2/β} (1 + β/(2αR))^{2/β} ε^{-2/β} ⌉
//! ```
//!
//! and costs `K M n R(R+1)/2`. The crude estimator is the `R = 1` case.
//! The `o(1)` remainders of the bias and statistical-error bounds are
//! taken as zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural constants of the quantile benchmark feeding the planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConstants {
    pub weak_order: f64,
    pub beta: f64,
    pub gamma0: f64,
    pub lambda_lower: f64,
    /// `|C̃_R|`, the bias constant before division by `Dh(θ*)`.
    pub c_tilde: f64,
    /// `Dh(θ*) = p(θ*) / (1 - ℓ)`.
    pub dh: f64,
    pub level: f64,
    /// Cost of simulating one Euler step.
    pub cost_unit: f64,
}

impl PlannerConstants {
    /// The "blind" choice: `|C̃_R| = 1`, `λ̲ = Dh`, `γ₀ = 1/λ̲`, `α = β = 1`.
    pub fn blind(dh: f64, level: f64) -> Self {
        PlannerConstants {
            weak_order: 1.0,
            beta: 1.0,
            gamma0: 1.0 / dh,
            lambda_lower: dh,
            c_tilde: 1.0,
            dh,
            level,
            cost_unit: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("weak_order", self.weak_order),
            ("gamma0", self.gamma0),
            ("lambda_lower", self.lambda_lower),
            ("c_tilde", self.c_tilde),
            ("dh", self.dh),
            ("cost_unit", self.cost_unit),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.beta > 0.5 && self.beta <= 1.0) {
            return Err(Error::invalid(
                "beta",
                format!("must lie in (1/2, 1], got {}", self.beta),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid(
                "level",
                format!("must lie in (0, 1), got {}", self.level),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Bias constant `μ_R = |C_R| / (R!)^α`.
    pub mu: f64,
    /// Statistical-error constant `ν_R`.
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub n: u64,
    /// Number of SA iterations `M`.
    pub steps: u64,
    pub levels: usize,
    pub epsilon: f64,
    pub cost_unit: f64,
    pub predicted_cost: f64,
    /// `n` before the ceiling.
    pub n_exact: f64,
    /// `M` before the ceiling.
    pub steps_exact: f64,
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// `(μ_R, ν_R)` for shared coupling and `β = 1`:
///
/// ```text
/// μ_R = (|C̃_R| / Dh) / (R!)^α
/// ν_R = γ₀ / √(2λ̲γ₀ - 1) · √(ℓ / (1 - ℓ))
/// ```
pub fn derive_constants(pc: &PlannerConstants, levels: usize) -> Result<DerivedConstants> {
    pc.validate()?;
    if levels == 0 {
        return Err(Error::invalid("levels", "must be at least 1"));
    }
    if pc.beta != 1.0 {
        return Err(Error::invalid(
            "beta",
            "the gain constant C(γ, λ̲) is only explicit for beta = 1",
        ));
    }
    let product = 2.0 * pc.lambda_lower * pc.gamma0;
    if product <= 1.0 {
        return Err(Error::invalid(
            "gamma0",
            format!("2λ̲γ₀ = {product} ≤ 1, gain constant undefined"),
        ));
    }
    let c_r = pc.c_tilde / pc.dh;
    let mu = c_r * (-pc.weak_order * ln_factorial(levels)).exp();
    let gain = pc.gamma0 / (product - 1.0).sqrt();
    let nu = gain * (pc.level / (1.0 - pc.level)).sqrt();
    Ok(DerivedConstants { mu, nu })
}

/// `K M n R(R+1)/2`.
pub fn cost(plan: &BudgetPlan) -> f64 {
    let r = plan.levels as f64;
    plan.cost_unit * plan.steps as f64 * plan.n as f64 * r * (r + 1.0) / 2.0
}

/// Optimal `(n, M)` for the `R`-level RR estimator at accuracy `epsilon`.
pub fn plan_rr(pc: &PlannerConstants, levels: usize, epsilon: f64) -> Result<BudgetPlan> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    let DerivedConstants { mu, nu } = derive_constants(pc, levels)?;
    let a_r = pc.weak_order * levels as f64;
    let beta = pc.beta;

    let n_exact =
        (2.0 * a_r / beta + 1.0).powf(1.0 / a_r) * mu.powf(1.0 / a_r) * epsilon.powf(-1.0 / a_r);
    let steps_exact = pc.gamma0.powf(1.0 / beta)
        * nu.powf(2.0 / beta)
        * (1.0 + beta / (2.0 * a_r)).powf(2.0 / beta)
        * epsilon.powf(-2.0 / beta);

    let mut plan = BudgetPlan {
        n: (n_exact.ceil() as u64).max(1),
        steps: (steps_exact.ceil() as u64).max(1),
        levels,
        epsilon,
        cost_unit: pc.cost_unit,
        predicted_cost: 0.0,
        n_exact,
        steps_exact,
    };
    plan.predicted_cost = cost(&plan);
    Ok(plan)
}

/// Optimal `(n, M)` for the crude estimator; cost `K M n`.
pub fn plan_crude(pc: &PlannerConstants, epsilon: f64) -> Result<BudgetPlan> {
    plan_rr(pc, 1, epsilon)
}

/// Plans for the crude estimator and every `R` in `levels_list`, sorted by
/// predicted cost (ascending). `R = 1` is the crude plan and appears once.
pub fn compare_costs(
    pc: &PlannerConstants,
    epsilon: f64,
    levels_list: &[usize],
) -> Result<Vec<BudgetPlan>> {
    let mut levels: Vec<usize> = std::iter::once(1)
        .chain(levels_list.iter().copied())
        .collect();
    levels.sort_unstable();
    levels.dedup();
    let mut rows = levels
        .into_iter()
        .map(|r| plan_rr(pc, r, epsilon))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.predicted_cost.total_cmp(&b.predicted_cost));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_constants() -> PlannerConstants {
        PlannerConstants::blind(2.56e-2, 0.7)
    }

    #[test]
    fn derived_constants_match_hand_evaluation() {
        let pc = table_constants();
        let d2 = derive_constants(&pc, 2).unwrap();
        assert!((d2.mu - 19.53125).abs() < 1e-9);
        // 39.0625 · √(7/3)
        assert!((d2.nu - 39.0625 * (7.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert!((d2.nu - 59.67).abs() < 5e-3);
        let d1 = derive_constants(&pc, 1).unwrap();
        assert!((d1.mu - 39.0625).abs() < 1e-9);
    }

    #[test]
    fn nu_collapses_to_gamma0() {
        let mut pc = PlannerConstants::blind(0.1, 0.5);
        pc.gamma0 = 10.0;
        pc.lambda_lower = 0.1;
        let d = derive_constants(&pc, 3).unwrap();
        assert!((d.nu - 10.0).abs() < 1e-12);
    }

    #[test]
    fn derive_rejects_small_gain_and_beta() {
        let mut pc = table_constants();
        pc.gamma0 = 10.0;
        assert!(derive_constants(&pc, 2).is_err());
        let mut pc = table_constants();
        pc.beta = 0.8;
        assert!(derive_constants(&pc, 2).is_err());
        assert!(derive_constants(&table_constants(), 0).is_err());
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        assert!(plan_rr(&table_constants(), 2, 0.0).is_err());
        assert!(plan_rr(&table_constants(), 2, -0.1).is_err());
        assert!(plan_crude(&table_constants(), f64::NAN).is_err());
    }

    #[test]
    fn cost_arithmetic() {
        let plan = BudgetPlan {
            n: 14,
            steps: 869_000,
            levels: 2,
            epsilon: 0.5,
            cost_unit: 1.0,
            predicted_cost: 0.0,
            n_exact: 14.0,
            steps_exact: 869_000.0,
        };
        assert!((cost(&plan) / 3.65e7 - 1.0).abs() < 1e-3);
        let unit = BudgetPlan {
            n: 1,
            steps: 1,
            levels: 1,
            ..plan
        };
        assert_eq!(cost(&unit), 1.0);
    }

    #[test]
    fn single_level_is_crude() {
        let pc = table_constants();
        for eps in [0.5, 0.1, 0.01] {
            assert_eq!(plan_rr(&pc, 1, eps).unwrap(), plan_crude(&pc, eps).unwrap());
        }
        let rows = compare_costs(&pc, 0.25, &[1]).unwrap();
        assert_eq!(rows, vec![plan_crude(&pc, 0.25).unwrap()]);
    }

    #[test]
    fn compare_costs_sorted_and_crude_dominated() {
        let pc = table_constants();
        let rows = compare_costs(&pc, 0.0625, &[1, 2, 3]).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows
            .windows(2)
            .all(|w| w[0].predicted_cost <= w[1].predicted_cost));
        let crude = rows.iter().find(|p| p.levels == 1).unwrap();
        for p in rows.iter().filter(|p| p.levels > 1) {
            assert!(crude.predicted_cost > 10.0 * p.predicted_cost);
        }
    }
}
