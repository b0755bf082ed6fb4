//! SDE models, the quantile stochastic-approximation field and the analytic
//! oracles used by the geometric Brownian motion benchmark.

use std::f64::consts::{PI, SQRT_2};

use log::warn;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::innovation::{CoupledSampler, Coupling, RngStream};

/// A diffusion `dX = b(X) dt + σ(X) dW` on `ℝ^d` driven by a `d`-dimensional
/// Brownian motion, observed at a fixed horizon.
pub trait SdeModel: Send + Sync {
    fn dimension(&self) -> usize;

    fn initial_state(&self) -> &[f64];

    fn horizon(&self) -> f64;

    /// Zero-based index of the coordinate the SA field reads.
    fn monitored(&self) -> usize {
        0
    }

    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// `σ(x)` as a row-major `d × d` matrix.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);

    fn monitored_initial(&self) -> f64 {
        self.initial_state()[self.monitored()]
    }
}

/// Geometric Brownian motion `dX = r X dt + σ X dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gbm {
    x0: [f64; 1],
    pub rate: f64,
    pub sigma: f64,
    pub horizon: f64,
}

impl Gbm {
    pub fn new(x0: f64, rate: f64, sigma: f64, horizon: f64) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::invalid("x0", "must be finite"));
        }
        if !rate.is_finite() {
            return Err(Error::invalid("rate", "must be finite"));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::invalid("sigma", format!("must be ≥ 0, got {sigma}")));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::invalid(
                "horizon",
                format!("must be positive, got {horizon}"),
            ));
        }
        Ok(Gbm {
            x0: [x0],
            rate,
            sigma,
            horizon,
        })
    }

    pub fn x0(&self) -> f64 {
        self.x0[0]
    }

    /// Exact `ℓ`-quantile of `X_T`.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        gbm_quantile(self.x0(), self.rate, self.sigma, self.horizon, level)
    }

    /// Exact lognormal density of `X_T` at `y`.
    pub fn terminal_density(&self, y: f64) -> f64 {
        if y <= 0.0 || self.sigma == 0.0 {
            return 0.0;
        }
        let s = self.sigma * self.horizon.sqrt();
        let m = self.x0().ln() + (self.rate - 0.5 * self.sigma * self.sigma) * self.horizon;
        let z = (y.ln() - m) / s;
        (-0.5 * z * z).exp() / (y * s * (2.0 * PI).sqrt())
    }
}

impl SdeModel for Gbm {
    fn dimension(&self) -> usize {
        1
    }

    fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.rate * x[0];
    }

    #[inline]
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * x[0];
    }
}

/// One-dimensional model given by drift and diffusion closures.
pub struct ScalarSde<B, S> {
    x0: [f64; 1],
    horizon: f64,
    drift: B,
    diffusion: S,
}

impl<B, S> ScalarSde<B, S>
where
    B: Fn(f64) -> f64 + Send + Sync,
    S: Fn(f64) -> f64 + Send + Sync,
{
    pub fn new(x0: f64, horizon: f64, drift: B, diffusion: S) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        Ok(ScalarSde {
            x0: [x0],
            horizon,
            drift,
            diffusion,
        })
    }
}

impl<B, S> SdeModel for ScalarSde<B, S>
where
    B: Fn(f64) -> f64 + Send + Sync,
    S: Fn(f64) -> f64 + Send + Sync,
{
    fn dimension(&self) -> usize {
        1
    }

    fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = (self.drift)(x[0]);
    }

    #[inline]
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = (self.diffusion)(x[0]);
    }
}

/// Multi-dimensional model given by closures writing into output slices.
pub struct VectorSde<B, S> {
    x0: Vec<f64>,
    horizon: f64,
    monitored: usize,
    drift: B,
    diffusion: S,
}

impl<B, S> VectorSde<B, S>
where
    B: Fn(&[f64], &mut [f64]) + Send + Sync,
    S: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(
        x0: Vec<f64>,
        horizon: f64,
        monitored: usize,
        drift: B,
        diffusion: S,
    ) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::invalid("x0", "dimension must be at least 1"));
        }
        if monitored >= x0.len() {
            return Err(Error::invalid(
                "monitored",
                format!("index {monitored} out of range for dimension {}", x0.len()),
            ));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        Ok(VectorSde {
            x0,
            horizon,
            monitored,
            drift,
            diffusion,
        })
    }
}

impl<B, S> SdeModel for VectorSde<B, S>
where
    B: Fn(&[f64], &mut [f64]) + Send + Sync,
    S: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dimension(&self) -> usize {
        self.x0.len()
    }

    fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn monitored(&self) -> usize {
        self.monitored
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }
}

/// A mean field `h(θ) = E[H(θ, X)]` whose root the SA recursion targets.
/// `x` is the monitored coordinate of the simulated terminal state.
pub trait SaField: Send + Sync {
    fn value(&self, theta: f64, x: f64) -> f64;
}

impl<F> SaField for F
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    #[inline]
    fn value(&self, theta: f64, x: f64) -> f64 {
        self(theta, x)
    }
}

/// `H(θ, x) = 1 - 1{x ≥ θ} / (1 - ℓ)`, whose mean vanishes at the
/// `ℓ`-quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileField {
    level: f64,
    above: f64,
}

impl QuantileField {
    pub fn new(level: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::invalid(
                "level",
                format!("must lie in (0, 1), got {level}"),
            ));
        }
        Ok(QuantileField {
            level,
            above: 1.0 - 1.0 / (1.0 - level),
        })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// `E|H(θ*, X)|² = ℓ / (1 - ℓ)`.
    pub fn second_moment_at_root(&self) -> f64 {
        self.level / (1.0 - self.level)
    }
}

impl SaField for QuantileField {
    #[inline]
    fn value(&self, theta: f64, x: f64) -> f64 {
        if x >= theta {
            self.above
        } else {
            1.0
        }
    }
}

const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.38357751867269e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Inverse of the standard normal CDF on `(0, 1)`.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Halley refinement step against `erfc`, which brings the result to near
/// machine precision.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")));
    }
    const P_LOW: f64 = 0.02425;
    let (a, b, c, d) = (&ACKLAM_A, &ACKLAM_B, &ACKLAM_C, &ACKLAM_D);
    let tail = |q: f64| {
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };

    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Exact `ℓ`-quantile of a Black-Scholes terminal value:
/// `x₀ exp((r - σ²/2) T + σ √T Φ⁻¹(ℓ))`.
pub fn gbm_quantile(x0: f64, rate: f64, sigma: f64, horizon: f64, level: f64) -> Result<f64> {
    if !(x0 > 0.0) {
        return Err(Error::invalid("x0", format!("must be positive, got {x0}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be ≥ 0, got {sigma}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    let z = inverse_normal_cdf(level)
        .map_err(|_| Error::invalid("level", format!("must lie in (0, 1), got {level}")))?;
    Ok(x0 * ((rate - 0.5 * sigma * sigma) * horizon + sigma * horizon.sqrt() * z).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub value: f64,
    /// Binomial standard error of the central difference.
    pub std_error: f64,
}

/// Central finite-difference density of the Euler terminal (monitored
/// coordinate) at `theta`:
/// `(#{θ-ε < X ≤ θ+ε}) / (2 ε M)` over `samples` independent paths with
/// `n` Euler steps.
pub fn estimate_density<M: SdeModel>(
    model: &M,
    theta: f64,
    n: usize,
    samples: u64,
    eps_fd: f64,
    rng: &mut RngStream,
) -> Result<DensityEstimate> {
    if samples == 0 {
        return Err(Error::invalid("samples", "must be at least 1"));
    }
    if !(eps_fd > 0.0) || !eps_fd.is_finite() {
        return Err(Error::invalid("eps_fd", "must be positive"));
    }
    let mut sampler = CoupledSampler::new(n, 1, Coupling::Shared)?;
    let (lo, hi) = (theta - eps_fd, theta + eps_fd);
    let mut hits = 0u64;
    for _ in 0..samples {
        let x = sampler.sample(model, rng)?[0];
        if x > lo && x <= hi {
            hits += 1;
        }
    }
    let m = samples as f64;
    let q = hits as f64 / m;
    let value = q / (2.0 * eps_fd);
    let std_error = (q * (1.0 - q) / m).sqrt() / (2.0 * eps_fd);
    if hits == 0 {
        warn!("density estimate at θ = {theta} is zero ({samples} samples, ε = {eps_fd})");
    }
    Ok(DensityEstimate { value, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_takes_two_values() {
        let f = QuantileField::new(0.7).unwrap();
        assert_eq!(f.value(119.69, 100.0), 1.0);
        assert!((f.value(119.69, 150.0) + 7.0 / 3.0).abs() < 1e-14);
        // boundary belongs to the upper branch
        assert!((f.value(119.69, 119.69) + 7.0 / 3.0).abs() < 1e-14);
        assert!((f.second_moment_at_root() - 7.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn field_rejects_degenerate_levels() {
        assert!(QuantileField::new(0.0).is_err());
        assert!(QuantileField::new(1.0).is_err());
        assert!(QuantileField::new(f64::NAN).is_err());
    }

    #[test]
    fn second_moment_matches_two_point_law() {
        // P(X ≥ θ*) = 1 - ℓ, so E H² = ℓ + (1 - ℓ) (ℓ/(1-ℓ))²
        let l: f64 = 0.7;
        let f = QuantileField::new(l).unwrap();
        let h_above = f.value(0.0, 1.0);
        let direct = l * 1.0 + (1.0 - l) * h_above * h_above;
        assert!((direct - f.second_moment_at_root()).abs() < 1e-12);
        let mean = l * 1.0 + (1.0 - l) * h_above;
        assert!(mean.abs() < 1e-14);
    }

    #[test]
    fn inverse_cdf_against_statrs() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let x = inverse_normal_cdf(p).unwrap();
            assert!((x - n.inverse_cdf(p)).abs() < 1e-9, "p = {p}");
            assert!((normal_cdf(x) - p).abs() < 1e-14, "p = {p}");
        }
        for p in [1e-12, 1e-8, 1e-4, 1.0 - 1e-4, 1.0 - 1e-8] {
            let x = inverse_normal_cdf(p).unwrap();
            assert!(
                ((normal_cdf(x) - p) / p.min(1.0 - p)).abs() < 1e-7,
                "p = {p}"
            );
        }
        assert_eq!(inverse_normal_cdf(0.5).unwrap(), 0.0);
        assert!(inverse_normal_cdf(0.0).is_err());
        assert!(inverse_normal_cdf(1.0).is_err());
    }

    #[test]
    fn quantile_values() {
        let q = gbm_quantile(100.0, 0.05, 0.4, 1.0, 0.7).unwrap();
        assert!((q - 119.69).abs() < 0.005, "{q}");
        // Φ⁻¹(1/2) = 0
        let median = gbm_quantile(100.0, 0.05, 0.4, 1.0, 0.5).unwrap();
        assert!((median - 100.0 * (0.05f64 - 0.08).exp()).abs() < 1e-10);
        assert!((median - 97.045).abs() < 5e-4);
        for l in [0.01, 0.3, 0.9] {
            let q = gbm_quantile(100.0, 0.0, 1e-12, 1.0, l).unwrap();
            assert!((q - 100.0).abs() < 1e-8);
        }
        assert!(gbm_quantile(100.0, 0.05, 0.4, 1.0, 0.0).is_err());
        assert!(gbm_quantile(100.0, 0.05, 0.4, 1.0, 1.0).is_err());
        assert!(gbm_quantile(-1.0, 0.05, 0.4, 1.0, 0.5).is_err());
    }

    #[test]
    fn quantile_strictly_increasing_in_level() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..200 {
            let q = gbm_quantile(100.0, 0.05, 0.4, 1.0, i as f64 / 200.0).unwrap();
            assert!(q > prev);
            prev = q;
        }
    }

    #[test]
    fn lognormal_density_integrates_to_cdf() {
        let g = Gbm::new(100.0, 0.05, 0.4, 1.0).unwrap();
        let q = g.quantile(0.7).unwrap();
        // trapezoid on (0, q]
        let steps = 200_000;
        let h = q / steps as f64;
        let mut acc = 0.0;
        for i in 1..steps {
            acc += g.terminal_density(i as f64 * h);
        }
        acc += 0.5 * g.terminal_density(q);
        assert!((acc * h - 0.7).abs() < 1e-6, "{}", acc * h);
    }

    #[test]
    fn density_zero_for_point_mass_outside_window() {
        let g = Gbm::new(100.0, 0.0, 0.0, 1.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        let d = estimate_density(&g, 110.0, 10, 100, 0.1, &mut rng).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(estimate_density(&g, 110.0, 10, 0, 0.1, &mut rng).is_err());
        assert!(estimate_density(&g, 110.0, 10, 10, 0.0, &mut rng).is_err());
    }

    #[test]
    fn vector_model_validation() {
        let noop = |_: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0);
        assert!(VectorSde::new(vec![1.0, 2.0], 1.0, 2, noop, noop).is_err());
        assert!(VectorSde::new(vec![], 1.0, 0, noop, noop).is_err());
        let m = VectorSde::new(vec![1.0, 2.0], 1.0, 1, noop, noop).unwrap();
        assert_eq!(m.monitored_initial(), 2.0);
    }
}
