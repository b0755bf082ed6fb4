//! Random streams and coupled Euler-Maruyama innovations.
//!
//! With shared coupling, `R` Euler schemes with steps `T/(rn)`, `r = 1..R`,
//! are driven by one Brownian path. The path is simulated on the common
//! refinement `T/(nL)` with `L = lcm(1..R)`; the increment of level `r` over
//! its `k`-th interval is the left-to-right sum of the `L/r` fine increments
//! it covers. The summation order is the same for every level, so the
//! aggregation is reproducible bit for bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrapolation::MAX_LEVELS;
use crate::model::SdeModel;

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream parameter selects one of `2^64`
/// non-overlapping keystreams for the same seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// One `N(0, 1)` draw.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// How the `R` levels share Brownian increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// One Brownian path drives every level.
    #[default]
    Shared,
    /// Each level draws its own path.
    Independent,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `lcm(1, 2, ..., levels)`: number of fine steps per base step `T/n`.
pub fn fine_grid_factor(levels: usize) -> Result<usize> {
    check_levels(levels)?;
    let l = (1..=levels as u64).fold(1u64, |acc, r| acc / gcd(acc, r) * r);
    Ok(l as usize)
}

fn check_levels(levels: usize) -> Result<()> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(Error::invalid(
            "levels",
            format!("must be in 1..={MAX_LEVELS}, got {levels}"),
        ));
    }
    Ok(())
}

/// `n_fine` i.i.d. `N(0, dt)` draws.
pub fn brownian_increments(n_fine: usize, dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if n_fine == 0 {
        return Err(Error::invalid("n_fine", "must be at least 1"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let sd = dt.sqrt();
    Ok((0..n_fine).map(|_| sd * rng.standard_normal()).collect())
}

/// One draw of the `R` coupled discretized terminal values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledSample {
    pub levels: usize,
    pub base_steps: usize,
    /// Monitored coordinate of `X^{rn}_T` for `r = 1..R`.
    pub terminal: Vec<f64>,
    /// Full terminal state per level, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_state: Option<Vec<Vec<f64>>>,
}

/// Reusable workspace producing coupled samples without per-draw
/// allocation.
#[derive(Debug, Clone)]
pub struct CoupledSampler {
    base_steps: usize,
    levels: usize,
    fine_factor: usize,
    coupling: Coupling,
    retain_full_state: bool,
    fine: Vec<f64>,
    coarse: Vec<Vec<f64>>,
    terminal: Vec<f64>,
    full_state: Vec<f64>,
    state: Vec<f64>,
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    samples_drawn: u64,
    increments_drawn: u64,
}

impl CoupledSampler {
    pub fn new(base_steps: usize, levels: usize, coupling: Coupling) -> Result<Self> {
        if base_steps == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        let fine_factor = fine_grid_factor(levels)?;
        Ok(CoupledSampler {
            base_steps,
            levels,
            fine_factor,
            coupling,
            retain_full_state: false,
            fine: Vec::new(),
            coarse: vec![Vec::new(); levels],
            terminal: vec![0.0; levels],
            full_state: Vec::new(),
            state: Vec::new(),
            drift: Vec::new(),
            diffusion: Vec::new(),
            samples_drawn: 0,
            increments_drawn: 0,
        })
    }

    /// Keep every coordinate of each level's terminal state, not just the
    /// monitored one.
    pub fn retain_full_state(mut self, yes: bool) -> Self {
        self.retain_full_state = yes;
        self
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn base_steps(&self) -> usize {
        self.base_steps
    }

    pub fn fine_factor(&self) -> usize {
        self.fine_factor
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    /// Number of coupled samples produced so far.
    pub fn samples_drawn(&self) -> u64 {
        self.samples_drawn
    }

    /// Number of Brownian increment vectors simulated so far:
    /// `n L` per sample when shared, `n Σr` when independent.
    pub fn increments_drawn(&self) -> u64 {
        self.increments_drawn
    }

    /// Increments per sample, as counted by [`increments_drawn`](Self::increments_drawn).
    pub fn increments_per_sample(&self) -> u64 {
        let n = self.base_steps as u64;
        match self.coupling {
            Coupling::Shared => n * self.fine_factor as u64,
            Coupling::Independent => n * (self.levels * (self.levels + 1) / 2) as u64,
        }
    }

    /// Fine-grid increments of the last shared sample (`nL × d`, row-major).
    /// Empty in independent mode.
    pub fn fine_increments(&self) -> &[f64] {
        &self.fine
    }

    /// Increments that drove level `level` (1-based) in the last sample
    /// (`rn × d`, row-major).
    pub fn coarse_increments(&self, level: usize) -> &[f64] {
        &self.coarse[level - 1]
    }

    /// Full terminal state of level `level` (1-based) from the last sample,
    /// if retention is enabled.
    pub fn full_terminal_state(&self, level: usize) -> Option<&[f64]> {
        if !self.retain_full_state || self.full_state.is_empty() {
            return None;
        }
        let d = self.full_state.len() / self.levels;
        Some(&self.full_state[(level - 1) * d..level * d])
    }

    /// Draws one coupled sample and returns the monitored terminal value of
    /// each level.
    pub fn sample<M: SdeModel + ?Sized>(
        &mut self,
        model: &M,
        rng: &mut RngStream,
    ) -> Result<&[f64]> {
        let d = model.dimension();
        let horizon = model.horizon();
        let n = self.base_steps;

        match self.coupling {
            Coupling::Shared => {
                let n_fine = n * self.fine_factor;
                let sd = (horizon / n_fine as f64).sqrt();
                self.fine.clear();
                self.fine
                    .extend((0..n_fine * d).map(|_| sd * rng.standard_normal()));
                for r in 1..=self.levels {
                    let per = self.fine_factor / r;
                    let coarse = &mut self.coarse[r - 1];
                    coarse.clear();
                    for k in 0..r * n {
                        let base = k * per;
                        for i in 0..d {
                            let mut acc = self.fine[base * d + i];
                            for j in 1..per {
                                acc += self.fine[(base + j) * d + i];
                            }
                            coarse.push(acc);
                        }
                    }
                }
            }
            Coupling::Independent => {
                self.fine.clear();
                for r in 1..=self.levels {
                    let steps = r * n;
                    let sd = (horizon / steps as f64).sqrt();
                    let coarse = &mut self.coarse[r - 1];
                    coarse.clear();
                    coarse.extend((0..steps * d).map(|_| sd * rng.standard_normal()));
                }
            }
        }

        self.state.resize(d, 0.0);
        self.drift.resize(d, 0.0);
        self.diffusion.resize(d * d, 0.0);
        if self.retain_full_state {
            self.full_state.resize(self.levels * d, 0.0);
        }
        let monitored = model.monitored();

        for r in 1..=self.levels {
            let steps = r * n;
            let dt = horizon / steps as f64;
            self.state.copy_from_slice(model.initial_state());
            let dw_all = &self.coarse[r - 1];
            if d == 1 {
                let mut x = [self.state[0]];
                let (mut b, mut s) = ([0.0], [0.0]);
                for (k, dw) in dw_all.iter().enumerate() {
                    model.drift(&x, &mut b);
                    model.diffusion(&x, &mut s);
                    x[0] += b[0] * dt + s[0] * dw;
                    if !x[0].is_finite() {
                        return Err(Error::ModelBlowUp {
                            level: r,
                            step: k + 1,
                        });
                    }
                }
                self.state[0] = x[0];
            } else {
                self.euler_vector(model, r, dt)?;
            }
            self.terminal[r - 1] = self.state[monitored];
            if self.retain_full_state {
                self.full_state[(r - 1) * d..r * d].copy_from_slice(&self.state);
            }
        }

        self.samples_drawn += 1;
        self.increments_drawn += self.increments_per_sample();
        Ok(&self.terminal)
    }

    fn euler_vector<M: SdeModel + ?Sized>(&mut self, model: &M, r: usize, dt: f64) -> Result<()> {
        let d = model.dimension();
        let steps = r * self.base_steps;
        let dw_all = &self.coarse[r - 1];
        for k in 0..steps {
            let dw = &dw_all[k * d..(k + 1) * d];
            model.drift(&self.state, &mut self.drift);
            model.diffusion(&self.state, &mut self.diffusion);
            let mut finite = true;
            for i in 0..d {
                let row = &self.diffusion[i * d..(i + 1) * d];
                let noise: f64 = row.iter().zip(dw).map(|(s, w)| s * w).sum();
                let x = self.state[i] + self.drift[i] * dt + noise;
                finite &= x.is_finite();
                self.state[i] = x;
            }
            if !finite {
                return Err(Error::ModelBlowUp {
                    level: r,
                    step: k + 1,
                });
            }
        }
        Ok(())
    }
}

/// One-shot coupled sample; allocates a fresh [`CoupledSampler`].
pub fn sample_coupled<M: SdeModel + ?Sized>(
    model: &M,
    n: usize,
    levels: usize,
    rng: &mut RngStream,
    coupling: Coupling,
) -> Result<CoupledSample> {
    let retain = model.dimension() > 1;
    let mut sampler = CoupledSampler::new(n, levels, coupling)?.retain_full_state(retain);
    let terminal = sampler.sample(model, rng)?.to_vec();
    let full_state = retain.then(|| {
        (1..=levels)
            .map(|r| sampler.full_terminal_state(r).unwrap().to_vec())
            .collect()
    });
    Ok(CoupledSample {
        levels,
        base_steps: n,
        terminal,
        full_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gbm, ScalarSde};

    #[test]
    fn fine_factor_values() {
        assert_eq!(fine_grid_factor(1).unwrap(), 1);
        assert_eq!(fine_grid_factor(2).unwrap(), 2);
        assert_eq!(fine_grid_factor(3).unwrap(), 6);
        assert_eq!(fine_grid_factor(4).unwrap(), 12);
        assert_eq!(fine_grid_factor(5).unwrap(), 60);
        assert_eq!(fine_grid_factor(8).unwrap(), 840);
        assert!(fine_grid_factor(0).is_err());
        assert!(fine_grid_factor(9).is_err());
    }

    #[test]
    fn increments_reject_empty() {
        let mut rng = RngStream::new(1, 0);
        assert!(brownian_increments(0, 0.25, &mut rng).is_err());
        assert!(brownian_increments(4, 0.0, &mut rng).is_err());
        assert_eq!(brownian_increments(4, 0.25, &mut rng).unwrap().len(), 4);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = RngStream::new(7, 3);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngStream::new(7, 3);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut r = RngStream::new(7, 4);
            (0..8).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_model_stays_put() {
        let g = Gbm::new(100.0, 0.0, 0.0, 1.0).unwrap();
        let mut rng = RngStream::new(3, 0);
        for coupling in [Coupling::Shared, Coupling::Independent] {
            for levels in 1..=5 {
                let s = sample_coupled(&g, 7, levels, &mut rng, coupling).unwrap();
                assert!(s.terminal.iter().all(|&x| x == 100.0));
            }
        }
    }

    #[test]
    fn two_level_increments_aggregate_exactly() {
        let g = Gbm::new(100.0, 0.05, 0.4, 1.0).unwrap();
        let mut sampler = CoupledSampler::new(13, 2, Coupling::Shared).unwrap();
        let mut rng = RngStream::new(11, 2);
        sampler.sample(&g, &mut rng).unwrap();
        let l1 = sampler.coarse_increments(1).to_vec();
        let l2 = sampler.coarse_increments(2);
        assert_eq!(l2, sampler.fine_increments());
        for (k, w) in l1.iter().enumerate() {
            assert_eq!(w.to_bits(), (l2[2 * k] + l2[2 * k + 1]).to_bits());
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let m = ScalarSde::new(1.0, 1.0, |x: f64| x * x * 1e200, |_| 0.0).unwrap();
        let mut rng = RngStream::new(0, 0);
        let err = sample_coupled(&m, 10, 2, &mut rng, Coupling::Shared).unwrap_err();
        assert!(matches!(err, Error::ModelBlowUp { level: 1, .. }));
    }

    #[test]
    fn counters_follow_coupling() {
        let g = Gbm::new(100.0, 0.05, 0.4, 1.0).unwrap();
        let mut rng = RngStream::new(0, 0);
        let mut shared = CoupledSampler::new(4, 3, Coupling::Shared).unwrap();
        let mut indep = CoupledSampler::new(4, 3, Coupling::Independent).unwrap();
        for _ in 0..5 {
            shared.sample(&g, &mut rng).unwrap();
            indep.sample(&g, &mut rng).unwrap();
        }
        assert_eq!(shared.samples_drawn(), 5);
        assert_eq!(shared.increments_drawn(), 5 * 4 * 6);
        assert_eq!(indep.increments_drawn(), 5 * 4 * 6);
        let mut indep4 = CoupledSampler::new(4, 4, Coupling::Independent).unwrap();
        indep4.sample(&g, &mut rng).unwrap();
        assert_eq!(indep4.increments_drawn(), 4 * 10);
        assert_eq!(indep4.coarse_increments(3).len(), 12);
    }
}
