//! Posterior over a finite parameter space, stored as log-weights.
//!
//! Weights are re-centered (max log-weight = 0) after every update and only
//! normalized through log-sum-exp when read, so tens of thousands of Gaussian
//! updates never overflow or collapse to an all-zero vector.

use rand::Rng;

use crate::error::{Error, Result};
use crate::reward_models::{gaussian_log_density, ModelFamily, ParamSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    log_weights: Vec<f64>,
}

/// `log Σ exp(x_i)`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64> + Clone>(values: I) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

impl Posterior {
    /// Prior as the starting log-weights.
    pub fn new(space: &ParamSpace) -> Self {
        Self {
            log_weights: space.prior().iter().map(|w| w.ln()).collect(),
        }
    }

    /// Wraps raw log-weights; at least one must be finite.
    pub fn from_log_weights(log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY)
            || !log_weights.iter().any(|w| w.is_finite())
        {
            return Err(Error::DegeneratePosterior);
        }
        Ok(Self { log_weights })
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Bayes update for one observation `(a, r)`.
    pub fn update(&mut self, space: &ParamSpace, family: &ModelFamily, a: f64, r: f64) -> Result<()> {
        if space.len() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "posterior has {} entries, parameter space {}",
                self.len(),
                space.len()
            )));
        }
        space.check_family(family)?;
        if !(family.sigma > 0.0) {
            return Err(Error::NonPositiveSigma(family.sigma));
        }
        let sigma = family.sigma;
        self.update_with_means(space.params().iter().map(|p| family.mean_unchecked(p, a)), r, sigma)
    }

    /// Update given each parameter's model mean at the chosen action.
    pub fn update_with_means<I>(&mut self, means: I, r: f64, sigma: f64) -> Result<()>
    where
        I: IntoIterator<Item = f64>,
    {
        if !r.is_finite() {
            return Err(Error::NonFiniteReward(r));
        }
        if !(sigma > 0.0) {
            return Err(Error::NonPositiveSigma(sigma));
        }
        self.add_log_likelihoods(means.into_iter().map(|m| gaussian_log_density(r, m, sigma)))
    }

    /// Adds one log-likelihood per parameter and re-centers.
    pub fn add_log_likelihoods<I>(&mut self, log_likelihoods: I) -> Result<()>
    where
        I: IntoIterator<Item = f64>,
    {
        let mut count = 0;
        for (w, ll) in self.log_weights.iter_mut().zip(log_likelihoods) {
            *w += ll;
            count += 1;
        }
        if count != self.log_weights.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} log-likelihoods, got {count}",
                self.log_weights.len()
            )));
        }
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegeneratePosterior);
        }
        for w in &mut self.log_weights {
            *w -= max;
        }
        Ok(())
    }

    fn log_normalizer(&self) -> Result<f64> {
        let lse = log_sum_exp(self.log_weights.iter().copied());
        if !lse.is_finite() {
            return Err(Error::DegeneratePosterior);
        }
        Ok(lse)
    }

    /// `log π(i)` for every index.
    pub fn normalized_log_weights(&self) -> Result<Vec<f64>> {
        let lse = self.log_normalizer()?;
        Ok(self.log_weights.iter().map(|w| w - lse).collect())
    }

    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let lse = self.log_normalizer()?;
        Ok(self.log_weights.iter().map(|w| (w - lse).exp()).collect())
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn map_estimate(&self) -> usize {
        crate::reward_models::argmax_index(self.log_weights.iter().copied())
    }

    fn check_indices(&self, set: &[usize]) -> Result<()> {
        match set.iter().find(|&&i| i >= self.len()) {
            Some(&index) => Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            }),
            None => Ok(()),
        }
    }

    /// Posterior mass of an index set. Repeated indices count once.
    pub fn mass_on(&self, set: &[usize]) -> Result<f64> {
        Ok(self.log_mass_on(set)?.exp().min(1.0))
    }

    /// `log π(S)`; stays finite long after `π(S)` itself underflows.
    pub fn log_mass_on(&self, set: &[usize]) -> Result<f64> {
        self.check_indices(set)?;
        let lse = self.log_normalizer()?;
        let mut members = set.to_vec();
        members.sort_unstable();
        members.dedup();
        Ok(log_sum_exp(members.iter().map(|&i| self.log_weights[i])) - lse)
    }

    /// Draws an index with probability equal to its posterior weight.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let lse = self.log_normalizer()?;
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        let mut last_positive = 0;
        for (i, w) in self.log_weights.iter().enumerate() {
            let p = (w - lse).exp();
            if p > 0.0 {
                last_positive = i;
            }
            cumulative += p;
            if u < cumulative {
                return Ok(i);
            }
        }
        // rounding left the cumulative sum just below u
        Ok(last_positive)
    }
}
