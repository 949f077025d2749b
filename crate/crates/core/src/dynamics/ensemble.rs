use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DensityMatrix;
use crate::linalg::c;
use crate::{Error, Result};

/// Gaussian spread of the drive amplitude across the sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub sigma_rel: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            sigma_rel: 0.03,
            samples: 64,
            seed: 20_190_917,
        }
    }
}

impl EnsembleConfig {
    pub fn single() -> Self {
        Self {
            sigma_rel: 0.0,
            samples: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_rel >= 0.0) || !self.sigma_rel.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma_rel must be non-negative, got {}",
                self.sigma_rel
            )));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one sample".into()));
        }
        Ok(())
    }

    /// Per-sample B1 scale factors. A zero spread gives the single factor 1.
    pub fn scale_factors(&self) -> Result<Vec<f64>> {
        self.validate()?;
        if self.sigma_rel == 0.0 {
            return Ok(vec![1.0]);
        }
        let normal = Normal::new(1.0, self.sigma_rel).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..self.samples).map(|_| normal.sample(&mut rng)).collect())
    }
}

/// Observables that can be averaged with equal weights.
pub trait Averageable: Sized + Send {
    fn accumulate(&mut self, other: &Self) -> Result<()>;
    fn scale(&mut self, factor: f64);
}

impl Averageable for Vec<f64> {
    fn accumulate(&mut self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::InvalidParameter(
                "ensemble samples report different lengths".into(),
            ));
        }
        self.iter_mut().zip(other).for_each(|(a, b)| *a += b);
        Ok(())
    }

    fn scale(&mut self, factor: f64) {
        self.iter_mut().for_each(|a| *a *= factor);
    }
}

impl Averageable for DensityMatrix {
    fn accumulate(&mut self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() || self.frame != other.frame {
            return Err(Error::InvalidParameter(
                "ensemble states differ in shape or frame".into(),
            ));
        }
        self.matrix += &other.matrix;
        Ok(())
    }

    fn scale(&mut self, factor: f64) {
        self.matrix *= c(factor);
    }
}

/// Runs `experiment(b1_scale)` once per ensemble member and averages.
///
/// Samples run in parallel but are merged in index order, so the result is
/// bit-for-bit reproducible for a given seed.
pub fn ensemble_average<T, F>(config: &EnsembleConfig, experiment: F) -> Result<T>
where
    T: Averageable,
    F: Fn(f64) -> Result<T> + Sync,
{
    let factors = config.scale_factors()?;
    let runs: Vec<Result<T>> = factors.par_iter().map(|&s| experiment(s)).collect();
    let mut iter = runs.into_iter();
    let mut total = iter.next().expect("at least one sample")?;
    for r in iter {
        total.accumulate(&r?)?;
    }
    total.scale(1.0 / factors.len() as f64);
    Ok(total)
}
