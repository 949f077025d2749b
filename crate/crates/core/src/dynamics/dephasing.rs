use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::spin::{SpinSystem, COMPUTATIONAL_M_S};
use crate::{Error, Result};

/// Measured characteristic times used to build the dephasing model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceTimes {
    /// Single-quantum (Δm_I = 1) coherence time, μs.
    pub t2_single_us: f64,
    /// Double-quantum (Δm_I = 2) coherence time, μs.
    pub t2_double_us: f64,
    /// Triple-quantum (Δm_I = 3) coherence time, μs.
    pub t2_triple_us: f64,
    /// Population relaxation time, μs.
    pub t1_us: f64,
    /// Whether population relaxation is simulated at all.
    pub t1_enabled: bool,
}

impl Default for CoherenceTimes {
    fn default() -> Self {
        Self {
            t2_single_us: 8.0,
            t2_double_us: 1.2,
            t2_triple_us: 0.7,
            t1_us: 200.0,
            t1_enabled: false,
        }
    }
}

impl CoherenceTimes {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t2_single_us", self.t2_single_us),
            ("t2_double_us", self.t2_double_us),
            ("t2_triple_us", self.t2_triple_us),
            ("t1_us", self.t1_us),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn fastest_rate(&self) -> f64 {
        1.0 / self.t2_single_us.min(self.t2_double_us).min(self.t2_triple_us)
    }
}

/// Pure-dephasing rates between eigenstates plus optional population
/// relaxation toward the thermal state.
///
/// Coherence `ρ_jk` decays as `exp(-Γ_jk t)`. With `t1_us` set, the whole
/// state also relaxes as `dρ/dt = -(ρ - ρ_eq)/T1`, so each population
/// deviation from equilibrium decays as `exp(-t/T1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingModel {
    /// Symmetric, non-negative, zero diagonal, 1/μs.
    pub gamma: DMatrix<f64>,
    pub t1_us: Option<f64>,
    /// Equilibrium populations in the eigenbasis.
    pub equilibrium: Vec<f64>,
}

impl DephasingModel {
    /// No dephasing and no relaxation.
    pub fn none(dim: usize) -> Self {
        Self {
            gamma: DMatrix::zeros(dim, dim),
            t1_us: None,
            equilibrium: vec![1.0 / dim as f64; dim],
        }
    }

    /// Rates from measured coherence times.
    ///
    /// Within the `m_S = +1/2` manifold the rate is chosen by `|Δm_I|`
    /// (single, double, triple quantum; larger jumps use the triple-quantum
    /// time). Any coherence involving an `m_S = -1/2` level gets the fastest
    /// configured rate.
    pub fn from_times(system: &SpinSystem, times: &CoherenceTimes) -> Result<Self> {
        times.validate()?;
        let labels = &system.levels.labels;
        let dim = labels.len();
        let fastest = times.fastest_rate();
        let gamma = DMatrix::from_fn(dim, dim, |j, k| {
            if j == k {
                return 0.0;
            }
            let (a, b) = (labels[j], labels[k]);
            if a.m_s != COMPUTATIONAL_M_S || b.m_s != COMPUTATIONAL_M_S {
                return fastest;
            }
            match (a.m_i - b.m_i).abs().round() as i64 {
                1 => 1.0 / times.t2_single_us,
                2 => 1.0 / times.t2_double_us,
                _ => 1.0 / times.t2_triple_us,
            }
        });
        let equilibrium = system.thermal_state()?.populations();
        let model = Self {
            gamma,
            t1_us: times.t1_enabled.then_some(times.t1_us),
            equilibrium,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn rate(&self, j: usize, k: usize) -> f64 {
        self.gamma[(j, k)]
    }

    pub fn with_t1(mut self, t1_us: Option<f64>) -> Self {
        self.t1_us = t1_us;
        self
    }

    pub fn with_equilibrium(mut self, populations: Vec<f64>) -> Self {
        self.equilibrium = populations;
        self
    }

    /// Uniform single rate on one coherence pair, everything else zero.
    pub fn single_pair(dim: usize, j: usize, k: usize, rate: f64) -> Self {
        let mut m = Self::none(dim);
        m.gamma[(j, k)] = rate;
        m.gamma[(k, j)] = rate;
        m
    }

    pub fn is_trivial(&self) -> bool {
        self.t1_us.is_none() && self.gamma.iter().all(|&g| g == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if !self.gamma.is_square() || self.equilibrium.len() != n {
            return Err(Error::InvalidParameter("dephasing model dimensions disagree".into()));
        }
        for j in 0..n {
            if self.gamma[(j, j)] != 0.0 {
                return Err(Error::InvalidParameter(
                    "dephasing rates must have zero diagonal".into(),
                ));
            }
            for k in 0..n {
                let g = self.gamma[(j, k)];
                if !(g >= 0.0) || g != self.gamma[(k, j)] {
                    return Err(Error::InvalidParameter(format!(
                        "dephasing rate ({j},{k}) = {g} is negative or asymmetric"
                    )));
                }
            }
        }
        if let Some(t1) = self.t1_us {
            if !(t1 > 0.0) {
                return Err(Error::InvalidParameter(format!("T1 must be positive, got {t1}")));
            }
        }
        Ok(())
    }
}
