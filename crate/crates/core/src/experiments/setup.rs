use crate::dynamics::{CoherenceTimes, DephasingModel, HardwareConfig, RwaEvolver};
use crate::experiments::calibration::calibrate_pulses;
use crate::spin::{SpinSystem, SpinSystemParams};
use crate::Result;

/// A labeled spin system together with its noise model and calibrated
/// pulse hardware.
#[derive(Debug, Clone)]
pub struct Setup {
    pub system: SpinSystem,
    pub times: CoherenceTimes,
    pub dephasing: DephasingModel,
    pub hardware: HardwareConfig,
}

impl Setup {
    /// Builds the system and calibrates Rabi rates at drive amplitude `b1_tesla`.
    pub fn new(params: SpinSystemParams, times: CoherenceTimes, b1_tesla: f64) -> Result<Self> {
        params.validate()?;
        let system = SpinSystem::new(params)?;
        let dephasing = DephasingModel::from_times(&system, &times)?;
        let hardware = calibrate_pulses(&system, b1_tesla)?;
        Ok(Self {
            system,
            times,
            dephasing,
            hardware,
        })
    }

    /// Same as [`Setup::new`] but with Rabi rates taken straight from the
    /// transition matrix elements.
    pub fn with_nominal_hardware(params: SpinSystemParams, times: CoherenceTimes, b1_tesla: f64) -> Result<Self> {
        params.validate()?;
        let system = SpinSystem::new(params)?;
        let dephasing = DephasingModel::from_times(&system, &times)?;
        let hardware = HardwareConfig::nominal(&system, b1_tesla)?;
        Ok(Self {
            system,
            times,
            dephasing,
            hardware,
        })
    }

    pub fn computational(&self) -> [usize; 4] {
        self.system.levels.computational
    }

    /// Noise-free model sharing the thermal equilibrium.
    pub fn ideal_dephasing(&self) -> DephasingModel {
        DephasingModel::none(self.system.dim()).with_equilibrium(self.dephasing.equilibrium.clone())
    }

    pub fn evolver(&self) -> Result<RwaEvolver<'_>> {
        RwaEvolver::new(&self.system, &self.dephasing)
    }
}
