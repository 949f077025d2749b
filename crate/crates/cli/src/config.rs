//! Run configuration: one TOML file, strictly parsed.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spinqudit::compiler::{QtmModel, TimModel};
use spinqudit::dynamics::{CoherenceTimes, EnsembleConfig};
use spinqudit::experiments::{Backend, ReadoutMode};
use spinqudit::spin::SpinSystemParams;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub backend: Backend,
    pub system: SystemBlock,
    pub field: FieldBlock,
    pub dephasing: CoherenceTimes,
    pub ensemble: EnsembleConfig,
    pub drive: DriveBlock,
    pub readout: ReadoutBlock,
    pub spectrum: Option<SpectrumBlock>,
    pub calibration: Option<CalibrationBlock>,
    pub compile: Option<CompileBlock>,
    pub qtm: Option<QtmBlock>,
    pub tim: Option<TimBlock>,
}

/// Spin-Hamiltonian constants. The field lives in [`FieldBlock`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub a_par_mhz: f64,
    pub a_perp_mhz: f64,
    pub quadrupole_mhz: f64,
    pub g_x: f64,
    pub g_y: f64,
    pub g_z: f64,
    pub g_nuclear: f64,
    pub electron_spin: f64,
    pub nuclear_spin: f64,
    pub temperature_k: f64,
}

/// Static field direction and per-experiment magnitude, tesla.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub direction: [f64; 3],
    pub spectrum_tesla: f64,
    pub calibration_tesla: f64,
    pub qtm_tesla: f64,
    pub tim_tesla: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveBlock {
    pub b1_tesla: f64,
    /// Take pulse lengths from virtual Rabi fits instead of matrix elements.
    pub calibrate_durations: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutKind {
    Direct,
    Echo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutBlock {
    pub mode: ReadoutKind,
    pub echo_delay_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub step_mhz: f64,
    pub fwhm_mhz: f64,
    /// Overrides the system temperature for the spectrum only.
    pub temperature_k: Option<f64>,
    /// Relative window for a field-magnitude fit to the reference lines;
    /// zero disables it.
    pub fine_tune_window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationBlock {
    pub rabi_periods: f64,
    pub rabi_points: usize,
    /// Delay grids span this many configured time constants.
    pub decay_spans: f64,
    pub decay_points: usize,
    pub t1_transition: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileBlock {
    pub qtm_time_us: f64,
    /// Scaled time `bt` of the compiled Ising sequence.
    pub tim_bt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QtmBlock {
    pub d_mhz: f64,
    pub e_mhz: f64,
    pub t_max_us: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimBlock {
    pub b_mhz: f64,
    pub j_mhz: f64,
    pub trotter_steps: usize,
    pub bt_max: f64,
    pub points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SpinSystemParams::default();
        let tim = TimModel::default();
        let qtm = QtmModel::default();
        Self {
            output_dir: PathBuf::from("out"),
            backend: Backend::LindbladEnsemble,
            system: SystemBlock {
                a_par_mhz: p.a_par,
                a_perp_mhz: p.a_perp,
                quadrupole_mhz: p.p,
                g_x: p.g_x,
                g_y: p.g_y,
                g_z: p.g_z,
                g_nuclear: p.g_i,
                electron_spin: p.s,
                nuclear_spin: p.i,
                temperature_k: p.temperature,
            },
            field: FieldBlock {
                direction: [1.0, 0.0, 0.0],
                spectrum_tesla: 0.22,
                calibration_tesla: 0.22,
                qtm_tesla: 0.12,
                tim_tesla: 0.22,
            },
            dephasing: CoherenceTimes::default(),
            ensemble: EnsembleConfig::default(),
            drive: DriveBlock {
                b1_tesla: 5e-4,
                calibrate_durations: true,
            },
            readout: ReadoutBlock {
                mode: ReadoutKind::Direct,
                echo_delay_us: 1.0,
            },
            spectrum: Some(SpectrumBlock {
                start_mhz: 300.0,
                stop_mhz: 420.0,
                step_mhz: 0.05,
                fwhm_mhz: 2.0,
                temperature_k: None,
                fine_tune_window: 0.0,
            }),
            calibration: Some(CalibrationBlock {
                rabi_periods: 3.0,
                rabi_points: 61,
                decay_spans: 3.0,
                decay_points: 25,
                t1_transition: 1,
            }),
            compile: Some(CompileBlock {
                qtm_time_us: 1.0,
                tim_bt: 5.0,
            }),
            qtm: Some(QtmBlock {
                d_mhz: qtm.d_mhz,
                e_mhz: qtm.e_mhz,
                t_max_us: 10.0,
                points: 101,
            }),
            tim: Some(TimBlock {
                b_mhz: tim.b_mhz,
                j_mhz: tim.j_mhz,
                trotter_steps: 2,
                bt_max: 7.0,
                points: 71,
            }),
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Spin parameters with the field of one experiment.
    pub fn params(&self, tesla: f64) -> SpinSystemParams {
        let s = &self.system;
        let d = self.field.direction;
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        SpinSystemParams {
            a_par: s.a_par_mhz,
            a_perp: s.a_perp_mhz,
            p: s.quadrupole_mhz,
            g_x: s.g_x,
            g_y: s.g_y,
            g_z: s.g_z,
            g_i: s.g_nuclear,
            s: s.electron_spin,
            i: s.nuclear_spin,
            b0: d.map(|x| tesla * x / norm),
            temperature: s.temperature_k,
        }
    }

    pub fn readout_mode(&self) -> ReadoutMode {
        match self.readout.mode {
            ReadoutKind::Direct => ReadoutMode::Direct,
            ReadoutKind::Echo => ReadoutMode::Echo {
                delay_us: self.readout.echo_delay_us,
            },
        }
    }

    /// Checks everything that can be checked without running physics.
    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.field.direction;
        if d.iter().any(|x| !x.is_finite()) || d.iter().map(|x| x * x).sum::<f64>() == 0.0 {
            return Err(bad("field.direction must be a finite nonzero vector"));
        }
        let f = &self.field;
        for (name, t) in [
            ("field.spectrum_tesla", f.spectrum_tesla),
            ("field.calibration_tesla", f.calibration_tesla),
            ("field.qtm_tesla", f.qtm_tesla),
            ("field.tim_tesla", f.tim_tesla),
        ] {
            positive(name, t)?;
            self.params(t).validate().map_err(|e| bad(e.to_string()))?;
        }
        self.dephasing.validate().map_err(|e| bad(e.to_string()))?;
        self.ensemble.validate().map_err(|e| bad(e.to_string()))?;
        positive("drive.b1_tesla", self.drive.b1_tesla)?;
        if !(self.readout.echo_delay_us >= 0.0) {
            return Err(bad("readout.echo_delay_us must be non-negative"));
        }
        if let Some(s) = &self.spectrum {
            positive("spectrum.step_mhz", s.step_mhz)?;
            positive("spectrum.fwhm_mhz", s.fwhm_mhz)?;
            if !(s.stop_mhz > s.start_mhz) {
                return Err(bad("spectrum.stop_mhz must exceed start_mhz"));
            }
            if let Some(t) = s.temperature_k {
                if !(t > 0.0) {
                    return Err(bad("spectrum.temperature_k must be positive"));
                }
            }
            if !(0.0..1.0).contains(&s.fine_tune_window) {
                return Err(bad("spectrum.fine_tune_window must lie in [0, 1)"));
            }
        }
        if let Some(c) = &self.calibration {
            positive("calibration.rabi_periods", c.rabi_periods)?;
            positive("calibration.decay_spans", c.decay_spans)?;
            if c.rabi_points < 8 || c.decay_points < 5 {
                return Err(bad("calibration grids need at least 8 (Rabi) and 5 (decay) points"));
            }
            if !(1..=3).contains(&c.t1_transition) {
                return Err(bad("calibration.t1_transition must be 1, 2 or 3"));
            }
        }
        if let Some(c) = &self.compile {
            if !(c.qtm_time_us >= 0.0) || !(c.tim_bt >= 0.0) {
                return Err(bad("compile times must be non-negative"));
            }
        }
        if let Some(q) = &self.qtm {
            self.qtm_model(q).validate().map_err(|e| bad(e.to_string()))?;
            positive("qtm.t_max_us", q.t_max_us)?;
            if q.points < 2 {
                return Err(bad("qtm.points must be at least 2"));
            }
        }
        if let Some(t) = &self.tim {
            positive("tim.b_mhz", t.b_mhz.abs())?;
            if !t.j_mhz.is_finite() {
                return Err(bad("tim.j_mhz must be finite"));
            }
            positive("tim.bt_max", t.bt_max)?;
            if t.trotter_steps == 0 || t.points < 2 {
                return Err(bad("tim.trotter_steps must be >= 1 and tim.points >= 2"));
            }
        }
        Ok(())
    }

    pub fn qtm_model(&self, q: &QtmBlock) -> QtmModel {
        QtmModel::new(q.d_mhz, q.e_mhz)
    }

    pub fn tim_model(&self, t: &TimBlock) -> TimModel {
        TimModel {
            b_mhz: t.b_mhz,
            j_mhz: t.j_mhz,
        }
    }

    /// The block a subcommand needs, or a config error naming it.
    pub fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        block.as_ref().ok_or_else(|| bad(format!("missing [{name}] block")))
    }
}

/// Evenly spaced grid from 0 to `stop` inclusive.
pub fn linear_grid(stop: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| stop * k as f64 / (points - 1) as f64).collect()
}

/// Times in μs for scaled times `bt` in `[0, bt_max]`.
pub fn tim_times(t: &TimBlock) -> Vec<f64> {
    linear_grid(t.bt_max, t.points)
        .into_iter()
        .map(|bt| bt / (2.0 * PI * t.b_mhz.abs()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{}\nbogus = 1\n", RunConfig::default().to_toml());
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config(_))));
        let text = RunConfig::default().to_toml().replace("g_z = ", "g_q = ");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn missing_keys_are_rejected() {
        let text = RunConfig::default().to_toml().replace("b1_tesla = 0.0005\n", "");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn field_direction_is_normalized() {
        let mut cfg = RunConfig::default();
        cfg.field.direction = [0.0, 0.0, 2.0];
        assert_eq!(cfg.params(0.3).b0, [0.0, 0.0, 0.3]);
    }
}
