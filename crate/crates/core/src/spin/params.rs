use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bohr magneton over Planck's constant, MHz/T.
pub const MU_B_MHZ_PER_T: f64 = 13_996.245;
/// Nuclear magneton over Planck's constant, MHz/T.
pub const MU_N_MHZ_PER_T: f64 = 7.6226;
/// h / k_B expressed in kelvin per MHz.
pub const H_OVER_KB_K_PER_MHZ: f64 = 4.799_243_073e-5;

/// Coupling constants, g-tensors and field of the electro-nuclear spin
/// Hamiltonian. Couplings are in MHz, fields in tesla.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystemParams {
    pub a_par: f64,
    pub a_perp: f64,
    pub p: f64,
    pub g_x: f64,
    pub g_y: f64,
    pub g_z: f64,
    pub g_i: f64,
    pub s: f64,
    pub i: f64,
    pub b0: [f64; 3],
    pub temperature: f64,
}

impl Default for SpinSystemParams {
    /// 173Yb(trensal) with the 0.22 T working field along x.
    fn default() -> Self {
        Self {
            a_par: -898.0,
            a_perp: -615.0,
            p: -66.0,
            g_x: 2.9,
            g_y: 2.9,
            g_z: 4.3,
            g_i: -0.2592,
            s: 0.5,
            i: 2.5,
            b0: [0.22, 0.0, 0.0],
            temperature: 1.4,
        }
    }
}

impl SpinSystemParams {
    pub fn with_field(mut self, b0: [f64; 3]) -> Self {
        self.b0 = b0;
        self
    }

    /// Field of the given magnitude along x.
    pub fn with_field_x(self, tesla: f64) -> Self {
        self.with_field([tesla, 0.0, 0.0])
    }

    pub fn field_magnitude(&self) -> f64 {
        self.b0.iter().map(|b| b * b).sum::<f64>().sqrt()
    }

    pub fn dim(&self) -> usize {
        ((2.0 * self.s).round() as usize + 1) * ((2.0 * self.i).round() as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("a_par", self.a_par),
            ("a_perp", self.a_perp),
            ("p", self.p),
            ("g_x", self.g_x),
            ("g_y", self.g_y),
            ("g_z", self.g_z),
            ("g_i", self.g_i),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.b0.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("b0 must be finite".into()));
        }
        if self.field_magnitude() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "|B0| = {} T is outside the supported [0, 1] T range",
                self.field_magnitude()
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        for (name, v) in [("s", self.s), ("i", self.i)] {
            let twice = 2.0 * v;
            if !(twice > 0.0) || (twice - twice.round()).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} is not a positive half-integer"
                )));
            }
        }
        Ok(())
    }
}
