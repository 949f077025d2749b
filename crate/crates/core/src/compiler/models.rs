use serde::{Deserialize, Serialize};

use crate::linalg::{c, ensure_hermitian, identity, kron, unitary_propagator, CMatrix};
use crate::spin::spin_operators;
use crate::{Error, Result};

/// A target system with a time-independent Hamiltonian in MHz.
pub trait TargetModel {
    fn hamiltonian(&self) -> Result<CMatrix>;
    fn name(&self) -> &'static str;
}

/// Spin `S` with axial and rhombic anisotropy, `H = -D S_z² + E (S_x² - S_y²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QtmModel {
    pub d_mhz: f64,
    pub e_mhz: f64,
    pub s: f64,
}

impl Default for QtmModel {
    fn default() -> Self {
        Self {
            d_mhz: 1.5,
            e_mhz: 0.15,
            s: 1.0,
        }
    }
}

impl QtmModel {
    pub fn new(d_mhz: f64, e_mhz: f64) -> Self {
        Self { d_mhz, e_mhz, s: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_mhz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "D must be positive, got {}",
                self.d_mhz
            )));
        }
        if !self.e_mhz.is_finite() {
            return Err(Error::InvalidParameter("E must be finite".into()));
        }
        let dim = 2.0 * self.s + 1.0;
        if !(self.s > 0.0) || dim > 4.0 || (dim - dim.round()).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "target spin S = {} does not fit in four levels",
                self.s
            )));
        }
        Ok(())
    }

    /// `|E| > D/3` breaks the usual rhombicity convention; allowed, but worth a warning.
    pub fn rhombicity_warning(&self) -> bool {
        self.e_mhz.abs() > self.d_mhz / 3.0
    }

    pub fn dim(&self) -> usize {
        (2.0 * self.s + 1.0).round() as usize
    }
}

impl TargetModel for QtmModel {
    fn hamiltonian(&self) -> Result<CMatrix> {
        self.validate()?;
        let ops = spin_operators(self.s)?;
        let sz2 = &ops.z * &ops.z;
        let sx2 = &ops.x * &ops.x;
        let sy2 = &ops.y * &ops.y;
        Ok(sz2 * c(-self.d_mhz) + (sx2 - sy2) * c(self.e_mhz))
    }

    fn name(&self) -> &'static str {
        "qtm"
    }
}

/// Two spins 1/2, `H = b (s_y1 + s_y2) + J s_z1 s_z2`, basis `|↑↑>, |↑↓>, |↓↑>, |↓↓>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimModel {
    pub b_mhz: f64,
    pub j_mhz: f64,
}

impl Default for TimModel {
    fn default() -> Self {
        let unit = 1.0 / (2.0 * std::f64::consts::PI);
        Self {
            b_mhz: unit,
            j_mhz: unit,
        }
    }
}

impl TimModel {
    pub fn validate(&self) -> Result<()> {
        if !self.b_mhz.is_finite() || !self.j_mhz.is_finite() {
            return Err(Error::InvalidParameter("b and J must be finite".into()));
        }
        Ok(())
    }
}

/// Single-qubit operator acting on qubit 1 (most significant) or 2.
pub(crate) fn on_qubit(qubit: usize, op: &CMatrix) -> CMatrix {
    match qubit {
        1 => kron(op, &identity(2)),
        _ => kron(&identity(2), op),
    }
}

impl TargetModel for TimModel {
    fn hamiltonian(&self) -> Result<CMatrix> {
        self.validate()?;
        let s = spin_operators(0.5)?;
        let y = on_qubit(1, &s.y) + on_qubit(2, &s.y);
        let zz = kron(&s.z, &s.z);
        Ok(y * c(self.b_mhz) + zz * c(self.j_mhz))
    }

    fn name(&self) -> &'static str {
        "tim"
    }
}

/// `U = exp(-2πi H t)` for the target Hamiltonian.
pub fn exact_propagator<M: TargetModel + ?Sized>(model: &M, t_us: f64) -> Result<CMatrix> {
    if !(t_us >= 0.0) {
        return Err(Error::InvalidParameter(format!("time {t_us} must be non-negative")));
    }
    let h = model.hamiltonian()?;
    ensure_hermitian(&h, 1e-12)?;
    Ok(unitary_propagator(&h, t_us))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{distance_up_to_phase, unitarity_error};
    use std::f64::consts::PI;

    #[test]
    fn zero_time_is_identity() {
        let u = exact_propagator(&TimModel::default(), 0.0).unwrap();
        assert!((u - identity(4)).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn qtm_oscillates_at_twice_e() {
        let m = QtmModel::new(1.5, 0.15);
        for t in [0.0, 0.3, 1.1, 2.9, 7.3] {
            let u = exact_propagator(&m, t).unwrap();
            assert!(unitarity_error(&u) < 1e-12);
            let p_up = u[(0, 0)].norm_sqr();
            let p_down = u[(2, 0)].norm_sqr();
            assert!((p_up - p_down - (4.0 * PI * 0.15 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn uncoupled_ising_factorizes() {
        let m = TimModel {
            b_mhz: 0.37,
            j_mhz: 0.0,
        };
        let t = 1.7;
        let s = spin_operators(0.5).unwrap();
        let single = unitary_propagator(&(&s.y * c(0.37)), t);
        let u = exact_propagator(&m, t).unwrap();
        assert!(distance_up_to_phase(&u, &kron(&single, &single)) < 1e-12);
    }

    #[test]
    fn rejects_oversized_spin() {
        assert!(QtmModel {
            d_mhz: 1.0,
            e_mhz: 0.1,
            s: 2.0
        }
        .hamiltonian()
        .is_err());
        assert!(QtmModel::new(1.0, 0.5).rhombicity_warning());
    }
}
