use crate::linalg::{c, CMatrix, C64};
use crate::{Error, Result};

/// Cartesian angular-momentum matrices for one spin magnitude.
///
/// Basis order is `m = j, j-1, ..., -j`.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub j: f64,
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
}

impl SpinOperators {
    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    /// `J+ = Jx + i Jy`.
    pub fn raising(&self) -> CMatrix {
        &self.x + &self.y * C64::i()
    }

    pub fn lowering(&self) -> CMatrix {
        &self.x - &self.y * C64::i()
    }

    /// Projection magnetic quantum numbers in basis order.
    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.j - k as f64).collect()
    }
}

/// Builds `(Jx, Jy, Jz)` for spin `j`; `2j` must be a non-negative integer.
pub fn spin_operators(j: f64) -> Result<SpinOperators> {
    let twice = 2.0 * j;
    if !(twice >= 0.0) || (twice - twice.round()).abs() > 1e-12 || twice > 200.0 {
        return Err(Error::InvalidParameter(format!(
            "spin magnitude {j} is not a non-negative half-integer"
        )));
    }
    let dim = twice.round() as usize + 1;
    let m = |k: usize| j - k as f64;
    let mut z = CMatrix::zeros(dim, dim);
    let mut plus = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        z[(k, k)] = c(m(k));
        if k > 0 {
            // <m+1| J+ |m> with |m> = basis k and |m+1> = basis k-1
            let mk = m(k);
            plus[(k - 1, k)] = c((j * (j + 1.0) - mk * (mk + 1.0)).sqrt());
        }
    }
    let minus = plus.adjoint();
    let x = (&plus + &minus) * c(0.5);
    let y = (&plus - &minus) * C64::new(0.0, -0.5);
    Ok(SpinOperators { j, x, y, z })
}
