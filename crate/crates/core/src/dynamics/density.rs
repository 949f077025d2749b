use std::f64::consts::PI;

use crate::linalg::{c, cis, eigh, hermiticity_error, CMatrix, C64};
use crate::{Error, Result};

/// Picture in which a density matrix is expressed.
///
/// `Rotating` is the interaction picture with respect to the static
/// Hamiltonian (every level rotates at its own energy), which makes free
/// evolution trivial; `Lab` is the Schrödinger picture. Both are written in
/// the eigenbasis of the static Hamiltonian and share populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Rotating,
    Lab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub matrix: CMatrix,
    pub time_us: f64,
    pub frame: Frame,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix, time_us: f64, frame: Frame) -> Self {
        Self { matrix, time_us, frame }
    }

    /// Diagonal state at `t = 0` in the rotating frame.
    pub fn from_populations(populations: &[f64]) -> Self {
        let n = populations.len();
        let mut m = CMatrix::zeros(n, n);
        for (k, &p) in populations.iter().enumerate() {
            m[(k, k)] = c(p);
        }
        Self::new(m, 0.0, Frame::Rotating)
    }

    pub fn pure(dim: usize, level: usize) -> Self {
        let mut p = vec![0.0; dim];
        p[level] = 1.0;
        Self::from_populations(&p)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.matrix[(k, k)].re).collect()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.matrix[(k, k)].re
    }

    pub fn coherence(&self, j: usize, k: usize) -> C64 {
        self.matrix[(j, k)]
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigh(&self.matrix).0[0]
    }

    /// Largest off-diagonal magnitude among the listed levels.
    pub fn max_coherence(&self, levels: &[usize]) -> f64 {
        let mut worst = 0.0_f64;
        for &j in levels {
            for &k in levels {
                if j != k {
                    worst = worst.max(self.matrix[(j, k)].norm());
                }
            }
        }
        worst
    }

    /// Checks Hermiticity (1e-10), unit trace (1e-9) and positivity (-1e-8).
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - c(1.0)).norm() > 1e-9 {
            return Err(Error::InvalidParameter(format!("density matrix trace is {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::InvalidParameter(format!(
                "density matrix has eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    /// Re-expresses the state in another picture at its own time stamp.
    pub fn to_frame(&self, frame: Frame, energies: &[f64]) -> Self {
        if frame == self.frame {
            return self.clone();
        }
        // lab = e^{-2πi H0 t} rot e^{2πi H0 t}
        let sign = if frame == Frame::Lab { -1.0 } else { 1.0 };
        let t = self.time_us;
        let n = self.dim();
        let m = CMatrix::from_fn(n, n, |j, k| {
            self.matrix[(j, k)] * cis(sign * 2.0 * PI * (energies[j] - energies[k]) * t)
        });
        Self::new(m, t, frame)
    }
}
