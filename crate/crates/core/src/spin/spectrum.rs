use serde::Serialize;

use crate::spin::thermal::thermal_populations;
use crate::spin::SpinSystem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LineshapeKind {
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lineshape {
    pub kind: LineshapeKind,
    pub fwhm_mhz: f64,
}

impl Default for Lineshape {
    fn default() -> Self {
        Self {
            kind: LineshapeKind::Gaussian,
            fwhm_mhz: 0.5,
        }
    }
}

impl Lineshape {
    /// Unit-area profile evaluated at offset `x` (MHz) from the line center.
    pub fn profile(&self, x: f64) -> f64 {
        match self.kind {
            LineshapeKind::Gaussian => {
                let sigma = self.fwhm_mhz / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
                (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }
}

/// One stick of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralLine {
    pub freq_mhz: f64,
    /// `|d|² ΔP` (MHz²/T², population-difference weighted).
    pub weight: f64,
    pub lower: usize,
    pub upper: usize,
    /// Computational transition index, when the line is one of f1..f3.
    pub eta: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub step_mhz: f64,
}

impl FrequencyGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step_mhz > 0.0) || !(self.stop_mhz > self.start_mhz) {
            return Err(Error::InvalidParameter(format!("bad frequency grid {self:?}")));
        }
        let n = ((self.stop_mhz - self.start_mhz) / self.step_mhz).floor() as usize + 1;
        Ok((0..n).map(|k| self.start_mhz + k as f64 * self.step_mhz).collect())
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumCurve {
    pub freq_mhz: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub lineshape: Lineshape,
    /// Sticks with nonzero weight, ascending in frequency.
    pub lines: Vec<SpectralLine>,
}

/// Every Δm_I = ±1 line within each m_S manifold with its thermal weight.
pub fn spectral_lines(system: &SpinSystem, temperature: f64) -> Result<Vec<SpectralLine>> {
    let pops = thermal_populations(&system.eigen.energies, temperature)?;
    let labels = &system.levels.labels;
    let mut lines = Vec::new();
    for a in 0..labels.len() {
        for b in (a + 1)..labels.len() {
            let (la, lb) = (labels[a], labels[b]);
            if la.m_s != lb.m_s || ((la.m_i - lb.m_i).abs() - 1.0).abs() > 1e-9 {
                continue;
            }
            // eigen indices ascend in energy, so a is the lower level
            let weight = system.drive[(b, a)].norm_sqr() * (pops[a] - pops[b]);
            if weight <= 0.0 {
                continue;
            }
            let eta = system
                .levels
                .transitions
                .iter()
                .find(|t| t.lower == a && t.upper == b)
                .map(|t| t.eta);
            lines.push(SpectralLine {
                freq_mhz: system.eigen.energies[b] - system.eigen.energies[a],
                weight,
                lower: a,
                upper: b,
                eta,
            });
        }
    }
    lines.sort_by(|x, y| x.freq_mhz.total_cmp(&y.freq_mhz));
    Ok(lines)
}

/// Stick spectrum convolved with the lineshape on `grid`.
pub fn simulate_spectrum(
    system: &SpinSystem,
    temperature: f64,
    lineshape: Lineshape,
    grid: FrequencyGrid,
) -> Result<SpectrumCurve> {
    if !(lineshape.fwhm_mhz > 0.0) {
        return Err(Error::InvalidParameter("lineshape FWHM must be positive".into()));
    }
    let lines = spectral_lines(system, temperature)?;
    let freq_mhz = grid.points()?;
    let amplitude = freq_mhz
        .iter()
        .map(|&f| lines.iter().map(|l| l.weight * lineshape.profile(f - l.freq_mhz)).sum())
        .collect();
    Ok(SpectrumCurve {
        freq_mhz,
        amplitude,
        lineshape,
        lines,
    })
}
