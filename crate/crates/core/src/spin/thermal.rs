use crate::dynamics::DensityMatrix;
use crate::spin::hamiltonian::EigenSystem;
use crate::spin::params::H_OVER_KB_K_PER_MHZ;
use crate::{Error, Result};

/// Boltzmann populations for energies in MHz at `temperature` kelvin.
/// An infinite temperature gives the uniform distribution.
pub fn thermal_populations(energies: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let n = energies.len();
    if temperature.is_infinite() {
        return Ok(vec![1.0 / n as f64; n]);
    }
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let beta = H_OVER_KB_K_PER_MHZ / temperature;
    let weights: Vec<f64> = energies.iter().map(|&e| (-(e - e_min) * beta).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Thermal density matrix, diagonal in the eigenbasis.
pub fn thermal_state(eig: &EigenSystem, temperature: f64) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_populations(&thermal_populations(
        &eig.energies,
        temperature,
    )?))
}
