use std::f64::consts::PI;

use serde::Serialize;

use crate::dynamics::{DensityMatrix, HardwareConfig, PulseEvent, PulseSchedule, RwaEvolver, ScheduleBuilder};
use crate::Result;

/// Coherence waits are this many coherence times long.
pub const PURIFICATION_WAIT_T2: f64 = 2.5;

/// Populations of the first `levels` qudit levels, shifted so the smallest
/// is zero and rescaled to unit sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectivePopulations(pub Vec<f64>);

pub fn effective_populations(rho: &DensityMatrix, computational: &[usize], levels: usize) -> EffectivePopulations {
    let p: Vec<f64> = computational.iter().take(levels).map(|&k| rho.population(k)).collect();
    let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let sum: f64 = p.iter().map(|v| v - min).sum();
    EffectivePopulations(
        p.iter()
            .map(|v| if sum > 0.0 { (v - min) / sum } else { 0.0 })
            .collect(),
    )
}

/// Drives `f_η` so that levels `η-1` and `η` end up equally populated.
///
/// The pulse axis is aligned with any coherence already present on the
/// pair, so that coherence is left alone, and the length starts at a π/2
/// rotation and is refined by a secant search on the population imbalance.
fn equalize(evolver: &RwaEvolver<'_>, rho: &DensityMatrix, hw: &HardwareConfig, eta: usize) -> Result<DensityMatrix> {
    let q = evolver.system().levels.computational;
    let (a, b) = (q[eta - 1], q[eta]);
    let imbalance = |r: &DensityMatrix| r.population(a) - r.population(b);
    if imbalance(rho).abs() < 1e-15 {
        return Ok(rho.clone());
    }
    let coh = rho.coherence(a, b);
    // a coherence ∝ -i e^{iφ} lies on the rotation axis of phase φ
    let phase = if coh.norm() > 1e-14 { coh.arg() + PI / 2.0 } else { 0.0 };
    let mut builder = ScheduleBuilder::new(hw);
    builder.rotation(eta, PI / 2.0, phase)?;
    let nominal: PulseEvent = builder.build().pulses[0];
    let play = |duration: f64| -> Result<DensityMatrix> {
        let p = PulseEvent {
            duration_us: duration,
            ..nominal
        };
        evolver.evolve(rho, &PulseSchedule::new(vec![p]))
    };
    let (mut x0, mut x1) = (nominal.duration_us, nominal.duration_us * 1.01);
    let (mut f0, mut f1) = (imbalance(&play(x0)?), imbalance(&play(x1)?));
    for _ in 0..60 {
        if f1 == f0 || f1.abs() < 1e-15 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        x0 = x1;
        f0 = f1;
        x1 = x2.clamp(0.5 * nominal.duration_us, 1.5 * nominal.duration_us);
        f1 = imbalance(&play(x1)?);
    }
    play(x1)
}

fn coherence_wait(evolver: &RwaEvolver<'_>, rho: &DensityMatrix, eta: usize) -> Result<DensityMatrix> {
    let q = evolver.system().levels.computational;
    let gamma = evolver.dephasing().rate(q[eta - 1], q[eta]);
    if gamma <= 0.0 {
        return Ok(rho.clone());
    }
    evolver.free_decay(rho, PURIFICATION_WAIT_T2 / gamma)
}

/// Equalizes `|1>` and `|2>` with a π/2 pulse on f2 and waits 2.5 T2 for
/// the created coherence to decay.
pub fn purify_qtm(evolver: &RwaEvolver<'_>, rho: &DensityMatrix, hw: &HardwareConfig) -> Result<DensityMatrix> {
    let equal = equalize(evolver, rho, hw, 2)?;
    coherence_wait(evolver, &equal, 2)
}

/// π on f3, then the f2 equalizing pulse and the coherence wait.
pub fn purify_tim(evolver: &RwaEvolver<'_>, rho: &DensityMatrix, hw: &HardwareConfig) -> Result<DensityMatrix> {
    let mut builder = ScheduleBuilder::new(hw);
    builder.rotation(3, PI, 0.0)?;
    let swapped = evolver.evolve(rho, &builder.build())?;
    purify_qtm(evolver, &swapped, hw)
}
