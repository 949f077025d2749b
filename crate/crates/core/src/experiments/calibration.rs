use std::f64::consts::PI;

use serde::Serialize;

use crate::dynamics::{
    ensemble_average, DensityMatrix, DephasingModel, EnsembleConfig, HardwareConfig, RwaEvolver, ScheduleBuilder,
};
use crate::experiments::fitting::{fit_damped_cosine, fit_exponential, DecayFit};
use crate::spin::SpinSystem;
use crate::{Error, Result};

/// A measured curve and its fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationTrace {
    pub protocol: String,
    pub eta: usize,
    /// Pulse lengths (Rabi) or free-evolution times (decays), μs.
    pub x_us: Vec<f64>,
    pub signal: Vec<f64>,
    pub fit: DecayFit,
}

fn check_grid(x: &[f64], min_points: usize) -> Result<()> {
    if x.len() < min_points {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least {min_points} points"
        )));
    }
    if x[0] < 0.0 || x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "grid must be non-negative and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn check_eta(eta: usize) -> Result<()> {
    if (1..=3).contains(&eta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("no transition f{eta}")))
    }
}

/// Nutation on `f_η`: the population difference `ΔP_η` after a pulse of
/// each length, starting from thermal equilibrium and normalized to the
/// undriven value, fitted with a damped cosine.
pub fn run_rabi(
    system: &SpinSystem,
    dephasing: &DephasingModel,
    eta: usize,
    b1_tesla: f64,
    durations_us: &[f64],
    ensemble: &EnsembleConfig,
) -> Result<CalibrationTrace> {
    check_eta(eta)?;
    check_grid(durations_us, 6)?;
    let evolver = RwaEvolver::new(system, dephasing)?;
    let hw = HardwareConfig::nominal(system, b1_tesla)?;
    let q = system.levels.computational;
    let rho = system.thermal_state()?;
    let reference = rho.population(q[eta - 1]) - rho.population(q[eta]);
    let signal: Vec<f64> = ensemble_average(ensemble, |scale| {
        durations_us
            .iter()
            .map(|&tau| {
                if tau == 0.0 {
                    return Ok(1.0);
                }
                let mut builder = ScheduleBuilder::new(&hw);
                builder.rotation(eta, 1.0, 0.0)?;
                let mut sched = builder.build().scaled_amplitudes(scale);
                sched.pulses[0].duration_us = tau;
                sched.pulses[0].angle_rad = None;
                sched.end_us = tau;
                let out = evolver.evolve(&rho, &sched)?;
                Ok((out.population(q[eta - 1]) - out.population(q[eta])) / reference)
            })
            .collect()
    })?;
    let fit = fit_damped_cosine(durations_us, &signal)?;
    Ok(CalibrationTrace {
        protocol: "rabi".into(),
        eta,
        x_us: durations_us.to_vec(),
        signal,
        fit,
    })
}

/// Evenly spaced pulse lengths covering `periods` nominal Rabi periods.
pub fn rabi_grid(system: &SpinSystem, eta: usize, b1_tesla: f64, periods: f64, points: usize) -> Result<Vec<f64>> {
    let rabi = system.transition(eta)?.rabi_mhz(b1_tesla);
    let stop = periods / rabi;
    Ok((0..points).map(|k| stop * k as f64 / (points - 1) as f64).collect())
}

/// Measures the Rabi rate of every transition with a noise-free nutation
/// experiment and returns hardware calibrated with those rates.
pub fn calibrate_pulses(system: &SpinSystem, b1_tesla: f64) -> Result<HardwareConfig> {
    let ideal = DephasingModel::none(system.dim());
    let mut rates = [0.0; 3];
    for (k, rate) in rates.iter_mut().enumerate() {
        let grid = rabi_grid(system, k + 1, b1_tesla, 3.0, 41)?;
        let trace = run_rabi(system, &ideal, k + 1, b1_tesla, &grid, &EnsembleConfig::single())?;
        *rate = trace
            .fit
            .frequency_mhz
            .ok_or_else(|| Error::Fit("Rabi fit returned no frequency".into()))?;
    }
    Ok(HardwareConfig::nominal(system, b1_tesla)?.with_rabi(rates))
}

/// Population recovery: a π pulse on a neighbouring transition displaces
/// `ΔP_η` from equilibrium; the surplus is followed versus delay.
pub fn run_t1(
    system: &SpinSystem,
    dephasing: &DephasingModel,
    hw: &HardwareConfig,
    eta: usize,
    delays_us: &[f64],
) -> Result<CalibrationTrace> {
    check_eta(eta)?;
    check_grid(delays_us, 3)?;
    let evolver = RwaEvolver::new(system, dephasing)?;
    let q = system.levels.computational;
    let rho = system.thermal_state()?;
    let neighbour = if eta == 1 { 2 } else { eta - 1 };
    let mut builder = ScheduleBuilder::new(hw);
    builder.rotation(neighbour, PI, 0.0)?;
    let kicked = evolver.evolve(&rho, &builder.build())?;
    let dp = |r: &DensityMatrix| r.population(q[eta - 1]) - r.population(q[eta]);
    let eq = &dephasing.equilibrium;
    let baseline = eq[q[eta - 1]] - eq[q[eta]];
    let signal = delays_us
        .iter()
        .map(|&tau| Ok(dp(&evolver.free_decay(&kicked, tau)?) - baseline))
        .collect::<Result<Vec<f64>>>()?;
    let fit = fit_exponential(delays_us, &signal)?;
    Ok(CalibrationTrace {
        protocol: "t1".into(),
        eta,
        x_us: delays_us.to_vec(),
        signal,
        fit,
    })
}

/// Hahn echo `(π/2)_η - τ - (π)_η - τ`: the coherence magnitude at the echo,
/// normalized to its value without delay, versus the total time `2τ`.
pub fn run_t2_hahn(
    system: &SpinSystem,
    dephasing: &DephasingModel,
    hw: &HardwareConfig,
    eta: usize,
    half_delays_us: &[f64],
) -> Result<CalibrationTrace> {
    check_eta(eta)?;
    check_grid(half_delays_us, 3)?;
    let evolver = RwaEvolver::new(system, dephasing)?;
    let q = system.levels.computational;
    let rho = system.thermal_state()?;
    let echo = |tau: f64| -> Result<f64> {
        let mut b = ScheduleBuilder::new(hw);
        b.rotation(eta, PI / 2.0, 0.0)?
            .delay(tau)?
            .rotation(eta, PI, 0.0)?
            .delay(tau)?;
        Ok(evolver.evolve(&rho, &b.build())?.coherence(q[eta - 1], q[eta]).norm())
    };
    let reference = echo(0.0)?;
    let signal = half_delays_us
        .iter()
        .map(|&tau| Ok(echo(tau)? / reference))
        .collect::<Result<Vec<f64>>>()?;
    let x: Vec<f64> = half_delays_us.iter().map(|t| 2.0 * t).collect();
    let fit = fit_exponential(&x, &signal)?;
    Ok(CalibrationTrace {
        protocol: "t2".into(),
        eta,
        x_us: x,
        signal,
        fit,
    })
}

/// Multi-quantum coherence of order 2 (`|0>-|2>`) or 3 (`|0>-|3>`).
///
/// `(π/2)_1` makes a single-quantum coherence, π pulses on f2 (and f3)
/// carry it up the ladder, it decays for `τ`, the swaps are undone and a
/// second `(π/2)_1` turns what is left back into a population difference.
/// Signal is `|ΔP1|` normalized to the thermal `ΔP1`.
pub fn run_mq_coherence(
    system: &SpinSystem,
    dephasing: &DephasingModel,
    hw: &HardwareConfig,
    order: usize,
    delays_us: &[f64],
) -> Result<CalibrationTrace> {
    if !(order == 2 || order == 3) {
        return Err(Error::InvalidParameter(format!(
            "coherence order must be 2 or 3, got {order}"
        )));
    }
    check_grid(delays_us, 3)?;
    let signal = mq_signal(system, dephasing, hw, order, delays_us)?;
    let fit = fit_exponential(delays_us, &signal)?;
    Ok(CalibrationTrace {
        protocol: format!("mq{order}"),
        eta: 1,
        x_us: delays_us.to_vec(),
        signal,
        fit,
    })
}

/// Raw multi-quantum signal; order 1 skips the swaps (the single-quantum
/// stimulated echo used as reference).
pub fn mq_signal(
    system: &SpinSystem,
    dephasing: &DephasingModel,
    hw: &HardwareConfig,
    order: usize,
    delays_us: &[f64],
) -> Result<Vec<f64>> {
    let evolver = RwaEvolver::new(system, dephasing)?;
    let q = system.levels.computational;
    let rho = system.thermal_state()?;
    let reference = rho.population(q[0]) - rho.population(q[1]);
    delays_us
        .iter()
        .map(|&tau| {
            let mut b = ScheduleBuilder::new(hw);
            b.rotation(1, PI / 2.0, 0.0)?;
            for eta in 2..=order {
                b.rotation(eta, PI, 0.0)?;
            }
            b.delay(tau)?;
            for eta in (2..=order).rev() {
                b.rotation(eta, PI, PI)?;
            }
            b.rotation(1, PI / 2.0, 0.0)?;
            let out = evolver.evolve(&rho, &b.build())?;
            Ok((out.population(q[0]) - out.population(q[1])).abs() / reference)
        })
        .collect()
}

/// `points` delays evenly spread over `spans` multiples of `t_us`.
pub fn decay_grid(t_us: f64, spans: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| spans * t_us * k as f64 / (points - 1) as f64)
        .collect()
}
