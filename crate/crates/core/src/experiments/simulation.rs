use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiler::{
    compile_qtm, compile_to_pulses, exact_propagator, optimize_zz, trotterize, LevelEncoding, QtmModel, TimModel,
};
use crate::dynamics::{ensemble_average, DensityMatrix, DephasingModel, EnsembleConfig, PulseSchedule, RwaEvolver};
use crate::experiments::purification::{purify_qtm, purify_tim};
use crate::experiments::readout::{read_populations, Anchor, PopulationReadout, ReadoutMode};
use crate::experiments::setup::Setup;
use crate::linalg::CMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Compiled pulses, no dephasing, nominal drive.
    Ideal,
    /// Compiled pulses with the dephasing model.
    Lindblad,
    /// As `Lindblad`, averaged over drive-amplitude spread.
    LindbladEnsemble,
    /// Exact target propagator on the prepared state; no pulses.
    ExactTarget,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Ideal => "ideal",
            Backend::Lindblad => "lindblad",
            Backend::LindbladEnsemble => "lindblad-ensemble",
            Backend::ExactTarget => "exact-target",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Thermal state after the purification sequence.
    Purified,
    /// `|0>` exactly.
    Pure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub backend: Backend,
    pub ensemble: EnsembleConfig,
    pub readout: ReadoutMode,
    pub initial: InitialState,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Ideal,
            ensemble: EnsembleConfig::default(),
            readout: ReadoutMode::Direct,
            initial: InitialState::Purified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservablePoint {
    pub t_us: f64,
    /// `2πEt` for tunneling, `2πbt` for the Ising model.
    pub scaled_time: f64,
    pub readout: PopulationReadout,
    pub sz: f64,
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRun {
    pub model: String,
    pub trotter_steps: Option<usize>,
    pub backend: Backend,
    pub anchor: Anchor,
    /// Prepared populations of the encoded levels (before normalization).
    pub initial_populations: Vec<f64>,
    pub points: Vec<ObservablePoint>,
}

impl SimulationRun {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_us).collect()
    }

    pub fn sz(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.sz).collect()
    }

    pub fn correlation(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.correlation).collect()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "time grid must be non-empty, non-negative and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn prepare(
    setup: &Setup,
    options: &SimulationOptions,
    purify: fn(&RwaEvolver<'_>, &DensityMatrix, &crate::dynamics::HardwareConfig) -> Result<DensityMatrix>,
) -> Result<DensityMatrix> {
    let mut rho = match options.initial {
        InitialState::Pure => DensityMatrix::pure(setup.system.dim(), setup.computational()[0]),
        InitialState::Purified => purify(&setup.evolver()?, &setup.system.thermal_state()?, &setup.hardware)?,
    };
    rho.time_us = 0.0;
    Ok(rho)
}

/// Evolves `rho` through each schedule and reads it out, for every backend
/// that plays pulses. Element 0 of `schedules` is the `t = 0` reference.
fn play(
    setup: &Setup,
    rho: &DensityMatrix,
    schedules: &[PulseSchedule],
    options: &SimulationOptions,
) -> Result<Vec<PopulationReadout>> {
    let ideal = setup.ideal_dephasing();
    let dephasing: &DephasingModel = if options.backend == Backend::Ideal {
        &ideal
    } else {
        &setup.dephasing
    };
    let evolver = RwaEvolver::new(&setup.system, dephasing)?;
    let readout = |r: &DensityMatrix| read_populations(r, &setup.system, &setup.dephasing, options.readout);
    if options.backend == Backend::LindbladEnsemble {
        let flat: Vec<f64> = ensemble_average(&options.ensemble, |scale| {
            let mut out = Vec::with_capacity(3 * schedules.len());
            for s in schedules {
                let r = readout(&evolver.evolve(rho, &s.scaled_amplitudes(scale))?)?;
                out.extend_from_slice(&r.delta_p);
            }
            Ok(out)
        })?;
        let scale = readout(rho)?.scale;
        return Ok(flat
            .chunks(3)
            .map(|c| PopulationReadout {
                delta_p: [c[0], c[1], c[2]],
                scale,
            })
            .collect());
    }
    schedules
        .par_iter()
        .map(|s| readout(&evolver.evolve(rho, s)?))
        .collect()
}

/// Applies a target unitary to the encoded block of `rho` and reads it out.
fn exact_readout(
    setup: &Setup,
    rho: &DensityMatrix,
    u: &CMatrix,
    options: &SimulationOptions,
) -> Result<PopulationReadout> {
    let q = setup.computational();
    let d = u.nrows();
    let block = CMatrix::from_fn(d, d, |j, k| rho.matrix[(q[j], q[k])]);
    let evolved = u * block * u.adjoint();
    let mut out = rho.clone();
    for j in 0..d {
        for k in 0..d {
            out.matrix[(q[j], q[k])] = evolved[(j, k)];
        }
    }
    read_populations(&out, &setup.system, &setup.dephasing, options.readout)
}

/// Tunneling of a spin 1 from `M = +1`, `⟨S_z⟩ = P0 - P2`.
pub fn run_qtm_simulation(
    setup: &Setup,
    model: &QtmModel,
    times_us: &[f64],
    options: &SimulationOptions,
) -> Result<SimulationRun> {
    check_times(times_us)?;
    model.validate()?;
    let rho = prepare(setup, options, purify_qtm)?;
    let mut grid = vec![0.0];
    grid.extend_from_slice(times_us);
    let readouts: Vec<PopulationReadout> = if options.backend == Backend::ExactTarget {
        grid.iter()
            .map(|&t| exact_readout(setup, &rho, &exact_propagator(model, t)?, options))
            .collect::<Result<_>>()?
    } else {
        let schedules = grid
            .iter()
            .map(|&t| Ok(compile_qtm(model, t, 0, &setup.hardware)?.schedule))
            .collect::<Result<Vec<_>>>()?;
        play(setup, &rho, &schedules, options)?
    };
    let anchor = Anchor::magnetization(&readouts[0])?;
    let points = times_us
        .iter()
        .zip(&readouts[1..])
        .map(|(&t, r)| ObservablePoint {
            t_us: t,
            scaled_time: 2.0 * PI * model.e_mhz * t,
            readout: *r,
            sz: anchor.qtm_sz(r),
            correlation: None,
        })
        .collect();
    let q = setup.computational();
    Ok(SimulationRun {
        model: "qtm".into(),
        trotter_steps: None,
        backend: options.backend,
        anchor,
        initial_populations: q.iter().take(3).map(|&k| rho.population(k)).collect(),
        points,
    })
}

/// Two-spin Ising model through `n` Trotter steps.
pub fn run_tim_simulation(
    setup: &Setup,
    model: &TimModel,
    n: usize,
    times_us: &[f64],
    options: &SimulationOptions,
) -> Result<SimulationRun> {
    check_times(times_us)?;
    model.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("Trotter step count must be at least 1".into()));
    }
    let rho = prepare(setup, options, purify_tim)?;
    let mut grid = vec![0.0];
    grid.extend_from_slice(times_us);
    let readouts: Vec<PopulationReadout> = if options.backend == Backend::ExactTarget {
        grid.iter()
            .map(|&t| exact_readout(setup, &rho, &exact_propagator(model, t)?, options))
            .collect::<Result<_>>()?
    } else {
        let encoding = LevelEncoding::tim();
        let schedules = grid
            .iter()
            .map(|&t| {
                let gates = optimize_zz(&trotterize(model, t, n)?).gates;
                Ok(compile_to_pulses(&gates, &encoding, &setup.hardware)?.schedule)
            })
            .collect::<Result<Vec<_>>>()?;
        play(setup, &rho, &schedules, options)?
    };
    let anchor = Anchor::from_reference(&readouts[0], 4)?;
    let points = times_us
        .iter()
        .zip(&readouts[1..])
        .map(|(&t, r)| {
            let (sz, corr) = anchor.tim_observables(r);
            ObservablePoint {
                t_us: t,
                scaled_time: 2.0 * PI * model.b_mhz * t,
                readout: *r,
                sz,
                correlation: Some(corr),
            }
        })
        .collect();
    let q = setup.computational();
    Ok(SimulationRun {
        model: "tim".into(),
        trotter_steps: Some(n),
        backend: options.backend,
        anchor,
        initial_populations: q.iter().map(|&k| rho.population(k)).collect(),
        points,
    })
}
