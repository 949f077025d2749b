//! Virtual experiments on the simulated hardware.

mod calibration;
mod fitting;
mod purification;
mod readout;
mod setup;
mod simulation;

pub use calibration::{
    calibrate_pulses, decay_grid, mq_signal, rabi_grid, run_mq_coherence, run_rabi, run_t1, run_t2_hahn,
    CalibrationTrace,
};
pub use fitting::{fit_damped_cosine, fit_exponential, DecayFit, FitKind};
pub use purification::{effective_populations, purify_qtm, purify_tim, EffectivePopulations, PURIFICATION_WAIT_T2};
pub use readout::{read_populations, Anchor, PopulationReadout, ReadoutMode};
pub use setup::Setup;
pub use simulation::{
    run_qtm_simulation, run_tim_simulation, Backend, InitialState, ObservablePoint, SimulationOptions, SimulationRun,
};
