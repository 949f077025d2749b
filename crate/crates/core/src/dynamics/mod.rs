//! Density-matrix evolution under pulses and dephasing.

mod density;
mod dephasing;
mod ensemble;
mod lab;
mod pulse;
mod rwa;

pub use density::{DensityMatrix, Frame};
pub use dephasing::{CoherenceTimes, DephasingModel};
pub use ensemble::{ensemble_average, Averageable, EnsembleConfig};
pub use lab::{drive_hamiltonian, evolve_lindblad, evolve_static, DriveCoupling, IntegratorConfig, Trajectory};
pub use pulse::{Carrier, HardwareConfig, PulseEvent, PulseSchedule, Rotation, ScheduleBuilder};
pub use rwa::{free_decay, RwaEvolver, DEFAULT_OFF_RESONANCE_BOUND_MHZ};
