//! Target models, gate lists and pulse lowering.

mod gates;
mod lower;
mod models;

pub use gates::{optimize_zz, planar_rotation, trotterize, zz_unitary, Gate, GateList, ZzOptimization};
pub use lower::{compile_qtm, compile_to_pulses, ideal_unitary, CompileReport, CompiledSchedule, LevelEncoding};
pub use models::{exact_propagator, QtmModel, TargetModel, TimModel};
