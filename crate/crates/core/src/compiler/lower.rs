use std::f64::consts::PI;

use serde::Serialize;

use crate::compiler::gates::{Gate, GateList};
use crate::compiler::models::QtmModel;
use crate::dynamics::{Carrier, HardwareConfig, PulseSchedule, Rotation, ScheduleBuilder};
use crate::linalg::{cis, distance_up_to_phase, identity, unitary_propagator, CMatrix, I};
use crate::{Error, Result};

/// Assignment of target basis states to qudit levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelEncoding {
    pub name: String,
    pub states: Vec<String>,
    pub levels: Vec<usize>,
}

impl LevelEncoding {
    pub fn tim() -> Self {
        Self {
            name: "tim".into(),
            states: ["↑↑", "↑↓", "↓↑", "↓↓"].iter().map(|s| s.to_string()).collect(),
            levels: vec![0, 1, 2, 3],
        }
    }

    pub fn qtm() -> Self {
        Self {
            name: "qtm".into(),
            states: ["M=+1", "M=0", "M=-1"].iter().map(|s| s.to_string()).collect(),
            levels: vec![0, 1, 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    /// Injective and contiguous from `|0>`, at most four levels.
    pub fn validate(&self) -> Result<()> {
        let mut sorted = self.levels.clone();
        sorted.sort_unstable();
        let contiguous = sorted.iter().enumerate().all(|(k, &l)| k == l);
        if !contiguous || self.levels.len() > 4 || self.levels.len() != self.states.len() || self.levels.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "encoding {} is not a contiguous injective map",
                self.name
            )));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.levels.iter().enumerate().all(|(k, &l)| k == l)
    }
}

/// Summary of a lowering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompileReport {
    pub pulse_count: usize,
    pub group_count: usize,
    pub pulses_per_transition: [usize; 3],
    pub total_duration_us: f64,
    /// `max |U_schedule - e^{iχ} U_gates|` on the encoded levels.
    pub unitary_error: f64,
    /// Gate fidelity `|Tr(U_gates^† U_schedule)| / d` on the encoded levels.
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledSchedule {
    pub schedule: PulseSchedule,
    pub report: CompileReport,
}

enum Step {
    Pulses(Vec<Rotation>),
    Frame([f64; 4]),
}

fn unencodable(gate: &Gate, encoding: &LevelEncoding) -> Error {
    Error::Unencodable {
        gate: gate.to_string(),
        encoding: encoding.name.clone(),
    }
}

/// Native pulses for one gate, phases in the frame-free picture.
fn lower_gate(gate: &Gate, encoding: &LevelEncoding) -> Result<Vec<Step>> {
    let qubit_ok = encoding.dim() == 4 && encoding.is_identity();
    match *gate {
        Gate::Rotation { qubit, angle, axis } => lower_gate(
            &Gate::ConditionalRotation {
                qubit,
                angle,
                axis_up: axis,
                axis_down: axis,
            },
            encoding,
        ),
        Gate::ConditionalRotation {
            qubit,
            angle,
            axis_up,
            axis_down,
        } => {
            if !qubit_ok {
                return Err(unencodable(gate, encoding));
            }
            // A qubit axis α maps to pulse phase -α.
            match qubit {
                // f1 pairs ↑↑/↑↓ (qubit 1 ↑), f3 pairs ↓↑/↓↓
                2 => Ok(vec![Step::Pulses(vec![
                    Rotation::new(1, angle, -axis_up),
                    Rotation::new(3, angle, -axis_down),
                ])]),
                // After the f2 swap, f1 pairs ↑↑/↓↑ and f3 pairs ↑↓/↓↓. The
                // swap maps |2> to -|1>, hence the extra π on f1.
                1 => Ok(vec![
                    Step::Pulses(vec![Rotation::new(2, PI, 0.0)]),
                    Step::Pulses(vec![
                        Rotation::new(1, angle, -axis_up + PI),
                        Rotation::new(3, angle, -axis_down),
                    ]),
                    Step::Pulses(vec![Rotation::new(2, PI, PI)]),
                ]),
                _ => Err(unencodable(gate, encoding)),
            }
        }
        Gate::Zz { angle } => {
            if !qubit_ok {
                return Err(unencodable(gate, encoding));
            }
            let q = angle / 4.0;
            Ok(vec![Step::Frame([q, -q, -q, q])])
        }
        Gate::LevelRotation { eta, angle, phase } => {
            if eta == 0 || eta >= encoding.dim() || !encoding.is_identity() {
                return Err(unencodable(gate, encoding));
            }
            Ok(vec![Step::Pulses(vec![Rotation::new(eta, angle, phase)])])
        }
        Gate::Swap { eta } => lower_gate(
            &Gate::LevelRotation {
                eta,
                angle: PI,
                phase: 0.0,
            },
            encoding,
        ),
    }
}

/// Lowers a gate list to pulses.
///
/// Diagonal gates never produce pulses: they advance per-level frame phases
/// `λ`, the schedule then realizes `diag(e^{-iλ}) · U_pulses`, and each later
/// rotation on `(a, b)` is emitted with phase `φ + λ_a - λ_b`.
pub fn compile_to_pulses(
    gates: &GateList,
    encoding: &LevelEncoding,
    hardware: &HardwareConfig,
) -> Result<CompiledSchedule> {
    encoding.validate()?;
    if gates.dim != encoding.dim() {
        return Err(Error::InvalidParameter(format!(
            "gate list acts on {} levels, encoding {} has {}",
            gates.dim,
            encoding.name,
            encoding.dim()
        )));
    }
    let mut lambda = [0.0; 4];
    let mut builder = ScheduleBuilder::new(hardware);
    for gate in &gates.gates {
        for step in lower_gate(gate, encoding)? {
            match step {
                Step::Frame(chi) => lambda.iter_mut().zip(chi).for_each(|(l, x)| *l += x),
                Step::Pulses(rots) => {
                    let framed: Vec<Rotation> = rots
                        .iter()
                        .map(|r| Rotation::new(r.eta, r.theta, r.phase + lambda[r.eta - 1] - lambda[r.eta]))
                        .collect();
                    builder.parallel(&framed)?;
                }
            }
        }
    }
    let mut schedule = builder.build();
    schedule.frame_phases = lambda.to_vec();

    let dim = encoding.dim();
    let played = ideal_unitary(&schedule, hardware)?;
    let restricted = CMatrix::from_fn(dim, dim, |j, k| played[(encoding.levels[j], encoding.levels[k])]);
    let target = gates.composite()?;
    let unitary_error = distance_up_to_phase(&restricted, &target);
    let fidelity = (target.adjoint() * &restricted).trace().norm() / dim as f64;
    let report = CompileReport {
        pulse_count: schedule.len(),
        group_count: schedule.group_count(),
        pulses_per_transition: [schedule.count_on(1), schedule.count_on(2), schedule.count_on(3)],
        total_duration_us: schedule.end_us,
        unitary_error,
        fidelity,
    };
    Ok(CompiledSchedule { schedule, report })
}

/// Ideal rotating-frame playback of a schedule on qudit levels `|0>..|3>`,
/// frame phases included. Rotation angles come from pulse durations and
/// the hardware Rabi rates, not from the recorded nominal angles.
pub fn ideal_unitary(schedule: &PulseSchedule, hardware: &HardwareConfig) -> Result<CMatrix> {
    let mut edges = vec![0.0, schedule.end_us];
    for p in &schedule.pulses {
        edges.push(p.start_us);
        edges.push(p.end_us());
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut u = identity(4);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let mut h = CMatrix::zeros(4, 4);
        for p in schedule.pulses.iter().filter(|p| p.is_active(mid)) {
            let eta = match p.carrier {
                Carrier::Transition(eta) if (1..=3).contains(&eta) => eta,
                _ => return Err(Error::UnmatchedCarrier { freq_mhz: f64::NAN }),
            };
            let rabi = hardware.rabi_mhz[eta - 1] * p.amplitude_t / hardware.amplitude(eta)?;
            let el = I * cis(-p.phase_rad) * (0.5 * rabi);
            h[(eta, eta - 1)] += el;
            h[(eta - 1, eta)] += el.conj();
        }
        u = unitary_propagator(&h, b - a) * u;
    }
    let mut frame = identity(4);
    for (k, lam) in schedule.frame_phases.iter().enumerate().take(4) {
        frame[(k, k)] = cis(-lam);
    }
    Ok(frame * u)
}

/// Tunneling sequence from `|M=+1>`: a rotation on f1 by `4πEt`, then a π
/// swap on f2. Ideal playback gives `P0 = cos²(2πEt)`, `P2 = sin²(2πEt)`.
pub fn compile_qtm(
    model: &QtmModel,
    t_us: f64,
    initial_level: usize,
    hardware: &HardwareConfig,
) -> Result<CompiledSchedule> {
    model.validate()?;
    if model.dim() != 3 {
        return Err(Error::Unencodable {
            gate: format!("tunneling of S = {}", model.s),
            encoding: "qtm".into(),
        });
    }
    if initial_level != 0 {
        return Err(Error::InvalidParameter(format!(
            "the tunneling sequence assumes the system starts in |0>, not |{initial_level}>"
        )));
    }
    if !(t_us >= 0.0) {
        return Err(Error::InvalidParameter(format!("time {t_us} must be non-negative")));
    }
    let theta = 4.0 * PI * model.e_mhz * t_us;
    let gates = GateList::new(
        3,
        vec![
            Gate::LevelRotation {
                eta: 1,
                angle: theta,
                phase: 0.0,
            },
            Gate::Swap { eta: 2 },
        ],
    )?;
    let mut compiled = compile_to_pulses(&gates, &LevelEncoding::qtm(), hardware)?;
    // the gate list is checked against the sequence, not the target propagator
    compiled.schedule.frame_phases.clear();
    Ok(compiled)
}
