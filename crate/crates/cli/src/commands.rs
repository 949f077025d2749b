use std::f64::consts::PI;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};
use spinqudit::compiler::{
    compile_qtm, compile_to_pulses, optimize_zz, trotterize, CompiledSchedule, LevelEncoding, TimModel,
};
use spinqudit::dynamics::{CoherenceTimes, DephasingModel};
use spinqudit::experiments::{
    decay_grid, fit_damped_cosine, rabi_grid, run_mq_coherence, run_qtm_simulation, run_rabi, run_t1, run_t2_hahn,
    run_tim_simulation, Backend, CalibrationTrace, InitialState, Setup, SimulationOptions, SimulationRun,
};
use spinqudit::spin::{
    fine_tune_field, simulate_spectrum, FrequencyGrid, Lineshape, LineshapeKind, SpinSystem, REFERENCE_FREQUENCIES_MHZ,
};

use crate::config::{linear_grid, tim_times, RunConfig};
use crate::error::CliError;
use crate::output::{num, Artifact, Csv};

/// Minimum gate fidelity every emitted schedule must reach.
pub const FIDELITY_FLOOR: f64 = 1.0 - 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    Rabi,
    T1,
    T2,
    Mq2,
    Mq3,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Qtm,
    Tim,
}

/// What a command produced. Fit failures do not abort calibration.
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub fit_failures: usize,
}

impl Outcome {
    fn complete(artifacts: Vec<Artifact>) -> Self {
        Self {
            artifacts,
            fit_failures: 0,
        }
    }
}

fn setup(cfg: &RunConfig, tesla: f64) -> Result<Setup, CliError> {
    let params = cfg.params(tesla);
    let s = if cfg.drive.calibrate_durations {
        Setup::new(params, cfg.dephasing.clone(), cfg.drive.b1_tesla)?
    } else {
        Setup::with_nominal_hardware(params, cfg.dephasing.clone(), cfg.drive.b1_tesla)?
    };
    Ok(s)
}

fn relative(got: f64, want: f64) -> f64 {
    (got - want) / want
}

pub fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let block = RunConfig::require(&cfg.spectrum, "spectrum")?;
    let params = cfg.params(cfg.field.spectrum_tesla);
    let system = SpinSystem::new(params.clone())?;
    let temperature = block.temperature_k.unwrap_or(params.temperature);
    let lineshape = Lineshape {
        kind: LineshapeKind::Gaussian,
        fwhm_mhz: block.fwhm_mhz,
    };
    let grid = FrequencyGrid {
        start_mhz: block.start_mhz,
        stop_mhz: block.stop_mhz,
        step_mhz: block.step_mhz,
    };
    let curve = simulate_spectrum(&system, temperature, lineshape, grid)?;
    if curve.lines.is_empty() {
        eprintln!("warning: no thermal population contrast at {temperature} K; the spectrum is empty");
    }

    let mut trace = Csv::new(&["freq_mhz", "amplitude"]);
    for (f, a) in curve.freq_mhz.iter().zip(&curve.amplitude) {
        trace.numbers(&[*f, *a]);
    }
    let mut peaks = Csv::new(&[
        "transition",
        "freq_mhz",
        "weight",
        "fwhm_mhz",
        "reference_mhz",
        "relative_error",
    ]);
    for line in &curve.lines {
        let (label, reference, err) = match line.eta {
            Some(eta) => {
                let p = REFERENCE_FREQUENCIES_MHZ[eta - 1];
                (format!("f{eta}"), num(p), num(relative(line.freq_mhz, p)))
            }
            None => ("-".to_string(), String::new(), String::new()),
        };
        peaks.row(vec![
            label,
            num(line.freq_mhz),
            num(line.weight),
            num(block.fwhm_mhz),
            reference,
            err,
        ]);
    }

    let f = system.frequencies();
    let errors = [0, 1, 2].map(|k| relative(f[k], REFERENCE_FREQUENCIES_MHZ[k]));
    let rabi_per_tesla = [1, 2, 3].map(|eta| system.levels.transition(eta).map(|t| t.rabi_mhz(1.0)));
    let mut summary = json!({
        "field_tesla": params.b0,
        "temperature_k": temperature,
        "frequencies_mhz": f,
        "reference_mhz": REFERENCE_FREQUENCIES_MHZ,
        "relative_errors": errors,
        "rabi_mhz_per_tesla": rabi_per_tesla,
        "line_count": curve.lines.len(),
    });
    if block.fine_tune_window > 0.0 {
        let tune = fine_tune_field(&params, REFERENCE_FREQUENCIES_MHZ, block.fine_tune_window)?;
        summary["fine_tune"] = json!({
            "window": block.fine_tune_window,
            "field_tesla": tune.b0,
            "frequencies_mhz": tune.frequencies,
            "relative_errors": tune.relative_errors,
        });
    }
    Ok(Outcome::complete(vec![
        trace.into_artifact("spectrum.csv"),
        peaks.into_artifact("peaks.csv"),
        Artifact::json("spectrum_summary.json", &summary),
    ]))
}

fn trace_csv(trace: &CalibrationTrace) -> Artifact {
    let mut csv = Csv::new(&["x_us", "signal", "fit"]);
    for (&x, &y) in trace.x_us.iter().zip(&trace.signal) {
        csv.numbers(&[x, y, trace.fit.evaluate(x)]);
    }
    let name = match trace.protocol.as_str() {
        "mq2" | "mq3" => format!("calib_{}.csv", trace.protocol),
        p => format!("calib_{p}_f{}.csv", trace.eta),
    };
    csv.into_artifact(&name)
}

#[derive(Serialize)]
struct CalibrationEntry {
    protocol: String,
    eta: usize,
    /// Configured time constant (decays) or matrix-element Rabi rate.
    expected: f64,
    fitted: Option<f64>,
    relative_error: Option<f64>,
    residual_norm: Option<f64>,
    error: Option<String>,
}

pub fn calibrate(cfg: &RunConfig, which: Protocol) -> Result<Outcome, CliError> {
    let block = RunConfig::require(&cfg.calibration, "calibration")?;
    let setup = setup(cfg, cfg.field.calibration_tesla)?;
    let sys = &setup.system;
    let times = &cfg.dephasing;
    let wants = |p: Protocol| which == Protocol::All || which == p;

    // (protocol, eta, expected value, run)
    type Job<'a> = (
        &'static str,
        usize,
        f64,
        Box<dyn Fn() -> spinqudit::Result<CalibrationTrace> + 'a>,
    );
    let mut jobs: Vec<Job<'_>> = Vec::new();
    if wants(Protocol::Rabi) {
        for eta in 1..=3 {
            let expected = sys.transition(eta)?.rabi_mhz(cfg.drive.b1_tesla);
            let grid = rabi_grid(sys, eta, cfg.drive.b1_tesla, block.rabi_periods, block.rabi_points)?;
            let deph = &setup.dephasing;
            jobs.push((
                "rabi",
                eta,
                expected,
                Box::new(move || run_rabi(sys, deph, eta, cfg.drive.b1_tesla, &grid, &cfg.ensemble)),
            ));
        }
    }
    if wants(Protocol::T1) {
        // the protocol needs relaxation switched on whatever the simulations use
        let with_t1 = DephasingModel::from_times(
            sys,
            &CoherenceTimes {
                t1_enabled: true,
                ..times.clone()
            },
        )?;
        let grid = decay_grid(times.t1_us, block.decay_spans, block.decay_points);
        let eta = block.t1_transition;
        let hw = &setup.hardware;
        jobs.push((
            "t1",
            eta,
            times.t1_us,
            Box::new(move || run_t1(sys, &with_t1, hw, eta, &grid)),
        ));
    }
    if wants(Protocol::T2) {
        for eta in 1..=3 {
            let half = decay_grid(times.t2_single_us / 2.0, block.decay_spans, block.decay_points);
            let (deph, hw) = (&setup.dephasing, &setup.hardware);
            jobs.push((
                "t2",
                eta,
                times.t2_single_us,
                Box::new(move || run_t2_hahn(sys, deph, hw, eta, &half)),
            ));
        }
    }
    for (p, order, t2) in [
        (Protocol::Mq2, 2, times.t2_double_us),
        (Protocol::Mq3, 3, times.t2_triple_us),
    ] {
        if wants(p) {
            let grid = decay_grid(t2, block.decay_spans, block.decay_points);
            let (deph, hw) = (&setup.dephasing, &setup.hardware);
            let name = if order == 2 { "mq2" } else { "mq3" };
            jobs.push((
                name,
                1,
                t2,
                Box::new(move || run_mq_coherence(sys, deph, hw, order, &grid)),
            ));
        }
    }

    let mut artifacts = Vec::new();
    let mut entries = Vec::new();
    let mut failures = 0;
    for (protocol, eta, expected, run) in jobs {
        let entry = match run() {
            Ok(trace) => {
                let fitted = if protocol == "rabi" {
                    trace.fit.frequency_mhz
                } else {
                    trace.fit.time_constant_us
                };
                artifacts.push(trace_csv(&trace));
                CalibrationEntry {
                    protocol: protocol.into(),
                    eta,
                    expected,
                    fitted,
                    relative_error: fitted.map(|f| relative(f, expected)),
                    residual_norm: Some(trace.fit.residual_norm),
                    error: None,
                }
            }
            Err(spinqudit::Error::Fit(reason)) => {
                eprintln!("warning: {protocol} on f{eta}: fit failed: {reason}");
                failures += 1;
                CalibrationEntry {
                    protocol: protocol.into(),
                    eta,
                    expected,
                    fitted: None,
                    relative_error: None,
                    residual_norm: None,
                    error: Some(reason),
                }
            }
            Err(e) => return Err(e.into()),
        };
        entries.push(entry);
    }
    let summary = json!({
        "field_tesla": setup.system.params.b0,
        "b1_tesla": cfg.drive.b1_tesla,
        "calibrated_rabi_mhz": setup.hardware.rabi_mhz,
        "results": entries,
    });
    let name = format!("calibration_{which:?}.json").to_lowercase();
    artifacts.push(Artifact::json(name, &summary));
    Ok(Outcome {
        artifacts,
        fit_failures: failures,
    })
}

fn report_json(c: &CompiledSchedule) -> Result<Value, CliError> {
    if !(c.report.fidelity >= FIDELITY_FLOOR) {
        return Err(CliError::Check(format!(
            "compiled schedule reaches fidelity {:.12} only, below {FIDELITY_FLOOR}",
            c.report.fidelity
        )));
    }
    Ok(serde_json::to_value(&c.report).expect("report is serializable"))
}

fn compile_tim_variant(
    model: &TimModel,
    t_us: f64,
    n: usize,
    setup: &Setup,
) -> Result<(CompiledSchedule, Vec<String>), CliError> {
    let gates = optimize_zz(&trotterize(model, t_us, n)?).gates;
    let compiled = compile_to_pulses(&gates, &LevelEncoding::tim(), &setup.hardware)?;
    Ok((compiled, gates.gates.iter().map(|g| g.to_string()).collect()))
}

pub fn compile(cfg: &RunConfig, model: Model) -> Result<Outcome, CliError> {
    let block = RunConfig::require(&cfg.compile, "compile")?;
    match model {
        Model::Qtm => {
            let q = RunConfig::require(&cfg.qtm, "qtm")?;
            let setup = setup(cfg, cfg.field.qtm_tesla)?;
            let compiled = compile_qtm(&cfg.qtm_model(q), block.qtm_time_us, 0, &setup.hardware)?;
            let report = json!({
                "model": "qtm",
                "d_mhz": q.d_mhz,
                "e_mhz": q.e_mhz,
                "t_us": block.qtm_time_us,
                "rotation_angle_rad": 4.0 * PI * q.e_mhz * block.qtm_time_us,
                "report": report_json(&compiled)?,
            });
            Ok(Outcome::complete(vec![
                Artifact::text("schedule_qtm.txt", compiled.schedule.to_text()),
                Artifact::json("compile_qtm.json", &report),
            ]))
        }
        Model::Tim => {
            let t = RunConfig::require(&cfg.tim, "tim")?;
            let setup = setup(cfg, cfg.field.tim_tesla)?;
            let m = cfg.tim_model(t);
            let t_us = block.tim_bt / (2.0 * PI * m.b_mhz.abs());
            let n = t.trotter_steps;
            let (coupled, coupled_gates) = compile_tim_variant(&m, t_us, n, &setup)?;
            let (free, free_gates) = compile_tim_variant(&TimModel { j_mhz: 0.0, ..m }, t_us, n, &setup)?;
            let report = json!({
                "model": "tim",
                "b_mhz": m.b_mhz,
                "j_mhz": m.j_mhz,
                "trotter_steps": n,
                "bt": block.tim_bt,
                "t_us": t_us,
                "coupled": { "gates": coupled_gates, "report": report_json(&coupled)? },
                "uncoupled": { "gates": free_gates, "report": report_json(&free)? },
                "equal_pulse_counts": coupled.report.pulse_count == free.report.pulse_count,
            });
            Ok(Outcome::complete(vec![
                Artifact::text("schedule_tim.txt", coupled.schedule.to_text()),
                Artifact::text("schedule_tim_j0.txt", free.schedule.to_text()),
                Artifact::json("compile_tim.json", &report),
            ]))
        }
    }
}

fn options(cfg: &RunConfig, backend: Backend) -> SimulationOptions {
    SimulationOptions {
        backend,
        ensemble: cfg.ensemble,
        readout: cfg.readout_mode(),
        initial: InitialState::Purified,
    }
}

fn effective(p: &[f64]) -> Vec<f64> {
    let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let sum: f64 = p.iter().map(|v| v - min).sum();
    p.iter().map(|v| (v - min) / sum).collect()
}

fn fit_json(t: &[f64], y: &[f64]) -> Value {
    match fit_damped_cosine(t, y) {
        Ok(f) => json!({
            "frequency_mhz": f.frequency_mhz,
            "time_constant_us": f.time_constant_us,
            "amplitude": f.amplitude,
            "offset": f.offset,
            "residual_norm": f.residual_norm,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn run_json(cfg: &RunConfig, run: &SimulationRun) -> Value {
    json!({
        "backend": run.backend.name(),
        "seed": cfg.ensemble.seed,
        "sigma_rel": cfg.ensemble.sigma_rel,
        "samples": cfg.ensemble.samples,
        "readout": cfg.readout.mode,
        "kappa": run.anchor.kappa,
        "initial_populations": run.initial_populations,
        "effective_populations": effective(&run.initial_populations),
    })
}

pub fn simulate(cfg: &RunConfig, model: Model) -> Result<Outcome, CliError> {
    match model {
        Model::Qtm => {
            let q = RunConfig::require(&cfg.qtm, "qtm")?;
            let setup = setup(cfg, cfg.field.qtm_tesla)?;
            let m = cfg.qtm_model(q);
            let times = linear_grid(q.t_max_us, q.points);
            let run = run_qtm_simulation(&setup, &m, &times, &options(cfg, cfg.backend))?;
            let mut raw = Csv::new(&["time_us", "scaled_time", "delta_p1", "delta_p2"]);
            let mut obs = Csv::new(&["time_us", "scaled_time", "sz", "sz_exact"]);
            for p in &run.points {
                raw.numbers(&[p.t_us, p.scaled_time, p.readout.delta_p[0], p.readout.delta_p[1]]);
                obs.numbers(&[p.t_us, p.scaled_time, p.sz, (4.0 * PI * m.e_mhz * p.t_us).cos()]);
            }
            let mut summary = run_json(cfg, &run);
            summary["model"] = json!({ "name": "qtm", "d_mhz": m.d_mhz, "e_mhz": m.e_mhz });
            summary["expected_frequency_mhz"] = json!(2.0 * m.e_mhz);
            summary["sz_fit"] = fit_json(&run.times(), &run.sz());
            Ok(Outcome::complete(vec![
                raw.into_artifact("fig2d.csv"),
                obs.into_artifact("fig2f.csv"),
                Artifact::json("summary_qtm.json", &summary),
            ]))
        }
        Model::Tim => {
            let t = RunConfig::require(&cfg.tim, "tim")?;
            let setup = setup(cfg, cfg.field.tim_tesla)?;
            let m = cfg.tim_model(t);
            let times = tim_times(t);
            let n = t.trotter_steps;
            let run = run_tim_simulation(&setup, &m, n, &times, &options(cfg, cfg.backend))?;
            let exact = run_tim_simulation(&setup, &m, n, &times, &options(cfg, Backend::ExactTarget))?;
            let mut raw = Csv::new(&["time_us", "bt", "delta_p1", "delta_p2", "delta_p3"]);
            let mut obs = Csv::new(&["time_us", "bt", "sz", "corr", "sz_exact", "corr_exact"]);
            let mut worst = 0.0_f64;
            for (p, e) in run.points.iter().zip(&exact.points) {
                let d = p.readout.delta_p;
                raw.numbers(&[p.t_us, p.scaled_time, d[0], d[1], d[2]]);
                let (c, ce) = (p.correlation.unwrap_or(f64::NAN), e.correlation.unwrap_or(f64::NAN));
                obs.numbers(&[p.t_us, p.scaled_time, p.sz, c, e.sz, ce]);
                if p.scaled_time.abs() <= 5.0 + 1e-12 {
                    worst = worst.max((p.sz - e.sz).abs());
                }
            }
            let mut summary = run_json(cfg, &run);
            summary["model"] = json!({ "name": "tim", "b_mhz": m.b_mhz, "j_mhz": m.j_mhz, "trotter_steps": n });
            summary["max_sz_deviation_bt_le_5"] = json!(worst);
            summary["sz_fit"] = fit_json(&run.times(), &run.sz());
            summary["corr_fit"] = fit_json(&run.times(), &run.correlation());
            Ok(Outcome::complete(vec![
                raw.into_artifact("fig3bc.csv"),
                obs.into_artifact("fig4ab.csv"),
                Artifact::json("summary_tim.json", &summary),
            ]))
        }
    }
}
