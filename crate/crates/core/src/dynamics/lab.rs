use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::dynamics::{Carrier, DensityMatrix, DephasingModel, Frame, PulseEvent, PulseSchedule};
use crate::linalg::{c, cis, CMatrix, C64, I};
use crate::spin::SpinSystem;
use crate::{Error, Result};

/// Which drive-operator elements the lab-frame integrator keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveCoupling {
    /// Only elements within one electron-spin manifold (nuclear transitions).
    /// Electron-flip elements oscillate at ~10 GHz and would force steps far
    /// below the carrier period for a negligible effect.
    NuclearOnly,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// `None` means `1/(20 f3)`.
    pub max_step_us: Option<f64>,
    pub min_step_us: f64,
    pub max_steps: usize,
    pub coupling: DriveCoupling,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step_us: None,
            min_step_us: 1e-12,
            max_steps: 50_000_000,
            coupling: DriveCoupling::NuclearOnly,
        }
    }
}

/// States sampled along an integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }

    /// CSV with `time_us, P0.., Re/Im` of the requested coherences.
    pub fn to_csv(&self, coherences: &[(usize, usize)]) -> String {
        let dim = self.states.first().map_or(0, |s| s.dim());
        let mut out = String::from("time_us");
        for k in 0..dim {
            let _ = write!(out, ",P{k}");
        }
        for (j, k) in coherences {
            let _ = write!(out, ",Re_rho_{j}_{k},Im_rho_{j}_{k}");
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t:.11e}");
            for p in s.populations() {
                let _ = write!(out, ",{p:.11e}");
            }
            for &(j, k) in coherences {
                let z = s.coherence(j, k);
                let _ = write!(out, ",{:.11e},{:.11e}", z.re, z.im);
            }
            out.push('\n');
        }
        out
    }
}

fn carrier_frequency(system: &SpinSystem, pulse: &PulseEvent) -> Result<f64> {
    match pulse.carrier {
        Carrier::Transition(eta) => Ok(system.transition(eta)?.freq_mhz),
        Carrier::Frequency(f) => Ok(f),
    }
}

/// Lab-frame drive `V Σ B1 sin(2π f t + φ)` in the eigenbasis at absolute
/// time `t_us`, with pulse windows also in absolute time.
pub fn drive_hamiltonian(system: &SpinSystem, t_us: f64, pulses: &[PulseEvent]) -> Result<CMatrix> {
    let mut amp = 0.0;
    for p in pulses {
        if p.is_active(t_us) {
            let f = carrier_frequency(system, p)?;
            amp += p.amplitude_t * (2.0 * PI * f * t_us + p.phase_rad).sin();
        }
    }
    Ok(&system.drive * c(amp))
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct LabRhs<'a> {
    energies: &'a [f64],
    drive: CMatrix,
    tones: Vec<(PulseEvent, f64)>,
    dephasing: &'a DephasingModel,
}

impl LabRhs<'_> {
    /// Interaction-picture derivative; `window` selects which tones are on.
    fn eval(&self, t: f64, y: &CMatrix, window: f64) -> CMatrix {
        let n = y.nrows();
        let mut amp = 0.0;
        for (p, f) in &self.tones {
            if p.is_active(window) {
                amp += p.amplitude_t * (2.0 * PI * f * t + p.phase_rad).sin();
            }
        }
        let mut dy = CMatrix::zeros(n, n);
        if amp != 0.0 {
            let rot: Vec<C64> = self.energies.iter().map(|e| cis(2.0 * PI * e * t)).collect();
            let h = CMatrix::from_fn(n, n, |j, k| self.drive[(j, k)] * rot[j] * rot[k].conj() * amp);
            let hy = &h * y;
            dy = (&hy - hy.adjoint()) * (-2.0 * PI * I);
        }
        add_dissipator(&mut dy, y, self.dephasing);
        dy
    }
}

/// Integrates the master equation with the full sinusoidal drive (no
/// rotating-wave approximation) using adaptive Dormand–Prince 5(4).
///
/// Internally the static Hamiltonian is removed exactly by working in the
/// rotating frame; only the drive is integrated. Pulse times are relative
/// to `rho0.time_us`; samples are taken at `sample_times` (relative, in
/// `[0, end_us]`) and always at the end. States are returned in the input's
/// frame.
pub fn evolve_lindblad(
    system: &SpinSystem,
    rho0: &DensityMatrix,
    schedule: &PulseSchedule,
    dephasing: &DephasingModel,
    sample_times: &[f64],
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    schedule.validate()?;
    dephasing.validate()?;
    let n = system.dim();
    if rho0.dim() != n || dephasing.dim() != n {
        return Err(Error::InvalidParameter(
            "state, dephasing and system dimensions disagree".into(),
        ));
    }
    let energies = system.energies();
    let t0 = rho0.time_us;
    let t_end = t0 + schedule.end_us;
    let hmax = match config.max_step_us {
        Some(h) => h,
        None => 1.0 / (20.0 * system.frequencies()[2]),
    };

    let mut drive = system.drive.clone();
    if config.coupling == DriveCoupling::NuclearOnly {
        let labels = &system.levels.labels;
        for j in 0..n {
            for k in 0..n {
                if labels[j].m_s != labels[k].m_s {
                    drive[(j, k)] = c(0.0);
                }
            }
        }
    }
    let mut tones = Vec::with_capacity(schedule.len());
    for p in &schedule.pulses {
        let mut abs = *p;
        abs.start_us += t0;
        tones.push((abs, carrier_frequency(system, p)?));
    }
    let rhs = LabRhs {
        energies,
        drive,
        tones,
        dephasing,
    };

    let mut stops: Vec<f64> = vec![t0, t_end];
    for (p, _) in &rhs.tones {
        stops.push(p.start_us.clamp(t0, t_end));
        stops.push(p.end_us().clamp(t0, t_end));
    }
    let mut samples: Vec<f64> = Vec::new();
    for &s in sample_times {
        if !(s >= 0.0 && s <= schedule.end_us) {
            return Err(Error::InvalidParameter(format!("sample time {s} outside the schedule")));
        }
        samples.push(t0 + s);
    }
    samples.push(t_end);
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    stops.extend(samples.iter().copied());
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let y0 = rho0.to_frame(Frame::Rotating, energies).matrix;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
    };
    integrate(
        y0,
        &stops,
        &samples,
        hmax,
        config,
        |t, y, w| rhs.eval(t, y, w),
        |t, y| {
            let s = DensityMatrix::new(y.clone(), t, Frame::Rotating).to_frame(rho0.frame, energies);
            traj.times.push(t - t0);
            traj.states.push(s);
        },
    )?;
    Ok(traj)
}

/// Integrates `dρ/dt = -2πi[H, ρ] - Γ∘ρ (- (ρ - ρ_eq)/T1)` for a constant
/// Hamiltonian `h` (MHz) over `t_us`.
pub fn evolve_static(
    h: &CMatrix,
    rho0: &CMatrix,
    dephasing: &DephasingModel,
    t_us: f64,
    config: &IntegratorConfig,
) -> Result<CMatrix> {
    crate::linalg::ensure_hermitian(h, 1e-12)?;
    dephasing.validate()?;
    let n = h.nrows();
    if rho0.nrows() != n || dephasing.dim() != n {
        return Err(Error::InvalidParameter(
            "Hamiltonian, state and dephasing dimensions disagree".into(),
        ));
    }
    if !(t_us > 0.0) {
        return Err(Error::InvalidParameter(format!("time span {t_us} must be positive")));
    }
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-9);
    let hmax = config.max_step_us.unwrap_or(1.0 / (20.0 * scale));
    let rhs = |_t: f64, y: &CMatrix, _w: f64| {
        let hy = h * y;
        let mut dy = (&hy - hy.adjoint()) * (-2.0 * PI * I);
        add_dissipator(&mut dy, y, dephasing);
        dy
    };
    let mut out = rho0.clone();
    integrate(rho0.clone(), &[0.0, t_us], &[t_us], hmax, config, rhs, |_, y| {
        out = y.clone()
    })?;
    Ok(out)
}

fn add_dissipator(dy: &mut CMatrix, y: &CMatrix, dephasing: &DephasingModel) {
    let n = y.nrows();
    let relax = dephasing.t1_us.map(|t| 1.0 / t);
    for j in 0..n {
        for k in 0..n {
            let mut d = -y[(j, k)] * dephasing.rate(j, k);
            if let Some(r) = relax {
                let eq = if j == k { dephasing.equilibrium[j] } else { 0.0 };
                d -= (y[(j, k)] - c(eq)) * r;
            }
            dy[(j, k)] += d;
        }
    }
}

/// Adaptive Dormand–Prince 5(4) between consecutive `stops`, never stepping
/// across one. `rhs(t, y, window)` receives the midpoint of the current
/// stop interval so piecewise drives can pick their active set.
fn integrate<F, S>(
    mut y: CMatrix,
    stops: &[f64],
    samples: &[f64],
    hmax: f64,
    config: &IntegratorConfig,
    rhs: F,
    mut sample: S,
) -> Result<()>
where
    F: Fn(f64, &CMatrix, f64) -> CMatrix,
    S: FnMut(f64, &CMatrix),
{
    if samples.first() == stops.first() {
        sample(stops[0], &y);
    }
    let mut h = hmax * 0.25;
    let mut steps = 0usize;
    for w in stops.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a {
            let window = 0.5 * (a + b);
            let mut t = a;
            let mut k1 = rhs(t, &y, window);
            while t < b {
                let last = b - t <= h.min(hmax) * (1.0 + 1e-12);
                let step = if last { b - t } else { h.min(hmax) };
                let hh = c(step);
                let k2 = rhs(t + C2 * step, &(&y + &k1 * (hh * A21)), window);
                let k3 = rhs(t + C3 * step, &(&y + (&k1 * c(A31) + &k2 * c(A32)) * hh), window);
                let k4 = rhs(
                    t + C4 * step,
                    &(&y + (&k1 * c(A41) + &k2 * c(A42) + &k3 * c(A43)) * hh),
                    window,
                );
                let k5 = rhs(
                    t + C5 * step,
                    &(&y + (&k1 * c(A51) + &k2 * c(A52) + &k3 * c(A53) + &k4 * c(A54)) * hh),
                    window,
                );
                let k6 = rhs(
                    t + step,
                    &(&y + (&k1 * c(A61) + &k2 * c(A62) + &k3 * c(A63) + &k4 * c(A64) + &k5 * c(A65)) * hh),
                    window,
                );
                let y_new = &y + (&k1 * c(B1) + &k3 * c(B3) + &k4 * c(B4) + &k5 * c(B5) + &k6 * c(B6)) * hh;
                let k7 = rhs(t + step, &y_new, window);
                let err = (&k1 * c(E1) + &k3 * c(E3) + &k4 * c(E4) + &k5 * c(E5) + &k6 * c(E6) + &k7 * c(E7)) * hh;
                let mut acc = 0.0;
                for ((e, y0), y1) in err.iter().zip(y.iter()).zip(y_new.iter()) {
                    let scale = config.atol + config.rtol * y0.norm().max(y1.norm());
                    acc += (e.norm() / scale).powi(2);
                }
                let norm = (acc / err.len() as f64).sqrt();
                if !norm.is_finite() {
                    return Err(Error::Integration {
                        t_us: t,
                        reason: "non-finite error estimate".into(),
                    });
                }
                let factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                steps += 1;
                if steps > config.max_steps {
                    return Err(Error::Integration {
                        t_us: t,
                        reason: "step budget exhausted".into(),
                    });
                }
                if norm <= 1.0 {
                    t = if last { b } else { t + step };
                    y = y_new;
                    k1 = k7;
                    if !last || factor < 1.0 {
                        h = step * factor;
                    }
                } else {
                    h = step * factor;
                    if h < config.min_step_us {
                        return Err(Error::Integration {
                            t_us: t,
                            reason: format!("step size underflow ({h:.3e} us)"),
                        });
                    }
                }
            }
        }
        if samples.binary_search_by(|s| s.total_cmp(&b)).is_ok() {
            sample(b, &y);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::SpinSystemParams;

    fn system() -> SpinSystem {
        SpinSystem::new(SpinSystemParams::default()).unwrap()
    }

    fn tone(start: f64, duration: f64) -> PulseEvent {
        PulseEvent {
            carrier: Carrier::Transition(1),
            amplitude_t: 1e-4,
            phase_rad: 0.0,
            duration_us: duration,
            start_us: start,
            angle_rad: None,
            group: 0,
        }
    }

    #[test]
    fn drive_vanishes_outside_window_and_at_zero_phase() {
        let sys = system();
        let p = tone(1.0, 0.5);
        assert!(drive_hamiltonian(&sys, 0.5, &[p])
            .unwrap()
            .iter()
            .all(|z| z.norm() == 0.0));
        let mut centred = tone(-0.25, 0.5);
        centred.phase_rad = 0.0;
        assert!(drive_hamiltonian(&sys, 0.0, &[centred])
            .unwrap()
            .iter()
            .all(|z| z.norm() == 0.0));
        let a = drive_hamiltonian(&sys, 1.1, &[p]).unwrap();
        let two = drive_hamiltonian(&sys, 1.1, &[p, p]).unwrap();
        assert!((two - a * c(2.0)).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn pure_dephasing_closed_form() {
        let sys = system();
        let deph = DephasingModel::single_pair(12, 0, 1, 1.0 / 8.0);
        let mut rho = DensityMatrix::from_populations(&[0.5, 0.5, 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.]);
        rho.matrix[(0, 1)] = C64::new(0.3, 0.1);
        rho.matrix[(1, 0)] = C64::new(0.3, -0.1);
        let sched = PulseSchedule {
            end_us: 4.0,
            ..Default::default()
        };
        let traj = evolve_lindblad(&sys, &rho, &sched, &deph, &[1.0, 2.0], &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.times, vec![1.0, 2.0, 4.0]);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let expect = C64::new(0.3, 0.1) * (-t / 8.0).exp();
            assert!((s.coherence(0, 1) - expect).norm() < 1e-9);
            assert_eq!(s.population(0), 0.5);
        }
    }

    #[test]
    fn csv_header_lists_columns() {
        let t = Trajectory {
            times: vec![0.0],
            states: vec![DensityMatrix::pure(2, 0)],
        };
        let csv = t.to_csv(&[(0, 1)]);
        assert!(csv.starts_with("time_us,P0,P1,Re_rho_0_1,Im_rho_0_1\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
