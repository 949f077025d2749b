use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::dynamics::{Carrier, DensityMatrix, DephasingModel, Frame, PulseEvent, PulseSchedule};
use crate::linalg::{c, cis, CMatrix, C64, I};
use crate::spin::SpinSystem;
use crate::{Error, Result};

/// Default largest carrier offset (MHz) still attributed to a transition.
pub const DEFAULT_OFF_RESONANCE_BOUND_MHZ: f64 = 2.0;

/// A pulse reduced to its rotating-frame coupling on one level pair.
#[derive(Debug, Clone, Copy)]
struct Coupling {
    lower: usize,
    upper: usize,
    /// `H[upper, lower]` in the rotating frame with the detuning removed.
    element: C64,
    /// Carrier minus transition frequency, MHz.
    detuning: f64,
}

/// Per-transition rotating-wave propagation.
///
/// Every pulse couples only its own level pair. Between pulse edges the
/// generator is constant in a frame that absorbs the detunings, so each
/// segment is propagated exactly with small block Liouvillians.
#[derive(Debug, Clone)]
pub struct RwaEvolver<'a> {
    system: &'a SpinSystem,
    dephasing: &'a DephasingModel,
    off_resonance_bound_mhz: f64,
}

impl<'a> RwaEvolver<'a> {
    pub fn new(system: &'a SpinSystem, dephasing: &'a DephasingModel) -> Result<Self> {
        if dephasing.dim() != system.dim() {
            return Err(Error::InvalidParameter(format!(
                "dephasing model is {}-dimensional, system is {}",
                dephasing.dim(),
                system.dim()
            )));
        }
        dephasing.validate()?;
        Ok(Self {
            system,
            dephasing,
            off_resonance_bound_mhz: DEFAULT_OFF_RESONANCE_BOUND_MHZ,
        })
    }

    pub fn with_off_resonance_bound(mut self, mhz: f64) -> Self {
        self.off_resonance_bound_mhz = mhz;
        self
    }

    pub fn system(&self) -> &SpinSystem {
        self.system
    }

    pub fn dephasing(&self) -> &DephasingModel {
        self.dephasing
    }

    fn resolve(&self, pulse: &PulseEvent) -> Result<Coupling> {
        pulse.validate()?;
        let (transition, detuning) = match pulse.carrier {
            Carrier::Transition(eta) => (*self.system.transition(eta)?, 0.0),
            Carrier::Frequency(f) => {
                let nearest = self
                    .system
                    .levels
                    .transitions
                    .iter()
                    .min_by(|a, b| (a.freq_mhz - f).abs().total_cmp(&(b.freq_mhz - f).abs()))
                    .ok_or(Error::UnmatchedCarrier { freq_mhz: f })?;
                let detuning = f - nearest.freq_mhz;
                if !(detuning.abs() <= self.off_resonance_bound_mhz) {
                    return Err(Error::UnmatchedCarrier { freq_mhz: f });
                }
                (*nearest, detuning)
            }
        };
        let v = self.system.drive[(transition.upper, transition.lower)];
        let element = v * (0.5 * pulse.amplitude_t) * I * cis(-pulse.phase_rad);
        Ok(Coupling {
            lower: transition.lower,
            upper: transition.upper,
            element,
            detuning,
        })
    }

    /// Plays `schedule` starting at the state's own time stamp. Pulse times
    /// are relative to that start; the result is stamped at start + end_us
    /// and returned in the input's frame.
    pub fn evolve(&self, rho: &DensityMatrix, schedule: &PulseSchedule) -> Result<DensityMatrix> {
        schedule.validate()?;
        if rho.dim() != self.system.dim() {
            return Err(Error::InvalidParameter("state dimension does not match system".into()));
        }
        let couplings = schedule
            .pulses
            .iter()
            .map(|p| self.resolve(p))
            .collect::<Result<Vec<_>>>()?;
        let energies = self.system.energies();
        let t0 = rho.time_us;
        let mut state = rho.to_frame(Frame::Rotating, energies).matrix;

        let mut edges = vec![0.0, schedule.end_us];
        for p in &schedule.pulses {
            edges.push(p.start_us);
            edges.push(p.end_us());
        }
        edges.retain(|t| *t >= 0.0 && *t <= schedule.end_us);
        edges.sort_by(f64::total_cmp);
        edges.dedup();

        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let active: Vec<Coupling> = schedule
                .pulses
                .iter()
                .zip(&couplings)
                .filter(|(p, _)| p.is_active(mid))
                .map(|(_, c)| *c)
                .collect();
            state = self.segment(&state, t0 + a, t0 + b, &active)?;
        }
        let out = DensityMatrix::new(state, t0 + schedule.end_us, Frame::Rotating);
        Ok(out.to_frame(rho.frame, energies))
    }

    /// Plays a single pulse, starting it at the state's time stamp.
    pub fn apply_pulse(&self, rho: &DensityMatrix, pulse: &PulseEvent) -> Result<DensityMatrix> {
        let mut p = *pulse;
        p.start_us = 0.0;
        self.evolve(rho, &PulseSchedule::new(vec![p]))
    }

    /// Undriven evolution for `tau_us`.
    pub fn free_decay(&self, rho: &DensityMatrix, tau_us: f64) -> Result<DensityMatrix> {
        free_decay(rho, tau_us, self.dephasing, self.system.energies())
    }

    fn segment(&self, rho: &CMatrix, t_a: f64, t_b: f64, active: &[Coupling]) -> Result<CMatrix> {
        let n = rho.nrows();
        let tau = t_b - t_a;
        if active.is_empty() {
            return Ok(decay_rotating(rho, tau, self.dephasing));
        }

        // Group driven levels into connected components and pick level
        // offsets δ with δ_upper - δ_lower equal to each detuning.
        let mut comp_of: Vec<Option<usize>> = vec![None; n];
        let mut delta = vec![0.0; n];
        let mut components: Vec<Vec<usize>> = Vec::new();
        let mut pending: Vec<Coupling> = active.to_vec();
        while let Some(seed) = pending.first().copied() {
            let id = components.len();
            let mut members = vec![seed.lower];
            comp_of[seed.lower] = Some(id);
            delta[seed.lower] = 0.0;
            let mut grew = true;
            while grew {
                grew = false;
                let mut rest = Vec::new();
                for cpl in pending.drain(..) {
                    let (lo, up) = (comp_of[cpl.lower] == Some(id), comp_of[cpl.upper] == Some(id));
                    match (lo, up) {
                        (true, false) => {
                            comp_of[cpl.upper] = Some(id);
                            delta[cpl.upper] = delta[cpl.lower] + cpl.detuning;
                            members.push(cpl.upper);
                            grew = true;
                        }
                        (false, true) => {
                            comp_of[cpl.lower] = Some(id);
                            delta[cpl.lower] = delta[cpl.upper] - cpl.detuning;
                            members.push(cpl.lower);
                            grew = true;
                        }
                        (true, true) => {
                            let mismatch = delta[cpl.upper] - delta[cpl.lower] - cpl.detuning;
                            if mismatch.abs() > 1e-9 {
                                return Err(Error::InvalidParameter(
                                    "simultaneous pulses with incompatible detunings on a closed loop".into(),
                                ));
                            }
                        }
                        (false, false) => rest.push(cpl),
                    }
                }
                pending = rest;
            }
            members.sort_unstable();
            components.push(members);
        }
        for k in 0..n {
            if comp_of[k].is_none() {
                comp_of[k] = Some(components.len());
                components.push(vec![k]);
            }
        }

        // Generator in the detuned frame.
        let mut h = CMatrix::zeros(n, n);
        for cpl in active {
            h[(cpl.upper, cpl.lower)] += cpl.element;
            h[(cpl.lower, cpl.upper)] += cpl.element.conj();
        }
        for k in 0..n {
            h[(k, k)] -= c(delta[k]);
        }

        let into = |j: usize, k: usize, t: f64| cis(2.0 * PI * (delta[j] - delta[k]) * t);
        let mut x = CMatrix::from_fn(n, n, |j, k| rho[(j, k)] * into(j, k, t_a));

        let t1 = self.dephasing.t1_us;
        let eq = &self.dephasing.equilibrium;
        let mut out = CMatrix::zeros(n, n);
        for p in &components {
            let hp = sub(&h, p, p);
            for q in &components {
                let hq = sub(&h, q, q);
                let block = sub(&x, p, q);
                let gamma = DMatrix::from_fn(p.len(), q.len(), |a, b| self.dephasing.rate(p[a], q[b]));
                let target = (p == q && t1.is_some())
                    .then(|| CMatrix::from_fn(p.len(), q.len(), |a, b| if a == b { c(eq[p[a]]) } else { c(0.0) }));
                let evolved = propagate_block(&hp, &hq, &gamma, t1, target.as_ref(), &block, tau);
                for (a, &j) in p.iter().enumerate() {
                    for (b, &k) in q.iter().enumerate() {
                        out[(j, k)] = evolved[(a, b)];
                    }
                }
            }
        }
        x = out;
        Ok(CMatrix::from_fn(n, n, |j, k| x[(j, k)] * into(j, k, -t_b)))
    }
}

fn sub(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

/// Exact solution of `dX/dt = -2πi(Hp X - X Hq) - Γ∘X - (X - X_eq)/T1`.
fn propagate_block(
    hp: &CMatrix,
    hq: &CMatrix,
    gamma: &DMatrix<f64>,
    t1: Option<f64>,
    target: Option<&CMatrix>,
    x: &CMatrix,
    tau: f64,
) -> CMatrix {
    let (np, nq) = (hp.nrows(), hq.nrows());
    let relax = t1.map_or(0.0, |t| 1.0 / t);
    if np == 1 && nq == 1 {
        let rate = -2.0 * PI * I * (hp[(0, 0)] - hq[(0, 0)]) - c(gamma[(0, 0)] + relax);
        let decay = (rate * tau).exp();
        let fixed = target.map_or(c(0.0), |t| t[(0, 0)]);
        // x_eq = relax·fixed / (-rate) is the steady state of the affine ODE
        if relax > 0.0 && fixed != c(0.0) {
            let steady = -(fixed * relax) / rate;
            return CMatrix::from_element(1, 1, steady + (x[(0, 0)] - steady) * decay);
        }
        return CMatrix::from_element(1, 1, x[(0, 0)] * decay);
    }
    let m = np * nq;
    let affine = target.is_some() && relax > 0.0;
    let size = if affine { m + 1 } else { m };
    let mut l = CMatrix::zeros(size, size);
    // column-major vec: index = a + np * b
    for b in 0..nq {
        for a in 0..np {
            let row = a + np * b;
            for a2 in 0..np {
                l[(row, a2 + np * b)] += -2.0 * PI * I * hp[(a, a2)];
            }
            for b2 in 0..nq {
                l[(row, a + np * b2)] += 2.0 * PI * I * hq[(b2, b)];
            }
            l[(row, row)] -= c(gamma[(a, b)] + relax);
            if affine {
                l[(row, m)] = target.unwrap()[(a, b)] * relax;
            }
        }
    }
    let prop = (l * c(tau)).exp();
    let mut v = crate::linalg::CVector::zeros(size);
    for b in 0..nq {
        for a in 0..np {
            v[a + np * b] = x[(a, b)];
        }
    }
    if affine {
        v[m] = c(1.0);
    }
    let w = prop * v;
    CMatrix::from_fn(np, nq, |a, b| w[a + np * b])
}

fn decay_rotating(rho: &CMatrix, tau: f64, dephasing: &DephasingModel) -> CMatrix {
    let n = rho.nrows();
    let relax = dephasing.t1_us.map_or(0.0, |t| 1.0 / t);
    let shrink = (-relax * tau).exp();
    CMatrix::from_fn(n, n, |j, k| {
        let x = rho[(j, k)] * (-dephasing.rate(j, k) * tau).exp();
        if relax == 0.0 {
            x
        } else if j == k {
            c(dephasing.equilibrium[j]) + (x - c(dephasing.equilibrium[j])) * shrink
        } else {
            x * shrink
        }
    })
}

/// Undriven evolution: coherences damp by `exp(-Γ τ)` and, in the lab
/// frame, pick up their free phase; populations relax only with T1 on.
pub fn free_decay(
    rho: &DensityMatrix,
    tau_us: f64,
    dephasing: &DephasingModel,
    energies: &[f64],
) -> Result<DensityMatrix> {
    if !(tau_us >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "wait time {tau_us} must be non-negative"
        )));
    }
    if tau_us == 0.0 {
        return Ok(rho.clone());
    }
    let rot = rho.to_frame(Frame::Rotating, energies);
    let m = decay_rotating(&rot.matrix, tau_us, dephasing);
    let out = DensityMatrix::new(m, rho.time_us + tau_us, Frame::Rotating);
    Ok(out.to_frame(rho.frame, energies))
}
