use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::spin::SpinSystem;
use crate::{Error, Result};

/// What a pulse is tuned to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Carrier {
    /// Resonant with computational transition `f_η` (1-based).
    Transition(usize),
    /// Explicit carrier frequency in MHz.
    Frequency(f64),
}

impl fmt::Display for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Carrier::Transition(eta) => write!(f, "f{eta}"),
            Carrier::Frequency(mhz) => write!(f, "{mhz}MHz"),
        }
    }
}

impl FromStr for Carrier {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(rest) = s.strip_suffix("MHz") {
            let v: f64 = rest.parse().map_err(|_| format!("bad carrier frequency `{s}`"))?;
            return Ok(Carrier::Frequency(v));
        }
        if let Some(rest) = s.strip_prefix('f') {
            let eta: usize = rest.parse().map_err(|_| format!("bad transition label `{s}`"))?;
            return Ok(Carrier::Transition(eta));
        }
        Err(format!("unknown carrier `{s}`"))
    }
}

/// One rectangular drive pulse `B1 sin(2π f t + φ)` on `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseEvent {
    pub carrier: Carrier,
    pub amplitude_t: f64,
    pub phase_rad: f64,
    pub duration_us: f64,
    pub start_us: f64,
    /// Intended rotation angle, if the pulse was built from one.
    pub angle_rad: Option<f64>,
    /// Pulses sharing a group id are played in parallel.
    pub group: usize,
}

impl PulseEvent {
    pub fn end_us(&self) -> f64 {
        self.start_us + self.duration_us
    }

    pub fn center_us(&self) -> f64 {
        self.start_us + 0.5 * self.duration_us
    }

    pub fn is_active(&self, t_us: f64) -> bool {
        t_us >= self.start_us && t_us < self.end_us()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_us > 0.0) || !self.duration_us.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pulse duration {} must be positive",
                self.duration_us
            )));
        }
        if !(self.amplitude_t >= 0.0) || !self.amplitude_t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pulse amplitude {} must be non-negative",
                self.amplitude_t
            )));
        }
        if !self.phase_rad.is_finite() || !self.start_us.is_finite() {
            return Err(Error::InvalidParameter("pulse phase and start must be finite".into()));
        }
        Ok(())
    }
}

/// Ordered pulse list plus the residual virtual frame phases on the qudit
/// levels left over after the last physical pulse.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PulseSchedule {
    pub pulses: Vec<PulseEvent>,
    /// Phase `λ_k` of the frame of qudit level `k` (the schedule implements
    /// `diag(e^{-iλ}) · U_pulses`). Empty means all zero.
    pub frame_phases: Vec<f64>,
    /// Total length including trailing delays.
    pub end_us: f64,
}

const HEADER: &str = "# spinqudit pulse schedule v1";
const COLUMNS: &str = "# pulse start_us duration_us carrier phase_rad amplitude_t group angle_rad";

impl PulseSchedule {
    pub fn new(pulses: Vec<PulseEvent>) -> Self {
        let end_us = pulses.iter().map(|p| p.end_us()).fold(0.0, f64::max);
        Self {
            pulses,
            frame_phases: Vec::new(),
            end_us,
        }
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn group_count(&self) -> usize {
        let mut groups: Vec<usize> = self.pulses.iter().map(|p| p.group).collect();
        groups.sort_unstable();
        groups.dedup();
        groups.len()
    }

    pub fn count_on(&self, eta: usize) -> usize {
        self.pulses
            .iter()
            .filter(|p| p.carrier == Carrier::Transition(eta))
            .count()
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.pulses {
            p.validate()?;
            if p.end_us() > self.end_us * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::InvalidParameter("pulse extends past schedule end".into()));
            }
        }
        Ok(())
    }

    /// Same schedule with every amplitude multiplied by `factor`.
    pub fn scaled_amplitudes(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.pulses {
            p.amplitude_t *= factor;
        }
        out
    }

    /// Same schedule delayed by `offset_us`.
    pub fn shifted(&self, offset_us: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.pulses {
            p.start_us += offset_us;
        }
        out.end_us += offset_us;
        out
    }

    /// Line-oriented text form. Floats use the shortest representation that
    /// parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(HEADER);
        s.push('\n');
        s.push_str(COLUMNS);
        s.push('\n');
        s.push_str(&format!("end_us {}\n", self.end_us));
        s.push_str("frame");
        for lam in &self.frame_phases {
            s.push_str(&format!(" {lam}"));
        }
        s.push('\n');
        for p in &self.pulses {
            let angle = p.angle_rad.map_or_else(|| "-".to_string(), |a| a.to_string());
            s.push_str(&format!(
                "pulse {} {} {} {} {} {} {}\n",
                p.start_us, p.duration_us, p.carrier, p.phase_rad, p.amplitude_t, p.group, angle
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, reason: String| Error::ScheduleParse { line, reason };
        let mut end_us = None;
        let mut frame_phases = None;
        let mut pulses = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let tag = fields.next().unwrap_or_default();
            let rest: Vec<&str> = fields.collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(line_no, format!("bad number `{s}`")));
            match tag {
                "end_us" => {
                    if rest.len() != 1 {
                        return Err(err(line_no, "end_us takes one value".into()));
                    }
                    end_us = Some(num(rest[0])?);
                }
                "frame" => {
                    frame_phases = Some(rest.iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?);
                }
                "pulse" => {
                    if rest.len() != 7 {
                        return Err(err(line_no, format!("pulse needs 7 fields, got {}", rest.len())));
                    }
                    let carrier = rest[2].parse::<Carrier>().map_err(|e| err(line_no, e))?;
                    let group = rest[5]
                        .parse::<usize>()
                        .map_err(|_| err(line_no, format!("bad group `{}`", rest[5])))?;
                    let angle_rad = if rest[6] == "-" { None } else { Some(num(rest[6])?) };
                    let p = PulseEvent {
                        start_us: num(rest[0])?,
                        duration_us: num(rest[1])?,
                        carrier,
                        phase_rad: num(rest[3])?,
                        amplitude_t: num(rest[4])?,
                        group,
                        angle_rad,
                    };
                    p.validate().map_err(|e| err(line_no, e.to_string()))?;
                    pulses.push(p);
                }
                other => return Err(err(line_no, format!("unknown record `{other}`"))),
            }
        }
        let end_us = end_us.ok_or_else(|| err(0, "missing end_us record".into()))?;
        Ok(Self {
            pulses,
            frame_phases: frame_phases.unwrap_or_default(),
            end_us,
        })
    }
}

/// Drive amplitude and calibrated Rabi frequency for each transition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardwareConfig {
    pub b1_tesla: [f64; 3],
    /// Rabi frequency (MHz) at the amplitudes above.
    pub rabi_mhz: [f64; 3],
}

impl HardwareConfig {
    /// Rabi rates taken from the transition matrix elements.
    pub fn nominal(system: &SpinSystem, b1_tesla: f64) -> Result<Self> {
        if !(b1_tesla > 0.0) {
            return Err(Error::InvalidParameter(format!("B1 must be positive, got {b1_tesla}")));
        }
        let mut rabi = [0.0; 3];
        for (k, r) in rabi.iter_mut().enumerate() {
            *r = system.transition(k + 1)?.rabi_mhz(b1_tesla);
        }
        Ok(Self {
            b1_tesla: [b1_tesla; 3],
            rabi_mhz: rabi,
        })
    }

    /// Replaces the Rabi rates with measured ones.
    pub fn with_rabi(mut self, rabi_mhz: [f64; 3]) -> Self {
        self.rabi_mhz = rabi_mhz;
        self
    }

    fn index(eta: usize) -> Result<usize> {
        if (1..=3).contains(&eta) {
            Ok(eta - 1)
        } else {
            Err(Error::InvalidParameter(format!("no transition f{eta}")))
        }
    }

    /// Pulse length (μs) for a rotation of `|theta|` on `f_η`.
    pub fn duration_for(&self, eta: usize, theta: f64) -> Result<f64> {
        let k = Self::index(eta)?;
        Ok(theta.abs() / (2.0 * PI * self.rabi_mhz[k]))
    }

    pub fn amplitude(&self, eta: usize) -> Result<f64> {
        Ok(self.b1_tesla[Self::index(eta)?])
    }
}

/// A requested rotation `(η, θ, φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub eta: usize,
    pub theta: f64,
    pub phase: f64,
}

impl Rotation {
    pub fn new(eta: usize, theta: f64, phase: f64) -> Self {
        Self { eta, theta, phase }
    }
}

/// Lays pulses out back to back. Parallel rotations start together and the
/// cursor advances by the longest one.
#[derive(Debug, Clone)]
pub struct ScheduleBuilder<'a> {
    hardware: &'a HardwareConfig,
    cursor_us: f64,
    next_group: usize,
    pulses: Vec<PulseEvent>,
}

impl<'a> ScheduleBuilder<'a> {
    pub fn new(hardware: &'a HardwareConfig) -> Self {
        Self {
            hardware,
            cursor_us: 0.0,
            next_group: 0,
            pulses: Vec::new(),
        }
    }

    pub fn cursor_us(&self) -> f64 {
        self.cursor_us
    }

    pub fn rotation(&mut self, eta: usize, theta: f64, phase: f64) -> Result<&mut Self> {
        self.parallel(&[Rotation::new(eta, theta, phase)])
    }

    /// Negative angles become positive ones with the phase advanced by π;
    /// zero angles emit nothing.
    pub fn parallel(&mut self, rotations: &[Rotation]) -> Result<&mut Self> {
        let mut longest = 0.0_f64;
        let mut emitted = false;
        let mut seen = Vec::new();
        for r in rotations {
            if !r.theta.is_finite() || !r.phase.is_finite() {
                return Err(Error::InvalidParameter(
                    "rotation angle and phase must be finite".into(),
                ));
            }
            if seen.contains(&r.eta) {
                return Err(Error::InvalidParameter(format!("two parallel pulses on f{}", r.eta)));
            }
            seen.push(r.eta);
            if r.theta == 0.0 {
                continue;
            }
            let (theta, phase) = if r.theta < 0.0 {
                (-r.theta, r.phase + PI)
            } else {
                (r.theta, r.phase)
            };
            let duration = self.hardware.duration_for(r.eta, theta)?;
            longest = longest.max(duration);
            self.pulses.push(PulseEvent {
                carrier: Carrier::Transition(r.eta),
                amplitude_t: self.hardware.amplitude(r.eta)?,
                phase_rad: phase,
                duration_us: duration,
                start_us: self.cursor_us,
                angle_rad: Some(theta),
                group: self.next_group,
            });
            emitted = true;
        }
        if emitted {
            self.next_group += 1;
            self.cursor_us += longest;
        }
        Ok(self)
    }

    pub fn delay(&mut self, tau_us: f64) -> Result<&mut Self> {
        if !(tau_us >= 0.0) {
            return Err(Error::InvalidParameter(format!("delay {tau_us} must be non-negative")));
        }
        self.cursor_us += tau_us;
        Ok(self)
    }

    pub fn build(&self) -> PulseSchedule {
        PulseSchedule {
            pulses: self.pulses.clone(),
            frame_phases: Vec::new(),
            end_us: self.cursor_us,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hw() -> HardwareConfig {
        HardwareConfig {
            b1_tesla: [5e-4; 3],
            rabi_mhz: [2.0, 1.7, 1.2],
        }
    }

    #[test]
    fn builder_groups_parallel_pulses() {
        let h = hw();
        let mut b = ScheduleBuilder::new(&h);
        b.parallel(&[Rotation::new(1, PI, 0.0), Rotation::new(3, PI, 0.0)])
            .unwrap();
        b.rotation(2, -PI / 2.0, 0.0).unwrap();
        let s = b.build();
        assert_eq!(s.len(), 3);
        assert_eq!(s.group_count(), 2);
        assert!((s.pulses[0].duration_us - 0.25).abs() < 1e-15);
        let longest = 1.0 / (2.0 * 1.2);
        assert!((s.pulses[2].start_us - longest).abs() < 1e-15);
        assert!((s.pulses[2].phase_rad - PI).abs() < 1e-15);
    }

    #[test]
    fn text_rejects_garbage() {
        assert!(PulseSchedule::from_text("end_us 1\npulse 0 1 f1 0 0.1 0").is_err());
        assert!(PulseSchedule::from_text("end_us 1\nwobble").is_err());
        assert!(PulseSchedule::from_text("pulse 0 1 f1 0 0.1 0 -").is_err());
        assert!(PulseSchedule::from_text("end_us 1\npulse 0 -1 f1 0 0.1 0 -").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(
            raw in prop::collection::vec(
                (0.0f64..10.0, 1e-6f64..3.0, 0usize..4, 300.0f64..400.0, -7.0f64..7.0, 0.0f64..1e-3, 0usize..50, prop::option::of(0.0f64..7.0)),
                0..12),
            frame in prop::collection::vec(-10.0f64..10.0, 0..5),
        ) {
            let pulses: Vec<PulseEvent> = raw.iter().map(|&(start, dur, kind, f, ph, amp, g, angle)| PulseEvent {
                carrier: if kind == 0 { Carrier::Frequency(f) } else { Carrier::Transition(kind) },
                amplitude_t: amp,
                phase_rad: ph,
                duration_us: dur,
                start_us: start,
                angle_rad: angle,
                group: g,
            }).collect();
            let mut s = PulseSchedule::new(pulses);
            s.frame_phases = frame;
            let text = s.to_text();
            let back = PulseSchedule::from_text(&text).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
