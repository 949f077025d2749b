use std::f64::consts::PI;
use std::fmt;

use crate::compiler::models::{on_qubit, TimModel};
use crate::linalg::{c, cis, diag, identity, level_rotation, CMatrix};
use crate::spin::spin_operators;
use crate::{Error, Result};

/// Planar qubit rotation `R_α(β) = exp[-i (cos α s_y - sin α s_x) β]`.
pub fn planar_rotation(alpha: f64, beta: f64) -> CMatrix {
    // eigenvalues of (cos α s_y - sin α s_x) are ±1/2, so the exponential is closed form
    let s = spin_operators(0.5).expect("spin 1/2");
    let n = &s.y * c(alpha.cos()) - &s.x * c(alpha.sin());
    identity(2) * c((beta / 2.0).cos()) - n * (cis(PI / 2.0) * 2.0 * (beta / 2.0).sin())
}

/// `U_ZZ(α) = exp(-i s_z1 s_z2 α)`.
pub fn zz_unitary(alpha: f64) -> CMatrix {
    let q = alpha / 4.0;
    diag(&[cis(-q), cis(q), cis(q), cis(-q)])
}

/// One abstract operation. Qubit gates live on the two-qubit basis
/// `|↑↑>, |↑↓>, |↓↑>, |↓↓>`; level gates act on the qudit ladder directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    /// `R_axis(angle)` on qubit 1 or 2.
    Rotation {
        qubit: usize,
        angle: f64,
        axis: f64,
    },
    /// Rotation of `qubit` whose axis depends on the other qubit:
    /// `axis_up` when it is ↑, `axis_down` when ↓.
    ConditionalRotation {
        qubit: usize,
        angle: f64,
        axis_up: f64,
        axis_down: f64,
    },
    Zz {
        angle: f64,
    },
    /// `exp(-iθ/2 (cos φ σ_y + sin φ σ_x))` on levels `(η-1, η)`.
    LevelRotation {
        eta: usize,
        angle: f64,
        phase: f64,
    },
    /// π rotation with zero phase on `(η-1, η)`.
    Swap {
        eta: usize,
    },
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::Rotation { qubit, angle, axis } => write!(f, "R{qubit}[axis {axis:.4}]({angle:.4})"),
            Gate::ConditionalRotation {
                qubit,
                angle,
                axis_up,
                axis_down,
            } => {
                write!(f, "Rc{qubit}[axes {axis_up:.4}/{axis_down:.4}]({angle:.4})")
            }
            Gate::Zz { angle } => write!(f, "ZZ({angle:.4})"),
            Gate::LevelRotation { eta, angle, phase } => write!(f, "L{eta}[phase {phase:.4}]({angle:.4})"),
            Gate::Swap { eta } => write!(f, "SWAP{eta}"),
        }
    }
}

impl Gate {
    pub fn is_qubit_gate(&self) -> bool {
        matches!(
            self,
            Gate::Rotation { .. } | Gate::ConditionalRotation { .. } | Gate::Zz { .. }
        )
    }

    fn check(&self, dim: usize) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidParameter(format!("gate {self}: {why}")));
        match *self {
            Gate::Rotation { qubit, angle, axis } => {
                if dim != 4 || !(qubit == 1 || qubit == 2) {
                    return bad("qubit gates need a 4-level register and qubit 1 or 2");
                }
                if !angle.is_finite() || !axis.is_finite() {
                    return bad("non-finite angle");
                }
            }
            Gate::ConditionalRotation {
                qubit,
                angle,
                axis_up,
                axis_down,
            } => {
                if dim != 4 || !(qubit == 1 || qubit == 2) {
                    return bad("qubit gates need a 4-level register and qubit 1 or 2");
                }
                if !angle.is_finite() || !axis_up.is_finite() || !axis_down.is_finite() {
                    return bad("non-finite angle");
                }
            }
            Gate::Zz { angle } => {
                if dim != 4 || !angle.is_finite() {
                    return bad("ZZ needs a 4-level register and a finite angle");
                }
            }
            Gate::LevelRotation { eta, angle, phase } => {
                if eta == 0 || eta >= dim || !angle.is_finite() || !phase.is_finite() {
                    return bad("transition outside the register or non-finite angle");
                }
            }
            Gate::Swap { eta } => {
                if eta == 0 || eta >= dim {
                    return bad("transition outside the register");
                }
            }
        }
        Ok(())
    }

    /// Exact unitary on a `dim`-level register.
    pub fn unitary(&self, dim: usize) -> Result<CMatrix> {
        self.check(dim)?;
        Ok(match *self {
            Gate::Rotation { qubit, angle, axis } => on_qubit(qubit, &planar_rotation(axis, angle)),
            Gate::ConditionalRotation {
                qubit,
                angle,
                axis_up,
                axis_down,
            } => {
                let up = planar_rotation(axis_up, angle);
                let down = planar_rotation(axis_down, angle);
                let mut u = CMatrix::zeros(4, 4);
                // (target ↑/↓ index, control ↑/↓ index) -> register index
                let index = |t: usize, ctl: usize| if qubit == 1 { 2 * t + ctl } else { 2 * ctl + t };
                for (ctl, r) in [(0, &up), (1, &down)] {
                    for a in 0..2 {
                        for b in 0..2 {
                            u[(index(a, ctl), index(b, ctl))] = r[(a, b)];
                        }
                    }
                }
                u
            }
            Gate::Zz { angle } => zz_unitary(angle),
            Gate::LevelRotation { eta, angle, phase } => level_rotation(dim, eta - 1, eta, angle, phase),
            Gate::Swap { eta } => level_rotation(dim, eta - 1, eta, PI, 0.0),
        })
    }
}

/// Gates in time order on a register of `dim` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct GateList {
    pub dim: usize,
    pub gates: Vec<Gate>,
}

impl GateList {
    pub fn new(dim: usize, gates: Vec<Gate>) -> Result<Self> {
        let list = Self { dim, gates };
        for g in &list.gates {
            g.check(dim)?;
        }
        Ok(list)
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Product of all gates, the first gate acting first.
    pub fn composite(&self) -> Result<CMatrix> {
        let mut u = identity(self.dim);
        for g in &self.gates {
            u = g.unitary(self.dim)? * u;
        }
        Ok(u)
    }
}

/// First-order Trotter circuit `(U_ZZ(Jt/n) R_y1(bt/n) R_y2(bt/n))^n` with
/// angles in radians (`2π` times MHz·μs). Each step lists the qubit-2
/// rotation, then qubit 1, then the coupling.
pub fn trotterize(model: &TimModel, t_us: f64, n: usize) -> Result<GateList> {
    model.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("Trotter step count must be at least 1".into()));
    }
    if !(t_us >= 0.0) {
        return Err(Error::InvalidParameter(format!("time {t_us} must be non-negative")));
    }
    let beta = 2.0 * PI * model.b_mhz * t_us / n as f64;
    let alpha = 2.0 * PI * model.j_mhz * t_us / n as f64;
    let mut gates = Vec::with_capacity(3 * n);
    for _ in 0..n {
        gates.push(Gate::Rotation {
            qubit: 2,
            angle: beta,
            axis: 0.0,
        });
        gates.push(Gate::Rotation {
            qubit: 1,
            angle: beta,
            axis: 0.0,
        });
        gates.push(Gate::Zz { angle: alpha });
    }
    GateList::new(4, gates)
}

/// Outcome of [`optimize_zz`].
#[derive(Debug, Clone, PartialEq)]
pub struct ZzOptimization {
    pub gates: GateList,
    /// Set when the input did not fit the pattern and was returned unchanged.
    pub flagged: bool,
}

/// Pushes every `U_ZZ` to the end of the circuit, absorbing it into the
/// axes of the rotations it passes.
///
/// Moving `U_ZZ(α)` past a rotation of one qubit turns that rotation into a
/// conditional one: its axis shifts by `-α/2` where the other qubit is ↑ and
/// by `+α/2` where it is ↓. This is the verified reading of the planar
/// rotation identity `R_y1(β) R_y2(β) U_ZZ(α) = U_ZZ(α) R_c1 R_c2` with
/// `R_c(i) = R_{-α/2}(β) ⊗ |↑><↑| + R_{+α/2}(β) ⊗ |↓><↓|` (control = the
/// other qubit). A form with axes shifted by the full `±α` is off by a factor of two
/// and fails a direct 4×4 check.
pub fn optimize_zz(list: &GateList) -> ZzOptimization {
    if list.dim != 4 || !list.gates.iter().all(Gate::is_qubit_gate) {
        return ZzOptimization {
            gates: list.clone(),
            flagged: true,
        };
    }
    let mut pending = 0.0;
    let mut saw_zz = false;
    let mut out = Vec::with_capacity(list.len());
    for g in &list.gates {
        match *g {
            Gate::Zz { angle } => {
                pending += angle;
                saw_zz = true;
            }
            Gate::Rotation { qubit, angle, axis } if pending == 0.0 => {
                out.push(Gate::Rotation { qubit, angle, axis });
            }
            Gate::Rotation { qubit, angle, axis } => out.push(Gate::ConditionalRotation {
                qubit,
                angle,
                axis_up: axis - pending / 2.0,
                axis_down: axis + pending / 2.0,
            }),
            Gate::ConditionalRotation {
                qubit,
                angle,
                axis_up,
                axis_down,
            } => out.push(Gate::ConditionalRotation {
                qubit,
                angle,
                axis_up: axis_up - pending / 2.0,
                axis_down: axis_down + pending / 2.0,
            }),
            Gate::LevelRotation { .. } | Gate::Swap { .. } => unreachable!("filtered above"),
        }
    }
    if saw_zz {
        out.push(Gate::Zz { angle: pending });
    }
    ZzOptimization {
        gates: GateList { dim: 4, gates: out },
        flagged: false,
    }
}
