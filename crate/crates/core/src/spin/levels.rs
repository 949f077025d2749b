use serde::Serialize;

use crate::linalg::{eigh, CMatrix, CVector, C64};
use crate::spin::hamiltonian::{drive_operator, EigenSystem};
use crate::spin::operators::spin_operators;
use crate::spin::params::SpinSystemParams;
use crate::{Error, Result};

/// Nuclear projections of the computational levels `|0>..|3>` in the
/// `m_S = +1/2` manifold.
pub const COMPUTATIONAL_M_I: [f64; 4] = [0.5, -0.5, -1.5, -2.5];
pub const COMPUTATIONAL_M_S: f64 = 0.5;

/// Dominant `|m_S, m_I>` content of one eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelLabel {
    pub m_s: f64,
    pub m_i: f64,
    /// Squared overlap with the labeling product state.
    pub overlap: f64,
}

/// A drivable transition `|η-1> <-> |η>` of the computational ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    /// 1-based transition index η.
    pub eta: usize,
    /// Eigenstate index of `|η-1>`.
    pub lower: usize,
    /// Eigenstate index of `|η>`.
    pub upper: usize,
    pub freq_mhz: f64,
    /// `<η| (μB g_z S_z + μN g_I I_z) |η-1>` in MHz per tesla of B1.
    #[serde(skip)]
    pub drive: C64,
}

impl Transition {
    /// Rabi frequency (MHz) at drive amplitude `b1_tesla`.
    pub fn rabi_mhz(&self, b1_tesla: f64) -> f64 {
        self.drive.norm() * b1_tesla
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelMap {
    pub labels: Vec<LevelLabel>,
    /// Eigenstate indices of the qudit levels `|0>..|3>`.
    pub computational: [usize; 4],
    pub transitions: Vec<Transition>,
}

impl LevelMap {
    pub fn transition(&self, eta: usize) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.eta == eta)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.freq_mhz).collect()
    }

    /// Position of an eigenstate in the computational ladder, if any.
    pub fn qudit_level(&self, eigen_index: usize) -> Option<usize> {
        self.computational.iter().position(|&k| k == eigen_index)
    }
}

/// Eigenvectors of `n·J` ordered by descending projection `m = j..-j`.
fn projected_basis(j: f64, axis: [f64; 3]) -> Result<(Vec<f64>, CMatrix)> {
    let ops = spin_operators(j)?;
    let nj = &ops.x * C64::new(axis[0], 0.0) + &ops.y * C64::new(axis[1], 0.0) + &ops.z * C64::new(axis[2], 0.0);
    let (mut m, vecs) = eigh(&nj);
    // eigh is ascending; flip to descending m
    m.reverse();
    let dim = m.len();
    let mut out = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        out.set_column(k, &vecs.column(dim - 1 - k));
    }
    let m = m.into_iter().map(|v| (v * 2.0).round() / 2.0).collect();
    Ok((m, out))
}

/// Assigns each eigenstate its dominant `|m_S, m_I>` product state,
/// quantized along B0, and extracts the computational ladder.
///
/// Assignment is greedy on descending squared overlap with ties broken by
/// `(m_S, m_I)` in lexicographic order. Fails if the field vanishes or any
/// assigned overlap is below 0.5.
pub fn label_levels(eig: &EigenSystem, params: &SpinSystemParams) -> Result<LevelMap> {
    let norm = params.field_magnitude();
    if norm == 0.0 {
        return Err(Error::Labeling("B0 = 0: quantization axis undefined".into()));
    }
    let axis = [params.b0[0] / norm, params.b0[1] / norm, params.b0[2] / norm];
    let (ms, s_vecs) = projected_basis(params.s, axis)?;
    let (mi, i_vecs) = projected_basis(params.i, axis)?;
    let dim = eig.dim();
    if ms.len() * mi.len() != dim {
        return Err(Error::Labeling(format!(
            "eigensystem dimension {dim} does not match S = {}, I = {}",
            params.s, params.i
        )));
    }

    struct Candidate {
        state: usize,
        product: usize,
        overlap: f64,
        key: (f64, f64),
    }
    let mut candidates = Vec::with_capacity(dim * dim);
    for (a, &m_s) in ms.iter().enumerate() {
        for (b, &m_i) in mi.iter().enumerate() {
            let product: CVector = s_vecs.column(a).kronecker(&i_vecs.column(b));
            let p = a * mi.len() + b;
            for k in 0..dim {
                let amp = product.dotc(&eig.states.column(k));
                candidates.push(Candidate {
                    state: k,
                    product: p,
                    overlap: amp.norm_sqr(),
                    key: (m_s, m_i),
                });
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.overlap
            .total_cmp(&x.overlap)
            .then(x.key.0.total_cmp(&y.key.0))
            .then(x.key.1.total_cmp(&y.key.1))
    });

    let mut labels: Vec<Option<LevelLabel>> = vec![None; dim];
    let mut used = vec![false; dim];
    for cand in &candidates {
        if labels[cand.state].is_none() && !used[cand.product] {
            labels[cand.state] = Some(LevelLabel {
                m_s: cand.key.0,
                m_i: cand.key.1,
                overlap: cand.overlap,
            });
            used[cand.product] = true;
        }
    }
    let labels: Vec<LevelLabel> = labels
        .into_iter()
        .map(|l| l.expect("greedy matching is complete"))
        .collect();
    if let Some((k, worst)) = labels.iter().enumerate().find(|(_, l)| l.overlap < 0.5) {
        return Err(Error::Labeling(format!(
            "eigenstate {k} has overlap {:.3} with |m_S={}, m_I={}>; labels are not meaningful at |B0| = {norm} T",
            worst.overlap, worst.m_s, worst.m_i
        )));
    }

    let mut computational = [0usize; 4];
    for (q, &m_i) in COMPUTATIONAL_M_I.iter().enumerate() {
        computational[q] = labels
            .iter()
            .position(|l| l.m_s == COMPUTATIONAL_M_S && l.m_i == m_i)
            .ok_or_else(|| Error::Labeling(format!("no eigenstate labeled |+1/2, {m_i}>")))?;
    }
    Ok(LevelMap {
        labels,
        computational,
        transitions: Vec::new(),
    })
}

/// Populates the transition table of the computational ladder:
/// frequencies `f_η = E(|η>) - E(|η-1>)` and drive elements in MHz/T.
pub fn transition_table(map: &LevelMap, eig: &EigenSystem, params: &SpinSystemParams) -> Result<LevelMap> {
    let drive = eig.to_eigenbasis(&drive_operator(params)?);
    let transitions = (1..map.computational.len())
        .map(|eta| {
            let lower = map.computational[eta - 1];
            let upper = map.computational[eta];
            Transition {
                eta,
                lower,
                upper,
                freq_mhz: eig.energies[upper] - eig.energies[lower],
                drive: drive[(upper, lower)],
            }
        })
        .collect();
    Ok(LevelMap {
        transitions,
        ..map.clone()
    })
}

/// Rephases eigenvectors along the computational ladder so that every
/// drive element `<η|V|η-1>` is real and positive. With this gauge a pulse
/// phase of zero rotates about y in each two-level subspace.
pub fn align_ladder_phases(eig: &mut EigenSystem, map: &LevelMap, params: &SpinSystemParams) -> Result<()> {
    let op = drive_operator(params)?;
    for eta in 1..map.computational.len() {
        let lower = map.computational[eta - 1];
        let upper = map.computational[eta];
        let element = eig.states.column(upper).dotc(&(&op * eig.states.column(lower)));
        if element.norm() > 0.0 {
            // |upper> -> e^{iχ}|upper> multiplies the element by e^{-iχ}
            eig.rephase(upper, element / element.norm());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::hamiltonian::{build_static_hamiltonian, diagonalize};

    fn labeled(params: &SpinSystemParams) -> Result<(EigenSystem, LevelMap)> {
        let eig = diagonalize(&build_static_hamiltonian(params)?)?;
        let map = label_levels(&eig, params)?;
        Ok((eig, map))
    }

    #[test]
    fn default_labels_are_bijective() {
        let params = SpinSystemParams::default();
        let (_, map) = labeled(&params).unwrap();
        let mut seen: Vec<(i32, i32)> = map
            .labels
            .iter()
            .map(|l| ((2.0 * l.m_s) as i32, (2.0 * l.m_i) as i32))
            .collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 12);
        assert!(map.labels.iter().all(|l| l.overlap > 0.5));
    }

    #[test]
    fn decoupled_limit_is_exactly_factorized() {
        let params = SpinSystemParams {
            a_par: 0.0,
            a_perp: 0.0,
            p: 0.0,
            b0: [0.8, 0.0, 0.0],
            ..SpinSystemParams::default()
        };
        let (_, map) = labeled(&params).unwrap();
        assert!(map.labels.iter().all(|l| (l.overlap - 1.0).abs() < 1e-12));
    }

    #[test]
    fn weak_hyperfine_approaches_factorized() {
        // a weak hyperfine term barely tilts the nuclear axis away from the field
        let params = SpinSystemParams {
            a_par: -9.0,
            a_perp: -6.0,
            p: 0.0,
            b0: [1.0, 0.0, 0.0],
            ..SpinSystemParams::default()
        };
        let (_, map) = labeled(&params).unwrap();
        assert!(map.labels.iter().all(|l| l.overlap > 0.99), "{:?}", map.labels);
    }

    #[test]
    fn zero_field_is_rejected() {
        let params = SpinSystemParams::default().with_field([0.0; 3]);
        assert!(matches!(labeled(&params), Err(Error::Labeling(_))));
    }

    #[test]
    fn ladder_is_ascending_and_drivable() {
        let params = SpinSystemParams::default();
        let (mut eig, map) = labeled(&params).unwrap();
        align_ladder_phases(&mut eig, &map, &params).unwrap();
        let map = transition_table(&map, &eig, &params).unwrap();
        let f = map.frequencies();
        assert!(f[0] < f[1] && f[1] < f[2], "{f:?}");
        for t in &map.transitions {
            assert!(t.drive.norm() > 100.0);
            assert!(t.drive.im.abs() < 1e-9 * t.drive.norm() && t.drive.re > 0.0);
        }
    }

    #[test]
    fn factorized_limit_has_no_nuclear_drive() {
        // no hyperfine mixing: the z-directed drive cannot flip m_I along x
        // except through I_z, whose in-branch elements connect Δm_I = ±1
        // with the bare nuclear coefficient only
        let params = SpinSystemParams {
            a_par: 0.0,
            a_perp: 0.0,
            p: 0.0,
            b0: [0.5, 0.0, 0.0],
            ..SpinSystemParams::default()
        };
        let (eig, map) = labeled(&params).unwrap();
        let map = transition_table(&map, &eig, &params).unwrap();
        let mu_n_gi = (crate::spin::params::MU_N_MHZ_PER_T * params.g_i).abs();
        let ops = spin_operators(2.5).unwrap();
        for t in &map.transitions {
            // |<m-1| I_z |m>| for I quantized along x equals |<m-1| I_x |m>|
            // in the z basis
            let m_upper = map.labels[t.upper].m_i;
            let k = (2.5 - m_upper) as usize;
            let expected = mu_n_gi * ops.x[(k - 1, k)].norm();
            assert!(
                (t.drive.norm() - expected).abs() < 1e-9,
                "{} vs {expected}",
                t.drive.norm()
            );
        }
    }
}
