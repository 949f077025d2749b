use crate::linalg::{c, eigh, ensure_hermitian, identity, kron, CMatrix, C64};
use crate::spin::operators::spin_operators;
use crate::spin::params::{SpinSystemParams, MU_B_MHZ_PER_T, MU_N_MHZ_PER_T};
use crate::Result;

/// Electronic and nuclear spin operators embedded in the `S ⊗ I` product
/// space (electron index major).
#[derive(Debug, Clone)]
pub struct ProductOperators {
    pub s: [CMatrix; 3],
    pub i: [CMatrix; 3],
}

impl ProductOperators {
    pub fn new(s: f64, i: f64) -> Result<Self> {
        let so = spin_operators(s)?;
        let io = spin_operators(i)?;
        let one_s = identity(so.dim());
        let one_i = identity(io.dim());
        Ok(Self {
            s: [kron(&so.x, &one_i), kron(&so.y, &one_i), kron(&so.z, &one_i)],
            i: [kron(&one_s, &io.x), kron(&one_s, &io.y), kron(&one_s, &io.z)],
        })
    }

    pub fn dim(&self) -> usize {
        self.s[2].nrows()
    }
}

/// Static Hamiltonian in MHz on the product basis:
/// hyperfine (axial + transverse), quadrupolar `p Iz²`, and the electronic
/// and nuclear Zeeman terms.
pub fn build_static_hamiltonian(params: &SpinSystemParams) -> Result<CMatrix> {
    params.validate()?;
    let ops = ProductOperators::new(params.s, params.i)?;
    let [sx, sy, sz] = &ops.s;
    let [ix, iy, iz] = &ops.i;
    let g = [params.g_x, params.g_y, params.g_z];
    let mut h = sz * iz * c(params.a_par) + (sx * ix + sy * iy) * c(params.a_perp) + iz * iz * c(params.p);
    for axis in 0..3 {
        let b = params.b0[axis];
        if b != 0.0 {
            h += &ops.s[axis] * c(MU_B_MHZ_PER_T * g[axis] * b);
            h += &ops.i[axis] * c(MU_N_MHZ_PER_T * params.g_i * b);
        }
    }
    Ok(h)
}

/// Operator coupling the RF field (along the molecular z axis) to the spins,
/// `μB g_z S_z + μN g_I I_z`, in MHz per tesla on the product basis.
pub fn drive_operator(params: &SpinSystemParams) -> Result<CMatrix> {
    let ops = ProductOperators::new(params.s, params.i)?;
    Ok(&ops.s[2] * c(MU_B_MHZ_PER_T * params.g_z) + &ops.i[2] * c(MU_N_MHZ_PER_T * params.g_i))
}

/// Eigen-energies (MHz, ascending) and eigenvectors (columns, product basis).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    pub states: CMatrix,
    /// Unit vector along which `|m_S, m_I>` labels are quantized.
    pub quantization_axis: Option<[f64; 3]>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `U† A U`: expresses a product-basis operator in the eigenbasis.
    pub fn to_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        self.states.adjoint() * op * &self.states
    }

    /// Multiplies eigenvector `k` by `phase` (unit modulus).
    pub fn rephase(&mut self, k: usize, phase: C64) {
        let mut col = self.states.column_mut(k);
        col *= phase;
    }

    pub fn with_axis(mut self, b0: [f64; 3]) -> Self {
        let norm = b0.iter().map(|b| b * b).sum::<f64>().sqrt();
        self.quantization_axis = (norm > 0.0).then(|| [b0[0] / norm, b0[1] / norm, b0[2] / norm]);
        self
    }
}

/// Diagonalizes a Hermitian matrix. Degenerate subspaces come back in an
/// arbitrary orthonormal basis.
pub fn diagonalize(h: &CMatrix) -> Result<EigenSystem> {
    ensure_hermitian(h, 1e-10)?;
    let (energies, states) = eigh(h);
    Ok(EigenSystem {
        energies,
        states,
        quantization_axis: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, frobenius, hermiticity_error};

    fn default_h() -> CMatrix {
        build_static_hamiltonian(&SpinSystemParams::default()).unwrap()
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let params = SpinSystemParams {
            a_par: 0.0,
            a_perp: 0.0,
            p: 0.0,
            b0: [0.0; 3],
            ..SpinSystemParams::default()
        };
        let h = build_static_hamiltonian(&params).unwrap();
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn trace_is_quadrupolar_only() {
        let h = default_h();
        assert!((h.trace().re - 35.0 * -66.0).abs() < 1e-9);
        assert!(hermiticity_error(&h) < 1e-12);
    }

    #[test]
    fn default_spectrum_is_nondegenerate_and_reconstructs() {
        let h = default_h();
        let eig = diagonalize(&h).unwrap();
        assert_eq!(eig.dim(), 12);
        assert!(eig.energies.windows(2).all(|w| w[1] - w[0] > 1.0));
        let e: Vec<_> = eig.energies.iter().map(|&x| c(x)).collect();
        let rebuilt = &eig.states * diag(&e) * eig.states.adjoint();
        assert!(frobenius(&(rebuilt - &h)) / frobenius(&h) < 1e-8);
        let gram = eig.states.adjoint() * &eig.states - identity(12);
        assert!(gram.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn diagonal_input_gives_canonical_vectors() {
        let h = diag(&[c(3.0), c(-1.0), c(2.0)]);
        let eig = diagonalize(&h).unwrap();
        assert_eq!(eig.energies, vec![-1.0, 2.0, 3.0]);
        let expected = [1usize, 2, 0];
        for (k, &row) in expected.iter().enumerate() {
            assert!((eig.states[(row, k)].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = identity(3);
        h[(0, 2)] = c(0.5);
        assert!(diagonalize(&h).is_err());
    }
}
