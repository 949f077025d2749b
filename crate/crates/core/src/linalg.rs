//! Small dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest entry of `|A - A^†|`.
pub fn hermiticity_error(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn ensure_hermitian(a: &CMatrix, tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidParameter(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let err = hermiticity_error(a);
    if err > tol * scale {
        return Err(Error::NotHermitian(err));
    }
    Ok(())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral norm (largest singular value).
pub fn operator_norm(a: &CMatrix) -> f64 {
    a.clone().singular_values().max()
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// Returns `(energies, vectors)` where column `k` of `vectors` is the
/// eigenvector for `energies[k]`.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    // symmetrize so tiny round-off asymmetry cannot leak into the solver
    let sym = (h + h.adjoint()) * c(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (energies, vectors)
}

/// `exp(-2πi H t)` for Hermitian `H` (MHz) and `t` (μs), via the spectral
/// decomposition.
pub fn unitary_propagator(h: &CMatrix, t_us: f64) -> CMatrix {
    let (e, v) = eigh(h);
    let phases = CVector::from_iterator(
        e.len(),
        e.iter().map(|&ek| cis(-2.0 * std::f64::consts::PI * ek * t_us)),
    );
    let vd = v.adjoint();
    let mut scaled = v;
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[k];
    }
    scaled * vd
}

/// Distance between `a` and `b` after removing the best global phase,
/// measured as the largest entry of `|a - e^{iφ} b|`.
pub fn distance_up_to_phase(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap: C64 = b.iter().zip(a.iter()).map(|(y, x)| y.conj() * x).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        c(1.0)
    };
    (a - b * phase).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `|U U^† - 1|`.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u * u.adjoint() - identity(n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Two-level rotation `exp(-i θ/2 (cos φ σ_y + sin φ σ_x))` embedded on the
/// ordered level pair `(a, b)` of a `dim`-level space.
///
/// `φ = 0` is a rotation about y; the off-diagonal entry `(a, b)` equals
/// `-sin(θ/2) e^{iφ}`.
pub fn level_rotation(dim: usize, a: usize, b: usize, theta: f64, phi: f64) -> CMatrix {
    let mut u = identity(dim);
    let (s, co) = (theta / 2.0).sin_cos();
    u[(a, a)] = c(co);
    u[(b, b)] = c(co);
    u[(a, b)] = -cis(phi) * s;
    u[(b, a)] = cis(-phi) * s;
    u
}

pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}
