//! Random generators shared by unit tests, integration tests and benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::gaussian::{validate_gaussian, GaussianFieldSpec};
use crate::linalg::{c, hermitian_part, identity};
use crate::{CMatrix, RMatrix};

fn normal_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-ish random unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let qr = normal_complex(rng, n, n).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for row in 0..n {
            u[(row, k)] *= phase;
        }
    }
    u
}

/// A random valid `(N, M)` obtained as a squeezed thermal state:
/// `b = U a + V a#` with Bloch-Messiah `U = A cosh(r) B`, `V = A sinh(r) B#`
/// acting on independent thermal modes (some of them in the vacuum).
pub fn random_gaussian_spec(n: usize, seed: u64) -> GaussianFieldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_unitary(n, &mut rng);
    let b = random_unitary(n, &mut rng);
    let mut cosh = CMatrix::zeros(n, n);
    let mut sinh = CMatrix::zeros(n, n);
    let mut occ = CMatrix::zeros(n, n);
    for k in 0..n {
        let r: f64 = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.0) };
        cosh[(k, k)] = c(r.cosh(), 0.0);
        sinh[(k, k)] = c(r.sinh(), 0.0);
        let nk: f64 = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) };
        occ[(k, k)] = c(nk, 0.0);
    }
    let u = &a * cosh * &b;
    let v = &a * sinh * b.conjugate();
    let plus = identity(n) + &occ;
    let n_mat = u.conjugate() * &occ * u.transpose() + v.conjugate() * &plus * v.transpose();
    let m_mat = &u * &plus * v.transpose() + &v * &occ * u.transpose();
    let n_mat = hermitian_part(&n_mat);
    let m_mat = (&m_mat + m_mat.transpose()).scale(0.5);
    validate_gaussian(&n_mat, &m_mat).expect("squeezed thermal states are valid")
}

/// A random admissible `m × n` measurement `G = X U` with `X` real of full
/// rank and `U` unitary, so that `G G* = X Xᵀ` is real.
pub fn random_measurement(m: usize, n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary(n, &mut rng);
    loop {
        let x = RMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = x.clone().svd(false, false).singular_values;
        let (hi, lo) = s.iter().fold((0.0f64, f64::INFINITY), |(h, l), &v| (h.max(v), l.min(v)));
        if lo > 1e-2 * hi {
            return crate::linalg::to_complex(&x) * u;
        }
    }
}

/// Random density matrix of dimension `d` with full rank.
pub fn random_density(d: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = normal_complex(&mut rng, d, d);
    let rho = &a * a.adjoint();
    let tr = crate::linalg::trace(&rho).re;
    hermitian_part(&rho.unscale(tr))
}

/// Random Hermitian matrix with standard normal entries.
pub fn random_hermitian(d: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    hermitian_part(&normal_complex(&mut rng, d, d))
}

/// Random complex matrix with standard normal entries.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normal_complex(&mut rng, rows, cols)
}
