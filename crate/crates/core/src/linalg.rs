//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{CMatrix, RMatrix};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest entry modulus, `0` for an empty matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn symmetric_residual(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.transpose())
}

/// `(m + m†) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn is_diagonal(m: &CMatrix) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == ZERO))
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix. Closed form for 2×2.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].re,
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
            let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            0.5 * (a + d) - half_gap
        }
        _ => hermitian_eigen(m).0[0],
    }
}

/// Hermitian positive square root. Eigenvalues down to `-clamp` are treated
/// as roundoff and set to zero; anything more negative is returned as `Err`
/// carrying the offending eigenvalue.
pub fn psd_sqrt(m: &CMatrix, clamp: f64) -> Result<CMatrix, f64> {
    psd_sqrt_floor(m, clamp, 0.0)
}

/// As [`psd_sqrt`], additionally zeroing eigenvalues at or below `floor`.
pub fn psd_sqrt_floor(m: &CMatrix, clamp: f64, floor: f64) -> Result<CMatrix, f64> {
    let root = |v: f64| if v <= floor { ZERO } else { c(v.sqrt(), 0.0) };
    if is_diagonal(m) {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            let v = m[(i, i)].re;
            if v < -clamp {
                return Err(v);
            }
            out[(i, i)] = root(v);
        }
        return Ok(out);
    }
    let (values, vectors) = hermitian_eigen(m);
    if let Some(&worst) = values.iter().find(|&&v| v < -clamp) {
        return Err(worst);
    }
    let roots = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| root(v)),
    ));
    Ok(&vectors * roots * vectors.adjoint())
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with singular values below `rel_tol * σ_max` dropped.
pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(&top) if top == 0.0 => 0,
        Some(&top) => s.iter().filter(|&&v| v > rel_tol * top).count(),
    }
}

pub fn rank_real(m: &RMatrix, rel_tol: f64) -> usize {
    rank(&m.map(|x| c(x, 0.0)), rel_tol)
}

pub fn condition_number(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Moore-Penrose pseudo-inverse dropping singular values below
/// `rel_tol * σ_max`.
pub fn pinv(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let (r, cols) = m.shape();
    if m.is_empty() {
        return CMatrix::zeros(cols, r);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let top = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut out = CMatrix::zeros(cols, r);
    if top == 0.0 {
        return out;
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * top {
            let vk = v_t.row(k).adjoint();
            let uk = u.column(k).adjoint();
            out += (vk * uk).scale(1.0 / s);
        }
    }
    out
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| c(x, 0.0))
}

/// Column-stacking vectorisation.
pub fn vec_col(m: &CMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvec_col(v: &nalgebra::DVector<Complex64>, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}
