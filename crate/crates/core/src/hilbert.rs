//! Operators and superoperators on a finite-dimensional system space.
//!
//! Two-level systems use the basis order `0 = excited`, `1 = ground`, so
//! `σz = diag(1, -1)` and `σ- = |g⟩⟨e|`. Bosonic modes are truncated Fock
//! spaces with `|0⟩` first.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, c, hermitian_residual, ONE, ZERO};
use crate::CMatrix;

/// A `d × d` operator on the system space.
pub type Operator = CMatrix;

/// Tolerance on `‖H − H†‖_max` for Hamiltonian inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Truncated bosonic annihilation operator, `a[j, j+1] = √(j+1)`.
pub fn annihilation_op(d: usize) -> Result<Operator> {
    if d < 2 {
        return Err(Error::InvalidDimension {
            dim: d,
            reason: "ladder operators need at least two levels",
        });
    }
    let mut a = Operator::zeros(d, d);
    for j in 0..d - 1 {
        a[(j, j + 1)] = c(((j + 1) as f64).sqrt(), 0.0);
    }
    Ok(a)
}

pub fn creation_op(d: usize) -> Result<Operator> {
    Ok(annihilation_op(d)?.adjoint())
}

pub fn number_op(d: usize) -> Operator {
    Operator::from_fn(d, d, |i, j| if i == j { c(i as f64, 0.0) } else { ZERO })
}

/// Projector `|j⟩⟨k|` in dimension `d`.
pub fn outer(d: usize, j: usize, k: usize) -> Result<Operator> {
    if j >= d || k >= d {
        return Err(Error::InvalidArgument(format!(
            "basis index ({j}, {k}) out of range for dimension {d}"
        )));
    }
    let mut m = Operator::zeros(d, d);
    m[(j, k)] = ONE;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

impl FromStr for Pauli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Pauli::X),
            "y" => Ok(Pauli::Y),
            "z" => Ok(Pauli::Z),
            "plus" => Ok(Pauli::Plus),
            "minus" => Ok(Pauli::Minus),
            other => Err(Error::InvalidArgument(format!("unknown Pauli operator '{other}'"))),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::X => "x",
            Pauli::Y => "y",
            Pauli::Z => "z",
            Pauli::Plus => "plus",
            Pauli::Minus => "minus",
        };
        f.write_str(s)
    }
}

pub fn pauli(p: Pauli) -> Operator {
    let (a, b, cc, d) = match p {
        Pauli::X => (ZERO, ONE, ONE, ZERO),
        Pauli::Y => (ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO),
        Pauli::Z => (ONE, ZERO, ZERO, -ONE),
        Pauli::Plus => (ZERO, ONE, ZERO, ZERO),
        Pauli::Minus => (ZERO, ZERO, ONE, ZERO),
    };
    Operator::from_row_slice(2, 2, &[a, b, cc, d])
}

pub fn pauli_by_name(name: &str) -> Result<Operator> {
    Ok(pauli(name.parse()?))
}

fn check_square(what: &str, op: &Operator, d: usize) -> Result<()> {
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::mismatch(
            what,
            format!("{d}x{d}"),
            format!("{}x{}", op.nrows(), op.ncols()),
        ));
    }
    Ok(())
}

pub(crate) fn check_generator(h: &Operator, l: &[Operator]) -> Result<usize> {
    let d = h.nrows();
    check_square("Hamiltonian", h, d)?;
    for (k, lk) in l.iter().enumerate() {
        check_square(&format!("coupling L[{k}]"), lk, d)?;
    }
    let residual = hermitian_residual(h);
    if residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            what: "Hamiltonian".into(),
            residual,
        });
    }
    Ok(d)
}

/// Heisenberg-picture generator
/// `−i[X,H] + Σ_k (L_k† X L_k − ½{L_k† L_k, X})`.
pub fn lindblad_heisenberg(h: &Operator, l: &[Operator], x: &Operator) -> Result<Operator> {
    let d = check_generator(h, l)?;
    check_square("observable", x, d)?;
    let mut out = (x * h - h * x) * c(0.0, -1.0);
    for lk in l {
        let ld = lk.adjoint();
        let ldl = &ld * lk;
        out += &ld * x * lk - (&ldl * x + x * &ldl).scale(0.5);
    }
    Ok(out)
}

/// Schrödinger-picture generator
/// `i[ρ,H] + Σ_k (L_k ρ L_k† − ½{L_k† L_k, ρ})`.
pub fn liouvillian_apply(h: &Operator, l: &[Operator], rho: &Operator) -> Result<Operator> {
    let d = check_generator(h, l)?;
    check_square("density matrix", rho, d)?;
    let mut out = (rho * h - h * rho) * c(0.0, 1.0);
    for lk in l {
        let ld = lk.adjoint();
        let ldl = &ld * lk;
        out += lk * rho * &ld - (&ldl * rho + rho * &ldl).scale(0.5);
    }
    Ok(out)
}

/// Matrix of the Liouvillian acting on column-stacked density matrices,
/// using `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.
pub fn liouvillian_matrix(h: &Operator, l: &[Operator]) -> Result<CMatrix> {
    let d = check_generator(h, l)?;
    let id = linalg::identity(d);
    let mut sup = (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)) * c(0.0, -1.0);
    for lk in l {
        let ldl = lk.adjoint() * lk;
        sup += linalg::kron(&lk.conjugate(), lk)
            - (linalg::kron(&id, &ldl) + linalg::kron(&ldl.transpose(), &id)).scale(0.5);
    }
    Ok(sup)
}

/// Relative singular-value threshold below which a Liouvillian direction is
/// counted as part of the null space.
const NULL_TOL: f64 = 1e-9;

/// Unique stationary state of the Liouvillian.
pub fn steady_state(h: &Operator, l: &[Operator]) -> Result<Operator> {
    let sup = liouvillian_matrix(h, l)?;
    let d = h.nrows();
    let s = linalg::singular_values(&sup);
    let scale = s.first().copied().unwrap_or(0.0).max(1.0);
    let nullity = s.iter().filter(|&&v| v <= NULL_TOL * scale).count();
    if nullity == 0 {
        return Err(Error::NoSteadyState {
            smallest: s.last().copied().unwrap_or(0.0),
        });
    }
    if nullity > 1 {
        return Err(Error::DegenerateSteadyState { nullity });
    }

    // Trace preservation makes the rows linearly dependent; swap the ρ_00
    // equation for the normalisation Tr ρ = 1 and solve.
    let mut a = sup;
    let mut b = DVector::zeros(d * d);
    for col in 0..d * d {
        a[(0, col)] = ZERO;
    }
    for j in 0..d {
        a[(0, j * d + j)] = ONE;
    }
    b[0] = ONE;
    let x = a.lu().solve(&b).ok_or(Error::NoSteadyState { smallest: 0.0 })?;
    let rho = linalg::hermitian_part(&linalg::unvec_col(&x, d));

    let residual = linalg::max_abs(&liouvillian_apply(h, l, &rho)?);
    if residual > 1e-10 {
        return Err(Error::NoSteadyState { smallest: residual });
    }
    let min_eig = linalg::min_eigenvalue(&rho);
    if min_eig < -1e-10 {
        return Err(Error::NotPositive {
            what: "steady state".into(),
            min_eigenvalue: min_eig,
        });
    }
    Ok(rho)
}
