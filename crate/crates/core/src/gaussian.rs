//! Zero-mean Gaussian field states and their doubled-vacuum realisation.
//!
//! A Gaussian state of `n` boson fields is fixed by `N = [⟨b_j* b_k⟩]` and
//! `M = [⟨b_j b_k⟩]`. Its annihilators are realised on two independent vacuum
//! fields as `B = C1 A1 + C2 A2 + C3 A2#`, which is what lets the vacuum
//! filter be reused for arbitrary Gaussian inputs.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::linalg::{self, identity, max_abs, max_abs_diff};
use crate::CMatrix;

/// Hermiticity / symmetry tolerance on `N` and `M`.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Allowed negative eigenvalue of `F` (roundoff).
pub const PSD_TOL: f64 = 1e-10;
/// Default residual tolerance for the factorisation.
pub const FACTOR_TOL: f64 = 1e-10;
/// Eigenvalues of `N` and of `I + Nᵀ − C2C2*` below this (relative) level
/// are treated as exact zeros.
pub const NULL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GaussianFieldSpec {
    n_mat: CMatrix,
    m_mat: CMatrix,
    f: CMatrix,
    f_min_eigenvalue: f64,
    coefficients: OnceLock<ArakiWoodsCoefficients>,
}

impl GaussianFieldSpec {
    /// Vacuum state of `n` fields.
    pub fn vacuum(n: usize) -> Self {
        validate_gaussian(&CMatrix::zeros(n, n), &CMatrix::zeros(n, n))
            .expect("vacuum is a valid Gaussian state")
    }

    /// Single-field thermal state with mean photon number `n_th`.
    pub fn thermal(n_th: f64) -> Result<Self> {
        validate_gaussian(
            &CMatrix::from_element(1, 1, linalg::c(n_th, 0.0)),
            &CMatrix::zeros(1, 1),
        )
    }

    /// Single-field squeezed vacuum with squeezing parameter `r` and phase
    /// `phi`: `N = sinh² r`, `M = e^{iφ} sinh r cosh r`.
    pub fn squeezed_vacuum(r: f64, phi: f64) -> Result<Self> {
        let n = r.sinh().powi(2);
        let m = num_complex::Complex64::from_polar(r.sinh() * r.cosh(), phi);
        validate_gaussian(&CMatrix::from_element(1, 1, linalg::c(n, 0.0)), &CMatrix::from_element(1, 1, m))
    }

    pub fn channels(&self) -> usize {
        self.n_mat.nrows()
    }

    pub fn n_matrix(&self) -> &CMatrix {
        &self.n_mat
    }

    pub fn m_matrix(&self) -> &CMatrix {
        &self.m_mat
    }

    /// `F = [[I + Nᵀ, M], [M*, N]]`.
    pub fn f_matrix(&self) -> &CMatrix {
        &self.f
    }

    pub fn f_min_eigenvalue(&self) -> f64 {
        self.f_min_eigenvalue
    }

    pub fn is_vacuum(&self) -> bool {
        self.n_mat.iter().chain(self.m_mat.iter()).all(|z| *z == linalg::ZERO)
    }

    /// Factorisation at the default tolerance, computed once.
    pub fn coefficients(&self) -> Result<&ArakiWoodsCoefficients> {
        if let Some(c) = self.coefficients.get() {
            return Ok(c);
        }
        let c = factorize(self, FACTOR_TOL)?;
        Ok(self.coefficients.get_or_init(|| c))
    }
}

fn f_matrix(n_mat: &CMatrix, m_mat: &CMatrix) -> CMatrix {
    let n = n_mat.nrows();
    let mut f = CMatrix::zeros(2 * n, 2 * n);
    f.view_mut((0, 0), (n, n)).copy_from(&(identity(n) + n_mat.transpose()));
    f.view_mut((0, n), (n, n)).copy_from(m_mat);
    f.view_mut((n, 0), (n, n)).copy_from(&m_mat.adjoint());
    f.view_mut((n, n), (n, n)).copy_from(n_mat);
    f
}

/// Check `N = N*`, `M = Mᵀ` and `F ⪰ 0`.
pub fn validate_gaussian(n_mat: &CMatrix, m_mat: &CMatrix) -> Result<GaussianFieldSpec> {
    let n = n_mat.nrows();
    if n == 0 || !n_mat.is_square() {
        return Err(Error::mismatch("N", "non-empty square matrix", format!("{:?}", n_mat.shape())));
    }
    if m_mat.shape() != (n, n) {
        return Err(Error::mismatch("M", format!("{n}x{n}"), format!("{}x{}", m_mat.nrows(), m_mat.ncols())));
    }
    let residual = linalg::hermitian_residual(n_mat);
    if residual > STRUCTURE_TOL {
        return Err(Error::NotHermitian { what: "N".into(), residual });
    }
    let residual = linalg::symmetric_residual(m_mat);
    if residual > STRUCTURE_TOL {
        return Err(Error::NotSymmetric { what: "M".into(), residual });
    }
    let f = f_matrix(n_mat, m_mat);
    let f_min_eigenvalue = linalg::min_eigenvalue(&f);
    if f_min_eigenvalue < -PSD_TOL {
        return Err(Error::NotPositive {
            what: "F = [[I+Nᵀ, M], [M*, N]]".into(),
            min_eigenvalue: f_min_eigenvalue,
        });
    }
    if n == 1 {
        let nn = n_mat[(0, 0)].re;
        let excess = m_mat[(0, 0)].norm_sqr() - nn * (nn + 1.0);
        if nn < -PSD_TOL || excess > PSD_TOL {
            return Err(Error::NotPositive {
                what: "single-field condition |M|² ≤ N(N+1)".into(),
                min_eigenvalue: f_min_eigenvalue,
            });
        }
    }
    Ok(GaussianFieldSpec {
        n_mat: n_mat.clone(),
        m_mat: m_mat.clone(),
        f,
        f_min_eigenvalue,
        coefficients: OnceLock::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationResiduals {
    /// `‖C1C1* + C2C2* − C3C3* − I‖_max`
    pub commutation: f64,
    /// `‖C3C3* − Nᵀ‖_max`
    pub number: f64,
    /// `‖C2C3ᵀ − M‖_max`
    pub pair: f64,
}

impl FactorizationResiduals {
    pub fn max(&self) -> f64 {
        self.commutation.max(self.number).max(self.pair)
    }
}

/// Coefficients of `B = C1 A1 + C2 A2 + C3 A2#`, together with the
/// correlations they were built for.
#[derive(Debug, Clone)]
pub struct ArakiWoodsCoefficients {
    pub c1: CMatrix,
    pub c2: CMatrix,
    pub c3: CMatrix,
    n_mat: CMatrix,
    m_mat: CMatrix,
    pub residuals: FactorizationResiduals,
}

impl ArakiWoodsCoefficients {
    pub fn channels(&self) -> usize {
        self.c1.nrows()
    }

    pub fn n_matrix(&self) -> &CMatrix {
        &self.n_mat
    }

    pub fn m_matrix(&self) -> &CMatrix {
        &self.m_mat
    }

    /// Residuals of the three defining identities against `(N, M)`.
    pub fn residuals_against(&self, n_mat: &CMatrix, m_mat: &CMatrix) -> FactorizationResiduals {
        let n = self.channels();
        let c3c3 = &self.c3 * self.c3.adjoint();
        let lhs = &self.c1 * self.c1.adjoint() + &self.c2 * self.c2.adjoint() - &c3c3;
        FactorizationResiduals {
            commutation: max_abs_diff(&lhs, &identity(n)),
            number: max_abs_diff(&c3c3, &n_mat.transpose()),
            pair: max_abs_diff(&(&self.c2 * self.c3.transpose()), m_mat),
        }
    }
}

/// Square-root / pseudo-inverse construction:
/// `R = √N`, `C3 = R#`, `C2 = M R⁺`, `C1 = √(I + Nᵀ − C2 C2*)`.
pub fn factorize(spec: &GaussianFieldSpec, tol: f64) -> Result<ArakiWoodsCoefficients> {
    let n = spec.channels();
    let (n_mat, m_mat) = (spec.n_matrix(), spec.m_matrix());
    let (c1, c2, c3) = if spec.is_vacuum() {
        (identity(n), CMatrix::zeros(n, n), CMatrix::zeros(n, n))
    } else {
        // Eigenvalues at roundoff level are set to zero so that noise in M
        // along the null space of N is not amplified by the pseudo-inverse.
        // Negative eigenvalues are clamped; genuinely invalid input shows up
        // in the residual check below.
        let floor = NULL_TOL * max_abs(n_mat).max(1.0);
        let r = linalg::psd_sqrt_floor(n_mat, f64::INFINITY, floor).expect("clamp is unbounded");
        let c3 = r.conjugate();
        let c2 = m_mat * linalg::pinv(&r, tol);
        let p = linalg::hermitian_part(&(identity(n) + n_mat.transpose() - &c2 * c2.adjoint()));
        let floor = NULL_TOL * max_abs(&p).max(1.0);
        let c1 = linalg::psd_sqrt_floor(&p, f64::INFINITY, floor).expect("clamp is unbounded");
        (c1, c2, c3)
    };
    let mut coeffs = ArakiWoodsCoefficients {
        c1,
        c2,
        c3,
        n_mat: n_mat.clone(),
        m_mat: m_mat.clone(),
        residuals: FactorizationResiduals { commutation: 0.0, number: 0.0, pair: 0.0 },
    };
    let residuals = coeffs.residuals_against(n_mat, m_mat);
    coeffs.residuals = residuals;
    if residuals.max() > tol {
        return Err(Error::Factorization {
            commutation: residuals.commutation,
            number: residuals.number,
            pair: residuals.pair,
        });
    }
    Ok(coeffs)
}

/// Coefficients of the increment products `dB_j dB_k*`, `dB_j dB_k`,
/// `dB_j* dB_k*` and `dB_j* dB_k` (each times `dt`).
#[derive(Debug, Clone, PartialEq)]
pub struct ItoTable {
    pub db_dbdag: CMatrix,
    pub db_db: CMatrix,
    pub dbdag_dbdag: CMatrix,
    pub dbdag_db: CMatrix,
}

impl ItoTable {
    /// Recompute the table from the vacuum table and the realisation
    /// `B = C1 A1 + C2 A2 + C3 A2#`.
    pub fn from_coefficients(c: &ArakiWoodsCoefficients) -> Self {
        ItoTable {
            db_dbdag: &c.c1 * c.c1.adjoint() + &c.c2 * c.c2.adjoint(),
            db_db: &c.c2 * c.c3.transpose(),
            dbdag_dbdag: c.c3.conjugate() * c.c2.adjoint(),
            dbdag_db: c.c3.conjugate() * c.c3.transpose(),
        }
    }

    pub fn max_deviation(&self, other: &ItoTable) -> f64 {
        [
            max_abs_diff(&self.db_dbdag, &other.db_dbdag),
            max_abs_diff(&self.db_db, &other.db_db),
            max_abs_diff(&self.dbdag_dbdag, &other.dbdag_dbdag),
            max_abs_diff(&self.dbdag_db, &other.dbdag_db),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn ito_table(spec: &GaussianFieldSpec) -> ItoTable {
    let n = spec.channels();
    let (n_mat, m_mat) = (spec.n_matrix(), spec.m_matrix());
    ItoTable {
        db_dbdag: identity(n) + n_mat.transpose(),
        db_db: m_mat.clone(),
        // entry (j, k) is conj(M_kj)
        dbdag_dbdag: m_mat.adjoint(),
        dbdag_db: n_mat.clone(),
    }
}

/// Coupling vector on the doubled vacuum field:
/// `(C1* L, C2* L − C3ᵀ L#)`, length `2n`.
pub fn lift_coupling(l: &[Operator], c: &ArakiWoodsCoefficients) -> Result<Vec<Operator>> {
    let n = c.channels();
    if l.len() != n {
        return Err(Error::mismatch("coupling vector length", n, l.len()));
    }
    let d = l.first().map(|op| op.nrows()).unwrap_or(0);
    for (k, op) in l.iter().enumerate() {
        if op.shape() != (d, d) {
            return Err(Error::mismatch(format!("coupling L[{k}]"), format!("{d}x{d}"), format!("{:?}", op.shape())));
        }
    }
    let ldag: Vec<Operator> = l.iter().map(|op| op.adjoint()).collect();
    let c1_dag = c.c1.adjoint();
    let c2_dag = c.c2.adjoint();
    let c3_t = c.c3.transpose();
    let mut out = Vec::with_capacity(2 * n);
    for j in 0..n {
        let mut op = Operator::zeros(d, d);
        for k in 0..n {
            op += &l[k] * c1_dag[(j, k)];
        }
        out.push(op);
    }
    for j in 0..n {
        let mut op = Operator::zeros(d, d);
        for k in 0..n {
            op += &l[k] * c2_dag[(j, k)] - &ldag[k] * c3_t[(j, k)];
        }
        out.push(op);
    }
    Ok(out)
}

/// `G G*` real-part tolerance used by the covariance consistency check.
pub const COVARIANCE_TOL: f64 = 1e-10;

/// Measurement matrix on the doubled vacuum field,
/// `G̃ = [G C1#, G# C3 + G C2#]` (`m × 2n`).
pub fn lift_measurement(g: &CMatrix, c: &ArakiWoodsCoefficients) -> Result<CMatrix> {
    let n = c.channels();
    if g.ncols() != n {
        return Err(Error::mismatch("measurement columns", n, g.ncols()));
    }
    let m = g.nrows();
    let mut lifted = CMatrix::zeros(m, 2 * n);
    lifted.view_mut((0, 0), (m, n)).copy_from(&(g * c.c1.conjugate()));
    lifted
        .view_mut((0, n), (m, n))
        .copy_from(&(g.conjugate() * &c.c3 + g * c.c2.conjugate()));

    let residual = max_abs_diff(
        &(lifted.conjugate() * lifted.transpose()),
        &measurement_covariance(g, c.n_matrix(), c.m_matrix()),
    );
    let scale = max_abs(g).powi(2).max(1.0);
    if residual > COVARIANCE_TOL * scale {
        return Err(Error::CovarianceConsistency { residual });
    }
    Ok(lifted)
}

/// `dY dYᵀ / dt` from the Itō table:
/// `G#(I+Nᵀ)Gᵀ + G N G* + G# M G* + G M# Gᵀ`.
pub fn measurement_covariance(g: &CMatrix, n_mat: &CMatrix, m_mat: &CMatrix) -> CMatrix {
    let n = n_mat.nrows();
    let gc = g.conjugate();
    &gc * (identity(n) + n_mat.transpose()) * g.transpose()
        + g * n_mat * g.adjoint()
        + &gc * m_mat * g.adjoint()
        + g * m_mat.conjugate() * g.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pauli, Pauli};
    use crate::linalg::c;
    use crate::testing::random_gaussian_spec;
    use proptest::prelude::*;

    fn scalar(z: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c(z, 0.0))
    }

    #[test]
    fn validation_examples() {
        for n in 1..4 {
            let spec = GaussianFieldSpec::vacuum(n);
            let mut expect = CMatrix::zeros(2 * n, 2 * n);
            expect.view_mut((0, 0), (n, n)).fill_with_identity();
            assert_eq!(spec.f_matrix(), &expect);
        }
        let thermal = validate_gaussian(&scalar(0.25), &scalar(0.0)).unwrap();
        assert_eq!(thermal.f_matrix()[(0, 0)], c(1.25, 0.0));
        assert_eq!(thermal.f_matrix()[(1, 1)], c(0.25, 0.0));

        let err = validate_gaussian(&scalar(0.25), &scalar(0.6)).unwrap_err();
        match err {
            Error::NotPositive { min_eigenvalue, .. } => assert!(min_eigenvalue < -1e-3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn structural_rejections() {
        let n = CMatrix::from_row_slice(2, 2, &[c(0.1, 0.0), c(0.0, 0.1), c(0.0, 0.1), c(0.1, 0.0)]);
        assert!(matches!(validate_gaussian(&n, &CMatrix::zeros(2, 2)), Err(Error::NotHermitian { .. })));
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(validate_gaussian(&CMatrix::zeros(2, 2), &m), Err(Error::NotSymmetric { .. })));
        assert!(matches!(validate_gaussian(&scalar(0.0), &CMatrix::zeros(2, 2)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn factorize_vacuum_and_thermal() {
        let vac = GaussianFieldSpec::vacuum(2);
        let co = factorize(&vac, FACTOR_TOL).unwrap();
        assert_eq!(co.c1, identity(2));
        assert_eq!(co.c2, CMatrix::zeros(2, 2));
        assert_eq!(co.c3, CMatrix::zeros(2, 2));

        let th = GaussianFieldSpec::thermal(0.25).unwrap();
        let co = factorize(&th, FACTOR_TOL).unwrap();
        assert!((co.c3[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(co.c2[(0, 0)], c(0.0, 0.0));
        assert!((co.c1[(0, 0)].re - 1.118_033_988_749_895).abs() < 1e-15);
        assert!(co.residuals.max() < 1e-15);
    }

    #[test]
    fn factorize_squeezed_vacuum() {
        let r = 0.5f64;
        let sq = GaussianFieldSpec::squeezed_vacuum(r, 0.0).unwrap();
        assert!((sq.n_matrix()[(0, 0)].re - 0.271_540_3).abs() < 1e-7);
        assert!((sq.m_matrix()[(0, 0)].re - 0.587_600_5).abs() < 1e-7);
        let co = factorize(&sq, FACTOR_TOL).unwrap();
        assert!((co.c3[(0, 0)].re - r.sinh()).abs() < 1e-14);
        assert!((co.c2[(0, 0)].re - r.cosh()).abs() < 1e-14);
        assert_eq!(co.c1[(0, 0)], c(0.0, 0.0));
        assert!(co.residuals.max() < 1e-12);
    }

    #[test]
    fn factorize_rejects_unsupported_pairing() {
        // M lives outside the range of N: bypass validation to hit the residual check.
        let bad = GaussianFieldSpec {
            n_mat: CMatrix::zeros(1, 1),
            m_mat: scalar(0.3),
            f: CMatrix::zeros(2, 2),
            f_min_eigenvalue: 0.0,
            coefficients: OnceLock::new(),
        };
        assert!(matches!(factorize(&bad, FACTOR_TOL), Err(Error::Factorization { .. })));
    }

    #[test]
    fn ito_table_examples() {
        let vac = ito_table(&GaussianFieldSpec::vacuum(2));
        assert_eq!(vac.db_dbdag, identity(2));
        assert!(max_abs(&vac.db_db) == 0.0 && max_abs(&vac.dbdag_dbdag) == 0.0 && max_abs(&vac.dbdag_db) == 0.0);

        let th = ito_table(&GaussianFieldSpec::thermal(0.25).unwrap());
        assert_eq!(
            (th.db_dbdag[(0, 0)].re, th.db_db[(0, 0)].re, th.dbdag_dbdag[(0, 0)].re, th.dbdag_db[(0, 0)].re),
            (1.25, 0.0, 0.0, 0.25)
        );
    }

    #[test]
    fn lift_examples() {
        let sm = pauli(Pauli::Minus);
        let sp = pauli(Pauli::Plus);
        let vac = GaussianFieldSpec::vacuum(1);
        let lifted = lift_coupling(&[sm.clone()], vac.coefficients().unwrap()).unwrap();
        assert_eq!(lifted[0], sm);
        assert_eq!(max_abs(&lifted[1]), 0.0);
        let g = CMatrix::from_element(1, 1, c(0.3, 0.4));
        let gt = lift_measurement(&g, vac.coefficients().unwrap()).unwrap();
        assert_eq!(gt[(0, 0)], g[(0, 0)]);
        assert_eq!(gt[(0, 1)], c(0.0, 0.0));

        let th = GaussianFieldSpec::thermal(0.25).unwrap();
        let lifted = lift_coupling(&[sm.clone()], th.coefficients().unwrap()).unwrap();
        assert!(max_abs_diff(&lifted[0], &sm.scale(1.25f64.sqrt())) < 1e-15);
        assert!(max_abs_diff(&lifted[1], &sp.scale(-0.5)) < 1e-15);
        let gt = lift_measurement(&scalar(1.0), th.coefficients().unwrap()).unwrap();
        assert!((gt[(0, 0)].re - 1.25f64.sqrt()).abs() < 1e-15);
        assert!((gt[(0, 1)].re - 0.5).abs() < 1e-15);

        let r = 0.5f64;
        let sq = GaussianFieldSpec::squeezed_vacuum(r, 0.0).unwrap();
        let lifted = lift_coupling(&[sm.clone()], sq.coefficients().unwrap()).unwrap();
        assert_eq!(max_abs(&lifted[0]), 0.0);
        let expect = sm.scale(r.cosh()) - sp.scale(r.sinh());
        assert!(max_abs_diff(&lifted[1], &expect) < 1e-14);
        let gt = lift_measurement(&scalar(1.0), sq.coefficients().unwrap()).unwrap();
        assert_eq!(gt[(0, 0)], c(0.0, 0.0));
        assert!((gt[(0, 1)].re - r.exp()).abs() < 1e-14);
    }

    #[test]
    fn lift_rejects_wrong_lengths() {
        let vac = GaussianFieldSpec::vacuum(2);
        let co = vac.coefficients().unwrap();
        assert!(lift_coupling(&[pauli(Pauli::Minus)], co).is_err());
        assert!(lift_measurement(&scalar(1.0), co).is_err());
    }

    proptest! {
        #[test]
        fn factorization_reproduces_the_ito_table(seed in any::<u64>(), n in 1usize..4) {
            let spec = random_gaussian_spec(n, seed);
            let co = factorize(&spec, FACTOR_TOL).unwrap();
            prop_assert!(co.residuals.max() <= 1e-10);
            let from_c = ItoTable::from_coefficients(&co);
            prop_assert!(from_c.max_deviation(&ito_table(&spec)) <= 1e-10);
        }

        #[test]
        fn lifted_measurement_covariance(seed in any::<u64>(), n in 1usize..4) {
            let spec = random_gaussian_spec(n, seed);
            let g = crate::testing::random_measurement(1 + (seed as usize % n), n, seed ^ 0x5eed);
            prop_assert!(lift_measurement(&g, spec.coefficients().unwrap()).is_ok());
        }

        #[test]
        fn vacuum_lift_pads_with_zeros(seed in any::<u64>(), n in 1usize..4) {
            let vac = GaussianFieldSpec::vacuum(n);
            let co = vac.coefficients().unwrap();
            let g = crate::testing::random_measurement(1, n, seed);
            let gt = lift_measurement(&g, co).unwrap();
            prop_assert_eq!(gt.columns(0, n).clone_owned(), g);
            prop_assert!(max_abs(&gt.columns(n, n).clone_owned()) == 0.0);
        }
    }
}
