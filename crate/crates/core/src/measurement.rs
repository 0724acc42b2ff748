//! Linear quadrature measurements: admissibility, completion to an invertible
//! `W` whose rows commute, and the conditioning gain `K`.

use crate::error::{Error, Result};
use crate::linalg::{self, c, max_abs};
use crate::{CMatrix, RMatrix};

/// Self-commutation tolerance, scaled by `max(1, |G|²)`.
pub const COMMUTATION_TOL: f64 = 1e-12;
/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-10;
/// Tolerance on `W W*` realness and the imaginary part of `K`.
pub const GAIN_TOL: f64 = 1e-10;
pub const CONDITION_WARN: f64 = 1e8;
pub const CONDITION_MAX: f64 = 1e12;

/// A measurement matrix `G` (`m × nch`) that passed [`validate_measurement`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSpec {
    g: CMatrix,
    commutation_residual: f64,
}

impl MeasurementSpec {
    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn outputs(&self) -> usize {
        self.g.nrows()
    }

    pub fn channels(&self) -> usize {
        self.g.ncols()
    }

    /// `‖G# Gᵀ − G G*‖_max`.
    pub fn commutation_residual(&self) -> f64 {
        self.commutation_residual
    }
}

/// `‖G# Gᵀ − G G*‖_max`, i.e. twice the largest imaginary part of `G G*`.
pub fn commutation_residual(g: &CMatrix) -> f64 {
    linalg::max_abs_diff(&(g.conjugate() * g.transpose()), &(g * g.adjoint()))
}

/// `[G# G]`, the `m × 2nch` coefficient matrix of annihilators and creators.
pub fn stacked(g: &CMatrix) -> CMatrix {
    let (m, n) = g.shape();
    let mut out = CMatrix::zeros(m, 2 * n);
    out.view_mut((0, 0), (m, n)).copy_from(&g.conjugate());
    out.view_mut((0, n), (m, n)).copy_from(g);
    out
}

pub fn validate_measurement(g: &CMatrix, nch: usize) -> Result<MeasurementSpec> {
    let m = g.nrows();
    if m == 0 {
        return Err(Error::InvalidArgument("measurement matrix has no rows".into()));
    }
    if g.ncols() != nch {
        return Err(Error::mismatch("measurement columns", nch, g.ncols()));
    }
    if m > nch {
        return Err(Error::TooManyMeasurements { m, nch });
    }
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("measurement matrix has non-finite entries".into()));
    }
    let residual = commutation_residual(g);
    if residual > COMMUTATION_TOL * max_abs(g).powi(2).max(1.0) {
        return Err(Error::MeasurementCommutation { residual });
    }
    let rank = linalg::rank(&stacked(g), RANK_TOL);
    if rank != m {
        return Err(Error::RankDeficient { what: "[G# G]".into(), rank, expected: m });
    }
    let rank = linalg::rank(g, RANK_TOL);
    if rank != m {
        return Err(Error::RankDeficient { what: "G".into(), rank, expected: m });
    }
    Ok(MeasurementSpec { g: g.clone(), commutation_residual: residual })
}

/// Real quadrature form `[G + G#, −iG + iG#] = [2 Re G, 2 Im G]`.
pub fn to_quadrature(g: &CMatrix) -> RMatrix {
    let (m, n) = g.shape();
    RMatrix::from_fn(m, 2 * n, |r, k| if k < n { 2.0 * g[(r, k)].re } else { 2.0 * g[(r, k - n)].im })
}

/// Inverse of [`to_quadrature`]: `G = ½Q + (i/2)P`.
pub fn from_quadrature(t: &RMatrix) -> CMatrix {
    let n = t.ncols() / 2;
    CMatrix::from_fn(t.nrows(), n, |r, k| c(0.5 * t[(r, k)], 0.5 * t[(r, k + n)]))
}

/// Symplectic rotation `[q, p] ↦ [−p, q]`.
fn rotate(x: &[f64]) -> Vec<f64> {
    let n = x.len() / 2;
    x[n..].iter().map(|v| -v).chain(x[..n].iter().copied()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Project `x` onto the orthogonal complement of an orthonormal `basis`
/// (two Gram-Schmidt passes).
fn project_out(basis: &[Vec<f64>], x: &mut [f64]) {
    for _ in 0..2 {
        for b in basis {
            let a = dot(b, x);
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= a * bi);
        }
    }
}

fn push_orthonormal(basis: &mut Vec<Vec<f64>>, mut x: Vec<f64>) -> bool {
    let scale = dot(&x, &x).sqrt();
    project_out(basis, &mut x);
    let norm = dot(&x, &x).sqrt();
    if norm <= RANK_TOL * scale.max(f64::MIN_POSITIVE) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    basis.push(x);
    true
}

/// `G` extended to an invertible `W`, with the gain and noise covariance.
#[derive(Debug, Clone)]
pub struct CompletedMeasurement {
    /// `nch × nch`; the first `m` rows are `G`.
    pub w: CMatrix,
    /// The `nch − m` completion rows, each of unit norm.
    pub h_rows: CMatrix,
    /// `nch × m` real gain with `E[Z_W | Z] = K Z`.
    pub k: RMatrix,
    /// `m × m` innovations covariance `G# Gᵀ`.
    pub sigma: RMatrix,
    /// 2-norm condition number of `W`.
    pub condition: f64,
    /// `‖W# Wᵀ − W W*‖_max`.
    pub commutation_residual: f64,
}

impl CompletedMeasurement {
    pub fn outputs(&self) -> usize {
        self.k.ncols()
    }

    pub fn channels(&self) -> usize {
        self.w.nrows()
    }
}

/// Greedy symplectic Gram-Schmidt completion with standard-basis candidates
/// in index order.
pub fn complete_measurement(spec: &MeasurementSpec) -> Result<CompletedMeasurement> {
    let order: Vec<usize> = (0..2 * spec.channels()).collect();
    complete_measurement_with_order(spec, &order)
}

/// As [`complete_measurement`], trying candidates `e_k` for `k` in `order`
/// (earlier entries win ties). `order` must be a permutation of `0..2nch`.
pub fn complete_measurement_with_order(spec: &MeasurementSpec, order: &[usize]) -> Result<CompletedMeasurement> {
    let g = spec.g();
    let (m, n) = g.shape();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..2 * n).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument(format!("candidate order must be a permutation of 0..{}", 2 * n)));
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(2 * n);
    let t = to_quadrature(g);
    for r in 0..m {
        let row: Vec<f64> = t.row(r).iter().copied().collect();
        let rot = rotate(&row);
        if !push_orthonormal(&mut basis, row) || !push_orthonormal(&mut basis, rot) {
            return Err(Error::CompletionFailed { rows: r });
        }
    }

    let mut h_rows = CMatrix::zeros(n - m, n);
    for row in 0..n - m {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for &k in order {
            let mut x = vec![0.0; 2 * n];
            x[k] = 1.0;
            project_out(&basis, &mut x);
            let norm = dot(&x, &x).sqrt();
            // strict improvement beyond roundoff, so ties go to the earlier candidate
            if best.as_ref().map_or(true, |(b, _)| norm > b + 1e-12) {
                best = Some((norm, x));
            }
        }
        let (norm, mut x) = best.expect("candidate list is non-empty");
        if norm <= 1e-8 {
            return Err(Error::CompletionFailed { rows: m + row });
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let rot = rotate(&x);
        for k in 0..n {
            h_rows[(row, k)] = c(x[k], x[k + n]);
        }
        basis.push(x);
        if !push_orthonormal(&mut basis, rot) {
            return Err(Error::CompletionFailed { rows: m + row });
        }
    }

    let mut w = CMatrix::zeros(n, n);
    w.view_mut((0, 0), (m, n)).copy_from(g);
    w.view_mut((m, 0), (n - m, n)).copy_from(&h_rows);
    assemble(g, w, h_rows)
}

/// Build a [`CompletedMeasurement`] from an explicitly supplied completion.
pub fn completion_from_rows(spec: &MeasurementSpec, h_rows: &CMatrix) -> Result<CompletedMeasurement> {
    let g = spec.g();
    let (m, n) = g.shape();
    if h_rows.shape() != (n - m, n) {
        return Err(Error::mismatch("completion rows", format!("{}x{n}", n - m), format!("{:?}", h_rows.shape())));
    }
    let mut w = CMatrix::zeros(n, n);
    w.view_mut((0, 0), (m, n)).copy_from(g);
    w.view_mut((m, 0), (n - m, n)).copy_from(h_rows);
    assemble(g, w, h_rows.clone())
}

fn assemble(g: &CMatrix, w: CMatrix, h_rows: CMatrix) -> Result<CompletedMeasurement> {
    let commutation_residual = commutation_residual(&w);
    let scale = max_abs(&w).powi(2).max(1.0);
    if commutation_residual > GAIN_TOL * scale {
        return Err(Error::MeasurementCommutation { residual: commutation_residual });
    }
    let condition = linalg::condition_number(&w);
    if condition > CONDITION_MAX {
        return Err(Error::IllConditioned { condition });
    }
    if condition > CONDITION_WARN {
        log::warn!("completed measurement W has condition number {condition:.3e}");
    }
    let (k, sigma) = conditioning_gain(&w, g)?;
    Ok(CompletedMeasurement { w, h_rows, k, sigma, condition, commutation_residual })
}

/// `K = (W# Gᵀ)(G# Gᵀ)⁻¹` and `Σ = G# Gᵀ`, both returned as real matrices.
pub fn conditioning_gain(w: &CMatrix, g: &CMatrix) -> Result<(RMatrix, RMatrix)> {
    let n = w.nrows();
    if !w.is_square() || g.ncols() != n {
        return Err(Error::mismatch("conditioning gain", format!("W {n}x{n}, G with {n} columns"), format!("W {:?}, G {:?}", w.shape(), g.shape())));
    }
    let sigma_c = g.conjugate() * g.transpose();
    let scale = max_abs(g).powi(2).max(1.0);
    let sigma_imag = sigma_c.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    if sigma_imag > GAIN_TOL * scale {
        return Err(Error::ImaginaryGain { max_imag: sigma_imag });
    }
    let sigma_re = sigma_c.map(|z| z.re);
    let sigma = (&sigma_re + sigma_re.transpose()).scale(0.5);
    let s = sigma.clone().svd(false, false).singular_values;
    let (hi, lo) = s.iter().fold((0.0f64, f64::INFINITY), |(h, l), &v| (h.max(v), l.min(v)));
    if hi == 0.0 || lo <= RANK_TOL * hi {
        return Err(Error::SingularCovariance);
    }
    let sigma_inv = sigma.clone().try_inverse().ok_or(Error::SingularCovariance)?;
    let kc = w.conjugate() * g.transpose() * linalg::to_complex(&sigma_inv);
    let max_imag = kc.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    if max_imag > GAIN_TOL * max_abs(w).max(1.0) * max_abs(g).max(1.0) * sigma_inv.amax().max(1.0) {
        return Err(Error::ImaginaryGain { max_imag });
    }
    Ok((kc.map(|z| z.re), sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff, max_abs_real};
    use crate::testing::random_measurement;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn row(entries: &[(f64, f64)]) -> CMatrix {
        CMatrix::from_row_iterator(1, entries.len(), entries.iter().map(|&(a, b)| c(a, b)))
    }

    #[test]
    fn validation_examples() {
        for n in 1..4 {
            assert!(validate_measurement(&identity(n), n).is_ok());
        }
        assert!(validate_measurement(&row(&[(0.3, -0.7), (1.1, 0.2)]), 2).is_ok());
        assert!(matches!(validate_measurement(&row(&[(0.0, 0.0), (0.0, 0.0)]), 2), Err(Error::RankDeficient { .. })));

        let g = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        match validate_measurement(&g, 2) {
            Err(Error::MeasurementCommutation { residual }) => assert!((residual - 2.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(validate_measurement(&identity(3), 2), Err(Error::DimensionMismatch { .. })));
        let tall = CMatrix::from_row_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(validate_measurement(&tall, 1), Err(Error::TooManyMeasurements { m: 2, nch: 1 })));
    }

    #[test]
    fn rank_deficient_g_with_commuting_rows() {
        let g = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(validate_measurement(&g, 2), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn quadrature_examples() {
        assert_eq!(to_quadrature(&row(&[(1.0, 0.0)])).as_slice(), &[2.0, 0.0]);
        assert_eq!(to_quadrature(&row(&[(0.0, 1.0)])).as_slice(), &[0.0, 2.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = to_quadrature(&row(&[(h, h)]));
        assert!((t[(0, 0)] - 2f64.sqrt()).abs() < 1e-15 && (t[(0, 1)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn completion_examples() {
        let spec = validate_measurement(&row(&[(1.0, 0.0), (0.0, 0.0)]), 2).unwrap();
        let done = complete_measurement(&spec).unwrap();
        assert_eq!(done.h_rows, row(&[(0.0, 0.0), (1.0, 0.0)]));
        assert_eq!(done.w, identity(2));
        assert_eq!(done.k.as_slice(), &[1.0, 0.0]);
        assert_eq!(done.sigma.as_slice(), &[1.0]);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let spec = validate_measurement(&row(&[(h, 0.0), (0.0, h)]), 2).unwrap();
        let done = complete_measurement(&spec).unwrap();
        assert!(max_abs_diff(&done.h_rows, &row(&[(h, 0.0), (0.0, -h)])) < 1e-15);
        assert!(max_abs_diff(&(&done.w * done.w.adjoint()), &identity(2)) < 1e-15);
        let det = done.w.determinant();
        assert!((det - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn square_measurement_is_its_own_completion() {
        let g = random_measurement(3, 3, 11);
        let spec = validate_measurement(&g, 3).unwrap();
        let done = complete_measurement(&spec).unwrap();
        assert_eq!(done.w, g);
        assert_eq!(done.h_rows.nrows(), 0);
        assert!(max_abs_real(&(&done.k - RMatrix::identity(3, 3))) <= 1e-12);
    }

    #[test]
    fn singular_covariance_is_reported() {
        let z = CMatrix::zeros(1, 2);
        assert!(matches!(conditioning_gain(&identity(2), &z), Err(Error::SingularCovariance)));
    }

    #[test]
    fn permuted_candidates_give_another_valid_completion() {
        let spec = validate_measurement(&row(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]), 3).unwrap();
        let a = complete_measurement(&spec).unwrap();
        let b = complete_measurement_with_order(&spec, &[5, 4, 3, 2, 1, 0]).unwrap();
        assert!(max_abs_diff(&a.w, &b.w) > 0.5);
        assert!(b.commutation_residual < 1e-12);
        assert!(complete_measurement_with_order(&spec, &[0, 0, 1, 2, 3, 4]).is_err());
    }

    /// Regress simulated `Z_W` increments on `Z` increments.
    fn regression_gain(done: &CompletedMeasurement, samples: usize, seed: u64) -> (RMatrix, RMatrix) {
        let (n, m) = done.k.shape();
        let t_w = to_quadrature(&done.w) * 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = RMatrix::from_fn(2 * n, samples, |_, _| StandardNormal.sample(&mut rng));
        let zw = &t_w * xi;
        let z = zw.rows(0, m).clone_owned();
        let zz_inv = (&z * z.transpose()).try_inverse().unwrap();
        let k_hat = &zw * z.transpose() * &zz_inv;
        let resid = &zw - &k_hat * &z;
        let dof = (samples - m) as f64;
        let se = RMatrix::from_fn(n, m, |i, j| {
            let s2 = resid.row(i).norm_squared() / dof;
            (s2 * zz_inv[(j, j)]).sqrt()
        });
        (k_hat, se)
    }

    #[test]
    fn monte_carlo_regression_recovers_gain() {
        for seed in 0..5u64 {
            let g = random_measurement(2, 4, seed);
            let done = complete_measurement(&validate_measurement(&g, 4).unwrap()).unwrap();
            let (k_hat, se) = regression_gain(&done, 20_000, seed);
            for i in 2..4 {
                for j in 0..2 {
                    let dev = (k_hat[(i, j)] - done.k[(i, j)]).abs();
                    assert!(dev <= 3.0 * se[(i, j)] + 1e-12, "seed {seed} entry ({i},{j}): {dev} vs se {}", se[(i, j)]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn acceptance_matches_direct_evaluation(re in proptest::collection::vec(-1.0f64..1.0, 4), im in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let g = CMatrix::from_fn(2, 2, |r, k| c(re[2 * r + k], im[2 * r + k]));
            let gg = &g * g.adjoint();
            let real = gg.iter().all(|z| z.im.abs() <= 0.5e-12);
            let full = linalg::rank(&g, RANK_TOL) == 2;
            prop_assert_eq!(validate_measurement(&g, 2).is_ok(), real && full);
        }

        #[test]
        fn completion_invariants(seed in any::<u64>(), n in 1usize..5, m_off in 0usize..4) {
            let m = 1 + m_off % n;
            let g = random_measurement(m, n, seed);
            let spec = validate_measurement(&g, n).unwrap();
            let done = complete_measurement(&spec).unwrap();
            prop_assert!(done.commutation_residual <= 1e-10);
            prop_assert!(done.condition.is_finite() && done.condition < CONDITION_WARN);
            prop_assert!(max_abs_diff(&done.w.rows(0, m).clone_owned(), &g) == 0.0);
            for r in 0..n - m {
                prop_assert!((done.h_rows.row(r).norm() - 1.0).abs() < 1e-12);
            }
            let top = done.k.rows(0, m).clone_owned();
            prop_assert!(max_abs_real(&(top - RMatrix::identity(m, m))) <= 1e-10);
            let gg = &g * g.adjoint();
            prop_assert!(max_abs_diff(&linalg::to_complex(&done.sigma), &gg) <= 1e-12 * max_abs(&g).powi(2).max(1.0));
        }

        #[test]
        fn quadrature_round_trip(seed in any::<u64>(), m in 1usize..3, n in 2usize..4) {
            let g = crate::testing::random_matrix(m, n, seed);
            prop_assert_eq!(from_quadrature(&to_quadrature(&g)), g);
        }
    }
}
