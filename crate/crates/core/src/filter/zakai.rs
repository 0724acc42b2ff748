//! Unnormalised (Zakai) filter.

use super::model::FilterModel;
use super::sme::liouvillian;
use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::linalg;

/// One Euler step of `dς = ℒ*(ς)dt + Σ_j (ς c_j* + c_j ς) dY_j`, driven by
/// the measurement record increment rather than the innovations.
pub fn zakai_step(model: &FilterModel, sigma_un: &Operator, dy: &[f64], dt: f64) -> Result<Operator> {
    if dy.len() != model.outputs() {
        return Err(Error::mismatch("dY", model.outputs(), dy.len()));
    }
    if dy.iter().any(|x| !x.is_finite()) {
        return Err(Error::Integration { step: 0, reason: "non-finite dY".into() });
    }
    let mut next = sigma_un + liouvillian(model, sigma_un).scale(dt);
    for (j, c) in model.gain_ops.iter().enumerate() {
        let cs = c * sigma_un;
        next += (&cs + cs.adjoint()).scale(dy[j]);
    }
    let trace = linalg::trace(&next).re;
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::NormalizationBreakdown { trace });
    }
    Ok(next)
}

/// `ς / Tr ς`.
pub fn normalize(sigma_un: &Operator) -> Result<Operator> {
    let trace = linalg::trace(sigma_un).re;
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::NormalizationBreakdown { trace });
    }
    Ok(sigma_un.unscale(trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::model::{build_filter_model, FieldMode, SystemSpec};
    use crate::filter::sme::{record_drift, sme_increment};
    use crate::gaussian::GaussianFieldSpec;
    use crate::hilbert::{pauli, Pauli};
    use crate::linalg::c;
    use crate::testing::random_density;
    use crate::CMatrix;

    fn model(field: FieldMode) -> FilterModel {
        let system = SystemSpec::new(
            pauli(Pauli::Z).scale(0.5),
            vec![pauli(Pauli::Minus)],
            pauli(Pauli::Plus) * pauli(Pauli::Minus),
        );
        build_filter_model(&system, &field, &CMatrix::from_element(1, 1, c(0.8, 0.6))).unwrap()
    }

    #[test]
    fn trace_evolves_linearly() {
        let m = model(FieldMode::ExplicitVacuum);
        let rho = random_density(2, 5);
        let (dy, dt) = (0.03, 1e-3);
        let next = zakai_step(&m, &rho, &[dy], dt).unwrap();
        let c0 = &m.gain_operators()[0];
        let expect = 1.0 + linalg::trace_product(&rho, &(c0 + c0.adjoint())).re * dy;
        assert!((linalg::trace(&next).re - expect).abs() < 1e-14);
        assert!((expect - 1.0).abs() > 1e-4);
    }

    #[test]
    fn dark_state_is_invariant() {
        let system = SystemSpec::new(CMatrix::zeros(2, 2), vec![pauli(Pauli::Minus)], pauli(Pauli::Minus) * pauli(Pauli::Plus));
        let m = build_filter_model(&system, &FieldMode::ExplicitVacuum, &CMatrix::from_element(1, 1, c(1.0, 0.0))).unwrap();
        let g = m.rho0().clone();
        assert_eq!(zakai_step(&m, &g, &[0.4], 1e-3).unwrap(), g);
    }

    #[test]
    fn breakdown_is_reported() {
        let m = model(FieldMode::ExplicitVacuum);
        let plus = CMatrix::from_element(2, 2, c(0.5, 0.0));
        assert!(matches!(zakai_step(&m, &plus, &[-10.0], 1e-3), Err(Error::NormalizationBreakdown { .. })));
    }

    /// Averaged over symmetric innovations `dν = ±√(Σdt)`, the normalised
    /// Zakai step and the filter step fed `dY = Σe dt + dν` differ by `O(dt²)`.
    #[test]
    fn normalised_zakai_tracks_filter_to_second_order() {
        for field in [FieldMode::ExplicitVacuum, FieldMode::Gaussian(GaussianFieldSpec::squeezed_vacuum(0.5, 0.7).unwrap())] {
            let m = model(field);
            let rho = random_density(2, 8);
            let gap = |dt: f64| {
                let mut diff = Operator::zeros(2, 2);
                for sign in [1.0, -1.0] {
                    let dnu = [sign * (m.sigma()[(0, 0)] * dt).sqrt()];
                    let dy: Vec<f64> = record_drift(&m, &rho).iter().zip(&dnu).map(|(a, v)| a * dt + v).collect();
                    let zakai = normalize(&zakai_step(&m, &rho, &dy, dt).unwrap()).unwrap();
                    let filt = &rho + sme_increment(&m, &rho, &dnu, dt);
                    diff += zakai - filt;
                }
                linalg::max_abs(&diff) / 2.0
            };
            let (coarse, fine) = (gap(1e-3), gap(0.5e-3));
            let ratio = coarse / fine;
            assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
        }
    }
}
