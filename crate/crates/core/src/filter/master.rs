//! Unconditional dynamics `ρ̇ = ℒ*(ρ)`.

use super::model::FilterModel;
use super::sme::liouvillian;
use super::trajectory::{check_observables, ObservableSeries, SimOptions};
use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::linalg;

/// One classical fourth-order Runge-Kutta step.
pub fn master_step(model: &FilterModel, rho: &Operator, dt: f64) -> Operator {
    let k1 = liouvillian(model, rho);
    let k2 = liouvillian(model, &(rho + k1.scale(0.5 * dt)));
    let k3 = liouvillian(model, &(rho + k2.scale(0.5 * dt)));
    let k4 = liouvillian(model, &(rho + k3.scale(dt)));
    rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0)
}

/// Number of grid steps for horizon `tmax` and step `dt`.
pub fn grid_steps(tmax: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(tmax > 0.0) || !tmax.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {tmax}")));
    }
    if dt > tmax {
        return Err(Error::InvalidArgument(format!("time step {dt} exceeds horizon {tmax}")));
    }
    Ok((tmax / dt).round() as usize)
}

/// States on the grid `t_k = k dt`, `k = 0..=round(tmax/dt)`, from `rho0`.
pub fn master_solve(model: &FilterModel, rho0: &Operator, tmax: f64, dt: f64) -> Result<Vec<Operator>> {
    let steps = grid_steps(tmax, dt)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(rho0.clone());
    for k in 0..steps {
        let next = master_step(model, &out[k], dt);
        out.push(next);
    }
    Ok(out)
}

/// Deterministic solution on the grid with observables sampled at every point.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterRecord {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Operator>,
    pub observables: Vec<ObservableSeries>,
}

pub fn master_record(model: &FilterModel, observables: &[(String, Operator)], tmax: f64, dt: f64) -> Result<MasterRecord> {
    check_observables(model, &SimOptions { observables: observables.to_vec(), ..SimOptions::default() })?;
    let states = master_solve(model, model.rho0(), tmax, dt)?;
    let times = (0..states.len()).map(|k| k as f64 * dt).collect();
    let observables = observables
        .iter()
        .map(|(name, op)| ObservableSeries {
            name: name.clone(),
            values: states.iter().map(|rho| linalg::trace_product(rho, op)).collect(),
        })
        .collect();
    Ok(MasterRecord { dt, times, states, observables })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::model::{build_filter_model, FieldMode, SystemSpec};
    use crate::gaussian::GaussianFieldSpec;
    use crate::hilbert::{pauli, steady_state, Pauli};
    use crate::linalg::{self, c};
    use crate::CMatrix;

    fn qubit(field: FieldMode, rho0: Operator) -> FilterModel {
        let system = SystemSpec::new(CMatrix::zeros(2, 2), vec![pauli(Pauli::Minus)], rho0);
        build_filter_model(&system, &field, &CMatrix::from_element(1, 1, c(1.0, 0.0))).unwrap()
    }

    fn excited() -> Operator {
        pauli(Pauli::Plus) * pauli(Pauli::Minus)
    }

    #[test]
    fn dark_state_is_stationary() {
        let g = pauli(Pauli::Minus) * pauli(Pauli::Plus);
        let m = qubit(FieldMode::ExplicitVacuum, g.clone());
        assert_eq!(master_step(&m, &g, 1e-2), g);
    }

    #[test]
    fn decay_rate_is_one() {
        let m = qubit(FieldMode::ExplicitVacuum, excited());
        let dt = 1e-4;
        let next = master_step(&m, &excited(), dt);
        let rate = (next[(0, 0)].re - 1.0) / dt;
        assert!((rate + 1.0).abs() < 1e-3);
    }

    #[test]
    fn exponential_decay_on_the_grid() {
        let m = qubit(FieldMode::ExplicitVacuum, excited());
        let states = master_solve(&m, &excited(), 5.0, 1e-3).unwrap();
        assert_eq!(states.len(), 5001);
        for (k, rho) in states.iter().enumerate().step_by(250) {
            let t = k as f64 * 1e-3;
            assert!((rho[(0, 0)].re - (-t).exp()).abs() < 1e-8);
            assert!((linalg::trace(rho).re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_relaxation_reaches_detailed_balance() {
        let m = qubit(FieldMode::Gaussian(GaussianFieldSpec::thermal(0.25).unwrap()), excited());
        let states = master_solve(&m, &excited(), 20.0, 1e-2).unwrap();
        let last = states.last().unwrap();
        assert!((last[(0, 0)].re - 1.0 / 6.0).abs() < 1e-6);
        let ss = steady_state(m.hamiltonian(), m.effective_couplings()).unwrap();
        assert!(linalg::max_abs_diff(last, &ss) < 1e-6);
    }

    #[test]
    fn grid_rejects_bad_steps() {
        assert!(grid_steps(1.0, 2.0).is_err());
        assert!(grid_steps(1.0, 0.0).is_err());
        assert_eq!(grid_steps(5.0, 1e-3).unwrap(), 5000);
    }
}
