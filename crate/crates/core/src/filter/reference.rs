//! Direct single-channel vacuum filter with a scalar measurement `g`,
//! written from the scalar formulas alone and used as an independent oracle
//! for the general engine.

use num_complex::Complex64;

use super::model::FilterModel;
use super::sme::{project_psd, Scheme, PROJECTION_TOL};
use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::linalg;

#[derive(Debug, Clone)]
pub struct SingleFieldReference {
    h: Operator,
    l: Operator,
    g: Complex64,
}

impl SingleFieldReference {
    pub fn new(h: Operator, l: Operator, g: Complex64) -> Result<Self> {
        if g.norm() == 0.0 {
            return Err(Error::SingularCovariance);
        }
        if h.shape() != l.shape() || !h.is_square() {
            return Err(Error::mismatch("single-field reference", format!("{:?}", h.shape()), format!("{:?}", l.shape())));
        }
        Ok(SingleFieldReference { h, l, g })
    }

    /// Extract `(H, L, g)` from a one-channel, one-output vacuum model.
    pub fn from_model(model: &FilterModel) -> Result<Self> {
        let g = model.measurement().g();
        if model.couplings().len() != 1 || g.shape() != (1, 1) {
            return Err(Error::InvalidArgument("reference filter needs exactly one channel and one output".into()));
        }
        if model.field().is_some_and(|f| !f.is_vacuum()) {
            return Err(Error::InvalidArgument("reference filter needs a vacuum field".into()));
        }
        Self::new(model.hamiltonian().clone(), model.couplings()[0].clone(), g[(0, 0)])
    }

    /// Innovations variance per unit time, `|g|²`.
    pub fn sigma(&self) -> f64 {
        self.g.norm_sqr()
    }

    /// `π(g*L + gL*)`, the drift of the record.
    pub fn record_drift(&self, rho: &Operator) -> f64 {
        let op = &self.l * self.g.conj() + self.l.adjoint() * self.g;
        linalg::trace_product(rho, &op).re
    }

    /// `(π(g*XL + gL*X) − π(X)π(g*L + gL*)) |g|⁻²`.
    pub fn kushner_gain(&self, rho: &Operator, x: &Operator) -> f64 {
        let ldag = self.l.adjoint();
        let a = linalg::trace_product(rho, &(x * &self.l * self.g.conj() + &ldag * x * self.g)).re;
        let b = linalg::trace_product(rho, x).re * self.record_drift(rho);
        (a - b) / self.sigma()
    }

    fn lindblad_adjoint(&self, rho: &Operator) -> Operator {
        let ldag = self.l.adjoint();
        let ll = &ldag * &self.l;
        let comm = &self.h * rho - rho * &self.h;
        comm * Complex64::new(0.0, -1.0) + &self.l * rho * &ldag - (&ll * rho + rho * &ll).scale(0.5)
    }

    /// One step driven by the innovations increment `dν`.
    pub fn step(&self, rho: &Operator, dnu: f64, dt: f64, scheme: Scheme) -> Operator {
        let out = match scheme {
            Scheme::EulerMaruyama => {
                let ldag = self.l.adjoint();
                let gain = (&self.l * rho * self.g.conj() + rho * &ldag * self.g).unscale(self.sigma())
                    - rho.scale(self.record_drift(rho) / self.sigma());
                rho + self.lindblad_adjoint(rho).scale(dt) + gain.scale(dnu)
            }
            Scheme::PositiveMap => {
                // M = I − (iH + ½L*L)dt + (L/g) dY + ½(L/g)²(dY² − |g|²dt)
                let d = rho.nrows();
                let dy = self.record_drift(rho) * dt + dnu;
                let c = self.l.map(|z| z / self.g);
                let ldag = self.l.adjoint();
                let kraus = linalg::identity(d) - (&self.h * Complex64::new(0.0, 1.0) + (&ldag * &self.l).scale(0.5)).scale(dt)
                    + c.scale(dy)
                    + (&c * &c).scale(0.5 * (dy * dy - self.sigma() * dt));
                let next = &kraus * rho * kraus.adjoint();
                let tr = linalg::trace(&next).re;
                next.unscale(tr)
            }
        };
        let tr = linalg::trace(&out).re;
        let out = linalg::hermitian_part(&out).unscale(tr);
        // Same positivity repair as the engine, so both integrate one scheme.
        if linalg::min_eigenvalue(&out) < -PROJECTION_TOL {
            project_psd(&out)
        } else {
            out
        }
    }
}
