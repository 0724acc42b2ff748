//! Normalised filter (stochastic master equation) steps.

use super::model::FilterModel;
use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::linalg::{self, identity};

/// Eigenvalues below `-PROJECTION_TOL` trigger projection onto the PSD cone.
pub const PROJECTION_TOL: f64 = 1e-10;

/// Time discretisation of the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Explicit Euler-Maruyama on the Itō form, with renormalisation and
    /// PSD projection.
    EulerMaruyama,
    /// Completely positive one-step map `ρ ↦ MρM* + Σ_r rρr* dt`, normalised.
    /// Same Itō expansion to first order, but never leaves the PSD cone, so
    /// no projection bias accumulates near pure states.
    #[default]
    PositiveMap,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" | "euler-maruyama" => Ok(Scheme::EulerMaruyama),
            "positive" | "positive-map" => Ok(Scheme::PositiveMap),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Per-step state diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// `|Tr ρ − 1|` of the raw update, before renormalisation.
    pub trace_error: f64,
    /// `‖ρ − ρ*‖_max` of the raw update.
    pub hermitian_residual: f64,
    /// Smallest eigenvalue after repair.
    pub min_eigenvalue: f64,
    /// `Tr ρ²` after repair.
    pub purity: f64,
    pub projected: bool,
}

/// `e_j = 2 Re Tr(ρ c_j)`, so that `dY = Σ e dt + dν`.
pub fn gain_expectations(model: &FilterModel, rho: &Operator) -> Vec<f64> {
    model.gain_ops.iter().map(|c| 2.0 * linalg::trace_product(rho, c).re).collect()
}

/// Drift of the measurement record per unit time, `Σ e`.
pub fn record_drift(model: &FilterModel, rho: &Operator) -> Vec<f64> {
    let e = gain_expectations(model, rho);
    let sigma = model.sigma();
    (0..e.len()).map(|j| (0..e.len()).map(|k| sigma[(j, k)] * e[k]).sum()).collect()
}

/// `ℒ*(ρ) = −Dρ − ρD* + Σ_a L_a ρ L_a*` with `D = iH + ½ Σ L*L`.
pub(crate) fn liouvillian(model: &FilterModel, rho: &Operator) -> Operator {
    let dr = &model.drift * rho;
    let mut out = -(&dr + dr.adjoint());
    for l in &model.l_eff {
        out += l * rho * l.adjoint();
    }
    out
}

fn check_noise(model: &FilterModel, v: &[f64], what: &str) -> Result<()> {
    if v.len() != model.outputs() {
        return Err(Error::mismatch(what, model.outputs(), v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Integration { step: 0, reason: format!("non-finite {what}") });
    }
    Ok(())
}

/// Euler-Maruyama increment of the stochastic master equation, without any
/// renormalisation: `ℒ*(ρ)dt + Σ_j (ρc_j* + c_jρ − Tr(ρ(c_j + c_j*))ρ) dν_j`.
pub fn sme_increment(model: &FilterModel, rho: &Operator, dnu: &[f64], dt: f64) -> Operator {
    let mut inc = liouvillian(model, rho) * linalg::c(dt, 0.0);
    let e = gain_expectations(model, rho);
    for (j, c) in model.gain_ops.iter().enumerate() {
        let cr = c * rho;
        inc += (&cr + cr.adjoint() - rho.scale(e[j])).scale(dnu[j]);
    }
    inc
}

/// One Euler-Maruyama step with renormalisation and PSD projection.
pub fn sme_step(model: &FilterModel, rho: &Operator, dnu: &[f64], dt: f64) -> Result<Operator> {
    sme_step_with(model, rho, dnu, dt, Scheme::EulerMaruyama).map(|(r, _)| r)
}

/// One filter step driven by the innovations increment `dν`.
pub fn sme_step_with(
    model: &FilterModel,
    rho: &Operator,
    dnu: &[f64],
    dt: f64,
    scheme: Scheme,
) -> Result<(Operator, StepReport)> {
    check_noise(model, dnu, "dν")?;
    let raw = match scheme {
        Scheme::EulerMaruyama => rho + sme_increment(model, rho, dnu, dt),
        Scheme::PositiveMap => {
            let drift = record_drift(model, rho);
            let dy: Vec<f64> = drift.iter().zip(dnu).map(|(a, b)| a * dt + b).collect();
            positive_update(model, rho, &dy, dt)?
        }
    };
    repair(raw).map_err(|reason| Error::Integration { step: 0, reason })
}

/// Unnormalised positive map followed by division by its trace.
fn positive_update(model: &FilterModel, rho: &Operator, dy: &[f64], dt: f64) -> Result<Operator> {
    let d = model.dim();
    let m = dy.len();
    let sigma = model.sigma();
    let mut kraus = identity(d) - model.drift.scale(dt);
    for (j, c) in model.gain_ops.iter().enumerate() {
        kraus += c.scale(dy[j]);
    }
    for j in 0..m {
        for k in 0..m {
            let w = 0.5 * (dy[j] * dy[k] - sigma[(j, k)] * dt);
            kraus += model.gain_products[j * m + k].scale(w);
        }
    }
    let mut out = &kraus * rho * kraus.adjoint();
    for r in &model.residual_ops {
        out += (r * rho * r.adjoint()).scale(dt);
    }
    let tr = linalg::trace(&out).re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::NormalizationBreakdown { trace: tr });
    }
    Ok(out.unscale(tr))
}

/// Renormalise, symmetrise and, if needed, project onto the PSD cone.
pub(crate) fn repair(raw: Operator) -> std::result::Result<(Operator, StepReport), String> {
    if raw.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err("state has non-finite entries".into());
    }
    let tr = linalg::trace(&raw).re;
    let trace_error = (tr - 1.0).abs();
    let hermitian_residual = linalg::hermitian_residual(&raw);
    if !(tr > 0.0) {
        return Err(format!("state trace collapsed to {tr:.3e}"));
    }
    let mut rho = linalg::hermitian_part(&raw).unscale(tr);
    let mut min_eigenvalue = linalg::min_eigenvalue(&rho);
    let mut projected = false;
    if min_eigenvalue < -PROJECTION_TOL {
        rho = project_psd(&rho);
        min_eigenvalue = linalg::min_eigenvalue(&rho);
        projected = true;
    }
    let purity = rho.iter().map(|z| z.norm_sqr()).sum();
    Ok((rho, StepReport { trace_error, hermitian_residual, min_eigenvalue, purity, projected }))
}

/// Nearest PSD trace-one matrix in Frobenius norm (eigenvalue clipping).
pub fn project_psd(rho: &Operator) -> Operator {
    let (values, vectors) = linalg::hermitian_eigen(rho);
    let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let d = rho.nrows();
    let mut out = Operator::zeros(d, d);
    for (k, &v) in clipped.iter().enumerate() {
        if v > 0.0 {
            let col = vectors.column(k);
            out += (&col * col.adjoint()).scale(v / total);
        }
    }
    linalg::hermitian_part(&out)
}
