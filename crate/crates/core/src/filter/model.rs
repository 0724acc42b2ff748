use crate::error::{Error, Result, StageExt};
use crate::gaussian::{lift_coupling, lift_measurement, ArakiWoodsCoefficients, GaussianFieldSpec};
use crate::hilbert::{check_generator, Operator, HERMITIAN_TOL};
use crate::linalg::{self, c, identity, max_abs, max_abs_diff};
use crate::measurement::{
    complete_measurement_with_order, validate_measurement, CompletedMeasurement, MeasurementSpec,
};
use crate::{CMatrix, RMatrix};

/// Trace tolerance for the initial state.
pub const STATE_TRACE_TOL: f64 = 1e-9;
/// Tolerance on `S − I`.
pub const SCATTERING_TOL: f64 = 1e-12;
/// Top-level population above which truncation is reported.
pub const TRUNCATION_WARN: f64 = 1e-6;

/// How the field enters the filter.
#[derive(Debug, Clone)]
pub enum FieldMode {
    /// `n` vacuum channels driven directly by `L`.
    ExplicitVacuum,
    /// Arbitrary Gaussian state, realised on `2n` vacuum channels.
    Gaussian(GaussianFieldSpec),
}

/// System operators of the model.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub hamiltonian: Operator,
    pub couplings: Vec<Operator>,
    pub rho0: Operator,
    /// Scattering matrix; only the identity is supported.
    pub scattering: Option<CMatrix>,
    /// Tensor factors of the system space (product must equal the dimension).
    pub subsystem_dims: Vec<usize>,
}

impl SystemSpec {
    pub fn new(hamiltonian: Operator, couplings: Vec<Operator>, rho0: Operator) -> Self {
        let d = hamiltonian.nrows();
        SystemSpec { hamiltonian, couplings, rho0, scattering: None, subsystem_dims: vec![d] }
    }
}

/// Projector onto the highest level of one truncated subsystem.
#[derive(Debug, Clone)]
pub struct TruncationProbe {
    pub subsystem: usize,
    pub projector: Operator,
}

/// A fully assembled filter. Immutable; share it freely between threads.
#[derive(Debug, Clone)]
pub struct FilterModel {
    pub(crate) hamiltonian: Operator,
    pub(crate) couplings: Vec<Operator>,
    pub(crate) rho0: Operator,
    pub(crate) field: Option<GaussianFieldSpec>,
    pub(crate) coefficients: Option<ArakiWoodsCoefficients>,
    pub(crate) measurement: MeasurementSpec,
    pub(crate) l_eff: Vec<Operator>,
    pub(crate) g_eff: CMatrix,
    pub(crate) completion: CompletedMeasurement,
    pub(crate) l_w: Vec<Operator>,
    pub(crate) gain_ops: Vec<Operator>,
    /// `c_j c_k` for the second-order term of the positive scheme, row-major.
    pub(crate) gain_products: Vec<Operator>,
    pub(crate) residual_ops: Vec<Operator>,
    pub(crate) drift: Operator,
    pub(crate) sigma_chol: RMatrix,
    pub(crate) probes: Vec<TruncationProbe>,
}

impl FilterModel {
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    /// Couplings as supplied, one per field channel.
    pub fn couplings(&self) -> &[Operator] {
        &self.couplings
    }

    pub fn rho0(&self) -> &Operator {
        &self.rho0
    }

    /// The Gaussian field state, `None` in explicit-vacuum mode.
    pub fn field(&self) -> Option<&GaussianFieldSpec> {
        self.field.as_ref()
    }

    pub fn coefficients(&self) -> Option<&ArakiWoodsCoefficients> {
        self.coefficients.as_ref()
    }

    /// The measurement on the original channels.
    pub fn measurement(&self) -> &MeasurementSpec {
        &self.measurement
    }

    pub fn outputs(&self) -> usize {
        self.measurement.outputs()
    }

    /// Couplings on the vacuum channels that drive the filter.
    pub fn effective_couplings(&self) -> &[Operator] {
        &self.l_eff
    }

    /// Measurement on the vacuum channels (`G` or the lifted `G̃`).
    pub fn effective_measurement(&self) -> &CMatrix {
        &self.g_eff
    }

    pub fn completion(&self) -> &CompletedMeasurement {
        &self.completion
    }

    pub fn gain(&self) -> &RMatrix {
        &self.completion.k
    }

    pub fn sigma(&self) -> &RMatrix {
        &self.completion.sigma
    }

    /// Lower Cholesky factor of `Σ`.
    pub fn sigma_cholesky(&self) -> &RMatrix {
        &self.sigma_chol
    }

    /// `L_W = W^{-ᵀ} L_eff`.
    pub fn l_w(&self) -> &[Operator] {
        &self.l_w
    }

    /// Gain operators `c_j = Σ_k K_kj L_{W,k}`; the filter depends on the
    /// completion only through these.
    pub fn gain_operators(&self) -> &[Operator] {
        &self.gain_ops
    }

    /// Operators `r` with `Σ_r r ρ r* = Σ_a L_a ρ L_a* − Σ_jk Σ_jk c_j ρ c_k*`,
    /// i.e. the part of the dissipation not seen by the detector.
    pub fn residual_operators(&self) -> &[Operator] {
        &self.residual_ops
    }

    /// `iH + ½ Σ_a L_a* L_a` over the effective couplings.
    pub fn drift_operator(&self) -> &Operator {
        &self.drift
    }

    pub fn truncation_probes(&self) -> &[TruncationProbe] {
        &self.probes
    }
}

/// Assemble a filter with the default completion.
pub fn build_filter_model(system: &SystemSpec, field: &FieldMode, g: &CMatrix) -> Result<FilterModel> {
    build_filter_model_with_order(system, field, g, None)
}

/// As [`build_filter_model`], optionally overriding the candidate order used
/// by the measurement completion.
pub fn build_filter_model_with_order(
    system: &SystemSpec,
    field: &FieldMode,
    g: &CMatrix,
    order: Option<&[usize]>,
) -> Result<FilterModel> {
    let d = check_generator(&system.hamiltonian, &system.couplings).stage("system")?;
    check_state(&system.rho0, d).stage("system.initial_state")?;
    if let Some(s) = &system.scattering {
        let n = system.couplings.len();
        if s.shape() != (n, n) {
            return Err(Error::mismatch("scattering matrix", format!("{n}x{n}"), format!("{:?}", s.shape())).at_stage("system.scattering"));
        }
        let residual = max_abs_diff(s, &identity(n));
        if residual > SCATTERING_TOL {
            return Err(Error::ScatteringNotIdentity { residual }.at_stage("system.scattering"));
        }
    }
    if system.subsystem_dims.iter().product::<usize>() != d || system.subsystem_dims.contains(&0) {
        return Err(Error::mismatch("subsystem dimensions", d, format!("{:?}", system.subsystem_dims)).at_stage("system"));
    }
    let n = system.couplings.len();
    if n == 0 {
        return Err(Error::InvalidArgument("at least one coupling channel is required".into()).at_stage("system"));
    }
    let measurement = validate_measurement(g, n).stage("measurement")?;

    let (field_spec, coefficients, l_eff, g_eff) = match field {
        FieldMode::ExplicitVacuum => (None, None, system.couplings.clone(), g.clone()),
        FieldMode::Gaussian(spec) => {
            if spec.channels() != n {
                return Err(Error::mismatch("field channels", n, spec.channels()).at_stage("field"));
            }
            let co = spec.coefficients().stage("factorize")?.clone();
            let l_eff = lift_coupling(&system.couplings, &co).stage("lift_coupling")?;
            let g_eff = lift_measurement(g, &co).stage("lift_measurement")?;
            (Some(spec.clone()), Some(co), l_eff, g_eff)
        }
    };
    let nch = l_eff.len();
    let spec_eff = validate_measurement(&g_eff, nch).stage("validate_lifted_measurement")?;
    let default_order: Vec<usize> = (0..2 * nch).collect();
    let completion =
        complete_measurement_with_order(&spec_eff, order.unwrap_or(&default_order)).stage("complete_measurement")?;

    let w_inv_t = completion
        .w
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned { condition: f64::INFINITY })
        .stage("gain_operators")?
        .transpose();
    let l_w = combine(&w_inv_t, &l_eff, d);
    let kc = linalg::to_complex(&completion.k);
    let gain_ops = combine(&kc.transpose(), &l_w, d);
    let m = gain_ops.len();
    let mut gain_products = Vec::with_capacity(m * m);
    for j in 0..m {
        for k in 0..m {
            gain_products.push(&gain_ops[j] * &gain_ops[k]);
        }
    }

    let residual_ops = residual_operators(&g_eff, &completion.sigma, &l_eff, d);
    let mut drift = &system.hamiltonian * c(0.0, 1.0);
    for l in &l_eff {
        drift += (l.adjoint() * l).scale(0.5);
    }
    let sigma_chol = completion
        .sigma
        .clone()
        .cholesky()
        .ok_or(Error::SingularCovariance)
        .stage("conditioning_gain")?
        .l();

    let probes = truncation_probes(&system.subsystem_dims);
    Ok(FilterModel {
        hamiltonian: system.hamiltonian.clone(),
        couplings: system.couplings.clone(),
        rho0: linalg::hermitian_part(&system.rho0),
        field: field_spec,
        coefficients,
        measurement,
        l_eff,
        g_eff,
        completion,
        l_w,
        gain_ops,
        gain_products,
        residual_ops,
        drift,
        sigma_chol,
        probes,
    })
}

/// `out_j = Σ_k a_jk ops_k`.
fn combine(a: &CMatrix, ops: &[Operator], d: usize) -> Vec<Operator> {
    (0..a.nrows())
        .map(|j| {
            let mut acc = Operator::zeros(d, d);
            for (k, op) in ops.iter().enumerate() {
                if a[(j, k)] != linalg::ZERO {
                    acc += op * a[(j, k)];
                }
            }
            acc
        })
        .collect()
}

/// Kraus operators of `Q = I − G* Σ⁻¹ G` acting on the channel vector.
fn residual_operators(g: &CMatrix, sigma: &RMatrix, l: &[Operator], d: usize) -> Vec<Operator> {
    let nch = l.len();
    let sigma_inv = linalg::to_complex(&sigma.clone().try_inverse().expect("Σ is invertible"));
    let q = identity(nch) - g.adjoint() * sigma_inv * g;
    let (values, vectors) = linalg::hermitian_eigen(&q);
    let mut out = Vec::new();
    for (r, &lambda) in values.iter().enumerate() {
        if lambda <= 1e-12 {
            continue;
        }
        let coeffs = CMatrix::from_fn(1, nch, |_, k| vectors[(k, r)] * lambda.sqrt());
        let op = combine(&coeffs, l, d).remove(0);
        if max_abs(&op) > 0.0 {
            out.push(op);
        }
    }
    out
}

fn truncation_probes(dims: &[usize]) -> Vec<TruncationProbe> {
    let mut probes = Vec::new();
    for (s, &ds) in dims.iter().enumerate() {
        if ds < 3 {
            continue;
        }
        let mut projector = CMatrix::from_element(1, 1, linalg::ONE);
        for (t, &dt) in dims.iter().enumerate() {
            let factor = if t == s {
                let mut p = CMatrix::zeros(dt, dt);
                p[(dt - 1, dt - 1)] = linalg::ONE;
                p
            } else {
                identity(dt)
            };
            projector = linalg::kron(&projector, &factor);
        }
        probes.push(TruncationProbe { subsystem: s, projector });
    }
    probes
}

/// Check that `rho` is a `d × d` density matrix.
pub fn check_state(rho: &Operator, d: usize) -> Result<()> {
    if rho.shape() != (d, d) {
        return Err(Error::mismatch("density matrix", format!("{d}x{d}"), format!("{:?}", rho.shape())));
    }
    let residual = linalg::hermitian_residual(rho);
    if residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { what: "initial state".into(), residual });
    }
    let tr = linalg::trace(rho).re;
    if (tr - 1.0).abs() > STATE_TRACE_TOL {
        return Err(Error::InvalidArgument(format!("initial state has trace {tr}")));
    }
    let min_eigenvalue = linalg::min_eigenvalue(rho);
    if min_eigenvalue < -STATE_TRACE_TOL {
        return Err(Error::NotPositive { what: "initial state".into(), min_eigenvalue });
    }
    Ok(())
}
