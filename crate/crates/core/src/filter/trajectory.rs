use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::master::grid_steps;
use super::model::{FilterModel, TRUNCATION_WARN};
use super::sme::{gain_expectations, sme_step_with, Scheme, StepReport};
use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::linalg;

/// What to integrate and what to record.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub scheme: Scheme,
    /// Named observables sampled on every grid point.
    pub observables: Vec<(String, Operator)>,
    /// Times at which the full state is stored (rounded to the grid).
    pub snapshots: Vec<f64>,
}

impl SimOptions {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshots = times;
        self
    }

    pub fn with_observable(mut self, name: impl Into<String>, op: Operator) -> Self {
        self.observables.push((name.into(), op));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub name: String,
    pub values: Vec<Complex64>,
}

/// Worst values of the state invariants along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryDiagnostics {
    pub max_trace_error: f64,
    pub max_hermitian_residual: f64,
    pub min_eigenvalue: f64,
    pub max_purity: f64,
    pub projections: usize,
    pub max_truncation_population: f64,
}

impl Default for TrajectoryDiagnostics {
    fn default() -> Self {
        TrajectoryDiagnostics {
            max_trace_error: 0.0,
            max_hermitian_residual: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_purity: 0.0,
            projections: 0,
            max_truncation_population: 0.0,
        }
    }
}

impl TrajectoryDiagnostics {
    fn absorb(&mut self, r: &StepReport) {
        self.max_trace_error = self.max_trace_error.max(r.trace_error);
        self.max_hermitian_residual = self.max_hermitian_residual.max(r.hermitian_residual);
        self.min_eigenvalue = self.min_eigenvalue.min(r.min_eigenvalue);
        self.max_purity = self.max_purity.max(r.purity);
        self.projections += usize::from(r.projected);
    }
}

/// One simulated measurement record with the conditional state along it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    /// `t_k = k dt`, `k = 0..=steps`.
    pub times: Vec<f64>,
    /// `dY` over `[t_{k−1}, t_k]`; the first row is zero.
    pub dy: Vec<Vec<f64>>,
    /// Accumulated innovations `ν(t_k)`.
    pub nu: Vec<Vec<f64>>,
    pub observables: Vec<ObservableSeries>,
    pub snapshots: Vec<(f64, Operator)>,
    pub diagnostics: TrajectoryDiagnostics,
}

/// The random stream used by trajectory `stream` of seed `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Innovations increment `dν = chol(Σ) ξ √dt` with `ξ` standard normal.
pub fn draw_innovation(model: &FilterModel, rng: &mut ChaCha8Rng, dt: f64) -> Vec<f64> {
    let m = model.outputs();
    let xi: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let chol = model.sigma_cholesky();
    let scale = dt.sqrt();
    (0..m).map(|j| (0..=j).map(|k| chol[(j, k)] * xi[k]).sum::<f64>() * scale).collect()
}

/// Grid indices of the requested snapshot times.
pub(crate) fn snapshot_indices(times: &[f64], dt: f64, steps: usize) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            if !(t >= 0.0) || k > steps as f64 {
                Err(Error::InvalidArgument(format!("snapshot time {t} outside [0, {}]", steps as f64 * dt)))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

/// Per-step view handed to [`integrate`] callbacks.
pub(crate) struct StepView<'a> {
    pub index: usize,
    pub rho: &'a Operator,
    pub dy: &'a [f64],
    pub dnu: &'a [f64],
}

/// Drive the filter over `steps` steps, calling `visit` at every grid point
/// (including `t = 0` with zero increments).
pub(crate) fn integrate(
    model: &FilterModel,
    scheme: Scheme,
    steps: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
    diagnostics: &mut TrajectoryDiagnostics,
    mut visit: impl FnMut(StepView<'_>),
) -> Result<()> {
    let m = model.outputs();
    let mut rho = model.rho0().clone();
    let zeros = vec![0.0; m];
    visit(StepView { index: 0, rho: &rho, dy: &zeros, dnu: &zeros });
    let sigma = model.sigma();
    for step in 1..=steps {
        let dnu = draw_innovation(model, rng, dt);
        let e = gain_expectations(model, &rho);
        let dy: Vec<f64> = (0..m).map(|j| (0..m).map(|k| sigma[(j, k)] * e[k]).sum::<f64>() * dt + dnu[j]).collect();
        let (next, report) = sme_step_with(model, &rho, &dnu, dt, scheme).map_err(|err| match err.root() {
            Error::Integration { reason, .. } => Error::Integration { step, reason: reason.clone() },
            other => Error::Integration { step, reason: other.to_string() },
        })?;
        diagnostics.absorb(&report);
        for probe in model.truncation_probes() {
            let pop = linalg::trace_product(&next, &probe.projector).re;
            if pop > TRUNCATION_WARN && diagnostics.max_truncation_population <= TRUNCATION_WARN {
                log::warn!(
                    "top level of subsystem {} holds population {pop:.3e} at step {step}; increase its dimension",
                    probe.subsystem
                );
            }
            diagnostics.max_truncation_population = diagnostics.max_truncation_population.max(pop);
        }
        rho = next;
        visit(StepView { index: step, rho: &rho, dy: &dy, dnu: &dnu });
    }
    Ok(())
}

/// Simulate one record with default options on random stream 0.
pub fn simulate_trajectory(model: &FilterModel, tmax: f64, dt: f64, seed: u64) -> Result<TrajectoryRecord> {
    simulate_trajectory_with(model, &SimOptions::default(), tmax, dt, seed, 0)
}

/// Simulate one record. `dY` is generated from the filter itself:
/// `dY = Σ e dt + dν`, `dν ~ N(0, Σ dt)`.
pub fn simulate_trajectory_with(
    model: &FilterModel,
    opts: &SimOptions,
    tmax: f64,
    dt: f64,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    let steps = grid_steps(tmax, dt)?;
    check_observables(model, opts)?;
    let snap_idx = snapshot_indices(&opts.snapshots, dt, steps)?;
    let m = model.outputs();
    let mut rng = trajectory_rng(seed, stream);
    let mut diagnostics = TrajectoryDiagnostics::default();

    let mut times = Vec::with_capacity(steps + 1);
    let mut dys = Vec::with_capacity(steps + 1);
    let mut nus = Vec::with_capacity(steps + 1);
    let mut series: Vec<ObservableSeries> = opts
        .observables
        .iter()
        .map(|(name, _)| ObservableSeries { name: name.clone(), values: Vec::with_capacity(steps + 1) })
        .collect();
    let mut snapshots = Vec::with_capacity(snap_idx.len());
    let mut nu = vec![0.0; m];

    integrate(model, opts.scheme, steps, dt, &mut rng, &mut diagnostics, |view| {
        times.push(view.index as f64 * dt);
        dys.push(view.dy.to_vec());
        nu.iter_mut().zip(view.dnu).for_each(|(a, b)| *a += b);
        nus.push(nu.clone());
        for (s, (_, op)) in series.iter_mut().zip(&opts.observables) {
            s.values.push(linalg::trace_product(view.rho, op));
        }
        for (&k, &t) in snap_idx.iter().zip(&opts.snapshots) {
            if k == view.index {
                snapshots.push((t, view.rho.clone()));
            }
        }
    })?;

    Ok(TrajectoryRecord { seed, stream, dt, times, dy: dys, nu: nus, observables: series, snapshots, diagnostics })
}

pub(crate) fn check_observables(model: &FilterModel, opts: &SimOptions) -> Result<()> {
    let d = model.dim();
    for (name, op) in &opts.observables {
        if op.shape() != (d, d) {
            return Err(Error::mismatch(format!("observable '{name}'"), format!("{d}x{d}"), format!("{:?}", op.shape())));
        }
    }
    Ok(())
}
