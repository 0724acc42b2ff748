use num_complex::Complex64;
use rayon::prelude::*;

use super::master::{grid_steps, master_solve};
use super::model::FilterModel;
use super::trajectory::{
    check_observables, integrate, snapshot_indices, trajectory_rng, SimOptions, TrajectoryDiagnostics,
};
use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::linalg;
use crate::{CMatrix, RMatrix};

/// Environment variable overriding the worker-thread count.
pub const THREADS_ENV: &str = "QFILTER_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableStats {
    pub name: String,
    pub mean: Vec<Complex64>,
    /// Standard errors of the real and imaginary parts, packed as a complex number.
    pub std_error: Vec<Complex64>,
    /// `Tr(ρ_master X)` at the same times.
    pub master: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnovationStats {
    /// Componentwise mean of `ν(T)` over trajectories.
    pub mean_final: Vec<f64>,
    pub std_error_final: Vec<f64>,
    /// Mean over trajectories of `Σ_steps dν dνᵀ`.
    pub quadratic_variation: RMatrix,
    /// `Σ T`.
    pub expected_variation: RMatrix,
}

impl InnovationStats {
    /// `max |QV − ΣT| / max |ΣT|`.
    pub fn relative_variation_error(&self) -> f64 {
        let diff = (&self.quadratic_variation - &self.expected_variation).amax();
        diff / self.expected_variation.amax()
    }

    /// Largest `|mean ν_j(T)| / SE_j`.
    pub fn max_mean_z(&self) -> f64 {
        self.mean_final
            .iter()
            .zip(&self.std_error_final)
            .map(|(m, s)| if *s > 0.0 { m.abs() / s } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// Monte Carlo averages over independent trajectories at snapshot times.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub trajectories: usize,
    pub base_seed: u64,
    pub dt: f64,
    pub tmax: f64,
    pub snapshot_times: Vec<f64>,
    pub mean_state: Vec<Operator>,
    /// Entrywise standard error of the mean state (real part: SE of `Re`,
    /// imaginary part: SE of `Im`).
    pub state_std_error: Vec<CMatrix>,
    pub observables: Vec<ObservableStats>,
    pub innovations: InnovationStats,
    /// Fourth-order master-equation solution at the snapshot times.
    pub master_state: Vec<Operator>,
    /// `‖ρ̄ − ρ_master‖_max` per snapshot.
    pub master_deviation: Vec<f64>,
    pub diagnostics: TrajectoryDiagnostics,
}

impl EnsembleResult {
    /// Largest ratio `|ρ̄ − ρ_master| / SE` over all entries (real and
    /// imaginary parts separately) and snapshots. Entries whose deviation is
    /// at most `eps` count as zero.
    pub fn max_master_z(&self, eps: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for ((mean, master), se) in self.mean_state.iter().zip(&self.master_state).zip(&self.state_std_error) {
            for ((a, b), s) in mean.iter().zip(master.iter()).zip(se.iter()) {
                for (dev, err) in [((a.re - b.re).abs(), s.re), ((a.im - b.im).abs(), s.im)] {
                    if dev <= eps {
                        continue;
                    }
                    worst = worst.max(if err > 0.0 { dev / err } else { f64::INFINITY });
                }
            }
        }
        worst
    }
}

/// Default snapshots: eleven evenly spaced times including both ends.
pub fn default_snapshots(tmax: f64) -> Vec<f64> {
    (0..=10).map(|k| tmax * k as f64 / 10.0).collect()
}

struct Sample {
    states: Vec<Operator>,
    observables: Vec<Vec<Complex64>>,
    nu_final: Vec<f64>,
    variation: RMatrix,
    diagnostics: TrajectoryDiagnostics,
}

/// Run `f` on a pool sized by [`THREADS_ENV`] if set, else on the global pool.
pub fn with_thread_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

pub fn ensemble_average(model: &FilterModel, tmax: f64, dt: f64, count: usize, base_seed: u64) -> Result<EnsembleResult> {
    ensemble_average_with(model, &SimOptions::default(), tmax, dt, count, base_seed)
}

/// Trajectory `i` uses random stream `i` of `base_seed`. Trajectories run in
/// parallel; the reduction runs in index order, so results do not depend on
/// scheduling.
pub fn ensemble_average_with(
    model: &FilterModel,
    opts: &SimOptions,
    tmax: f64,
    dt: f64,
    count: usize,
    base_seed: u64,
) -> Result<EnsembleResult> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!("an ensemble needs at least 2 trajectories, got {count}")));
    }
    let steps = grid_steps(tmax, dt)?;
    check_observables(model, opts)?;
    let snapshot_times = if opts.snapshots.is_empty() { default_snapshots(steps as f64 * dt) } else { opts.snapshots.clone() };
    let snap_idx = snapshot_indices(&snapshot_times, dt, steps)?;
    let m = model.outputs();

    let run = |i: usize| -> Result<Sample> {
        let mut rng = trajectory_rng(base_seed, i as u64);
        let mut diagnostics = TrajectoryDiagnostics::default();
        let mut states = vec![Operator::zeros(0, 0); snap_idx.len()];
        let mut observables = vec![vec![Complex64::new(0.0, 0.0); snap_idx.len()]; opts.observables.len()];
        let mut nu_final = vec![0.0; m];
        let mut variation = RMatrix::zeros(m, m);
        integrate(model, opts.scheme, steps, dt, &mut rng, &mut diagnostics, |view| {
            for j in 0..m {
                nu_final[j] += view.dnu[j];
                for k in 0..m {
                    variation[(j, k)] += view.dnu[j] * view.dnu[k];
                }
            }
            for (s, &k) in snap_idx.iter().enumerate() {
                if k == view.index {
                    states[s] = view.rho.clone();
                    for (o, (_, op)) in opts.observables.iter().enumerate() {
                        observables[o][s] = linalg::trace_product(view.rho, op);
                    }
                }
            }
        })
        .map_err(|e| match e {
            Error::Integration { step, reason } => Error::Integration { step, reason: format!("trajectory {i}: {reason}") },
            other => other,
        })?;
        Ok(Sample { states, observables, nu_final, variation, diagnostics })
    };

    let samples: Vec<Result<Sample>> = with_thread_pool(|| (0..count).into_par_iter().map(run).collect())?;
    let samples: Vec<Sample> = samples.into_iter().collect::<Result<_>>()?;

    let d = model.dim();
    let n = count as f64;
    let ns = snap_idx.len();
    let mut sum = vec![CMatrix::zeros(d, d); ns];
    let mut sum_sq = vec![CMatrix::zeros(d, d); ns];
    let mut obs_sum = vec![vec![Complex64::new(0.0, 0.0); ns]; opts.observables.len()];
    let mut obs_sq = obs_sum.clone();
    let mut nu_sum = vec![0.0; m];
    let mut nu_sq = vec![0.0; m];
    let mut variation = RMatrix::zeros(m, m);
    let mut diagnostics = TrajectoryDiagnostics::default();
    for s in &samples {
        for k in 0..ns {
            sum[k] += &s.states[k];
            sum_sq[k] += s.states[k].map(|z| Complex64::new(z.re * z.re, z.im * z.im));
        }
        for (o, vals) in s.observables.iter().enumerate() {
            for (k, z) in vals.iter().enumerate() {
                obs_sum[o][k] += z;
                obs_sq[o][k] += Complex64::new(z.re * z.re, z.im * z.im);
            }
        }
        for j in 0..m {
            nu_sum[j] += s.nu_final[j];
            nu_sq[j] += s.nu_final[j] * s.nu_final[j];
        }
        variation += &s.variation;
        merge(&mut diagnostics, &s.diagnostics);
    }

    let se = |s: f64, sq: f64| {
        let mean = s / n;
        ((sq / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
    };
    let se_c = |s: Complex64, sq: Complex64| Complex64::new(se(s.re, sq.re), se(s.im, sq.im));

    let mean_state: Vec<Operator> = sum.iter().map(|s| s.unscale(n)).collect();
    let state_std_error = (0..ns).map(|k| sum[k].zip_map(&sum_sq[k], se_c)).collect();
    let horizon = steps as f64 * dt;
    let innovations = InnovationStats {
        mean_final: nu_sum.iter().map(|s| s / n).collect(),
        std_error_final: nu_sum.iter().zip(&nu_sq).map(|(s, q)| se(*s, *q)).collect(),
        quadratic_variation: variation / n,
        expected_variation: model.sigma() * horizon,
    };

    let master = master_solve(model, model.rho0(), horizon, dt)?;
    let master_state: Vec<Operator> = snap_idx.iter().map(|&k| master[k].clone()).collect();
    let observables = opts
        .observables
        .iter()
        .enumerate()
        .map(|(o, (name, op))| ObservableStats {
            name: name.clone(),
            mean: obs_sum[o].iter().map(|z| z / n).collect(),
            std_error: obs_sum[o].iter().zip(&obs_sq[o]).map(|(s, q)| se_c(*s, *q)).collect(),
            master: master_state.iter().map(|rho| linalg::trace_product(rho, op)).collect(),
        })
        .collect();
    let master_deviation = mean_state.iter().zip(&master_state).map(|(a, b)| linalg::max_abs_diff(a, b)).collect();

    Ok(EnsembleResult {
        trajectories: count,
        base_seed,
        dt,
        tmax: horizon,
        snapshot_times,
        mean_state,
        state_std_error,
        observables,
        innovations,
        master_state,
        master_deviation,
        diagnostics,
    })
}

fn merge(into: &mut TrajectoryDiagnostics, other: &TrajectoryDiagnostics) {
    into.max_trace_error = into.max_trace_error.max(other.max_trace_error);
    into.max_hermitian_residual = into.max_hermitian_residual.max(other.max_hermitian_residual);
    into.min_eigenvalue = into.min_eigenvalue.min(other.min_eigenvalue);
    into.max_purity = into.max_purity.max(other.max_purity);
    into.projections += other.projections;
    into.max_truncation_population = into.max_truncation_population.max(other.max_truncation_population);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::model::{build_filter_model, FieldMode, SystemSpec};
    use crate::filter::trajectory::simulate_trajectory_with;
    use crate::hilbert::{pauli, Pauli};
    use crate::linalg::c;

    fn homodyne_qubit() -> FilterModel {
        let system = SystemSpec::new(pauli(Pauli::Z).scale(0.5), vec![pauli(Pauli::Minus)], pauli(Pauli::Plus) * pauli(Pauli::Minus));
        build_filter_model(&system, &FieldMode::ExplicitVacuum, &CMatrix::from_element(1, 1, c(1.0, 0.0))).unwrap()
    }

    #[test]
    fn small_ensemble_is_consistent_with_master() {
        let model = homodyne_qubit();
        let opts = SimOptions::default().with_observable("z", pauli(Pauli::Z));
        let res = ensemble_average_with(&model, &opts, 1.0, 1e-3, 200, 3).unwrap();
        assert_eq!(res.snapshot_times.len(), 11);
        assert_eq!(res.mean_state[0], *model.rho0());
        assert!(res.max_master_z(1e-12) < 4.0, "z = {}", res.max_master_z(1e-12));
        for rho in &res.mean_state {
            assert!((linalg::trace(rho).re - 1.0).abs() < 1e-12);
        }
        let z = &res.observables[0];
        assert!((z.mean[10].re - (2.0 * (-1.0f64).exp() - 1.0)).abs() < 4.0 * z.std_error[10].re);
    }

    #[test]
    fn ensemble_is_reproducible_and_stream_aligned() {
        let model = homodyne_qubit();
        let opts = SimOptions::default().with_snapshots(vec![0.5]);
        let a = ensemble_average_with(&model, &opts, 0.5, 1e-3, 4, 11).unwrap();
        let b = ensemble_average_with(&model, &opts, 0.5, 1e-3, 4, 11).unwrap();
        assert_eq!(a, b);
        // the mean of four trajectories is the mean of the individually simulated ones
        let mut mean = CMatrix::zeros(2, 2);
        for i in 0..4 {
            let rec = simulate_trajectory_with(&model, &opts, 0.5, 1e-3, 11, i).unwrap();
            mean += &rec.snapshots[0].1;
        }
        assert!(linalg::max_abs_diff(&mean.unscale(4.0), &a.mean_state[0]) < 1e-15);
    }

    #[test]
    fn rejects_single_trajectory() {
        assert!(ensemble_average(&homodyne_qubit(), 1.0, 1e-3, 1, 0).is_err());
    }
}
