use std::fmt::{self, Write as _};

use qfilter_core::gaussian::{lift_measurement, validate_gaussian, FACTOR_TOL};
use qfilter_core::io::ModelInputs;
use qfilter_core::measurement::complete_measurement;
use qfilter_core::{build_filter_model, validate_measurement, EnsembleResult, FieldMode, RMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone)]
pub struct StageLine {
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub stages: Vec<StageLine>,
}

impl ValidationReport {
    fn push(&mut self, name: &'static str, outcome: Outcome, detail: impl Into<String>) {
        self.stages.push(StageLine { name, outcome, detail: detail.into() });
    }

    fn check(&mut self, name: &'static str, ok: bool, detail: impl Into<String>) -> bool {
        self.push(name, if ok { Outcome::Pass } else { Outcome::Fail }, detail);
        ok
    }

    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.outcome != Outcome::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.stages.iter().filter(|s| s.outcome == Outcome::Fail).map(|s| s.name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stages {
            let tag = match s.outcome {
                Outcome::Pass => "PASS",
                Outcome::Fail => "FAIL",
                Outcome::Skip => "SKIP",
            };
            writeln!(f, "{tag}  {:<22} {}", s.name, s.detail)?;
        }
        writeln!(f, "{}", if self.passed() { "model is valid" } else { "model is invalid" })
    }
}

const K_TOL: f64 = 1e-10;

/// Run each stage of the filter assembly separately.
pub fn validation_report(inputs: &ModelInputs) -> ValidationReport {
    let mut r = ValidationReport::default();
    let n = inputs.system.couplings.len();
    let m = inputs.g.nrows();

    let field = match &inputs.field {
        None => {
            r.push("gaussian field", Outcome::Skip, "explicit vacuum");
            r.push("factorization", Outcome::Skip, "explicit vacuum");
            Some(None)
        }
        Some((n_mat, m_mat)) => match validate_gaussian(n_mat, m_mat) {
            Err(e) => {
                r.check("gaussian field", false, e.to_string());
                r.push("factorization", Outcome::Skip, "field rejected");
                None
            }
            Ok(spec) => {
                r.check("gaussian field", true, format!("F min eigenvalue {:.3e}", spec.f_min_eigenvalue()));
                match spec.coefficients() {
                    Ok(c) => {
                        let res = c.residuals;
                        r.check(
                            "factorization",
                            res.max() <= FACTOR_TOL,
                            format!("residuals: commutation {:.2e}, number {:.2e}, pair {:.2e}", res.commutation, res.number, res.pair),
                        );
                        Some(Some((spec.clone(), c.clone())))
                    }
                    Err(e) => {
                        r.check("factorization", false, e.to_string());
                        None
                    }
                }
            }
        },
    };

    let measurement = match validate_measurement(&inputs.g, n) {
        Ok(spec) => {
            r.check("measurement", true, format!("{m}x{n}, self-commutation residual {:.2e}", spec.commutation_residual()));
            true
        }
        Err(e) => r.check("measurement", false, e.to_string()),
    };

    let lifted = match (&field, measurement) {
        (Some(Some((_, c))), true) => match lift_measurement(&inputs.g, c).and_then(|g| validate_measurement(&g, 2 * n)) {
            Ok(spec) => {
                r.check("lifted measurement", true, format!("{m}x{}, self-commutation residual {:.2e}", 2 * n, spec.commutation_residual()));
                Some(spec)
            }
            Err(e) => {
                r.check("lifted measurement", false, e.to_string());
                None
            }
        },
        (Some(None), true) => {
            r.push("lifted measurement", Outcome::Skip, "explicit vacuum: G is used as is");
            validate_measurement(&inputs.g, n).ok()
        }
        _ => {
            r.push("lifted measurement", Outcome::Skip, "earlier stage failed");
            None
        }
    };

    match lifted.as_ref().map(complete_measurement) {
        Some(Ok(done)) => {
            r.check(
                "completion",
                true,
                format!("condition number {:.3e}, commutation residual {:.2e}", done.condition, done.commutation_residual),
            );
            let top = done.k.view((0, 0), (m, m)).into_owned();
            let top_residual = max_abs_diff_real(&top, &RMatrix::identity(m, m));
            let square = done.k.nrows() == m;
            let k_ok = top_residual <= K_TOL && (!square || max_abs_diff_real(&done.k, &RMatrix::identity(m, m)) <= 1e-12);
            r.check("conditioning gain", k_ok, format!("K top block residual {top_residual:.2e}"));
            let eig = done.sigma.clone().symmetric_eigen().eigenvalues;
            let list: Vec<String> = eig.iter().map(|v| format!("{v:.6e}")).collect();
            r.check("noise covariance", eig.iter().all(|&v| v > 0.0), format!("Σ eigenvalues [{}]", list.join(", ")));
        }
        Some(Err(e)) => {
            r.check("completion", false, e.to_string());
            r.push("conditioning gain", Outcome::Skip, "completion failed");
            r.push("noise covariance", Outcome::Skip, "completion failed");
        }
        None => {
            for name in ["completion", "conditioning gain", "noise covariance"] {
                r.push(name, Outcome::Skip, "earlier stage failed");
            }
        }
    }

    if r.passed() {
        let mode = match &field {
            Some(Some((spec, _))) => FieldMode::Gaussian(spec.clone()),
            _ => FieldMode::ExplicitVacuum,
        };
        match build_filter_model(&inputs.system, &mode, &inputs.g) {
            Ok(model) => r.check("filter assembly", true, format!("d = {}, {} gain operators", model.dim(), model.gain_operators().len())),
            Err(e) => r.check("filter assembly", false, e.to_string()),
        };
    } else {
        r.push("filter assembly", Outcome::Skip, "earlier stage failed");
    }
    r
}

fn max_abs_diff_real(a: &RMatrix, b: &RMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Human-readable digest of an ensemble run.
pub fn ensemble_summary(res: &EnsembleResult, floor: f64) -> String {
    let mut s = String::new();
    let (k, dev) = res
        .master_deviation
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |(bk, bv), (k, v)| if v > bv { (k, v) } else { (bk, bv) });
    let _ = writeln!(s, "ensemble: {} trajectories, T = {}, dt = {}", res.trajectories, res.tmax, res.dt);
    let _ = writeln!(s, "  max |mean - master| = {dev:.3e} at t = {}", res.snapshot_times.get(k).copied().unwrap_or(0.0));
    let _ = writeln!(s, "  max deviation / standard error = {:.3}", res.max_master_z(floor));
    let _ = writeln!(
        s,
        "  innovations: max |mean nu(T)| / SE = {:.3}, quadratic variation relative error = {:.3e}",
        res.innovations.max_mean_z(),
        res.innovations.relative_variation_error()
    );
    for o in &res.observables {
        if let (Some(mean), Some(se), Some(master)) = (o.mean.last(), o.std_error.last(), o.master.last()) {
            let _ = writeln!(s, "  {}: final {:.6} +/- {:.6} (master {:.6})", o.name, mean.re, se.re, master.re);
        }
    }
    s
}
