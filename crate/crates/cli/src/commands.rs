use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use qfilter_core::filter::ensemble::THREADS_ENV;
use qfilter_core::filter::{ensemble_average_with, grid_steps, master_record, simulate_trajectory_with, SimOptions};
use qfilter_core::io::model::{parse_document, ModelInputs};
use qfilter_core::io::records::MASTER_Z_FLOOR;
use qfilter_core::io::{write_records, ModelBundle, RecordFormat, Records};
use qfilter_core::Error;

use crate::args::{CommonArgs, RunArgs};
use crate::report;
use crate::{Failure, Status};

pub const DEFAULT_TRAJECTORIES: usize = 1000;

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read model file {}", path.display()))
        .map_err(|e| Failure::new(Status::Usage, e))
}

/// Parse and elaborate without validating.
pub fn load_inputs(path: &Path) -> Result<ModelInputs, Failure> {
    let text = read_text(path)?;
    let wrap = |e| Failure::new(Status::Usage, anyhow::Error::new(e).context(format!("cannot parse {}", path.display())));
    let doc = parse_document(&text).map_err(wrap)?;
    ModelInputs::elaborate(doc, &text).map_err(wrap)
}

fn load(path: &Path) -> Result<ModelBundle, Failure> {
    load_inputs(path)?
        .validate()
        .map_err(|e| Failure::new(Status::Invalid, anyhow::Error::new(e).context(format!("invalid model {}", path.display()))))
}

/// Exit status for a core error raised while running a validated model.
fn classify(e: Error) -> Failure {
    let status = match e.root() {
        Error::Integration { .. } | Error::NormalizationBreakdown { .. } => Status::Integration,
        Error::InvalidArgument(_) => Status::Usage,
        _ => Status::Invalid,
    };
    Failure::new(status, e)
}

struct Run {
    tmax: f64,
    dt: f64,
    seed: u64,
    opts: SimOptions,
}

fn resolve(args: &RunArgs, bundle: &ModelBundle) -> Result<Run, Failure> {
    let sim = &bundle.inputs.simulation;
    let tmax = args
        .tmax
        .or(sim.tmax)
        .ok_or_else(|| Failure::usage("no horizon given: pass --tmax or set simulation.tmax in the model"))?;
    let dt = args.dt.unwrap_or(sim.dt);
    grid_steps(tmax, dt).map_err(Failure::usage)?;
    let mut opts = bundle.sim_options();
    match &args.snapshots {
        Some(s) => opts.snapshots = s.clone(),
        None if args.tmax.is_some() => {
            let before = opts.snapshots.len();
            opts.snapshots.retain(|&t| t <= tmax);
            if opts.snapshots.len() < before {
                log::warn!("dropped {} model snapshot time(s) beyond --tmax {tmax}", before - opts.snapshots.len());
            }
        }
        None => {}
    }
    if let Some(&t) = opts.snapshots.iter().find(|&&t| !(0.0..=tmax).contains(&t)) {
        return Err(Failure::usage(format!("snapshot time {t} outside [0, {tmax}]")));
    }
    if let Some(scheme) = args.scheme {
        opts.scheme = scheme;
    }
    Ok(Run { tmax, dt, seed: args.seed.unwrap_or(sim.seed), opts })
}

/// Write to `--output` or stdout.
fn emit(output: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> Result<(), Failure> {
    let result = match output {
        Some(path) => File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))
            .and_then(|file| {
                let mut w = BufWriter::new(file);
                f(&mut w)?;
                w.flush().context("flushing output")
            }),
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w).and_then(|_| w.flush().context("flushing stdout"))
        }
    };
    result.map_err(|e| Failure::new(Status::Internal, e))
}

fn write(output: Option<&Path>, records: Records<'_>, format: RecordFormat) -> Result<(), Failure> {
    emit(output, |w| Ok(write_records(w, records, format)?))
}

fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn validate(args: &CommonArgs) -> Result<(), Failure> {
    let inputs = load_inputs(&args.model)?;
    let report = report::validation_report(&inputs);
    emit(args.output.as_deref(), |w| {
        write!(w, "{report}")?;
        Ok(())
    })?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.failures().collect();
        Err(Failure::new(Status::Invalid, anyhow::anyhow!("validation failed at: {}", failed.join(", "))))
    }
}

pub fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let bundle = load(&args.common.model)?;
    let run = resolve(args, &bundle)?;
    let record = simulate_trajectory_with(&bundle.model, &run.opts, run.tmax, run.dt, run.seed, 0).map_err(classify)?;
    write(args.common.output.as_deref(), Records::Trajectory(&record), args.format)?;
    let d = &record.diagnostics;
    note(
        args.common.quiet,
        format!(
            "simulated {} steps (seed {}): max trace error {:.2e}, min eigenvalue {:.2e}, max purity {:.12}, {} projections",
            record.times.len() - 1,
            run.seed,
            d.max_trace_error,
            d.min_eigenvalue,
            d.max_purity,
            d.projections
        ),
    );
    Ok(())
}

pub fn ensemble(args: &RunArgs) -> Result<(), Failure> {
    let bundle = load(&args.common.model)?;
    let run = resolve(args, &bundle)?;
    let count = args.trajectories.or(bundle.inputs.simulation.trajectories).unwrap_or(DEFAULT_TRAJECTORIES);
    if count < 2 {
        return Err(Failure::usage(format!("an ensemble needs at least 2 trajectories, got {count}")));
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if v.trim().parse::<usize>().map_or(true, |n| n == 0) {
            return Err(Failure::usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")));
        }
    }
    let result = ensemble_average_with(&bundle.model, &run.opts, run.tmax, run.dt, count, run.seed).map_err(classify)?;
    write(args.common.output.as_deref(), Records::Ensemble(&result), args.format)?;
    if !args.common.quiet {
        eprint!("{}", report::ensemble_summary(&result, MASTER_Z_FLOOR));
    }
    Ok(())
}

pub fn master(args: &RunArgs) -> Result<(), Failure> {
    let bundle = load(&args.common.model)?;
    let run = resolve(args, &bundle)?;
    let record = master_record(&bundle.model, &bundle.inputs.observables, run.tmax, run.dt).map_err(classify)?;
    write(args.common.output.as_deref(), Records::Master(&record), args.format)?;
    if let Some(last) = record.states.last() {
        let pops: Vec<String> = (0..last.nrows()).map(|j| format!("{:.10}", last[(j, j)].re)).collect();
        note(args.common.quiet, format!("master solve: {} steps, final populations [{}]", record.times.len() - 1, pops.join(", ")));
    }
    Ok(())
}
