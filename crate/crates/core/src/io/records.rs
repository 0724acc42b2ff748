//! CSV and JSON output for trajectories, ensembles and master solves.
//!
//! Every number is written with 17 significant digits, so values read back
//! are bit-identical. CSV files start with a `#` comment line carrying the
//! schema version; the header follows. Non-finite numbers are written as
//! `NaN`/`inf` in CSV and `null` in JSON.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{
    EnsembleResult, InnovationStats, MasterRecord, ObservableSeries, ObservableStats, TrajectoryDiagnostics,
    TrajectoryRecord,
};
use crate::{CMatrix, Complex64, RMatrix};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("unsupported output format '{0}' (expected csv or json)")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed record: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for RecordFormat {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(RecordFormat::Csv),
            "json" => Ok(RecordFormat::Json),
            _ => Err(RecordError::UnsupportedFormat(s.to_string())),
        }
    }
}

impl fmt::Display for RecordFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordFormat::Csv => "csv",
            RecordFormat::Json => "json",
        })
    }
}

/// Anything that [`write_records`] can serialise.
#[derive(Debug, Clone, Copy)]
pub enum Records<'a> {
    Trajectory(&'a TrajectoryRecord),
    Ensemble(&'a EnsembleResult),
    Master(&'a MasterRecord),
}

/// `x` with 17 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_records<W: Write>(out: W, records: Records<'_>, format: RecordFormat) -> Result<(), RecordError> {
    match format {
        RecordFormat::Csv => write_csv(out, records),
        RecordFormat::Json => write_json(out, records),
    }
}

/// Convenience wrapper returning the serialised bytes.
pub fn records_to_vec(records: Records<'_>, format: RecordFormat) -> Result<Vec<u8>, RecordError> {
    let mut buf = Vec::new();
    write_records(&mut buf, records, format)?;
    Ok(buf)
}

// ---------------------------------------------------------------- CSV

fn complex_columns(names: impl Iterator<Item = String>, header: &mut Vec<String>, prefixes: &[&str]) {
    for name in names {
        for p in prefixes {
            header.push(format!("{p}Re_{name}"));
            header.push(format!("{p}Im_{name}"));
        }
    }
}

fn push_complex(row: &mut Vec<String>, z: Complex64) {
    row.push(format_number(z.re));
    row.push(format_number(z.im));
}

fn write_csv<W: Write>(mut out: W, records: Records<'_>) -> Result<(), RecordError> {
    let kind = match records {
        Records::Trajectory(r) => format!("kind=trajectory seed={} stream={}", r.seed, r.stream),
        Records::Ensemble(r) => format!("kind=ensemble trajectories={} base_seed={}", r.trajectories, r.base_seed),
        Records::Master(_) => "kind=master".to_string(),
    };
    writeln!(out, "# schema_version={RECORD_SCHEMA_VERSION} {kind}")?;
    let mut w = csv::Writer::from_writer(out);
    match records {
        Records::Trajectory(r) => {
            let m = r.dy.first().map_or(0, Vec::len);
            let mut header = vec!["t".to_string()];
            complex_columns(r.observables.iter().map(|o| o.name.clone()), &mut header, &[""]);
            header.extend((1..=m).map(|j| format!("dY_{j}")));
            header.extend((1..=m).map(|j| format!("nu_{j}")));
            w.write_record(&header)?;
            for k in 0..r.times.len() {
                let mut row = vec![format_number(r.times[k])];
                for o in &r.observables {
                    push_complex(&mut row, o.values[k]);
                }
                row.extend(r.dy[k].iter().map(|x| format_number(*x)));
                row.extend(r.nu[k].iter().map(|x| format_number(*x)));
                w.write_record(&row)?;
            }
        }
        Records::Ensemble(r) => {
            let d = r.mean_state.first().map_or(0, |m| m.nrows());
            let mut header = vec!["t".to_string()];
            complex_columns(r.observables.iter().map(|o| o.name.clone()), &mut header, &["", "se_", "master_"]);
            header.push("master_deviation".into());
            let entries: Vec<String> = (0..d).flat_map(|j| (0..d).map(move |k| format!("rho_{j}_{k}"))).collect();
            complex_columns(entries.iter().cloned(), &mut header, &["", "se_", "master_"]);
            w.write_record(&header)?;
            for s in 0..r.snapshot_times.len() {
                let mut row = vec![format_number(r.snapshot_times[s])];
                for o in &r.observables {
                    push_complex(&mut row, o.mean[s]);
                    push_complex(&mut row, o.std_error[s]);
                    push_complex(&mut row, o.master[s]);
                }
                row.push(format_number(r.master_deviation[s]));
                for j in 0..d {
                    for k in 0..d {
                        push_complex(&mut row, r.mean_state[s][(j, k)]);
                        push_complex(&mut row, r.state_std_error[s][(j, k)]);
                        push_complex(&mut row, r.master_state[s][(j, k)]);
                    }
                }
                w.write_record(&row)?;
            }
        }
        Records::Master(r) => {
            let d = r.states.first().map_or(0, |m| m.nrows());
            let mut header = vec!["t".to_string()];
            complex_columns(r.observables.iter().map(|o| o.name.clone()), &mut header, &[""]);
            header.extend((0..d).map(|j| format!("p_{j}")));
            w.write_record(&header)?;
            for k in 0..r.times.len() {
                let mut row = vec![format_number(r.times[k])];
                for o in &r.observables {
                    push_complex(&mut row, o.values[k]);
                }
                row.extend((0..d).map(|j| format_number(r.states[k][(j, j)].re)));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- JSON

/// JSON number formatting with 17 significant digits.
struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

fn to_json_writer<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<(), RecordError> {
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits);
    value.serialize(&mut ser)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSeries {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexSeries {
    fn new(values: &[Complex64]) -> Self {
        ComplexSeries { re: values.iter().map(|z| z.re).collect(), im: values.iter().map(|z| z.im).collect() }
    }

    fn values(&self) -> Result<Vec<Complex64>, RecordError> {
        if self.re.len() != self.im.len() {
            return Err(RecordError::Schema("re and im have different lengths".into()));
        }
        Ok(self.re.iter().zip(&self.im).map(|(a, b)| Complex64::new(*a, *b)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSeries {
    pub name: String,
    #[serde(flatten)]
    pub values: ComplexSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    fn new(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect()).collect();
        MatrixJson { re: rows(|z| z.re), im: rows(|z| z.im) }
    }

    fn matrix(&self) -> Result<CMatrix, RecordError> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        let ok = self.im.len() == rows && self.re.iter().chain(&self.im).all(|r| r.len() == cols);
        if !ok {
            return Err(RecordError::Schema("ragged matrix".into()));
        }
        Ok(CMatrix::from_fn(rows, cols, |r, c| Complex64::new(self.re[r][c], self.im[r][c])))
    }
}

fn real_rows(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

fn real_matrix(rows: &[Vec<f64>]) -> Result<RMatrix, RecordError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(RecordError::Schema("ragged matrix".into()));
    }
    Ok(RMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

/// Transpose `rows × components` into `components × rows`.
fn by_component(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = rows.first().map_or(0, Vec::len);
    (0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

fn by_row(components: &[Vec<f64>], len: usize) -> Result<Vec<Vec<f64>>, RecordError> {
    if components.iter().any(|c| c.len() != len) {
        return Err(RecordError::Schema("component length differs from the time grid".into()));
    }
    Ok((0..len).map(|k| components.iter().map(|c| c[k]).collect()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsJson {
    pub max_trace_error: f64,
    pub max_hermitian_residual: f64,
    /// `null` when no step was taken.
    pub min_eigenvalue: Option<f64>,
    pub max_purity: f64,
    pub projections: usize,
    pub max_truncation_population: f64,
}

impl From<&TrajectoryDiagnostics> for DiagnosticsJson {
    fn from(d: &TrajectoryDiagnostics) -> Self {
        DiagnosticsJson {
            max_trace_error: d.max_trace_error,
            max_hermitian_residual: d.max_hermitian_residual,
            min_eigenvalue: d.min_eigenvalue.is_finite().then_some(d.min_eigenvalue),
            max_purity: d.max_purity,
            projections: d.projections,
            max_truncation_population: d.max_truncation_population,
        }
    }
}

impl From<&DiagnosticsJson> for TrajectoryDiagnostics {
    fn from(d: &DiagnosticsJson) -> Self {
        TrajectoryDiagnostics {
            max_trace_error: d.max_trace_error,
            max_hermitian_residual: d.max_hermitian_residual,
            min_eigenvalue: d.min_eigenvalue.unwrap_or(f64::INFINITY),
            max_purity: d.max_purity,
            projections: d.projections,
            max_truncation_population: d.max_truncation_population,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotJson {
    pub t: f64,
    pub state: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryJson {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub t: Vec<f64>,
    pub observables: Vec<NamedSeries>,
    /// `dY[j][k]`: component `j` at grid point `k`.
    #[serde(rename = "dY")]
    pub dy: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
    pub snapshots: Vec<SnapshotJson>,
    pub diagnostics: DiagnosticsJson,
}

impl From<&TrajectoryRecord> for TrajectoryJson {
    fn from(r: &TrajectoryRecord) -> Self {
        TrajectoryJson {
            schema_version: RECORD_SCHEMA_VERSION,
            kind: "trajectory".into(),
            seed: r.seed,
            stream: r.stream,
            dt: r.dt,
            t: r.times.clone(),
            observables: r.observables.iter().map(|o| NamedSeries { name: o.name.clone(), values: ComplexSeries::new(&o.values) }).collect(),
            dy: by_component(&r.dy),
            nu: by_component(&r.nu),
            snapshots: r.snapshots.iter().map(|(t, s)| SnapshotJson { t: *t, state: MatrixJson::new(s) }).collect(),
            diagnostics: (&r.diagnostics).into(),
        }
    }
}

impl TryFrom<TrajectoryJson> for TrajectoryRecord {
    type Error = RecordError;

    fn try_from(j: TrajectoryJson) -> Result<Self, RecordError> {
        check_header(j.schema_version, &j.kind, "trajectory")?;
        let n = j.t.len();
        Ok(TrajectoryRecord {
            seed: j.seed,
            stream: j.stream,
            dt: j.dt,
            dy: by_row(&j.dy, n)?,
            nu: by_row(&j.nu, n)?,
            times: j.t,
            observables: j
                .observables
                .iter()
                .map(|o| Ok(ObservableSeries { name: o.name.clone(), values: o.values.values()? }))
                .collect::<Result<_, RecordError>>()?,
            snapshots: j.snapshots.iter().map(|s| Ok((s.t, s.state.matrix()?))).collect::<Result<_, RecordError>>()?,
            diagnostics: (&j.diagnostics).into(),
        })
    }
}

fn check_header(version: u32, kind: &str, expected: &str) -> Result<(), RecordError> {
    if version != RECORD_SCHEMA_VERSION {
        return Err(RecordError::Schema(format!("unsupported schema_version {version}")));
    }
    if kind != expected {
        return Err(RecordError::Schema(format!("expected kind '{expected}', found '{kind}'")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableStatsJson {
    pub name: String,
    pub mean: ComplexSeries,
    pub std_error: ComplexSeries,
    pub master: ComplexSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationsJson {
    pub mean_final: Vec<f64>,
    pub std_error_final: Vec<f64>,
    pub quadratic_variation: Vec<Vec<f64>>,
    pub expected_variation: Vec<Vec<f64>>,
    pub relative_variation_error: f64,
    pub max_mean_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleJson {
    pub schema_version: u32,
    pub kind: String,
    pub trajectories: usize,
    pub base_seed: u64,
    pub dt: f64,
    pub tmax: f64,
    pub t: Vec<f64>,
    pub observables: Vec<ObservableStatsJson>,
    pub master_deviation: Vec<f64>,
    /// Largest `|ρ̄ − ρ_master| / SE` over entries and snapshots.
    pub max_master_z: Option<f64>,
    pub mean_state: Vec<MatrixJson>,
    pub state_std_error: Vec<MatrixJson>,
    pub master_state: Vec<MatrixJson>,
    pub innovations: InnovationsJson,
    pub diagnostics: DiagnosticsJson,
}

/// Deviations at or below this are treated as exact agreement when
/// computing `max_master_z`.
pub const MASTER_Z_FLOOR: f64 = 1e-12;

impl From<&EnsembleResult> for EnsembleJson {
    fn from(r: &EnsembleResult) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        EnsembleJson {
            schema_version: RECORD_SCHEMA_VERSION,
            kind: "ensemble".into(),
            trajectories: r.trajectories,
            base_seed: r.base_seed,
            dt: r.dt,
            tmax: r.tmax,
            t: r.snapshot_times.clone(),
            observables: r
                .observables
                .iter()
                .map(|o| ObservableStatsJson {
                    name: o.name.clone(),
                    mean: ComplexSeries::new(&o.mean),
                    std_error: ComplexSeries::new(&o.std_error),
                    master: ComplexSeries::new(&o.master),
                })
                .collect(),
            master_deviation: r.master_deviation.clone(),
            max_master_z: finite(r.max_master_z(MASTER_Z_FLOOR)),
            mean_state: r.mean_state.iter().map(MatrixJson::new).collect(),
            state_std_error: r.state_std_error.iter().map(MatrixJson::new).collect(),
            master_state: r.master_state.iter().map(MatrixJson::new).collect(),
            innovations: InnovationsJson {
                mean_final: r.innovations.mean_final.clone(),
                std_error_final: r.innovations.std_error_final.clone(),
                quadratic_variation: real_rows(&r.innovations.quadratic_variation),
                expected_variation: real_rows(&r.innovations.expected_variation),
                relative_variation_error: r.innovations.relative_variation_error(),
                max_mean_z: finite(r.innovations.max_mean_z()),
            },
            diagnostics: (&r.diagnostics).into(),
        }
    }
}

impl TryFrom<EnsembleJson> for EnsembleResult {
    type Error = RecordError;

    fn try_from(j: EnsembleJson) -> Result<Self, RecordError> {
        check_header(j.schema_version, &j.kind, "ensemble")?;
        let mats = |v: &[MatrixJson]| v.iter().map(MatrixJson::matrix).collect::<Result<Vec<_>, _>>();
        Ok(EnsembleResult {
            trajectories: j.trajectories,
            base_seed: j.base_seed,
            dt: j.dt,
            tmax: j.tmax,
            mean_state: mats(&j.mean_state)?,
            state_std_error: mats(&j.state_std_error)?,
            master_state: mats(&j.master_state)?,
            observables: j
                .observables
                .iter()
                .map(|o| {
                    Ok(ObservableStats {
                        name: o.name.clone(),
                        mean: o.mean.values()?,
                        std_error: o.std_error.values()?,
                        master: o.master.values()?,
                    })
                })
                .collect::<Result<_, RecordError>>()?,
            innovations: InnovationStats {
                mean_final: j.innovations.mean_final,
                std_error_final: j.innovations.std_error_final,
                quadratic_variation: real_matrix(&j.innovations.quadratic_variation)?,
                expected_variation: real_matrix(&j.innovations.expected_variation)?,
            },
            master_deviation: j.master_deviation,
            snapshot_times: j.t,
            diagnostics: (&j.diagnostics).into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterJson {
    pub schema_version: u32,
    pub kind: String,
    pub dt: f64,
    pub t: Vec<f64>,
    pub observables: Vec<NamedSeries>,
    /// `populations[j][k] = ⟨j|ρ(t_k)|j⟩`.
    pub populations: Vec<Vec<f64>>,
}

impl From<&MasterRecord> for MasterJson {
    fn from(r: &MasterRecord) -> Self {
        let d = r.states.first().map_or(0, |m| m.nrows());
        MasterJson {
            schema_version: RECORD_SCHEMA_VERSION,
            kind: "master".into(),
            dt: r.dt,
            t: r.times.clone(),
            observables: r.observables.iter().map(|o| NamedSeries { name: o.name.clone(), values: ComplexSeries::new(&o.values) }).collect(),
            populations: (0..d).map(|j| r.states.iter().map(|s| s[(j, j)].re).collect()).collect(),
        }
    }
}

fn write_json<W: Write>(out: W, records: Records<'_>) -> Result<(), RecordError> {
    match records {
        Records::Trajectory(r) => to_json_writer(out, &TrajectoryJson::from(r)),
        Records::Ensemble(r) => to_json_writer(out, &EnsembleJson::from(r)),
        Records::Master(r) => to_json_writer(out, &MasterJson::from(r)),
    }
}

pub fn read_trajectory_json(bytes: &[u8]) -> Result<TrajectoryRecord, RecordError> {
    serde_json::from_slice::<TrajectoryJson>(bytes)?.try_into()
}

pub fn read_ensemble_json(bytes: &[u8]) -> Result<EnsembleResult, RecordError> {
    serde_json::from_slice::<EnsembleJson>(bytes)?.try_into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{
        build_filter_model, ensemble_average_with, master_record, simulate_trajectory_with, FieldMode, FilterModel,
        SimOptions, SystemSpec,
    };
    use crate::hilbert::{pauli, Pauli};
    use crate::linalg::c;
    use proptest::prelude::*;

    fn model() -> FilterModel {
        let system = SystemSpec::new(pauli(Pauli::Z).scale(0.5), vec![pauli(Pauli::Minus)], pauli(Pauli::Plus) * pauli(Pauli::Minus));
        build_filter_model(&system, &FieldMode::ExplicitVacuum, &CMatrix::from_element(1, 1, c(1.0, 0.0))).unwrap()
    }

    fn text(bytes: Vec<u8>) -> String {
        String::from_utf8(bytes).unwrap()
    }

    #[test]
    fn trajectory_csv_layout() {
        let rec = simulate_trajectory_with(&model(), &SimOptions::default(), 0.01, 1e-3, 1, 0).unwrap();
        let out = text(records_to_vec(Records::Trajectory(&rec), RecordFormat::Csv).unwrap());
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("# schema_version=1"));
        assert_eq!(lines[1], "t,dY_1,nu_1");
        assert_eq!(lines.len(), 2 + 11);
        assert_eq!(lines[2], "0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0");

        let opts = SimOptions::default().with_observable("z", pauli(Pauli::Z));
        let rec = simulate_trajectory_with(&model(), &opts, 0.01, 1e-3, 1, 0).unwrap();
        let out = text(records_to_vec(Records::Trajectory(&rec), RecordFormat::Csv).unwrap());
        assert_eq!(out.lines().nth(1).unwrap(), "t,Re_z,Im_z,dY_1,nu_1");
    }

    #[test]
    fn numbers_have_seventeen_significant_digits() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(-1.0 / 3.0), "-3.3333333333333331e-1");
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-300, f64::MIN_POSITIVE] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn trajectory_json_round_trip() {
        let opts = SimOptions::default().with_observable("z", pauli(Pauli::Z)).with_snapshots(vec![0.0, 0.02]);
        let rec = simulate_trajectory_with(&model(), &opts, 0.02, 1e-3, 5, 2).unwrap();
        let bytes = records_to_vec(Records::Trajectory(&rec), RecordFormat::Json).unwrap();
        let back = read_trajectory_json(&bytes).unwrap();
        assert_eq!(back, rec);
        assert_eq!(records_to_vec(Records::Trajectory(&back), RecordFormat::Json).unwrap(), bytes);
    }

    #[test]
    fn ensemble_json_has_standard_errors_and_round_trips() {
        let opts = SimOptions::default().with_observable("z", pauli(Pauli::Z));
        let res = ensemble_average_with(&model(), &opts, 0.05, 1e-3, 4, 9).unwrap();
        let bytes = records_to_vec(Records::Ensemble(&res), RecordFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["schema_version"], 1);
        let se = &v["observables"][0]["std_error"]["re"];
        assert_eq!(se.as_array().unwrap().len(), res.snapshot_times.len());
        let back = read_ensemble_json(&bytes).unwrap();
        assert_eq!(back, res);
        assert_eq!(records_to_vec(Records::Ensemble(&back), RecordFormat::Json).unwrap(), bytes);

        let csv = text(records_to_vec(Records::Ensemble(&res), RecordFormat::Csv).unwrap());
        let header = csv.lines().nth(1).unwrap();
        assert!(header.starts_with("t,Re_z,Im_z,se_Re_z,se_Im_z,master_Re_z,master_Im_z,master_deviation,Re_rho_0_0"));
        assert_eq!(csv.lines().count(), 2 + res.snapshot_times.len());
    }

    #[test]
    fn master_csv_has_populations() {
        let rec = master_record(&model(), &[("pe".into(), pauli(Pauli::Plus) * pauli(Pauli::Minus))], 0.01, 1e-3).unwrap();
        let csv = text(records_to_vec(Records::Master(&rec), RecordFormat::Csv).unwrap());
        assert_eq!(csv.lines().nth(1).unwrap(), "t,Re_pe,Im_pe,p_0,p_1");
        let json = text(records_to_vec(Records::Master(&rec), RecordFormat::Json).unwrap());
        let back: MasterJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.populations.len(), 2);
    }

    #[test]
    fn format_names() {
        assert_eq!("CSV".parse::<RecordFormat>().unwrap(), RecordFormat::Csv);
        assert_eq!("json".parse::<RecordFormat>().unwrap(), RecordFormat::Json);
        assert!(matches!("xml".parse::<RecordFormat>(), Err(RecordError::UnsupportedFormat(_))));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let res = ensemble_average_with(&model(), &SimOptions::default(), 0.01, 1e-3, 2, 0).unwrap();
        let bytes = records_to_vec(Records::Ensemble(&res), RecordFormat::Json).unwrap();
        assert!(read_trajectory_json(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn every_finite_number_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_number(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
