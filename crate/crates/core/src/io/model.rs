//! TOML model files.
//!
//! ```toml
//! schema_version = 1
//!
//! [system]
//! dimension = 2                      # or a list of tensor factors, e.g. [3, 2]
//! hamiltonian = "0.5*sigma_z"
//! couplings = ["sigma_minus"]
//! initial_state = "sigma_plus*sigma_minus"
//!
//! [field]                            # omit for the explicit vacuum pipeline
//! N = [[0.25]]
//! M = [[0]]
//!
//! [measurement]
//! G = [[1]]
//!
//! [observables]
//! p_e = "sigma_plus*sigma_minus"
//!
//! [simulation]
//! tmax = 5.0
//! dt = 1e-3
//! ```
//!
//! Parsing happens in two phases. [`parse_document`] and [`ModelInputs::elaborate`]
//! deal with syntax, expressions and shapes; [`ModelInputs::validate`] runs the
//! full filter assembly. [`parse_model`] does both.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use super::complex::{literal_from_matrix, matrix_from_literal, MatrixLiteral};
use super::expr::OperatorExpr;
use crate::error::Error;
use crate::filter::{build_filter_model, FieldMode, FilterModel, Scheme, SimOptions, SystemSpec};
use crate::gaussian::validate_gaussian;
use crate::hilbert::Operator;
use crate::CMatrix;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub system: SystemBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldBlock>,
    pub measurement: MeasurementBlock,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observables: BTreeMap<String, Spanned<OperatorSource>>,
    #[serde(default)]
    pub simulation: SimulationBlock,
}

fn default_schema_version() -> u32 {
    MODEL_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dimension {
    Single(usize),
    Factors(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSource {
    Expr(String),
    Matrix(MatrixLiteral),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub dimension: Spanned<Dimension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<Spanned<OperatorSource>>,
    pub couplings: Vec<Spanned<OperatorSource>>,
    pub initial_state: Spanned<OperatorSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<Spanned<MatrixLiteral>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Spanned<usize>>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_mat: Option<Spanned<MatrixLiteral>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m_mat: Option<Spanned<MatrixLiteral>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementBlock {
    #[serde(rename = "G")]
    pub g: Spanned<MatrixLiteral>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Spanned<String>>,
}

/// Failure to read a model file.
#[derive(Debug, Clone)]
pub enum ModelError {
    /// Malformed document, unknown key, bad expression or inconsistent shape.
    Parse { path: String, line: usize, column: usize, message: String },
    /// Well-formed inputs rejected by the filter assembly.
    Invalid { path: String, source: Error },
}

impl ModelError {
    pub fn path(&self) -> &str {
        match self {
            ModelError::Parse { path, .. } | ModelError::Invalid { path, .. } => path,
        }
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, ModelError::Invalid { .. })
    }
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Parse { path, line, column, message } if path.is_empty() => {
                write!(f, "line {line}, column {column}: {message}")
            }
            ModelError::Parse { path, line, column, message } => {
                write!(f, "{path} (line {line}, column {column}): {message}")
            }
            ModelError::Invalid { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl std::error::Error for ModelError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ModelError::Invalid { source, .. } => Some(source),
            ModelError::Parse { .. } => None,
        }
    }
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..text.floor_char_boundary(offset)];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

/// Run-time settings with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub tmax: Option<f64>,
    pub dt: f64,
    pub trajectories: Option<usize>,
    pub seed: u64,
    pub snapshots: Vec<f64>,
    pub scheme: Scheme,
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 0;

/// Elaborated, not yet validated model inputs.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub document: ModelDocument,
    pub system: SystemSpec,
    /// `(N, M)` when a `[field]` block is present.
    pub field: Option<(CMatrix, CMatrix)>,
    pub g: CMatrix,
    pub observables: Vec<(String, Operator)>,
    pub simulation: SimulationSettings,
}

/// Validated model: the inputs together with the assembled filter.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub inputs: ModelInputs,
    pub field: FieldMode,
    pub model: FilterModel,
}

impl ModelBundle {
    /// Simulation options carrying the model's observables, scheme and snapshots.
    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            scheme: self.inputs.simulation.scheme,
            observables: self.inputs.observables.clone(),
            snapshots: self.inputs.simulation.snapshots.clone(),
        }
    }
}

/// Parse the TOML layer only.
pub fn parse_document(text: &str) -> Result<ModelDocument, ModelError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ModelError::Parse { path: String::new(), line, column, message: e.message().trim().to_string() }
    })
}

/// Parse, elaborate and validate a model file.
pub fn parse_model(text: &str) -> Result<ModelBundle, ModelError> {
    ModelInputs::elaborate(parse_document(text)?, text)?.validate()
}

struct Elaborator<'a> {
    text: &'a str,
}

impl Elaborator<'_> {
    fn err(&self, path: &str, span: Range<usize>, message: impl Into<String>) -> ModelError {
        let (line, column) = line_column(self.text, span.start);
        ModelError::Parse { path: path.to_string(), line, column, message: message.into() }
    }

    fn operator(&self, path: &str, src: &Spanned<OperatorSource>, dims: &[usize]) -> Result<Operator, ModelError> {
        let d: usize = dims.iter().product();
        match src.get_ref() {
            OperatorSource::Expr(text) => {
                let expr = OperatorExpr::parse(text).map_err(|e| {
                    // Skip the opening quote when pointing into the string.
                    let at = src.span().start + 1 + text.char_indices().nth(e.position).map_or(text.len(), |(b, _)| b);
                    self.err(path, at..at, e.message)
                })?;
                expr.eval_operator(dims).map_err(|e| {
                    let at = src.span().start + 1 + text.char_indices().nth(e.position).map_or(text.len(), |(b, _)| b);
                    self.err(path, at..at, e.message)
                })
            }
            OperatorSource::Matrix(lit) => {
                matrix_from_literal(lit, Some(d), Some(d)).map_err(|e| self.err(path, src.span(), e.to_string()))
            }
        }
    }

    fn matrix(
        &self,
        path: &str,
        src: &Spanned<MatrixLiteral>,
        rows: Option<usize>,
        cols: Option<usize>,
    ) -> Result<CMatrix, ModelError> {
        matrix_from_literal(src.get_ref(), rows, cols).map_err(|e| self.err(path, src.span(), e.to_string()))
    }
}

impl ModelInputs {
    /// Evaluate expressions and literals and check shapes. `text` is the
    /// original document, used for line and column numbers.
    pub fn elaborate(document: ModelDocument, text: &str) -> Result<Self, ModelError> {
        let el = Elaborator { text };
        if document.schema_version != MODEL_SCHEMA_VERSION {
            return Err(el.err(
                "schema_version",
                0..0,
                format!("unsupported schema version {} (expected {MODEL_SCHEMA_VERSION})", document.schema_version),
            ));
        }
        let sys = &document.system;
        let dims = match sys.dimension.get_ref() {
            Dimension::Single(d) => vec![*d],
            Dimension::Factors(f) => f.clone(),
        };
        if dims.is_empty() || dims.contains(&0) {
            return Err(el.err("system.dimension", sys.dimension.span(), "dimensions must be positive"));
        }
        let d = dims.iter().try_fold(1usize, |acc, &x| acc.checked_mul(x)).filter(|&d| d <= 4096);
        let Some(d) = d else {
            return Err(el.err("system.dimension", sys.dimension.span(), "system dimension exceeds 4096"));
        };
        let hamiltonian = match &sys.hamiltonian {
            Some(h) => el.operator("system.hamiltonian", h, &dims)?,
            None => Operator::zeros(d, d),
        };
        if sys.couplings.is_empty() {
            return Err(el.err("system.couplings", sys.dimension.span(), "at least one coupling is required"));
        }
        let couplings = sys
            .couplings
            .iter()
            .enumerate()
            .map(|(k, l)| el.operator(&format!("system.couplings[{k}]"), l, &dims))
            .collect::<Result<Vec<_>, _>>()?;
        let rho0 = el.operator("system.initial_state", &sys.initial_state, &dims)?;
        let n = couplings.len();
        let scattering = match &sys.scattering {
            Some(s) => Some(el.matrix("system.scattering", s, Some(n), Some(n))?),
            None => None,
        };

        let field = match &document.field {
            None => None,
            Some(f) => {
                if let Some(declared) = &f.n {
                    if *declared.get_ref() != n {
                        return Err(el.err(
                            "field.n",
                            declared.span(),
                            format!("field has {} channels but the system has {n} couplings", declared.get_ref()),
                        ));
                    }
                }
                let read = |path: &str, m: &Option<Spanned<MatrixLiteral>>| match m {
                    Some(m) => el.matrix(path, m, Some(n), Some(n)),
                    None => Ok(CMatrix::zeros(n, n)),
                };
                Some((read("field.N", &f.n_mat)?, read("field.M", &f.m_mat)?))
            }
        };

        let g = el.matrix("measurement.G", &document.measurement.g, None, Some(n))?;

        let observables = document
            .observables
            .iter()
            .map(|(name, src)| Ok((name.clone(), el.operator(&format!("observables.{name}"), src, &dims)?)))
            .collect::<Result<Vec<_>, ModelError>>()?;

        let sim = &document.simulation;
        let scheme = match &sim.scheme {
            Some(s) => s.get_ref().parse().map_err(|e: Error| el.err("simulation.scheme", s.span(), e.to_string()))?,
            None => Scheme::default(),
        };
        let simulation = SimulationSettings {
            tmax: sim.tmax,
            dt: sim.dt.unwrap_or(DEFAULT_DT),
            trajectories: sim.trajectories,
            seed: sim.seed.unwrap_or(DEFAULT_SEED),
            snapshots: sim.snapshots.clone().unwrap_or_default(),
            scheme,
        };

        let system = SystemSpec { hamiltonian, couplings, rho0, scattering, subsystem_dims: dims };
        Ok(ModelInputs { document, system, field, g, observables, simulation })
    }

    /// Validate the field state and assemble the filter.
    pub fn validate(self) -> Result<ModelBundle, ModelError> {
        let field = match &self.field {
            None => FieldMode::ExplicitVacuum,
            Some((n_mat, m_mat)) => FieldMode::Gaussian(validate_gaussian(n_mat, m_mat).map_err(|e| {
                let path = match &e {
                    Error::NotHermitian { .. } => "field.N",
                    Error::NotSymmetric { .. } => "field.M",
                    _ => "field",
                };
                ModelError::Invalid { path: path.into(), source: e }
            })?),
        };
        let model = build_filter_model(&self.system, &field, &self.g)
            .map_err(|e| ModelError::Invalid { path: stage_path(&e).into(), source: e })?;
        Ok(ModelBundle { inputs: self, field, model })
    }
}

/// Document path responsible for a filter-assembly failure.
pub fn stage_path(e: &Error) -> &'static str {
    match e {
        Error::Stage { stage, .. } => match *stage {
            "system" => "system",
            "system.initial_state" => "system.initial_state",
            "system.scattering" => "system.scattering",
            "field" | "factorize" | "lift_coupling" => "field",
            _ => "measurement.G",
        },
        _ => "model",
    }
}

impl ModelDocument {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model documents always serialise")
    }

    /// A document for the given inputs with every operator written out as a
    /// matrix literal.
    pub fn from_matrices(
        system: &SystemSpec,
        field: Option<(&CMatrix, &CMatrix)>,
        g: &CMatrix,
        observables: &[(String, Operator)],
    ) -> Self {
        let op = |m: &Operator| Spanned::new(0..0, OperatorSource::Matrix(literal_from_matrix(m)));
        let lit = |m: &CMatrix| Spanned::new(0..0, literal_from_matrix(m));
        let dims = &system.subsystem_dims;
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            system: SystemBlock {
                dimension: Spanned::new(0..0, if dims.len() == 1 { Dimension::Single(dims[0]) } else { Dimension::Factors(dims.clone()) }),
                hamiltonian: Some(op(&system.hamiltonian)),
                couplings: system.couplings.iter().map(op).collect(),
                initial_state: op(&system.rho0),
                scattering: system.scattering.as_ref().map(lit),
            },
            field: field.map(|(n, m)| FieldBlock { n: None, n_mat: Some(lit(n)), m_mat: Some(lit(m)) }),
            measurement: MeasurementBlock { g: lit(g) },
            observables: observables.iter().map(|(k, v)| (k.clone(), op(v))).collect(),
            simulation: SimulationBlock::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pauli, Pauli};
    use crate::linalg::{c, max_abs_diff};
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
[system]
dimension = 2
couplings = ["sigma_minus"]
initial_state = "sigma_plus*sigma_minus"

[measurement]
G = [[1, 0]]
"#;

    const THERMAL: &str = r#"
schema_version = 1

[system]
dimension = 2
hamiltonian = "0.5*sigma_z"
couplings = ["sigma_minus"]
initial_state = [[1, 0], [0, 0]]

[field]
n = 1
N = [[0.25]]
M = [["0"]]

[measurement]
G = [[[1, 0]]]

[observables]
p_e = "sigma_plus*sigma_minus"
x = "sigma_x"

[simulation]
tmax = 2.5
dt = 1e-3
trajectories = 100
seed = 42
snapshots = [0, 1.25, 2.5]
scheme = "euler"
"#;

    #[test]
    fn minimal_vacuum_document() {
        let b = parse_model(MINIMAL).unwrap();
        assert_eq!(b.inputs.g, CMatrix::from_element(1, 1, c(1.0, 0.0)));
        assert!(matches!(b.field, FieldMode::ExplicitVacuum));
        assert_eq!(b.inputs.simulation.dt, DEFAULT_DT);
        assert_eq!(b.inputs.simulation.seed, 0);
        assert_eq!(b.model.dim(), 2);
    }

    #[test]
    fn thermal_document() {
        let b = parse_model(THERMAL).unwrap();
        assert!(matches!(b.field, FieldMode::Gaussian(_)));
        assert_eq!(b.inputs.observables.len(), 2);
        assert_eq!(b.inputs.observables[0].0, "p_e");
        let s = &b.inputs.simulation;
        assert_eq!((s.tmax, s.trajectories, s.seed, s.scheme), (Some(2.5), Some(100), 42, Scheme::EulerMaruyama));
        assert_eq!(b.inputs.system.hamiltonian, pauli(Pauli::Z) * c(0.5, 0.0));
    }

    #[test]
    fn non_hermitian_n_names_the_field() {
        let doc = THERMAL.replace("N = [[0.25]]", "N = [[[0.25, 0.1]]]");
        let e = parse_model(&doc).unwrap_err();
        assert!(e.is_validation());
        assert_eq!(e.path(), "field.N");
        assert!(e.to_string().contains("Hermitian") && e.to_string().contains("2.000e-1"), "{e}");
    }

    #[test]
    fn f_positivity_is_a_validation_error() {
        let doc = THERMAL.replace(r#"M = [["0"]]"#, "M = [[0.6]]");
        let e = parse_model(&doc).unwrap_err();
        assert!(e.is_validation());
        assert_eq!(e.path(), "field");
    }

    #[test]
    fn syntax_errors_carry_location() {
        let e = parse_model("[system]\ndimension = \n").unwrap_err();
        assert!(matches!(e, ModelError::Parse { line: 2, .. }), "{e}");

        let doc = MINIMAL.replace("couplings", "coupling");
        let e = parse_model(&doc).unwrap_err();
        assert!(!e.is_validation());
        assert!(e.to_string().contains("unknown field"), "{e}");

        let doc = MINIMAL.replace("\"sigma_minus\"", "\"sigma_minus +\"");
        let e = parse_model(&doc).unwrap_err();
        match e {
            ModelError::Parse { path, line, column, .. } => {
                assert_eq!(path, "system.couplings[0]");
                assert_eq!(line, 4);
                assert_eq!(column, 28);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn shape_errors_are_parse_errors() {
        let doc = MINIMAL.replace("G = [[1, 0]]", "G = [[1, 0, 0]]");
        let e = parse_model(&doc).unwrap_err();
        assert_eq!(e.path(), "measurement.G");
        assert!(!e.is_validation());
        let doc = THERMAL.replace("\nn = 1", "\nn = 2");
        assert_eq!(parse_model(&doc).unwrap_err().path(), "field.n");
    }

    #[test]
    fn scattering_must_be_identity() {
        let doc = MINIMAL.replace("initial_state", "scattering = [[[0, 1]]]\ninitial_state");
        let e = parse_model(&doc).unwrap_err();
        assert!(e.is_validation());
        assert_eq!(e.path(), "system.scattering");
        let doc = MINIMAL.replace("initial_state", "scattering = [[1]]\ninitial_state");
        assert!(parse_model(&doc).is_ok());
    }

    #[test]
    fn composite_system() {
        let doc = r#"
[system]
dimension = [3, 2]
hamiltonian = "number[0] + 0.5*sigma_z[1] + 0.1*(creator[0]*sigma_minus[1] + annihilator[0]*sigma_plus[1])"
couplings = ["0.5*annihilator[0]", "sigma_minus[1]"]
initial_state = "outer(0,0)[0]*outer(0,0)[1]"

[measurement]
G = [[1, 0], [0, "i"]]
"#;
        let b = parse_model(doc).unwrap();
        assert_eq!(b.model.dim(), 6);
        assert_eq!(b.model.truncation_probes().len(), 1);
    }

    #[test]
    fn serialisation_is_idempotent() {
        for text in [MINIMAL, THERMAL] {
            let first = parse_model(text).unwrap();
            let written = first.inputs.document.to_toml();
            let second = parse_model(&written).unwrap();
            assert_eq!(second.inputs.document.to_toml(), written);
            assert_eq!(second.inputs.system.hamiltonian, first.inputs.system.hamiltonian);
            assert_eq!(second.inputs.system.couplings, first.inputs.system.couplings);
            assert_eq!(second.inputs.g, first.inputs.g);
            assert_eq!(second.inputs.simulation, first.inputs.simulation);
        }
    }

    #[test]
    fn matrix_documents_round_trip() {
        let b = parse_model(THERMAL).unwrap();
        let (n, m) = b.inputs.field.as_ref().unwrap();
        let doc = ModelDocument::from_matrices(&b.inputs.system, Some((n, m)), &b.inputs.g, &b.inputs.observables);
        let again = parse_model(&doc.to_toml()).unwrap();
        assert!(max_abs_diff(again.model.drift_operator(), b.model.drift_operator()) == 0.0);
        assert_eq!(again.inputs.observables, b.inputs.observables);
    }

    proptest! {
        #[test]
        fn parser_is_total(s in "\\PC{0,200}") {
            let _ = parse_model(&s);
        }

        #[test]
        fn parser_survives_mutations(pos in 0usize..400, junk in "[\\[\\]\"=,.0-9a-z \n]{0,6}") {
            let text = THERMAL;
            let mut at = pos.min(text.len());
            while !text.is_char_boundary(at) {
                at -= 1;
            }
            let mutated = format!("{}{}{}", &text[..at], junk, &text[at..]);
            let _ = parse_model(&mutated);
        }
    }
}
