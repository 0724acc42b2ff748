//! Model files and result serialisation.

pub mod complex;
pub mod expr;
pub mod model;
pub mod records;

pub use expr::{parse_complex, parse_operator_expr, ExprError, OperatorExpr};
pub use model::{parse_document, parse_model, ModelBundle, ModelDocument, ModelError, ModelInputs, SimulationSettings};
pub use records::{records_to_vec, write_records, RecordError, RecordFormat, Records};
