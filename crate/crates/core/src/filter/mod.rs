//! Filter assembly and integration.

pub mod ensemble;
pub mod master;
pub mod model;
pub mod reference;
pub mod sme;
pub mod trajectory;
pub mod zakai;

pub use ensemble::{ensemble_average, ensemble_average_with, EnsembleResult, InnovationStats, ObservableStats};
pub use master::{grid_steps, master_record, master_solve, master_step, MasterRecord};
pub use model::{build_filter_model, build_filter_model_with_order, FieldMode, FilterModel, SystemSpec};
pub use reference::SingleFieldReference;
pub use sme::{sme_increment, sme_step, sme_step_with, Scheme, StepReport};
pub use trajectory::{
    simulate_trajectory, simulate_trajectory_with, ObservableSeries, SimOptions, TrajectoryDiagnostics, TrajectoryRecord,
};
pub use zakai::zakai_step;
