//! Quantum filtering for Markovian open quantum systems coupled to several
//! boson fields in an arbitrary zero-mean jointly Gaussian state.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`]: dense operator and superoperator algebra on a truncated
//!   system space (Lindbladian, Liouvillian, steady states).
//! * [`gaussian`]: validation of the field correlations `(N, M)`, the
//!   Araki-Woods factorisation `(C1, C2, C3)`, the Itō table, and lifting of
//!   couplings and measurements to the doubled vacuum representation.
//! * [`measurement`]: admissibility of a linear quadrature measurement `G`,
//!   completion to an invertible `W`, and the conditioning gain `K`.
//! * [`filter`]: filter assembly, stochastic/unnormalised/deterministic
//!   master-equation integration, trajectories and ensembles.
//! * [`io`]: model files, the operator-expression language and result
//!   serialisation.

pub mod error;
pub mod filter;
pub mod gaussian;
pub mod hilbert;
pub mod io;
pub mod linalg;
pub mod measurement;
#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
pub use filter::{
    build_filter_model, ensemble_average, master_solve, master_step, sme_increment, sme_step,
    simulate_trajectory, zakai_step, EnsembleResult, FieldMode, FilterModel, Scheme, SimOptions,
    SystemSpec, TrajectoryRecord,
};
pub use gaussian::{
    factorize, ito_table, lift_coupling, lift_measurement, validate_gaussian,
    ArakiWoodsCoefficients, GaussianFieldSpec, ItoTable,
};
pub use hilbert::{
    annihilation_op, lindblad_heisenberg, liouvillian_apply, liouvillian_matrix, pauli,
    steady_state, Operator, Pauli,
};
pub use measurement::{
    complete_measurement, conditioning_gain, to_quadrature, validate_measurement,
    CompletedMeasurement, MeasurementSpec,
};

pub use num_complex::Complex64;

/// Dense complex matrix used for every operator and coefficient matrix.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense real matrix (quadratures, gains, covariances).
pub type RMatrix = nalgebra::DMatrix<f64>;
