//! Single-photon scattering off quantum emitters coupled to a one-dimensional
//! waveguide.
//!
//! The excited states are eliminated through the inverse of a non-Hermitian
//! Hamiltonian, which yields transmission and reflection amplitudes for
//! arbitrary arrangements of multi-level emitters. A second part treats a
//! Λ emitter under a weak coherent pulse: Raman flip rates, detector click
//! statistics and heralded ground-state superpositions.

pub mod closed_form;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod protocols;
pub mod run;
pub mod scenario;

pub use error::NumericError;
pub use hamiltonian::{assemble_nh, invert_nh, Drive};
pub use kernel::{output_amplitudes, scattering_kernel, sweep_spectrum, AmplitudePair, Direction};
pub use model::{build_single_excitation_basis, validate_system, SystemSpec};
pub use run::{emit_table, format_number, run_scenario, ResultTable, RunError};
pub use scenario::{parse_scenario, serialize_scenario, Scenario};
