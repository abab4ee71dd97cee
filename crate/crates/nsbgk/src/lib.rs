//! Deterministic solver and verification harness for a coupled compressible
//! Navier-Stokes / BGK system with fluid-density-dependent drag.
//!
//! The particle phase is advanced by an exponential semi-Lagrangian step
//! along the drag characteristics with a conservatively projected local
//! Maxwellian as the relaxation target; the fluid phase is advanced in the
//! symmetrized density variable with implicit viscosity. Weighted velocity
//! norms, a modulated-energy decay probe, a global-in-time fixed-point
//! iteration with its distance functional, and conservation/positivity
//! monitors round out the verification surface.

pub mod checks;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod grid;
pub mod io;
pub mod maxwellian;
pub mod moments;
pub mod state;
pub mod stepper;
pub mod transport;
pub mod util;

pub use config::SimConfig;
pub use error::{Result, SolverError};
pub use grid::{build_phase_grid, weight_value, GridSpec, PhaseGrid, QuadratureRule};
pub use state::{validate_state, FluidState, KineticState, LowerBoundCheck, ValidationReport};
