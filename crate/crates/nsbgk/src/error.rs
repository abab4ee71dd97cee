//! Error type shared by every module of the solver.

use std::fmt;

/// Everything that can go wrong while building grids, stepping the system,
/// or reading and writing artifacts.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    /// Configuration value out of range, unknown key, malformed file.
    InvalidConfig(String),
    /// Grid construction rejected the requested layout.
    InvalidGrid(String),
    /// Array shapes do not match the grid they are used with.
    ShapeMismatch {
        expected: usize,
        got: usize,
        what: String,
    },
    /// Conservative Maxwellian projection failed at a spatial node.
    Projection { node: usize, reason: String },
    /// Nonpositive temperature at an active node.
    NonpositiveTemperature { node: usize, value: f64 },
    /// Time step violates a stability restriction.
    CflViolation { dt: f64, limit: f64, what: String },
    /// A positivity floor was crossed.
    Positivity {
        what: String,
        node: usize,
        value: f64,
    },
    /// A characteristic or field value left the trusted range.
    Blowup { what: String, value: f64 },
    /// NaN or infinity produced where a finite value is required.
    NonFinite { what: String, node: usize },
    /// Conjugate-gradient solve did not reach the requested residual.
    CgNoConvergence { iterations: usize, residual: f64 },
    /// Runtime monitor tripped; the simulation aborted.
    MonitorViolation(String),
    /// Filesystem or formatting problem while reading/writing artifacts.
    Io(String),
    /// Stored checksum does not match file contents.
    ChecksumMismatch { file: String },
    /// Snapshot written by a newer schema than this binary understands.
    UnsupportedVersion { found: u32, supported: u32 },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            SolverError::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            SolverError::ShapeMismatch {
                expected,
                got,
                what,
            } => {
                write!(
                    f,
                    "shape mismatch for {what}: expected {expected} values, got {got}"
                )
            }
            SolverError::Projection { node, reason } => {
                write!(
                    f,
                    "conservative projection failed at spatial node {node}: {reason}"
                )
            }
            SolverError::NonpositiveTemperature { node, value } => {
                write!(
                    f,
                    "nonpositive temperature {value} at active spatial node {node}"
                )
            }
            SolverError::CflViolation { dt, limit, what } => {
                write!(f, "time step {dt} exceeds {what} limit {limit}")
            }
            SolverError::Positivity { what, node, value } => {
                write!(f, "positivity failure: {what} = {value} at node {node}")
            }
            SolverError::Blowup { what, value } => write!(f, "blow-up detected: {what} = {value}"),
            SolverError::NonFinite { what, node } => {
                write!(f, "non-finite value in {what} at node {node}")
            }
            SolverError::CgNoConvergence {
                iterations,
                residual,
            } => {
                write!(f, "conjugate gradient stalled after {iterations} iterations (residual {residual:e})")
            }
            SolverError::MonitorViolation(msg) => write!(f, "runtime monitor violation: {msg}"),
            SolverError::Io(msg) => write!(f, "i/o error: {msg}"),
            SolverError::ChecksumMismatch { file } => {
                write!(f, "checksum mismatch in file {file}")
            }
            SolverError::UnsupportedVersion { found, supported } => {
                write!(
                    f,
                    "snapshot schema version {found} is newer than supported version {supported}"
                )
            }
        }
    }
}

impl std::error::Error for SolverError {}

impl From<std::io::Error> for SolverError {
    fn from(e: std::io::Error) -> Self {
        SolverError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
