//! Simulation configuration and its validation rules.

use crate::error::{Result, SolverError};

/// All scalar knobs of the solver. Constructed through `SimConfig::default()`
/// plus field edits, or by `io::parse_config`; `validate` enforces every
/// range constraint with a precise message.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Adiabatic exponent of the pressure law p = rho^gamma; must exceed 1.
    pub gamma: f64,
    /// Viscosity coefficient; must be positive.
    pub mu: f64,
    /// Collision-frequency exponent: nu = rho_f^alpha, alpha in [0, 1].
    pub alpha: f64,
    /// Velocity weight exponent, open interval (1, 2).
    pub k: f64,
    /// Weight reduction used by the iteration-distance norm, 0 < eps < k.
    pub eps: f64,
    /// Density floor: inf rho^((gamma-1)/2) must stay above delta at t = 0.
    pub delta: f64,
    /// Time step.
    pub dt: f64,
    /// Simulation horizon.
    pub t_final: f64,
    /// CFL safety factor in (0, 1].
    pub cfl: f64,
    /// Fallback temperature assigned at vacuum nodes.
    pub t_ref: f64,
    /// Relative vacuum threshold for the moment fallback.
    pub vacuum_floor: f64,
    /// Allowed relative negativity in kinetic values before the monitor trips.
    pub positivity_tol: f64,
    /// Maximum number of fixed-point iterations.
    pub picard_max_iters: usize,
    /// Fixed-point stopping tolerance on the iteration distance functional.
    pub picard_tol: f64,
    /// Constant c in the dissipation functional (c * mu / 2) |grad du|_{H1}^2.
    pub cauchy_c: f64,
    /// Conjugate-gradient relative residual for the implicit viscous solve.
    pub cg_tol: f64,
    /// Conjugate-gradient iteration cap.
    pub cg_max_iters: usize,
    /// Treat the viscous term implicitly (true) or explicitly under the
    /// diffusive CFL (false).
    pub viscous_implicit: bool,
    /// Snapshot cadence in steps (0 disables periodic snapshots).
    pub snapshot_every: usize,
    /// Seed for the built-in randomized check suites.
    pub seed: u64,
    /// Memory cap (MiB) above which iteration-trajectory storage warns.
    pub mem_cap_mib: usize,
    /// Optional initial lower-bound check f0 >= eps1 * exp(-(1+a)<v>^k).
    pub lower_eps1: Option<f64>,
    pub lower_a: Option<f64>,
    /// Optional runtime floors for the kinetic moment monitors.
    pub rho_f_floor: Option<f64>,
    pub t_f_floor: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gamma: 1.4,
            mu: 0.1,
            alpha: 1.0,
            k: 1.5,
            eps: 0.5,
            delta: 0.1,
            dt: 1e-3,
            t_final: 1.0,
            cfl: 0.9,
            t_ref: 1.0,
            vacuum_floor: 1e-12,
            positivity_tol: 1e-14,
            picard_max_iters: 12,
            picard_tol: 1e-10,
            cauchy_c: 1.0,
            cg_tol: 1e-10,
            cg_max_iters: 4000,
            viscous_implicit: true,
            snapshot_every: 0,
            seed: 1,
            mem_cap_mib: 512,
            lower_eps1: None,
            lower_a: None,
            rho_f_floor: None,
            t_f_floor: None,
        }
    }
}

impl SimConfig {
    /// Enforce every invariant; messages name the offending key and range.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.gamma > 1.0) {
            return bad(format!("gamma must be greater than 1 (got {})", self.gamma));
        }
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive (got {})", self.mu));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1] (got {})", self.alpha));
        }
        if !(self.k > 1.0 && self.k < 2.0) {
            return bad(format!(
                "k must lie in the open interval (1,2) (got {})",
                self.k
            ));
        }
        if !(self.eps > 0.0 && self.eps < self.k) {
            return bad(format!(
                "eps must satisfy 0 < eps < k (got eps = {}, k = {})",
                self.eps, self.k
            ));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive (got {})", self.delta));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive (got {})", self.dt));
        }
        if self.t_final < 0.0 {
            return bad(format!(
                "t_final must be nonnegative (got {})",
                self.t_final
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1] (got {})", self.cfl));
        }
        if !(self.t_ref > 0.0) {
            return bad(format!("t_ref must be positive (got {})", self.t_ref));
        }
        if !(self.vacuum_floor > 0.0) {
            return bad(format!(
                "vacuum_floor must be positive (got {})",
                self.vacuum_floor
            ));
        }
        if self.picard_max_iters == 0 {
            return bad("picard_max_iters must be at least 1".into());
        }
        if !(self.picard_tol > 0.0) {
            return bad(format!(
                "picard_tol must be positive (got {})",
                self.picard_tol
            ));
        }
        if !(self.cg_tol > 0.0) {
            return bad(format!("cg_tol must be positive (got {})", self.cg_tol));
        }
        if let Some(e1) = self.lower_eps1 {
            if !(e1 > 0.0) {
                return bad(format!("lower_eps1 must be positive (got {e1})"));
            }
            if self.lower_a.is_none() {
                return bad("lower_eps1 requires lower_a".into());
            }
        }
        if let Some(a) = self.lower_a {
            if !(a > 0.0) {
                return bad(format!("lower_a must be positive (got {a})"));
            }
        }
        Ok(())
    }
}
