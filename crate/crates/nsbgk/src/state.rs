//! Kinetic and fluid state containers plus the structural validation report.

use crate::config::SimConfig;
use crate::error::Result;
use crate::grid::{v_bracket, PhaseGrid};
use crate::util::pairwise_sum;

/// Particle density sampled at phase-space nodes (collocation values).
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    /// Row-major over (spatial node, velocity node).
    pub values: Vec<f64>,
    pub time: f64,
}

impl KineticState {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        KineticState { values, time }
    }

    pub fn zeros(grid: &PhaseGrid, time: f64) -> Self {
        KineticState {
            values: vec![0.0; grid.phase_len()],
            time,
        }
    }

    /// Total particle mass.
    pub fn mass(&self, grid: &PhaseGrid) -> f64 {
        let wx = grid.x_weight();
        let vl = grid.v_len();
        let contrib: Vec<f64> = (0..grid.x_len())
            .map(|ix| {
                let base = ix * vl;
                let row: Vec<f64> = (0..vl)
                    .map(|iv| self.values[base + iv] * grid.v_weight(iv))
                    .collect();
                pairwise_sum(&row)
            })
            .collect();
        pairwise_sum(&contrib) * wx
    }
}

/// Fluid density (kept jointly as rho and as the symmetrized variable h with
/// 1 + h = rho^((gamma-1)/2)) and velocity on the spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub rho: Vec<f64>,
    pub h: Vec<f64>,
    /// Interleaved components: u[i * dim + c].
    pub u: Vec<f64>,
    pub time: f64,
}

impl FluidState {
    /// Build from a density field; h is derived.
    pub fn from_density(rho: Vec<f64>, u: Vec<f64>, gamma: f64, time: f64) -> Result<Self> {
        let h = crate::fluid::to_symmetrized(&rho, gamma)?;
        Ok(FluidState { rho, h, u, time })
    }

    /// Build from the symmetrized variable; rho is derived.
    pub fn from_symmetrized_field(h: Vec<f64>, u: Vec<f64>, gamma: f64, time: f64) -> Result<Self> {
        let rho = crate::fluid::from_symmetrized(&h, gamma)?;
        Ok(FluidState { rho, h, u, time })
    }

    /// Total fluid mass.
    pub fn mass(&self, grid: &PhaseGrid) -> f64 {
        pairwise_sum(&self.rho) * grid.x_weight()
    }
}

/// Optional pointwise lower-bound hypothesis f >= eps1 exp(-(1+a)<v>^k).
#[derive(Debug, Clone, Copy)]
pub struct LowerBoundCheck {
    pub eps1: f64,
    pub a: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationEntry {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of `validate_state`: one entry per structural invariant, each
/// carrying the offending extremum when it fails.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn entry(&self, name: &str) -> Option<&ValidationEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.entries.push(ValidationEntry {
            name: name.into(),
            passed,
            detail,
        });
    }
}

/// Pure structural check of a kinetic/fluid state pair. Shape mismatches are
/// hard errors; invariant failures become report entries.
pub fn validate_state(
    f: &KineticState,
    fl: &FluidState,
    grid: &PhaseGrid,
    cfg: &SimConfig,
    lower: Option<LowerBoundCheck>,
) -> Result<ValidationReport> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    grid.check_x_shape(fl.rho.len(), "fluid density")?;
    grid.check_x_shape(fl.h.len(), "symmetrized density")?;
    grid.check_xvec_shape(fl.u.len(), "fluid velocity")?;

    let mut report = ValidationReport {
        entries: Vec::new(),
    };

    // kinetic nonnegativity
    let mut min_val = f64::INFINITY;
    let mut min_idx = 0usize;
    let mut finite = true;
    let mut bad_idx = 0usize;
    for (i, &v) in f.values.iter().enumerate() {
        if !v.is_finite() {
            finite = false;
            bad_idx = i;
            break;
        }
        if v < min_val {
            min_val = v;
            min_idx = i;
        }
    }
    report.push(
        "kinetic_finite",
        finite,
        if finite {
            "all values finite".into()
        } else {
            format!("non-finite value at phase node {bad_idx}")
        },
    );
    if finite {
        let scale = f.values.iter().cloned().fold(0.0, f64::max).max(1.0);
        let ok = min_val >= -cfg.positivity_tol * scale;
        report.push(
            "kinetic_nonnegative",
            ok,
            format!("minimum value {min_val:e} at phase node {min_idx}"),
        );
    }

    // fluid density positivity
    let mut rho_min = f64::INFINITY;
    let mut rho_idx = 0usize;
    for (i, &r) in fl.rho.iter().enumerate() {
        if r < rho_min {
            rho_min = r;
            rho_idx = i;
        }
    }
    report.push(
        "fluid_density_positive",
        rho_min > 0.0,
        format!("minimum rho {rho_min:e} at spatial node {rho_idx}"),
    );

    // consistency of h with rho
    let half = 0.5 * (cfg.gamma - 1.0);
    let mut max_rel = 0.0f64;
    let mut rel_idx = 0usize;
    for i in 0..fl.rho.len() {
        if fl.rho[i] <= 0.0 {
            continue;
        }
        let expect = fl.rho[i].powf(half);
        let rel = ((1.0 + fl.h[i]) - expect).abs() / (1.0 + fl.h[i]).abs().max(1e-300);
        if rel > max_rel {
            max_rel = rel;
            rel_idx = i;
        }
    }
    report.push(
        "symmetrized_consistent",
        max_rel <= 1e-12,
        format!("max relative gap {max_rel:e} at spatial node {rel_idx}"),
    );

    // density floor: inf rho^((gamma-1)/2) > delta
    let mut sym_min = f64::INFINITY;
    let mut sym_idx = 0usize;
    for (i, &h) in fl.h.iter().enumerate() {
        let v = 1.0 + h;
        if v < sym_min {
            sym_min = v;
            sym_idx = i;
        }
    }
    report.push(
        "density_floor",
        sym_min > cfg.delta,
        format!(
            "inf (1+h) = {sym_min:e} at spatial node {sym_idx} (floor {})",
            cfg.delta
        ),
    );

    // velocity-truncation tail: mass in the outermost two velocity layers
    // must be negligible relative to total, otherwise the cutoff is too tight.
    if finite {
        let vl = grid.v_len();
        let mut tail = Vec::new();
        let mut tot = Vec::new();
        for ix in 0..grid.x_len() {
            for iv in 0..vl {
                let m = f.values[grid.phase_index(ix, iv)] * grid.v_weight(iv);
                tot.push(m);
                let v = grid.v_node(iv);
                let mut near_edge = false;
                for ax in 0..grid.dim {
                    if v[ax].abs() >= grid.v_max[ax] - 2.0 * grid.dv[ax] {
                        near_edge = true;
                    }
                }
                if near_edge {
                    tail.push(m);
                }
            }
        }
        let total = pairwise_sum(&tot);
        let tail_mass = pairwise_sum(&tail);
        let ok = total <= 0.0 || tail_mass <= 1e-10 * total;
        report.push(
            "velocity_truncation_tail",
            ok,
            format!(
                "tail mass fraction {:e}",
                if total > 0.0 { tail_mass / total } else { 0.0 }
            ),
        );
    }

    // optional Maxwellian-type lower bound on f
    if let Some(lb) = lower {
        let mut worst = f64::INFINITY;
        let mut worst_idx = 0usize;
        let vl = grid.v_len();
        for ix in 0..grid.x_len() {
            for iv in 0..vl {
                let v = grid.v_node(iv);
                let bound = lb.eps1 * (-(1.0 + lb.a) * v_bracket(&v[..grid.dim]).powf(cfg.k)).exp();
                let gap = f.values[grid.phase_index(ix, iv)] - bound;
                if gap < worst {
                    worst = gap;
                    worst_idx = grid.phase_index(ix, iv);
                }
            }
        }
        report.push(
            "kinetic_lower_bound",
            worst >= -1e-14,
            format!("worst margin {worst:e} at phase node {worst_idx}"),
        );
    }

    Ok(report)
}
