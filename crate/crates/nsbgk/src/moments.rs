//! Velocity moments of the particle density: number density, bulk velocity,
//! temperature, the drag-force density, and the density-temperature
//! inequality margin used as a lower-bound diagnostic.

use crate::error::Result;
use crate::grid::{PhaseGrid, MAX_DIM};
use crate::state::KineticState;
use crate::util::pairwise_sum;

/// Macroscopic fields on the spatial grid. Nodes whose number density falls
/// below the vacuum floor are masked and carry the fallback values
/// (u_f = 0, T_f = t_ref).
#[derive(Debug, Clone)]
pub struct MacroFields {
    pub rho_f: Vec<f64>,
    /// Interleaved components u_f[i * dim + c].
    pub u_f: Vec<f64>,
    pub t_f: Vec<f64>,
    /// Drag-force density F(x) = sum (u - v) f dv (zeros unless a fluid
    /// velocity was supplied).
    pub drag: Vec<f64>,
    /// True where the vacuum fallback applies.
    pub mask: Vec<bool>,
}

impl MacroFields {
    pub fn x_len(&self) -> usize {
        self.rho_f.len()
    }
}

/// Compute (rho_f, u_f, T_f) with the vacuum fallback; when `fluid_u` is
/// given the drag density is filled in the same pass.
pub fn compute_moments(
    f: &KineticState,
    grid: &PhaseGrid,
    t_ref: f64,
    vacuum_floor: f64,
    fluid_u: Option<&[f64]>,
) -> Result<MacroFields> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    if let Some(u) = fluid_u {
        grid.check_xvec_shape(u.len(), "fluid velocity")?;
    }
    let d = grid.dim;
    let xl = grid.x_len();
    let vl = grid.v_len();

    let mut rho_f = vec![0.0; xl];
    let mut u_f = vec![0.0; xl * d];
    let mut t_f = vec![0.0; xl];
    let mut drag = vec![0.0; xl * d];
    let mut mask = vec![false; xl];

    // number density first; the fallback threshold is relative to its peak
    let mut scratch = vec![0.0; vl];
    for ix in 0..xl {
        let base = ix * vl;
        for iv in 0..vl {
            scratch[iv] = f.values[base + iv] * grid.v_weight(iv);
        }
        rho_f[ix] = pairwise_sum(&scratch);
    }
    let peak = rho_f.iter().cloned().fold(0.0, f64::max);
    let floor = vacuum_floor * (peak + 1.0);

    let mut mom = [0.0f64; MAX_DIM];
    for ix in 0..xl {
        let base = ix * vl;
        if rho_f[ix] < floor {
            mask[ix] = true;
            t_f[ix] = t_ref;
            // u_f stays zero; drag reduces to rho_f * u - 0
            if let Some(u) = fluid_u {
                for c in 0..d {
                    drag[ix * d + c] = rho_f[ix] * u[ix * d + c];
                }
            }
            continue;
        }
        for c in 0..d {
            mom[c] = 0.0;
        }
        for iv in 0..vl {
            let w = f.values[base + iv] * grid.v_weight(iv);
            let v = grid.v_node(iv);
            for c in 0..d {
                mom[c] += v[c] * w;
            }
        }
        for c in 0..d {
            u_f[ix * d + c] = mom[c] / rho_f[ix];
        }
        // second pass: central second moment for the temperature
        let mut e = 0.0;
        for iv in 0..vl {
            let w = f.values[base + iv] * grid.v_weight(iv);
            let v = grid.v_node(iv);
            let mut dv2 = 0.0;
            for c in 0..d {
                let dvc = v[c] - u_f[ix * d + c];
                dv2 += dvc * dvc;
            }
            e += dv2 * w;
        }
        t_f[ix] = e / (d as f64 * rho_f[ix]);
        if let Some(u) = fluid_u {
            for c in 0..d {
                drag[ix * d + c] = rho_f[ix] * (u[ix * d + c] - u_f[ix * d + c]);
            }
        }
    }

    Ok(MacroFields {
        rho_f,
        u_f,
        t_f,
        drag,
        mask,
    })
}

/// Drag-force density F(x) = sum (u(x) - v) f(x, v) dv computed by direct
/// quadrature. Agrees with rho_f (u - u_f) to round-off.
pub fn coupling_force_density(f: &KineticState, u: &[f64], grid: &PhaseGrid) -> Result<Vec<f64>> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    grid.check_xvec_shape(u.len(), "fluid velocity")?;
    let d = grid.dim;
    let xl = grid.x_len();
    let vl = grid.v_len();
    let mut out = vec![0.0; xl * d];
    for ix in 0..xl {
        let base = ix * vl;
        let mut acc = [0.0f64; MAX_DIM];
        for iv in 0..vl {
            let w = f.values[base + iv] * grid.v_weight(iv);
            let v = grid.v_node(iv);
            for c in 0..d {
                acc[c] += (u[ix * d + c] - v[c]) * w;
            }
        }
        for c in 0..d {
            out[ix * d + c] = acc[c];
        }
    }
    Ok(out)
}

/// Margin report for the density-temperature inequality
/// rho_f <= C_d (int f^2 dv)^(1/2) T_f^(d/4): values above 1 (plus a small
/// quadrature slack) indicate a violation. Nodes with T_f = 0 but rho_f > 0
/// are listed separately.
#[derive(Debug, Clone)]
pub struct RhoTReport {
    pub margins: Vec<f64>,
    pub max_margin: f64,
    pub argmax: usize,
    /// Spatial nodes where the bound degenerates (zero temperature with mass).
    pub violations: Vec<usize>,
    pub constant: f64,
}

/// Sharp constant of the inequality per dimension, from optimizing the
/// split rho_f <= R^{-2} * d rho_f T_f + |B_R|^{1/2} (int f^2)^{1/2} over R:
/// C_d = 2^((4+d)/4) * omega_d^(1/2) * d^(d/4) with omega the unit-ball volume.
pub fn rho_t_constant(d: usize) -> f64 {
    let omega = match d {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI / 3.0,
    };
    2.0f64.powf((4.0 + d as f64) / 4.0) * omega.sqrt() * (d as f64).powf(d as f64 / 4.0)
}

pub fn check_rho_t_relation(f: &KineticState, grid: &PhaseGrid) -> Result<RhoTReport> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    let d = grid.dim;
    let xl = grid.x_len();
    let vl = grid.v_len();
    let c_d = rho_t_constant(d);

    let mut margins = vec![0.0; xl];
    let mut violations = Vec::new();
    let mut max_margin = 0.0;
    let mut argmax = 0;

    let mut scratch = vec![0.0; vl];
    let mut scratch_sq = vec![0.0; vl];
    for ix in 0..xl {
        let base = ix * vl;
        for iv in 0..vl {
            let w = grid.v_weight(iv);
            scratch[iv] = f.values[base + iv] * w;
            scratch_sq[iv] = f.values[base + iv] * f.values[base + iv] * w;
        }
        let rho = pairwise_sum(&scratch);
        if rho <= 0.0 {
            margins[ix] = 0.0; // vacuous
            continue;
        }
        let g = pairwise_sum(&scratch_sq).sqrt();
        // central second moment about the bulk velocity
        let mut mom = [0.0f64; MAX_DIM];
        for iv in 0..vl {
            let v = grid.v_node(iv);
            for c in 0..d {
                mom[c] += v[c] * scratch[iv];
            }
        }
        let mut e = 0.0;
        for iv in 0..vl {
            let v = grid.v_node(iv);
            let mut dv2 = 0.0;
            for c in 0..d {
                let dvc = v[c] - mom[c] / rho;
                dv2 += dvc * dvc;
            }
            e += dv2 * scratch[iv];
        }
        let t = e / (d as f64 * rho);
        if t <= 0.0 {
            violations.push(ix);
            margins[ix] = f64::INFINITY;
            continue;
        }
        let margin = rho / (c_d * g * t.powf(d as f64 / 4.0));
        margins[ix] = margin;
        if margin > max_margin {
            max_margin = margin;
            argmax = ix;
        }
    }

    Ok(RhoTReport {
        margins,
        max_margin,
        argmax,
        violations,
        constant: c_d,
    })
}
