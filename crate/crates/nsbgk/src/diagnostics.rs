//! Weighted velocity norms, discrete Sobolev norms, the modulated energy and
//! its decay fit, conservation drifts, and the positivity monitors.

use crate::config::SimConfig;
use crate::error::{Result, SolverError};
use crate::grid::{v_bracket, PhaseGrid, MAX_DIM};
use crate::state::{FluidState, KineticState};
use crate::util::pairwise_sum;

// ---------------------------------------------------------------------------
// derivative stencils (4th order)

/// Fourth-order first derivative of a phase array along one axis.
/// `axis < dim` selects a (periodic) spatial axis; `axis >= dim` selects the
/// velocity axis `axis - dim`, differentiated with one-sided stencils at the
/// grid edges.
fn phase_derivative(values: &[f64], grid: &PhaseGrid, axis: usize) -> Vec<f64> {
    let d = grid.dim;
    let xl = grid.x_len();
    let vl = grid.v_len();
    let mut out = vec![0.0; values.len()];
    if axis < d {
        let n = grid.nx[axis];
        let h = grid.dx[axis];
        for ix in 0..xl {
            let idx = grid.x_decompose(ix);
            let at = |shift: isize| -> usize {
                let mut id = idx;
                id[axis] = (id[axis] as isize + shift).rem_euclid(n as isize) as usize;
                grid.x_compose(&id)
            };
            let (im2, im1, ip1, ip2) = (at(-2), at(-1), at(1), at(2));
            for iv in 0..vl {
                out[ix * vl + iv] = (values[im2 * vl + iv] - 8.0 * values[im1 * vl + iv]
                    + 8.0 * values[ip1 * vl + iv]
                    - values[ip2 * vl + iv])
                    / (12.0 * h);
            }
        }
    } else {
        let vax = axis - d;
        let n = grid.nv[vax];
        let h = grid.dv[vax];
        for ix in 0..xl {
            for iv in 0..vl {
                let vidx = grid.v_decompose(iv);
                let j = vidx[vax];
                let at = |jj: usize| -> f64 {
                    let mut id = vidx;
                    id[vax] = jj;
                    let mut flat = 0usize;
                    for ax in 0..d {
                        flat = flat * grid.nv[ax] + id[ax];
                    }
                    values[ix * vl + flat]
                };
                let val = if j >= 2 && j + 2 < n {
                    (at(j - 2) - 8.0 * at(j - 1) + 8.0 * at(j + 1) - at(j + 2)) / (12.0 * h)
                } else if j == 0 {
                    (-25.0 * at(0) + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4))
                        / (12.0 * h)
                } else if j == 1 {
                    (-3.0 * at(0) - 10.0 * at(1) + 18.0 * at(2) - 6.0 * at(3) + at(4)) / (12.0 * h)
                } else if j + 2 == n {
                    -(-3.0 * at(n - 1) - 10.0 * at(n - 2) + 18.0 * at(n - 3) - 6.0 * at(n - 4)
                        + at(n - 5))
                        / (12.0 * h)
                } else {
                    -(-25.0 * at(n - 1) + 48.0 * at(n - 2) - 36.0 * at(n - 3) + 16.0 * at(n - 4)
                        - 3.0 * at(n - 5))
                        / (12.0 * h)
                };
                out[ix * vl + iv] = val;
            }
        }
    }
    out
}

/// Fourth-order periodic first derivative of a spatial scalar field.
fn spatial_derivative(field: &[f64], grid: &PhaseGrid, axis: usize) -> Vec<f64> {
    let xl = grid.x_len();
    let n = grid.nx[axis];
    let h = grid.dx[axis];
    let mut out = vec![0.0; xl];
    for ix in 0..xl {
        let idx = grid.x_decompose(ix);
        let at = |shift: isize| -> f64 {
            let mut id = idx;
            id[axis] = (id[axis] as isize + shift).rem_euclid(n as isize) as usize;
            field[grid.x_compose(&id)]
        };
        out[ix] = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
    }
    out
}

// ---------------------------------------------------------------------------
// weighted norms

fn weighted_l2_sq(values: &[f64], grid: &PhaseGrid, k: f64) -> f64 {
    let d = grid.dim;
    let vl = grid.v_len();
    let wx = grid.x_weight();
    let mut wv = vec![0.0; vl];
    for iv in 0..vl {
        let v = grid.v_node(iv);
        wv[iv] = (2.0 * v_bracket(&v[..d]).powf(k)).exp() * grid.v_weight(iv);
    }
    let per_x: Vec<f64> = (0..grid.x_len())
        .map(|ix| {
            let base = ix * vl;
            let row: Vec<f64> = (0..vl)
                .map(|iv| values[base + iv] * values[base + iv] * wv[iv])
                .collect();
            pairwise_sum(&row)
        })
        .collect();
    pairwise_sum(&per_x) * wx
}

/// Weighted Lebesgue norm with p in {1, 2}.
pub fn weighted_lp_norm(f: &KineticState, grid: &PhaseGrid, p: u32, k: f64) -> Result<f64> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    match p {
        2 => Ok(weighted_l2_sq(&f.values, grid, k).sqrt()),
        1 => {
            let d = grid.dim;
            let vl = grid.v_len();
            let wx = grid.x_weight();
            let per_x: Vec<f64> = (0..grid.x_len())
                .map(|ix| {
                    let base = ix * vl;
                    let row: Vec<f64> = (0..vl)
                        .map(|iv| {
                            let v = grid.v_node(iv);
                            v_bracket(&v[..d]).powf(k).exp()
                                * f.values[base + iv].abs()
                                * grid.v_weight(iv)
                        })
                        .collect();
                    pairwise_sum(&row)
                })
                .collect();
            Ok(pairwise_sum(&per_x) * wx)
        }
        _ => Err(SolverError::InvalidConfig(format!(
            "weighted norm supports p in {{1,2}}, got {p}"
        ))),
    }
}

/// Weighted sup norm: max over nodes of e^{<v>^k} |f|.
pub fn weighted_sup_norm(f: &KineticState, grid: &PhaseGrid, k: f64) -> Result<f64> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    let d = grid.dim;
    let vl = grid.v_len();
    let mut wv = vec![0.0; vl];
    for iv in 0..vl {
        let v = grid.v_node(iv);
        wv[iv] = v_bracket(&v[..d]).powf(k).exp();
    }
    let mut best = 0.0f64;
    for ix in 0..grid.x_len() {
        let base = ix * vl;
        for iv in 0..vl {
            best = best.max(wv[iv] * f.values[base + iv].abs());
        }
    }
    Ok(best)
}

/// Weighted Sobolev norm of order s in {0, 1, 2}: the squared sum over all
/// mixed space/velocity derivatives up to order s of the weighted L2 norms.
pub fn weighted_sobolev_norm(f: &KineticState, grid: &PhaseGrid, s: usize, k: f64) -> Result<f64> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    if s > 2 {
        return Err(SolverError::InvalidConfig(format!(
            "weighted Sobolev norm supports s in {{0,1,2}}, got {s}"
        )));
    }
    let naxes = 2 * grid.dim;
    let mut total = weighted_l2_sq(&f.values, grid, k);
    if s >= 1 {
        let mut firsts = Vec::with_capacity(naxes);
        for ax in 0..naxes {
            let df = phase_derivative(&f.values, grid, ax);
            total += weighted_l2_sq(&df, grid, k);
            firsts.push(df);
        }
        if s == 2 {
            for ax in 0..naxes {
                for bx in ax..naxes {
                    let dd = phase_derivative(&firsts[ax], grid, bx);
                    total += weighted_l2_sq(&dd, grid, k);
                }
            }
        }
    }
    Ok(total.sqrt())
}

/// Weighted W^{1,infinity} norm: max over f and its first derivatives of the
/// weighted sup norm.
pub fn weighted_w1inf_norm(f: &KineticState, grid: &PhaseGrid, k: f64) -> Result<f64> {
    let mut best = weighted_sup_norm(f, grid, k)?;
    for ax in 0..2 * grid.dim {
        let df = phase_derivative(&f.values, grid, ax);
        best = best.max(weighted_sup_norm(&KineticState::new(df, f.time), grid, k)?);
    }
    Ok(best)
}

/// Unweighted spatial Sobolev norm of order s <= 3 (4th-order periodic
/// differences), for fluid fields.
pub fn spatial_sobolev_norm(field: &[f64], grid: &PhaseGrid, s: usize) -> Result<f64> {
    grid.check_x_shape(field.len(), "spatial field")?;
    if s > 3 {
        return Err(SolverError::InvalidConfig(format!(
            "spatial Sobolev norm supports s <= 3, got {s}"
        )));
    }
    let wx = grid.x_weight();
    let l2sq =
        |g: &[f64]| -> f64 { pairwise_sum(&g.iter().map(|v| v * v).collect::<Vec<_>>()) * wx };
    // recursive multiset enumeration of derivative axes
    fn acc(
        g: &[f64],
        grid: &PhaseGrid,
        depth: usize,
        min_axis: usize,
        total: &mut f64,
        l2sq: &dyn Fn(&[f64]) -> f64,
    ) {
        *total += l2sq(g);
        if depth == 0 {
            return;
        }
        for ax in min_axis..grid.dim {
            let dg = spatial_derivative(g, grid, ax);
            acc(&dg, grid, depth - 1, ax, total, l2sq);
        }
    }
    let mut total = 0.0;
    acc(field, grid, s, 0, &mut total, &l2sq);
    Ok(total.sqrt())
}

/// H1-type seminorm pieces for the iteration-distance functional: returns
/// (|g|_{L2}^2, |grad g|_{L2}^2, |grad^2 g|_{L2}^2) of a spatial field.
pub fn spatial_gradient_sq(field: &[f64], grid: &PhaseGrid) -> (f64, f64, f64) {
    let wx = grid.x_weight();
    let l2sq =
        |g: &[f64]| -> f64 { pairwise_sum(&g.iter().map(|v| v * v).collect::<Vec<_>>()) * wx };
    let base = l2sq(field);
    let mut grad = 0.0;
    let mut grad2 = 0.0;
    for ax in 0..grid.dim {
        let d1 = spatial_derivative(field, grid, ax);
        grad += l2sq(&d1);
        for bx in 0..grid.dim {
            let d2 = spatial_derivative(&d1, grid, bx);
            grad2 += l2sq(&d2);
        }
    }
    (base, grad, grad2)
}

// ---------------------------------------------------------------------------
// modulated energy

/// The modulated energy and its components: the particle variance about the
/// particle mean velocity, the fluid kinetic energy about the fluid mean
/// momentum velocity, the density fluctuation, and the cross mean-velocity
/// gap. The reference density is the torus mean, so uniform states score zero.
#[derive(Debug, Clone)]
pub struct ModulatedEnergy {
    pub total: f64,
    pub particle_term: f64,
    pub fluid_kinetic_term: f64,
    pub density_term: f64,
    pub cross_term: f64,
    pub v_c: [f64; MAX_DIM],
    pub m_c: [f64; MAX_DIM],
    pub rho_c: f64,
    /// True when the particle mass vanished and v_c fell back to m_c.
    pub v_c_fallback: bool,
}

pub fn modulated_energy(
    f: &KineticState,
    fluid: &FluidState,
    grid: &PhaseGrid,
) -> Result<ModulatedEnergy> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    grid.check_x_shape(fluid.rho.len(), "fluid density")?;
    grid.check_xvec_shape(fluid.u.len(), "fluid velocity")?;
    let d = grid.dim;
    let xl = grid.x_len();
    let vl = grid.v_len();
    let wx = grid.x_weight();
    let volume: f64 = grid.period[..d].iter().product();

    // fluid means
    let fluid_mass = pairwise_sum(&fluid.rho) * wx;
    let rho_c = fluid_mass / volume;
    let mut m_c = [0.0; MAX_DIM];
    for c in 0..d {
        let per: Vec<f64> = (0..xl).map(|i| fluid.rho[i] * fluid.u[i * d + c]).collect();
        m_c[c] = pairwise_sum(&per) * wx / fluid_mass.max(1e-300);
    }

    // particle mean velocity (falls back to m_c at zero particle mass)
    let particle_mass = f.mass(grid);
    let mut v_c = [0.0; MAX_DIM];
    let fallback = particle_mass <= 0.0;
    if fallback {
        v_c = m_c;
    } else {
        for c in 0..d {
            let per: Vec<f64> = (0..xl)
                .map(|ix| {
                    let base = ix * vl;
                    let row: Vec<f64> = (0..vl)
                        .map(|iv| grid.v_node(iv)[c] * f.values[base + iv] * grid.v_weight(iv))
                        .collect();
                    pairwise_sum(&row)
                })
                .collect();
            v_c[c] = pairwise_sum(&per) * wx / particle_mass;
        }
    }

    // assemble the four terms
    let particle_term = {
        let per: Vec<f64> = (0..xl)
            .map(|ix| {
                let base = ix * vl;
                let row: Vec<f64> = (0..vl)
                    .map(|iv| {
                        let v = grid.v_node(iv);
                        let mut r = 0.0;
                        for c in 0..d {
                            let dv = v[c] - v_c[c];
                            r += dv * dv;
                        }
                        r * f.values[base + iv] * grid.v_weight(iv)
                    })
                    .collect();
                pairwise_sum(&row)
            })
            .collect();
        pairwise_sum(&per) * wx
    };
    let fluid_kinetic_term = {
        let per: Vec<f64> = (0..xl)
            .map(|i| {
                let mut r = 0.0;
                for c in 0..d {
                    let du = fluid.u[i * d + c] - m_c[c];
                    r += du * du;
                }
                fluid.rho[i] * r
            })
            .collect();
        pairwise_sum(&per) * wx
    };
    let density_term = {
        let per: Vec<f64> = (0..xl).map(|i| (fluid.rho[i] - rho_c).powi(2)).collect();
        pairwise_sum(&per) * wx
    };
    let mut cross_term = 0.0;
    for c in 0..d {
        cross_term += (v_c[c] - m_c[c]).powi(2);
    }

    Ok(ModulatedEnergy {
        total: particle_term + fluid_kinetic_term + density_term + cross_term,
        particle_term,
        fluid_kinetic_term,
        density_term,
        cross_term,
        v_c,
        m_c,
        rho_c,
        v_c_fallback: fallback,
    })
}

// ---------------------------------------------------------------------------
// decay fit

#[derive(Debug, Clone)]
pub struct DecayFit {
    pub amplitude: f64,
    pub rate: f64,
    /// RMS of the log-fit error.
    pub residual: f64,
    /// Non-positive samples excluded from the fit.
    pub excluded: usize,
}

/// Least-squares fit of log L against t: L(t) ~ amplitude * exp(-rate * t).
pub fn decay_fit(series: &[(f64, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(_, l)| *l > 0.0)
        .map(|&(t, l)| (t, l.ln()))
        .collect();
    let excluded = series.len() - pts.len();
    if pts.len() < 10 {
        return Err(SolverError::InvalidConfig(format!(
            "decay fit needs at least 10 positive samples, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let st: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let stt: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sty: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = n * stt - st * st;
    if det.abs() < 1e-300 {
        return Err(SolverError::InvalidConfig(
            "decay fit: degenerate time samples".into(),
        ));
    }
    let slope = (n * sty - st * sy) / det;
    let intercept = (sy - slope * st) / n;
    let mut ss = 0.0;
    for (t, y) in &pts {
        let e = y - (intercept + slope * t);
        ss += e * e;
    }
    Ok(DecayFit {
        amplitude: intercept.exp(),
        rate: -slope,
        residual: (ss / n).sqrt(),
        excluded,
    })
}

// ---------------------------------------------------------------------------
// conservation and monitors

/// Extensive quantities tracked for drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Totals {
    pub particle_mass: f64,
    pub fluid_mass: f64,
    /// Combined particle + fluid momentum, padded to three components.
    pub momentum: [f64; MAX_DIM],
}

pub fn totals(f: &KineticState, fluid: &FluidState, grid: &PhaseGrid) -> Result<Totals> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    grid.check_x_shape(fluid.rho.len(), "fluid density")?;
    let d = grid.dim;
    let xl = grid.x_len();
    let vl = grid.v_len();
    let wx = grid.x_weight();
    let particle_mass = f.mass(grid);
    let fluid_mass = fluid.mass(grid);
    let mut momentum = [0.0; MAX_DIM];
    for c in 0..d {
        let kin: Vec<f64> = (0..xl)
            .map(|ix| {
                let base = ix * vl;
                let row: Vec<f64> = (0..vl)
                    .map(|iv| grid.v_node(iv)[c] * f.values[base + iv] * grid.v_weight(iv))
                    .collect();
                pairwise_sum(&row)
            })
            .collect();
        let fl: Vec<f64> = (0..xl).map(|i| fluid.rho[i] * fluid.u[i * d + c]).collect();
        momentum[c] = (pairwise_sum(&kin) + pairwise_sum(&fl)) * wx;
    }
    Ok(Totals {
        particle_mass,
        fluid_mass,
        momentum,
    })
}

/// Relative drifts of the conserved quantities against the t = 0 entry.
#[derive(Debug, Clone)]
pub struct ConservationReport {
    pub particle_mass_drift: f64,
    pub fluid_mass_drift: f64,
    pub momentum_drift: f64,
    /// Scale used to normalize the momentum drift.
    pub momentum_scale: f64,
}

pub fn conservation_report(series: &[Totals]) -> ConservationReport {
    if series.is_empty() {
        return ConservationReport {
            particle_mass_drift: 0.0,
            fluid_mass_drift: 0.0,
            momentum_drift: 0.0,
            momentum_scale: 1.0,
        };
    }
    let first = series[0];
    let rel = |now: f64, then: f64| -> f64 {
        let scale = then.abs().max(1e-30);
        (now - then).abs() / scale
    };
    let mut pm = 0.0f64;
    let mut fm = 0.0f64;
    let mut mom = 0.0f64;
    // momentum scale: initial |P| or, when near zero, the mass scale
    let p0mag = {
        let mut s = 0.0;
        for c in 0..MAX_DIM {
            s += first.momentum[c] * first.momentum[c];
        }
        s.sqrt()
    };
    let scale = p0mag
        .max(1e-3 * (first.particle_mass + first.fluid_mass))
        .max(1e-30);
    for t in series {
        pm = pm.max(rel(t.particle_mass, first.particle_mass));
        fm = fm.max(rel(t.fluid_mass, first.fluid_mass));
        let mut dp = 0.0;
        for c in 0..MAX_DIM {
            dp += (t.momentum[c] - first.momentum[c]).powi(2);
        }
        mom = mom.max(dp.sqrt() / scale);
    }
    ConservationReport {
        particle_mass_drift: pm,
        fluid_mass_drift: fm,
        momentum_drift: mom,
        momentum_scale: scale,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorStatus {
    Ok,
    Warn,
    Violated,
}

#[derive(Debug, Clone)]
pub struct MonitorEntry {
    pub name: String,
    pub status: MonitorStatus,
    pub value: f64,
    pub location: usize,
}

#[derive(Debug, Clone)]
pub struct MonitorReport {
    pub entries: Vec<MonitorEntry>,
}

impl MonitorReport {
    pub fn worst(&self) -> MonitorStatus {
        let mut worst = MonitorStatus::Ok;
        for e in &self.entries {
            worst = match (worst, e.status) {
                (_, MonitorStatus::Violated) | (MonitorStatus::Violated, _) => {
                    MonitorStatus::Violated
                }
                (_, MonitorStatus::Warn) | (MonitorStatus::Warn, _) => MonitorStatus::Warn,
                _ => MonitorStatus::Ok,
            };
        }
        worst
    }

    pub fn entry(&self, name: &str) -> Option<&MonitorEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Runtime thresholds: the symmetrized density floor (ok above delta, warn
/// in (delta/2, delta], violated at or below delta/2), kinetic negativity,
/// and optional floors on the kinetic moments.
pub fn positivity_monitor(
    f: &KineticState,
    fluid: &FluidState,
    grid: &PhaseGrid,
    cfg: &SimConfig,
) -> Result<MonitorReport> {
    grid.check_phase_shape(f.values.len(), "kinetic state")?;
    grid.check_x_shape(fluid.h.len(), "symmetrized density")?;
    let mut entries = Vec::new();

    let mut sym_min = f64::INFINITY;
    let mut sym_at = 0usize;
    for (i, &h) in fluid.h.iter().enumerate() {
        if 1.0 + h < sym_min {
            sym_min = 1.0 + h;
            sym_at = i;
        }
    }
    let status = if sym_min > cfg.delta {
        MonitorStatus::Ok
    } else if sym_min > 0.5 * cfg.delta {
        MonitorStatus::Warn
    } else {
        MonitorStatus::Violated
    };
    entries.push(MonitorEntry {
        name: "symmetrized_density_floor".into(),
        status,
        value: sym_min,
        location: sym_at,
    });

    let mut fmin = f64::INFINITY;
    let mut fat = 0usize;
    let mut fmax = 0.0f64;
    for (i, &v) in f.values.iter().enumerate() {
        if v < fmin {
            fmin = v;
            fat = i;
        }
        fmax = fmax.max(v.abs());
    }
    let status = if fmin >= 0.0 {
        MonitorStatus::Ok
    } else if fmin >= -cfg.positivity_tol * fmax.max(1.0) {
        MonitorStatus::Warn
    } else {
        MonitorStatus::Violated
    };
    entries.push(MonitorEntry {
        name: "kinetic_nonnegativity".into(),
        status,
        value: fmin,
        location: fat,
    });

    if cfg.rho_f_floor.is_some() || cfg.t_f_floor.is_some() {
        let m = crate::moments::compute_moments(f, grid, cfg.t_ref, cfg.vacuum_floor, None)?;
        if let Some(floor) = cfg.rho_f_floor {
            let mut rmin = f64::INFINITY;
            let mut rat = 0usize;
            for (i, &r) in m.rho_f.iter().enumerate() {
                if r < rmin {
                    rmin = r;
                    rat = i;
                }
            }
            let status = if rmin > 2.0 * floor {
                MonitorStatus::Ok
            } else if rmin > floor {
                MonitorStatus::Warn
            } else {
                MonitorStatus::Violated
            };
            entries.push(MonitorEntry {
                name: "kinetic_density_floor".into(),
                status,
                value: rmin,
                location: rat,
            });
        }
        if let Some(floor) = cfg.t_f_floor {
            let mut tmin = f64::INFINITY;
            let mut tat = 0usize;
            for (i, &t) in m.t_f.iter().enumerate() {
                if m.mask[i] {
                    continue;
                }
                if t < tmin {
                    tmin = t;
                    tat = i;
                }
            }
            let status = if tmin > 2.0 * floor {
                MonitorStatus::Ok
            } else if tmin > floor {
                MonitorStatus::Warn
            } else {
                MonitorStatus::Violated
            };
            entries.push(MonitorEntry {
                name: "kinetic_temperature_floor".into(),
                status,
                value: tmin,
                location: tat,
            });
        }
    }

    Ok(MonitorReport { entries })
}

// ---------------------------------------------------------------------------
// per-step diagnostics row

/// Fixed-schema diagnostics record; one row per step. Column order is the
/// field order here and is documented in the README.
#[derive(Debug, Clone)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub particle_mass: f64,
    pub fluid_mass: f64,
    pub momentum: [f64; MAX_DIM],
    pub f_l2k: f64,
    pub f_h1k: f64,
    pub f_h2k: f64,
    pub f_linfk: f64,
    pub f_w1infk: f64,
    /// (4 gamma / (gamma-1)^2) |h - mean h|_{H3}^2 + |u|_{H3}^2.
    pub fluid_energy_h3: f64,
    pub inf_sym_density: f64,
    pub inf_rho_f: f64,
    pub inf_t_f: f64,
    pub inf_g: f64,
    pub mod_energy: f64,
    pub me_particle: f64,
    pub me_fluid_kinetic: f64,
    pub me_density: f64,
    pub me_cross: f64,
    pub v_c: [f64; MAX_DIM],
    pub m_c: [f64; MAX_DIM],
    pub rho_c: f64,
}

impl DiagnosticsRow {
    pub const COLUMNS: &'static [&'static str] = &[
        "t",
        "particle_mass",
        "fluid_mass",
        "momentum_x",
        "momentum_y",
        "momentum_z",
        "f_l2k",
        "f_h1k",
        "f_h2k",
        "f_linfk",
        "f_w1infk",
        "fluid_energy_h3",
        "inf_sym_density",
        "inf_rho_f",
        "inf_t_f",
        "inf_g",
        "mod_energy",
        "me_particle",
        "me_fluid_kinetic",
        "me_density",
        "me_cross",
        "v_c_x",
        "v_c_y",
        "v_c_z",
        "m_c_x",
        "m_c_y",
        "m_c_z",
        "rho_c",
    ];

    pub fn values(&self) -> Vec<f64> {
        let mut out = vec![self.t, self.particle_mass, self.fluid_mass];
        out.extend_from_slice(&self.momentum);
        out.extend_from_slice(&[
            self.f_l2k,
            self.f_h1k,
            self.f_h2k,
            self.f_linfk,
            self.f_w1infk,
            self.fluid_energy_h3,
            self.inf_sym_density,
            self.inf_rho_f,
            self.inf_t_f,
            self.inf_g,
            self.mod_energy,
            self.me_particle,
            self.me_fluid_kinetic,
            self.me_density,
            self.me_cross,
        ]);
        out.extend_from_slice(&self.v_c);
        out.extend_from_slice(&self.m_c);
        out.push(self.rho_c);
        out
    }
}

/// Assemble the full diagnostics row for one state.
pub fn diagnostics_row(
    f: &KineticState,
    fluid: &FluidState,
    grid: &PhaseGrid,
    cfg: &SimConfig,
) -> Result<DiagnosticsRow> {
    let tot = totals(f, fluid, grid)?;
    let me = modulated_energy(f, fluid, grid)?;
    let k = cfg.k;
    let f_l2k = weighted_lp_norm(f, grid, 2, k)?;
    let f_h1k = weighted_sobolev_norm(f, grid, 1, k)?;
    let f_h2k = weighted_sobolev_norm(f, grid, 2, k)?;
    let f_linfk = weighted_sup_norm(f, grid, k)?;
    let f_w1infk = weighted_w1inf_norm(f, grid, k)?;

    // fluid energy: center h at its torus mean
    let xl = grid.x_len();
    let h_mean = pairwise_sum(&fluid.h) / xl as f64;
    let h_centered: Vec<f64> = fluid.h.iter().map(|&h| h - h_mean).collect();
    let h_h3 = spatial_sobolev_norm(&h_centered, grid, 3)?;
    let mut u_h3_sq = 0.0;
    let d = grid.dim;
    for c in 0..d {
        let comp: Vec<f64> = (0..xl).map(|i| fluid.u[i * d + c]).collect();
        let n = spatial_sobolev_norm(&comp, grid, 3)?;
        u_h3_sq += n * n;
    }
    let gfac = 4.0 * cfg.gamma / (cfg.gamma - 1.0).powi(2);
    let fluid_energy_h3 = gfac * h_h3 * h_h3 + u_h3_sq;

    let m = crate::moments::compute_moments(f, grid, cfg.t_ref, cfg.vacuum_floor, None)?;
    let inf_sym_density = fluid
        .h
        .iter()
        .map(|&h| 1.0 + h)
        .fold(f64::INFINITY, f64::min);
    let inf_rho_f = m.rho_f.iter().cloned().fold(f64::INFINITY, f64::min);
    let inf_t_f = m
        .t_f
        .iter()
        .zip(m.mask.iter())
        .filter(|(_, &msk)| !msk)
        .map(|(&t, _)| t)
        .fold(f64::INFINITY, f64::min);
    // inf over x of (int f^2 dv)^(1/2)
    let vl = grid.v_len();
    let mut inf_g = f64::INFINITY;
    for ix in 0..xl {
        let base = ix * vl;
        let row: Vec<f64> = (0..vl)
            .map(|iv| f.values[base + iv] * f.values[base + iv] * grid.v_weight(iv))
            .collect();
        inf_g = inf_g.min(pairwise_sum(&row).sqrt());
    }

    Ok(DiagnosticsRow {
        t: f.time,
        particle_mass: tot.particle_mass,
        fluid_mass: tot.fluid_mass,
        momentum: tot.momentum,
        f_l2k,
        f_h1k,
        f_h2k,
        f_linfk,
        f_w1infk,
        fluid_energy_h3,
        inf_sym_density,
        inf_rho_f,
        inf_t_f: if inf_t_f.is_finite() { inf_t_f } else { 0.0 },
        inf_g,
        mod_energy: me.total,
        me_particle: me.particle_term,
        me_fluid_kinetic: me.fluid_kinetic_term,
        me_density: me.density_term,
        me_cross: me.cross_term,
        v_c: me.v_c,
        m_c: me.m_c,
        rho_c: me.rho_c,
    })
}
