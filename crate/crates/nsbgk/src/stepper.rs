//! Orchestration: one coupled step, time marching with diagnostics, the
//! global-in-time fixed-point iteration, and its distance functional.

use crate::config::SimConfig;
use crate::diagnostics::{
    diagnostics_row, positivity_monitor, spatial_gradient_sq, DiagnosticsRow, MonitorStatus,
};
use crate::error::{Result, SolverError};
use crate::fluid::{fluid_step, from_symmetrized, FluidStepInputs, FluidStepParams};
use crate::grid::{v_bracket, PhaseGrid};
use crate::maxwellian::{collision_frequency, discrete_maxwellian_with_fit, MaxwellianParams};
use crate::moments::{compute_moments, coupling_force_density, MacroFields};
use crate::state::{FluidState, KineticState};
use crate::transport::{kinetic_step, KineticStepCoeffs};
use crate::util::pairwise_sum;

/// Full system state plus the moment cache kept consistent with `f`.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub f: KineticState,
    pub fluid: FluidState,
    pub macro_fields: MacroFields,
    pub t: f64,
}

impl SystemState {
    pub fn new(
        f: KineticState,
        fluid: FluidState,
        grid: &PhaseGrid,
        cfg: &SimConfig,
    ) -> Result<Self> {
        let macro_fields = compute_moments(&f, grid, cfg.t_ref, cfg.vacuum_floor, Some(&fluid.u))?;
        let t = f.time;
        Ok(SystemState {
            f,
            fluid,
            macro_fields,
            t,
        })
    }
}

fn fluid_params(cfg: &SimConfig) -> FluidStepParams {
    FluidStepParams {
        cfl: cfg.cfl,
        viscous_implicit: cfg.viscous_implicit,
        cg_tol: cfg.cg_tol,
        cg_max_iters: cfg.cg_max_iters,
        coeff_floor: 0.5 * cfg.delta,
    }
}

/// Advance the coupled system by `dt`: moments and drag from the current
/// kinetic state, the kinetic step with frozen fluid fields, then the fluid
/// step with frozen coefficients and the opposite drag forcing.
pub fn coupled_step(
    state: &SystemState,
    dt: f64,
    grid: &PhaseGrid,
    cfg: &SimConfig,
) -> Result<SystemState> {
    let macro_fields = compute_moments(
        &state.f,
        grid,
        cfg.t_ref,
        cfg.vacuum_floor,
        Some(&state.fluid.u),
    )?;
    let drag = coupling_force_density(&state.f, &state.fluid.u, grid)?;

    // relaxation target and frequency from the same kinetic state
    let active = MaxwellianParams {
        rho: macro_fields
            .rho_f
            .iter()
            .zip(macro_fields.mask.iter())
            .map(|(&r, &m)| if m { 0.0 } else { r })
            .collect(),
        u: macro_fields.u_f.clone(),
        t: macro_fields.t_f.clone(),
    };
    let (_, maxwellian_fit) = discrete_maxwellian_with_fit(&active, grid)?;
    let nu = collision_frequency(&macro_fields, cfg.alpha);

    let coeffs = KineticStepCoeffs {
        rho: &state.fluid.rho,
        u: &state.fluid.u,
        macro_fields: &macro_fields,
        maxwellian_fit: &maxwellian_fit,
        nu: &nu,
    };
    let f_new = kinetic_step(&state.f, &coeffs, dt, grid, cfg.cfl)?;

    let inputs = FluidStepInputs {
        h: &state.fluid.h,
        u: &state.fluid.u,
        h_coeff: &state.fluid.h,
        u_coeff: &state.fluid.u,
        drag: &drag,
        gamma: cfg.gamma,
        mu: cfg.mu,
        dt,
        h_source: None,
        u_source: None,
    };
    let (h_new, u_new) = fluid_step(&inputs, grid, &fluid_params(cfg))?;
    let rho_new = from_symmetrized(&h_new, cfg.gamma)?;
    let fluid_new = FluidState {
        rho: rho_new,
        h: h_new,
        u: u_new,
        time: state.t + dt,
    };
    let macro_new = compute_moments(
        &f_new,
        grid,
        cfg.t_ref,
        cfg.vacuum_floor,
        Some(&fluid_new.u),
    )?;
    Ok(SystemState {
        f: f_new,
        fluid: fluid_new,
        macro_fields: macro_new,
        t: state.t + dt,
    })
}

/// Outcome of a time-marched run.
pub struct RunResult {
    pub final_state: SystemState,
    pub rows: Vec<DiagnosticsRow>,
    pub steps: usize,
}

/// March to `cfg.t_final`, emitting one diagnostics row per step (including
/// the initial state) and invoking `snapshot_hook` every `cfg.snapshot_every`
/// steps (and at the end). Aborts with a monitor violation error if a
/// positivity monitor reports `Violated`; the offending state is handed to
/// `dump_hook` first so the caller can persist it.
pub fn run_simulation(
    init: SystemState,
    grid: &PhaseGrid,
    cfg: &SimConfig,
    mut snapshot_hook: Option<&mut dyn FnMut(usize, &SystemState) -> Result<()>>,
    dump_hook: Option<&mut dyn FnMut(&SystemState) -> Result<()>>,
) -> Result<RunResult> {
    // the initial state must satisfy every structural invariant
    let lower = match (cfg.lower_eps1, cfg.lower_a) {
        (Some(eps1), Some(a)) => Some(crate::state::LowerBoundCheck { eps1, a }),
        _ => None,
    };
    let report = crate::state::validate_state(&init.f, &init.fluid, grid, cfg, lower)?;
    if !report.passed() {
        let failed: Vec<String> = report
            .entries
            .iter()
            .filter(|e| !e.passed)
            .map(|e| format!("{} ({})", e.name, e.detail))
            .collect();
        return Err(SolverError::InvalidConfig(format!(
            "initial state fails validation: {}",
            failed.join("; ")
        )));
    }
    let mut state = init;
    let mut rows = Vec::new();
    rows.push(diagnostics_row(&state.f, &state.fluid, grid, cfg)?);
    if let Some(hook) = snapshot_hook.as_deref_mut() {
        hook(0, &state)?;
    }
    let steps = if cfg.t_final <= 0.0 {
        0
    } else {
        (cfg.t_final / cfg.dt).round().max(1.0) as usize
    };
    let mut dump_hook = dump_hook;
    for step in 1..=steps {
        state = coupled_step(&state, cfg.dt, grid, cfg)?;
        let monitor = positivity_monitor(&state.f, &state.fluid, grid, cfg)?;
        if monitor.worst() == MonitorStatus::Violated {
            if let Some(hook) = dump_hook.as_deref_mut() {
                hook(&state)?;
            }
            let detail = monitor
                .entries
                .iter()
                .filter(|e| e.status == MonitorStatus::Violated)
                .map(|e| format!("{} = {:e} at node {}", e.name, e.value, e.location))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(SolverError::MonitorViolation(format!(
                "step {step}: {detail}"
            )));
        }
        rows.push(diagnostics_row(&state.f, &state.fluid, grid, cfg)?);
        if let Some(hook) = snapshot_hook.as_deref_mut() {
            if (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0) || step == steps {
                hook(step, &state)?;
            }
        }
    }
    Ok(RunResult {
        final_state: state,
        rows,
        steps,
    })
}

// ---------------------------------------------------------------------------
// fixed-point iteration

/// One stored iterate: fields sampled at every step time of the shared grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl Trajectory {
    fn constant(init: &SystemState, times: &[f64]) -> Self {
        Trajectory {
            times: times.to_vec(),
            f: vec![init.f.values.clone(); times.len()],
            h: vec![init.fluid.h.clone(); times.len()],
            u: vec![init.fluid.u.clone(); times.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear-in-time samples (exact at stored nodes).
    pub fn sample(&self, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.times.len();
        if t <= self.times[0] {
            return (self.f[0].clone(), self.h[0].clone(), self.u[0].clone());
        }
        if t >= self.times[n - 1] {
            return (
                self.f[n - 1].clone(),
                self.h[n - 1].clone(),
                self.u[n - 1].clone(),
            );
        }
        let mut j = 0;
        while self.times[j + 1] < t {
            j += 1;
        }
        let t0 = self.times[j];
        let t1 = self.times[j + 1];
        let a = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let blend = |x0: &[f64], x1: &[f64]| -> Vec<f64> {
            x0.iter()
                .zip(x1.iter())
                .map(|(p, q)| (1.0 - a) * p + a * q)
                .collect()
        };
        (
            blend(&self.f[j], &self.f[j + 1]),
            blend(&self.h[j], &self.h[j + 1]),
            blend(&self.u[j], &self.u[j + 1]),
        )
    }

    fn estimated_bytes(&self) -> usize {
        let per_level = self.f.first().map_or(0, |v| v.len())
            + self.h.first().map_or(0, |v| v.len())
            + self.u.first().map_or(0, |v| v.len());
        self.times.len() * per_level * std::mem::size_of::<f64>()
    }
}

/// Distance functional between two trajectories at one time:
/// E = |df|_{L2_{k-eps}}^2 + |dh|_{H1}^2 + |du|_{H1}^2 and the dissipation
/// D = (c mu / 2) |grad du|_{H1}^2.
pub fn cauchy_functional(
    a: &Trajectory,
    b: &Trajectory,
    t: f64,
    grid: &PhaseGrid,
    cfg: &SimConfig,
) -> Result<(f64, f64)> {
    let (fa, ha, ua) = a.sample(t);
    let (fb, hb, ub) = b.sample(t);
    cauchy_between(&fa, &ha, &ua, &fb, &hb, &ub, grid, cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn cauchy_between(
    fa: &[f64],
    ha: &[f64],
    ua: &[f64],
    fb: &[f64],
    hb: &[f64],
    ub: &[f64],
    grid: &PhaseGrid,
    cfg: &SimConfig,
) -> Result<(f64, f64)> {
    grid.check_phase_shape(fa.len(), "kinetic iterate")?;
    grid.check_phase_shape(fb.len(), "kinetic iterate")?;
    grid.check_x_shape(ha.len(), "symmetrized iterate")?;
    grid.check_x_shape(hb.len(), "symmetrized iterate")?;
    grid.check_xvec_shape(ua.len(), "velocity iterate")?;
    grid.check_xvec_shape(ub.len(), "velocity iterate")?;
    let d = grid.dim;
    let xl = grid.x_len();
    let vl = grid.v_len();
    let kw = cfg.k - cfg.eps;

    // kinetic part: weighted L2 with the reduced exponent
    let wx = grid.x_weight();
    let mut wv = vec![0.0; vl];
    for iv in 0..vl {
        let v = grid.v_node(iv);
        wv[iv] = (2.0 * v_bracket(&v[..d]).powf(kw)).exp() * grid.v_weight(iv);
    }
    let per_x: Vec<f64> = (0..xl)
        .map(|ix| {
            let base = ix * vl;
            let row: Vec<f64> = (0..vl)
                .map(|iv| {
                    let df = fa[base + iv] - fb[base + iv];
                    df * df * wv[iv]
                })
                .collect();
            pairwise_sum(&row)
        })
        .collect();
    let f_part = pairwise_sum(&per_x) * wx;

    // fluid parts: H1 norms of the differences
    let dh: Vec<f64> = ha.iter().zip(hb.iter()).map(|(a, b)| a - b).collect();
    let (h0, h1, _) = spatial_gradient_sq(&dh, grid);
    let mut u0 = 0.0;
    let mut u1 = 0.0;
    let mut u2 = 0.0;
    for c in 0..d {
        let du: Vec<f64> = (0..xl).map(|i| ua[i * d + c] - ub[i * d + c]).collect();
        let (a0, a1, a2) = spatial_gradient_sq(&du, grid);
        u0 += a0;
        u1 += a1;
        u2 += a2;
    }
    let e = f_part + h0 + h1 + u0 + u1;
    // dissipation: (c mu / 2) (|grad du|_{L2}^2 + |grad^2 du|_{L2}^2)
    let dis = 0.5 * cfg.cauchy_c * cfg.mu * (u1 + u2);
    Ok((e, dis))
}

/// Per-iterate record of the distance functional.
#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub n: usize,
    pub e_series: Vec<f64>,
    pub d_series: Vec<f64>,
    pub sup_e: f64,
    /// sup E^{n+1} / sup E^n, defined from the second iterate on.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub iterates: Vec<IterateRecord>,
    /// Set when the ratio stayed at or above one for three consecutive
    /// iterates (reported, not fatal).
    pub non_contraction: bool,
}

pub struct PicardOutcome {
    pub trajectory: Trajectory,
    pub trace: IterationTrace,
    pub converged: bool,
    /// Emitted when the stored iterates exceeded the configured memory cap.
    pub memory_warning: Option<String>,
}

/// Global-in-time fixed-point iteration: iterate 0 is the initial data held
/// constant on [0, T]; iterate n+1 solves the linear kinetic and fluid
/// problems over the whole interval with coefficients read from iterate n's
/// stored trajectory. Stops when sup_t E < tol or at `n_max` iterates.
pub fn picard_solve(
    init: &SystemState,
    horizon: f64,
    n_max: usize,
    tol: f64,
    grid: &PhaseGrid,
    cfg: &SimConfig,
) -> Result<PicardOutcome> {
    let steps = (horizon / cfg.dt).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|j| init.t + j as f64 * dt).collect();

    let mut prev = Trajectory::constant(init, &times);
    let mut memory_warning = None;
    let est = 2 * prev.estimated_bytes();
    if est > cfg.mem_cap_mib * 1024 * 1024 {
        memory_warning = Some(format!(
            "iterate storage needs about {} MiB, above the configured cap of {} MiB",
            est / (1024 * 1024),
            cfg.mem_cap_mib
        ));
    }

    let mut trace = IterationTrace::default();
    let mut converged = false;
    let mut high_ratio_run = 0usize;

    for n in 1..=n_max {
        // solve the linear problems over [0, T] against the previous iterate
        let mut f_cur = KineticState::new(prev.f[0].clone(), times[0]);
        let mut h_cur = prev.h[0].clone();
        let mut u_cur = prev.u[0].clone();
        let mut traj = Trajectory {
            times: times.clone(),
            f: Vec::with_capacity(times.len()),
            h: Vec::with_capacity(times.len()),
            u: Vec::with_capacity(times.len()),
        };
        traj.f.push(f_cur.values.clone());
        traj.h.push(h_cur.clone());
        traj.u.push(u_cur.clone());

        for j in 0..steps {
            // coefficients frozen at the step start, read from iterate n-1
            let f_coeff = KineticState::new(prev.f[j].clone(), times[j]);
            let h_coeff = &prev.h[j];
            let u_coeff = &prev.u[j];
            let rho_coeff = from_symmetrized(h_coeff, cfg.gamma)?;
            let macro_fields =
                compute_moments(&f_coeff, grid, cfg.t_ref, cfg.vacuum_floor, Some(u_coeff))?;
            let drag = coupling_force_density(&f_coeff, u_coeff, grid)?;
            let active = MaxwellianParams {
                rho: macro_fields
                    .rho_f
                    .iter()
                    .zip(macro_fields.mask.iter())
                    .map(|(&r, &m)| if m { 0.0 } else { r })
                    .collect(),
                u: macro_fields.u_f.clone(),
                t: macro_fields.t_f.clone(),
            };
            let (_, maxwellian_fit) = discrete_maxwellian_with_fit(&active, grid)?;
            let nu = collision_frequency(&macro_fields, cfg.alpha);

            let coeffs = KineticStepCoeffs {
                rho: &rho_coeff,
                u: u_coeff,
                macro_fields: &macro_fields,
                maxwellian_fit: &maxwellian_fit,
                nu: &nu,
            };
            f_cur = kinetic_step(&f_cur, &coeffs, dt, grid, cfg.cfl)?;

            let inputs = FluidStepInputs {
                h: &h_cur,
                u: &u_cur,
                h_coeff,
                u_coeff,
                drag: &drag,
                gamma: cfg.gamma,
                mu: cfg.mu,
                dt,
                h_source: None,
                u_source: None,
            };
            let (h_new, u_new) = fluid_step(&inputs, grid, &fluid_params(cfg))?;
            h_cur = h_new;
            u_cur = u_new;

            traj.f.push(f_cur.values.clone());
            traj.h.push(h_cur.clone());
            traj.u.push(u_cur.clone());
        }

        // distance to the previous iterate, sampled on the shared time grid
        let mut e_series = Vec::with_capacity(times.len());
        let mut d_series = Vec::with_capacity(times.len());
        let mut sup_e = 0.0f64;
        for j in 0..times.len() {
            let (e, dis) = cauchy_between(
                &traj.f[j], &traj.h[j], &traj.u[j], &prev.f[j], &prev.h[j], &prev.u[j], grid, cfg,
            )?;
            sup_e = sup_e.max(e);
            e_series.push(e);
            d_series.push(dis);
        }
        let ratio = trace.iterates.last().map(|last| {
            if last.sup_e > 0.0 {
                sup_e / last.sup_e
            } else {
                0.0
            }
        });
        if let Some(r) = ratio {
            if r >= 1.0 {
                high_ratio_run += 1;
                if high_ratio_run >= 3 {
                    trace.non_contraction = true;
                }
            } else {
                high_ratio_run = 0;
            }
        }
        trace.iterates.push(IterateRecord {
            n,
            e_series,
            d_series,
            sup_e,
            ratio,
        });
        prev = traj;
        if sup_e < tol {
            converged = true;
            break;
        }
    }

    Ok(PicardOutcome {
        trajectory: prev,
        trace,
        converged,
        memory_warning,
    })
}
