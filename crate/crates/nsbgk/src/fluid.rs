//! Symmetrized compressible Navier-Stokes step on the periodic spatial grid:
//! the continuity equation is advanced in the symmetrized density variable h
//! (1 + h = rho^((gamma-1)/2)) and the velocity equation carries the drag
//! forcing and the density-weighted viscous term.

use crate::error::{Result, SolverError};
use crate::grid::PhaseGrid;
use crate::util::pairwise_sum;

/// h = rho^((gamma-1)/2) - 1, pointwise. Nonpositive density is a hard error.
pub fn to_symmetrized(rho: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let half = 0.5 * (gamma - 1.0);
    rho.iter()
        .enumerate()
        .map(|(i, &r)| {
            if !(r > 0.0) {
                return Err(SolverError::Positivity {
                    what: "density".into(),
                    node: i,
                    value: r,
                });
            }
            Ok(r.powf(half) - 1.0)
        })
        .collect()
}

/// rho = (1 + h)^(2/(gamma-1)), pointwise. Nonpositive 1 + h is a hard error.
pub fn from_symmetrized(h: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let expo = 2.0 / (gamma - 1.0);
    h.iter()
        .enumerate()
        .map(|(i, &hv)| {
            let base = 1.0 + hv;
            if !(base > 0.0) {
                return Err(SolverError::Positivity {
                    what: "symmetrized density".into(),
                    node: i,
                    value: base,
                });
            }
            Ok(base.powf(expo))
        })
        .collect()
}

/// Isentropic pressure law p = rho^gamma.
pub fn pressure(rho: &[f64], gamma: f64) -> Vec<f64> {
    rho.iter()
        .map(|&r| if r <= 0.0 { 0.0 } else { r.powf(gamma) })
        .collect()
}

/// Inputs of one fluid step. Coefficient fields come from the linearizing
/// state (the step-start state in time marching, the previous iterate in the
/// fixed-point mode) and stay frozen across the internal stages.
pub struct FluidStepInputs<'a> {
    pub h: &'a [f64],
    pub u: &'a [f64],
    pub h_coeff: &'a [f64],
    pub u_coeff: &'a [f64],
    /// Drag-force density F(x); enters the velocity equation as -F.
    pub drag: &'a [f64],
    pub gamma: f64,
    pub mu: f64,
    pub dt: f64,
    /// Optional manufactured sources for convergence studies.
    pub h_source: Option<&'a [f64]>,
    pub u_source: Option<&'a [f64]>,
}

/// Numerical controls for the fluid step.
#[derive(Debug, Clone, Copy)]
pub struct FluidStepParams {
    pub cfl: f64,
    pub viscous_implicit: bool,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Coefficient density floor (delta/2 on 1 + h_coeff).
    pub coeff_floor: f64,
}

#[derive(Debug, Clone, Copy)]
enum Stencil {
    Central,
    UpwindPos,
    UpwindNeg,
}

#[inline]
fn derivative_1d(
    field: &[f64],
    grid: &PhaseGrid,
    ix: usize,
    axis: usize,
    comp_stride: usize,
    comp: usize,
    stencil: Stencil,
) -> f64 {
    // index arithmetic over the decomposed spatial index
    let idx = grid.x_decompose(ix);
    let n = grid.nx[axis];
    let at = |shift: isize| -> f64 {
        let mut id = idx;
        id[axis] = (id[axis] as isize + shift).rem_euclid(n as isize) as usize;
        field[grid.x_compose(&id) * comp_stride + comp]
    };
    let dx = grid.dx[axis];
    match stencil {
        Stencil::Central => (at(1) - at(-1)) / (2.0 * dx),
        Stencil::UpwindPos => (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * dx),
        Stencil::UpwindNeg => (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * dx),
    }
}

fn scalar_derivative(field: &[f64], grid: &PhaseGrid, ix: usize, axis: usize, st: Stencil) -> f64 {
    derivative_1d(field, grid, ix, axis, 1, 0, st)
}

fn vector_derivative(
    field: &[f64],
    grid: &PhaseGrid,
    ix: usize,
    comp: usize,
    axis: usize,
    st: Stencil,
) -> f64 {
    derivative_1d(field, grid, ix, axis, grid.dim, comp, st)
}

fn laplacian_component(field: &[f64], grid: &PhaseGrid, ix: usize, comp: usize) -> f64 {
    let d = grid.dim;
    let idx = grid.x_decompose(ix);
    let mut total = 0.0;
    for axis in 0..d {
        let n = grid.nx[axis];
        let dx2 = grid.dx[axis] * grid.dx[axis];
        let mut idp = idx;
        idp[axis] = (idx[axis] + 1) % n;
        let mut idm = idx;
        idm[axis] = (idx[axis] + n - 1) % n;
        total += (field[grid.x_compose(&idp) * d + comp] - 2.0 * field[ix * d + comp]
            + field[grid.x_compose(&idm) * d + comp])
            / dx2;
    }
    total
}

/// Matrix-free conjugate gradient for (diag(rho) - dt mu Lap) x = b,
/// component by component. The operator is symmetric positive definite.
fn cg_viscous_solve(
    rho: &[f64],
    dt_mu: f64,
    b: &[f64],
    x0: &[f64],
    grid: &PhaseGrid,
    comp: usize,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let xl = grid.x_len();
    let d = grid.dim;
    let apply = |x: &[f64], out: &mut [f64]| {
        // x is a packed scalar (component slice); embed for the stencil calls
        for i in 0..xl {
            out[i] = rho[i] * x[i];
        }
        for axis in 0..d {
            let n = grid.nx[axis];
            let dx2 = grid.dx[axis] * grid.dx[axis];
            for i in 0..xl {
                let idx = grid.x_decompose(i);
                let mut idp = idx;
                idp[axis] = (idx[axis] + 1) % n;
                let mut idm = idx;
                idm[axis] = (idx[axis] + n - 1) % n;
                out[i] -=
                    dt_mu * (x[grid.x_compose(&idp)] - 2.0 * x[i] + x[grid.x_compose(&idm)]) / dx2;
            }
        }
    };
    let _ = comp;
    let mut x: Vec<f64> = x0.to_vec();
    let mut ax = vec![0.0; xl];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect();
    let bnorm = pairwise_sum(&b.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; xl]);
    }
    let mut p = r.clone();
    let mut rr = pairwise_sum(&r.iter().map(|v| v * v).collect::<Vec<_>>());
    if rr.sqrt() <= tol * bnorm {
        return Ok(x);
    }
    let mut ap = vec![0.0; xl];
    for _ in 0..max_iters {
        apply(&p, &mut ap);
        let pap = pairwise_sum(
            &p.iter()
                .zip(ap.iter())
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        );
        let alpha = rr / pap;
        for i in 0..xl {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = pairwise_sum(&r.iter().map(|v| v * v).collect::<Vec<_>>());
        if rr_new.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..xl {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(SolverError::CgNoConvergence {
        iterations: max_iters,
        residual: rr.sqrt() / bnorm,
    })
}

/// One step of the linearized fluid system: Heun on the hyperbolic part
/// (second-order upwind advection, central pressure/divergence coupling,
/// drag source), then the viscous term handled implicitly (backward Euler
/// via conjugate gradient) or explicitly under the diffusive CFL.
pub fn fluid_step(
    inp: &FluidStepInputs<'_>,
    grid: &PhaseGrid,
    params: &FluidStepParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = grid.dim;
    let xl = grid.x_len();
    grid.check_x_shape(inp.h.len(), "symmetrized density")?;
    grid.check_xvec_shape(inp.u.len(), "fluid velocity")?;
    grid.check_x_shape(inp.h_coeff.len(), "coefficient density")?;
    grid.check_xvec_shape(inp.u_coeff.len(), "coefficient velocity")?;
    grid.check_xvec_shape(inp.drag.len(), "drag density")?;
    if let Some(s) = inp.h_source {
        grid.check_x_shape(s.len(), "h source")?;
    }
    if let Some(s) = inp.u_source {
        grid.check_xvec_shape(s.len(), "u source")?;
    }
    for (i, &f) in inp.drag.iter().enumerate() {
        if !f.is_finite() {
            return Err(SolverError::NonFinite {
                what: "drag forcing".into(),
                node: i / d,
            });
        }
    }

    // coefficient floor and derived coefficient fields
    let gamma = inp.gamma;
    let expo = 2.0 / (gamma - 1.0);
    let mut rho_coeff = vec![0.0; xl];
    for i in 0..xl {
        let base = 1.0 + inp.h_coeff[i];
        if base < params.coeff_floor {
            return Err(SolverError::Positivity {
                what: "coefficient symmetrized density (floor delta/2)".into(),
                node: i,
                value: base,
            });
        }
        rho_coeff[i] = base.powf(expo);
    }

    // CFL: acoustic + advective; diffusive only in the explicit branch.
    // sound speed of the symmetrized system: c = sqrt(gamma) * (1 + h)
    let mut umax = 0.0f64;
    let mut cmax = 0.0f64;
    let mut rho_min = f64::INFINITY;
    for i in 0..xl {
        let mut us = 0.0;
        for c in 0..d {
            us += inp.u_coeff[i * d + c] * inp.u_coeff[i * d + c];
        }
        umax = umax.max(us.sqrt());
        cmax = cmax.max(gamma.sqrt() * (1.0 + inp.h_coeff[i]));
        rho_min = rho_min.min(rho_coeff[i]);
    }
    let dx_min = grid.dx[..d].iter().cloned().fold(f64::INFINITY, f64::min);
    let mut limit = params.cfl * dx_min / (umax + cmax);
    if !params.viscous_implicit {
        let diff_limit = params.cfl * dx_min * dx_min * rho_min / (2.0 * d as f64 * inp.mu);
        limit = limit.min(diff_limit);
    }
    if inp.dt > limit {
        return Err(SolverError::CflViolation {
            dt: inp.dt,
            limit,
            what: "fluid step".into(),
        });
    }

    let gm1_half = 0.5 * (gamma - 1.0);
    let press_coeff = 2.0 * gamma / (gamma - 1.0);
    let dt = inp.dt;

    let rhs = |h: &[f64], u: &[f64], rh: &mut [f64], ru: &mut [f64]| {
        for i in 0..xl {
            // advection of h by the coefficient velocity (2nd-order upwind)
            let mut adv_h = 0.0;
            for ax in 0..d {
                let uc = inp.u_coeff[i * d + ax];
                let st = if uc >= 0.0 {
                    Stencil::UpwindPos
                } else {
                    Stencil::UpwindNeg
                };
                adv_h += uc * scalar_derivative(h, grid, i, ax, st);
            }
            // divergence of the advanced velocity (central)
            let mut divu = 0.0;
            for ax in 0..d {
                divu += vector_derivative(u, grid, i, ax, ax, Stencil::Central);
            }
            rh[i] = -adv_h - gm1_half * (1.0 + inp.h_coeff[i]) * divu
                + inp.h_source.map_or(0.0, |s| s[i]);
            for c in 0..d {
                let mut adv_u = 0.0;
                for ax in 0..d {
                    let uc = inp.u_coeff[i * d + ax];
                    let st = if uc >= 0.0 {
                        Stencil::UpwindPos
                    } else {
                        Stencil::UpwindNeg
                    };
                    adv_u += uc * vector_derivative(u, grid, i, c, ax, st);
                }
                let grad_h = scalar_derivative(h, grid, i, c, Stencil::Central);
                ru[i * d + c] =
                    -adv_u - press_coeff * (1.0 + inp.h_coeff[i]) * grad_h - inp.drag[i * d + c]
                        + inp.u_source.map_or(0.0, |s| s[i * d + c]);
            }
        }
    };

    // Heun (explicit trapezoid) on the hyperbolic part with frozen coefficients
    let mut k1h = vec![0.0; xl];
    let mut k1u = vec![0.0; xl * d];
    rhs(inp.h, inp.u, &mut k1h, &mut k1u);
    let mut h_pred = vec![0.0; xl];
    let mut u_pred = vec![0.0; xl * d];
    for i in 0..xl {
        h_pred[i] = inp.h[i] + dt * k1h[i];
        for c in 0..d {
            u_pred[i * d + c] = inp.u[i * d + c] + dt * k1u[i * d + c];
        }
    }
    let mut k2h = vec![0.0; xl];
    let mut k2u = vec![0.0; xl * d];
    rhs(&h_pred, &u_pred, &mut k2h, &mut k2u);
    let mut h_new = vec![0.0; xl];
    let mut u_star = vec![0.0; xl * d];
    for i in 0..xl {
        h_new[i] = inp.h[i] + 0.5 * dt * (k1h[i] + k2h[i]);
        for c in 0..d {
            u_star[i * d + c] = inp.u[i * d + c] + 0.5 * dt * (k1u[i * d + c] + k2u[i * d + c]);
        }
    }

    // viscous term mu Lap u / rho_coeff
    let mut u_new = vec![0.0; xl * d];
    if params.viscous_implicit {
        for c in 0..d {
            let b: Vec<f64> = (0..xl).map(|i| rho_coeff[i] * u_star[i * d + c]).collect();
            let x0: Vec<f64> = (0..xl).map(|i| u_star[i * d + c]).collect();
            let sol = cg_viscous_solve(
                &rho_coeff,
                dt * inp.mu,
                &b,
                &x0,
                grid,
                c,
                params.cg_tol,
                params.cg_max_iters,
            )?;
            for i in 0..xl {
                u_new[i * d + c] = sol[i];
            }
        }
    } else {
        for i in 0..xl {
            for c in 0..d {
                u_new[i * d + c] = u_star[i * d + c]
                    + dt * inp.mu * laplacian_component(&u_star, grid, i, c) / rho_coeff[i];
            }
        }
    }

    // positivity of the advanced symmetrized density
    for (i, &h) in h_new.iter().enumerate() {
        if !(1.0 + h > 0.0) {
            return Err(SolverError::Positivity {
                what: "advanced symmetrized density".into(),
                node: i,
                value: 1.0 + h,
            });
        }
        if !h.is_finite() {
            return Err(SolverError::NonFinite {
                what: "fluid step (h)".into(),
                node: i,
            });
        }
    }
    for (i, &u) in u_new.iter().enumerate() {
        if !u.is_finite() {
            return Err(SolverError::NonFinite {
                what: "fluid step (u)".into(),
                node: i / d,
            });
        }
    }

    Ok((h_new, u_new))
}
