//! Discrete local Maxwellian with a conservative projection, the BGK
//! relaxation operator, and the envelope / Lipschitz diagnostics.

use crate::error::{Result, SolverError};
use crate::grid::{v_bracket, PhaseGrid, MAX_DIM};
use crate::moments::{compute_moments, MacroFields};
use crate::state::KineticState;
use crate::util::{pairwise_sum, solve_dense};

/// Per-node Gaussian parameters (density, bulk velocity, temperature).
#[derive(Debug, Clone)]
pub struct MaxwellianParams {
    pub rho: Vec<f64>,
    /// Interleaved components u[i * dim + c].
    pub u: Vec<f64>,
    pub t: Vec<f64>,
}

impl From<&MacroFields> for MaxwellianParams {
    fn from(m: &MacroFields) -> Self {
        MaxwellianParams {
            rho: m.rho_f.clone(),
            u: m.u_f.clone(),
            t: m.t_f.clone(),
        }
    }
}

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITERS: usize = 50;

/// Exponential-family parameters of the projected Maxwellian per spatial
/// node: log m(v) = a + b . v + c |v|^2. Inactive (zero-density) nodes carry
/// `active = false` and must not be evaluated.
#[derive(Debug, Clone)]
pub struct MaxwellianFit {
    pub a: Vec<f64>,
    /// Interleaved components b[i * dim + c].
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub active: Vec<bool>,
}

impl MaxwellianFit {
    /// Fit with every node inactive (zero relaxation target everywhere).
    pub fn inactive(x_len: usize, dim: usize) -> Self {
        MaxwellianFit {
            a: vec![f64::NEG_INFINITY; x_len],
            b: vec![0.0; x_len * dim],
            c: vec![0.0; x_len],
            active: vec![false; x_len],
        }
    }

    /// Evaluate the fitted density at a velocity for one spatial node.
    #[inline]
    pub fn eval(&self, node: usize, dim: usize, v: &[f64]) -> f64 {
        if !self.active[node] {
            return 0.0;
        }
        let mut expo = self.a[node];
        let mut vsq = 0.0;
        for c in 0..dim {
            expo += self.b[node * dim + c] * v[c];
            vsq += v[c] * v[c];
        }
        expo += self.c[node] * vsq;
        expo.exp()
    }
}

/// Sampled Gaussian corrected by a multiplicative exponential-family factor
/// so the discrete moments match (rho, rho u, d rho T + rho |u|^2) exactly.
/// The correction is solved per spatial node by Newton on the d+2 moment
/// equations. rho = 0 nodes yield zeros; T <= 0 at an active node is a hard
/// error, as is a projection that fails to converge (under-resolved Gaussian).
pub fn discrete_maxwellian(params: &MaxwellianParams, grid: &PhaseGrid) -> Result<Vec<f64>> {
    Ok(discrete_maxwellian_with_fit(params, grid)?.0)
}

/// Same as `discrete_maxwellian`, additionally returning the fitted
/// exponential-family parameters (used for exact off-grid source evaluation
/// in the transport step).
pub fn discrete_maxwellian_with_fit(
    params: &MaxwellianParams,
    grid: &PhaseGrid,
) -> Result<(Vec<f64>, MaxwellianFit)> {
    let d = grid.dim;
    let xl = grid.x_len();
    let vl = grid.v_len();
    grid.check_x_shape(params.rho.len(), "maxwellian density")?;
    grid.check_xvec_shape(params.u.len(), "maxwellian velocity")?;
    grid.check_x_shape(params.t.len(), "maxwellian temperature")?;

    let mut out = vec![0.0; xl * vl];
    let mut fit = MaxwellianFit {
        a: vec![f64::NEG_INFINITY; xl],
        b: vec![0.0; xl * d],
        c: vec![0.0; xl],
        active: vec![false; xl],
    };
    let nd = d + 2;
    let mut theta = vec![0.0; nd];
    let mut jac = vec![0.0; nd * nd];
    let mut rhs = vec![0.0; nd];
    let mut row = vec![0.0; vl];

    for ix in 0..xl {
        let rho = params.rho[ix];
        if rho <= 0.0 {
            continue; // zero block stays zero
        }
        let t = params.t[ix];
        if t <= 0.0 {
            return Err(SolverError::NonpositiveTemperature { node: ix, value: t });
        }
        let u = &params.u[ix * d..(ix + 1) * d];
        let mut usq = 0.0;
        for c in 0..d {
            usq += u[c] * u[c];
        }
        // target moments: mass, momentum, second raw moment
        let mut target = vec![0.0; nd];
        target[0] = rho;
        for c in 0..d {
            target[1 + c] = rho * u[c];
        }
        target[nd - 1] = d as f64 * rho * t + rho * usq;
        // residual scales for the relative convergence test
        let mut scale = vec![0.0; nd];
        scale[0] = rho;
        for c in 0..d {
            scale[1 + c] = rho * (1.0 + u[c].abs());
        }
        scale[nd - 1] = target[nd - 1].abs() + rho;

        // exponential-family parameters: log m = a + b . v + c |v|^2,
        // initialized from the continuum Gaussian
        theta[0] =
            (rho / (2.0 * std::f64::consts::PI * t).powf(d as f64 / 2.0)).ln() - usq / (2.0 * t);
        for c in 0..d {
            theta[1 + c] = u[c] / t;
        }
        theta[nd - 1] = -1.0 / (2.0 * t);

        // Newton on the moment residuals; once inside the contract tolerance,
        // keep polishing toward the quadrature round-off floor (quadratic
        // convergence makes this one or two extra passes) so rebuilt
        // Maxwellians reproduce each other to near machine precision.
        let mut converged = false;
        let mut prev_worst = f64::INFINITY;
        let mut theta_row = theta.clone();
        for _ in 0..NEWTON_MAX_ITERS {
            for v in jac.iter_mut() {
                *v = 0.0;
            }
            theta_row.copy_from_slice(&theta);
            let mut moments = vec![0.0; nd];
            let mut phi = [0.0f64; MAX_DIM + 2];
            for iv in 0..vl {
                let v = grid.v_node(iv);
                let vsq = grid.v_sq(iv);
                let mut expo = theta[0] + theta[nd - 1] * vsq;
                for c in 0..d {
                    expo += theta[1 + c] * v[c];
                }
                if expo > 500.0 {
                    return Err(SolverError::Projection {
                        node: ix,
                        reason: "exponent overflow during Newton iteration".into(),
                    });
                }
                let m = expo.exp() * grid.v_weight(iv);
                row[iv] = m;
                phi[0] = 1.0;
                for c in 0..d {
                    phi[1 + c] = v[c];
                }
                phi[nd - 1] = vsq;
                for i in 0..nd {
                    moments[i] += m * phi[i];
                    for j in i..nd {
                        jac[i * nd + j] += m * phi[i] * phi[j];
                    }
                }
            }
            for i in 0..nd {
                for j in 0..i {
                    jac[i * nd + j] = jac[j * nd + i];
                }
            }
            let mut worst = 0.0f64;
            for i in 0..nd {
                rhs[i] = moments[i] - target[i];
                worst = worst.max(rhs[i].abs() / scale[i]);
            }
            if worst <= NEWTON_TOL {
                converged = true;
                // stop at the round-off floor or when progress stalls
                if worst <= 1e-15 || worst >= prev_worst {
                    break;
                }
            }
            prev_worst = worst;
            if !solve_dense(&mut jac, &mut rhs, nd) {
                if converged {
                    break;
                }
                return Err(SolverError::Projection {
                    node: ix,
                    reason:
                        "singular moment system (temperature under-resolved by the velocity grid)"
                            .into(),
                });
            }
            // damp the step so the exponent moves by at most ~20 anywhere on
            // the box; hot or strongly truncated targets (c near or above
            // zero is legitimate on a bounded velocity box) then stay inside
            // Newton's basin instead of overflowing
            let mut vmax2 = 0.0f64;
            for ax in 0..d {
                vmax2 += grid.v_max[ax] * grid.v_max[ax];
            }
            let mut move_max = rhs[0].abs() + rhs[nd - 1].abs() * vmax2;
            for c in 0..d {
                move_max += rhs[1 + c].abs() * grid.v_max[c];
            }
            let damp = if move_max > 20.0 {
                20.0 / move_max
            } else {
                1.0
            };
            for i in 0..nd {
                theta[i] -= damp * rhs[i];
            }
        }
        if !converged {
            return Err(SolverError::Projection {
                node: ix,
                reason: format!(
                    "Newton did not reach {NEWTON_TOL:e} within {NEWTON_MAX_ITERS} iterations"
                ),
            });
        }
        let base = ix * vl;
        for iv in 0..vl {
            out[base + iv] = row[iv] / grid.v_weight(iv);
        }
        // the parameters that produced `row`, not any later Newton update
        fit.a[ix] = theta_row[0];
        for c in 0..d {
            fit.b[ix * d + c] = theta_row[1 + c];
        }
        fit.c[ix] = theta_row[nd - 1];
        fit.active[ix] = true;
    }
    Ok((out, fit))
}

/// BGK relaxation Q = rho_f^alpha (M(f) - f) with the collision frequency
/// set to zero on vacuum-masked nodes.
pub fn bgk_operator(
    f: &KineticState,
    grid: &PhaseGrid,
    alpha: f64,
    t_ref: f64,
    vacuum_floor: f64,
) -> Result<Vec<f64>> {
    let macro_fields = compute_moments(f, grid, t_ref, vacuum_floor, None)?;
    bgk_operator_with(f, grid, alpha, &macro_fields)
}

/// Same as `bgk_operator` with moments already in hand.
pub fn bgk_operator_with(
    f: &KineticState,
    grid: &PhaseGrid,
    alpha: f64,
    macro_fields: &MacroFields,
) -> Result<Vec<f64>> {
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
    let m = discrete_maxwellian(&active, grid)?;
    let vl = grid.v_len();
    let mut q = vec![0.0; grid.phase_len()];
    for ix in 0..grid.x_len() {
        if macro_fields.mask[ix] {
            continue; // no relaxation without particles
        }
        let nu = macro_fields.rho_f[ix].powf(alpha);
        let base = ix * vl;
        for iv in 0..vl {
            q[base + iv] = nu * (m[base + iv] - f.values[base + iv]);
        }
    }
    Ok(q)
}

/// Collision frequencies per spatial node (rho_f^alpha, zero at vacuum).
pub fn collision_frequency(macro_fields: &MacroFields, alpha: f64) -> Vec<f64> {
    macro_fields
        .rho_f
        .iter()
        .zip(macro_fields.mask.iter())
        .map(|(&r, &m)| if m { 0.0 } else { r.powf(alpha) })
        .collect()
}

/// Result of scanning the weighted Maxwellian against its Gaussian envelope
/// with doubled variance: finite values demonstrate the envelope bound with
/// an empirical constant.
#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    pub max_ratio: f64,
    pub at_x: usize,
    pub at_v: usize,
    /// |v| where the maximum is attained.
    pub v_mag_at_max: f64,
    pub active_nodes: usize,
}

/// Max over active (x, v) of  e^{<v>^k} M / [rho_f (2 pi T_f)^{-d/2}
/// e^{-|v-u_f|^2 / (4 T_f)}].
pub fn maxwellian_envelope_check(
    f: &KineticState,
    grid: &PhaseGrid,
    k: f64,
    t_ref: f64,
    vacuum_floor: f64,
) -> Result<EnvelopeReport> {
    let d = grid.dim;
    let macro_fields = compute_moments(f, grid, t_ref, vacuum_floor, None)?;
    let m = discrete_maxwellian(&MaxwellianParams::from(&macro_fields), grid)?;
    let vl = grid.v_len();
    let mut best = 0.0f64;
    let mut at = (0usize, 0usize);
    let mut active = 0usize;
    for ix in 0..grid.x_len() {
        if macro_fields.mask[ix] || macro_fields.t_f[ix] <= 0.0 {
            continue;
        }
        active += 1;
        let t = macro_fields.t_f[ix];
        let rho = macro_fields.rho_f[ix];
        let norm = rho / (2.0 * std::f64::consts::PI * t).powf(d as f64 / 2.0);
        let u = &macro_fields.u_f[ix * d..(ix + 1) * d];
        let base = ix * vl;
        for iv in 0..vl {
            let v = grid.v_node(iv);
            let mut rel = 0.0;
            for c in 0..d {
                let dv = v[c] - u[c];
                rel += dv * dv;
            }
            let envelope = norm * (-rel / (4.0 * t)).exp();
            if envelope <= 0.0 {
                continue;
            }
            let w = v_bracket(&v[..d]).powf(k).exp();
            let ratio = w * m[base + iv] / envelope;
            if ratio > best {
                best = ratio;
                at = (ix, iv);
            }
        }
    }
    let v = grid.v_node(at.1);
    let mut vmag = 0.0;
    for c in 0..d {
        vmag += v[c] * v[c];
    }
    Ok(EnvelopeReport {
        max_ratio: best,
        at_x: at.0,
        at_v: at.1,
        v_mag_at_max: vmag.sqrt(),
        active_nodes: active,
    })
}

/// Moment box the Lipschitz probe checks its inputs against.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzHypothesis {
    /// Upper bound on rho_f + |u_f| + T_f.
    pub c1: f64,
    /// Lower bound on rho_f + T_f.
    pub c2: f64,
    /// Explicit temperature floor (degenerate Gaussians have no uniform
    /// Lipschitz constant).
    pub t_floor: f64,
}

#[derive(Debug, Clone)]
pub struct LipschitzProbe {
    /// |M(f) - M(g)|_{L2_k} / |f - g|_{L2_k}; zero when the states coincide.
    pub ratio: f64,
    pub hypothesis_ok_f: bool,
    pub hypothesis_ok_g: bool,
    /// Set when either state leaves the hypothesis box.
    pub warning: bool,
}

fn hypothesis_ok(m: &MacroFields, d: usize, hyp: &LipschitzHypothesis) -> bool {
    for ix in 0..m.rho_f.len() {
        if m.mask[ix] {
            return false;
        }
        let mut umag = 0.0;
        for c in 0..d {
            umag += m.u_f[ix * d + c] * m.u_f[ix * d + c];
        }
        let umag = umag.sqrt();
        if m.rho_f[ix] + umag + m.t_f[ix] > hyp.c1 {
            return false;
        }
        if m.rho_f[ix] + m.t_f[ix] < hyp.c2 {
            return false;
        }
        if m.t_f[ix] < hyp.t_floor {
            return false;
        }
    }
    true
}

/// Empirical Lipschitz ratio of the Maxwellian map in the weighted L2 norm.
pub fn maxwellian_lipschitz_probe(
    f: &KineticState,
    g: &KineticState,
    grid: &PhaseGrid,
    k: f64,
    t_ref: f64,
    vacuum_floor: f64,
    hyp: &LipschitzHypothesis,
) -> Result<LipschitzProbe> {
    let d = grid.dim;
    let mf = compute_moments(f, grid, t_ref, vacuum_floor, None)?;
    let mg = compute_moments(g, grid, t_ref, vacuum_floor, None)?;
    let ok_f = hypothesis_ok(&mf, d, hyp);
    let ok_g = hypothesis_ok(&mg, d, hyp);

    let maxf = discrete_maxwellian(&MaxwellianParams::from(&mf), grid)?;
    let maxg = discrete_maxwellian(&MaxwellianParams::from(&mg), grid)?;

    let wx = grid.x_weight();
    let vl = grid.v_len();
    let mut num_terms = Vec::with_capacity(grid.phase_len());
    let mut den_terms = Vec::with_capacity(grid.phase_len());
    for ix in 0..grid.x_len() {
        let base = ix * vl;
        for iv in 0..vl {
            let v = grid.v_node(iv);
            let w = (2.0 * v_bracket(&v[..d]).powf(k)).exp() * grid.v_weight(iv) * wx;
            let dm = maxf[base + iv] - maxg[base + iv];
            let df = f.values[base + iv] - g.values[base + iv];
            num_terms.push(w * dm * dm);
            den_terms.push(w * df * df);
        }
    }
    let num = pairwise_sum(&num_terms).sqrt();
    let den = pairwise_sum(&den_terms).sqrt();
    let ratio = if den == 0.0 { 0.0 } else { num / den };
    Ok(LipschitzProbe {
        ratio,
        hypothesis_ok_f: ok_f,
        hypothesis_ok_g: ok_g,
        warning: !(ok_f && ok_g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_phase_grid, GridSpec};
    use crate::util::SplitMix64;

    fn grid_1d() -> PhaseGrid {
        build_phase_grid(&GridSpec::uniform(1, 1.0, 4, 8.0, 64)).unwrap()
    }

    fn uniform_params(grid: &PhaseGrid, rho: f64, u: f64, t: f64) -> MaxwellianParams {
        MaxwellianParams {
            rho: vec![rho; grid.x_len()],
            u: vec![u; grid.x_len() * grid.dim],
            t: vec![t; grid.x_len()],
        }
    }

    fn discrete_moments(vals: &[f64], grid: &PhaseGrid, ix: usize) -> (f64, f64, f64) {
        let vl = grid.v_len();
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for iv in 0..vl {
            let w = grid.v_weight(iv);
            let v = grid.v_node(iv)[0];
            m0 += vals[ix * vl + iv] * w;
            m1 += v * vals[ix * vl + iv] * w;
            m2 += v * v * vals[ix * vl + iv] * w;
        }
        (m0, m1, m2)
    }

    #[test]
    fn projection_makes_standard_moments_exact() {
        let grid = grid_1d();
        let m = discrete_maxwellian(&uniform_params(&grid, 1.0, 0.0, 1.0), &grid).unwrap();
        let (m0, m1, m2) = discrete_moments(&m, &grid, 0);
        assert!((m0 - 1.0).abs() < 1e-13);
        assert!(m1.abs() < 1e-13);
        assert!((m2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_density_gives_zero_array() {
        let grid = grid_1d();
        let m = discrete_maxwellian(&uniform_params(&grid, 0.0, 0.0, 1.0), &grid).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonpositive_temperature_is_fatal() {
        let grid = grid_1d();
        let err = discrete_maxwellian(&uniform_params(&grid, 1.0, 0.0, 0.0), &grid).unwrap_err();
        assert!(matches!(err, SolverError::NonpositiveTemperature { .. }));
    }

    #[test]
    fn projected_values_close_to_analytic_gaussian() {
        // dv = 0.125 <= sqrt(T)/8; v_max = 10 keeps the truncated-tail
        // correction (the only projection residual) far below the tolerance
        let grid = build_phase_grid(&GridSpec::uniform(1, 1.0, 4, 10.0, 160)).unwrap();
        let (rho, u, t) = (2.0, 0.3, 1.5);
        let m = discrete_maxwellian(&uniform_params(&grid, rho, u, t), &grid).unwrap();
        let norm = rho / (2.0 * std::f64::consts::PI * t).sqrt();
        for iv in 0..grid.v_len() {
            let v = grid.v_node(iv)[0];
            if v.abs() > 5.0 {
                continue; // compare at interior nodes where the tail is resolved
            }
            let analytic = norm * (-(v - u) * (v - u) / (2.0 * t)).exp();
            let rel = (m[iv] - analytic).abs() / analytic;
            assert!(rel < 1e-8, "node {iv}: rel {rel:e}");
        }
    }

    #[test]
    fn bgk_vanishes_on_its_own_maxwellian() {
        let grid = grid_1d();
        let m = discrete_maxwellian(&uniform_params(&grid, 1.7, -0.4, 0.8), &grid).unwrap();
        let f = KineticState::new(m, 0.0);
        let q = bgk_operator(&f, &grid, 1.0, 1.0, 1e-12).unwrap();
        let qmax = q.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(qmax <= 1e-12, "max |Q| = {qmax:e}");
    }

    #[test]
    fn constant_collision_frequency_at_alpha_zero() {
        let grid = grid_1d();
        let mut rng = SplitMix64::new(3);
        let mut vals = vec![0.0; grid.phase_len()];
        for (iv, v) in vals.iter_mut().enumerate() {
            let vel = grid.v_node(iv % grid.v_len())[0];
            *v = (0.5 + rng.next_f64()) * (-(vel * vel) / 3.0).exp();
        }
        let f = KineticState::new(vals, 0.0);
        let macro_fields = compute_moments(&f, &grid, 1.0, 1e-12, None).unwrap();
        let nu = collision_frequency(&macro_fields, 0.0);
        for (ix, &n) in nu.iter().enumerate() {
            assert_eq!(n, if macro_fields.mask[ix] { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn bgk_moments_cancel_for_random_nonnegative_input() {
        let grid = grid_1d();
        let mut rng = SplitMix64::new(19);
        for _ in 0..5 {
            let mut vals = vec![0.0; grid.phase_len()];
            for ix in 0..grid.x_len() {
                for iv in 0..grid.v_len() {
                    let v = grid.v_node(iv)[0];
                    vals[grid.phase_index(ix, iv)] = rng.next_f64() * (-(v * v) / 5.0).exp();
                }
            }
            let fmax = vals.iter().cloned().fold(0.0f64, f64::max);
            let f = KineticState::new(vals, 0.0);
            let q = bgk_operator(&f, &grid, 0.7, 1.0, 1e-12).unwrap();
            let tol = 1e-12 * fmax * grid.v_max[0] * grid.v_max[0];
            for ix in 0..grid.x_len() {
                let (m0, m1, m2) = discrete_moments(&q, &grid, ix);
                assert!(m0.abs() <= tol, "mass moment {m0:e}");
                assert!(m1.abs() <= tol, "momentum moment {m1:e}");
                assert!(m2.abs() <= tol, "energy moment {m2:e}");
            }
        }
    }

    #[test]
    fn euler_bgk_update_preserves_positivity() {
        let grid = grid_1d();
        let mut rng = SplitMix64::new(5);
        let mut vals = vec![0.0; grid.phase_len()];
        for ix in 0..grid.x_len() {
            for iv in 0..grid.v_len() {
                let v = grid.v_node(iv)[0];
                vals[grid.phase_index(ix, iv)] = rng.next_f64() * (-(v * v) / 4.0).exp();
            }
        }
        let f = KineticState::new(vals, 0.0);
        let macro_fields = compute_moments(&f, &grid, 1.0, 1e-12, None).unwrap();
        let nu_max = collision_frequency(&macro_fields, 1.0)
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        let dt = 1.0 / nu_max; // dt * nu <= 1
        let q = bgk_operator_with(&f, &grid, 1.0, &macro_fields).unwrap();
        for (i, &fi) in f.values.iter().enumerate() {
            assert!(fi + dt * q[i] >= -1e-14, "negative update at {i}");
        }
    }

    #[test]
    fn envelope_ratio_at_center_is_e_and_grows_with_bulk_speed() {
        let grid = grid_1d();
        let k = 1.5;
        let mut prev_max = 0.0;
        for (step, u0) in [0.0, 1.0, 2.0].iter().enumerate() {
            let m = discrete_maxwellian(&uniform_params(&grid, 1.0, *u0, 1.0), &grid).unwrap();
            let f = KineticState::new(m.clone(), 0.0);
            let report = maxwellian_envelope_check(&f, &grid, k, 1.0, 1e-12).unwrap();
            assert!(report.max_ratio.is_finite());
            assert!(
                report.v_mag_at_max < grid.v_max[0],
                "max at the velocity boundary"
            );
            if step == 0 {
                // at v = u = 0 both Gaussians cancel and the weight is e^1;
                // find the node closest to zero (cell centers straddle 0)
                let mut best_iv = 0;
                for iv in 0..grid.v_len() {
                    if grid.v_node(iv)[0].abs() < grid.v_node(best_iv)[0].abs() {
                        best_iv = iv;
                    }
                }
                let v = grid.v_node(best_iv);
                let t = 1.0;
                let norm = 1.0 / (2.0 * std::f64::consts::PI * t).sqrt();
                let envelope = norm * (-(v[0] * v[0]) / (4.0 * t)).exp();
                let ratio = v_bracket(&v[..1]).powf(k).exp() * m[best_iv] / envelope;
                let expect = v_bracket(&v[..1]).powf(k).exp() * (-(v[0] * v[0]) / 4.0).exp(); // analytic value at that node
                assert!((ratio - expect).abs() / expect < 1e-6);
            }
            assert!(report.max_ratio > prev_max, "ratio must grow with |u_f|");
            prev_max = report.max_ratio;
        }
    }

    #[test]
    fn lipschitz_probe_zero_for_identical_states_and_flags_cold_pairs() {
        let grid = grid_1d();
        let hyp = LipschitzHypothesis {
            c1: 6.0,
            c2: 0.5,
            t_floor: 0.05,
        };
        let m = discrete_maxwellian(&uniform_params(&grid, 1.0, 0.1, 1.0), &grid).unwrap();
        let f = KineticState::new(m.clone(), 0.0);
        let probe = maxwellian_lipschitz_probe(&f, &f, &grid, 1.5, 1.0, 1e-12, &hyp).unwrap();
        assert_eq!(probe.ratio, 0.0);
        assert!(!probe.warning);

        // degenerate temperature trips the hypothesis warning
        let cold = discrete_maxwellian(&uniform_params(&grid, 1.0, 0.0, 0.02), &grid).unwrap();
        let g = KineticState::new(cold, 0.0);
        let probe = maxwellian_lipschitz_probe(&f, &g, &grid, 1.5, 1.0, 1e-12, &hyp).unwrap();
        assert!(probe.warning);
        assert!(!probe.hypothesis_ok_g);
    }

    #[test]
    fn lipschitz_ratio_stable_under_halved_perturbations() {
        let grid = grid_1d();
        let hyp = LipschitzHypothesis {
            c1: 8.0,
            c2: 0.5,
            t_floor: 0.05,
        };
        let base = discrete_maxwellian(&uniform_params(&grid, 1.0, 0.2, 1.0), &grid).unwrap();
        let mut rng = SplitMix64::new(23);
        let mut max_ratio = [0.0f64; 2];
        for (which, eps) in [2e-3, 1e-3].iter().enumerate() {
            let mut rng_local = rng.clone();
            for _ in 0..50 {
                let mut fa = base.clone();
                let mut fb = base.clone();
                for iv in 0..grid.v_len() {
                    let v = grid.v_node(iv)[0];
                    let bump = (-(v * v) / 3.0).exp();
                    for ix in 0..grid.x_len() {
                        let i = grid.phase_index(ix, iv);
                        fa[i] += eps * rng_local.next_f64() * bump;
                        fb[i] += eps * rng_local.next_f64() * bump;
                    }
                }
                let probe = maxwellian_lipschitz_probe(
                    &KineticState::new(fa, 0.0),
                    &KineticState::new(fb, 0.0),
                    &grid,
                    1.5,
                    1.0,
                    1e-12,
                    &hyp,
                )
                .unwrap();
                assert!(!probe.warning);
                max_ratio[which] = max_ratio[which].max(probe.ratio);
            }
            rng = rng_local;
        }
        assert!(max_ratio[0].is_finite() && max_ratio[1].is_finite());
        // empirical Lipschitz constant should not move much as the
        // perturbation scale halves
        let rel = (max_ratio[0] - max_ratio[1]).abs() / max_ratio[0].max(1e-12);
        assert!(rel < 0.5, "ratios {max_ratio:?}");
    }
}
