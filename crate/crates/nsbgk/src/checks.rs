//! Built-in randomized invariant suite behind `nsbgk check`.

use crate::config::SimConfig;
use crate::diagnostics::weighted_lp_norm;
use crate::error::Result;
use crate::grid::{build_phase_grid, weight_value, GridSpec};
use crate::maxwellian::{bgk_operator, discrete_maxwellian, MaxwellianParams};
use crate::moments::{compute_moments, coupling_force_density};
use crate::state::KineticState;
use crate::util::SplitMix64;

/// Run the quick invariant bundle, reporting each check through `report`
/// (name, passed, detail). Returns the number of failures.
pub fn run_builtin_checks(seed: u64, report: &mut dyn FnMut(&str, bool, String)) -> Result<usize> {
    let mut failures = 0usize;
    let mut check = |name: &str, pass: bool, detail: String, failures: &mut usize| {
        if !pass {
            *failures += 1;
        }
        report(name, pass, detail);
    };

    let grid = build_phase_grid(&GridSpec::uniform(1, 1.0, 16, 8.0, 64))?;
    let cfg = SimConfig::default();
    let mut rng = SplitMix64::new(seed);

    // weight symmetry
    {
        let mut worst = 0.0f64;
        for iv in 0..grid.v_len() {
            let v = grid.v_node(iv)[0];
            worst = worst.max((weight_value(&[v], cfg.k) - weight_value(&[-v], cfg.k)).abs());
        }
        check(
            "weight_even_symmetry",
            worst == 0.0,
            format!("max asymmetry {worst:e}"),
            &mut failures,
        );
    }

    // symmetrized round trip
    {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let rho = rng.uniform(0.05, 1000.0);
            let h = crate::fluid::to_symmetrized(&[rho], cfg.gamma)?;
            let back = crate::fluid::from_symmetrized(&h, cfg.gamma)?;
            worst = worst.max(((back[0] - rho) / rho).abs());
        }
        check(
            "symmetrized_round_trip",
            worst < 1e-13,
            format!("max relative error {worst:e}"),
            &mut failures,
        );
    }

    // grid determinism
    {
        let spec = GridSpec::uniform(2, 2.0, 8, 5.0, 12);
        let a = build_phase_grid(&spec)?;
        let b = build_phase_grid(&spec)?;
        check(
            "grid_rebuild_identical",
            a == b,
            "bit-identical rebuild".into(),
            &mut failures,
        );
    }

    // BGK cancellation on random data
    {
        let mut worst = 0.0f64;
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
            let q = bgk_operator(&f, &grid, cfg.alpha, cfg.t_ref, cfg.vacuum_floor)?;
            for ix in 0..grid.x_len() {
                let mut m = [0.0f64; 3];
                for iv in 0..grid.v_len() {
                    let w = grid.v_weight(iv);
                    let v = grid.v_node(iv)[0];
                    let qv = q[grid.phase_index(ix, iv)];
                    m[0] += qv * w;
                    m[1] += v * qv * w;
                    m[2] += v * v * qv * w;
                }
                let scale = fmax * grid.v_max[0] * grid.v_max[0];
                for mm in m {
                    worst = worst.max(mm.abs() / scale);
                }
            }
        }
        check(
            "bgk_moment_cancellation",
            worst <= 1e-12,
            format!("worst scaled moment {worst:e}"),
            &mut failures,
        );
    }

    // drag identity F = rho_f (u - u_f)
    {
        let params = MaxwellianParams {
            rho: (0..grid.x_len()).map(|_| rng.uniform(0.5, 2.0)).collect(),
            u: (0..grid.x_len()).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            t: (0..grid.x_len()).map(|_| rng.uniform(0.5, 2.0)).collect(),
        };
        let f = KineticState::new(discrete_maxwellian(&params, &grid)?, 0.0);
        let u: Vec<f64> = (0..grid.x_len()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let force = coupling_force_density(&f, &u, &grid)?;
        let m = compute_moments(&f, &grid, cfg.t_ref, cfg.vacuum_floor, None)?;
        let mut worst = 0.0f64;
        for ix in 0..grid.x_len() {
            let expect = m.rho_f[ix] * (u[ix] - m.u_f[ix]);
            worst = worst.max((force[ix] - expect).abs() / expect.abs().max(1e-6));
        }
        check(
            "drag_moment_identity",
            worst < 1e-12,
            format!("worst relative gap {worst:e}"),
            &mut failures,
        );
    }

    // norm homogeneity and triangle inequality
    {
        let mut worst_h = 0.0f64;
        let mut worst_t: f64 = 0.0;
        for _ in 0..20 {
            let mut a = vec![0.0; grid.phase_len()];
            let mut b = vec![0.0; grid.phase_len()];
            for i in 0..grid.phase_len() {
                let v = grid.v_node(i % grid.v_len())[0];
                let damp = (-(v * v) / 4.0).exp();
                a[i] = rng.uniform(-1.0, 1.0) * damp;
                b[i] = rng.uniform(-1.0, 1.0) * damp;
            }
            let c = rng.uniform(0.1, 5.0);
            let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
            let na = weighted_lp_norm(&KineticState::new(a.clone(), 0.0), &grid, 2, cfg.k)?;
            let ns = weighted_lp_norm(&KineticState::new(scaled, 0.0), &grid, 2, cfg.k)?;
            worst_h = worst_h.max((ns - c * na).abs() / (c * na).max(1e-30));
            let sum: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
            let nb = weighted_lp_norm(&KineticState::new(b, 0.0), &grid, 2, cfg.k)?;
            let nsum = weighted_lp_norm(&KineticState::new(sum, 0.0), &grid, 2, cfg.k)?;
            worst_t = worst_t.max(nsum - (na + nb));
        }
        check(
            "norm_homogeneity",
            worst_h < 1e-12,
            format!("worst relative gap {worst_h:e}"),
            &mut failures,
        );
        check(
            "norm_triangle_inequality",
            worst_t <= 1e-12,
            format!("worst excess {worst_t:e}"),
            &mut failures,
        );
    }

    Ok(failures)
}
