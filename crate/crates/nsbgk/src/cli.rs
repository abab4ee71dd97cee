//! Command-line surface: run, iterate, diagnose, decay, check.

use std::path::{Path, PathBuf};

use crate::diagnostics::{decay_fit, diagnostics_row, positivity_monitor};
use crate::error::{Result, SolverError};
use crate::grid::{build_phase_grid, PhaseGrid};
use crate::io::{
    format_value, parse_config, read_snapshot, write_diagnostics_csv, write_snapshot, FullConfig,
    InitKind,
};
use crate::maxwellian::{discrete_maxwellian, MaxwellianParams};
use crate::state::{FluidState, KineticState};
use crate::stepper::{picard_solve, run_simulation, SystemState};
use crate::util::SplitMix64;

const USAGE: &str = "nsbgk — coupled compressible Navier-Stokes / BGK solver

USAGE:
    nsbgk run      --config <file> --out <dir> [--snapshot-every <n>] [--resume]
    nsbgk iterate  --config <file> [--horizon <t>] [--max-iters <n>] [--tol <e>] [--out <dir>]
    nsbgk diagnose --config <file> --snapshot <dir>
    nsbgk decay    --config <file> [--out <dir>]
    nsbgk check    [--seed <n>]

Exit codes: 0 success, 1 validation/usage error, 2 runtime abort (state dumped).";

/// Build the initial system state described by the config.
pub fn build_initial_state(cfg: &FullConfig, grid: &PhaseGrid) -> Result<SystemState> {
    let xl = grid.x_len();
    let d = grid.dim;
    let init = &cfg.init;
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut rho = vec![init.rho; xl];
    let mut u = vec![0.0; xl * d];
    for i in 0..xl {
        u[i * d] = init.u;
    }
    let mut rho_f_field = vec![init.rho_f; xl];
    let mut u_f_field = vec![0.0; xl * d];
    for i in 0..xl {
        u_f_field[i * d] = init.u_f;
    }

    if init.kind == InitKind::Perturbed {
        let mut rng = SplitMix64::new(cfg.sim.seed);
        // smooth low-mode perturbations with reproducible phases
        for c in 0..d {
            for m in 1..=init.modes {
                let (a1, p1) = (rng.uniform(-1.0, 1.0), rng.uniform(0.0, two_pi));
                let (a2, p2) = (rng.uniform(-1.0, 1.0), rng.uniform(0.0, two_pi));
                let (a3, p3) = (rng.uniform(-1.0, 1.0), rng.uniform(0.0, two_pi));
                for i in 0..xl {
                    let x = grid.x_node(i)[c] / grid.period[c];
                    let phase = two_pi * m as f64 * x;
                    if c == 0 {
                        rho[i] += init.amp * a1 * (phase + p1).sin();
                        rho_f_field[i] += init.amp * a3 * (phase + p3).sin();
                    }
                    u[i * d + c] += init.amp * a2 * (phase + p2).cos();
                }
            }
        }
        // particles co-moving with the fluid keeps the drag gentle
        u_f_field.copy_from_slice(&u);
    }

    let f = match init.kind {
        InitKind::FluidOnly => KineticState::zeros(grid, 0.0),
        _ => {
            let params = MaxwellianParams {
                rho: rho_f_field,
                u: u_f_field,
                t: vec![init.t_f; xl],
            };
            KineticState::new(discrete_maxwellian(&params, grid)?, 0.0)
        }
    };
    let fluid = FluidState::from_density(rho, u, cfg.sim.gamma, 0.0)?;
    SystemState::new(f, fluid, grid, &cfg.sim)
}

struct Args {
    flags: Vec<(String, Option<String>)>,
}

impl Args {
    fn parse(argv: &[String]) -> std::result::Result<Args, String> {
        let mut flags = Vec::new();
        let mut i = 0;
        while i < argv.len() {
            let a = &argv[i];
            if let Some(name) = a.strip_prefix("--") {
                let takes_value = !matches!(name, "resume");
                if takes_value {
                    if i + 1 >= argv.len() {
                        return Err(format!("flag --{name} needs a value"));
                    }
                    flags.push((name.to_string(), Some(argv[i + 1].clone())));
                    i += 2;
                } else {
                    flags.push((name.to_string(), None));
                    i += 1;
                }
            } else {
                return Err(format!("unexpected argument '{a}'"));
            }
        }
        Ok(Args { flags })
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.flags
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, v)| v.as_deref())
    }

    fn has(&self, name: &str) -> bool {
        self.flags.iter().any(|(n, _)| n == name)
    }

    fn check_known(&self, known: &[&str]) -> std::result::Result<(), String> {
        for (n, _) in &self.flags {
            if !known.contains(&n.as_str()) {
                return Err(format!("unknown flag --{n}"));
            }
        }
        Ok(())
    }
}

fn load(config_path: &str) -> Result<(FullConfig, PhaseGrid)> {
    let cfg = parse_config(Path::new(config_path))?;
    let grid = build_phase_grid(&cfg.grid)?;
    Ok((cfg, grid))
}

fn latest_snapshot_dir(out: &Path) -> Option<PathBuf> {
    let mut best: Option<(usize, PathBuf)> = None;
    let entries = std::fs::read_dir(out).ok()?;
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(idx) = name.strip_prefix("snap_") {
            if let Ok(n) = idx.parse::<usize>() {
                if best.as_ref().map_or(true, |(b, _)| n > *b) {
                    best = Some((n, entry.path()));
                }
            }
        }
    }
    best.map(|(_, p)| p)
}

fn cmd_run(args: &Args) -> Result<i32> {
    let config = args
        .get("config")
        .ok_or_else(|| SolverError::InvalidConfig("run needs --config".into()))?;
    let out = args
        .get("out")
        .ok_or_else(|| SolverError::InvalidConfig("run needs --out".into()))?;
    let (mut cfg, grid) = load(config)?;
    if let Some(every) = args.get("snapshot-every") {
        cfg.sim.snapshot_every = every.parse().map_err(|_| {
            SolverError::InvalidConfig(format!(
                "--snapshot-every must be an integer (got '{every}')"
            ))
        })?;
    }
    let out_dir = PathBuf::from(out);
    std::fs::create_dir_all(&out_dir)?;

    let init = if args.has("resume") {
        let snap = latest_snapshot_dir(&out_dir).ok_or_else(|| {
            SolverError::Io(format!(
                "--resume: no snapshots found under {}",
                out_dir.display()
            ))
        })?;
        read_snapshot(&snap, &grid, &cfg.sim)?
    } else {
        build_initial_state(&cfg, &grid)?
    };

    let grid_ref = &grid;
    let out_ref = out_dir.clone();
    let mut snapshot_hook = move |step: usize, state: &SystemState| -> Result<()> {
        let dir = out_ref.join(format!("snap_{step:06}"));
        write_snapshot(state, grid_ref, &dir)?;
        Ok(())
    };
    let dump_dir = out_dir.join("dump");
    let mut dump_hook = |state: &SystemState| -> Result<()> {
        write_snapshot(state, &grid, &dump_dir)?;
        Ok(())
    };

    let result = run_simulation(
        init,
        &grid,
        &cfg.sim,
        if cfg.sim.snapshot_every > 0 {
            Some(&mut snapshot_hook)
        } else {
            None
        },
        Some(&mut dump_hook),
    );
    match result {
        Ok(run) => {
            write_diagnostics_csv(&run.rows, &out_dir.join("diagnostics.csv"))?;
            println!(
                "run complete: {} steps to t = {}, diagnostics at {}",
                run.steps,
                format_value(run.final_state.t),
                out_dir.join("diagnostics.csv").display()
            );
            Ok(0)
        }
        Err(SolverError::MonitorViolation(msg)) => {
            eprintln!("aborted: {msg}; state dumped to {}", dump_dir.display());
            Ok(2)
        }
        Err(e) => Err(e),
    }
}

fn cmd_iterate(args: &Args) -> Result<i32> {
    let config = args
        .get("config")
        .ok_or_else(|| SolverError::InvalidConfig("iterate needs --config".into()))?;
    let (cfg, grid) = load(config)?;
    let horizon: f64 = match args.get("horizon") {
        Some(v) => v.parse().map_err(|_| {
            SolverError::InvalidConfig(format!("--horizon must be a number (got '{v}')"))
        })?,
        None => cfg.sim.t_final,
    };
    let max_iters: usize = match args.get("max-iters") {
        Some(v) => v.parse().map_err(|_| {
            SolverError::InvalidConfig(format!("--max-iters must be an integer (got '{v}')"))
        })?,
        None => cfg.sim.picard_max_iters,
    };
    let tol: f64 = match args.get("tol") {
        Some(v) => v.parse().map_err(|_| {
            SolverError::InvalidConfig(format!("--tol must be a number (got '{v}')"))
        })?,
        None => cfg.sim.picard_tol,
    };
    let init = build_initial_state(&cfg, &grid)?;
    let out = picard_solve(&init, horizon, max_iters, tol, &grid, &cfg.sim)?;
    if let Some(warning) = &out.memory_warning {
        eprintln!("warning: {warning}");
    }

    let mut csv = String::from("iterate,sup_e,ratio,sup_d\n");
    for rec in &out.trace.iterates {
        let sup_d = rec.d_series.iter().cloned().fold(0.0f64, f64::max);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            rec.n,
            format_value(rec.sup_e),
            rec.ratio.map_or("".to_string(), |r| format_value(r)),
            format_value(sup_d)
        ));
        println!(
            "iterate {:2}: sup_t E = {:.3e}{}",
            rec.n,
            rec.sup_e,
            rec.ratio
                .map_or(String::new(), |r| format!(", ratio {r:.3}"))
        );
    }
    if out.trace.non_contraction {
        println!("note: no contraction for three consecutive iterates (horizon likely too long)");
    }
    println!(
        "{}",
        if out.converged {
            "converged"
        } else {
            "iteration cap reached"
        }
    );
    if let Some(dir) = args.get("out") {
        let dir = PathBuf::from(dir);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("iteration_trace.csv"), csv)?;
    }
    Ok(0)
}

fn cmd_diagnose(args: &Args) -> Result<i32> {
    use std::io::Write;
    let config = args
        .get("config")
        .ok_or_else(|| SolverError::InvalidConfig("diagnose needs --config".into()))?;
    let snap = args
        .get("snapshot")
        .ok_or_else(|| SolverError::InvalidConfig("diagnose needs --snapshot".into()))?;
    let (cfg, grid) = load(config)?;
    let state = read_snapshot(Path::new(snap), &grid, &cfg.sim)?;
    let row = diagnostics_row(&state.f, &state.fluid, &grid, &cfg.sim)?;
    // tolerate a closed pipe (e.g. `diagnose ... | head`)
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let names = crate::diagnostics::DiagnosticsRow::COLUMNS;
    for (name, value) in names.iter().zip(row.values().iter()) {
        if writeln!(out, "{name} = {}", format_value(*value)).is_err() {
            return Ok(0);
        }
    }
    let monitor = positivity_monitor(&state.f, &state.fluid, &grid, &cfg.sim)?;
    for e in &monitor.entries {
        if writeln!(
            out,
            "monitor {} = {:?} (value {:e} at node {})",
            e.name, e.status, e.value, e.location
        )
        .is_err()
        {
            return Ok(0);
        }
    }
    Ok(0)
}

fn cmd_decay(args: &Args) -> Result<i32> {
    let config = args
        .get("config")
        .ok_or_else(|| SolverError::InvalidConfig("decay needs --config".into()))?;
    let (cfg, grid) = load(config)?;
    let init = build_initial_state(&cfg, &grid)?;
    let run = run_simulation(init, &grid, &cfg.sim, None, None)?;
    let series: Vec<(f64, f64)> = run.rows.iter().map(|r| (r.t, r.mod_energy)).collect();
    let fit = decay_fit(&series)?;
    println!(
        "modulated energy: L(0) = {:.6e}, L(T) = {:.6e}, ratio {:.3}",
        series.first().map(|s| s.1).unwrap_or(0.0),
        series.last().map(|s| s.1).unwrap_or(0.0),
        series.first().map(|s| s.1).unwrap_or(0.0) / series.last().map(|s| s.1).unwrap_or(1.0)
    );
    println!(
        "fit: amplitude {:.6e}, rate {:.6e}, log residual {:.3e} ({} samples excluded)",
        fit.amplitude, fit.rate, fit.residual, fit.excluded
    );
    if let Some(dir) = args.get("out") {
        let dir = PathBuf::from(dir);
        std::fs::create_dir_all(&dir)?;
        let mut csv = String::from("t,mod_energy\n");
        for (t, l) in &series {
            csv.push_str(&format!("{},{}\n", format_value(*t), format_value(*l)));
        }
        std::fs::write(dir.join("decay.csv"), csv)?;
        write_diagnostics_csv(&run.rows, &dir.join("diagnostics.csv"))?;
    }
    Ok(0)
}

fn cmd_check(args: &Args) -> Result<i32> {
    let seed: u64 = match args.get("seed") {
        Some(v) => v.parse().map_err(|_| {
            SolverError::InvalidConfig(format!("--seed must be an integer (got '{v}')"))
        })?,
        None => 1,
    };
    let failures = crate::checks::run_builtin_checks(seed, &mut |name, pass, detail| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    })?;
    if failures == 0 {
        println!("all checks passed");
        Ok(0)
    } else {
        println!("{failures} check(s) failed");
        Ok(1)
    }
}

/// Entry point used by the binary; returns the process exit status.
pub fn cli_dispatch(argv: &[String]) -> i32 {
    if argv.is_empty() {
        eprintln!("{USAGE}");
        return 1;
    }
    let sub = argv[0].as_str();
    let rest = &argv[1..];
    let parsed = match Args::parse(rest) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            return 1;
        }
    };
    let known: &[&str] = match sub {
        "run" => &["config", "out", "snapshot-every", "resume"],
        "iterate" => &["config", "horizon", "max-iters", "tol", "out"],
        "diagnose" => &["config", "snapshot"],
        "decay" => &["config", "out"],
        "check" => &["seed"],
        _ => {
            eprintln!("error: unknown subcommand '{sub}'\n\n{USAGE}");
            return 1;
        }
    };
    if let Err(msg) = parsed.check_known(known) {
        eprintln!("error: {msg}\n\n{USAGE}");
        return 1;
    }
    let outcome = match sub {
        "run" => cmd_run(&parsed),
        "iterate" => cmd_iterate(&parsed),
        "diagnose" => cmd_diagnose(&parsed),
        "decay" => cmd_decay(&parsed),
        "check" => cmd_check(&parsed),
        _ => unreachable!(),
    };
    match outcome {
        Ok(code) => code,
        Err(SolverError::MonitorViolation(msg)) => {
            eprintln!("aborted: {msg}");
            2
        }
        Err(
            e @ (SolverError::CflViolation { .. }
            | SolverError::Positivity { .. }
            | SolverError::Blowup { .. }
            | SolverError::NonFinite { .. }
            | SolverError::Projection { .. }
            | SolverError::CgNoConvergence { .. }),
        ) => {
            eprintln!("aborted: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
