//! Configuration files, snapshot directories, and the diagnostics CSV.
//!
//! Config files are flat JSON objects or INI-style `key = value` text.
//! Unknown keys are fatal. Snapshots are a manifest plus CSV arrays printed
//! with 17 significant digits so values round-trip exactly.

use std::fs;
use std::path::Path;

use crate::config::SimConfig;
use crate::diagnostics::DiagnosticsRow;
use crate::error::{Result, SolverError};
use crate::grid::{GridSpec, PhaseGrid, QuadratureRule};
use crate::state::{FluidState, KineticState};
use crate::stepper::SystemState;
use crate::util::fnv1a64;

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// How the initial state is built by the command-line runner.
#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    /// Spatially uniform Maxwellian particles over a uniform fluid.
    Uniform,
    /// Uniform background plus smooth low-mode perturbations (seeded).
    Perturbed,
    /// No particles; fluid only.
    FluidOnly,
}

/// Parameters of the built-in initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub kind: InitKind,
    pub rho: f64,
    pub u: f64,
    pub rho_f: f64,
    pub u_f: f64,
    pub t_f: f64,
    pub amp: f64,
    pub modes: usize,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            kind: InitKind::Uniform,
            rho: 1.0,
            u: 0.0,
            rho_f: 1.0,
            u_f: 0.0,
            t_f: 1.0,
            amp: 1e-3,
            modes: 2,
        }
    }
}

/// Everything a run needs: numerics, grid layout, and initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct FullConfig {
    pub sim: SimConfig,
    pub grid: GridSpec,
    pub init: InitSpec,
}

impl Default for FullConfig {
    fn default() -> Self {
        FullConfig {
            sim: SimConfig::default(),
            grid: GridSpec::uniform(1, 1.0, 64, 8.0, 64),
            init: InitSpec::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// key-value parsing

fn parse_flat_json(text: &str) -> Result<Vec<(String, String)>> {
    let bad = |msg: &str| SolverError::InvalidConfig(format!("malformed JSON config: {msg}"));
    let trimmed = text.trim();
    let inner = trimmed
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| bad("expected a single flat object"))?;
    let mut pairs = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        // key
        rest = rest.trim_start();
        if rest.starts_with(',') {
            rest = rest[1..].trim_start();
            continue;
        }
        if rest.is_empty() {
            break;
        }
        if !rest.starts_with('"') {
            return Err(bad("keys must be quoted strings"));
        }
        let close = rest[1..].find('"').ok_or_else(|| bad("unterminated key"))? + 1;
        let key = rest[1..close].to_string();
        rest = rest[close + 1..].trim_start();
        rest = rest
            .strip_prefix(':')
            .ok_or_else(|| bad("missing ':' after key"))?
            .trim_start();
        // value: quoted string or bare token up to ',' at depth zero
        let value;
        if rest.starts_with('"') {
            let close = rest[1..]
                .find('"')
                .ok_or_else(|| bad("unterminated string value"))?
                + 1;
            value = rest[1..close].to_string();
            rest = rest[close + 1..].trim_start();
        } else if rest.starts_with('[') {
            let close = rest
                .find(']')
                .ok_or_else(|| bad("unterminated array value"))?;
            value = rest[1..close].trim().to_string();
            rest = rest[close + 1..].trim_start();
        } else {
            let end = rest.find(',').unwrap_or(rest.len());
            value = rest[..end].trim().to_string();
            rest = rest[end..].trim_start();
        }
        if value.is_empty() {
            return Err(bad(&format!("empty value for key '{key}'")));
        }
        pairs.push((key, value));
        if rest.starts_with(',') {
            rest = rest[1..].trim_start();
        }
    }
    Ok(pairs)
}

fn parse_ini(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let eq = line.find('=').ok_or_else(|| {
            SolverError::InvalidConfig(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(SolverError::InvalidConfig(format!(
                "line {}: empty key or value",
                lineno + 1
            )));
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| SolverError::InvalidConfig(format!("{key} must be a number (got '{value}')")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| {
        SolverError::InvalidConfig(format!(
            "{key} must be a nonnegative integer (got '{value}')"
        ))
    })
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value.parse::<u64>().map_err(|_| {
        SolverError::InvalidConfig(format!(
            "{key} must be a nonnegative integer (got '{value}')"
        ))
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(SolverError::InvalidConfig(format!(
            "{key} must be true or false (got '{value}')"
        ))),
    }
}

fn parse_usize_list(key: &str, value: &str, dim: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    let list: Result<Vec<usize>> = parts.iter().map(|p| parse_usize(key, p)).collect();
    let list = list?;
    match list.len() {
        1 => Ok(vec![list[0]; dim]),
        n if n == dim => Ok(list),
        n => Err(SolverError::InvalidConfig(format!(
            "{key} must list 1 or {dim} entries (got {n})"
        ))),
    }
}

fn parse_f64_list(key: &str, value: &str, dim: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    let list: Result<Vec<f64>> = parts.iter().map(|p| parse_f64(key, p)).collect();
    let list = list?;
    match list.len() {
        1 => Ok(vec![list[0]; dim]),
        n if n == dim => Ok(list),
        n => Err(SolverError::InvalidConfig(format!(
            "{key} must list 1 or {dim} entries (got {n})"
        ))),
    }
}

/// Parse and validate a configuration file. Every key is checked against the
/// known set; unknown keys are fatal, missing keys take the documented
/// defaults, and all range invariants are enforced here.
pub fn parse_config(path: &Path) -> Result<FullConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| SolverError::Io(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<FullConfig> {
    let pairs = if text.trim_start().starts_with('{') {
        parse_flat_json(text)?
    } else {
        parse_ini(text)?
    };

    // dimension first: per-axis lists depend on it
    let mut dim = 1usize;
    for (k, v) in &pairs {
        if k == "dim" {
            dim = parse_usize(k, v)?;
        }
    }

    let mut cfg = FullConfig::default();
    cfg.grid = GridSpec::uniform(dim, 1.0, 64, 8.0, 64);

    for (key, value) in &pairs {
        match key.as_str() {
            "dim" => cfg.grid.dim = parse_usize(key, value)?,
            "period" => cfg.grid.period = parse_f64_list(key, value, dim)?,
            "cells" => cfg.grid.cells = parse_usize_list(key, value, dim)?,
            "v_max" => cfg.grid.v_max = parse_f64_list(key, value, dim)?,
            "v_cells" => cfg.grid.v_cells = parse_usize_list(key, value, dim)?,
            "quadrature" => {
                cfg.grid.quadrature = match value.as_str() {
                    "midpoint" => QuadratureRule::Midpoint,
                    "trapezoid" => QuadratureRule::Trapezoid,
                    other => {
                        return Err(SolverError::InvalidConfig(format!(
                            "quadrature must be 'midpoint' or 'trapezoid' (got '{other}')"
                        )))
                    }
                }
            }
            "gamma" => cfg.sim.gamma = parse_f64(key, value)?,
            "mu" => cfg.sim.mu = parse_f64(key, value)?,
            "alpha" => cfg.sim.alpha = parse_f64(key, value)?,
            "k" => cfg.sim.k = parse_f64(key, value)?,
            "eps" => cfg.sim.eps = parse_f64(key, value)?,
            "delta" => cfg.sim.delta = parse_f64(key, value)?,
            "dt" => cfg.sim.dt = parse_f64(key, value)?,
            "t_final" => cfg.sim.t_final = parse_f64(key, value)?,
            "cfl" => cfg.sim.cfl = parse_f64(key, value)?,
            "t_ref" => cfg.sim.t_ref = parse_f64(key, value)?,
            "vacuum_floor" => cfg.sim.vacuum_floor = parse_f64(key, value)?,
            "positivity_tol" => cfg.sim.positivity_tol = parse_f64(key, value)?,
            "picard_max_iters" => cfg.sim.picard_max_iters = parse_usize(key, value)?,
            "picard_tol" => cfg.sim.picard_tol = parse_f64(key, value)?,
            "cauchy_c" => cfg.sim.cauchy_c = parse_f64(key, value)?,
            "cg_tol" => cfg.sim.cg_tol = parse_f64(key, value)?,
            "cg_max_iters" => cfg.sim.cg_max_iters = parse_usize(key, value)?,
            "viscous_implicit" => cfg.sim.viscous_implicit = parse_bool(key, value)?,
            "snapshot_every" => cfg.sim.snapshot_every = parse_usize(key, value)?,
            "seed" => cfg.sim.seed = parse_u64(key, value)?,
            "mem_cap_mib" => cfg.sim.mem_cap_mib = parse_usize(key, value)?,
            "lower_eps1" => cfg.sim.lower_eps1 = Some(parse_f64(key, value)?),
            "lower_a" => cfg.sim.lower_a = Some(parse_f64(key, value)?),
            "rho_f_floor" => cfg.sim.rho_f_floor = Some(parse_f64(key, value)?),
            "t_f_floor" => cfg.sim.t_f_floor = Some(parse_f64(key, value)?),
            "init" => {
                cfg.init.kind = match value.as_str() {
                    "uniform" => InitKind::Uniform,
                    "perturbed" => InitKind::Perturbed,
                    "fluid_only" => InitKind::FluidOnly,
                    other => {
                        return Err(SolverError::InvalidConfig(format!(
                            "init must be 'uniform', 'perturbed', or 'fluid_only' (got '{other}')"
                        )))
                    }
                }
            }
            "init_rho" => cfg.init.rho = parse_f64(key, value)?,
            "init_u" => cfg.init.u = parse_f64(key, value)?,
            "init_rho_f" => cfg.init.rho_f = parse_f64(key, value)?,
            "init_u_f" => cfg.init.u_f = parse_f64(key, value)?,
            "init_t_f" => cfg.init.t_f = parse_f64(key, value)?,
            "init_amp" => cfg.init.amp = parse_f64(key, value)?,
            "init_modes" => cfg.init.modes = parse_usize(key, value)?,
            unknown => {
                return Err(SolverError::InvalidConfig(format!(
                    "unknown configuration key '{unknown}'"
                )))
            }
        }
    }

    cfg.sim.validate()?;
    if !(cfg.init.rho > 0.0) {
        return Err(SolverError::InvalidConfig(format!(
            "init_rho must be positive (got {})",
            cfg.init.rho
        )));
    }
    if cfg.init.kind != InitKind::FluidOnly && !(cfg.init.t_f > 0.0) {
        return Err(SolverError::InvalidConfig(format!(
            "init_t_f must be positive (got {})",
            cfg.init.t_f
        )));
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// snapshots

/// 17 significant digits: enough for f64 values to round-trip exactly.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_array_csv(
    path: &Path,
    header: &str,
    rows: usize,
    cols: usize,
    data: &[f64],
) -> Result<()> {
    debug_assert_eq!(rows * cols, data.len());
    let mut text = String::with_capacity(data.len() * 25);
    text.push_str(header);
    text.push('\n');
    for r in 0..rows {
        let mut line = String::with_capacity(cols * 25);
        for c in 0..cols {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format_value(data[r * cols + c]));
        }
        text.push_str(&line);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn read_array_csv(path: &Path, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| SolverError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::with_capacity(rows * cols);
    let mut lines = text.lines();
    let _header = lines.next();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| {
                SolverError::Io(format!("bad number '{tok}' in {}", path.display()))
            })?;
            out.push(v);
        }
    }
    if out.len() != rows * cols {
        return Err(SolverError::ShapeMismatch {
            expected: rows * cols,
            got: out.len(),
            what: path.display().to_string(),
        });
    }
    Ok(out)
}

fn file_checksum(path: &Path) -> Result<u64> {
    let bytes = fs::read(path)
        .map_err(|e| SolverError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(fnv1a64(&bytes))
}

/// Snapshot manifest: schema version, grid echo, time stamp, and per-file
/// checksums.
#[derive(Debug, Clone)]
pub struct SnapshotManifest {
    pub version: u32,
    pub time: f64,
    pub dim: usize,
    pub files: Vec<(String, u64)>,
}

/// Write a snapshot directory (manifest + CSV arrays) and return its manifest.
pub fn write_snapshot(
    state: &SystemState,
    grid: &PhaseGrid,
    dir: &Path,
) -> Result<SnapshotManifest> {
    fs::create_dir_all(dir)?;
    let xl = grid.x_len();
    let vl = grid.v_len();
    let d = grid.dim;

    let shape_x: Vec<String> = (0..d).map(|ax| grid.nx[ax].to_string()).collect();
    let shape_v: Vec<String> = (0..d).map(|ax| grid.nv[ax].to_string()).collect();
    let header_f = format!(
        "# axes: x({}) v({}) row-major",
        shape_x.join("x"),
        shape_v.join("x")
    );
    let header_x = format!("# axes: x({}) row-major", shape_x.join("x"));
    let header_u = format!("# axes: x({}) components({d}) row-major", shape_x.join("x"));

    write_array_csv(&dir.join("f.csv"), &header_f, xl, vl, &state.f.values)?;
    write_array_csv(&dir.join("rho.csv"), &header_x, xl, 1, &state.fluid.rho)?;
    write_array_csv(&dir.join("h.csv"), &header_x, xl, 1, &state.fluid.h)?;
    write_array_csv(&dir.join("u.csv"), &header_u, xl, d, &state.fluid.u)?;

    let mut files = Vec::new();
    for name in ["f.csv", "rho.csv", "h.csv", "u.csv"] {
        files.push((name.to_string(), file_checksum(&dir.join(name))?));
    }

    let mut manifest = String::new();
    manifest.push_str(&format!("schema_version = {SNAPSHOT_SCHEMA_VERSION}\n"));
    manifest.push_str(&format!("time = {}\n", format_value(state.t)));
    manifest.push_str(&format!("dim = {d}\n"));
    for ax in 0..d {
        manifest.push_str(&format!(
            "axis{ax} = period {} cells {} v_max {} v_cells {}\n",
            format_value(grid.period[ax]),
            grid.nx[ax],
            format_value(grid.v_max[ax]),
            grid.v_cells[ax]
        ));
    }
    for (name, sum) in &files {
        manifest.push_str(&format!("file = {name} checksum = {sum:016x}\n"));
    }
    fs::write(dir.join("manifest.txt"), manifest)?;

    Ok(SnapshotManifest {
        version: SNAPSHOT_SCHEMA_VERSION,
        time: state.t,
        dim: d,
        files,
    })
}

/// Read a snapshot directory back, validating the schema version, checksums,
/// and array shapes against `grid`.
pub fn read_snapshot(dir: &Path, grid: &PhaseGrid, cfg: &SimConfig) -> Result<SystemState> {
    let text = fs::read_to_string(dir.join("manifest.txt"))
        .map_err(|e| SolverError::Io(format!("cannot read manifest in {}: {e}", dir.display())))?;
    let mut version = 0u32;
    let mut time = 0.0f64;
    let mut files: Vec<(String, u64)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if let Some(v) = line.strip_prefix("schema_version = ") {
            version = v
                .trim()
                .parse()
                .map_err(|_| SolverError::Io(format!("bad schema_version '{v}' in manifest")))?;
        } else if let Some(v) = line.strip_prefix("time = ") {
            time = v
                .trim()
                .parse()
                .map_err(|_| SolverError::Io(format!("bad time '{v}' in manifest")))?;
        } else if let Some(rest) = line.strip_prefix("file = ") {
            let mut parts = rest.split(" checksum = ");
            let name = parts
                .next()
                .ok_or_else(|| SolverError::Io("malformed file line in manifest".into()))?
                .trim()
                .to_string();
            let sum = parts
                .next()
                .ok_or_else(|| SolverError::Io("missing checksum in manifest".into()))?
                .trim();
            let sum = u64::from_str_radix(sum, 16)
                .map_err(|_| SolverError::Io(format!("bad checksum '{sum}' in manifest")))?;
            files.push((name, sum));
        }
    }
    if version > SNAPSHOT_SCHEMA_VERSION {
        return Err(SolverError::UnsupportedVersion {
            found: version,
            supported: SNAPSHOT_SCHEMA_VERSION,
        });
    }
    for (name, expected) in &files {
        let actual = file_checksum(&dir.join(name))?;
        if actual != *expected {
            return Err(SolverError::ChecksumMismatch { file: name.clone() });
        }
    }

    let xl = grid.x_len();
    let vl = grid.v_len();
    let d = grid.dim;
    let f = read_array_csv(&dir.join("f.csv"), xl, vl)?;
    let rho = read_array_csv(&dir.join("rho.csv"), xl, 1)?;
    let h = read_array_csv(&dir.join("h.csv"), xl, 1)?;
    let u = read_array_csv(&dir.join("u.csv"), xl, d)?;

    let kinetic = KineticState::new(f, time);
    let fluid = FluidState { rho, h, u, time };
    SystemState::new(kinetic, fluid, grid, cfg)
}

// ---------------------------------------------------------------------------
// diagnostics CSV

/// Serialize diagnostics rows with the fixed column order.
pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut text = String::new();
    text.push_str(&DiagnosticsRow::COLUMNS.join(","));
    text.push('\n');
    for row in rows {
        let vals = row.values();
        let mut line = String::with_capacity(vals.len() * 25);
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_value(*v));
        }
        text.push_str(&line);
        text.push('\n');
    }
    text
}

pub fn write_diagnostics_csv(rows: &[DiagnosticsRow], path: &Path) -> Result<()> {
    fs::write(path, diagnostics_csv(rows))?;
    Ok(())
}
