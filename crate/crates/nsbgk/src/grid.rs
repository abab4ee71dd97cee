//! Phase-space grid: a periodic spatial tensor grid crossed with a truncated
//! uniform velocity grid, plus the exponential velocity weight.

use crate::error::{Result, SolverError};

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Velocity nodes at cell centers; every node carries weight dv.
    Midpoint,
    /// Velocity nodes at cell edges (one extra node per axis, includes v = 0
    /// and +-v_max); end nodes carry weight dv/2.
    Trapezoid,
}

/// Requested grid layout, one entry per spatial/velocity axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub period: Vec<f64>,
    pub cells: Vec<usize>,
    pub v_max: Vec<f64>,
    pub v_cells: Vec<usize>,
    pub quadrature: QuadratureRule,
}

impl GridSpec {
    /// Uniform layout across axes, the common case in tests.
    pub fn uniform(dim: usize, period: f64, cells: usize, v_max: f64, v_cells: usize) -> Self {
        GridSpec {
            dim,
            period: vec![period; dim],
            cells: vec![cells; dim],
            v_max: vec![v_max; dim],
            v_cells: vec![v_cells; dim],
            quadrature: QuadratureRule::Midpoint,
        }
    }
}

/// Immutable phase-space grid. Spatial axes are periodic with nodes at
/// i * dx; velocity axes are truncated to [-v_max, v_max] with node layout
/// set by the quadrature rule. Unused axes (beyond `dim`) hold neutral
/// values so products over the fixed-size arrays stay correct.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub dim: usize,
    pub period: [f64; MAX_DIM],
    pub nx: [usize; MAX_DIM],
    pub dx: [f64; MAX_DIM],
    pub v_max: [f64; MAX_DIM],
    pub v_cells: [usize; MAX_DIM],
    pub nv: [usize; MAX_DIM],
    pub dv: [f64; MAX_DIM],
    pub quadrature: QuadratureRule,
    /// Velocity node coordinates per axis.
    pub v_axis: Vec<Vec<f64>>,
    /// Velocity quadrature weights per axis.
    pub v_axis_w: Vec<Vec<f64>>,
}

/// Builds a validated grid from the spec.
pub fn build_phase_grid(spec: &GridSpec) -> Result<PhaseGrid> {
    if spec.dim < 1 || spec.dim > MAX_DIM {
        return Err(SolverError::InvalidGrid(format!(
            "dimension must be 1, 2, or 3 (got {})",
            spec.dim
        )));
    }
    for name in ["period", "cells", "v_max", "v_cells"] {
        let len = match name {
            "period" => spec.period.len(),
            "cells" => spec.cells.len(),
            "v_max" => spec.v_max.len(),
            _ => spec.v_cells.len(),
        };
        if len != spec.dim {
            return Err(SolverError::InvalidGrid(format!(
                "{name} must list one entry per axis ({} expected, got {len})",
                spec.dim
            )));
        }
    }

    let mut period = [1.0; MAX_DIM];
    let mut nx = [1usize; MAX_DIM];
    let mut dx = [1.0; MAX_DIM];
    let mut v_max = [0.0; MAX_DIM];
    let mut v_cells = [0usize; MAX_DIM];
    let mut nv = [1usize; MAX_DIM];
    let mut dv = [0.0; MAX_DIM];
    let mut v_axis = Vec::new();
    let mut v_axis_w = Vec::new();

    for ax in 0..spec.dim {
        if !(spec.period[ax] > 0.0) {
            return Err(SolverError::InvalidGrid(format!(
                "period on axis {ax} must be positive (got {})",
                spec.period[ax]
            )));
        }
        if spec.cells[ax] < 4 {
            return Err(SolverError::InvalidGrid(format!(
                "at least 4 spatial cells per axis required (axis {ax} has {})",
                spec.cells[ax]
            )));
        }
        if !(spec.v_max[ax] > 0.0) {
            return Err(SolverError::InvalidGrid(format!(
                "v_max on axis {ax} must be positive (got {})",
                spec.v_max[ax]
            )));
        }
        if spec.v_cells[ax] % 2 != 0 {
            return Err(SolverError::InvalidGrid(format!(
                "velocity grid must be symmetric: velocity cell count on axis {ax} must be even (got {})",
                spec.v_cells[ax]
            )));
        }
        if spec.v_cells[ax] < 8 {
            return Err(SolverError::InvalidGrid(format!(
                "at least 8 velocity cells per axis required (axis {ax} has {})",
                spec.v_cells[ax]
            )));
        }
        period[ax] = spec.period[ax];
        nx[ax] = spec.cells[ax];
        dx[ax] = spec.period[ax] / spec.cells[ax] as f64;
        v_max[ax] = spec.v_max[ax];
        v_cells[ax] = spec.v_cells[ax];
        dv[ax] = 2.0 * spec.v_max[ax] / spec.v_cells[ax] as f64;

        let (nodes, weights) = match spec.quadrature {
            QuadratureRule::Midpoint => {
                let n = spec.v_cells[ax];
                let nodes: Vec<f64> = (0..n)
                    .map(|j| -spec.v_max[ax] + (j as f64 + 0.5) * dv[ax])
                    .collect();
                (nodes, vec![dv[ax]; n])
            }
            QuadratureRule::Trapezoid => {
                let n = spec.v_cells[ax] + 1;
                let nodes: Vec<f64> = (0..n)
                    .map(|j| -spec.v_max[ax] + j as f64 * dv[ax])
                    .collect();
                let mut w = vec![dv[ax]; n];
                w[0] = 0.5 * dv[ax];
                w[n - 1] = 0.5 * dv[ax];
                (nodes, w)
            }
        };
        nv[ax] = nodes.len();
        v_axis.push(nodes);
        v_axis_w.push(weights);
    }

    Ok(PhaseGrid {
        dim: spec.dim,
        period,
        nx,
        dx,
        v_max,
        v_cells,
        nv,
        dv,
        quadrature: spec.quadrature,
        v_axis,
        v_axis_w,
    })
}

impl PhaseGrid {
    /// Number of spatial nodes.
    pub fn x_len(&self) -> usize {
        self.nx[..self.dim].iter().product()
    }

    /// Number of velocity nodes.
    pub fn v_len(&self) -> usize {
        self.nv[..self.dim].iter().product()
    }

    /// Number of phase-space nodes.
    pub fn phase_len(&self) -> usize {
        self.x_len() * self.v_len()
    }

    /// Spatial quadrature weight (uniform over the torus).
    pub fn x_weight(&self) -> f64 {
        self.dx[..self.dim].iter().product()
    }

    #[inline]
    pub fn phase_index(&self, ix: usize, iv: usize) -> usize {
        ix * self.v_len() + iv
    }

    /// Decompose a flat spatial index into per-axis indices.
    #[inline]
    pub fn x_decompose(&self, ix: usize) -> [usize; MAX_DIM] {
        let mut out = [0usize; MAX_DIM];
        let mut rem = ix;
        for ax in (0..self.dim).rev() {
            out[ax] = rem % self.nx[ax];
            rem /= self.nx[ax];
        }
        out
    }

    #[inline]
    pub fn x_compose(&self, idx: &[usize; MAX_DIM]) -> usize {
        let mut out = 0usize;
        for ax in 0..self.dim {
            out = out * self.nx[ax] + idx[ax];
        }
        out
    }

    #[inline]
    pub fn v_decompose(&self, iv: usize) -> [usize; MAX_DIM] {
        let mut out = [0usize; MAX_DIM];
        let mut rem = iv;
        for ax in (0..self.dim).rev() {
            out[ax] = rem % self.nv[ax];
            rem /= self.nv[ax];
        }
        out
    }

    /// Coordinates of spatial node `ix`.
    #[inline]
    pub fn x_node(&self, ix: usize) -> [f64; MAX_DIM] {
        let idx = self.x_decompose(ix);
        let mut out = [0.0; MAX_DIM];
        for ax in 0..self.dim {
            out[ax] = idx[ax] as f64 * self.dx[ax];
        }
        out
    }

    /// Coordinates of velocity node `iv`.
    #[inline]
    pub fn v_node(&self, iv: usize) -> [f64; MAX_DIM] {
        let idx = self.v_decompose(iv);
        let mut out = [0.0; MAX_DIM];
        for ax in 0..self.dim {
            out[ax] = self.v_axis[ax][idx[ax]];
        }
        out
    }

    /// Quadrature weight of velocity node `iv` (product over axes).
    #[inline]
    pub fn v_weight(&self, iv: usize) -> f64 {
        let idx = self.v_decompose(iv);
        let mut w = 1.0;
        for ax in 0..self.dim {
            w *= self.v_axis_w[ax][idx[ax]];
        }
        w
    }

    /// |v|^2 of velocity node `iv`.
    #[inline]
    pub fn v_sq(&self, iv: usize) -> f64 {
        let v = self.v_node(iv);
        let mut s = 0.0;
        for ax in 0..self.dim {
            s += v[ax] * v[ax];
        }
        s
    }

    /// Wrap a point onto the torus axis by axis.
    #[inline]
    pub fn wrap(&self, x: &mut [f64; MAX_DIM]) {
        for ax in 0..self.dim {
            let p = self.period[ax];
            x[ax] -= p * (x[ax] / p).floor();
        }
    }

    /// Largest velocity cutoff over axes.
    pub fn v_max_norm(&self) -> f64 {
        self.v_max[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    /// Hard error unless `len` matches a phase-shaped array.
    pub fn check_phase_shape(&self, len: usize, what: &str) -> Result<()> {
        if len != self.phase_len() {
            return Err(SolverError::ShapeMismatch {
                expected: self.phase_len(),
                got: len,
                what: what.into(),
            });
        }
        Ok(())
    }

    /// Hard error unless `len` matches a spatial scalar field.
    pub fn check_x_shape(&self, len: usize, what: &str) -> Result<()> {
        if len != self.x_len() {
            return Err(SolverError::ShapeMismatch {
                expected: self.x_len(),
                got: len,
                what: what.into(),
            });
        }
        Ok(())
    }

    /// Hard error unless `len` matches a spatial vector field (dim components per node).
    pub fn check_xvec_shape(&self, len: usize, what: &str) -> Result<()> {
        if len != self.x_len() * self.dim {
            return Err(SolverError::ShapeMismatch {
                expected: self.x_len() * self.dim,
                got: len,
                what: what.into(),
            });
        }
        Ok(())
    }
}

/// <v> = (1 + |v|^2)^(1/2).
#[inline]
pub fn v_bracket(v: &[f64]) -> f64 {
    let mut s = 1.0;
    for &c in v {
        s += c * c;
    }
    s.sqrt()
}

/// Exponential velocity weight exp(<v>^k). Total on finite inputs and even in v.
#[inline]
pub fn weight_value(v: &[f64], k: f64) -> f64 {
    v_bracket(v).powf(k).exp()
}
