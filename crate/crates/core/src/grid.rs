//! Cell-average densities on `[0, 1]`.
//!
//! The mesh is chosen so that the jump amplitude `h` is an exact number of
//! cells; the nonlocal term `p(v - h)` of the PDE is then an index shift.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csv::fmt_f64;

/// Largest search window (in cells above the requested count) for a
/// resolution that aligns `h` with the mesh.
const ALIGN_SEARCH: usize = 20_000;
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("sampler integrates to {mass:e}, nothing to normalize")]
    ZeroMass { mass: f64 },
    #[error("grid mismatch: {left} cells vs {right} cells")]
    GridMismatch { left: usize, right: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}

/// Uniform mesh on `[0, 1]` with the jump shift and reset cell resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub n: usize,
    pub dv: f64,
    /// Jump amplitude in cells: `m_jump * dv` is the effective `h`.
    pub m_jump: usize,
    /// Cell receiving the reset flux: the cell `(i dv, (i+1) dv]` containing `v_r`.
    pub i_reset: usize,
    pub h_effective: f64,
    /// Cell centre of `i_reset` minus `v_r`.
    pub reset_offset: f64,
}

impl Mesh {
    /// Smallest mesh with at least `n_requested` cells on which `h` is an
    /// integer number of cells. If no such mesh exists nearby, `h` is
    /// rounded to the nearest multiple of `1/n` and reported as
    /// [`Mesh::h_effective`].
    pub fn new(n_requested: usize, h: f64, v_r: f64) -> Result<Self, GridError> {
        if n_requested < 2 {
            return Err(GridError::InvalidMesh(format!(
                "need at least 2 cells, got {n_requested}"
            )));
        }
        if !(h > 0.0 && h < 1.0) || !(v_r > 0.0 && v_r < 1.0) {
            return Err(GridError::InvalidMesh(format!("h = {h}, v_r = {v_r}")));
        }
        let n = (n_requested..n_requested + ALIGN_SEARCH)
            .find(|&n| {
                let x = n as f64 * h;
                (x - x.round()).abs() <= ALIGN_TOL * x.max(1.0) && x.round() >= 1.0
            })
            .unwrap_or(n_requested);
        let m_jump = ((n as f64 * h).round() as usize).max(1);
        if m_jump >= n {
            return Err(GridError::InvalidMesh(format!(
                "jump of {m_jump} cells does not fit in {n} cells"
            )));
        }
        let dv = 1.0 / n as f64;
        let i_reset = reset_cell(n, v_r);
        Ok(Self {
            n,
            dv,
            m_jump,
            i_reset,
            h_effective: m_jump as f64 * dv,
            reset_offset: (i_reset as f64 + 0.5) * dv - v_r,
        })
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dv
    }

    /// First cell of the threshold band `[1 - h, 1]`.
    pub fn tail_start(&self) -> usize {
        self.n - self.m_jump
    }

    /// Cell holding an atom at `v` (cells are `[i dv, (i+1) dv)`).
    pub fn cell_of(&self, v: f64) -> usize {
        let x = v * self.n as f64;
        let i = (x + ALIGN_TOL * x.abs().max(1.0)).floor();
        (i.max(0.0) as usize).min(self.n - 1)
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.center(i))
    }
}

/// Index `i` with `i dv < v_r <= (i+1) dv`. Drift points toward 0, so a
/// reset landing on a face belongs to the cell on its left.
fn reset_cell(n: usize, v_r: f64) -> usize {
    let x = v_r * n as f64;
    let i = (x - ALIGN_TOL * x.max(1.0)).ceil() as isize - 1;
    i.clamp(0, n as isize - 1) as usize
}

/// What to discretize into a [`GridDensity`].
pub enum Sampler<'a> {
    /// Nonnegative integrable function, sampled at cell midpoints.
    Function(&'a dyn Fn(f64) -> f64),
    /// `(position, weight)` atoms, each deposited in its containing cell.
    Atoms(&'a [(f64, f64)]),
}

/// Density on a [`Mesh`], stored as cell averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub mesh: Mesh,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn zeros(mesh: Mesh) -> Self {
        Self {
            mesh,
            values: vec![0.0; mesh.n],
        }
    }

    pub fn from_values(mesh: Mesh, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != mesh.n {
            return Err(GridError::GridMismatch {
                left: mesh.n,
                right: values.len(),
            });
        }
        Ok(Self { mesh, values })
    }

    /// Discretizes `sampler` and normalizes the result to unit mass.
    pub fn from_samples(mesh: Mesh, sampler: Sampler<'_>) -> Result<Self, GridError> {
        let mut g = Self::zeros(mesh);
        match sampler {
            Sampler::Function(f) => {
                for (i, value) in g.values.iter_mut().enumerate() {
                    *value = f(mesh.center(i)).max(0.0);
                }
            }
            Sampler::Atoms(atoms) => {
                for &(v, w) in atoms {
                    g.values[mesh.cell_of(v)] += w.max(0.0) / mesh.dv;
                }
            }
        }
        let mass = g.mass();
        if !(mass > 1e-14) || !mass.is_finite() {
            return Err(GridError::ZeroMass { mass });
        }
        g.values.iter_mut().for_each(|x| *x /= mass);
        Ok(g)
    }

    /// Uniform density on `[0, 1]`.
    pub fn uniform(mesh: Mesh) -> Self {
        Self {
            mesh,
            values: vec![1.0; mesh.n],
        }
    }

    /// Unit atom at `v`, deposited in its cell.
    pub fn dirac(mesh: Mesh, v: f64) -> Self {
        let mut g = Self::zeros(mesh);
        g.values[mesh.cell_of(v)] = 1.0 / mesh.dv;
        g
    }

    /// Gaussian profile truncated to `[0, 1]` and renormalized.
    pub fn gaussian(mesh: Mesh, mean: f64, sd: f64) -> Result<Self, GridError> {
        let f = move |v: f64| (-0.5 * ((v - mean) / sd).powi(2)).exp();
        Self::from_samples(mesh, Sampler::Function(&f))
    }

    pub fn n(&self) -> usize {
        self.mesh.n
    }

    pub fn dv(&self) -> f64 {
        self.mesh.dv
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.mesh.dv
    }

    /// Mass in the threshold band `[1 - h, 1]`.
    pub fn tail_mass(&self) -> f64 {
        self.values[self.mesh.tail_start()..].iter().sum::<f64>() * self.mesh.dv
    }

    /// Mass in `[0, 1 - h)`.
    pub fn head_mass(&self) -> f64 {
        self.values[..self.mesh.tail_start()].iter().sum::<f64>() * self.mesh.dv
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Midpoint quadrature of `f` against the density.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, p)| p * f(self.mesh.center(i)))
            .sum::<f64>()
            * self.mesh.dv
    }

    /// `sum |a_i - b_i| dv`, the total variation norm of the difference.
    pub fn tv_distance(&self, other: &Self) -> Result<f64, GridError> {
        tv_distance(self, other)
    }

    /// Writes `v_center,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "v_center,density")?;
        for (i, p) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", fmt_f64(self.mesh.center(i)), fmt_f64(*p))?;
        }
        Ok(())
    }
}

pub fn tv_distance(a: &GridDensity, b: &GridDensity) -> Result<f64, GridError> {
    if a.mesh.n != b.mesh.n {
        return Err(GridError::GridMismatch {
            left: a.mesh.n,
            right: b.mesh.n,
        });
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        * a.mesh.dv)
}
