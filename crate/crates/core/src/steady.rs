//! Invariant densities of the linear equation at fixed rate `σ`, the maps
//! `F(σ) = μ^σ([1−h, 1])` and `G(σ) = (1 − σ₀/σ)/J`, and steady states of
//! the nonlinear equation as roots of `F − G`.
//!
//! The stationary law is computed through the jump chain: the potential
//! seen by an input (just before it) is distributed like the time-stationary
//! potential. Write `Y` for the potential right after an input (shifted by
//! `h`, or reset to `v_r` from the band `[1−h, 1]`). The next input finds
//! `X = Y e^{-τ}` with `τ ~ Exp(σ)`, so `P(X < x | Y) = (x/Y)^σ`. Iterating
//! this on h-aligned cells, with `Y` uniform inside each cell and the reset
//! atom kept exact, conserves mass and stays well conditioned for every `σ`.

use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csv::fmt_f64;
use crate::grid::{GridDensity, GridError, Mesh};
use crate::model::{ModelParams, INTEGER_RATIO_TOL};
use crate::par::map_indexed;

pub const DEFAULT_CELLS: usize = 4000;
pub const DEFAULT_SCAN_POINTS: usize = 400;
pub const DEFAULT_SIGMA_MAX_FACTOR: f64 = 1e4;
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
/// Relative distance from a theorem boundary below which no claim is made.
pub const BOUNDARY_TOL: f64 = 1e-9;
const FACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteadyError {
    #[error("rate sigma = {0} must be positive and finite")]
    InvalidSigma(f64),
    #[error("G is undefined for J = 0")]
    ZeroCoupling,
    #[error("stationary iteration did not converge after {iterations} sweeps (change {change:e})")]
    NotConverged { iterations: usize, change: f64 },
    #[error("negative cell mass {value:e} in cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyConfig {
    /// Cells of the internal h-aligned mesh.
    pub cells: usize,
    /// Stop when the L1 change of one sweep is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            cells: DEFAULT_CELLS,
            tol: 1e-14,
            max_iter: 200_000,
        }
    }
}

fn exprel(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// `(1/Δ) ∫_x^b (x/y)^σ dy` for `0 < x ≤ b`.
fn decay_fraction(x: f64, b: f64, sigma: f64, dv: f64) -> f64 {
    if x >= b {
        return 0.0;
    }
    let l = (b / x).ln();
    x / dv * l * exprel((1.0 - sigma) * l)
}

/// Fixed point of the jump chain on cells.
#[derive(Debug, Clone, PartialEq)]
struct Chain {
    mesh: Mesh,
    sigma: f64,
    v_r: f64,
    /// Law of `X` per cell.
    x: Vec<f64>,
    /// Law of `Y` per cell, without the reset atom.
    y: Vec<f64>,
    /// `Σ_{j<i} y_j`, length `n + 1`.
    y_prefix: Vec<f64>,
    /// Reset atom `F = P(X ≥ 1 − h)`.
    atom: f64,
    /// `R_i = E[(a_i/Y)^σ; Y ≥ a_i]` over the cell part of `Y`, length `n + 1`.
    below: Vec<f64>,
    iterations: usize,
}

impl Chain {
    fn solve(sigma: f64, h: f64, v_r: f64, cfg: &SteadyConfig) -> Result<Self, SteadyError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(SteadyError::InvalidSigma(sigma));
        }
        let mesh = Mesh::new(cfg.cells, h, v_r)?;
        let n = mesh.n;
        let m = mesh.m_jump;
        let k = mesh.i_reset;
        let dv = mesh.dv;

        // fraction of uniform mass on cell i that decays below a_i
        let mut stay = vec![1.0; n];
        let mut leave = vec![0.0; n];
        // (a_i / a_{i+1})^σ and its complement
        let mut ratio = vec![0.0; n];
        let mut ratio_c = vec![1.0; n];
        for i in 1..n {
            let l = ((i + 1) as f64 / i as f64).ln();
            let a = (i as f64 * l * exprel((1.0 - sigma) * l)).clamp(0.0, 1.0);
            leave[i] = a;
            stay[i] = 1.0 - a;
            ratio[i] = (-sigma * l).exp();
            ratio_c[i] = -(-sigma * l).exp_m1();
        }
        // (a_i / v_r)^σ below the reset cell
        let mut atom_w = vec![0.0; n + 1];
        for (i, w) in atom_w.iter_mut().enumerate().take(k + 1).skip(1) {
            *w = (sigma * (i as f64 * dv / v_r).ln()).exp();
        }

        let mut x = vec![1.0 / n as f64; n];
        let mut y = vec![0.0; n];
        let mut below = vec![0.0; n + 1];
        let mut next = vec![0.0; n];
        let mut change = f64::INFINITY;
        let mut last_atom = f64::INFINITY;
        for it in 1..=cfg.max_iter {
            let atom: f64 = x[n - m..].iter().sum();
            let atom_settled = (atom - last_atom).abs() <= 1e-12 * atom;
            last_atom = atom;
            y[..m].iter_mut().for_each(|v| *v = 0.0);
            y[m..].copy_from_slice(&x[..n - m]);
            below[n] = 0.0;
            for i in (1..n).rev() {
                below[i] = y[i] * leave[i] + ratio[i] * below[i + 1];
            }
            below[0] = 0.0;
            for i in 0..n {
                let from_above = if i == 0 { below[1] } else { ratio_c[i] * below[i + 1] };
                next[i] = from_above + y[i] * stay[i] + atom * (atom_w[i + 1] - atom_w[i]);
            }
            next[k] += atom;
            let total: f64 = next.iter().sum();
            change = 0.0;
            for (xi, ni) in x.iter_mut().zip(&next) {
                let v = 0.5 * (*xi + ni / total);
                change += (v - *xi).abs();
                *xi = v;
            }
            if change < cfg.tol && atom_settled {
                let mut chain = Self {
                    mesh,
                    sigma,
                    v_r,
                    x,
                    y,
                    y_prefix: Vec::new(),
                    atom: 0.0,
                    below,
                    iterations: it,
                };
                chain.finish();
                if let Some((cell, &value)) = chain.x.iter().enumerate().find(|(_, &v)| v < -1e-12) {
                    return Err(SteadyError::NegativeDensity { cell, value });
                }
                return Ok(chain);
            }
        }
        Err(SteadyError::NotConverged {
            iterations: cfg.max_iter,
            change,
        })
    }

    /// Recomputes `Y`, the atom and `R` from the final `X`.
    fn finish(&mut self) {
        let n = self.mesh.n;
        let m = self.mesh.m_jump;
        self.atom = self.x[n - m..].iter().sum();
        self.y[..m].iter_mut().for_each(|v| *v = 0.0);
        self.y[m..].copy_from_slice(&self.x[..n - m]);
        self.below[n] = 0.0;
        for i in (1..n).rev() {
            let l = ((i + 1) as f64 / i as f64).ln();
            let a = (i as f64 * l * exprel((1.0 - self.sigma) * l)).clamp(0.0, 1.0);
            self.below[i] = self.y[i] * a + (-self.sigma * l).exp() * self.below[i + 1];
        }
        self.below[0] = 0.0;
        let mut acc = 0.0;
        self.y_prefix = std::iter::once(0.0)
            .chain(self.y.iter().map(|v| {
                acc += v;
                acc
            }))
            .collect();
    }

    /// Cell used to evaluate at `x` from the given side.
    fn cell(&self, x: f64, side: Side) -> usize {
        let n = self.mesh.n;
        let s = x * n as f64;
        let i = match side {
            Side::Left => (s - FACE_TOL * s.max(1.0)).ceil() as isize - 1,
            Side::Right => (s + FACE_TOL * s.max(1.0)).floor() as isize,
        };
        i.clamp(0, n as isize - 1) as usize
    }

    fn atom_active(&self, x: f64, side: Side) -> bool {
        match side {
            Side::Left => x <= self.v_r,
            Side::Right => x < self.v_r,
        }
    }

    /// `u(x) = x p(x) = σ E[(x/Y)^σ; Y > x]`.
    fn u(&self, x: f64, side: Side) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let i = self.cell(x, side);
        let dv = self.mesh.dv;
        let b = (i + 1) as f64 * dv;
        let upper = if i + 1 < self.mesh.n {
            (self.sigma * (x / b).ln()).exp() * self.below[i + 1]
        } else {
            0.0
        };
        let inside = self.y[i] * decay_fraction(x, b, self.sigma, dv);
        let atom = if self.atom_active(x, side) {
            self.atom * (self.sigma * (x / self.v_r).ln()).exp()
        } else {
            0.0
        };
        self.sigma * (upper + inside + atom)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = self.cell(x, Side::Right);
        let a = i as f64 * self.mesh.dv;
        let frac = ((x - a) / self.mesh.dv).clamp(0.0, 1.0);
        let y_below = self.y_prefix[i] + self.y[i] * frac + if self.v_r <= x { self.atom } else { 0.0 };
        y_below + self.u(x, Side::Right) / self.sigma
    }
}

/// Which one-sided limit to take at a discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Samples of the density between two consecutive breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    pub lo: f64,
    pub hi: f64,
    pub samples: Vec<(f64, f64)>,
}

/// The invariant density `p_σ`.
///
/// On `(0, min(h, v_r))` it is the power law `p(a0−) (v/a0)^{σ−1}`; it
/// jumps down at `v_r` by `D/v_r` with `D = σ ∫_{1−h}^1 p`; elsewhere it is
/// evaluated pointwise from the stationary chain and tabulated per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDensity {
    pub sigma: f64,
    pub h: f64,
    pub v_r: f64,
    /// End of the analytic head, `min(h, v_r)`.
    pub head_end: f64,
    /// `p(head_end−)`.
    pub head_value: f64,
    pub head_exponent: f64,
    /// `σ ∫_{1−h}^1 p`, the stationary firing rate.
    pub reset_jump: f64,
    pub tail_mass: f64,
    /// `{0} ∪ {kh} ∪ {v_r + kh}` within `[0, 1]`, plus 1.
    pub breakpoints: Vec<f64>,
    pub segments: Vec<Segment>,
    pub iterations: usize,
    chain: Chain,
}

/// Sorted breakpoints `{0} ∪ {kh} ∪ {v_r + kh} ∪ {1}`.
pub fn breakpoints(h: f64, v_r: f64) -> Vec<f64> {
    let mut pts = vec![0.0, 1.0];
    let mut k = 1.0;
    while k * h < 1.0 - FACE_TOL {
        pts.push(k * h);
        k += 1.0;
    }
    let mut k = 0.0;
    while v_r + k * h < 1.0 - FACE_TOL {
        pts.push(v_r + k * h);
        k += 1.0;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < FACE_TOL);
    pts
}

impl PiecewiseDensity {
    fn from_chain(chain: Chain, h: f64, v_r: f64) -> Self {
        let sigma = chain.sigma;
        let head_end = h.min(v_r);
        let head_value = chain.u(head_end, Side::Left) / head_end;
        let tail_mass = chain.atom;
        let mut density = Self {
            sigma,
            h,
            v_r,
            head_end,
            head_value,
            head_exponent: sigma - 1.0,
            reset_jump: sigma * tail_mass,
            tail_mass,
            breakpoints: breakpoints(h, v_r),
            segments: Vec::new(),
            iterations: chain.iterations,
            chain,
        };
        density.segments = density.tabulate(h / 256.0);
        density
    }

    fn tabulate(&self, spacing: f64) -> Vec<Segment> {
        self.breakpoints
            .windows(2)
            .enumerate()
            .map(|(id, w)| {
                let (lo, hi) = (w[0], w[1]);
                let k = (((hi - lo) / spacing).ceil() as usize).max(8);
                let first = usize::from(lo == 0.0);
                let samples = (first..=k)
                    .map(|j| {
                        let v = if j == k { hi } else { lo + (hi - lo) * j as f64 / k as f64 };
                        let side = if j == k { Side::Left } else { Side::Right };
                        (v, self.density(v, side))
                    })
                    .collect();
                Segment { id, lo, hi, samples }
            })
            .collect()
    }

    /// `C` in `p(v) = C (v/h)^{σ−1}` on the head. May overflow for large `σ`
    /// when `v_r < h`.
    pub fn head_coefficient(&self) -> f64 {
        self.head_value * (self.head_exponent * (self.h / self.head_end).ln()).exp()
    }

    /// Analytic head `p(a0−) (v/a0)^{σ−1}` for `0 < v ≤ a0`.
    pub fn head(&self, v: f64) -> f64 {
        self.head_value * (self.head_exponent * (v / self.head_end).ln()).exp()
    }

    /// One-sided value of the density at `v`.
    pub fn density(&self, v: f64, side: Side) -> f64 {
        if v <= 0.0 {
            return if self.sigma < 1.0 {
                f64::INFINITY
            } else if self.sigma == 1.0 {
                self.head_value
            } else {
                0.0
            };
        }
        if v >= 1.0 {
            return 0.0;
        }
        if v < self.head_end || (v == self.head_end && side == Side::Left) {
            return self.head(v);
        }
        self.chain.u(v, side) / v
    }

    /// `P(X ≤ v)`.
    pub fn cdf(&self, v: f64) -> f64 {
        self.chain.cdf(v)
    }

    pub fn mass(&self) -> f64 {
        self.chain.x.iter().sum()
    }

    /// `v_r (p(v_r−) − p(v_r+))`.
    pub fn measured_jump(&self) -> f64 {
        self.v_r * (self.density(self.v_r, Side::Left) - self.density(self.v_r, Side::Right))
    }

    /// Projection onto `mesh` by cell-wise differences of the CDF.
    pub fn to_grid(&self, mesh: Mesh) -> Result<GridDensity, GridError> {
        let mut values = Vec::with_capacity(mesh.n);
        let mut left = 0.0;
        for i in 0..mesh.n {
            let right = self.cdf((i + 1) as f64 * mesh.dv);
            values.push(((right - left) / mesh.dv).max(0.0));
            left = right;
        }
        let mut g = GridDensity::from_values(mesh, values)?;
        let mass = g.mass();
        g.values.iter_mut().for_each(|p| *p /= mass);
        Ok(g)
    }

    /// All tabulated `(v, p, segment_id)`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.segments
            .iter()
            .flat_map(|s| s.samples.iter().map(move |&(v, p)| (v, p, s.id)))
    }

    /// `min(σ v^{σ−1}/h^σ, σ/v)`.
    pub fn upper_bound(&self, v: f64) -> f64 {
        let s = self.sigma;
        let power = (s.ln() + (s - 1.0) * v.ln() - s * self.h.ln()).exp();
        power.min(s / v)
    }

    /// Samples where `p > upper_bound + slack`, as `(v, p, bound)`.
    pub fn bound_violations(&self, slack: f64) -> Vec<(f64, f64, f64)> {
        self.samples()
            .filter_map(|(v, p, _)| {
                let b = self.upper_bound(v);
                (p > b + slack).then_some((v, p, b))
            })
            .collect()
    }

    /// Draws one potential from the stationary law.
    pub fn sample<R: Rng + ?Sized>(&self, sampler: &StationarySampler, rng: &mut R) -> f64 {
        let i = sampler.index.sample(rng);
        let y = if i == self.chain.mesh.n {
            self.v_r
        } else {
            (i as f64 + rng.random::<f64>()) * self.chain.mesh.dv
        };
        let tau: f64 = rng.sample(Exp1);
        y * (-tau / self.sigma).exp()
    }

    pub fn sampler(&self) -> StationarySampler {
        let weights = self
            .chain
            .y
            .iter()
            .copied()
            .chain(std::iter::once(self.chain.atom));
        StationarySampler {
            index: WeightedIndex::new(weights).expect("stationary law has positive mass"),
        }
    }

    /// Writes `v,p,segment_id`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "v,p,segment_id")?;
        for (v, p, id) in self.samples() {
            writeln!(out, "{},{},{}", fmt_f64(v), fmt_f64(p), id)?;
        }
        Ok(())
    }
}

/// Precomputed table for [`PiecewiseDensity::sample`].
#[derive(Debug, Clone)]
pub struct StationarySampler {
    index: WeightedIndex<f64>,
}

/// Invariant density of the linear equation at rate `sigma`.
pub fn invariant_density(
    sigma: f64,
    params: &ModelParams,
    cfg: &SteadyConfig,
) -> Result<PiecewiseDensity, SteadyError> {
    let chain = Chain::solve(sigma, params.jump, params.v_reset, cfg)?;
    Ok(PiecewiseDensity::from_chain(chain, params.jump, params.v_reset))
}

/// `F(σ)`: stationary mass of the threshold band `[1−h, 1]`.
pub fn tail_fraction(sigma: f64, params: &ModelParams, cfg: &SteadyConfig) -> Result<f64, SteadyError> {
    Chain::solve(sigma, params.jump, params.v_reset, cfg).map(|c| c.atom)
}

/// `G(σ) = (1 − σ₀/σ)/J`.
pub fn g_map(sigma: f64, params: &ModelParams) -> Result<f64, SteadyError> {
    if params.coupling == 0.0 {
        return Err(SteadyError::ZeroCoupling);
    }
    if !(sigma > 0.0) {
        return Err(SteadyError::InvalidSigma(sigma));
    }
    Ok((1.0 - params.external_rate / sigma) / params.coupling)
}

/// What the existence theorem guarantees for the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryClaim {
    AtLeastOne,
    AtLeastTwo,
    NoClaim,
}

pub fn theory_claim(params: &ModelParams) -> TheoryClaim {
    let report = params.classify();
    let boundary = 1.0 + params.reset_gap_ratio().floor();
    if (params.coupling - boundary).abs() <= BOUNDARY_TOL * boundary {
        TheoryClaim::NoClaim
    } else if report.exists_two_ss {
        TheoryClaim::AtLeastTwo
    } else if report.exists_one_ss {
        TheoryClaim::AtLeastOne
    } else {
        TheoryClaim::NoClaim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyRoot {
    pub sigma_bar: f64,
    pub r_bar: f64,
    pub tail_mass: f64,
    /// `|σ̄ − σ₀/(1 − J F(σ̄))| / σ̄`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub points: usize,
    pub root_tol: f64,
    pub steady: SteadyConfig,
}

impl ScanConfig {
    /// Log scan over `[σ₀(1 + 1e−9), 1e4 σ₀]`.
    pub fn for_params(params: &ModelParams) -> Self {
        Self {
            sigma_min: params.external_rate * (1.0 + 1e-9),
            sigma_max: params.external_rate * DEFAULT_SIGMA_MAX_FACTOR,
            points: DEFAULT_SCAN_POINTS,
            root_tol: DEFAULT_ROOT_TOL,
            steady: SteadyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaScan {
    pub sigmas: Vec<f64>,
    pub f_values: Vec<f64>,
    pub g_values: Vec<f64>,
    pub roots: Vec<SteadyRoot>,
    /// Number of sign changes of `F − G`: a lower bound on the number of
    /// steady states in range.
    pub multiplicity: usize,
    pub claim: TheoryClaim,
    pub warnings: Vec<String>,
}

impl SigmaScan {
    /// Writes `sigma,F,G,F_minus_G`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "sigma,F,G,F_minus_G")?;
        for ((s, f), g) in self.sigmas.iter().zip(&self.f_values).zip(&self.g_values) {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(*s),
                fmt_f64(*f),
                fmt_f64(*g),
                fmt_f64(f - g)
            )?;
        }
        Ok(())
    }

    /// Writes the roots as a JSON array.
    pub fn write_roots_json<W: Write>(&self, out: W) -> io::Result<()> {
        serde_json::to_writer_pretty(out, &self.roots).map_err(io::Error::other)
    }
}

/// Steady states together with their densities.
#[derive(Debug, Clone)]
pub struct SteadyStates {
    pub scan: SigmaScan,
    pub densities: Vec<PiecewiseDensity>,
}

/// Scans `F − G` on a log grid, brackets sign changes and bisects each to
/// relative `root_tol`. With `J = 0` the only steady state is `σ̄ = σ₀`.
pub fn find_steady_states(params: &ModelParams, cfg: &ScanConfig) -> Result<SteadyStates, SteadyError> {
    let claim = theory_claim(params);
    if params.coupling == 0.0 {
        let density = invariant_density(params.external_rate, params, &cfg.steady)?;
        let root = SteadyRoot {
            sigma_bar: params.external_rate,
            r_bar: density.reset_jump,
            tail_mass: density.tail_mass,
            residual: 0.0,
        };
        return Ok(SteadyStates {
            scan: SigmaScan {
                sigmas: Vec::new(),
                f_values: Vec::new(),
                g_values: Vec::new(),
                roots: vec![root],
                multiplicity: 1,
                claim,
                warnings: Vec::new(),
            },
            densities: vec![density],
        });
    }
    if !(cfg.sigma_min > 0.0 && cfg.sigma_max > cfg.sigma_min && cfg.points >= 2) {
        return Err(SteadyError::InvalidSigma(cfg.sigma_min));
    }
    let ratio = (cfg.sigma_max / cfg.sigma_min).ln();
    let sigmas: Vec<f64> = (0..cfg.points)
        .map(|k| cfg.sigma_min * (ratio * k as f64 / (cfg.points - 1) as f64).exp())
        .collect();
    let f_values = map_indexed(sigmas.len(), |k| tail_fraction(sigmas[k], params, &cfg.steady))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let g_values = sigmas
        .iter()
        .map(|&s| g_map(s, params))
        .collect::<Result<Vec<_>, _>>()?;
    let diff = |k: usize| f_values[k] - g_values[k];

    let mut brackets = Vec::new();
    // G(σ₀) = 0 < F(σ₀): a root below the first scan point is bracketed by σ₀
    if diff(0) < 0.0 {
        let s0 = params.external_rate;
        if tail_fraction(s0, params, &cfg.steady)? > 0.0 {
            brackets.push((s0, sigmas[0]));
        }
    }
    for k in 0..sigmas.len() - 1 {
        let (a, b) = (diff(k), diff(k + 1));
        if a == 0.0 {
            brackets.push((sigmas[k], sigmas[k]));
        } else if a * b < 0.0 {
            brackets.push((sigmas[k], sigmas[k + 1]));
        }
    }
    if diff(sigmas.len() - 1) == 0.0 {
        let s = *sigmas.last().unwrap();
        brackets.push((s, s));
    }

    let refined = map_indexed(brackets.len(), |b| {
        let (lo, hi) = brackets[b];
        bisect(params, &cfg.steady, lo, hi, cfg.root_tol)
    });
    let mut roots = Vec::with_capacity(refined.len());
    let mut densities = Vec::with_capacity(refined.len());
    for sigma_bar in refined {
        let sigma_bar = sigma_bar?;
        let density = invariant_density(sigma_bar, params, &cfg.steady)?;
        let fixed = params.external_rate / (1.0 - params.coupling * density.tail_mass);
        roots.push(SteadyRoot {
            sigma_bar,
            r_bar: sigma_bar * density.tail_mass,
            tail_mass: density.tail_mass,
            residual: (sigma_bar - fixed).abs() / sigma_bar,
        });
        densities.push(density);
    }
    let mut warnings = Vec::new();
    if roots.is_empty() {
        warnings.push(format!(
            "no root of F - G in [{}, {}]",
            fmt_f64(cfg.sigma_min),
            fmt_f64(cfg.sigma_max)
        ));
    }
    Ok(SteadyStates {
        scan: SigmaScan {
            sigmas,
            f_values,
            g_values,
            multiplicity: roots.len(),
            roots,
            claim,
            warnings,
        },
        densities,
    })
}

fn bisect(params: &ModelParams, cfg: &SteadyConfig, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64, SteadyError> {
    let eval = |s: f64| -> Result<f64, SteadyError> { Ok(tail_fraction(s, params, cfg)? - g_map(s, params)?) };
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    let start = lo;
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    // the left end may be the excluded anchor σ₀
    let mut best = if f_lo.abs() <= f_hi.abs() && lo != start { (lo, f_lo) } else { (hi, f_hi) };
    if f_hi != f_lo {
        let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        if secant > lo && secant < hi {
            let f_sec = eval(secant)?;
            if f_sec.abs() < best.1.abs() {
                best = (secant, f_sec);
            }
        }
    }
    Ok(best.0)
}

/// `1 / (1 + ⌊(1 − v_r)/h⌋)`, the limit of `F` as `σ → ∞`.
pub fn large_rate_limit(params: &ModelParams) -> f64 {
    1.0 / (1.0 + (params.reset_gap_ratio() + INTEGER_RATIO_TOL).floor())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(h: f64, v_r: f64, sigma0: f64, coupling: f64) -> ModelParams {
        ModelParams::validate_ranges(h, v_r, sigma0, coupling).unwrap()
    }

    fn quick() -> SteadyConfig {
        SteadyConfig {
            cells: 1000,
            ..SteadyConfig::default()
        }
    }

    #[test]
    fn breakpoint_set() {
        let b = breakpoints(0.2, 0.1);
        let expected = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        assert_eq!(b.len(), expected.len());
        for (x, y) in b.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12);
        }
        let b = breakpoints(0.3, 0.25);
        assert_eq!(b.len(), 2 + 3 + 3);
    }

    #[test]
    fn unit_rate_head_is_flat() {
        let d = invariant_density(1.0, &params(0.2, 0.1, 1.0, 0.0), &quick()).unwrap();
        assert_eq!(d.head_exponent, 0.0);
        let a = d.density(0.01, Side::Right);
        let b = d.density(0.09, Side::Right);
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn normalized_and_positive() {
        for (h, v_r) in [(0.2, 0.1), (0.05, 0.3), (0.3, 0.25)] {
            for sigma in [0.5, 1.0, 2.0, 50.0] {
                let d = invariant_density(sigma, &params(h, v_r, 1.0, 0.0), &quick()).unwrap();
                assert!((d.mass() - 1.0).abs() < 1e-12);
                assert!((d.cdf(1.0) - 1.0).abs() < 1e-12);
                let inner: Vec<_> = d.samples().filter(|(v, _, _)| *v < 1.0).collect();
                assert!(inner.iter().all(|(_, p, _)| *p > 0.0), "h={h} sigma={sigma}");
            }
        }
    }

    #[test]
    fn reset_jump_matches_rate() {
        for sigma in [0.5, 2.0, 50.0] {
            let d = invariant_density(sigma, &params(0.05, 0.3, 1.0, 0.0), &quick()).unwrap();
            // D underflows relative to p for small rates, so compare on the
            // scale of u(v_r-)
            let scale = d.reset_jump + d.v_r * d.density(d.v_r, Side::Left);
            let err = (d.measured_jump() - d.reset_jump).abs() / scale;
            assert!(err < 1e-10, "sigma={sigma} err={err}");
        }
    }

    #[test]
    fn cdf_matches_cell_masses() {
        let d = invariant_density(3.0, &params(0.2, 0.1, 1.0, 0.0), &quick()).unwrap();
        let n = d.chain.mesh.n;
        for i in (0..n).step_by(37) {
            let a = i as f64 / n as f64;
            let b = (i + 1) as f64 / n as f64;
            assert!((d.cdf(b) - d.cdf(a) - d.chain.x[i]).abs() < 1e-12, "cell {i}");
        }
    }

    #[test]
    fn cdf_agrees_with_density() {
        let d = invariant_density(2.0, &params(0.05, 0.3, 1.0, 0.0), &quick()).unwrap();
        // derivative of the CDF away from cell faces
        for v in [0.1234, 0.3501, 0.6789, 0.9012] {
            let e = 1e-7;
            let fd = (d.cdf(v + e) - d.cdf(v - e)) / (2.0 * e);
            let p = d.density(v, Side::Right);
            assert!((fd - p).abs() < 2e-3 * p.max(1.0), "v={v}: {fd} vs {p}");
        }
    }

    #[test]
    fn frozen_tail_fractions() {
        // reference values from an independent implementation of the same
        // chain at 4000 cells
        let cfg = SteadyConfig::default();
        let cases = [
            (0.2, 0.1, 1.0, 7.632_e-4),
            (0.2, 0.1, 2.0, 1.617e-2),
            (0.2, 0.1, 50.0, 0.198_67),
            (0.05, 0.3, 50.0, 0.051_45),
        ];
        for (h, v_r, sigma, want) in cases {
            let f = tail_fraction(sigma, &params(h, v_r, 1.0, 0.0), &cfg).unwrap();
            assert!((f - want).abs() < 2e-3 * want, "h={h} sigma={sigma}: {f}");
        }
    }

    #[test]
    fn tail_limits() {
        let p = params(0.2, 0.1, 1.0, 0.0);
        let small = tail_fraction(1e-3, &p, &quick()).unwrap();
        assert!(small <= 1e-3 / 0.8);
        assert!((large_rate_limit(&p) - 0.2).abs() < 1e-15);
        let p = params(0.3, 0.25, 1.0, 0.0);
        assert!((large_rate_limit(&p) - 1.0 / 3.0).abs() < 1e-15);
        let big = tail_fraction(1e4, &p, &quick()).unwrap();
        assert!((big - 1.0 / 3.0).abs() < 0.02, "{big}");
    }

    #[test]
    fn g_examples() {
        let p = params(0.2, 0.1, 1.0, 2.0);
        assert_eq!(g_map(1.0, &p).unwrap(), 0.0);
        assert_eq!(g_map(2.0, &p).unwrap(), 0.25);
        assert!((g_map(1e12, &p).unwrap() - 0.5).abs() < 1e-11);
        assert_eq!(g_map(1.0, &params(0.2, 0.1, 1.0, 0.0)), Err(SteadyError::ZeroCoupling));
    }

    #[test]
    fn uncoupled_steady_state() {
        let p = params(0.2, 0.1, 1.5, 0.0);
        let s = find_steady_states(&p, &ScanConfig::for_params(&p)).unwrap();
        assert_eq!(s.scan.roots.len(), 1);
        assert_eq!(s.scan.roots[0].sigma_bar, 1.5);
    }

    #[test]
    fn claims() {
        assert_eq!(theory_claim(&params(0.2, 0.1, 1.0, 0.5)), TheoryClaim::AtLeastOne);
        assert_eq!(theory_claim(&params(0.2, 0.1, 0.02, 7.0)), TheoryClaim::AtLeastTwo);
        assert_eq!(theory_claim(&params(0.2, 0.1, 0.02, 5.0)), TheoryClaim::NoClaim);
        assert_eq!(theory_claim(&params(0.2, 0.1, 6.0, 6.0)), TheoryClaim::NoClaim);
    }

    #[test]
    fn grid_projection_keeps_tail() {
        let d = invariant_density(1.0, &params(0.2, 0.1, 1.0, 0.0), &quick()).unwrap();
        let g = d.to_grid(Mesh::new(100, 0.2, 0.1).unwrap()).unwrap();
        assert!((g.tail_mass() - d.tail_mass).abs() < 2.0 / 100.0);
        assert!((g.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_reproduces_tail() {
        use crate::rng::stream_rng;
        let d = invariant_density(50.0, &params(0.2, 0.1, 1.0, 0.0), &quick()).unwrap();
        let sampler = d.sampler();
        let mut rng = stream_rng(1, 0);
        let n = 20_000;
        let hits = (0..n).filter(|_| d.sample(&sampler, &mut rng) >= 0.8).count();
        let p = hits as f64 / n as f64;
        let se = (d.tail_mass * (1.0 - d.tail_mass) / n as f64).sqrt();
        assert!((p - d.tail_mass).abs() < 4.0 * se, "{p} vs {}", d.tail_mass);
    }

    #[test]
    fn csv_outputs() {
        let d = invariant_density(2.0, &params(0.2, 0.1, 1.0, 0.0), &quick()).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("v,p,segment_id\n"));
        assert_eq!(text.lines().count(), 1 + d.samples().count());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn tail_fraction_is_continuous(log_sigma in -1.0f64..3.0) {
            let p = params(0.2, 0.1, 1.0, 0.0);
            let s = 10f64.powf(log_sigma);
            let a = tail_fraction(s, &p, &quick()).unwrap();
            let b = tail_fraction(s * (1.0 + 1e-6), &p, &quick()).unwrap();
            prop_assert!((a - b).abs() <= 1e-3);
            prop_assert!(a > 0.0 && a < 1.0);
            prop_assert!(a <= s / 0.8 + 1e-12);
        }

        #[test]
        fn cdf_is_monotone(sigma in 0.2f64..80.0, v in 0.0f64..0.999) {
            let d = invariant_density(sigma, &params(0.05, 0.3, 1.0, 0.0), &quick()).unwrap();
            prop_assert!(d.cdf(v + 1e-3) >= d.cdf(v) - 1e-14);
        }
    }
}
