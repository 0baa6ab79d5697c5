//! Explicit finite-volume solver for the nonlinear mean-field equation
//!
//! ```text
//! ∂t p − ∂v(v p) + σ(t) [p(v) − p(v − h) 1{v ≥ h}] = r(t) δ(v − v_r),
//! r(t) = σ(t) ∫_{1−h}^1 p,   σ(t) = σ₀ / (1 − J ∫_{1−h}^1 p),   p(t, 1) = 0.
//! ```
//!
//! Transport toward 0 uses face fluxes (first-order upwind or a minmod
//! reconstruction with Heun time stepping). The jump term is an exact
//! index shift on the h-aligned mesh and the reset is a cell source, so
//! mass is conserved to round-off.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csv::fmt_f64;
use crate::grid::GridDensity;
use crate::model::ModelParams;

pub const DEFAULT_EPS_BLOW: f64 = 1e-6;
pub const DEFAULT_SIGMA_CAP: f64 = 1e8;
/// Fraction of the stability limit used by automatic steps.
pub const CFL_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("blow-up at t = {t_blow}: sigma reached {sigma_at_stop:e}")]
    BlowUp { t_blow: f64, sigma_at_stop: f64 },
    #[error("time step {dt:e} exceeds the stability limit {dt_max:e}")]
    CflViolation { dt: f64, dt_max: f64 },
    #[error("state already blew up at t = {t_blow}")]
    AlreadyBlownUp { t_blow: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Spatial discretization of the leak term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxScheme {
    /// First-order upwind, forward Euler. Monotone: TV distances between
    /// two solutions never increase.
    Upwind,
    /// Minmod-limited linear reconstruction, Heun (SSP-RK2) in time.
    #[default]
    Minmod,
}

impl FluxScheme {
    /// Largest positivity-preserving step for `n` cells at rate `sigma`.
    pub fn dt_max(self, n: usize, sigma: f64) -> f64 {
        let transport = (n - 1) as f64;
        match self {
            Self::Upwind => 1.0 / (transport + sigma),
            Self::Minmod => 1.0 / (1.5 * transport + sigma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeState {
    pub g: GridDensity,
    pub t: f64,
    pub sigma: f64,
    pub r: f64,
    pub tail_mass: f64,
    /// Time of blow-up, once it has happened. The density is frozen.
    pub blown_up: Option<f64>,
}

impl PdeState {
    /// State at time `t` with the rate closure evaluated on `g`.
    pub fn new(g: GridDensity, params: &ModelParams, t: f64, eps_blow: f64) -> Result<Self, PdeError> {
        let tail_mass = g.tail_mass();
        let sigma = closure(params, tail_mass, eps_blow).ok_or(PdeError::BlowUp {
            t_blow: t,
            sigma_at_stop: f64::INFINITY,
        })?;
        Ok(Self {
            g,
            t,
            sigma,
            r: sigma * tail_mass,
            tail_mass,
            blown_up: None,
        })
    }

    pub fn mass(&self) -> f64 {
        self.g.mass()
    }
}

/// `σ₀ / (1 − J·tail)`, or `None` when the denominator is at most `eps_blow`.
pub fn closure(params: &ModelParams, tail_mass: f64, eps_blow: f64) -> Option<f64> {
    let denom = 1.0 - params.coupling * tail_mass;
    (denom > eps_blow).then(|| params.external_rate / denom)
}

/// Time step choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeStep {
    /// `CFL_SAFETY · dt_max`, re-evaluated every step.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub dt: TimeStep,
    pub t_end: f64,
    /// Times at which full states are returned, within `[0, t_end]`.
    pub output_times: Vec<f64>,
    pub eps_blow: f64,
    pub sigma_cap: f64,
    pub scheme: FluxScheme,
    /// Record a series row every this many steps (0 records only outputs).
    pub series_every: usize,
    /// Reject fixed steps above the stability limit.
    pub enforce_cfl: bool,
}

impl SolveConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            dt: TimeStep::Auto,
            t_end,
            output_times: vec![t_end],
            eps_blow: DEFAULT_EPS_BLOW,
            sigma_cap: DEFAULT_SIGMA_CAP,
            scheme: FluxScheme::default(),
            series_every: 1,
            enforce_cfl: true,
        }
    }

    pub fn with_outputs(mut self, times: Vec<f64>) -> Self {
        self.output_times = times;
        self
    }

    pub fn with_scheme(mut self, scheme: FluxScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_dt(mut self, dt: TimeStep) -> Self {
        self.dt = dt;
        self
    }

    /// `count + 1` equally spaced output times from 0 to `t_end`.
    pub fn uniform_outputs(mut self, count: usize) -> Self {
        self.output_times = (0..=count)
            .map(|k| self.t_end * k as f64 / count as f64)
            .collect();
        self
    }

    fn validate(&self) -> Result<(), PdeError> {
        let bad = |msg: String| Err(PdeError::InvalidConfig(msg));
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {}", self.t_end));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt = {dt}"));
            }
        }
        if self.output_times.windows(2).any(|w| w[1] < w[0]) {
            return bad("output times must be nondecreasing".into());
        }
        if self
            .output_times
            .iter()
            .any(|&t| !(0.0..=self.t_end).contains(&t))
        {
            return bad("output times must lie in [0, t_end]".into());
        }
        if !(self.eps_blow >= 0.0) || !(self.sigma_cap > 0.0) {
            return bad("eps_blow must be >= 0 and sigma_cap > 0".into());
        }
        Ok(())
    }
}

/// Scratch buffers for the right-hand side.
struct Workspace {
    slope: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    stage: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            slope: vec![0.0; n],
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            stage: vec![0.0; n],
        }
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Writes `dp/dt` into `out` for frozen `sigma`; returns the firing rate.
fn rhs(
    p: &[f64],
    g: &GridDensity,
    sigma: f64,
    scheme: FluxScheme,
    slope: &mut [f64],
    out: &mut [f64],
) -> f64 {
    let mesh = g.mesh;
    let n = mesh.n;
    let dv = mesh.dv;
    match scheme {
        FluxScheme::Upwind => slope.iter_mut().for_each(|s| *s = 0.0),
        FluxScheme::Minmod => {
            slope[0] = 0.0;
            for i in 1..n {
                let right = if i + 1 < n { p[i + 1] } else { 0.0 };
                slope[i] = minmod(p[i] - p[i - 1], right - p[i]);
            }
        }
    }
    out.iter_mut().for_each(|x| *x = 0.0);
    // leftward transport across interior faces; nothing enters at v = 1
    for j in 0..n - 1 {
        let v_face = (j + 1) as f64 * dv;
        let flux = v_face * (p[j + 1] - 0.5 * slope[j + 1]) / dv;
        out[j] += flux;
        out[j + 1] -= flux;
    }
    let m = mesh.m_jump;
    for i in 0..n {
        out[i] -= sigma * p[i];
    }
    for i in m..n {
        out[i] += sigma * p[i - m];
    }
    let tail: f64 = p[n - m..].iter().sum::<f64>() * dv;
    let r = sigma * tail;
    out[mesh.i_reset] += r / dv;
    r
}

fn advance(g: &mut GridDensity, sigma: f64, dt: f64, scheme: FluxScheme, ws: &mut Workspace) {
    let Workspace {
        slope,
        k1,
        k2,
        stage,
    } = ws;
    rhs(&g.values, g, sigma, scheme, slope, k1);
    match scheme {
        FluxScheme::Upwind => {
            for (p, k) in g.values.iter_mut().zip(k1.iter()) {
                *p += dt * k;
            }
        }
        FluxScheme::Minmod => {
            for ((s, p), k) in stage.iter_mut().zip(&g.values).zip(k1.iter()) {
                *s = p + dt * k;
            }
            rhs(stage, g, sigma, scheme, slope, k2);
            for ((p, s), k) in g.values.iter_mut().zip(stage.iter()).zip(k2.iter()) {
                *p = 0.5 * (*p + s + dt * k);
            }
        }
    }
}

fn check_dt(state: &PdeState, dt: f64, scheme: FluxScheme) -> Result<(), PdeError> {
    let dt_max = scheme.dt_max(state.g.n(), state.sigma);
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(PdeError::CflViolation { dt, dt_max });
    }
    Ok(())
}

/// One explicit step of size `dt` with `σ` frozen at its current value.
pub fn step(
    state: &PdeState,
    params: &ModelParams,
    dt: f64,
    scheme: FluxScheme,
) -> Result<PdeState, PdeError> {
    if let Some(t_blow) = state.blown_up {
        return Err(PdeError::AlreadyBlownUp { t_blow });
    }
    check_dt(state, dt, scheme)?;
    let mut ws = Workspace::new(state.g.n());
    step_with(state, params, dt, scheme, DEFAULT_EPS_BLOW, DEFAULT_SIGMA_CAP, &mut ws)
}

fn step_with(
    state: &PdeState,
    params: &ModelParams,
    dt: f64,
    scheme: FluxScheme,
    eps_blow: f64,
    sigma_cap: f64,
    ws: &mut Workspace,
) -> Result<PdeState, PdeError> {
    let mut g = state.g.clone();
    advance(&mut g, state.sigma, dt, scheme, ws);
    let t = state.t + dt;
    let tail_mass = g.tail_mass();
    match closure(params, tail_mass, eps_blow) {
        Some(sigma) if sigma <= sigma_cap => Ok(PdeState {
            g,
            t,
            sigma,
            r: sigma * tail_mass,
            tail_mass,
            blown_up: None,
        }),
        _ => Err(PdeError::BlowUp {
            t_blow: t,
            sigma_at_stop: state.sigma,
        }),
    }
}

/// One row of the scalar time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub sigma: f64,
    pub r: f64,
    pub tail_mass: f64,
    pub mass: f64,
}

impl SeriesRow {
    fn of(state: &PdeState) -> Self {
        Self {
            t: state.t,
            sigma: state.sigma,
            r: state.r,
            tail_mass: state.tail_mass,
            mass: state.mass(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUpReport {
    pub blown_up: bool,
    pub t_blow: Option<f64>,
    /// Last finite rate before the run stopped (or at `t_end`).
    pub sigma_at_stop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// One state per requested output time. After blow-up these repeat the
    /// frozen state with `blown_up` set.
    pub outputs: Vec<PdeState>,
    pub series: Vec<SeriesRow>,
    pub blow_up: BlowUpReport,
    pub steps: usize,
}

impl Solution {
    /// Writes `t,sigma,r,tail_mass,mass`.
    pub fn write_series_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,sigma,r,tail_mass,mass")?;
        for row in &self.series {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(row.t),
                fmt_f64(row.sigma),
                fmt_f64(row.r),
                fmt_f64(row.tail_mass),
                fmt_f64(row.mass)
            )?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&PdeState> {
        self.outputs.last()
    }
}

/// Marches `mu0` to `cfg.t_end`, landing exactly on every output time.
pub fn solve(mu0: &GridDensity, params: &ModelParams, cfg: &SolveConfig) -> Result<Solution, PdeError> {
    cfg.validate()?;
    let n = mu0.n();
    let mut ws = Workspace::new(n);
    let mut outputs = Vec::with_capacity(cfg.output_times.len());
    let mut series = Vec::new();
    let mut steps = 0usize;

    let frozen = |state: &PdeState, t_blow: f64| PdeState {
        blown_up: Some(t_blow),
        ..state.clone()
    };

    let mut state = match PdeState::new(mu0.clone(), params, 0.0, cfg.eps_blow) {
        Ok(s) => s,
        Err(PdeError::BlowUp { .. }) => {
            // the closure is already singular on the initial datum
            let tail = mu0.tail_mass();
            let s = PdeState {
                g: mu0.clone(),
                t: 0.0,
                sigma: f64::INFINITY,
                r: f64::INFINITY,
                tail_mass: tail,
                blown_up: Some(0.0),
            };
            outputs.extend(cfg.output_times.iter().map(|_| s.clone()));
            return Ok(Solution {
                outputs,
                series,
                blow_up: BlowUpReport {
                    blown_up: true,
                    t_blow: Some(0.0),
                    sigma_at_stop: f64::INFINITY,
                },
                steps,
            });
        }
        Err(e) => return Err(e),
    };

    let mut pending = cfg.output_times.iter().copied().peekable();
    if cfg.series_every > 0 {
        series.push(SeriesRow::of(&state));
    }
    let mut blow_up = None;
    loop {
        while let Some(&t_out) = pending.peek() {
            if t_out > state.t {
                break;
            }
            outputs.push(state.clone());
            pending.next();
        }
        if state.t >= cfg.t_end {
            break;
        }
        let dt_max = cfg.scheme.dt_max(n, state.sigma);
        let mut dt = match cfg.dt {
            TimeStep::Auto => CFL_SAFETY * dt_max,
            TimeStep::Fixed(dt) => {
                if cfg.enforce_cfl && dt > dt_max * (1.0 + 1e-12) {
                    return Err(PdeError::CflViolation { dt, dt_max });
                }
                dt
            }
        };
        let target = pending.peek().copied().unwrap_or(cfg.t_end).min(cfg.t_end);
        // avoid a sliver step just before an output time
        if state.t + dt * (1.0 + 1e-9) >= target {
            dt = target - state.t;
        }
        match step_with(&state, params, dt, cfg.scheme, cfg.eps_blow, cfg.sigma_cap, &mut ws) {
            Ok(mut next) => {
                if next.t > target - 1e-12 * target.max(1.0) {
                    next.t = target;
                }
                state = next;
                steps += 1;
                let last = state.t >= cfg.t_end;
                if cfg.series_every > 0 && (steps % cfg.series_every == 0 || last) {
                    series.push(SeriesRow::of(&state));
                }
            }
            Err(PdeError::BlowUp {
                t_blow,
                sigma_at_stop,
            }) => {
                blow_up = Some((t_blow, sigma_at_stop));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let blow_up = match blow_up {
        Some((t_blow, sigma_at_stop)) => {
            let s = frozen(&state, t_blow);
            outputs.extend(pending.map(|_| s.clone()));
            BlowUpReport {
                blown_up: true,
                t_blow: Some(t_blow),
                sigma_at_stop,
            }
        }
        None => BlowUpReport {
            blown_up: false,
            t_blow: None,
            sigma_at_stop: state.sigma,
        },
    };
    Ok(Solution {
        outputs,
        series,
        blow_up,
        steps,
    })
}

/// `|μ_t f − μ_0 f − ∫_0^t μ_s(A_{σ(s)} f) ds|` over the stored states,
/// trapezoidal in time and midpoint in `v`, where
/// `A_σ f(v) = −v f'(v) + σ [f(v + h) 1{v < 1−h} + f(v_r) 1{v ≥ 1−h} − f(v)]`.
pub fn weak_residual(
    states: &[PdeState],
    params: &ModelParams,
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
) -> f64 {
    if states.len() < 2 {
        return 0.0;
    }
    let generator = |s: &PdeState| {
        let mesh = s.g.mesh;
        let h = mesh.h_effective;
        let tail_start = mesh.tail_start();
        let f_reset = f(params.v_reset);
        s.g.values
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let v = mesh.center(i);
                let landed = if i < tail_start { f(v + h) } else { f_reset };
                p * (-v * df(v) + s.sigma * (landed - f(v)))
            })
            .sum::<f64>()
            * mesh.dv
    };
    let pairing = |s: &PdeState| s.g.integrate(f);
    let mut integral = 0.0;
    let mut prev = generator(&states[0]);
    for w in states.windows(2) {
        let next = generator(&w[1]);
        integral += 0.5 * (w[1].t - w[0].t) * (prev + next);
        prev = next;
    }
    let last = states.last().unwrap();
    (pairing(last) - pairing(&states[0]) - integral).abs()
}
