//! Contraction constants and numerical verification of exponential decay in
//! total variation, for the linear (`J = 0`) and weakly coupled equations.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csv::fmt_f64;
use crate::grid::{tv_distance, GridDensity, GridError};
use crate::model::ModelParams;
use crate::pde::{solve, FluxScheme, PdeError, SolveConfig, TimeStep};
use crate::pdmp::{doeblin_mass, doeblin_time};

/// Relative slack on the theoretical envelopes.
pub const ENVELOPE_SLACK: f64 = 0.05;
/// Below this TV values are treated as zero when fitting.
pub const TV_FLOOR: f64 = 1e-12;
const INCONCLUSIVE_OMEGA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least 5 usable points in the window, got {found}")]
    InsufficientData { found: usize },
    #[error("TV {tv:e} exceeds envelope {envelope:e} at t = {t}")]
    ToleranceExceeded { t: f64, tv: f64, envelope: f64 },
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    NotShown,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionConstants {
    /// `log(4/h)`.
    pub t0: f64,
    /// `(σ₀/2)(h/4)^σ₀`.
    pub c: f64,
    /// `−log(1−c)/t0`.
    pub a: f64,
    /// `2σ₀J/((1−c)(1−J)²) + log(1−c)/log(4/h)`.
    pub omega: f64,
    /// `1/(1−c)`.
    pub prefactor: f64,
    /// Sign of `omega`.
    pub stability: Stability,
}

impl ContractionConstants {
    pub fn new(params: &ModelParams) -> Self {
        let h = params.jump;
        let s0 = params.external_rate;
        let j = params.coupling;
        let t0 = doeblin_time(h);
        let c = doeblin_mass(h, s0);
        let log1mc = (-c).ln_1p();
        let omega = 2.0 * s0 * j / ((1.0 - c) * (1.0 - j).powi(2)) + log1mc / t0;
        let stability = if omega.abs() < INCONCLUSIVE_OMEGA {
            Stability::Inconclusive
        } else if omega < 0.0 {
            Stability::Stable
        } else {
            Stability::NotShown
        };
        Self {
            t0,
            c,
            a: -log1mc / t0,
            omega,
            prefactor: 1.0 / (1.0 - c),
            stability,
        }
    }

    /// Linear envelope factor `e^{−a(t − t0)}`.
    pub fn linear_envelope(&self, t: f64) -> f64 {
        (-self.a * (t - self.t0)).exp()
    }

    /// Nonlinear envelope factor `e^{ωt}/(1−c)`.
    pub fn nonlinear_envelope(&self, t: f64) -> f64 {
        self.prefactor * (self.omega * t).exp()
    }
}

/// Least-squares decay rate of `log tv` against `t` over `window`; positive
/// means decaying.
pub fn fit_rate(times: &[f64], tv: &[f64], window: (f64, f64)) -> Result<f64, AnalysisError> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(tv)
        .filter(|(t, v)| **t >= window.0 && **t <= window.1 && **v > TV_FLOOR)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(AnalysisError::InsufficientData { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::InsufficientData { found: 1 });
    }
    Ok(-sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub tv_values: Vec<f64>,
    /// Envelope with slack, `NaN`-free; empty when no claim applies.
    pub envelope: Vec<f64>,
    pub fitted_rate: Option<f64>,
    /// `a` in linear mode, `−ω` in nonlinear mode; `None` outside the
    /// hypotheses of the theorem.
    pub theory_rate: Option<f64>,
    pub window: (f64, f64),
    /// Largest `tv / envelope` over the checked times.
    pub worst_ratio: f64,
    pub monotone: bool,
}

impl DecayReport {
    /// Writes `t,tv,envelope` (empty envelope cells when there is no claim).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,tv,envelope")?;
        for (k, (t, tv)) in self.times.iter().zip(&self.tv_values).enumerate() {
            let env = self.envelope.get(k).map(|e| fmt_f64(*e)).unwrap_or_default();
            writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(*tv), env)?;
        }
        Ok(())
    }
}

/// Settings shared by the two verifications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub t_end: f64,
    /// Number of TV samples after `t = 0`.
    pub samples: usize,
    pub dt: TimeStep,
    pub scheme: FluxScheme,
    pub slack: f64,
    pub enforce_cfl: bool,
}

impl DecayConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            samples: 200,
            dt: TimeStep::Auto,
            scheme: FluxScheme::Upwind,
            slack: ENVELOPE_SLACK,
            enforce_cfl: true,
        }
    }

    fn solve_config(&self) -> SolveConfig {
        let mut cfg = SolveConfig::new(self.t_end)
            .with_scheme(self.scheme)
            .with_dt(self.dt)
            .uniform_outputs(self.samples);
        cfg.series_every = 0;
        cfg.enforce_cfl = self.enforce_cfl;
        cfg
    }
}

fn tv_series(
    a: &[crate::pde::PdeState],
    b: impl Fn(usize) -> GridDensity,
) -> Result<Vec<f64>, GridError> {
    a.iter()
        .enumerate()
        .map(|(k, s)| tv_distance(&s.g, &b(k)))
        .collect()
}

fn finish(
    times: Vec<f64>,
    tv: Vec<f64>,
    envelope: Option<Vec<f64>>,
    check_after: f64,
    theory_rate: Option<f64>,
) -> Result<DecayReport, AnalysisError> {
    let t_end = *times.last().unwrap_or(&0.0);
    let window = (0.5 * t_end, t_end);
    let fitted_rate = fit_rate(&times, &tv, window).ok();
    let monotone = tv.windows(2).all(|w| w[1] <= w[0] + 1e-14);
    let mut worst_ratio: f64 = 0.0;
    let envelope = envelope.unwrap_or_default();
    let mut violation = None;
    for (k, e) in envelope.iter().enumerate() {
        if times[k] <= check_after {
            continue;
        }
        let ratio = if *e > 0.0 { tv[k] / e } else { f64::INFINITY };
        if ratio > worst_ratio {
            worst_ratio = ratio;
        }
        if tv[k] > *e && violation.is_none() {
            violation = Some((times[k], tv[k], *e));
        }
    }
    if let Some((t, tv, envelope)) = violation {
        return Err(AnalysisError::ToleranceExceeded { t, tv, envelope });
    }
    Ok(DecayReport {
        times,
        tv_values: tv,
        envelope,
        fitted_rate,
        theory_rate,
        window,
        worst_ratio,
        monotone,
    })
}

/// Runs the linear equation (`J` forced to 0) from two initial densities and
/// checks `TV(t) ≤ (1 + slack) e^{−a(t − t0)} TV(0)` for `t > t0`.
pub fn verify_linear_contraction(
    mu0_a: &GridDensity,
    mu0_b: &GridDensity,
    params: &ModelParams,
    cfg: &DecayConfig,
) -> Result<DecayReport, AnalysisError> {
    let linear = params.with_coupling(0.0);
    let consts = ContractionConstants::new(&linear);
    let solve_cfg = cfg.solve_config();
    let sa = solve(mu0_a, &linear, &solve_cfg)?;
    let sb = solve(mu0_b, &linear, &solve_cfg)?;
    let times: Vec<f64> = sa.outputs.iter().map(|s| s.t).collect();
    let tv = tv_series(&sa.outputs, |k| sb.outputs[k].g.clone())?;
    let tv0 = tv[0];
    if tv0 == 0.0 {
        return Ok(DecayReport {
            times,
            tv_values: tv,
            envelope: Vec::new(),
            fitted_rate: None,
            theory_rate: Some(consts.a),
            window: (0.5 * cfg.t_end, cfg.t_end),
            worst_ratio: 0.0,
            monotone: true,
        });
    }
    let envelope = times
        .iter()
        .map(|&t| (1.0 + cfg.slack) * consts.linear_envelope(t) * tv0)
        .collect();
    finish(times, tv, Some(envelope), consts.t0, Some(consts.a))
}

/// Runs the nonlinear equation from `mu0` and records the TV distance to
/// the steady state `mu_bar`. Inside the weak-coupling region it checks
/// `TV(t) ≤ (1 + slack) e^{ωt}/(1−c) TV(0)`; outside it only observes.
pub fn verify_nonlinear_stability(
    mu0: &GridDensity,
    mu_bar: &GridDensity,
    params: &ModelParams,
    cfg: &DecayConfig,
) -> Result<DecayReport, AnalysisError> {
    let consts = ContractionConstants::new(params);
    let claim = params.classify().unique_stable_ss && consts.stability == Stability::Stable;
    let sol = solve(mu0, params, &cfg.solve_config())?;
    if sol.blow_up.blown_up {
        return Err(AnalysisError::Pde(PdeError::BlowUp {
            t_blow: sol.blow_up.t_blow.unwrap_or(0.0),
            sigma_at_stop: sol.blow_up.sigma_at_stop,
        }));
    }
    let times: Vec<f64> = sol.outputs.iter().map(|s| s.t).collect();
    let tv = tv_series(&sol.outputs, |_| mu_bar.clone())?;
    let tv0 = tv[0];
    let envelope = claim.then(|| {
        times
            .iter()
            .map(|&t| (1.0 + cfg.slack) * consts.nonlinear_envelope(t) * tv0)
            .collect()
    });
    finish(times, tv, envelope, 0.0, claim.then_some(-consts.omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Mesh;
    use proptest::prelude::*;

    fn params(h: f64, v_r: f64, sigma0: f64, coupling: f64) -> ModelParams {
        ModelParams::validate_ranges(h, v_r, sigma0, coupling).unwrap()
    }

    #[test]
    fn constants_reference() {
        let c = ContractionConstants::new(&params(0.2, 0.1, 1.0, 0.0));
        assert!((c.t0 - 2.995_732_273_553_991).abs() < 1e-14);
        assert!((c.c - 0.025).abs() < 1e-16);
        assert!((c.a - 0.008_451_291_928_785_766).abs() < 1e-15);
        assert!((c.prefactor - 1.0 / 0.975).abs() < 1e-15);
        let c = ContractionConstants::new(&params(0.2, 0.1, 1.0, 2e-4));
        assert!((c.omega - (-0.008_040_871_366_721_352)).abs() < 1e-15);
        assert_eq!(c.stability, Stability::Stable);
        let c = ContractionConstants::new(&params(0.2, 0.1, 1.0, 0.5));
        assert_eq!(c.stability, Stability::NotShown);
    }

    #[test]
    fn fit_examples() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let tv: Vec<f64> = t.iter().map(|t| (-0.5 * t).exp()).collect();
        assert!((fit_rate(&t, &tv, (0.0, 9.0)).unwrap() - 0.5).abs() < 1e-9);
        let flat = vec![0.3; 10];
        assert!(fit_rate(&t, &flat, (0.0, 9.0)).unwrap().abs() < 1e-15);
        assert!(matches!(
            fit_rate(&t[..4], &tv[..4], (0.0, 9.0)),
            Err(AnalysisError::InsufficientData { found: 4 })
        ));
        let zero = vec![0.0; 10];
        assert!(fit_rate(&t, &zero, (0.0, 9.0)).is_err());
    }

    #[test]
    fn fit_with_noise() {
        use crate::rng::stream_rng;
        use rand::Rng;
        let mut rng = stream_rng(3, 0);
        let t: Vec<f64> = (0..40).map(|k| k as f64 * 0.2).collect();
        let tv: Vec<f64> = t
            .iter()
            .map(|t| (-0.5 * t).exp() + 1e-3 * (rng.random::<f64>() - 0.5))
            .collect();
        let rate = fit_rate(&t, &tv, (0.0, 8.0)).unwrap();
        assert!((rate - 0.5).abs() < 0.05, "{rate}");
    }

    #[test]
    fn identical_data_do_not_fit() {
        let mesh = Mesh::new(50, 0.2, 0.1).unwrap();
        let g = GridDensity::uniform(mesh);
        let r = verify_linear_contraction(&g, &g, &params(0.2, 0.1, 1.0, 0.0), &DecayConfig::new(5.0)).unwrap();
        assert!(r.tv_values.iter().all(|&x| x == 0.0));
        assert_eq!(r.fitted_rate, None);
    }

    #[test]
    fn short_linear_run_holds() {
        let mesh = Mesh::new(100, 0.2, 0.1).unwrap();
        let a = GridDensity::dirac(mesh, 0.0);
        let b = GridDensity::dirac(mesh, 0.999);
        let r = verify_linear_contraction(&a, &b, &params(0.2, 0.1, 1.0, 0.0), &DecayConfig::new(20.0)).unwrap();
        assert!(r.monotone);
        assert!(r.worst_ratio <= 1.0);
    }

    #[test]
    fn cfl_violation_is_caught() {
        let mesh = Mesh::new(100, 0.2, 0.1).unwrap();
        let a = GridDensity::dirac(mesh, 0.0);
        let b = GridDensity::dirac(mesh, 0.999);
        let p = params(0.2, 0.1, 1.0, 0.0);
        let mut cfg = DecayConfig::new(20.0);
        cfg.dt = TimeStep::Fixed(0.05);
        assert!(matches!(
            verify_linear_contraction(&a, &b, &p, &cfg),
            Err(AnalysisError::Pde(PdeError::CflViolation { .. }))
        ));
        cfg.enforce_cfl = false;
        let out = verify_linear_contraction(&a, &b, &p, &cfg);
        assert!(
            matches!(out, Err(AnalysisError::ToleranceExceeded { .. })),
            "{out:?}"
        );
    }

    #[test]
    fn no_claim_outside_region() {
        let mesh = Mesh::new(100, 0.2, 0.1).unwrap();
        let p = params(0.2, 0.1, 1.0, 0.5);
        let u = GridDensity::uniform(mesh);
        let g = GridDensity::gaussian(mesh, 0.4, 0.1).unwrap();
        let r = verify_nonlinear_stability(&g, &u, &p, &DecayConfig::new(5.0)).unwrap();
        assert_eq!(r.theory_rate, None);
        assert!(r.envelope.is_empty());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap().ends_with(','));
    }

    proptest! {
        #[test]
        fn constants_are_sane(h in 0.01f64..0.5, sigma0 in 1e-3f64..50.0) {
            let c = ContractionConstants::new(&params(h, 0.37, sigma0, 0.0));
            prop_assert!(c.c > 0.0 && c.c < 1.0);
            prop_assert!(c.c <= 1.0 / (4.0 * std::f64::consts::E * 2f64.ln()) + 1e-15);
            prop_assert!(c.a > 0.0 && c.t0 > 0.0);
            prop_assert_eq!(c, ContractionConstants::new(&params(h, 0.37, sigma0, 0.0)));
        }

        #[test]
        fn weak_coupling_is_stable(h in 0.01f64..0.5, sigma0 in 1e-3f64..5.0, frac in 0.0f64..0.999) {
            let threshold = crate::model::uniqueness_threshold(h, sigma0);
            let c = ContractionConstants::new(&params(h, 0.37, sigma0, frac * threshold));
            prop_assert!(c.omega < 0.0);
        }
    }
}
