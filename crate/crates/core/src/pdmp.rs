//! Event-exact simulation of the LIF jump process and of finite networks.
//!
//! Between events the potential decays as `v e^{-t}`; inputs arrive as a
//! Poisson stream and add `h`; reaching 1 fires a spike and resets to `v_r`.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csv::fmt_f64;
use crate::model::ModelParams;
use crate::par::map_indexed;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdmpError {
    #[error("coupling J = {coupling} exceeds N - 1 = {max}")]
    CouplingTooLarge { coupling: f64, max: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One neuron driven by a Poisson stream of rate `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifProcess {
    pub h: f64,
    pub v_r: f64,
    pub sigma: f64,
}

impl LifProcess {
    pub fn new(params: &ModelParams, sigma: f64) -> Self {
        Self {
            h: params.jump,
            v_r: params.v_reset,
            sigma,
        }
    }

    /// Time to the next input.
    pub fn next_arrival<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma > 0.0 {
            let e: f64 = rng.sample(Exp1);
            e / self.sigma
        } else {
            f64::INFINITY
        }
    }

    /// Applies one input to `v`; returns the new potential and whether it fired.
    pub fn kick(&self, v: f64) -> (f64, bool) {
        let w = v + self.h;
        if w >= 1.0 {
            (self.v_r, true)
        } else {
            (w, false)
        }
    }

    /// Potential at time `t` started from `v0`, plus the number of spikes.
    pub fn run_to<R: Rng + ?Sized>(&self, v0: f64, t: f64, rng: &mut R) -> (f64, u64) {
        let mut v = v0;
        let mut now = 0.0;
        let mut spikes = 0;
        loop {
            let dt = self.next_arrival(rng);
            if now + dt > t {
                return (v * (-(t - now)).exp(), spikes);
            }
            now += dt;
            let (w, fired) = self.kick(v * (-dt).exp());
            v = w;
            spikes += u64::from(fired);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub t: f64,
    pub neuron: usize,
    pub cascade: u64,
}

/// Spike raster: time-ordered events, each tagged with the cascade it
/// belongs to. Spikes sharing a cascade id happened at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub events: Vec<SpikeEvent>,
    pub n_neurons: usize,
    pub horizon: f64,
}

impl SpikeRecord {
    pub fn new(n_neurons: usize, horizon: f64) -> Self {
        Self {
            events: Vec::new(),
            n_neurons,
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of spikes in each cascade, in cascade order.
    pub fn cascade_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = Vec::new();
        let mut last = None;
        for e in &self.events {
            if last == Some(e.cascade) {
                *sizes.last_mut().unwrap() += 1;
            } else {
                sizes.push(1);
                last = Some(e.cascade);
            }
        }
        sizes
    }

    pub fn max_cascade(&self) -> usize {
        self.cascade_sizes().into_iter().max().unwrap_or(0)
    }

    /// Spikes per neuron per unit time.
    pub fn mean_rate(&self) -> f64 {
        self.events.len() as f64 / (self.n_neurons as f64 * self.horizon)
    }

    /// Writes `t,neuron,cascade`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,neuron,cascade")?;
        for e in &self.events {
            writeln!(out, "{},{},{}", fmt_f64(e.t), e.neuron, e.cascade)?;
        }
        Ok(())
    }
}

/// Result of [`simulate_neuron`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronRun {
    /// `(t, v)` at each requested sample time.
    pub trajectory: Vec<(f64, f64)>,
    pub spikes: SpikeRecord,
    pub final_v: f64,
}

impl NeuronRun {
    /// Writes `t,v`.
    pub fn write_trajectory_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,v")?;
        for &(t, v) in &self.trajectory {
            writeln!(out, "{},{}", fmt_f64(t), fmt_f64(v))?;
        }
        Ok(())
    }
}

fn check_v0(v0: f64) -> Result<(), PdmpError> {
    if (0.0..1.0).contains(&v0) {
        Ok(())
    } else {
        Err(PdmpError::InvalidArgument(format!(
            "initial potential {v0} not in [0, 1)"
        )))
    }
}

fn check_horizon(horizon: f64) -> Result<(), PdmpError> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(PdmpError::InvalidArgument(format!(
            "horizon {horizon} must be positive and finite"
        )))
    }
}

/// Simulates one neuron with input rate `sigma0` (the coupling is ignored).
/// Every spike is its own cascade.
pub fn simulate_neuron(
    params: &ModelParams,
    v0: f64,
    horizon: f64,
    sample_times: &[f64],
    seed: u64,
) -> Result<NeuronRun, PdmpError> {
    check_v0(v0)?;
    check_horizon(horizon)?;
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(PdmpError::InvalidArgument(
            "sample times must be nondecreasing".into(),
        ));
    }
    let process = LifProcess::new(params, params.external_rate);
    let mut rng = stream_rng(seed, 0);
    let mut spikes = SpikeRecord::new(1, horizon);
    let mut trajectory = Vec::with_capacity(sample_times.len());
    let mut samples = sample_times.iter().copied().filter(|&s| s <= horizon).peekable();
    let mut v = v0;
    let mut now = 0.0;
    loop {
        let next = (now + process.next_arrival(&mut rng)).min(horizon);
        while let Some(&s) = samples.peek() {
            if s >= next && next < horizon {
                break;
            }
            trajectory.push((s, v * (-(s - now)).exp()));
            samples.next();
        }
        if next >= horizon {
            v *= (-(horizon - now)).exp();
            break;
        }
        let (w, fired) = process.kick(v * (-(next - now)).exp());
        if fired {
            let cascade = spikes.events.len() as u64;
            spikes.events.push(SpikeEvent {
                t: next,
                neuron: 0,
                cascade,
            });
        }
        v = w;
        now = next;
    }
    Ok(NeuronRun {
        trajectory,
        spikes,
        final_v: v,
    })
}

/// Result of [`simulate_network`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRun {
    pub spikes: SpikeRecord,
    /// Potentials at the horizon.
    pub final_v: Vec<f64>,
    pub external_arrivals: u64,
}

/// Simulates `v0.len()` coupled neurons up to `horizon`.
///
/// External inputs form one Poisson stream of rate `N σ₀` whose events pick
/// a neuron uniformly. Each spike gives every other neuron an independent
/// kick with probability `J / (N - 1)`. Spikes caused at one instant are
/// resolved breadth first in neuron order and share a cascade id; a neuron
/// fires at most once per cascade and ignores kicks after it has fired.
pub fn simulate_network(
    params: &ModelParams,
    v0: &[f64],
    horizon: f64,
    seed: u64,
) -> Result<NetworkRun, PdmpError> {
    let n = v0.len();
    if n < 2 {
        return Err(PdmpError::InvalidArgument(format!(
            "network needs at least 2 neurons, got {n}"
        )));
    }
    if params.coupling > (n - 1) as f64 {
        return Err(PdmpError::CouplingTooLarge {
            coupling: params.coupling,
            max: n - 1,
        });
    }
    for &v in v0 {
        check_v0(v)?;
    }
    check_horizon(horizon)?;

    let h = params.jump;
    let v_r = params.v_reset;
    let p_hit = params.coupling / (n - 1) as f64;
    let clock = LifProcess {
        h,
        v_r,
        sigma: n as f64 * params.external_rate,
    };
    let mut clock_rng = stream_rng(seed, 0);
    let mut neuron_rng: Vec<_> = (0..n).map(|i| stream_rng(seed, i as u64 + 1)).collect();

    let mut v = v0.to_vec();
    let mut t_last = vec![0.0; n];
    let mut fired_in = vec![u64::MAX; n];
    let mut queue = VecDeque::new();
    let mut spikes = SpikeRecord::new(n, horizon);
    let mut cascade = 0u64;
    let mut now = 0.0;
    let mut arrivals = 0u64;

    loop {
        now += clock.next_arrival(&mut clock_rng);
        if now >= horizon {
            break;
        }
        arrivals += 1;
        let target = clock_rng.random_range(0..n);
        let fire = |i: usize, v: &mut [f64], t_last: &mut [f64]| -> bool {
            v[i] = v[i] * (-(now - t_last[i])).exp() + h;
            t_last[i] = now;
            if v[i] >= 1.0 {
                v[i] = v_r;
                true
            } else {
                false
            }
        };
        if !fire(target, &mut v, &mut t_last) {
            continue;
        }
        fired_in[target] = cascade;
        queue.push_back(target);
        while let Some(j) = queue.pop_front() {
            spikes.events.push(SpikeEvent {
                t: now,
                neuron: j,
                cascade,
            });
            if p_hit <= 0.0 {
                continue;
            }
            for k in (0..n).filter(|&k| k != j) {
                let hit = neuron_rng[k].random::<f64>() < p_hit;
                if hit && fired_in[k] != cascade && fire(k, &mut v, &mut t_last) {
                    fired_in[k] = cascade;
                    queue.push_back(k);
                }
            }
        }
        cascade += 1;
    }
    for (x, t) in v.iter_mut().zip(&t_last) {
        *x *= (-(horizon - t)).exp();
    }
    Ok(NetworkRun {
        spikes,
        final_v: v,
        external_arrivals: arrivals,
    })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_replicas: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            n_replicas: n,
        }
    }
}

/// Estimates `E[f(V_t) | V_0 = v0]` for the uncoupled process at rate σ₀.
pub fn dual_mc(
    params: &ModelParams,
    f: &(dyn Fn(f64) -> f64 + Sync),
    v0: f64,
    t: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<McEstimate, PdmpError> {
    check_v0(v0)?;
    if !(t >= 0.0) || n_replicas == 0 {
        return Err(PdmpError::InvalidArgument(format!(
            "need t >= 0 and at least one replica (t = {t}, replicas = {n_replicas})"
        )));
    }
    if t == 0.0 {
        return Ok(McEstimate {
            mean: f(v0),
            std_error: 0.0,
            n_replicas,
        });
    }
    let process = LifProcess::new(params, params.external_rate);
    let values = map_indexed(n_replicas, |k| {
        let mut rng = stream_rng(seed, k as u64);
        f(process.run_to(v0, t, &mut rng).0)
    });
    Ok(McEstimate::from_samples(&values))
}

/// Final potentials of `n_replicas` independent uncoupled neurons.
/// Replica `k` starts from `v0(k)`.
pub fn ensemble(
    params: &ModelParams,
    v0: &(dyn Fn(usize) -> f64 + Sync),
    t: f64,
    n_replicas: usize,
    seed: u64,
) -> Vec<f64> {
    let process = LifProcess::new(params, params.external_rate);
    map_indexed(n_replicas, |k| {
        let mut rng = stream_rng(seed, k as u64);
        process.run_to(v0(k), t, &mut rng).0
    })
}

/// Histogram of `V_{t0}` on `[h/2, h]` for one starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeblinStart {
    pub v0: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Empirical density on each bin.
    pub density: Vec<f64>,
    /// Density divided by the minorization level `c 2/h`.
    pub ratio: Vec<f64>,
    /// Standard error of each ratio.
    pub ratio_se: Vec<f64>,
    pub min_ratio: f64,
    pub passes: bool,
}

/// Empirical check of the minorization `M_{t0}(v, ·) ≥ c ν` with `ν`
/// uniform on `[h/2, h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeblinReport {
    pub t0: f64,
    pub c_theory: f64,
    pub level: f64,
    pub n_replicas: usize,
    /// Number of standard errors allowed below 1.
    pub confidence_slack: f64,
    pub per_start: Vec<DoeblinStart>,
    pub min_ratio: f64,
    pub passes: bool,
}

/// Minorization time `log(4/h)`.
pub fn doeblin_time(h: f64) -> f64 {
    (4.0 / h).ln()
}

/// Minorization mass `(σ₀/2)(h/4)^σ₀`.
pub fn doeblin_mass(h: f64, sigma0: f64) -> f64 {
    0.5 * sigma0 * (h / 4.0).powf(sigma0)
}

pub fn doeblin_check(
    params: &ModelParams,
    start_points: &[f64],
    n_replicas: usize,
    bins: usize,
    seed: u64,
) -> Result<DoeblinReport, PdmpError> {
    if bins == 0 || n_replicas == 0 {
        return Err(PdmpError::InvalidArgument(
            "need at least one bin and one replica".into(),
        ));
    }
    for &v in start_points {
        if !(0.0..=1.0).contains(&v) {
            return Err(PdmpError::InvalidArgument(format!(
                "start point {v} not in [0, 1]"
            )));
        }
    }
    const SLACK: f64 = 3.0;
    let h = params.jump;
    let t0 = doeblin_time(h);
    let c = doeblin_mass(h, params.external_rate);
    let level = c * 2.0 / h;
    let lo = h / 2.0;
    let width = (h - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let process = LifProcess::new(params, params.external_rate);

    let mut per_start = Vec::with_capacity(start_points.len());
    for (s, &v0) in start_points.iter().enumerate() {
        // a start at 1 fires on the first input just like any v >= 1 - h
        let start = v0.min(1.0 - f64::EPSILON);
        let finals = map_indexed(n_replicas, |k| {
            let mut rng = stream_rng(seed, ((s as u64) << 40) | k as u64);
            process.run_to(start, t0, &mut rng).0
        });
        let mut counts = vec![0u64; bins];
        for x in finals {
            if x >= lo && x < h {
                let b = (((x - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
        let n = n_replicas as f64;
        let density: Vec<f64> = counts.iter().map(|&k| k as f64 / (n * width)).collect();
        let ratio: Vec<f64> = density.iter().map(|d| d / level).collect();
        let ratio_se: Vec<f64> = counts
            .iter()
            .map(|&k| {
                let p = k as f64 / n;
                (p * (1.0 - p) / n).sqrt() / (width * level)
            })
            .collect();
        let passes = ratio
            .iter()
            .zip(&ratio_se)
            .all(|(r, se)| *r >= 1.0 - SLACK * se);
        let min_ratio = ratio.iter().copied().fold(f64::INFINITY, f64::min);
        per_start.push(DoeblinStart {
            v0,
            bin_edges: bin_edges.clone(),
            counts,
            density,
            ratio,
            ratio_se,
            min_ratio,
            passes,
        });
    }
    let min_ratio = per_start
        .iter()
        .map(|s| s.min_ratio)
        .fold(f64::INFINITY, f64::min);
    let passes = per_start.iter().all(|s| s.passes);
    Ok(DoeblinReport {
        t0,
        c_theory: c,
        level,
        n_replicas,
        confidence_slack: SLACK,
        per_start,
        min_ratio,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(h: f64, v_r: f64, sigma0: f64, coupling: f64) -> ModelParams {
        ModelParams::validate_ranges(h, v_r, sigma0, coupling).unwrap()
    }

    #[test]
    fn pure_decay_without_inputs() {
        let p = ModelParams {
            jump: 0.2,
            v_reset: 0.1,
            external_rate: 0.0,
            coupling: 0.0,
        };
        let run = simulate_neuron(&p, 0.8, 1.0, &[0.0, 0.5, 1.0], 1).unwrap();
        assert!(run.spikes.is_empty());
        assert!((run.final_v - 0.8 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((run.final_v - 0.294_303_552_6).abs() < 1e-9);
        assert_eq!(run.trajectory.len(), 3);
        assert_eq!(run.trajectory[0], (0.0, 0.8));
    }

    #[test]
    fn reset_lands_on_v_r() {
        let p = params(0.2, 0.1, 50.0, 0.0);
        let process = LifProcess::new(&p, 50.0);
        assert_eq!(process.kick(0.95), (0.1, true));
        assert_eq!(process.kick(0.7), (0.7 + 0.2, false));
        // first input arrives almost surely before decay below 0.8
        let run = simulate_neuron(&p, 0.95, 0.01, &[0.01], 3).unwrap();
        if let Some(first) = run.spikes.events.first() {
            assert!(first.t < 0.01);
        }
    }

    #[test]
    fn samples_never_reach_threshold() {
        let p = params(0.2, 0.1, 100.0, 0.0);
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.005).collect();
        let run = simulate_neuron(&p, 0.0, 5.0, &times, 11).unwrap();
        assert_eq!(run.trajectory.len(), times.len());
        assert!(run.trajectory.iter().all(|&(_, v)| (0.0..1.0).contains(&v)));
        assert!(run.spikes.len() > 10);
    }

    #[test]
    fn rejects_bad_input() {
        let p = params(0.2, 0.1, 1.0, 0.0);
        assert!(simulate_neuron(&p, 1.0, 1.0, &[], 0).is_err());
        assert!(simulate_neuron(&p, 0.5, -1.0, &[], 0).is_err());
        let p = params(0.2, 0.1, 1.0, 5.0);
        assert!(matches!(
            simulate_network(&p, &[0.1; 4], 1.0, 0),
            Err(PdmpError::CouplingTooLarge { .. })
        ));
    }

    #[test]
    fn forced_cascade_of_two() {
        // inputs arrive long before the potentials decay below 0.8
        let p = params(0.2, 0.1, 1e5, 1.0);
        let run = simulate_network(&p, &[0.95, 0.95], 1e-3, 5).unwrap();
        let first = run.spikes.events[..2].to_vec();
        assert_eq!(first[0].t, first[1].t);
        assert_eq!(first[0].cascade, first[1].cascade);
        assert_ne!(first[0].neuron, first[1].neuron);
        assert_eq!(run.spikes.cascade_sizes()[0], 2);
    }

    #[test]
    fn dual_mc_identities() {
        let p = params(0.2, 0.1, 1.0, 0.0);
        let f = |v: f64| v * v;
        let at0 = dual_mc(&p, &f, 0.3, 0.0, 100, 1).unwrap();
        assert_eq!(at0.mean, f(0.3));
        assert_eq!(at0.std_error, 0.0);
        let one = |_: f64| 1.0;
        let e = dual_mc(&p, &one, 0.3, 2.0, 500, 1).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn doeblin_constants() {
        assert!((doeblin_time(0.2) - 2.995_732_273_553_991).abs() < 1e-14);
        assert!((doeblin_mass(0.2, 1.0) - 0.025).abs() < 1e-16);
        assert!(doeblin_mass(0.2, 1e-12) < 1e-12);
        let p = params(0.2, 0.1, 1e-6, 0.0);
        let r = doeblin_check(&p, &[0.0, 0.5], 200, 5, 3).unwrap();
        assert_eq!(r.per_start.len(), 2);
        assert_eq!(r.per_start[0].counts.len(), 5);
        assert!(r.c_theory > 0.0 && r.c_theory < 1e-6);
        assert!(serde_json::to_string(&r).is_ok());
    }

    #[test]
    fn network_is_deterministic() {
        let p = params(0.1, 0.1, 200.0, 3.0);
        let v0: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let a = simulate_network(&p, &v0, 0.2, 9).unwrap();
        let b = simulate_network(&p, &v0, 0.2, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.final_v.iter().all(|v| (0.0..1.0).contains(v)));
        let times: Vec<f64> = a.spikes.events.iter().map(|e| e.t).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let mut csv = Vec::new();
        a.spikes.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("t,neuron,cascade\n"));
    }

    #[test]
    fn uncoupled_network_matches_single_neuron_rate() {
        // J = 0 decouples the network: per-neuron spike counts must have the
        // same mean as independent single-neuron runs.
        let p = params(0.2, 0.1, 20.0, 0.0);
        let horizon = 20.0;
        let net = simulate_network(&p, &[0.0; 50], horizon, 4).unwrap();
        let singles: Vec<f64> = (0..50)
            .map(|k| {
                simulate_neuron(&p, 0.0, horizon, &[], 1000 + k)
                    .unwrap()
                    .spikes
                    .len() as f64
            })
            .collect();
        let est = McEstimate::from_samples(&singles);
        let net_mean = net.spikes.len() as f64 / 50.0;
        assert!(
            (net_mean - est.mean).abs() < 4.0 * est.std_error * 2f64.sqrt() + 1.0,
            "{net_mean} vs {}",
            est.mean
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn same_seed_same_events(seed in any::<u64>(), v0 in 0.0f64..0.999) {
            let p = params(0.2, 0.1, 30.0, 0.0);
            let a = simulate_neuron(&p, v0, 2.0, &[1.0, 2.0], seed).unwrap();
            let b = simulate_neuron(&p, v0, 2.0, &[1.0, 2.0], seed).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn decay_between_events_is_exact(seed in any::<u64>()) {
            let p = params(0.2, 0.1, 5.0, 0.0);
            let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.01).collect();
            let run = simulate_neuron(&p, 0.5, 2.0, &times, seed).unwrap();
            let spikes: Vec<f64> = run.spikes.events.iter().map(|e| e.t).collect();
            for w in run.trajectory.windows(2) {
                let ((t1, v1), (t2, v2)) = (w[0], w[1]);
                // whenever no input happened in between, v2 = v1 e^{-(t2 - t1)}
                let predicted = v1 * (-(t2 - t1)).exp();
                let jumped = v2 > predicted + 1e-12 || spikes.iter().any(|&s| s > t1 && s <= t2);
                if !jumped {
                    prop_assert!((v2 - predicted).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn network_states_stay_below_threshold(seed in any::<u64>(), coupling in 0.0f64..9.0) {
            let p = params(0.1, 0.15, 100.0, coupling);
            let run = simulate_network(&p, &[0.5; 10], 0.3, seed).unwrap();
            prop_assert!(run.final_v.iter().all(|v| (0.0..1.0).contains(v)));
            // fire-once rule: no neuron twice in a cascade
            let mut seen = std::collections::HashSet::new();
            for e in &run.spikes.events {
                prop_assert!(seen.insert((e.cascade, e.neuron)));
            }
        }
    }
}
