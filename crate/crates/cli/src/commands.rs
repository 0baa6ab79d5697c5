use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;

use lif_meanfield::analysis::{
    verify_linear_contraction, verify_nonlinear_stability, ContractionConstants, DecayConfig, DecayReport,
};
use lif_meanfield::csv::fmt_f64;
use lif_meanfield::grid::{GridDensity, Mesh, Sampler};
use lif_meanfield::model::{ModelError, ModelParams};
use lif_meanfield::pde::{solve, FluxScheme, PdeError, SolveConfig, TimeStep};
use lif_meanfield::pdmp::{doeblin_check, simulate_network, simulate_neuron};
use lif_meanfield::steady::{
    find_steady_states, invariant_density, PiecewiseDensity, ScanConfig, SteadyConfig, SteadyRoot,
};
use lif_meanfield::stream_rng;

use crate::config::{RunConfig, COMMON_KEYS, INITIAL_KEYS, MODEL_KEYS};
use crate::error::Failure;

/// Stream reserved for drawing initial potentials.
const INITIAL_STREAM: u64 = u64::MAX;

struct Run {
    dir: PathBuf,
}

impl Run {
    /// Fixes the output directory, writes `resolved_config.json` and
    /// returns the handle used for the remaining outputs.
    fn start(mut cfg: RunConfig, name: &str) -> Result<Self, Failure> {
        let dir = cfg
            .out
            .get_or_insert_with(|| Path::new("lifmf-out").join(name))
            .clone();
        fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        fs::write(dir.join("resolved_config.json"), cfg.to_json())?;
        Ok(Self { dir })
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    fn csv(&self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
        let mut w = self.file(name)?;
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn done(&self, summary: &str) {
        println!("{summary}");
        println!("outputs in {}", self.dir.display());
    }
}

fn warn(msg: &str) {
    eprintln!("lifmf: warning: {msg}");
}

fn keys<'a>(groups: &[&[&'a str]]) -> Vec<&'a str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

fn require(value: Option<f64>, name: &str) -> Result<f64, Failure> {
    value.ok_or_else(|| Failure::Validation(format!("missing required parameter {name}")))
}

fn positive<T: PartialOrd + Default + std::fmt::Display>(value: T, name: &str) -> Result<T, Failure> {
    if value > T::default() {
        Ok(value)
    } else {
        Err(Failure::Validation(format!("{name} must be positive, got {value}")))
    }
}

fn finite_positive(value: f64, name: &str) -> Result<f64, Failure> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Failure::Validation(format!("{name} must be positive and finite, got {value}")))
    }
}

/// Validates the model block. An integer `(1 − v_r)/h` is an error only
/// with `strict_ratio`; otherwise it is reported and the run proceeds.
fn model(cfg: &mut RunConfig) -> Result<ModelParams, Failure> {
    let h = require(cfg.h, "h")?;
    let v_r = require(cfg.v_r, "v_r")?;
    let sigma0 = require(cfg.sigma0, "sigma0")?;
    let coupling = *cfg.coupling.get_or_insert(0.0);
    let strict = *cfg.strict_ratio.get_or_insert(false);
    let params = ModelParams::validate_ranges(h, v_r, sigma0, coupling)?;
    match ModelParams::validate(h, v_r, sigma0, coupling) {
        Ok(_) => {}
        Err(e @ ModelError::IntegerRatio { .. }) if !strict => warn(&e.to_string()),
        Err(e) => return Err(e.into()),
    }
    if params.large_jump_warning() {
        warn(&format!("h = {h} >= 1/2: some theoretical constants do not apply"));
    }
    Ok(params)
}

fn unit_point(v: f64, name: &str) -> Result<f64, Failure> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Failure::Validation(format!("{name} = {v} must lie in [0, 1)")))
    }
}

#[derive(Debug, Clone, Copy)]
enum InitialLaw {
    Uniform,
    Gaussian { mean: f64, sd: f64 },
    Dirac { at: f64 },
    Interval { lo: f64, hi: f64 },
}

fn initial_law(cfg: &mut RunConfig, default: &str) -> Result<InitialLaw, Failure> {
    let kind = cfg.initial.get_or_insert_with(|| default.to_string()).clone();
    let law = match kind.as_str() {
        "uniform" => InitialLaw::Uniform,
        "gaussian" => {
            let mean = *cfg.init_mean.get_or_insert(0.5);
            if !(0.0..=1.0).contains(&mean) {
                return Err(Failure::Validation(format!("init_mean = {mean} must lie in [0, 1]")));
            }
            let sd = finite_positive(*cfg.init_sd.get_or_insert(0.1), "init_sd")?;
            InitialLaw::Gaussian { mean, sd }
        }
        "dirac" => InitialLaw::Dirac {
            at: unit_point(*cfg.init_at.get_or_insert(0.0), "init_at")?,
        },
        "interval" => {
            let lo = unit_point(*cfg.init_lo.get_or_insert(0.95), "init_lo")?;
            let hi = *cfg.init_hi.get_or_insert(1.0);
            if !(hi > lo && hi <= 1.0) {
                return Err(Failure::Validation(format!("need init_lo < init_hi <= 1, got [{lo}, {hi}]")));
            }
            InitialLaw::Interval { lo, hi }
        }
        other => {
            return Err(Failure::Validation(format!(
                "initial = {other:?}; expected uniform, gaussian, dirac or interval"
            )))
        }
    };
    Ok(law)
}

fn initial_density(law: InitialLaw, mesh: Mesh) -> Result<GridDensity, Failure> {
    Ok(match law {
        InitialLaw::Uniform => GridDensity::uniform(mesh),
        InitialLaw::Gaussian { mean, sd } => GridDensity::gaussian(mesh, mean, sd)?,
        InitialLaw::Dirac { at } => GridDensity::dirac(mesh, at),
        InitialLaw::Interval { lo, hi } => {
            let inside = move |v: f64| if v >= lo && v < hi { 1.0 } else { 0.0 };
            GridDensity::from_samples(mesh, Sampler::Function(&inside))
                .map_err(|_| Failure::Validation(format!("interval [{lo}, {hi}) contains no cell centre")))?
        }
    })
}

fn initial_potentials(law: InitialLaw, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, INITIAL_STREAM);
    (0..n)
        .map(|_| match law {
            InitialLaw::Uniform => rng.random::<f64>(),
            InitialLaw::Gaussian { mean, sd } => loop {
                // truncated to [0, 1) by rejection
                let z: f64 = rng.sample(StandardNormal);
                let v = mean + sd * z;
                if (0.0..1.0).contains(&v) {
                    break v;
                }
            },
            InitialLaw::Dirac { at } => at,
            InitialLaw::Interval { lo, hi } => (lo + (hi - lo) * rng.random::<f64>()).min(hi - f64::EPSILON),
        })
        .collect()
}

fn scheme(cfg: &mut RunConfig, default: FluxScheme) -> Result<FluxScheme, Failure> {
    let name = cfg
        .scheme
        .get_or_insert_with(|| match default {
            FluxScheme::Upwind => "upwind".into(),
            FluxScheme::Minmod => "minmod".into(),
        })
        .clone();
    match name.as_str() {
        "upwind" => Ok(FluxScheme::Upwind),
        "minmod" => Ok(FluxScheme::Minmod),
        other => Err(Failure::Validation(format!("scheme = {other:?}; expected minmod or upwind"))),
    }
}

fn time_step(cfg: &RunConfig) -> Result<TimeStep, Failure> {
    match cfg.dt {
        None => Ok(TimeStep::Auto),
        Some(dt) => Ok(TimeStep::Fixed(finite_positive(dt, "dt")?)),
    }
}

fn mesh(cfg: &mut RunConfig, params: &ModelParams, default: usize) -> Result<Mesh, Failure> {
    let n = *cfg.n.get_or_insert(default);
    let mesh = Mesh::new(n, params.jump, params.v_reset)?;
    if mesh.n != n {
        warn(&format!("grid raised from {n} to {} cells so that h spans whole cells", mesh.n));
    }
    if (mesh.h_effective - params.jump).abs() > 1e-12 {
        warn(&format!("h rounded to {} on the grid", mesh.h_effective));
    }
    Ok(mesh)
}

fn scan_config(cfg: &mut RunConfig, params: &ModelParams) -> Result<ScanConfig, Failure> {
    let mut sc = ScanConfig::for_params(params);
    sc.steady.cells = positive(*cfg.cells.get_or_insert(sc.steady.cells), "cells")?;
    sc.sigma_min = finite_positive(*cfg.sigma_min.get_or_insert(sc.sigma_min), "sigma_min")?;
    sc.sigma_max = finite_positive(*cfg.sigma_max.get_or_insert(sc.sigma_max), "sigma_max")?;
    sc.points = *cfg.points.get_or_insert(sc.points);
    sc.root_tol = finite_positive(*cfg.root_tol.get_or_insert(sc.root_tol), "root_tol")?;
    if sc.sigma_max <= sc.sigma_min || sc.points < 2 {
        return Err(Failure::Validation(format!(
            "need sigma_min < sigma_max and at least 2 points (got [{}, {}], {})",
            sc.sigma_min, sc.sigma_max, sc.points
        )));
    }
    Ok(sc)
}

pub fn dispatch(name: &str, mut cfg: RunConfig) -> Result<(), Failure> {
    let relevant: Vec<&str> = match name {
        "regime" => keys(&[&COMMON_KEYS, &MODEL_KEYS]),
        "simulate-neuron" => keys(&[&COMMON_KEYS, &MODEL_KEYS, &["v0", "horizon", "sample_dt"]]),
        "simulate-network" => keys(&[&COMMON_KEYS, &MODEL_KEYS, &INITIAL_KEYS, &["N", "horizon"]]),
        "solve-pde" => keys(&[&COMMON_KEYS, &MODEL_KEYS, &INITIAL_KEYS, &["n", "dt", "scheme", "t_end", "output_times"]]),
        "steady-state" => keys(&[
            &COMMON_KEYS,
            &MODEL_KEYS,
            &["sigma", "n", "cells", "sigma_min", "sigma_max", "points", "root_tol"],
        ]),
        "scan-sigma" => keys(&[&COMMON_KEYS, &MODEL_KEYS, &["cells", "sigma_min", "sigma_max", "points", "root_tol"]]),
        "doeblin-check" => keys(&[&COMMON_KEYS, &MODEL_KEYS, &["replicas", "starts", "bins"]]),
        "verify-contraction" => keys(&[
            &COMMON_KEYS,
            &MODEL_KEYS,
            &["n", "dt", "scheme", "t_end", "samples", "slack", "v0_a", "v0_b"],
        ]),
        "verify-stability" => keys(&[
            &COMMON_KEYS,
            &MODEL_KEYS,
            &INITIAL_KEYS,
            &["n", "dt", "scheme", "t_end", "samples", "slack"],
            &["cells", "sigma_min", "sigma_max", "points", "root_tol", "root_index"],
        ]),
        other => unreachable!("unknown command {other}"),
    };
    for key in cfg.retain(&relevant)? {
        warn(&format!("{name} ignores config key {key:?}"));
    }
    match name {
        "regime" => regime(cfg),
        "simulate-neuron" => simulate_neuron_cmd(cfg),
        "simulate-network" => simulate_network_cmd(cfg),
        "solve-pde" => solve_pde(cfg),
        "steady-state" => steady_state(cfg),
        "scan-sigma" => scan_sigma(cfg),
        "doeblin-check" => doeblin(cfg),
        "verify-contraction" => verify_contraction(cfg),
        "verify-stability" => verify_stability(cfg),
        _ => unreachable!(),
    }
}

fn regime(mut cfg: RunConfig) -> Result<(), Failure> {
    let params = model(&mut cfg)?;
    cfg.seed = None;
    let run = Run::start(cfg, "regime")?;
    let report = params.classify();
    run.json("regime.json", &report)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn simulate_neuron_cmd(mut cfg: RunConfig) -> Result<(), Failure> {
    let params = model(&mut cfg)?;
    let seed = *cfg.seed.get_or_insert(0);
    let v0 = unit_point(*cfg.v0.get_or_insert(0.0), "v0")?;
    let horizon = finite_positive(*cfg.horizon.get_or_insert(1.0), "horizon")?;
    let sample_dt = finite_positive(*cfg.sample_dt.get_or_insert(horizon / 1000.0), "sample_dt")?;
    let count = (horizon / sample_dt + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=count).map(|k| k as f64 * sample_dt).collect();
    let run = Run::start(cfg, "simulate-neuron")?;
    let out = simulate_neuron(&params, v0, horizon, &times, seed)?;
    run.csv("trajectory.csv", |w| out.write_trajectory_csv(w))?;
    run.csv("spikes.csv", |w| out.spikes.write_csv(w))?;
    run.json(
        "summary.json",
        &json!({
            "spikes": out.spikes.len(),
            "mean_rate": out.spikes.mean_rate(),
            "final_v": out.final_v,
        }),
    )?;
    run.done(&format!("{} spikes, rate {}", out.spikes.len(), out.spikes.mean_rate()));
    Ok(())
}

fn simulate_network_cmd(mut cfg: RunConfig) -> Result<(), Failure> {
    let params = model(&mut cfg)?;
    let seed = *cfg.seed.get_or_insert(0);
    let n = *cfg.neurons.get_or_insert(100);
    if n < 2 {
        return Err(Failure::Validation(format!("N = {n}; the network needs at least 2 neurons")));
    }
    let horizon = finite_positive(*cfg.horizon.get_or_insert(1.0), "horizon")?;
    let law = initial_law(&mut cfg, "uniform")?;
    let v0 = initial_potentials(law, n, seed);
    let run = Run::start(cfg, "simulate-network")?;
    let out = simulate_network(&params, &v0, horizon, seed)?;
    run.csv("raster.csv", |w| out.spikes.write_csv(w))?;
    let sizes = out.spikes.cascade_sizes();
    run.csv("cascades.csv", |w| {
        writeln!(w, "cascade,size")?;
        sizes.iter().enumerate().try_for_each(|(k, s)| writeln!(w, "{k},{s}"))
    })?;
    run.csv("final_state.csv", |w| {
        writeln!(w, "neuron,v")?;
        out.final_v
            .iter()
            .enumerate()
            .try_for_each(|(i, v)| writeln!(w, "{i},{}", fmt_f64(*v)))
    })?;
    run.json(
        "summary.json",
        &json!({
            "neurons": n,
            "spikes": out.spikes.len(),
            "cascades": sizes.len(),
            "max_cascade": out.spikes.max_cascade(),
            "mean_rate": out.spikes.mean_rate(),
            "external_arrivals": out.external_arrivals,
        }),
    )?;
    run.done(&format!(
        "{} spikes in {} cascades, largest cascade {}",
        out.spikes.len(),
        sizes.len(),
        out.spikes.max_cascade()
    ));
    Ok(())
}

fn solve_pde(mut cfg: RunConfig) -> Result<(), Failure> {
    let params = model(&mut cfg)?;
    let mesh = mesh(&mut cfg, &params, 400)?;
    let scheme = scheme(&mut cfg, FluxScheme::Minmod)?;
    let dt = time_step(&cfg)?;
    let t_end = *cfg.t_end.get_or_insert(10.0);
    let outputs = cfg
        .output_times
        .get_or_insert_with(|| (0..=10).map(|k| t_end * k as f64 / 10.0).collect())
        .clone();
    let law = initial_law(&mut cfg, "uniform")?;
    let g0 = initial_density(law, mesh)?;
    let run = Run::start(cfg, "solve-pde")?;
    let solve_cfg = SolveConfig::new(t_end).with_scheme(scheme).with_dt(dt).with_outputs(outputs);
    let sol = solve(&g0, &params, &solve_cfg)?;
    run.csv("series.csv", |w| sol.write_series_csv(w))?;
    run.csv("densities.csv", |w| {
        writeln!(w, "t,v_center,density")?;
        for s in &sol.outputs {
            let t = fmt_f64(s.t);
            for (i, p) in s.g.values.iter().enumerate() {
                writeln!(w, "{t},{},{}", fmt_f64(mesh.center(i)), fmt_f64(*p))?;
            }
        }
        Ok(())
    })?;
    run.json(
        "summary.json",
        &json!({
            "mesh": mesh,
            "steps": sol.steps,
            "blow_up": sol.blow_up,
            "final_sigma": sol.last().map(|s| s.sigma),
        }),
    )?;
    let summary = match sol.blow_up.t_blow {
        Some(t) if t == 0.0 => "blow-up at t = 0: the initial datum already saturates the rate closure".to_string(),
        Some(t) => format!("blow-up at t = {t} (last finite sigma {})", sol.blow_up.sigma_at_stop),
        None => format!("reached t = {t_end} in {} steps, sigma = {}", sol.steps, sol.blow_up.sigma_at_stop),
    };
    run.done(&summary);
    Ok(())
}

fn steady_json(root: &SteadyRoot, d: &PiecewiseDensity) -> serde_json::Value {
    json!({
        "sigma": root.sigma_bar,
        "rate": root.r_bar,
        "tail_mass": root.tail_mass,
        "residual": root.residual,
        "head_end": d.head_end,
        "head_value": d.head_value,
        "head_exponent": d.head_exponent,
        "reset_jump": d.reset_jump,
        "iterations": d.iterations,
    })
}

fn steady_state(mut cfg: RunConfig) -> Result<(), Failure> {
    let params = model(&mut cfg)?;
    let grid = mesh(&mut cfg, &params, 400)?;
    let (roots, densities, claim, self_consistent) = if let Some(sigma) = cfg.sigma {
        let sigma = finite_positive(sigma, "sigma")?;
        let cells = positive(*cfg.cells.get_or_insert(SteadyConfig::default().cells), "cells")?;
        let steady = SteadyConfig {
            cells,
            ..SteadyConfig::default()
        };
        // a fixed rate bypasses the scan
        cfg.sigma_min = None;
        cfg.sigma_max = None;
        cfg.points = None;
        cfg.root_tol = None;
        let d = invariant_density(sigma, &params, &steady)?;
        let root = SteadyRoot {
            sigma_bar: sigma,
            r_bar: d.reset_jump,
            tail_mass: d.tail_mass,
            residual: 0.0,
        };
        (vec![root], vec![d], None, false)
    } else {
        let sc = scan_config(&mut cfg, &params)?;
        let states = find_steady_states(&params, &sc)?;
        for w in &states.scan.warnings {
            warn(w);
        }
        (states.scan.roots, states.densities, Some(states.scan.claim), true)
    };
    let run = Run::start(cfg, "steady-state")?;
    for (k, d) in densities.iter().enumerate() {
        run.csv(&format!("density_{k}.csv"), |w| d.write_csv(w))?;
        let g = d.to_grid(grid)?;
        run.csv(&format!("grid_{k}.csv"), |w| g.write_csv(w))?;
    }
    let states: Vec<_> = roots
        .iter()
        .zip(&densities)
        .map(|(r, d)| {
            let mut v = steady_json(r, d);
            if !self_consistent {
                v["residual"] = serde_json::Value::Null;
            }
            v
        })
        .collect();
    run.json("steady.json", &json!({ "claim": claim, "states": states }))?;
    if roots.is_empty() {
        warn("no steady state found in the scanned range");
    }
    let listing: Vec<String> = roots.iter().map(|r| r.sigma_bar.to_string()).collect();
    run.done(&format!("{} steady state(s) at sigma = [{}]", roots.len(), listing.join(", ")));
    Ok(())
}

fn scan_sigma(mut cfg: RunConfig) -> Result<(), Failure> {
    let params = model(&mut cfg)?;
    if params.coupling == 0.0 {
        return Err(Failure::Validation(
            "scan-sigma needs J > 0; with J = 0 the only steady state is sigma = sigma0".into(),
        ));
    }
    let sc = scan_config(&mut cfg, &params)?;
    let run = Run::start(cfg, "scan-sigma")?;
    let states = find_steady_states(&params, &sc)?;
    let scan = &states.scan;
    for w in &scan.warnings {
        warn(w);
    }
    run.csv("scan.csv", |w| scan.write_csv(w))?;
    run.csv("roots.json", |w| {
        scan.write_roots_json(&mut *w)?;
        writeln!(w)
    })?;
    run.json(
        "summary.json",
        &json!({
            "multiplicity": scan.multiplicity,
            "roots": scan.roots.len(),
            "claim": scan.claim,
            "warnings": scan.warnings,
        }),
    )?;
    run.done(&format!("{} root(s), {} sign change(s)", scan.roots.len(), scan.multiplicity));
    Ok(())
}

fn doeblin(mut cfg: RunConfig) -> Result<(), Failure> {
    let params = model(&mut cfg)?;
    let seed = *cfg.seed.get_or_insert(0);
    let replicas = positive(*cfg.replicas.get_or_insert(200_000), "replicas")?;
    let bins = positive(*cfg.bins.get_or_insert(5), "bins")?;
    let starts = cfg
        .starts
        .get_or_insert_with(|| vec![0.0, 0.25, 0.5, 0.75, 0.999])
        .clone();
    let run = Run::start(cfg, "doeblin-check")?;
    let report = doeblin_check(&params, &starts, replicas, bins, seed)?;
    run.json("doeblin.json", &report)?;
    run.csv("doeblin.csv", |w| {
        writeln!(w, "v0,bin_lo,bin_hi,count,density,ratio,ratio_se")?;
        for s in &report.per_start {
            for b in 0..s.counts.len() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(s.v0),
                    fmt_f64(s.bin_edges[b]),
                    fmt_f64(s.bin_edges[b + 1]),
                    s.counts[b],
                    fmt_f64(s.density[b]),
                    fmt_f64(s.ratio[b]),
                    fmt_f64(s.ratio_se[b])
                )?;
            }
        }
        Ok(())
    })?;
    run.done(&format!("minimum ratio {} (passes: {})", report.min_ratio, report.passes));
    if report.passes {
        Ok(())
    } else {
        Err(Failure::Numeric(format!(
            "minorization not observed: minimum ratio {} below the 3 SE band",
            report.min_ratio
        )))
    }
}

fn decay_config(cfg: &mut RunConfig, params: &ModelParams) -> Result<(DecayConfig, Mesh), Failure> {
    let mesh = mesh(cfg, params, 400)?;
    let mut dc = DecayConfig::new(finite_positive(*cfg.t_end.get_or_insert(200.0), "t_end")?);
    dc.scheme = scheme(cfg, FluxScheme::Upwind)?;
    dc.dt = time_step(cfg)?;
    dc.samples = positive(*cfg.samples.get_or_insert(dc.samples), "samples")?;
    dc.slack = *cfg.slack.get_or_insert(dc.slack);
    if !(dc.slack >= 0.0) {
        return Err(Failure::Validation(format!("slack = {} must be non-negative", dc.slack)));
    }
    Ok((dc, mesh))
}

fn write_decay(run: &Run, report: &DecayReport, extra: serde_json::Value) -> Result<(), Failure> {
    run.csv("decay.csv", |w| report.write_csv(w))?;
    let mut value = serde_json::to_value(report).map_err(|e| Failure::Io(e.to_string()))?;
    if let (Some(obj), serde_json::Value::Object(more)) = (value.as_object_mut(), extra) {
        obj.remove("times");
        obj.remove("tv_values");
        obj.remove("envelope");
        obj.extend(more);
    }
    run.json("report.json", &value)
}

fn verify_contraction(mut cfg: RunConfig) -> Result<(), Failure> {
    let params = model(&mut cfg)?;
    let (dc, mesh) = decay_config(&mut cfg, &params)?;
    let a = unit_point(*cfg.v0_a.get_or_insert(0.0), "v0_a")?;
    let b = unit_point(*cfg.v0_b.get_or_insert(0.999), "v0_b")?;
    if params.coupling != 0.0 {
        warn("verify-contraction runs the linear equation; J is ignored");
    }
    let run = Run::start(cfg, "verify-contraction")?;
    let consts = ContractionConstants::new(&params.with_coupling(0.0));
    let report = verify_linear_contraction(&GridDensity::dirac(mesh, a), &GridDensity::dirac(mesh, b), &params, &dc)?;
    write_decay(&run, &report, json!({ "constants": consts }))?;
    run.done(&format!(
        "TV within envelope (worst ratio {}), rate a = {}, monotone: {}",
        report.worst_ratio, consts.a, report.monotone
    ));
    Ok(())
}

fn verify_stability(mut cfg: RunConfig) -> Result<(), Failure> {
    let params = model(&mut cfg)?;
    let (dc, mesh) = decay_config(&mut cfg, &params)?;
    let law = initial_law(&mut cfg, "uniform")?;
    let sc = scan_config(&mut cfg, &params)?;
    let index = *cfg.root_index.get_or_insert(0);
    let run = Run::start(cfg, "verify-stability")?;
    let states = find_steady_states(&params, &sc)?;
    let Some(target) = states.densities.get(index) else {
        return Err(Failure::Numeric(format!(
            "steady state {index} requested but {} found",
            states.densities.len()
        )));
    };
    let root = states.scan.roots[index];
    let mu_bar = target.to_grid(mesh)?;
    let consts = ContractionConstants::new(&params);
    let extra = json!({
        "constants": consts,
        "steady_sigma": root.sigma_bar,
        "claim_applies": params.classify().unique_stable_ss,
    });
    match verify_nonlinear_stability(&initial_density(law, mesh)?, &mu_bar, &params, &dc) {
        Ok(report) => {
            write_decay(&run, &report, extra)?;
            let verdict = if report.envelope.is_empty() {
                "outside the weak-coupling region, observed only".to_string()
            } else {
                format!("within envelope (worst ratio {})", report.worst_ratio)
            };
            run.done(&format!("final TV {}, {verdict}", report.tv_values.last().copied().unwrap_or(0.0)));
            Ok(())
        }
        Err(lif_meanfield::analysis::AnalysisError::Pde(PdeError::BlowUp { t_blow, sigma_at_stop })) => {
            run.json(
                "report.json",
                &json!({ "blown_up": true, "t_blow": t_blow, "sigma_at_stop": sigma_at_stop }),
            )?;
            run.done(&format!("blow-up at t = {t_blow}"));
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}
