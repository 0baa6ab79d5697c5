//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns a JSON string; the page parses it and
//! draws on canvases. The plain `*_json` functions hold the logic so they
//! can be tested natively.

use rand::Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use lif_meanfield::grid::{GridDensity, Mesh, Sampler};
use lif_meanfield::model::ModelParams;
use lif_meanfield::pde::{solve, SolveConfig};
use lif_meanfield::pdmp::simulate_network;
use lif_meanfield::steady::{find_steady_states, ScanConfig, SteadyConfig};
use lif_meanfield::stream_rng;

/// Coarser than the native defaults so a scan stays interactive.
const DEMO_CELLS: usize = 1000;
const MAX_NEURONS: usize = 2000;
const MAX_CELLS: usize = 2000;

fn params(h: f64, v_r: f64, sigma0: f64, coupling: f64) -> Result<ModelParams, String> {
    ModelParams::validate_ranges(h, v_r, sigma0, coupling).map_err(|e| e.to_string())
}

/// F and G on a log grid, the roots, and the density at the first root.
pub fn scan_json(h: f64, v_r: f64, sigma0: f64, coupling: f64, points: usize) -> Result<Value, String> {
    let p = params(h, v_r, sigma0, coupling)?;
    let mut cfg = ScanConfig::for_params(&p);
    cfg.points = points.clamp(10, 400);
    cfg.sigma_max = sigma0 * 1e3;
    cfg.steady = SteadyConfig {
        cells: DEMO_CELLS,
        ..SteadyConfig::default()
    };
    let states = find_steady_states(&p, &cfg).map_err(|e| e.to_string())?;
    let density = states.densities.first().map(|d| {
        let (v, pv): (Vec<f64>, Vec<f64>) = d.samples().map(|(v, p, _)| (v, p)).unzip();
        json!({ "sigma": d.sigma, "v": v, "p": pv })
    });
    Ok(json!({
        "sigma": states.scan.sigmas,
        "F": states.scan.f_values,
        "G": states.scan.g_values,
        "roots": states.scan.roots,
        "density": density,
        "regime": p.classify(),
    }))
}

/// Density snapshots of the mean-field equation from a Gaussian datum
/// (a point mass when `sd` is 0).
#[allow(clippy::too_many_arguments)]
pub fn evolve_json(
    h: f64,
    v_r: f64,
    sigma0: f64,
    coupling: f64,
    mean: f64,
    sd: f64,
    t_end: f64,
    frames: usize,
) -> Result<Value, String> {
    let p = params(h, v_r, sigma0, coupling)?;
    if !(t_end > 0.0 && t_end <= 1e3) {
        return Err(format!("t_end = {t_end} must be in (0, 1000]"));
    }
    let mesh = Mesh::new(200, h, v_r).map_err(|e| e.to_string())?;
    if mesh.n > MAX_CELLS {
        return Err(format!("h = {h} needs {} cells; pick a rounder value", mesh.n));
    }
    let g0 = if sd > 0.0 {
        GridDensity::gaussian(mesh, mean, sd)
    } else {
        let at = mean.clamp(0.0, 1.0 - 1e-12);
        GridDensity::from_samples(mesh, Sampler::Atoms(&[(at, 1.0)]))
    }
    .map_err(|e| e.to_string())?;
    let frames = frames.clamp(2, 200);
    let mut cfg = SolveConfig::new(t_end).uniform_outputs(frames - 1);
    cfg.series_every = 0;
    let sol = solve(&g0, &p, &cfg).map_err(|e| e.to_string())?;
    let snapshots: Vec<&[f64]> = sol.outputs.iter().map(|s| s.g.values.as_slice()).collect();
    Ok(json!({
        "v": mesh.centers().collect::<Vec<_>>(),
        "t": sol.outputs.iter().map(|s| s.t).collect::<Vec<_>>(),
        "frames": snapshots,
        "sigma": sol.outputs.iter().map(|s| s.sigma).collect::<Vec<_>>(),
        "blow_up": sol.blow_up,
    }))
}

/// Spike raster of the finite network from uniform random potentials.
pub fn raster_json(
    h: f64,
    v_r: f64,
    sigma0: f64,
    coupling: f64,
    neurons: usize,
    horizon: f64,
    seed: u32,
) -> Result<Value, String> {
    let p = params(h, v_r, sigma0, coupling)?;
    if !(2..=MAX_NEURONS).contains(&neurons) {
        return Err(format!("N = {neurons} must be between 2 and {MAX_NEURONS}"));
    }
    if !(horizon > 0.0 && horizon * sigma0 * neurons as f64 <= 5e6) {
        return Err("horizon too long for an interactive run".into());
    }
    let seed = u64::from(seed);
    let mut rng = stream_rng(seed, u64::MAX);
    let v0: Vec<f64> = (0..neurons).map(|_| rng.random::<f64>()).collect();
    let run = simulate_network(&p, &v0, horizon, seed).map_err(|e| e.to_string())?;
    let events = &run.spikes.events;
    Ok(json!({
        "t": events.iter().map(|e| e.t).collect::<Vec<_>>(),
        "neuron": events.iter().map(|e| e.neuron).collect::<Vec<_>>(),
        "cascade": events.iter().map(|e| e.cascade).collect::<Vec<_>>(),
        "cascade_sizes": run.spikes.cascade_sizes(),
        "max_cascade": run.spikes.max_cascade(),
        "mean_rate": run.spikes.mean_rate(),
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn scan(h: f64, v_r: f64, sigma0: f64, coupling: f64, points: usize) -> Result<String, JsError> {
    to_js(scan_json(h, v_r, sigma0, coupling, points))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn evolve(
    h: f64,
    v_r: f64,
    sigma0: f64,
    coupling: f64,
    mean: f64,
    sd: f64,
    t_end: f64,
    frames: usize,
) -> Result<String, JsError> {
    to_js(evolve_json(h, v_r, sigma0, coupling, mean, sd, t_end, frames))
}

#[wasm_bindgen]
pub fn raster(
    h: f64,
    v_r: f64,
    sigma0: f64,
    coupling: f64,
    neurons: usize,
    horizon: f64,
    seed: u32,
) -> Result<String, JsError> {
    to_js(raster_json(h, v_r, sigma0, coupling, neurons, horizon, seed))
}
