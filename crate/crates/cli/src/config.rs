//! Flat run configuration shared by every subcommand.
//!
//! Values come from an optional JSON file and are overridden by flags. The
//! merged, defaulted form is written as `resolved_config.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Failure;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(rename = "J", skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict_ratio: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub neurons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_hi: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_times: Option<Vec<f64>>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_tol: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_index: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Validation(format!("config {}: {e}", path.display())))
    }

    /// Values set in `flags` replace those in `self`.
    pub fn overlay(&mut self, flags: &RunConfig) {
        overlay!(self, flags;
            command, h, v_r, sigma0, coupling, strict_ratio, out, seed, threads,
            v0, sample_dt, neurons, horizon,
            initial, init_mean, init_sd, init_at, init_lo, init_hi,
            n, dt, scheme, t_end, output_times,
            sigma, cells, sigma_min, sigma_max, points, root_tol,
            replicas, starts, bins, v0_a, v0_b, samples, slack, root_index,
        );
    }

    /// Drops keys the command does not read and returns their names.
    pub fn retain(&mut self, keys: &[&str]) -> Result<Vec<String>, Failure> {
        let value = serde_json::to_value(&*self).map_err(|e| Failure::Io(e.to_string()))?;
        let serde_json::Value::Object(mut map) = value else {
            unreachable!("RunConfig serializes to an object")
        };
        let dropped: Vec<String> = map
            .keys()
            .filter(|k| k.as_str() != "command" && !keys.contains(&k.as_str()))
            .cloned()
            .collect();
        for k in &dropped {
            map.remove(k);
        }
        *self = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| Failure::Io(e.to_string()))?;
        Ok(dropped)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("RunConfig serializes");
        s.push('\n');
        s
    }
}

/// Keys every command accepts.
pub const COMMON_KEYS: [&str; 4] = ["out", "seed", "threads", "strict_ratio"];
pub const MODEL_KEYS: [&str; 4] = ["h", "v_r", "sigma0", "J"];
pub const INITIAL_KEYS: [&str; 6] = ["initial", "init_mean", "init_sd", "init_at", "init_lo", "init_hi"];
