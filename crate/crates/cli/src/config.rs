use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Spectrum,
    Theorem1,
    Permutation,
    Theorem3,
    Growth,
    Selftest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    pub a_min: f64,
    pub a_max: f64,
    pub samples: usize,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Params {
    pub a_i: f64,
    pub a_f: f64,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermutationParams {
    pub sigma: Vec<u64>,
}

/// Sine coefficients as `[re, im]` pairs, mode 1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem3Params {
    pub initial: Vec<[f64; 2]>,
    pub target: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthParams {
    pub beta: f64,
    pub gamma: f64,
    pub k0: u64,
    pub steps: usize,
    /// Endpoints of the exact orbit run next to the stochastic model.
    pub a_i: f64,
    pub a_f: f64,
    pub cycles: usize,
}

/// One run. Missing fields take the defaults of the command, so a config
/// file only needs to list what it changes; the manifest records the
/// fully resolved config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    /// Interior grid points; `null` picks the coarsest grid resolving `eta_star`.
    pub grid_points: Option<usize>,
    pub dt_target: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub eta_star: f64,
    pub i_star: f64,
    pub seed: u64,
    /// Where outputs go; `null` means `out`. Not recorded in manifests, so
    /// reruns into different directories produce identical files.
    pub output_dir: Option<PathBuf>,
    /// Write a trajectory CSV every this many time steps of each propagation.
    pub trajectory_every: Option<usize>,
    pub spectrum: SpectrumParams,
    pub theorem1: Theorem1Params,
    pub permutation: PermutationParams,
    pub theorem3: Theorem3Params,
    pub growth: GrowthParams,
}

impl ExperimentConfig {
    /// Desk-scale defaults: each command gets wall parameters for which its
    /// run finishes in minutes.
    pub fn defaults(command: CommandKind) -> Self {
        let (eta, height, kappa, epsilon) = match command {
            CommandKind::Theorem1 => (100.0, 500.0, 1.0, 0.15),
            CommandKind::Permutation => (200.0, 4e4, 1e4, 0.15),
            CommandKind::Theorem3 => (200.0, 200.0, 2.0, 0.2),
            _ => (200.0, 4e4, 1.0, 0.15),
        };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            command,
            grid_points: None,
            dt_target: 1e-3,
            epsilon,
            kappa,
            eta_star: eta,
            i_star: height,
            seed: 0,
            output_dir: None,
            trajectory_every: None,
            spectrum: SpectrumParams { a_min: 0.4, a_max: 0.6, samples: 41, modes: 4 },
            theorem1: Theorem1Params { a_i: 0.43, a_f: 0.57, modes: 2 },
            permutation: PermutationParams { sigma: vec![2, 3, 1] },
            theorem3: Theorem3Params { initial: vec![[1.0, 0.0]], target: vec![[s, 0.0], [s, 0.0]] },
            growth: GrowthParams { beta: 0.7, gamma: 0.3, k0: 100, steps: 10_000, a_i: 0.3, a_f: 0.7, cycles: 50 },
        }
    }

    /// Reads a config file, filling missing fields from the defaults of its
    /// command (or of `fallback` when the file names none). A manifest
    /// written by an earlier run is accepted too; its `config` is replayed.
    pub fn load(path: &Path, fallback: CommandKind) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, fallback)
    }

    pub fn from_json(text: &str, fallback: CommandKind) -> Result<Self, CliError> {
        let given: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
        if !given.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        let given = match given.get("config") {
            Some(inner) if given.get("program").is_some() => inner.clone(),
            _ => given,
        };
        let command = match given.get("command") {
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|e| CliError::Config(format!("unknown command in config: {e}")))?,
            None => fallback,
        };
        let mut merged = serde_json::to_value(Self::defaults(command)).expect("defaults serialize");
        merge(&mut merged, given);
        serde_json::from_value(merged).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("dt_target", self.dt_target),
            ("epsilon", self.epsilon),
            ("kappa", self.kappa),
            ("eta_star", self.eta_star),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.i_star >= 0.0 && self.i_star.is_finite()) {
            return Err(CliError::Config(format!("i_star must be non-negative, got {}", self.i_star)));
        }
        if self.epsilon >= 1.0 {
            return Err(CliError::Config(format!("epsilon must be below 1, got {}", self.epsilon)));
        }
        if self.grid_points == Some(0) || self.trajectory_every == Some(0) {
            return Err(CliError::Config("grid_points and trajectory_every must be positive".into()));
        }
        Ok(())
    }
}

/// Recursively overlays `patch` on `base`; objects merge key by key.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}
