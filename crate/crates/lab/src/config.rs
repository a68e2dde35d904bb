//! Experiment grids and their JSON form.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use qpnn::{ObjectiveKind, TaskName};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, LabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskName,
    pub layer_range: Vec<usize>,
    /// dB/cm.
    pub alpha_list: Vec<f64>,
    /// Radians.
    pub varphi_list: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub objective_kind: ObjectiveKind,
    pub output_dir: PathBuf,
}

/// Trials per cell of a loss sweep.
pub const LOSS_SWEEP_TRIALS: usize = 50;
/// Trials per cell of a nonlinearity sweep.
pub const NL_SWEEP_TRIALS: usize = 200;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(LabError::Config(msg.into()));
        if self.layer_range.is_empty() || self.alpha_list.is_empty() || self.varphi_list.is_empty() {
            return bad("layer_range, alpha_list and varphi_list must be non-empty");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.layer_range.contains(&0) {
            return bad("layer counts must be >= 1");
        }
        if self.alpha_list.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("alpha values must be finite and >= 0");
        }
        if self.varphi_list.iter().any(|v| !v.is_finite()) {
            return bad("varphi values must be finite");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let config: Self = serde_json::from_str(&text).map_err(|source| LabError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        crate::store::write_atomic(path, text.as_bytes())
    }

    /// Grid cells in layer, alpha, varphi order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &layers in &self.layer_range {
            for &alpha in &self.alpha_list {
                for &varphi in &self.varphi_list {
                    cells.push(Cell {
                        task: self.task,
                        layers,
                        alpha,
                        varphi,
                        objective: self.objective_kind,
                    });
                }
            }
        }
        cells
    }
}

/// One grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub task: TaskName,
    pub layers: usize,
    pub alpha: f64,
    pub varphi: f64,
    pub objective: ObjectiveKind,
}

impl Cell {
    /// Directory-safe identifier, stable across runs.
    pub fn key(&self) -> String {
        format!(
            "{}_{}_L{}_a{}_p{}",
            self.task, self.objective, self.layers, self.alpha, self.varphi
        )
    }

    /// Seed of trial `trial`: `base_seed` XOR a SHA-256 digest of the cell
    /// and trial index.
    pub fn trial_seed(&self, base_seed: u64, trial: usize) -> u64 {
        base_seed ^ stable_hash(&format!("{}#{trial}", self.key()))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} L={} alpha={} dB/cm varphi={} ({})",
            self.task, self.layers, self.alpha, self.varphi, self.objective
        )
    }
}

pub fn stable_hash(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Parses an angle in radians: a number, or a multiple/fraction of `pi`
/// such as `pi`, `pi/4`, `3pi/4`, `0.5pi`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let s = text.trim().to_ascii_lowercase().replace(['*', ' '], "");
    let bad = || LabError::Config(format!("cannot parse angle {text:?}"));
    let Some(pos) = s.find("pi") else {
        return s.parse().map_err(|_| bad());
    };
    let coef = match &s[..pos] {
        "" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let denom = match &s[pos + 2..] {
        "" => 1.0,
        d => d.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(coef * PI / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            task: TaskName::Bsa,
            layer_range: vec![2, 3],
            alpha_list: vec![0.0, 0.3],
            varphi_list: vec![PI],
            trials: 4,
            base_seed: 7,
            objective_kind: ObjectiveKind::Unconditional,
            output_dir: "out".into(),
        }
    }

    #[test]
    fn json_field_names() {
        let v = serde_json::to_value(sample()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(
            keys,
            ["alpha_list", "base_seed", "layer_range", "objective_kind", "output_dir", "task", "trials", "varphi_list"]
        );
        assert_eq!(v["task"], "bsa");
        assert_eq!(v["objective_kind"], "unconditional");
        let back: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn validation() {
        assert!(sample().validate().is_ok());
        let mut c = sample();
        c.alpha_list.clear();
        assert!(c.validate().is_err());
        let mut c = sample();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = sample();
        c.layer_range = vec![0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn cells_and_seeds() {
        let cells = sample().cells();
        assert_eq!(cells.len(), 4);
        let seeds: Vec<u64> = cells.iter().flat_map(|c| (0..4).map(|t| c.trial_seed(7, t))).collect();
        let mut uniq = seeds.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), seeds.len());
        assert_eq!(cells[1].trial_seed(7, 2), cells[1].trial_seed(7, 2));
        assert_eq!(cells[1].trial_seed(7, 2) ^ 7, cells[1].trial_seed(0, 2));
    }

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_angle("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_angle("PI/100").unwrap(), PI / 100.0);
        assert_eq!(parse_angle("1.5").unwrap(), 1.5);
        assert!(parse_angle("pi4").is_err());
        assert!(parse_angle("x").is_err());
    }
}
