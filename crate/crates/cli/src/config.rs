//! Run configuration read from the `--config` JSON file.

use std::fs;
use std::path::{Path, PathBuf};

use occupation_core::{ModelParams, SimConfig, StepPenalty, Strategy};
use serde::Deserialize;

use crate::error::CliError;

/// Wealth grid `w_min = w_0 < ... < w_{n-1} = w_max`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub w_min: f64,
    pub w_max: f64,
    pub n: usize,
}

impl GridConfig {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.w_min];
        }
        let step = (self.w_max - self.w_min) / (self.n - 1) as f64;
        (0..self.n)
            .map(|i| if i + 1 == self.n { self.w_max } else { self.w_min + step * i as f64 })
            .collect()
    }

    /// Rejects empty or reversed grids and grids leaving `[lo, hi]`.
    pub fn check(&self, lo: f64, hi: f64) -> Result<(), CliError> {
        if self.n == 0 || !(self.w_min <= self.w_max) || (self.n == 1 && self.w_min != self.w_max) {
            return Err(CliError::Usage(format!(
                "grid needs n >= 1 and w_min <= w_max (n = 1 only with w_min = w_max), got {self:?}"
            )));
        }
        if self.w_min < lo || self.w_max > hi {
            return Err(CliError::Usage(format!(
                "grid [{}, {}] leaves the domain [{lo}, {hi}]",
                self.w_min, self.w_max
            )));
        }
        Ok(())
    }
}

/// A penalty given inline or as a path to a JSON file, relative to the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PenaltySource {
    Inline(StepPenalty),
    File(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: ModelParams,
    #[serde(default)]
    grid: Option<GridConfig>,
    #[serde(default)]
    sim: Option<SimConfig>,
    #[serde(default, rename = "sweep_L")]
    sweep_l: Option<Vec<f64>>,
    #[serde(default)]
    penalty: Option<PenaltySource>,
    #[serde(default)]
    strategies: Option<Vec<Strategy>>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: Option<GridConfig>,
    pub sim: Option<SimConfig>,
    pub sweep_l: Option<Vec<f64>>,
    pub penalty: Option<StepPenalty>,
    pub strategies: Option<Vec<Strategy>>,
}

fn read(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid JSON in {}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw: RawConfig = parse(&read(path, "config")?, path)?;
        let params = raw.params.validated()?;
        let penalty = match raw.penalty {
            None => None,
            Some(PenaltySource::Inline(p)) => Some(p),
            Some(PenaltySource::File(rel)) => {
                let file = path.parent().unwrap_or(Path::new(".")).join(rel);
                Some(parse(&read(&file, "penalty file")?, &file)?)
            }
        };
        let penalty = match penalty {
            Some(p) => {
                let p = p.validated()?;
                p.check_depth(&params)?;
                Some(p)
            }
            None => None,
        };
        if let Some(sim) = &raw.sim {
            sim.validate(&params)?;
        }
        if let Some(list) = &raw.sweep_l {
            if list.is_empty() {
                return Err(CliError::Usage("sweep_L must not be empty".into()));
            }
            for &l in list {
                params.with_depth(l)?;
            }
        }
        Ok(Self {
            params,
            grid: raw.grid,
            sim: raw.sim,
            sweep_l: raw.sweep_l,
            penalty,
            strategies: raw.strategies,
        })
    }

    pub fn grid(&self) -> Result<GridConfig, CliError> {
        self.grid.ok_or_else(|| CliError::Usage("this command needs a \"grid\" section".into()))
    }

    pub fn sim(&self) -> Result<SimConfig, CliError> {
        self.sim.ok_or_else(|| CliError::Usage("this command needs a \"sim\" section".into()))
    }

    pub fn sweep_l(&self) -> Result<&[f64], CliError> {
        self.sweep_l
            .as_deref()
            .ok_or_else(|| CliError::Usage("this command needs a \"sweep_L\" list".into()))
    }
}
