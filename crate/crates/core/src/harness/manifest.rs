//! Experiment manifests: declarative JSON descriptions of a run.
//!
//! ```json
//! {
//!   "model": { "name": "hall", "params": {} },
//!   "task": "joint",
//!   "settings": { "pairs": [[0.0, 0.39269908169872414]] },
//!   "trials": 1000000,
//!   "seed": 7,
//!   "tolerances": {},
//!   "output": { "path": "result.json", "format": "json" }
//! }
//! ```
//!
//! Angles are radians. A `grid` setting spec `{start, stop, count}` expands
//! to `count` points per axis, `start + k·(stop − start)/count` for
//! `k = 0..count` (the stop value itself is excluded), and then to every
//! `(a, b)` pair on that axis.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{ChshSettings, SettingsEnsemble};
use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::model::Model;

use super::battery::{BatteryConfig, Tolerances};

/// Seed used when neither the manifest, the command line nor
/// `BELLCHECK_SEED` supplies one.
pub const DEFAULT_SEED: u64 = 0x5EED_BE11;

/// Environment variable overriding the default seed.
pub const SEED_ENV: &str = "BELLCHECK_SEED";

/// Default trial count for Monte Carlo tasks.
pub const DEFAULT_TRIALS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Joint,
    Chsh,
    Scan,
    Mi,
    Nosignal,
    Sample,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl ModelSpec {
    pub fn named(name: &str) -> ModelSpec {
        ModelSpec { name: name.to_string(), params: BTreeMap::new() }
    }

    /// The registered model this spec names. `all` is not a model.
    pub fn resolve(&self) -> Result<Model> {
        for key in self.params.keys() {
            if key != "coupling" {
                return Err(Error::InvalidArgument(format!("unknown model parameter `{key}`")));
            }
        }
        Model::by_name(&self.name, self.params.get("coupling").copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn axis(&self) -> Result<Vec<Angle>> {
        let step = (self.stop - self.start) / self.count as f64;
        (0..self.count).map(|k| Angle::new(self.start + k as f64 * step)).collect()
    }
}

/// Which settings a task runs at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SettingsSpec {
    /// Explicit `(a, b)` pairs.
    Pairs(Vec<[f64; 2]>),
    /// Every pair on a grid axis.
    Grid(GridSpec),
    /// The four CHSH settings.
    Chsh { a: f64, a_prime: f64, b: f64, b_prime: f64 },
}

impl SettingsSpec {
    pub fn pairs(&self) -> Result<Vec<(Angle, Angle)>> {
        match self {
            SettingsSpec::Pairs(p) => p.iter().map(|[a, b]| Ok((Angle::new(*a)?, Angle::new(*b)?))).collect(),
            SettingsSpec::Grid(g) => {
                let axis = g.axis()?;
                Ok(axis.iter().flat_map(|a| axis.iter().map(move |b| (*a, *b))).collect())
            }
            SettingsSpec::Chsh { a, a_prime, b, b_prime } => {
                let s = ChshSettings::new(*a, *a_prime, *b, *b_prime)?;
                Ok(vec![(s.a, s.b), (s.a, s.b_prime), (s.a_prime, s.b), (s.a_prime, s.b_prime)])
            }
        }
    }

    /// Single-axis angles (used as no-signaling probes).
    pub fn axis(&self) -> Result<Vec<Angle>> {
        match self {
            SettingsSpec::Grid(g) => g.axis(),
            SettingsSpec::Pairs(p) => p.iter().flatten().map(|x| Angle::new(*x)).collect(),
            SettingsSpec::Chsh { a, a_prime, b, b_prime } => {
                [a, a_prime, b, b_prime].into_iter().map(|x| Angle::new(*x)).collect()
            }
        }
    }

    pub fn chsh(&self) -> Result<ChshSettings> {
        match self {
            SettingsSpec::Chsh { a, a_prime, b, b_prime } => ChshSettings::new(*a, *a_prime, *b, *b_prime),
            _ => Err(Error::InvalidArgument("the chsh task needs `chsh` settings".into())),
        }
    }
}

/// Prior over setting pairs for the `mi` task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    /// Uniform over the four CHSH pairs.
    ChshQuadruple,
    /// Uniform over the `n × n` grid of multiples of π/n.
    Grid(usize),
    /// Uniform over the pairs of the manifest's `settings`.
    Settings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    pub format: OutputFormat,
}

/// Task-specific knobs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    /// Where the `sample` task writes its trial log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_log: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<BatteryConfig>,
    /// Include wall time in the result record (off by default so records
    /// of identical runs are byte-identical).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub model: ModelSpec,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<SettingsSpec>,
    /// Monte Carlo trials; `joint` only simulates when this is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
    #[serde(default, skip_serializing_if = "is_default_options")]
    pub options: TaskOptions,
}

/// The seed from `BELLCHECK_SEED` if set and valid, else [`DEFAULT_SEED`].
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

fn is_default_options(o: &TaskOptions) -> bool {
    *o == TaskOptions::default()
}

impl ExperimentManifest {
    pub fn new(model: &str, task: Task) -> ExperimentManifest {
        ExperimentManifest {
            model: ModelSpec::named(model),
            task,
            settings: None,
            trials: None,
            seed: default_seed(),
            tolerances: BTreeMap::new(),
            output: None,
            options: TaskOptions::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<ExperimentManifest> {
        let m: ExperimentManifest =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// SHA-256 of the compact canonical serialization, hex encoded.
    /// The manifest without its output location, which does not affect results.
    pub fn without_output(&self) -> ExperimentManifest {
        ExperimentManifest { output: None, ..self.clone() }
    }

    /// SHA-256 of the compact JSON of [`without_output`](Self::without_output).
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(&self.without_output()).expect("manifest serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Checks names, counts, tolerances and that the task has what it needs.
    pub fn validate(&self) -> Result<()> {
        if self.task == Task::Verify {
            if self.model.name != "all" {
                self.model.resolve()?;
            }
        } else {
            self.model.resolve()?;
        }
        if self.trials == Some(0) {
            return Err(Error::ZeroTrials);
        }
        Tolerances::default().with_overrides(&self.tolerances)?;
        if let Some(s) = &self.settings {
            let pairs = s.pairs()?;
            if pairs.is_empty() {
                return Err(Error::InvalidArgument("settings select no pairs".into()));
            }
        }
        for (name, v) in [("grid_n", self.options.grid_n), ("probes", self.options.probes)] {
            if v == Some(0) {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if let Some(b) = &self.options.battery {
            b.validate()?;
        }
        match self.task {
            Task::Joint | Task::Sample if self.settings.is_none() => {
                Err(Error::InvalidArgument("task needs `settings`".into()))
            }
            Task::Chsh => self.settings.as_ref().map_or_else(
                || Err(Error::InvalidArgument("the chsh task needs `chsh` settings".into())),
                |s| s.chsh().map(|_| ()),
            ),
            Task::Mi => {
                if let (Some(EnsembleSpec::Grid(0)), _) | (Some(EnsembleSpec::Settings), None) =
                    (&self.options.ensemble, &self.settings)
                {
                    return Err(Error::InvalidArgument("ensemble selects no pairs".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn trial_count(&self) -> u64 {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn ensemble(&self) -> Result<SettingsEnsemble> {
        match self.options.ensemble.as_ref().unwrap_or(&EnsembleSpec::ChshQuadruple) {
            EnsembleSpec::ChshQuadruple => Ok(SettingsEnsemble::chsh_quadruple()),
            EnsembleSpec::Grid(n) => SettingsEnsemble::grid(*n),
            EnsembleSpec::Settings => {
                let pairs = self
                    .settings
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("ensemble `settings` needs settings".into()))?
                    .pairs()?;
                SettingsEnsemble::uniform(&pairs)
            }
        }
    }
}
