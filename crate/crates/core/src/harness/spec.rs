use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::ChannelProfile;
use crate::error::{CfoError, Result};
use crate::estimator::MlGrid;
use crate::training::{SystemConfig, TrainingKind, OFFSETS_FIG1, OFFSETS_FIG2};

/// Estimator selector; textual form `simplified:<iota>`, `simplified_rs:<iota>` or `ml_grid`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorId {
    /// Simplified estimator on Chu-based training.
    Simplified { iota: usize },
    /// Simplified estimator on random-phase training.
    SimplifiedRs { iota: usize },
    MlGrid,
}

impl EstimatorId {
    pub fn training(&self) -> TrainingKind {
        match self {
            EstimatorId::SimplifiedRs { .. } => TrainingKind::Random,
            _ => TrainingKind::Cbts,
        }
    }

    pub fn iota(&self) -> Option<usize> {
        match *self {
            EstimatorId::Simplified { iota } | EstimatorId::SimplifiedRs { iota } => Some(iota),
            EstimatorId::MlGrid => None,
        }
    }

    /// Column value in the CSV `estimator` field.
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorId::Simplified { .. } => "simplified",
            EstimatorId::SimplifiedRs { .. } => "simplified_rs",
            EstimatorId::MlGrid => "ml_grid",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.iota() {
            Some(iota) => write!(f, "{}:{iota}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for EstimatorId {
    type Err = CfoError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let iota = || -> Result<usize> {
            arg.ok_or_else(|| CfoError::Config(format!("estimator `{s}` needs `:<iota>`")))?
                .parse()
                .map_err(|_| CfoError::Config(format!("bad iota in estimator `{s}`")))
        };
        match name {
            "simplified" => Ok(EstimatorId::Simplified { iota: iota()? }),
            "simplified_rs" => Ok(EstimatorId::SimplifiedRs { iota: iota()? }),
            "ml_grid" if arg.is_none() => Ok(EstimatorId::MlGrid),
            _ => Err(CfoError::Config(format!("unknown estimator `{s}`"))),
        }
    }
}

impl TryFrom<String> for EstimatorId {
    type Error = CfoError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorId> for String {
    fn from(id: EstimatorId) -> String {
        id.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    Fixed(f64),
    /// Uniform on `(-Q/2, Q/2)`, drawn per trial.
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "paper-fig1")]
    Fig1,
    #[serde(rename = "paper-fig2")]
    Fig2,
    #[serde(rename = "paper-fig3")]
    Fig3,
}

impl FromStr for Preset {
    type Err = CfoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-fig1" => Ok(Preset::Fig1),
            "paper-fig2" => Ok(Preset::Fig2),
            "paper-fig3" => Ok(Preset::Fig3),
            _ => Err(CfoError::Config(format!(
                "unknown preset `{s}` (expected paper-fig1, paper-fig2 or paper-fig3)"
            ))),
        }
    }
}

pub const DEFAULT_TRIALS: usize = 2000;
pub const DEFAULT_SNR_DB: [f64; 6] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0];
pub const DEFAULT_EMCB_DRAWS: usize = 500;

fn default_emcb_draws() -> usize {
    DEFAULT_EMCB_DRAWS
}

fn default_bench_reps() -> usize {
    100
}

/// A complete, seeded experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub config: SystemConfig,
    pub profile: ChannelProfile,
    pub estimators: Vec<EstimatorId>,
    pub snr_points_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub epsilon_mode: EpsilonMode,
    /// Skip noise entirely (SNR points still label the rows).
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default)]
    pub grid: MlGrid,
    #[serde(default = "default_emcb_draws")]
    pub emcb_draws: usize,
    /// ι values for `mse-vs-iota`; `None` sweeps `1..Q-1`.
    #[serde(default)]
    pub iotas: Option<Vec<usize>>,
    #[serde(default = "default_bench_reps")]
    pub bench_repetitions: usize,
}

impl ExperimentSpec {
    pub fn preset(preset: Preset) -> Self {
        let (offsets, estimators, iotas) = match preset {
            Preset::Fig1 => (&OFFSETS_FIG1, vec![EstimatorId::Simplified { iota: 8 }], Some((1..16).collect())),
            Preset::Fig2 => (&OFFSETS_FIG2, vec![EstimatorId::Simplified { iota: 7 }], Some((1..16).collect())),
            Preset::Fig3 => (
                &OFFSETS_FIG2,
                vec![
                    EstimatorId::Simplified { iota: 7 },
                    EstimatorId::SimplifiedRs { iota: 7 },
                    EstimatorId::MlGrid,
                ],
                None,
            ),
        };
        let snr_points_db = match preset {
            Preset::Fig3 => DEFAULT_SNR_DB.to_vec(),
            _ => vec![10.0, 15.0, 20.0],
        };
        Self {
            config: SystemConfig::reference(offsets),
            profile: ChannelProfile::reference(),
            estimators,
            snr_points_db,
            trials: DEFAULT_TRIALS,
            seed: 1,
            epsilon_mode: EpsilonMode::UniformRandom,
            noiseless: false,
            grid: MlGrid::default(),
            emcb_draws: DEFAULT_EMCB_DRAWS,
            iotas,
            bench_repetitions: default_bench_reps(),
        }
    }

    /// Parses a JSON document. A top-level `"preset"` key expands to that
    /// preset first; every other key then overrides it (objects merge recursively).
    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text)?;
        let preset = doc
            .as_object_mut()
            .and_then(|o| o.remove("preset"))
            .map(|v| match v {
                Value::String(s) => s.parse::<Preset>(),
                other => Err(CfoError::Config(format!("preset must be a string, got {other}"))),
            })
            .transpose()?;
        let merged = match preset {
            Some(p) => {
                let mut base = serde_json::to_value(Self::preset(p))?;
                merge(&mut base, doc);
                base
            }
            None => doc,
        };
        let spec: Self = serde_json::from_value(merged)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.profile.validate(&self.config)?;
        if self.trials == 0 {
            return Err(CfoError::Config("trials must be at least 1".into()));
        }
        if self.snr_points_db.iter().any(|s| !s.is_finite()) {
            return Err(CfoError::Config("SNR points must be finite".into()));
        }
        let q = self.config.q();
        for id in &self.estimators {
            if let Some(iota) = id.iota() {
                if iota == 0 || iota >= q {
                    return Err(CfoError::Config(format!("{id}: iota outside [1, {}]", q - 1)));
                }
            }
        }
        if let Some(iotas) = &self.iotas {
            if let Some(bad) = iotas.iter().find(|&&i| i == 0 || i >= q) {
                return Err(CfoError::Config(format!("iota {bad} outside [1, {}]", q - 1)));
            }
        }
        if let EpsilonMode::Fixed(e) = self.epsilon_mode {
            crate::channel::check_cfo_range(e, &self.config)?;
        }
        Ok(())
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
