//! Run configuration: a TOML file whose values are overridden by flags. The
//! fully resolved configuration is written back out as the run manifest, in
//! the same format, so `--config <manifest>` repeats a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelDims;
use crate::train::{Optimizer, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    /// Input landmark file.
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub synth: SynthConfig,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 1,
            data: None,
            checkpoint: None,
            out: None,
            synth: SynthConfig::default(),
            train: TrainSection::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeSource {
    Skeleton,
    Planted,
    Mocap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub source: ShapeSource,
    pub frames: usize,
    /// `‖noise‖_F / ‖W‖_F` per frame.
    pub noise: f64,
    /// CSV file with one skeleton per row, for `source = "mocap"`.
    pub mocap: Option<PathBuf>,
    /// Planted model: landmark count, layer widths and active last-layer atoms.
    pub points: usize,
    pub planted_layers: Vec<usize>,
    pub active: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            source: ShapeSource::Skeleton,
            frames: 100,
            noise: 0.0,
            mocap: None,
            points: 15,
            planted_layers: vec![32, 8],
            active: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Default learner widths.
pub const DEFAULT_LAYERS: [usize; 2] = [64, 16];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub log_every: usize,
    pub coherence_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::new(ModelDims { p: 1, widths: DEFAULT_LAYERS.to_vec() });
        let Optimizer::Adam { beta1, beta2, eps } = Optimizer::default() else { unreachable!() };
        TrainSection {
            layers: base.dims.widths,
            epochs: base.epochs,
            batch_size: base.batch_size,
            learning_rate: base.learning_rate,
            optimizer: OptimizerKind::Adam,
            beta1,
            beta2,
            eps,
            log_every: base.log_every,
            coherence_every: base.coherence_every,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, p: usize, seed: u64) -> Result<TrainConfig> {
        let dims = ModelDims::new(p, self.layers.clone()).map_err(|e| Error::Usage(e.to_string()))?;
        let optimizer = match self.optimizer {
            OptimizerKind::Adam => Optimizer::Adam { beta1: self.beta1, beta2: self.beta2, eps: self.eps },
            OptimizerKind::Sgd => Optimizer::Sgd,
        };
        let cfg = TrainConfig {
            dims,
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            optimizer,
            seed,
            log_every: self.log_every,
            coherence_every: self.coherence_every,
        };
        cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("config: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}

/// Parses `32,8` into layer widths.
pub fn parse_layers(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad layer width {t:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() || v.contains(&0) { Err("layer widths must be positive".into()) } else { Ok(v) })
}
