//! TOML run configuration shared by the command-line subcommands.
//!
//! Unknown keys are rejected. Relative paths are resolved against the
//! directory holding the configuration file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::data::{BiasSpec, Covariance, GenSpec};
use crate::error::{Error, Result};
use crate::model::{AdamWConfig, Architecture, ModelSpec};
use crate::proxy::{PeerScope, ProxyTraining};
use crate::selection::{ObjectiveVariant, SelectorConfig, SelectorKind};
use crate::trainer::{Budget, SweepGrid, TrainerConfig};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: PathsSection,
    pub generate: Option<GenerateSection>,
    pub bias: Option<BiasSection>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub selector: SelectorSection,
    #[serde(default)]
    pub trainer: TrainerSection,
    #[serde(default)]
    pub proxy: ProxySection,
    pub sweep: Option<SweepSection>,
    /// Directory the relative paths were resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub holdout: Option<PathBuf>,
    /// Per-id proxy probabilities for a file-backed proxy.
    pub proxy_predictions: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub feature_dim: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_half")]
    pub positive_prior: f64,
    pub group_priors: Option<Vec<f64>>,
    pub class_means: Option<Vec<Vec<f64>>>,
    pub class_covariances: Option<Vec<Covariance>>,
    pub train_size: usize,
    pub test_size: usize,
    #[serde(default)]
    pub holdout_size: usize,
}

fn default_separation() -> f64 {
    2.0
}

fn default_half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSection {
    /// Symmetric flip rate on `target_groups`; ignored when explicit rates are given.
    pub rho: Option<f64>,
    #[serde(default = "default_targets")]
    pub target_groups: Vec<usize>,
    #[serde(default = "default_groups")]
    pub num_groups: usize,
    pub theta_plus: Option<Vec<f64>>,
    pub theta_minus: Option<Vec<f64>>,
}

fn default_targets() -> Vec<usize> {
    vec![1]
}

fn default_groups() -> usize {
    2
}

impl BiasSection {
    pub fn to_spec(&self) -> Result<BiasSpec> {
        match (&self.theta_plus, &self.theta_minus, self.rho) {
            (Some(p), Some(m), _) => BiasSpec::new(p.clone(), m.clone()),
            (None, None, Some(rho)) => BiasSpec::symmetric(rho, self.num_groups, &self.target_groups),
            _ => Err(Error::input(
                "bias needs either rho or both theta_plus and theta_minus",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_arch")]
    pub architecture: String,
    #[serde(default = "default_hidden")]
    pub hidden_width: usize,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    #[serde(default)]
    pub include_sensitive: bool,
}

fn default_arch() -> String {
    "linear".into()
}

fn default_hidden() -> usize {
    16
}

fn default_classes() -> usize {
    2
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            architecture: default_arch(),
            hidden_width: default_hidden(),
            num_classes: default_classes(),
            include_sensitive: false,
        }
    }
}

impl ModelSection {
    pub fn to_spec(&self, input_dim: usize) -> Result<ModelSpec> {
        let architecture = match self.architecture.as_str() {
            "linear" => Architecture::Linear,
            "mlp" => Architecture::MlpOneHidden {
                hidden_width: self.hidden_width,
            },
            other => return Err(Error::input(format!("model.architecture '{other}' is not linear or mlp"))),
        };
        let spec = ModelSpec {
            architecture,
            input_dim,
            num_classes: self.num_classes,
            include_sensitive_as_feature: self.include_sensitive,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorSection {
    #[serde(default = "default_kind")]
    pub kind: SelectorKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub variant: ObjectiveVariant,
}

fn default_kind() -> SelectorKind {
    SelectorKind::Fair
}

fn default_alpha() -> f64 {
    0.9
}

fn default_gamma() -> f64 {
    0.3
}

impl Default for SelectorSection {
    fn default() -> Self {
        SelectorSection {
            kind: default_kind(),
            alpha: default_alpha(),
            gamma: default_gamma(),
            variant: ObjectiveVariant::default(),
        }
    }
}

impl SelectorSection {
    pub fn to_config(&self) -> Result<SelectorConfig> {
        let cfg = SelectorConfig {
            kind: self.kind,
            alpha: self.alpha,
            gamma: self.gamma,
            variant: self.variant,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSection {
    #[serde(default = "default_small_batch")]
    pub small_batch: usize,
    #[serde(default = "default_ratio")]
    pub batch_ratio: f64,
    pub epochs: Option<usize>,
    pub steps: Option<usize>,
    pub eval_every: Option<usize>,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    /// Defaults to on for the fair selector and off otherwise.
    pub resample: Option<bool>,
    #[serde(default = "default_scope")]
    pub peer_scope: PeerScope,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub record_time: bool,
    #[serde(default)]
    pub audit: bool,
}

fn default_small_batch() -> usize {
    32
}

fn default_ratio() -> f64 {
    0.1
}

fn default_lr() -> f64 {
    1e-3
}

fn default_wd() -> f64 {
    0.01
}

fn default_scope() -> PeerScope {
    PeerScope::FullTrain
}

fn default_workers() -> usize {
    1
}

impl Default for TrainerSection {
    fn default() -> Self {
        TrainerSection {
            small_batch: default_small_batch(),
            batch_ratio: default_ratio(),
            epochs: None,
            steps: None,
            eval_every: None,
            learning_rate: default_lr(),
            weight_decay: default_wd(),
            resample: None,
            peer_scope: default_scope(),
            workers: default_workers(),
            checkpoint_every: 0,
            record_time: false,
            audit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ProxyChoice {
    /// Train on the clean holdout table.
    Holdout,
    /// Read per-id probabilities from `paths.proxy_predictions`.
    File,
    None,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxySection {
    #[serde(default = "default_proxy")]
    pub kind: ProxyChoice,
    #[serde(default = "default_proxy_epochs")]
    pub epochs: usize,
    #[serde(default = "default_small_batch")]
    pub batch_size: usize,
    #[serde(default = "default_proxy_lr")]
    pub learning_rate: f64,
}

fn default_proxy() -> ProxyChoice {
    ProxyChoice::Holdout
}

fn default_proxy_epochs() -> usize {
    100
}

fn default_proxy_lr() -> f64 {
    0.01
}

impl Default for ProxySection {
    fn default() -> Self {
        ProxySection {
            kind: default_proxy(),
            epochs: default_proxy_epochs(),
            batch_size: default_small_batch(),
            learning_rate: default_proxy_lr(),
        }
    }
}

impl ProxySection {
    pub fn budget(&self, seed: u64) -> ProxyTraining {
        ProxyTraining {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: AdamWConfig {
                learning_rate: self.learning_rate,
                ..AdamWConfig::default()
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_grid")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_grid")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_grid() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.7, 0.9]
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

impl RunConfig {
    /// Parses TOML text; relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::parse(origin, line, e.message().to_string())
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        for p in [
            &mut cfg.paths.train,
            &mut cfg.paths.test,
            &mut cfg.paths.holdout,
            &mut cfg.paths.proxy_predictions,
            &mut cfg.paths.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base, path)
    }

    /// A required path, or an input error naming its key.
    pub fn require_path(&self, key: &str) -> Result<&Path> {
        let slot = match key {
            "paths.train" => &self.paths.train,
            "paths.test" => &self.paths.test,
            "paths.holdout" => &self.paths.holdout,
            "paths.proxy_predictions" => &self.paths.proxy_predictions,
            "paths.out_dir" => &self.paths.out_dir,
            other => return Err(Error::input(format!("unknown path key {other}"))),
        };
        slot.as_deref()
            .ok_or_else(|| Error::input(format!("missing required key {key}")))
    }

    pub fn gen_spec(&self, num_examples: usize) -> Result<GenSpec> {
        let g = self
            .generate
            .as_ref()
            .ok_or_else(|| Error::input("missing required section [generate]"))?;
        let mut spec = GenSpec::two_gaussians(num_examples, g.feature_dim, g.separation, g.positive_prior);
        if let Some(p) = &g.group_priors {
            spec.group_priors = p.clone();
        }
        if let Some(m) = &g.class_means {
            spec.class_means = m.clone();
        }
        if let Some(c) = &g.class_covariances {
            spec.class_covariances = c.clone();
        }
        spec.sampler()?;
        Ok(spec)
    }

    pub fn bias_spec(&self) -> Result<BiasSpec> {
        self.bias
            .as_ref()
            .ok_or_else(|| Error::input("missing required section [bias]"))?
            .to_spec()
    }

    /// Trainer configuration for a dataset with `input_dim` features.
    pub fn trainer_config(&self, input_dim: usize) -> Result<TrainerConfig> {
        let t = &self.trainer;
        let selector = self.selector.to_config()?;
        let mut cfg = TrainerConfig::new(self.model.to_spec(input_dim)?, selector);
        cfg.small_batch = t.small_batch;
        cfg = cfg.with_batch_ratio(t.batch_ratio)?;
        cfg.budget = match (t.epochs, t.steps) {
            (Some(_), Some(_)) => return Err(Error::input("set trainer.epochs or trainer.steps, not both")),
            (Some(e), None) => Budget::Epochs(e),
            (None, Some(s)) => Budget::Steps(s),
            (None, None) => Budget::Epochs(30),
        };
        cfg.eval_every = t.eval_every;
        cfg.optimizer = AdamWConfig {
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            ..AdamWConfig::default()
        };
        cfg.seed = self.seed;
        if let Some(r) = t.resample {
            cfg.resample = r;
        }
        cfg.peer_scope = t.peer_scope;
        cfg.workers = t.workers;
        cfg.checkpoint_every = t.checkpoint_every;
        cfg.record_time = t.record_time;
        cfg.audit = t.audit;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweep_grid(&self) -> SweepGrid {
        match &self.sweep {
            Some(s) => SweepGrid {
                alphas: s.alphas.clone(),
                gammas: s.gammas.clone(),
                seeds: s.seeds.clone(),
            },
            None => SweepGrid::standard(default_seeds()),
        }
    }
}
