use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Aggregation;
use crate::pme::SemanticReference;
use crate::synth::GenConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Token embedding width.
    pub d_l: usize,
    pub d_m: usize,
    /// Interaction layers in the encoder.
    pub layers: usize,
    /// Lattice resolution `n`.
    pub lattice: usize,
    pub lattice_base: usize,
    /// Decoder outputs `N`.
    pub n_outputs: usize,
    /// Hidden width of the match head.
    pub match_hidden: usize,
    /// Generator hidden width.
    pub gen_hidden: usize,
    /// Decode steps `T_s`.
    pub t_s: usize,
    /// Augmented features per labelled moment `N_s`.
    pub n_s: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_l: 16,
            d_m: 32,
            layers: 1,
            lattice: 16,
            lattice_base: 16,
            n_outputs: 5,
            match_hidden: 32,
            gen_hidden: 32,
            t_s: 2,
            n_s: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Expected positives per sample; defaults to `n_outputs`.
    pub k: Option<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            k: None,
            gamma1: 0.1,
            gamma2: 0.05,
            lambda: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub t_thresh: f64,
    pub nms_thresh: f64,
    pub semantic_reference: SemanticReference,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            t_thresh: 0.5,
            nms_thresh: 0.5,
            semantic_reference: SemanticReference::Generated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient-norm clip; off when absent.
    pub clip_norm: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 16,
            epochs: 30,
            clip_norm: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Replace the expected-positive loss by assume-negative BCE.
    pub no_epr: bool,
    /// Drop the matching branch; estimation uses semantic scores only.
    pub no_matching: bool,
    /// Drop the reconstruction branch; estimation uses matching scores only.
    pub no_reconstruction: bool,
    /// Reconstruct from the plain mean feature instead of N_s augmentations.
    pub no_augmenting: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    NoEpr,
    NoMatching,
    NoReconstruction,
    NoAugmenting,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [
        AblationMode::NoEpr,
        AblationMode::NoMatching,
        AblationMode::NoReconstruction,
        AblationMode::NoAugmenting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::NoEpr => "no_epr",
            AblationMode::NoMatching => "no_matching",
            AblationMode::NoReconstruction => "no_reconstruction",
            AblationMode::NoAugmenting => "no_augmenting",
        }
    }

    pub fn apply(self, a: &mut Ablation) {
        match self {
            AblationMode::NoEpr => a.no_epr = true,
            AblationMode::NoMatching => a.no_matching = true,
            AblationMode::NoReconstruction => a.no_reconstruction = true,
            AblationMode::NoAugmenting => a.no_augmenting = true,
        }
    }
}

impl std::str::FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ablation `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub test_samples: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub n: usize,
    pub g: usize,
    pub aggregation: Aggregation,
    /// IoU at which a pseudo-label counts as hitting an oracle positive.
    pub pseudo_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            test_samples: 200,
            alphas: vec![0.5, 0.7],
            betas: vec![0.5, 0.4],
            n: 5,
            g: 5,
            aggregation: Aggregation::Pooled,
            pseudo_iou: 0.5,
        }
    }
}

/// Everything a run depends on. Serialised as TOML with one table per
/// section; omitted keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: GenConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub estimate: EstimateConfig,
    pub optim: OptimConfig,
    pub ablation: Ablation,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            data: GenConfig::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            estimate: EstimateConfig::default(),
            optim: OptimConfig::default(),
            ablation: Ablation::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn k(&self) -> f64 {
        self.loss.k.unwrap_or(self.model.n_outputs as f64)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let m = &self.model;
        if m.d_m == 0 || m.d_l == 0 || m.match_hidden == 0 || m.gen_hidden == 0 {
            return bad("model widths must be >= 1");
        }
        if m.lattice == 0 || m.lattice_base == 0 {
            return bad("lattice resolution and base must be >= 1");
        }
        if m.n_outputs == 0 || m.t_s == 0 || m.n_s == 0 {
            return bad("n_outputs, t_s and n_s must be >= 1");
        }
        let l = &self.loss;
        for (name, v) in [("gamma1", l.gamma1), ("gamma2", l.gamma2), ("lambda", l.lambda)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be finite and >= 0"));
            }
        }
        if self.k() <= 0.0 || !self.k().is_finite() {
            return bad("k must be positive");
        }
        let e = &self.estimate;
        if !(0.0..=1.0).contains(&e.t_thresh) || !(0.0..=1.0).contains(&e.nms_thresh) {
            return bad("thresholds must lie in [0, 1]");
        }
        let o = &self.optim;
        if !(o.lr > 0.0) || o.batch_size == 0 || o.epochs == 0 {
            return bad("lr, batch_size and epochs must be positive");
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return bad("optimizer betas must lie in [0, 1)");
        }
        if self.ablation.no_matching && self.ablation.no_reconstruction {
            return bad("no_matching and no_reconstruction leave nothing to estimate with");
        }
        let ev = &self.eval;
        if ev.n == 0 || ev.g == 0 || ev.test_samples == 0 {
            return bad("eval n, g and test_samples must be >= 1");
        }
        Ok(())
    }
}
