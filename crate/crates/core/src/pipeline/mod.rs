//! End-to-end orchestration: synthetic open-set data, the training loop,
//! evaluation, ablation sweeps, and the file formats behind the CLI.

mod dataset;
mod export;
mod sweep;
mod train;

pub use dataset::{generate_dataset, GenerationMeta, SplitData, SyntheticDataset};
pub use export::export_embeddings;
pub use sweep::{run_sweep, sweep_rows_to_csv, SweepGrid, SweepRow};
pub use train::{evaluate, run_experiment, run_experiment_on, train, EvalMetrics, ExperimentOutput, RunReport};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::losses::TrainMode;
use crate::model::ModelDims;

/// Input dimension of the synthetic benchmark (points in the plane).
pub const INPUT_DIM: usize = 2;

/// Every hyperparameter of the objective plus schedule and data-generation
/// settings. `Default` is the shipped configuration; JSON configs may give
/// any subset of fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    /// K known classes.
    pub num_known: usize,
    /// Unknown clusters appearing only in the test split.
    pub unknown_clusters: usize,
    /// Training points per known class.
    pub samples_per_class: usize,
    /// Training background points.
    pub background_samples: usize,
    /// Test points per known class.
    pub test_samples_per_class: usize,
    /// Test background points.
    pub test_background_samples: usize,
    /// Test points per unknown cluster.
    pub unknown_samples_per_cluster: usize,
    /// Radius of the circle the class means sit on.
    pub circle_radius: f64,
    /// Unknown cluster means sit at held-out angles at this fraction of
    /// the circle radius (interior placement keeps them off the
    /// between-class interpolation path, where open-set errors are real).
    pub unknown_radius_factor: f64,
    /// Standard deviation of each class blob.
    pub blob_std: f64,
    /// Hidden layer widths of the feature extractor.
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub embed_dim: usize,
    /// Iterations k_max.
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Cosine logit scale (also the anchor magnitude).
    pub alpha_scale: f64,
    /// Contrastive temperature.
    pub tau: f64,
    /// Exponent of the unknown-probability uncertainty weight.
    pub alpha_w: f64,
    /// Weight of the unknown-probability term.
    pub beta: f64,
    /// Weight of the class-anchor transport term.
    pub lambda: f64,
    /// Initial contrastive weight (decays linearly to zero).
    pub delta0: f64,
    /// Sinkhorn blur (length scale of the entropic regularization).
    pub blur: f64,
    /// Power of the L1 ground cost.
    pub cost_power: f64,
    /// Hard examples mined per iteration, foreground / background.
    pub k_fg: usize,
    pub k_bg: usize,
    /// Memory bank capacity per class.
    pub bank_capacity: usize,
    /// Power-iteration budget for spectral normalization.
    pub sn_iters: usize,
    /// Spectral normalization of the classifier; forced off in
    /// `ce-baseline` mode.
    pub spectral_norm: bool,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_known: 5,
            unknown_clusters: 3,
            samples_per_class: 200,
            background_samples: 60,
            test_samples_per_class: 150,
            test_background_samples: 100,
            unknown_samples_per_cluster: 150,
            circle_radius: 5.0,
            unknown_radius_factor: 1.0,
            blob_std: 1.2,
            hidden: vec![64, 64],
            feature_dim: 16,
            embed_dim: 16,
            iterations: 3000,
            batch_size: 128,
            lr: 0.02,
            momentum: 0.9,
            weight_decay: 1e-4,
            alpha_scale: 20.0,
            tau: 0.1,
            alpha_w: 1.0,
            beta: 0.5,
            lambda: 1.7e-3,
            delta0: 0.21,
            blur: 0.1,
            cost_power: 1.0,
            k_fg: 3,
            k_bg: 3,
            bank_capacity: 64,
            sn_iters: 100,
            spectral_norm: true,
            mode: TrainMode::OdCwa,
        }
    }
}

impl TrainConfig {
    /// The `ce-baseline` mode forces the auxiliary coefficients to zero.
    pub fn normalized(&self) -> TrainConfig {
        let mut cfg = self.clone();
        if cfg.mode == TrainMode::CeBaseline {
            cfg.lambda = 0.0;
            cfg.beta = 0.0;
            cfg.delta0 = 0.0;
            cfg.spectral_norm = false;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("delta0", self.delta0),
            ("tau", self.tau),
            ("alpha_w", self.alpha_w),
            ("lr", self.lr),
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
            ("alpha_scale", self.alpha_scale),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.blur <= 0.0 {
            return Err(Error::InvalidArgument(format!("blur must be > 0, got {}", self.blur)));
        }
        if self.cost_power < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "cost_power must be >= 1, got {}",
                self.cost_power
            )));
        }
        if self.tau == 0.0 {
            return Err(Error::InvalidArgument("tau must be > 0".into()));
        }
        if self.num_known < 2 {
            return Err(Error::InvalidArgument("need at least two known classes".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument("batch_size must be >= 2".into()));
        }
        if self.samples_per_class == 0 || self.test_samples_per_class == 0 {
            return Err(Error::InvalidArgument("per-class sample counts must be >= 1".into()));
        }
        if self.hidden.is_empty() || self.feature_dim == 0 || self.embed_dim == 0 {
            return Err(Error::InvalidArgument("model dims must be positive".into()));
        }
        Ok(())
    }

    pub fn model_dims(&self) -> ModelDims {
        ModelDims {
            input_dim: INPUT_DIM,
            hidden: self.hidden.clone(),
            feature_dim: self.feature_dim,
            embed_dim: self.embed_dim,
            c_total: self.num_known + 2,
        }
    }

    /// Hash identifying `(config, code version)`; normalization is applied
    /// first so equivalent configs hash identically.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.normalized())
            .expect("config serialization is infallible");
        let mut hasher = Sha256::new();
        hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
        hasher.update(b"\0");
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json(text: &str) -> Result<TrainConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
