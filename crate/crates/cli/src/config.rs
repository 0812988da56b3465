//! Experiment configuration: one TOML document covering data selection,
//! model shapes, and training budgets. Every field has a default, so the
//! binary runs standalone on synthetic data; command-line flags override
//! individual values after the file is read.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qaug::augment::AugmentConfig;
use qaug::error::{Error, Result};
use qaug::hqcnn::{HqcnnSpec, OptimChoice, TrainConfig};
use qaug::qgan::{GanTrainConfig, QganSpec};
use qaug::quantum::MAX_QUBITS;
use qaug::vqc::Entangler;

/// Where training/evaluation data comes from and how it is cut down.
/// When no paths are given, a synthetic digit set is rendered under the
/// output directory and used in their place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Source labels to keep; they are remapped to 0..n in this order.
    pub classes: Vec<usize>,
    /// Training samples drawn per class, reshuffled per run seed.
    pub per_class: usize,
    /// Held-out samples per class; fixed across run seeds.
    pub test_per_class: usize,
    /// Side length images are downscaled to before training.
    pub image_size: usize,
    /// Optional per-class ceilings applied after subsetting, for
    /// deliberately starving a class.
    pub class_caps: Option<Vec<usize>>,
    /// Seed for data selection that must not vary across run seeds
    /// (synthetic rendering, test-set choice).
    pub data_seed: u64,
    /// Per-class size of the synthetic training pool.
    pub pool_per_class: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            images: None,
            labels: None,
            test_images: None,
            test_labels: None,
            classes: vec![0, 1, 2],
            per_class: 100,
            test_per_class: 50,
            image_size: 8,
            class_caps: None,
            data_seed: 7,
            pool_per_class: 240,
        }
    }
}

/// Classifier architecture; image side and class count come from the
/// dataset section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HqcnnSection {
    pub conv_channels: usize,
    pub n_qubits: usize,
    pub vqc_depth: usize,
    pub entangler: Entangler,
}

impl Default for HqcnnSection {
    fn default() -> Self {
        Self { conv_channels: 4, n_qubits: 4, vqc_depth: 2, entangler: Entangler::Ring }
    }
}

/// Generator/discriminator architecture; image side comes from the dataset
/// section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QganSection {
    pub noise_dim: usize,
    pub vqc_depth: usize,
    pub entangler: Entangler,
    pub post_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    /// Hidden sizes of the classical baseline generator.
    pub cgan_hidden: Vec<usize>,
}

impl Default for QganSection {
    fn default() -> Self {
        Self {
            noise_dim: 4,
            vqc_depth: 2,
            entangler: Entangler::Ring,
            post_hidden: vec![16],
            disc_hidden: vec![64, 32],
            cgan_hidden: vec![32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimChoice,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self { epochs: d.epochs, batch_size: d.batch_size, optimizer: d.optimizer }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanTrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub d_steps: usize,
}

impl Default for GanTrainSection {
    fn default() -> Self {
        let d = GanTrainConfig::default();
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr_g: d.lr_g,
            lr_d: d.lr_d,
            d_steps: d.d_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub n_gen: usize,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_attempts: usize,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentConfig::default();
        Self { n_gen: d.n_gen, tau: d.tau, alpha: d.alpha, beta: d.beta, max_attempts: d.max_attempts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub hqcnn: HqcnnSection,
    pub qgan: QganSection,
    pub train: TrainSection,
    pub gan_train: GanTrainSection,
    pub augment: AugmentSection,
    /// Run seeds; multi-seed commands fan out over these.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            hqcnn: HqcnnSection::default(),
            qgan: QganSection::default(),
            train: TrainSection::default(),
            gan_train: GanTrainSection::default(),
            augment: AugmentSection::default(),
            seeds: vec![0],
            out_dir: PathBuf::from("qaug-out"),
        }
    }
}

/// Which epoch budget a `--epochs` flag overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochsTarget {
    /// Classifier training (`train-hqcnn`, `compare`, `evaluate`).
    Classifier,
    /// Adversarial training (`train-qgan`, `train-cgan`, `augment`).
    Gan,
}

impl ExperimentConfig {
    /// Read a TOML file, or fall back to defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    /// Apply command-line overrides; flags win over file values.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        out: Option<PathBuf>,
        epochs: Option<usize>,
        target: EpochsTarget,
    ) {
        if let Some(s) = seed {
            self.seeds = vec![s];
        }
        if let Some(o) = out {
            self.out_dir = o;
        }
        if let Some(e) = epochs {
            match target {
                EpochsTarget::Classifier => self.train.epochs = e,
                EpochsTarget::Gan => self.gan_train.epochs = e,
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        let provided =
            [&d.images, &d.labels, &d.test_images, &d.test_labels].iter().filter(|p| p.is_some()).count();
        if provided != 0 && provided != 4 {
            return Err(Error::Config(
                "dataset paths must be complete (images, labels, test_images, test_labels) or absent".into(),
            ));
        }
        if provided == 0 && d.classes.iter().any(|&c| c > 2) {
            return Err(Error::Config("synthetic data only renders digits 0, 1, 2".into()));
        }
        if d.classes.len() < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        if d.per_class == 0 || d.test_per_class == 0 {
            return Err(Error::Config("per_class and test_per_class must be >= 1".into()));
        }
        if d.image_size < 4 {
            return Err(Error::Config("image_size must be >= 4".into()));
        }
        if let Some(caps) = &d.class_caps {
            if caps.len() != d.classes.len() {
                return Err(Error::Config("class_caps must list one cap per class".into()));
            }
            if caps.iter().any(|&c| c == 0 || c > d.per_class) {
                return Err(Error::Config("class caps must lie in 1..=per_class".into()));
            }
        }
        if provided == 0 && d.pool_per_class < d.per_class {
            return Err(Error::Config("pool_per_class must be >= per_class".into()));
        }
        if self.hqcnn.n_qubits == 0
            || self.hqcnn.n_qubits > MAX_QUBITS
            || self.qgan.noise_dim == 0
            || self.qgan.noise_dim > MAX_QUBITS
        {
            return Err(Error::Config(format!("qubit counts must lie in 1..={MAX_QUBITS}")));
        }
        if self.hqcnn.vqc_depth == 0 || self.qgan.vqc_depth == 0 {
            return Err(Error::Config("circuit depth must be >= 1".into()));
        }
        if self.train.batch_size == 0 || self.gan_train.batch_size == 0 {
            return Err(Error::Config("batch sizes must be >= 1".into()));
        }
        if self.gan_train.lr_g <= 0.0 || self.gan_train.lr_d <= 0.0 || self.gan_train.d_steps == 0 {
            return Err(Error::Config("adversarial learning rates and d_steps must be positive".into()));
        }
        if !(0.0 < self.augment.tau && self.augment.tau < 1.0) {
            return Err(Error::Config("tau must lie in (0, 1)".into()));
        }
        if self.augment.alpha < 0.0 || self.augment.beta < 0.0 {
            return Err(Error::Config("alpha and beta must be non-negative".into()));
        }
        if self.augment.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        Ok(())
    }

    pub fn hqcnn_spec(&self) -> HqcnnSpec {
        HqcnnSpec {
            image_side: self.dataset.image_size,
            conv_channels: self.hqcnn.conv_channels,
            n_qubits: self.hqcnn.n_qubits,
            vqc_depth: self.hqcnn.vqc_depth,
            entangler: self.hqcnn.entangler,
            n_classes: self.dataset.classes.len(),
        }
    }

    pub fn qgan_spec(&self) -> QganSpec {
        QganSpec {
            noise_dim: self.qgan.noise_dim,
            vqc_depth: self.qgan.vqc_depth,
            entangler: self.qgan.entangler,
            post_hidden: self.qgan.post_hidden.clone(),
            image_side: self.dataset.image_size,
            disc_hidden: self.qgan.disc_hidden.clone(),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            optimizer: self.train.optimizer,
            seed,
        }
    }

    pub fn gan_config(&self, seed: u64) -> GanTrainConfig {
        GanTrainConfig {
            epochs: self.gan_train.epochs,
            batch_size: self.gan_train.batch_size,
            lr_g: self.gan_train.lr_g,
            lr_d: self.gan_train.lr_d,
            d_steps: self.gan_train.d_steps,
            seed,
        }
    }

    pub fn augment_config(&self, seed: u64) -> AugmentConfig {
        AugmentConfig {
            n_gen: self.augment.n_gen,
            tau: self.augment.tau,
            alpha: self.augment.alpha,
            beta: self.augment.beta,
            max_attempts: self.augment.max_attempts,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_preserves_config() {
        let config = ExperimentConfig::default();
        let text = toml::to_string(&config).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let config: ExperimentConfig =
            toml::from_str("seeds = [3, 4]\n[dataset]\nper_class = 20\n").unwrap();
        assert_eq!(config.seeds, vec![3, 4]);
        assert_eq!(config.dataset.per_class, 20);
        assert_eq!(config.dataset.image_size, 8);
        assert_eq!(config.train.epochs, 30);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("per_klass = 3\n").is_err());
        assert!(toml::from_str::<ExperimentConfig>("[dataset]\nimagess = \"x\"\n").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let mut config = ExperimentConfig::default();
        config.apply_overrides(
            Some(9),
            Some(PathBuf::from("elsewhere")),
            Some(2),
            EpochsTarget::Classifier,
        );
        assert_eq!(config.seeds, vec![9]);
        assert_eq!(config.out_dir, PathBuf::from("elsewhere"));
        assert_eq!(config.train.epochs, 2);
        assert_eq!(config.gan_train.epochs, 30);
        config.apply_overrides(None, None, Some(5), EpochsTarget::Gan);
        assert_eq!(config.gan_train.epochs, 5);
        assert_eq!(config.seeds, vec![9], "absent flags leave values alone");
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = ExperimentConfig::default();
        c.dataset.images = Some(PathBuf::from("only-images"));
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.dataset.classes = vec![0, 1, 7];
        assert!(c.validate().is_err(), "synthetic data has no digit 7");
        let mut c = ExperimentConfig::default();
        c.dataset.class_caps = Some(vec![100, 100]);
        assert!(c.validate().is_err(), "caps must match class count");
        let mut c = ExperimentConfig::default();
        c.augment.tau = 1.5;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.seeds.clear();
        assert!(c.validate().is_err());
    }
}
