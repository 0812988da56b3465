//! Shared run machinery: turning a config into concrete datasets, building
//! augmented training sets per strategy, and writing provenance-stamped
//! outputs. Commands compose these pieces; tests drive them directly.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use qaug::augment::{
    augment_custom, augment_general, classic_augment, compute_error_profile, AugmentedDataset,
};
use qaug::data::{downscale, load_idx, subset, synthetic_digit_dataset, LabeledDataset};
use qaug::error::{Error, Result};
use qaug::hqcnn::{EpochStat, HqcnnModel};
use qaug::nn::save_json;
use qaug::qgan::{per_class_conditioning, train_class_generators};
use qaug::seeding::derive_seed;

use crate::config::ExperimentConfig;
use crate::hashing::combined_input_hash;

/// Training-set augmentation strategy. `None` is the un-augmented baseline;
/// the others add generated samples before classifier training.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    None,
    Classic,
    General,
    Custom,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Classic => "classic",
            Strategy::General => "general",
            Strategy::Custom => "custom",
        }
    }
}

/// Data shared by every run of a command: the raw training pool (subset per
/// seed later) and the finished test set (fixed across seeds).
pub struct DataPools {
    pub train_pool: LabeledDataset,
    pub test_set: LabeledDataset,
    pub input_files: Vec<PathBuf>,
    pub input_hash: String,
}

/// Load the configured dataset pair, or render the synthetic fallback under
/// `out_dir/synthetic`. Called once per command, before any fan-out.
pub fn prepare_pools(config: &ExperimentConfig) -> Result<DataPools> {
    let d = &config.dataset;
    let (train_pool, test_pool, input_files) = match (&d.images, &d.labels) {
        (Some(images), Some(labels)) => {
            let test_images = d.test_images.as_ref().expect("validated");
            let test_labels = d.test_labels.as_ref().expect("validated");
            (
                load_idx(images, labels)?,
                load_idx(test_images, test_labels)?,
                vec![images.clone(), labels.clone(), test_images.clone(), test_labels.clone()],
            )
        }
        _ => {
            let base = config.out_dir.join("synthetic");
            let train_dir = base.join("train");
            let test_dir = base.join("test");
            let train = synthetic_digit_dataset(d.pool_per_class, derive_seed(d.data_seed, 1), &train_dir)?;
            let test = synthetic_digit_dataset(d.test_per_class, derive_seed(d.data_seed, 2), &test_dir)?;
            let files = [&train_dir, &test_dir]
                .iter()
                .flat_map(|dir| {
                    ["digits-images-idx3-ubyte", "digits-labels-idx1-ubyte"]
                        .iter()
                        .map(|name| dir.join(name))
                        .collect::<Vec<_>>()
                })
                .collect();
            (train, test, files)
        }
    };
    let test_subset = subset(&test_pool, &d.classes, d.test_per_class, derive_seed(d.data_seed, 3))?;
    let test_set = downscale(&test_subset, d.image_size)?;
    let input_hash = combined_input_hash(&input_files)?;
    Ok(DataPools { train_pool, test_set, input_files, input_hash })
}

/// Keep at most `caps[c]` samples of each class, in dataset order.
fn apply_class_caps(ds: &LabeledDataset, caps: &[usize]) -> Result<LabeledDataset> {
    if caps.len() != ds.n_classes() {
        return Err(Error::Config(format!(
            "{} caps for {} classes",
            caps.len(),
            ds.n_classes()
        )));
    }
    let mut seen = vec![0usize; caps.len()];
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..ds.len() {
        let class = ds.labels[i];
        if seen[class] < caps[class] {
            seen[class] += 1;
            images.push(ds.images[i].clone());
            labels.push(class);
        }
    }
    LabeledDataset::new(images, labels, ds.class_names.clone())
}

/// The per-seed training set: seeded subset, optional class caps, downscale.
pub fn train_split(
    config: &ExperimentConfig,
    pools: &DataPools,
    run_seed: u64,
) -> Result<LabeledDataset> {
    let d = &config.dataset;
    let selected = subset(&pools.train_pool, &d.classes, d.per_class, derive_seed(run_seed, 0x11))?;
    let capped = match &d.class_caps {
        Some(caps) => apply_class_caps(&selected, caps)?,
        None => selected,
    };
    downscale(&capped, d.image_size)
}

/// Build the augmented dataset a strategy prescribes. The model-driven
/// strategies first train a classifier on the un-augmented split (and, for
/// `custom`, an error profile on the test set), then per-class generators.
pub fn build_augmented(
    config: &ExperimentConfig,
    pools: &DataPools,
    train: &LabeledDataset,
    strategy: Strategy,
    run_seed: u64,
) -> Result<AugmentedDataset> {
    let n_classes = train.n_classes();
    match strategy {
        Strategy::None => Err(Error::Config("the baseline adds no samples".into())),
        Strategy::Classic => {
            classic_augment(train, config.augment.n_gen, derive_seed(run_seed, 0x21))
        }
        Strategy::General => {
            let mut classifier = HqcnnModel::new(config.hqcnn_spec(), derive_seed(run_seed, 0x22))?;
            classifier.train(train, &config.train_config(derive_seed(run_seed, 0x23)))?;
            let (generators, _) = train_class_generators(
                &config.qgan_spec(),
                &config.gan_config(derive_seed(run_seed, 0x24)),
                train,
                None,
            )?;
            augment_general(&classifier, train, &generators, config.augment.n_gen, n_classes)
        }
        Strategy::Custom => {
            let mut classifier = HqcnnModel::new(config.hqcnn_spec(), derive_seed(run_seed, 0x22))?;
            classifier.train(train, &config.train_config(derive_seed(run_seed, 0x23)))?;
            let profile = compute_error_profile(&classifier, &pools.test_set)?;
            let conditioning =
                per_class_conditioning(config.gan_train.epochs * n_classes, &profile.r)?;
            let (generators, _) = train_class_generators(
                &config.qgan_spec(),
                &config.gan_config(derive_seed(run_seed, 0x24)),
                train,
                Some(&conditioning),
            )?;
            augment_custom(
                &classifier,
                train,
                &pools.test_set,
                &generators,
                &config.augment_config(derive_seed(run_seed, 0x25)),
            )
        }
    }
}

/// One strategy/seed cell of a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRun {
    pub strategy: Strategy,
    pub seed: u64,
    pub generated_per_class: Vec<usize>,
    pub history: Vec<EpochStat>,
    pub final_test: qaug::hqcnn::EvalReport,
    pub final_train_accuracy: f64,
}

/// Train a fresh classifier for one comparison cell: assemble the strategy's
/// training set, fit with held-out monitoring, and report final metrics.
/// Model and shuffle seeds depend only on `run_seed`, so every strategy sees
/// the same initialization at the same seed.
pub fn compare_run(
    config: &ExperimentConfig,
    pools: &DataPools,
    strategy: Strategy,
    run_seed: u64,
) -> Result<(CompareRun, Option<AugmentedDataset>)> {
    let split = train_split(config, pools, run_seed)?;
    let n_classes = split.n_classes();
    let (train_set, generated_per_class, augmented) = match strategy {
        Strategy::None => (split, vec![0; n_classes], None),
        _ => {
            let aug = build_augmented(config, pools, &split, strategy, run_seed)?;
            (aug.combined()?, aug.generated_histogram(n_classes), Some(aug))
        }
    };
    let mut model = HqcnnModel::new(config.hqcnn_spec(), derive_seed(run_seed, 0x30))?;
    let (history, _) = model.train_monitored(
        &train_set,
        Some(&pools.test_set),
        &config.train_config(derive_seed(run_seed, 0x31)),
    )?;
    let final_test = model.evaluate(&pools.test_set)?;
    let final_train_accuracy = model.evaluate(&train_set)?.average_accuracy;
    let run = CompareRun {
        strategy,
        seed: run_seed,
        generated_per_class,
        history,
        final_test,
        final_train_accuracy,
    };
    Ok((run, augmented))
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Stamps every output file with the command, the resolved config, and the
/// content hash of the inputs it was produced from.
pub struct OutputWriter<'a> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub input_hash: &'a str,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    timestamp: u64,
    input_hash: &'a str,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    payload: &'a T,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl OutputWriter<'_> {
    /// Write `payload`'s fields inside the provenance envelope.
    pub fn json<T: Serialize>(&self, path: &Path, payload: &T) -> Result<()> {
        save_json(
            path,
            &Envelope {
                command: self.command,
                timestamp: now_unix(),
                input_hash: self.input_hash,
                config: self.config,
                payload,
            },
        )
    }

    /// Write a CSV whose leading `#` comment lines carry the provenance.
    pub fn csv(&self, path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut body = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut body);
            w.write_record(header).map_err(csv_err)?;
            for row in rows {
                w.write_record(row).map_err(csv_err)?;
            }
            w.flush()?;
        }
        let config_json = serde_json::to_string(self.config)?;
        let mut text = format!(
            "# command={} input_hash={}\n# config={}\n",
            self.command, self.input_hash, config_json
        );
        text.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// `out/` for single-seed commands, `out/seed-N/` when fanning out.
pub fn seed_dir(out: &Path, seed: u64, single: bool) -> PathBuf {
    if single {
        out.to_path_buf()
    } else {
        out.join(format!("seed-{seed}"))
    }
}
