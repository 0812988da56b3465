//! The six commands behind the binary. Each validates the config, resolves
//! data once, fans out over seeds where that makes sense, and leaves
//! provenance-stamped JSON/CSV artifacts under the output directory.

use std::path::{Path, PathBuf};

use serde::Serialize;

use qaug::augment::{save_augmented, ErrorProfile};
use qaug::error::{Error, Result};
use qaug::hqcnn::{EpochStat, EvalReport, HqcnnCheckpoint, HqcnnModel};
use qaug::nn::load_json;
use qaug::qgan::{train_classical_gan, train_qgan, ClassicalGan, GanHistory, QganModel};
use qaug::seeding::derive_seed;

use crate::config::ExperimentConfig;
use crate::hashing::combined_input_hash;
use crate::jobs::run_parallel;
use crate::runs::{
    build_augmented, compare_run, mean_std, prepare_pools, seed_dir, train_split, CompareRun,
    OutputWriter, Strategy,
};

fn curve_rows(history: &[EpochStat]) -> Vec<Vec<String>> {
    history
        .iter()
        .map(|s| {
            vec![
                s.epoch.to_string(),
                s.loss.to_string(),
                s.train_accuracy.to_string(),
                s.test_accuracy.map(|a| a.to_string()).unwrap_or_default(),
            ]
        })
        .collect()
}

fn history_rows(history: &GanHistory) -> Vec<Vec<String>> {
    history
        .steps
        .iter()
        .map(|s| {
            vec![
                s.step.to_string(),
                s.d_loss.to_string(),
                s.g_loss.to_string(),
                s.value.to_string(),
            ]
        })
        .collect()
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    final_test_accuracy: f64,
    final_train_accuracy: f64,
}

#[derive(Serialize)]
struct MultiSeedMetrics<'a> {
    seeds: &'a [u64],
    per_seed: Vec<SeedSummary>,
    mean_final_test_accuracy: f64,
    std_final_test_accuracy: f64,
}

/// Train the classifier on each seed's split; writes per-seed metrics.json,
/// curve.csv, and checkpoint.json (plus an aggregate metrics.json when
/// fanning out over several seeds).
pub fn cmd_train_hqcnn(config: &ExperimentConfig) -> Result<PathBuf> {
    config.validate()?;
    let pools = prepare_pools(config)?;
    let writer = OutputWriter {
        command: "train-hqcnn",
        config,
        input_hash: &pools.input_hash,
    };
    let single = config.seeds.len() == 1;
    let summaries = run_parallel(&config.seeds, |&seed| {
        let split = train_split(config, &pools, seed)?;
        let mut model = HqcnnModel::new(config.hqcnn_spec(), derive_seed(seed, 0x101))?;
        let (history, optimizer) = model.train_monitored(
            &split,
            Some(&pools.test_set),
            &config.train_config(derive_seed(seed, 0x102)),
        )?;
        let final_train = model.evaluate(&split)?;
        let final_test = model.evaluate(&pools.test_set)?;
        let dir = seed_dir(&config.out_dir, seed, single);
        let checkpoint = HqcnnCheckpoint {
            model,
            optimizer,
            seed,
            epochs_trained: config.train.epochs,
        };
        writer.json(&dir.join("checkpoint.json"), &checkpoint)?;
        writer.csv(
            &dir.join("curve.csv"),
            &["epoch", "loss", "train_accuracy", "test_accuracy"],
            &curve_rows(&history),
        )?;
        #[derive(Serialize)]
        struct Metrics<'a> {
            seed: u64,
            epochs_trained: usize,
            final_train: &'a EvalReport,
            final_test: &'a EvalReport,
            history: &'a [EpochStat],
            checkpoint: &'a str,
        }
        writer.json(
            &dir.join("metrics.json"),
            &Metrics {
                seed,
                epochs_trained: config.train.epochs,
                final_train: &final_train,
                final_test: &final_test,
                history: &history,
                checkpoint: "checkpoint.json",
            },
        )?;
        Ok(SeedSummary {
            seed,
            final_test_accuracy: final_test.average_accuracy,
            final_train_accuracy: final_train.average_accuracy,
        })
    })?;
    if !single {
        let finals: Vec<f64> = summaries.iter().map(|s| s.final_test_accuracy).collect();
        let (mean, std) = mean_std(&finals);
        writer.json(
            &config.out_dir.join("metrics.json"),
            &MultiSeedMetrics {
                seeds: &config.seeds,
                per_seed: summaries,
                mean_final_test_accuracy: mean,
                std_final_test_accuracy: std,
            },
        )?;
    }
    Ok(config.out_dir.join("metrics.json"))
}

enum GanKind {
    Quantum,
    Classical,
}

fn run_gan_command(config: &ExperimentConfig, kind: GanKind) -> Result<PathBuf> {
    config.validate()?;
    let pools = prepare_pools(config)?;
    let command = match kind {
        GanKind::Quantum => "train-qgan",
        GanKind::Classical => "train-cgan",
    };
    let writer = OutputWriter { command, config, input_hash: &pools.input_hash };
    let single = config.seeds.len() == 1;
    #[derive(Serialize)]
    struct GanMetrics {
        seed: u64,
        g_params: usize,
        d_params: usize,
        steps: usize,
        final_d_loss: Option<f64>,
        final_g_loss: Option<f64>,
        final_value: Option<f64>,
    }
    run_parallel(&config.seeds, |&seed| {
        let split = train_split(config, &pools, seed)?;
        let gan_config = config.gan_config(derive_seed(seed, 0x202));
        let history = match kind {
            GanKind::Quantum => {
                let mut model = QganModel::new(config.qgan_spec(), derive_seed(seed, 0x201))?;
                let history = train_qgan(&mut model, &split, &gan_config)?;
                #[derive(Serialize)]
                struct Checkpoint<'a> {
                    seed: u64,
                    model: &'a QganModel,
                }
                writer.json(
                    &seed_dir(&config.out_dir, seed, single).join("checkpoint.json"),
                    &Checkpoint { seed, model: &model },
                )?;
                history
            }
            GanKind::Classical => {
                let mut model =
                    ClassicalGan::new(&config.qgan_spec(), &config.qgan.cgan_hidden, derive_seed(seed, 0x211));
                let history = train_classical_gan(&mut model, &split, &gan_config)?;
                #[derive(Serialize)]
                struct Checkpoint<'a> {
                    seed: u64,
                    model: &'a ClassicalGan,
                }
                writer.json(
                    &seed_dir(&config.out_dir, seed, single).join("checkpoint.json"),
                    &Checkpoint { seed, model: &model },
                )?;
                history
            }
        };
        let dir = seed_dir(&config.out_dir, seed, single);
        writer.csv(
            &dir.join("history.csv"),
            &["step", "d_loss", "g_loss", "V"],
            &history_rows(&history),
        )?;
        let last = history.steps.last();
        let metrics = GanMetrics {
            seed,
            g_params: history.g_params,
            d_params: history.d_params,
            steps: history.steps.len(),
            final_d_loss: last.map(|s| s.d_loss),
            final_g_loss: last.map(|s| s.g_loss),
            final_value: last.map(|s| s.value),
        };
        writer.json(&dir.join("metrics.json"), &metrics)?;
        Ok(())
    })?;
    if !single {
        #[derive(Serialize)]
        struct Summary<'a> {
            seeds: &'a [u64],
        }
        writer.json(&config.out_dir.join("metrics.json"), &Summary { seeds: &config.seeds })?;
    }
    Ok(config.out_dir.join("metrics.json"))
}

/// Train one adversarial generator per seed on the mixed-class split.
pub fn cmd_train_qgan(config: &ExperimentConfig) -> Result<PathBuf> {
    run_gan_command(config, GanKind::Quantum)
}

/// Same protocol with the classical generator.
pub fn cmd_train_cgan(config: &ExperimentConfig) -> Result<PathBuf> {
    run_gan_command(config, GanKind::Classical)
}

/// Produce an augmented dataset directory (samples + manifest) per seed.
pub fn cmd_augment(config: &ExperimentConfig, strategy: Strategy) -> Result<PathBuf> {
    config.validate()?;
    if strategy == Strategy::None {
        return Err(Error::Config("augment needs a sample-adding strategy".into()));
    }
    let pools = prepare_pools(config)?;
    let writer = OutputWriter { command: "augment", config, input_hash: &pools.input_hash };
    let single = config.seeds.len() == 1;
    #[derive(Serialize)]
    struct AugmentMetrics<'a> {
        seed: u64,
        strategy: &'a str,
        generated_per_class: Vec<usize>,
        warnings: &'a [String],
        profile: Option<&'a ErrorProfile>,
        thresholds: Option<&'a [f64]>,
    }
    run_parallel(&config.seeds, |&seed| {
        let split = train_split(config, &pools, seed)?;
        let aug = build_augmented(config, &pools, &split, strategy, seed)?;
        let dir = seed_dir(&config.out_dir, seed, single);
        save_augmented(&dir, &aug, strategy.label())?;
        writer.json(
            &dir.join("metrics.json"),
            &AugmentMetrics {
                seed,
                strategy: strategy.label(),
                generated_per_class: aug.generated_histogram(split.n_classes()),
                warnings: &aug.warnings,
                profile: aug.profile.as_ref(),
                thresholds: aug.thresholds.as_deref(),
            },
        )?;
        Ok(())
    })?;
    if single {
        Ok(config.out_dir.join("manifest.json"))
    } else {
        #[derive(Serialize)]
        struct Summary<'a> {
            seeds: &'a [u64],
            strategy: &'a str,
        }
        writer.json(
            &config.out_dir.join("metrics.json"),
            &Summary { seeds: &config.seeds, strategy: strategy.label() },
        )?;
        Ok(config.out_dir.join("metrics.json"))
    }
}

#[derive(Serialize)]
struct StrategySummary<'a> {
    strategy: &'a str,
    runs: Vec<CompareRun>,
    mean_final_test_accuracy: f64,
    std_final_test_accuracy: f64,
    curve_csv: String,
}

/// Train classifiers for every (strategy, seed) cell, write per-run
/// artifacts plus one aggregated accuracy curve per strategy, and a
/// comparison.json covering everything. The no-augmentation baseline is
/// always included.
pub fn cmd_compare(config: &ExperimentConfig, strategies: &[Strategy]) -> Result<PathBuf> {
    config.validate()?;
    let mut ordered: Vec<Strategy> = Vec::new();
    if !strategies.contains(&Strategy::None) {
        ordered.push(Strategy::None);
    }
    for &s in strategies {
        if !ordered.contains(&s) {
            ordered.push(s);
        }
    }
    let pools = prepare_pools(config)?;
    let writer = OutputWriter { command: "compare", config, input_hash: &pools.input_hash };
    let cells: Vec<(Strategy, u64)> = ordered
        .iter()
        .flat_map(|&s| config.seeds.iter().map(move |&k| (s, k)))
        .collect();
    let results = run_parallel(&cells, |&(strategy, seed)| {
        let (run, augmented) = compare_run(config, &pools, strategy, seed)?;
        let run_dir = config
            .out_dir
            .join("runs")
            .join(strategy.label())
            .join(format!("seed-{seed}"));
        if let Some(aug) = &augmented {
            save_augmented(&run_dir.join("augmented"), aug, strategy.label())?;
        }
        writer.csv(
            &run_dir.join("curve.csv"),
            &["epoch", "loss", "train_accuracy", "test_accuracy"],
            &curve_rows(&run.history),
        )?;
        writer.json(&run_dir.join("metrics.json"), &run)?;
        Ok(run)
    })?;
    let mut summaries = Vec::new();
    for (i, &strategy) in ordered.iter().enumerate() {
        let runs: Vec<CompareRun> =
            results[i * config.seeds.len()..(i + 1) * config.seeds.len()].to_vec();
        let epochs = runs.first().map(|r| r.history.len()).unwrap_or(0);
        let mut rows = Vec::with_capacity(epochs);
        for e in 0..epochs {
            let tests: Vec<f64> = runs
                .iter()
                .map(|r| r.history[e].test_accuracy.expect("monitored training"))
                .collect();
            let trains: Vec<f64> = runs.iter().map(|r| r.history[e].train_accuracy).collect();
            let losses: Vec<f64> = runs.iter().map(|r| r.history[e].loss).collect();
            let (test_mean, test_std) = mean_std(&tests);
            let (train_mean, train_std) = mean_std(&trains);
            let (loss_mean, _) = mean_std(&losses);
            rows.push(vec![
                e.to_string(),
                test_mean.to_string(),
                test_std.to_string(),
                train_mean.to_string(),
                train_std.to_string(),
                loss_mean.to_string(),
                runs.len().to_string(),
            ]);
        }
        let csv_name = format!("{}.csv", strategy.label());
        writer.csv(
            &config.out_dir.join(&csv_name),
            &[
                "epoch",
                "mean_test_accuracy",
                "std_test_accuracy",
                "mean_train_accuracy",
                "std_train_accuracy",
                "mean_loss",
                "n_seeds",
            ],
            &rows,
        )?;
        let finals: Vec<f64> =
            runs.iter().map(|r| r.final_test.average_accuracy).collect();
        let (mean, std) = mean_std(&finals);
        summaries.push(StrategySummary {
            strategy: strategy.label(),
            runs,
            mean_final_test_accuracy: mean,
            std_final_test_accuracy: std,
            curve_csv: csv_name,
        });
    }
    #[derive(Serialize)]
    struct Comparison<'a> {
        seeds: &'a [u64],
        strategies: Vec<StrategySummary<'a>>,
    }
    let path = config.out_dir.join("comparison.json");
    writer.json(&path, &Comparison { seeds: &config.seeds, strategies: summaries })?;
    Ok(path)
}

/// Score a stored classifier checkpoint on the configured test set.
pub fn cmd_evaluate(config: &ExperimentConfig, checkpoint: &Path) -> Result<PathBuf> {
    config.validate()?;
    let pools = prepare_pools(config)?;
    let stored: HqcnnCheckpoint = load_json(checkpoint)?;
    let spec = stored.model.spec();
    if spec.image_side != config.dataset.image_size
        || spec.n_classes != config.dataset.classes.len()
    {
        return Err(Error::Config(format!(
            "checkpoint expects {}x{} images over {} classes, config provides {}x{} over {}",
            spec.image_side,
            spec.image_side,
            spec.n_classes,
            config.dataset.image_size,
            config.dataset.image_size,
            config.dataset.classes.len(),
        )));
    }
    let mut input_files = pools.input_files.clone();
    input_files.push(checkpoint.to_path_buf());
    let input_hash = combined_input_hash(&input_files)?;
    let writer = OutputWriter { command: "evaluate", config, input_hash: &input_hash };
    let report = stored.model.evaluate(&pools.test_set)?;
    #[derive(Serialize)]
    struct Metrics<'a> {
        checkpoint: String,
        checkpoint_seed: u64,
        epochs_trained: usize,
        test: &'a EvalReport,
    }
    let path = config.out_dir.join("metrics.json");
    writer.json(
        &path,
        &Metrics {
            checkpoint: checkpoint.display().to_string(),
            checkpoint_seed: stored.seed,
            epochs_trained: stored.epochs_trained,
            test: &report,
        },
    )?;
    Ok(path)
}
