//! Experiment runner for the hybrid quantum-classical augmentation toolkit.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qaug::error::Result;
use qaug_cli::commands::{
    cmd_augment, cmd_compare, cmd_evaluate, cmd_train_cgan, cmd_train_hqcnn, cmd_train_qgan,
};
use qaug_cli::{exit_code, EpochsTarget, ExperimentConfig, Strategy};

#[derive(Parser)]
#[command(
    name = "qaug",
    version,
    about = "Train hybrid quantum-classical models and augment small image datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; built-in defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Replace the config's seed list with this single seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the epoch budget this command trains with.
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
}

/// Sample-adding strategies accepted by `augment`.
#[derive(Clone, Copy, ValueEnum)]
enum AugmentStrategy {
    General,
    Custom,
    Classic,
}

impl From<AugmentStrategy> for Strategy {
    fn from(s: AugmentStrategy) -> Self {
        match s {
            AugmentStrategy::General => Strategy::General,
            AugmentStrategy::Custom => Strategy::Custom,
            AugmentStrategy::Classic => Strategy::Classic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the hybrid classifier; writes metrics.json, curve.csv, checkpoint.json.
    TrainHqcnn {
        #[command(flatten)]
        common: Common,
    },
    /// Train the hybrid adversarial generator; writes history.csv and a checkpoint.
    TrainQgan {
        #[command(flatten)]
        common: Common,
    },
    /// Train the classical adversarial baseline; same outputs as train-qgan.
    TrainCgan {
        #[command(flatten)]
        common: Common,
    },
    /// Build an augmented dataset directory with the chosen strategy.
    Augment {
        #[arg(long, value_enum)]
        strategy: AugmentStrategy,
        #[command(flatten)]
        common: Common,
    },
    /// Train classifiers across strategies and seeds; aggregate the accuracy curves.
    Compare {
        /// Comma-separated strategies; the no-augmentation baseline is always added.
        #[arg(long, value_enum, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a stored classifier checkpoint on the configured test set.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common, target: EpochsTarget) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(common.config.as_deref())?;
    config.apply_overrides(common.seed, common.out.clone(), common.epochs, target);
    Ok(config)
}

fn run(cli: Cli) -> Result<PathBuf> {
    match &cli.command {
        Command::TrainHqcnn { common } => {
            cmd_train_hqcnn(&load_config(common, EpochsTarget::Classifier)?)
        }
        Command::TrainQgan { common } => {
            cmd_train_qgan(&load_config(common, EpochsTarget::Gan)?)
        }
        Command::TrainCgan { common } => {
            cmd_train_cgan(&load_config(common, EpochsTarget::Gan)?)
        }
        Command::Augment { strategy, common } => {
            cmd_augment(&load_config(common, EpochsTarget::Gan)?, (*strategy).into())
        }
        Command::Compare { strategies, common } => {
            let list = strategies
                .clone()
                .unwrap_or_else(|| vec![Strategy::Classic, Strategy::General, Strategy::Custom]);
            cmd_compare(&load_config(common, EpochsTarget::Classifier)?, &list)
        }
        Command::Evaluate { checkpoint, common } => {
            cmd_evaluate(&load_config(common, EpochsTarget::Classifier)?, checkpoint)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(artifact) => println!("wrote {}", artifact.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
