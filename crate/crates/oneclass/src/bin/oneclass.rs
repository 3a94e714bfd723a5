//! Command-line front end. Each verb maps onto one experiment command;
//! all take a config file and an optional output-directory override, and
//! a few config knobs (seed, runs, train size) can be overridden without
//! editing the file.

use clap::{Args, Parser, Subcommand};
use oneclass::experiment::{
    cmd_compare_transforms, cmd_evaluate, cmd_preview_transforms, cmd_score, cmd_size_sweep,
    cmd_synth, cmd_train, Experiment, TrainSize,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "oneclass",
    about = "One-class image scoring via transform-prediction classifiers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (TOML)
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's run count
    #[arg(long)]
    runs: Option<usize>,
    /// Override the config's train size (a count or "all")
    #[arg(long)]
    train_size: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the config's synthetic dataset
    Synth(Common),
    /// Write each transform of a probe image as a PNG
    PreviewTransforms {
        #[command(flatten)]
        common: Common,
        /// Image to transform (defaults to a generated texture)
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Train one model per run
    Train(Common),
    /// Score the test split with a trained model
    Score {
        #[command(flatten)]
        common: Common,
        /// Model file to score with
        #[arg(long)]
        model: PathBuf,
    },
    /// Score with trained models and aggregate metrics across them
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model files, one per run
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
    },
    /// Run the experiment once per transform preset and tabulate
    CompareTransforms {
        #[command(flatten)]
        common: Common,
        /// Preset names to compare; the table sorts by AUC
        #[arg(long, num_args = 1.., required = true)]
        presets: Vec<String>,
    },
    /// Run the experiment once per training-set size and tabulate
    SizeSweep {
        #[command(flatten)]
        common: Common,
        /// Training-set sizes to try
        #[arg(long, num_args = 1.., required = true)]
        sizes: Vec<usize>,
    },
}

fn parse_train_size(text: &str) -> Result<TrainSize, String> {
    if text == "all" {
        return Ok(TrainSize::All);
    }
    match text.parse::<usize>() {
        Ok(n) if n > 0 => Ok(TrainSize::Count(n)),
        _ => Err(format!(
            "train size must be a positive count or \"all\", got \"{text}\""
        )),
    }
}

fn load_experiment(common: &Common) -> oneclass::Result<Experiment> {
    let mut exp = Experiment::load(&common.config)?;
    if let Some(seed) = common.seed {
        exp.config.seed = seed;
    }
    if let Some(runs) = common.runs {
        exp.config.runs = runs;
    }
    if let Some(text) = &common.train_size {
        exp.config.train_size = parse_train_size(text).map_err(oneclass::Error::InvalidConfig)?;
    }
    exp.config.validate()?;
    Ok(exp)
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn print_failures(failures: &[(String, String)]) {
    for (id, msg) in failures {
        eprintln!("warning: sample {id} failed to score: {msg}");
    }
}

fn run(cli: Cli) -> oneclass::Result<()> {
    match cli.command {
        Command::Synth(common) => {
            let exp = load_experiment(&common)?;
            let out = exp.output_dir(common.out.as_deref())?;
            let outcome = cmd_synth(&exp, &out)?;
            print_warnings(&outcome.warnings);
            println!(
                "wrote {} images, manifest {} (hash {})",
                outcome.images_written,
                outcome.manifest_path.display(),
                &outcome.dataset_hash[..12]
            );
        }
        Command::PreviewTransforms { common, image } => {
            let exp = load_experiment(&common)?;
            let out = exp.output_dir(common.out.as_deref())?;
            let outcome = cmd_preview_transforms(&exp, image.as_deref(), &out)?;
            print!("{}", outcome.table);
            println!(
                "wrote {} previews under {}",
                outcome.files.len(),
                out.join("preview").display()
            );
        }
        Command::Train(common) => {
            let exp = load_experiment(&common)?;
            let out = exp.output_dir(common.out.as_deref())?;
            let outcome = cmd_train(&exp, &out)?;
            print_warnings(&outcome.warnings);
            for run in &outcome.runs {
                println!(
                    "run {} (seed {}): {} pairs, final loss {:.4} -> {}",
                    run.run_index,
                    run.seed,
                    run.pair_count,
                    run.final_loss,
                    run.model_path.display()
                );
            }
        }
        Command::Score { common, model } => {
            let exp = load_experiment(&common)?;
            let out = exp.output_dir(common.out.as_deref())?;
            let outcome = cmd_score(&exp, &model, &out)?;
            print_failures(&outcome.failures);
            println!(
                "scored {} samples ({} failed) -> {}",
                outcome.scored,
                outcome.failures.len(),
                outcome.scores_path.display()
            );
        }
        Command::Evaluate { common, models } => {
            let exp = load_experiment(&common)?;
            let out = exp.output_dir(common.out.as_deref())?;
            let outcome = cmd_evaluate(&exp, &models, &out)?;
            print_warnings(&outcome.warnings);
            print_failures(&outcome.failures);
            print!("{}", outcome.report.render());
            println!("metrics -> {}", outcome.metrics_path.display());
        }
        Command::CompareTransforms { common, presets } => {
            let exp = load_experiment(&common)?;
            let out = exp.output_dir(common.out.as_deref())?;
            let outcome = cmd_compare_transforms(&exp, &presets, &out)?;
            for (name, report) in &outcome.rows {
                println!(
                    "{name}: AUC {:.2} +/- {:.2}",
                    report.auc.mean * 100.0,
                    report.auc.std * 100.0
                );
            }
            println!("table -> {}", outcome.table_path.display());
        }
        Command::SizeSweep { common, sizes } => {
            let exp = load_experiment(&common)?;
            let out = exp.output_dir(common.out.as_deref())?;
            let outcome = cmd_size_sweep(&exp, &sizes, &out)?;
            for (size, result) in &outcome.rows {
                match result {
                    Ok(report) => println!(
                        "{size}: AUC {:.2} +/- {:.2}",
                        report.auc.mean * 100.0,
                        report.auc.std * 100.0
                    ),
                    Err(msg) => println!("{size}: failed ({msg})"),
                }
            }
            println!("table -> {}", outcome.table_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
