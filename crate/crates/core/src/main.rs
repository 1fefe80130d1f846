use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vaxstance::config::{ReportFormat, RunConfig};
use vaxstance::corpus::Timestamp;
use vaxstance::pipeline::{self, PipelineError};
use vaxstance::synth::SynthConfig;

/// Anti-vaccine stance prediction from account timelines.
#[derive(Parser)]
#[command(name = "vaxstance", version)]
struct Cli {
    /// Run configuration (TOML). Relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the split and training seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<ReportFormat>,
    /// -v info, -vv debug. RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Labeling dates, window samples and the train/validation/test split.
    BuildDataset,
    /// Trains the classifier on the training split.
    Train,
    /// Tunes the threshold on validation, stores it, evaluates on test.
    TuneEval,
    /// build-dataset, train and tune-eval in sequence.
    Run,
    /// Scores the most recent 90-day window of each account in a tweet file.
    Predict {
        /// JSONL tweet file.
        #[arg(long)]
        tweets: PathBuf,
        /// Model file; defaults to model.bin in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Reference time (RFC 3339 or YYYY-MM-DD); defaults to each account's latest tweet.
        #[arg(long)]
        as_of: Option<String>,
    },
    /// Word frequency, emotion and moral-foundation reports by class.
    Analyze,
    /// Compares models with and without the engineered account features.
    Ablation,
    /// Writes a planted-signal synthetic corpus and a matching run.toml to --output.
    Synth {
        #[arg(long, default_value_t = 1000)]
        accounts: usize,
        #[arg(long)]
        signal: Option<f64>,
        /// Signal decay constant in days.
        #[arg(long)]
        decay_days: Option<f64>,
        #[arg(long)]
        shuffle_labels: bool,
        #[arg(long)]
        tag_tweets: bool,
    },
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.split_seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    if let Some(dir) = &cli.output {
        if !matches!(cli.command, Command::Synth { .. }) {
            cfg.paths.output_dir = dir.clone();
        }
    }
    match cli.command {
        Command::BuildDataset => {
            let s = pipeline::cmd_build_dataset(&cfg)?;
            println!(
                "{} samples from {} accounts (split {}/{}/{}, {} rejected, {} without samples)",
                s.samples,
                s.accounts,
                s.split_sizes[0],
                s.split_sizes[1],
                s.split_sizes[2],
                s.rejected,
                s.without_samples
            );
        }
        Command::Train => {
            let s = pipeline::cmd_train(&cfg)?;
            println!(
                "best epoch {} of {}; model written to {}",
                s.best_epoch,
                s.epochs_run,
                s.model_path.display()
            );
        }
        Command::TuneEval => print_eval(&pipeline::cmd_tune_and_evaluate(&cfg)?),
        Command::Run => {
            pipeline::cmd_build_dataset(&cfg)?;
            pipeline::cmd_train(&cfg)?;
            print_eval(&pipeline::cmd_tune_and_evaluate(&cfg)?);
        }
        Command::Predict { tweets, model, as_of } => {
            let as_of = as_of
                .map(|s| {
                    Timestamp::parse(&s).ok_or_else(|| {
                        PipelineError::Config(vaxstance::config::ConfigError::Invalid(format!(
                            "bad --as-of time {s:?}"
                        )))
                    })
                })
                .transpose()?;
            for r in pipeline::cmd_predict(&cfg, model.as_deref(), &tweets, as_of)? {
                match (r.p_not_anti, r.p_anti, r.class_at_threshold) {
                    (Some(p0), Some(p1), Some(c)) => {
                        let extra = r
                            .class_at_half
                            .map_or(String::new(), |h| format!(" (class {h} at 0.5)"));
                        println!("{}\tp_not_anti={p0:.4}\tp_anti={p1:.4}\tclass={c}{extra}", r.account_id);
                    }
                    _ => println!("{}\tinsufficient data", r.account_id),
                }
            }
        }
        Command::Analyze => {
            let s = pipeline::cmd_analyze(&cfg)?;
            for f in s.files {
                println!("{}", f.display());
            }
        }
        Command::Ablation => {
            let s = pipeline::cmd_ablation(&cfg)?;
            print!("{}", s.report.to_text());
        }
        Command::Synth {
            accounts,
            signal,
            decay_days,
            shuffle_labels,
            tag_tweets,
        } => {
            let defaults = SynthConfig::default();
            let synth = SynthConfig {
                accounts,
                seed: cli.seed.unwrap_or(defaults.seed),
                signal: signal.unwrap_or(defaults.signal),
                decay_days,
                shuffle_labels,
                tag_tweets,
                ..defaults
            };
            let dir = cli.output.clone().unwrap_or_else(|| PathBuf::from("synth"));
            let path = pipeline::cmd_synth(&synth, &dir, &cfg)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn print_eval(s: &pipeline::EvalSummary) {
    println!(
        "threshold {:.4} (validation F1 {:.4}; {:.4} at 0.5)",
        s.threshold, s.validation_f1_tuned, s.validation_f1_at_half
    );
    print!("{}", vaxstance::eval::window_table_text(&s.test_windows));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
