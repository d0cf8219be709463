use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use newsvol_cli::config::{Overrides, RunConfig};
use newsvol_cli::fixture::{write_fixture, FixtureSpec};
use newsvol_cli::pipeline::{run, Command as Stage};
use newsvol_core::features::Channel;

/// News-driven next-day volatility direction: ingest market and news data,
/// build features, evaluate the soft-voting ensemble against the lagged-RV
/// benchmark, test significance, and attribute predictions to words.
#[derive(Parser)]
#[command(name = "newsvol", version, about)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Count,
    Sentiment,
    Embedding,
    Har,
}

impl From<ChannelArg> for Channel {
    fn from(value: ChannelArg) -> Self {
        match value {
            ChannelArg::Count => Channel::Count,
            ChannelArg::Sentiment => Channel::Sentiment,
            ChannelArg::Embedding => Channel::Embedding,
            ChannelArg::Har => Channel::Har,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// Path to the TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the lag order for news channels.
    #[arg(long)]
    p: Option<usize>,
    /// Override the rolling training fraction.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Restrict the feature channels (repeatable).
    #[arg(long = "channel", value_enum)]
    channels: Vec<ChannelArg>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            p: self.p,
            train_fraction: self.train_fraction,
            channels: if self.channels.is_empty() {
                None
            } else {
                Some(self.channels.iter().map(|&c| c.into()).collect())
            },
        }
    }
}

#[derive(Subcommand)]
enum CliCommand {
    /// Parse bars and news; write realized variance, labels, lagged-RV
    /// features, and cleaned headlines.
    Ingest(RunArgs),
    /// Build per-channel feature frames from the ingest artifacts.
    Features(RunArgs),
    /// Rolling-window evaluation of every enabled channel.
    Evaluate(RunArgs),
    /// Pairwise McNemar tests over the prediction logs.
    Mcnemar(RunArgs),
    /// Word-level attribution of the embedding channel's predictions.
    Explain(RunArgs),
    /// Run every stage in order.
    All(RunArgs),
    /// Generate the synthetic demo corpus and a matching config.toml.
    Fixture {
        /// Directory to write the corpus into.
        #[arg(long)]
        dir: PathBuf,
        /// Number of synthetic trading days.
        #[arg(long, default_value_t = 600)]
        days: usize,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, stage) = match &cli.command {
        CliCommand::Ingest(a) => (a, Stage::Ingest),
        CliCommand::Features(a) => (a, Stage::Features),
        CliCommand::Evaluate(a) => (a, Stage::Evaluate),
        CliCommand::Mcnemar(a) => (a, Stage::Mcnemar),
        CliCommand::Explain(a) => (a, Stage::Explain),
        CliCommand::All(a) => (a, Stage::All),
        CliCommand::Fixture { dir, days, seed } => {
            let spec = FixtureSpec {
                trading_days: *days,
                seed: *seed,
                ..FixtureSpec::default()
            };
            return match write_fixture(&spec, dir) {
                Ok((_, paths)) => {
                    println!("fixture written; config at {}", paths.config.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            };
        }
    };

    let config = match RunConfig::load(&args.config, &args.overrides()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&config, stage) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
