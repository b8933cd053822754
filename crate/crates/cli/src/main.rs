//! `rabbi` - allocational-bias audit pipeline for model-driven ranking
//! and selection decisions.

mod commands;
mod config;
mod data_io;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::{Overrides, RunConfig};
use crate::error::Result;

#[derive(Parser)]
#[command(
    name = "rabbi",
    version,
    about = "Measures allocational bias in model-driven ranking and selection: \
             rank-based and baseline bias metrics, top-k selection simulation, \
             and predictive-validity evaluation."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Run configuration JSON file.
    #[arg(long, short)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured simulation round count.
    #[arg(long)]
    rounds: Option<usize>,
    /// Override the configured quota list (comma separated, e.g. 1,2,3).
    #[arg(long, value_delimiter = ',')]
    quotas: Option<Vec<usize>>,
    /// Worker threads for simulation and collection.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate prediction, pool, and candidate files; exit 1 on issues.
    Validate(CommonArgs),
    /// Generate synthetic model data (benchmark, adversarial, or spec).
    Synth(SynthArgs),
    /// Derive scalar score tables from predictions.
    Score(CommonArgs),
    /// Compute RABBI and baseline bias metrics per group pair.
    Audit(CommonArgs),
    /// Simulate top-k selection rounds and measure allocation gaps.
    Simulate(CommonArgs),
    /// Correlate bias metrics with allocation gaps; rank models.
    Evaluate(EvaluateArgs),
    /// Collect predictions from a chat-completion endpoint.
    Collect(CollectArgs),
    /// Run the full chain: synth -> validate -> audit -> simulate -> evaluate.
    Pipeline(CommonArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Generate the adversarial case regardless of the config's synth kind.
    #[arg(long)]
    adversarial: bool,
    /// Generate an n-model benchmark regardless of the config's synth kind.
    #[arg(long)]
    benchmark: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Bias report JSON (defaults to <out>/bias_report.json).
    #[arg(long)]
    bias: Option<PathBuf>,
    /// Gap report JSON (defaults to <out>/gaps.json).
    #[arg(long)]
    gaps: Option<PathBuf>,
}

#[derive(Args)]
struct CollectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Override the endpoint base URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Override the model identifier.
    #[arg(long)]
    model: Option<String>,
    /// Override the collection mode.
    #[arg(long, value_parser = ["point", "pair"])]
    mode: Option<String>,
    /// Override the template id (or template JSON path).
    #[arg(long)]
    template: Option<String>,
    /// Override the maximum parallel requests.
    #[arg(long)]
    parallel: Option<usize>,
    /// Override the response cache directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Override the tolerated transport-failure rate.
    #[arg(long)]
    fail_threshold: Option<f64>,
}

fn build_ctx(common: &CommonArgs) -> Result<Ctx> {
    let mut config = RunConfig::load(&common.config)?;
    let overrides = Overrides {
        seed: common.seed,
        rounds: common.rounds,
        quotas: common.quotas.clone(),
        output_dir: common.out.clone(),
        jobs: common.jobs,
    };
    overrides.apply(&mut config);
    config.validate()?;
    Ok(Ctx {
        config,
        config_path: common.config.clone(),
    })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate(args) => commands::cmd_validate(&build_ctx(&args)?),
        Command::Synth(args) => {
            let mut ctx = build_ctx(&args.common)?;
            if args.adversarial {
                ctx.config.synth = Some(config::SynthConfig::Adversarial);
            } else if let Some(models) = args.benchmark {
                ctx.config.synth = Some(config::SynthConfig::Benchmark {
                    models,
                    candidates_per_group: 60,
                });
            }
            commands::cmd_synth(&ctx)
        }
        Command::Score(args) => commands::cmd_score(&build_ctx(&args)?),
        Command::Audit(args) => commands::cmd_audit(&build_ctx(&args)?),
        Command::Simulate(args) => commands::cmd_simulate(&build_ctx(&args)?),
        Command::Evaluate(args) => {
            commands::cmd_evaluate(&build_ctx(&args.common)?, args.bias, args.gaps)
        }
        Command::Collect(args) => {
            let mut ctx = build_ctx(&args.common)?;
            if let Some(collect) = ctx.config.collect.as_mut() {
                if let Some(endpoint) = args.endpoint {
                    collect.endpoint.base_url = endpoint;
                }
                if let Some(model) = args.model {
                    collect.endpoint.model = model;
                }
                if let Some(mode) = args.mode {
                    collect.mode = match mode.as_str() {
                        "point" => config::CollectModeConfig::Point,
                        _ => config::CollectModeConfig::Pair,
                    };
                }
                if let Some(template) = args.template {
                    collect.template = template;
                }
                if let Some(parallel) = args.parallel {
                    collect.endpoint.max_parallel = parallel;
                }
                if let Some(cache_dir) = args.cache_dir {
                    collect.cache_dir = cache_dir;
                }
                if let Some(threshold) = args.fail_threshold {
                    collect.fail_threshold = threshold;
                }
            }
            commands::cmd_collect(&ctx)
        }
        Command::Pipeline(args) => commands::cmd_pipeline(&build_ctx(&args)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version print and exit 0; usage errors are
            // input errors under the exit-code contract.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return ExitCode::from(if is_help { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
