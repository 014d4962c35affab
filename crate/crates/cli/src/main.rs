use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infdecomp_cli::config::{LoadedConfig, Overrides, ProviderKind};
use infdecomp_cli::stages::{self, Context};

#[derive(Parser)]
#[command(name = "infdecomp", version, about = "Inferential decomposition pipeline")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "config.toml")]
    config: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use this provider for both generation and embedding.
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    /// Output directory, overriding `paths.output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cache directory, overriding `paths.cache_dir`.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Decompose the comment corpus.
    Decompose,
    /// Embed the comment, sentence and generation views.
    Embed,
    /// Baseline vs. augmented similarity benchmark.
    Sts,
    /// K-means over each view and K, with metrics and evaluation packets.
    Cluster,
    /// Fit the tweet topic model and select tweets per legislator.
    Topics,
    /// Co-voting regression.
    Covote,
    /// Every stage the config has a section for.
    Pipeline,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let overrides = Overrides {
        seed: cli.seed,
        provider: cli.provider,
        output_dir: cli.out.clone(),
        cache_dir: cli.cache_dir.clone(),
    };
    let cfg = match LoadedConfig::load(&cli.config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let run = || -> anyhow::Result<()> {
        let ctx = Context::new(cfg)?;
        let res = match cli.command {
            Command::Decompose => stages::decompose(&ctx),
            Command::Embed => stages::embed(&ctx),
            Command::Sts => stages::sts(&ctx),
            Command::Cluster => stages::cluster(&ctx),
            Command::Topics => stages::topics(&ctx),
            Command::Covote => stages::covote(&ctx),
            Command::Pipeline => stages::pipeline(&ctx),
        };
        ctx.write_stats()?;
        res
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
