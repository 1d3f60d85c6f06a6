use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use regretcast::evaluation::Method;
use regretcast::forecast::Mode;
use regretcast::pipeline::{self, PipelineError, RunConfig};

/// Bid forecasting for repeated sponsored-search auctions: simulate a
/// market, prepare a dataset, run the forecasting experiment, write reports.
#[derive(Debug, Parser)]
#[command(name = "regretcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a market; writes raw_log.csv and ground_truth.json.
    Simulate,
    /// Aggregate, filter and split a raw log; writes manifest.json.
    Prepare,
    /// Forecast every task of the manifest and write all reports.
    Run,
    /// Rebuild summaries and figure tables from an earlier run's records.
    Report,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of every randomised stage (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Working directory for inputs and outputs; must exist.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Comma-separated methods, e.g. OGD,FTRL,AR2Econ, or `all`.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<MethodArg>>,
    /// Comma-separated modes: series, stepahead.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_mode)]
    modes: Option<Vec<Mode>>,
    /// Build and forecast the day/night shift tasks.
    #[arg(long, global = true)]
    shift: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone)]
enum MethodArg {
    All,
    One(Method),
}

fn parse_method(s: &str) -> Result<MethodArg, String> {
    if s.eq_ignore_ascii_case("all") {
        Ok(MethodArg::All)
    } else {
        s.parse().map(MethodArg::One)
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

impl Common {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        if let Some(methods) = &self.methods {
            cfg.run.methods = if methods.iter().any(|m| matches!(m, MethodArg::All)) {
                Method::all()
            } else {
                methods
                    .iter()
                    .filter_map(|m| match m {
                        MethodArg::One(m) => Some(*m),
                        MethodArg::All => None,
                    })
                    .collect()
            };
        }
        if let Some(modes) = &self.modes {
            cfg.run.modes = modes.clone();
        }
        if self.shift {
            cfg.prepare.shift = true;
        }
        if let Some(jobs) = self.jobs {
            cfg.run.jobs = jobs;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = cli.common.config()?;
    let out = &cli.common.out;
    match cli.command {
        Command::Simulate => pipeline::cmd_simulate(&cfg, out),
        Command::Prepare => pipeline::cmd_prepare(&cfg, out).map(|_| ()),
        Command::Run => {
            let report = pipeline::cmd_run(&cfg, out)?;
            log::info!(
                "{} scores, {} failures written to {}",
                report.scores.len(),
                report.failures.len(),
                out.display()
            );
            Ok(())
        }
        Command::Report => pipeline::cmd_report(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
