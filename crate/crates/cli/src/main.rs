use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tempyr::par::{self, Execution};
use tempyr::pipeline::{self, Config, StageSummary};
use tempyr::Error;

/// Temporal pyramid action-recognition pipeline.
#[derive(Debug, Parser)]
#[command(name = "tempyr", version)]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the synthetic dataset and its manifest.
    Synth,
    /// Extract feature files (needs fitted models).
    Extract,
    /// Fit PCA and the codebook from a raw bootstrap extraction.
    Fit,
    /// Encode feature files.
    Encode,
    /// Train the final one-vs-all model.
    Train,
    /// Cross-validate and write the report.
    Eval,
    /// Per-class and mean duration variation of the manifest.
    Stats,
    /// Run fit, extract, encode and eval for each sweep value.
    Sweep,
}

enum Failure {
    Data(String),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn check(stage: &str, s: &StageSummary) -> Result<(), Failure> {
    log::info!("{stage}: {} clips written", s.written);
    if s.ok() {
        Ok(())
    } else {
        Err(Failure::Data(format!("{stage}: {} clips failed", s.failures.len())))
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    par::with_workers(cfg.workers, || -> Result<(), Failure> {
        match cli.command {
            Command::Synth => {
                let m = pipeline::run_synth(&cfg)?;
                println!("wrote {} clips to {}", m.entries.len(), cfg.out.display());
            }
            Command::Fit => {
                let s = pipeline::run_fit(&cfg, exec)?;
                println!("wrote {}", pipeline::Layout::new(&cfg.out).codebook().display());
                check("fit", &s)?;
            }
            Command::Extract => {
                let s = pipeline::run_extract(&cfg, exec)?;
                println!("processed frames: {}", s.processed_frames);
                check("extract", &s.stage)?;
            }
            Command::Encode => check("encode", &pipeline::run_encode(&cfg, exec)?)?,
            Command::Train => {
                let m = pipeline::run_train(&cfg, exec)?;
                println!("trained {} classes, dimension {}", m.classes.len(), m.dim);
            }
            Command::Eval => {
                let r = pipeline::run_eval(&cfg, exec)?;
                print!("{}", r.to_text());
            }
            Command::Stats => {
                let (mean, per_class) = pipeline::run_stats(&cfg)?;
                for (l, v) in per_class {
                    println!("{l}\t{v:.4}");
                }
                println!("mtsvf\t{mean:.4}");
            }
            Command::Sweep => {
                for (v, r) in pipeline::run_sweep(&cfg, exec)? {
                    println!(
                        "{}{v}\t{}={:.4}",
                        cfg.sweep.parameter.as_str(),
                        r.metric.as_str(),
                        r.headline()
                    );
                }
            }
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(m)) => {
            log::error!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            log::error!("{m}");
            ExitCode::from(2)
        }
    }
}
