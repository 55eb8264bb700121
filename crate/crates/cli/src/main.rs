use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

mod config;
mod run;

/// Randomized benchmarking experiments from a TOML config.
#[derive(Parser, Debug)]
#[command(name = "rblab", version)]
struct Cli {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check the config and exit without computing anything.
    #[arg(long)]
    validate_only: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main(cli: &Cli) -> Result<ExitCode> {
    let text = fs::read_to_string(&cli.config).with_context(|| format!("reading {}", cli.config.display()))?;
    let mut cfg = match config::parse_config(&text) {
        Ok(c) => c,
        Err(violations) => {
            eprintln!("{}: {} violation(s)", cli.config.display(), violations.len());
            for v in &violations {
                eprintln!("  {v}");
            }
            return Ok(ExitCode::from(2));
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.display().to_string();
    }
    if cli.validate_only {
        println!("{}: ok", cli.config.display());
        return Ok(ExitCode::SUCCESS);
    }
    let out = Path::new(&cfg.output);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for path in run::run(&cfg, out).with_context(|| format!("running {}", cfg.command))? {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
