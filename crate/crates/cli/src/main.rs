use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use aoisched::experiment::{
    describe, preset, render, run_experiment, summarize, write_summary, ExperimentConfig, PRESETS,
};

#[derive(Parser)]
#[command(name = "aoisched", version, about = "AoI-aware channel scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a named preset.
    Run {
        /// Path to a TOML config, or a preset name.
        config: String,
        /// Replace the configured seeds (comma-separated).
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
        /// Write results here instead of the configured directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Record channel-level regret only.
        #[arg(long)]
        bandit_only: bool,
    },
    /// Aggregate a finished run directory.
    Summarize { dir: PathBuf },
    /// Inspect the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset as a config file.
    Show { name: String },
}

fn load(source: &str) -> Result<(ExperimentConfig, PathBuf)> {
    let path = Path::new(source);
    if path.is_file() {
        let config = ExperimentConfig::load(path)
            .with_context(|| format!("loading {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok((config, base));
    }
    match preset(source) {
        Some(config) => Ok((config, PathBuf::from("."))),
        None => bail!(
            "`{source}` is neither a config file nor a preset (presets: {})",
            PRESETS.join(", ")
        ),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed_override,
            output,
            bandit_only,
        } => {
            let (mut config, base) = load(&config)?;
            if let Some(seeds) = seed_override {
                config.seeds = seeds;
            }
            if let Some(dir) = output {
                config.output = dir;
            }
            config.bandit_only |= bandit_only;
            config.validate()?;
            let started = std::time::Instant::now();
            let manifest = run_experiment(&config, &base)?;
            eprintln!(
                "{} runs written to {} in {:.1?}",
                manifest.runs.len(),
                config.output.display(),
                started.elapsed()
            );
            let rows = summarize(&config.output)?;
            write_summary(&config.output, &rows)?;
            print!("{}", render(&rows));
        }
        Command::Summarize { dir } => {
            let rows = summarize(&dir).with_context(|| format!("summarizing {}", dir.display()))?;
            write_summary(&dir, &rows)?;
            print!("{}", render(&rows));
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for name in PRESETS {
                    println!("{name:<16} {}", describe(name).unwrap_or_default());
                }
            }
            PresetAction::Show { name } => match preset(&name) {
                Some(config) => print!("{}", config.to_toml()?),
                None => bail!("unknown preset `{name}` (presets: {})", PRESETS.join(", ")),
            },
        },
    }
    Ok(())
}
