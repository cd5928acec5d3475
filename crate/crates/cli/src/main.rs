use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decodi_cli::commands::{DEBIASED_RECORDS, ORIGINAL_RECORDS};
use decodi_cli::{cmd_evaluate, cmd_generate, cmd_sweep, exit_code, worlds_listing, ExperimentConfig};
use decodi_core::Result;

#[derive(Parser)]
#[command(name = "decodi", version, about = "Guided-diffusion debiasing lab over analytic concept worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Experiment config (TOML). Defaults apply to every missing field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `jobs` in the config. Outputs do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// One seed per line; overrides `seed_file` / `seed_count`.
    #[arg(long)]
    seed_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the original and debiased arms.
    Generate(Common),
    /// Annotate both arms and write ratio tables, comparisons and fairness.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Original-arm record file (default: <out>/original.jsonl).
        #[arg(long)]
        original: Option<PathBuf>,
        /// Debiased-arm record file (default: <out>/debiased.jsonl).
        #[arg(long)]
        debiased: Option<PathBuf>,
    },
    /// Run the hyperparameter grid and write sweep.csv.
    Sweep(Common),
    /// Print the effective configuration with all defaults filled in.
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List builtin worlds and their biased weights.
    Worlds,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    if let Some(jobs) = common.jobs {
        config.jobs = jobs;
    }
    if let Some(seeds) = &common.seed_file {
        config.seed_file = Some(seeds.clone());
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(common) => {
            let resolved = load(&common)?.resolve()?;
            for path in cmd_generate(&resolved, &resolved.config.out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Evaluate { common, original, debiased } => {
            let resolved = load(&common)?.resolve()?;
            let out = resolved.config.out.clone();
            let original = original.unwrap_or_else(|| out.join(ORIGINAL_RECORDS));
            let debiased = debiased.unwrap_or_else(|| out.join(DEBIASED_RECORDS));
            let report = cmd_evaluate(&resolved, &original, &debiased, &out)?;
            print!("{}", decodi_core::evaluation::summary_text(&report));
        }
        Command::Sweep(common) => {
            let resolved = load(&common)?.resolve()?;
            let rows = cmd_sweep(&resolved, &resolved.config.out)?;
            println!("{:>4} {:>8} {:>10} {:>14} {:>8}", "row", "s_b", "fairness", "quality", "biased%");
            for (i, r) in rows.iter().enumerate() {
                let sb = r.point.map(|p| p.bias_scale.to_string()).unwrap_or_else(|| "orig".into());
                println!("{:>4} {:>8} {:>10.4} {:>14.3} {:>8.2}", i + 1, sb, r.fairness, r.quality, r.biased_percentage);
            }
            println!("wrote {}", resolved.config.out.join("sweep.csv").display());
        }
        Command::PrintConfig { config } => {
            let config = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            print!("{}", config.to_toml_string());
        }
        Command::Worlds => print!("{}", worlds_listing()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
