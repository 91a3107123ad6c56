use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use torus_quant::check::run_check;
use torus_quant::cli::{assemble, format_star_table, run};
use torus_quant::config::{parse_config, ExperimentConfig, ExperimentKind};
use torus_quant::run_experiment;

#[derive(Parser)]
#[command(name = "torus-quant", version, about = "Star products and Toeplitz quantization on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for reports and CSV files
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the seed of the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (TOML)
    #[arg(value_name = "CONFIG", required_unless_present = "config")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH", conflicts_with = "path")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report and CSV
    Run(ConfigArg),
    /// Print the truncated star-product table of f and g
    Star(ConfigArg),
    /// Write the Toeplitz matrix of f for each level of the sweep
    Assemble(ConfigArg),
    /// Run the built-in verification suite
    Check,
}

fn load(arg: &ConfigArg, seed: Option<u64>) -> Result<ExperimentConfig> {
    let path = arg.config.as_ref().or(arg.path.as_ref()).context("no config given")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Run(arg) => {
            let config = load(arg, cli.seed)?;
            let out = run(&config, &cli.out)?;
            if !cli.quiet {
                let r = &out.report.report;
                println!("{} [{}]: {} ({})", r.id, r.experiment.name(), if r.pass { "PASS" } else { "FAIL" }, r.outcome);
                for fit in &out.report.fits {
                    println!("  {} slope {:?} window [{}, {}] {}", fit.norm_kind, fit.slope, fit.window_low, fit.window_high, fit.outcome);
                }
                println!("  report {}", out.report_path.display());
                println!("  csv    {}", out.csv_path.display());
            }
            Ok(out.pass())
        }
        Command::Star(arg) => {
            let config = load(arg, cli.seed)?;
            if config.experiment != ExperimentKind::StarTable {
                bail!("`star` needs experiment = \"star_table\"");
            }
            let report = run_experiment(&config)?;
            print!("{}", format_star_table(&report.table));
            Ok(true)
        }
        Command::Assemble(arg) => {
            let config = load(arg, cli.seed)?;
            let paths = assemble(&config, &cli.out)?;
            if !cli.quiet {
                for p in paths {
                    println!("{}", p.display());
                }
            }
            Ok(true)
        }
        Command::Check => {
            let summary = run_check(&cli.out)?;
            if !cli.quiet {
                for c in &summary.criteria {
                    println!("[{}] {:>2} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.number, c.title, c.detail);
                }
            }
            Ok(summary.pass)
        }
    }
}
