use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use collapse_core::experiment::{emit_csv, format_float, load_config, run, write_plot_script, ExperimentResult};
use collapse_core::CollapseError;

#[derive(Parser)]
#[command(
    name = "collapse-lab",
    version,
    about = "Run collapse-model experiments from TOML configs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV.
    Run {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path. Defaults to the config's `output`, then to the
        /// config path with a `.csv` extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write `<out>.plot.py`, a matplotlib script for the CSV.
        #[arg(long)]
        emit_plot_script: bool,
        /// Print nothing on success.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        seed,
        out,
        emit_plot_script,
        quiet,
    } = cli.command;
    match execute(&config, seed, out, emit_plot_script, quiet) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("collapse-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    emit_plot_script: bool,
    quiet: bool,
) -> Result<(), CollapseError> {
    let mut config = load_config(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let out = out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| config_path.with_extension("csv"));
    let result = run(&config)?;
    emit_csv(&result, &out)?;
    let script = if emit_plot_script {
        Some(write_plot_script(&out)?)
    } else {
        None
    };
    if !quiet {
        report(&result, &out, script.as_deref());
    }
    Ok(())
}

fn report(result: &ExperimentResult, out: &Path, script: Option<&Path>) {
    println!(
        "{} (seed {}): {} rows -> {}",
        result.kind,
        result.seed,
        result.rows.len(),
        out.display()
    );
    for (name, value) in &result.summary {
        println!("  {name:<24} {}", format_float(*value));
    }
    if let Some(script) = script {
        println!("plot script: {}", script.display());
    }
}
