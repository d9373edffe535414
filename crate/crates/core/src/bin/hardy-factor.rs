use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hardy_factor::reports::{run, Command, Format, Overrides, RunManifest};

#[derive(Parser)]
#[command(name = "hardy-factor", version, about = "Inner factors, wandering subspaces and completions on the polydisc")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Doubly-commuting and reducing tests for a generated submodule
    Analyze(Flags),
    /// Inner symbol of a doubly commuting submodule, with certificates
    ExtractInner(Flags),
    /// Completion of a left-invertible column to an invertible square symbol
    Complete(Flags),
    /// Sampled local rank of a matrix symbol
    Rank(Flags),
    /// Residuals of F Omega - I and Omega F - I for a supplied pair
    Verify(Flags),
    /// Built-in check suite
    Selftest(Flags),
}

#[derive(clap::Args)]
struct Flags {
    /// JSON input file
    #[arg(long)]
    input: Option<PathBuf>,
    /// Report destination; stdout when absent
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the window degree of the input
    #[arg(long)]
    degree: Option<u32>,
    /// Override the verdict tolerance
    #[arg(long)]
    tolerance: Option<f64>,
    /// Seed for rank sampling and selftest draws
    #[arg(long)]
    seed: Option<u64>,
    /// Torus sample points per axis
    #[arg(long = "torus-grid")]
    torus_grid: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Json,
    Text,
}

fn configure_threads() {
    let Ok(v) = std::env::var("HARDY_FACTOR_THREADS") else { return };
    let threads = match v.trim().parse::<usize>() {
        Ok(0) => 1,
        Ok(t) => t,
        Err(_) => {
            eprintln!("ignoring HARDY_FACTOR_THREADS={v}: not a count");
            return;
        }
    };
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    let (command, flags) = match cli.command {
        Cmd::Analyze(f) => (Command::Analyze, f),
        Cmd::ExtractInner(f) => (Command::ExtractInner, f),
        Cmd::Complete(f) => (Command::Complete, f),
        Cmd::Rank(f) => (Command::Rank, f),
        Cmd::Verify(f) => (Command::Verify, f),
        Cmd::Selftest(f) => (Command::Selftest, f),
    };
    let mut manifest = RunManifest::new(command);
    manifest.input_path = flags.input;
    manifest.output_path = flags.output;
    manifest.overrides = Overrides {
        degree: flags.degree,
        tolerance: flags.tolerance,
        seed: flags.seed,
        torus_grid: flags.torus_grid,
    };
    manifest.format = match flags.format {
        FormatArg::Json => Format::Json,
        FormatArg::Text => Format::Text,
    };
    match run(&manifest) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("hardy-factor: cannot write report: {e}");
            ExitCode::from(3)
        }
    }
}
