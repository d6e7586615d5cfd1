use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fenn::harness::{run_experiment, Experiment, ExperimentSpec};

/// Run a FeNN simulator experiment and write its CSV files.
#[derive(Debug, Parser)]
#[command(name = "fenn-sim", version)]
struct Cli {
    /// rounding-hist, poisson, alif-compare, rsnn, instr-mix or report
    experiment: Experiment,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` file of experiment settings
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut spec = ExperimentSpec::new(cli.experiment);
    if let Some(path) = &cli.config {
        let applied = std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|text| spec.apply_config(&text).map_err(|e| e.to_string()));
        if let Err(e) = applied {
            eprintln!("fenn-sim: {}: {e}", path.display());
            return ExitCode::from(2);
        }
        spec.experiment = cli.experiment;
    }
    spec.seed = cli.seed.unwrap_or(spec.seed);
    spec.repeats = cli.repeats.unwrap_or(spec.repeats);
    spec.out = cli.out.unwrap_or(spec.out);

    match run_experiment(&spec) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fenn-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
