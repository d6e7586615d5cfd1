//! Experiment drivers that regenerate each figure's data as CSV.
//!
//! Every experiment is a pure function of its [`ExperimentSpec`]; CSV
//! files carry a header row with units in the column names.

mod config;
mod experiments;
mod output;

pub use config::{Experiment, ExperimentSpec, DEFAULT_SEED};
pub use experiments::{
    alif_errors, alif_stimulus, run_alif_compare, run_instr_mix, run_poisson, run_rounding_hist, run_rsnn,
    AlifCompareRow, AlifStimulus, ErrorSummary, KernelMix, PoissonRun, Regime, RoundingHist, RsnnRun, RsnnSetup,
    StimulusSpec,
};
pub use output::run_experiment;

use thiserror::Error;

use crate::kernels::KernelError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Check(String),
}

impl From<crate::machine::MachineError> for HarnessError {
    fn from(e: crate::machine::MachineError) -> Self {
        HarnessError::Kernel(e.into())
    }
}
