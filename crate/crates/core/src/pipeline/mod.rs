//! Experiment runner: configuration, the encode -> channel -> decode chain
//! with file outputs, beam-size sweeps and the EIT study tables.

mod config;
mod eit;
mod files;
mod simulate;

use thiserror::Error;

use crate::atomic::AtomicError;
use crate::channel::ChannelError;
use crate::ntsc::NtscError;

pub use config::{ExperimentConfig, Setting, DEFAULT_NOISE_DENSITY, KEYS};
pub use eit::{run_eit_study, EitStudy, TrendRow};
pub use files::write_atomic;
pub use simulate::{
    channel_config, load_input, run_simulation, run_sweep, simulate_frame, RunSummary, Simulation, SweepRow,
    SWEEP_HEADER,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("sync: {0}")]
    Sync(String),
    #[error(transparent)]
    Atomic(#[from] AtomicError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

impl From<NtscError> for PipelineError {
    fn from(e: NtscError) -> Self {
        match e {
            NtscError::Sync(m) => Self::Sync(m),
            NtscError::Io(e) => Self::Io(e),
            NtscError::Channel(e) => Self::Channel(e),
            NtscError::Format(m) | NtscError::Metadata(m) => Self::Input(m),
            NtscError::Timing(m) => Self::Config(m),
        }
    }
}

impl PipelineError {
    /// Process exit status: 1 usage or configuration, 2 I/O, 3 sync or
    /// decode failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Atomic(_) => 1,
            Self::Channel(ChannelError::Io(_) | ChannelError::Format(_)) => 2,
            Self::Channel(_) => 1,
            Self::Input(_) | Self::Io(_) => 2,
            Self::Sync(_) => 3,
        }
    }
}
