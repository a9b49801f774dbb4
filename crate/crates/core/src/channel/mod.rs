//! Baseband-equivalent model of the atomic receiver.
//!
//! A normalized video baseband amplitude-modulates the RF Rabi frequency
//! around the lock bias; the atoms map that envelope to probe transmission
//! through the static discriminator curve and respond with transit-limited
//! rise and fall times; the photodetector adds gain, noise and its own
//! bandwidth.

mod filter;
mod io;
mod receive;
mod square;

use thiserror::Error;

use crate::atomic::{
    AtomicEnsemble, AtomicError, BeamGeometry, CalibrationMode, DriveParameters, LadderScheme,
};

pub use filter::{asymmetric_filter, single_pole, AsymmetricFilter, MIN_SAMPLES_PER_TAU};
pub use io::{read_waveform, waveform_to_csv, write_waveform, WAVEFORM_MAGIC};
pub use receive::{
    atomic_receive, envelope_from_baseband, measure_channel_gain, normalized_detector_gain,
    three_db_bandwidth, DiscriminatorTable, ReceiveDiagnostics, Reception, LUT_POINTS,
};
pub use square::{measure_rise_fall, square_wave_response, RiseFall};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid waveform: {0}")]
    Waveform(String),
    #[error("sample out of range: {0}")]
    Range(String),
    #[error("filter under-resolved: {0}")]
    Resolution(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("measurement failed: {0}")]
    Measurement(String),
    #[error(transparent)]
    Atomic(#[from] AtomicError),
    #[error("waveform I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("waveform format: {0}")]
    Format(String),
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub start_time: f64,
}

impl Waveform {
    pub fn new(sample_rate: f64, samples: Vec<f64>, start_time: f64) -> Result<Self, ChannelError> {
        let w = Self {
            sample_rate,
            samples,
            start_time,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(ChannelError::Waveform(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if !self.start_time.is_finite() {
            return Err(ChannelError::Waveform("start time must be finite".into()));
        }
        if let Some(k) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(ChannelError::Waveform(format!("non-finite sample at index {k}")));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    /// Same timing, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            sample_rate: self.sample_rate,
            samples,
            start_time: self.start_time,
        }
    }

    /// Samples `[start, end)` with the start time shifted accordingly.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        Self {
            sample_rate: self.sample_rate,
            samples: self.samples[start..end].to_vec(),
            start_time: self.time(start),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectionMode {
    /// Signal beam mixed with a strong reference beam on one photodiode.
    #[default]
    Homodyne,
    /// Reference photocurrent subtracted; DC bias removed.
    Balanced,
}

impl std::str::FromStr for DetectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "homodyne" => Ok(Self::Homodyne),
            "balanced" => Ok(Self::Balanced),
            other => Err(format!("unknown detection mode '{other}' (homodyne|balanced)")),
        }
    }
}

impl std::fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Homodyne => "homodyne",
            Self::Balanced => "balanced",
        })
    }
}

/// Signal and reference beam powers for homodyne detection, W.
pub const HOMODYNE_SIGNAL_POWER: f64 = 30e-6;
pub const HOMODYNE_REFERENCE_POWER: f64 = 1.5e-3;

/// Detector bandwidth used for video, Hz.
pub const DEFAULT_DETECTOR_BANDWIDTH: f64 = 10e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub ladder: LadderScheme,
    pub geometry: BeamGeometry,
    pub ensemble: AtomicEnsemble,
    /// Lock-point drive; `rf_rabi` is the RF bias that a zero baseband maps to.
    pub drive: DriveParameters,
    pub calibration: CalibrationMode,
    pub detection_mode: DetectionMode,
    pub detector_gain: f64,
    pub detector_bandwidth: f64,
    /// Detector-referred noise, amplitude per sqrt(Hz).
    pub noise_amplitude_density: f64,
    pub modulation_depth: f64,
    pub rng_seed: u64,
    pub signal_power: f64,
    pub reference_power: f64,
}

impl ChannelConfig {
    pub fn new(geometry: BeamGeometry, drive: DriveParameters) -> Self {
        Self {
            ladder: LadderScheme::default(),
            geometry,
            ensemble: AtomicEnsemble::default(),
            drive,
            calibration: CalibrationMode::Table,
            detection_mode: DetectionMode::Homodyne,
            detector_gain: 1.0,
            detector_bandwidth: DEFAULT_DETECTOR_BANDWIDTH,
            noise_amplitude_density: 0.0,
            modulation_depth: 0.5,
            rng_seed: 0,
            signal_power: HOMODYNE_SIGNAL_POWER,
            reference_power: HOMODYNE_REFERENCE_POWER,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        self.ladder.validate()?;
        self.geometry.validate()?;
        self.ensemble.validate()?;
        self.drive.validate()?;
        if !(self.modulation_depth > 0.0 && self.modulation_depth <= 1.0) {
            return Err(ChannelError::Parameter(format!(
                "modulation depth must be in (0, 1], got {}",
                self.modulation_depth
            )));
        }
        if !(self.detector_bandwidth > 0.0 && self.detector_bandwidth.is_finite()) {
            return Err(ChannelError::Parameter(format!(
                "detector bandwidth must be positive, got {}",
                self.detector_bandwidth
            )));
        }
        if !(self.noise_amplitude_density >= 0.0 && self.noise_amplitude_density.is_finite()) {
            return Err(ChannelError::Parameter(
                "noise density must be non-negative".into(),
            ));
        }
        if !self.detector_gain.is_finite() {
            return Err(ChannelError::Parameter("detector gain must be finite".into()));
        }
        if !(self.signal_power > 0.0 && self.reference_power > 0.0) {
            return Err(ChannelError::Parameter("beam powers must be positive".into()));
        }
        Ok(())
    }

    /// Optical pre-amplification factor of the detection scheme.
    pub fn local_oscillator_factor(&self) -> f64 {
        match self.detection_mode {
            DetectionMode::Homodyne => (self.reference_power / self.signal_power).sqrt(),
            DetectionMode::Balanced => 1.0,
        }
    }

    /// RMS of the additive detector noise.
    pub fn noise_rms(&self) -> f64 {
        self.noise_amplitude_density * self.detector_bandwidth.sqrt()
    }
}
