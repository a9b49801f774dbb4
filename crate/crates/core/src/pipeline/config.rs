use std::fmt::Write as _;
use std::path::PathBuf;

use super::PipelineError;
use crate::atomic::{angular_mhz, AtomicEnsemble, CalibrationMode, DEFAULT_MEAN_VELOCITY};
use crate::channel::{DetectionMode, DEFAULT_DETECTOR_BANDWIDTH};
use crate::ntsc::LineTiming;

/// Detector-referred noise density used when none is configured, in units
/// of the normalized output swing per sqrt(Hz).
pub const DEFAULT_NOISE_DENSITY: f64 = 3.3e-6;

/// Upper end of the automatic RF bias search, MHz.
const BIAS_SEARCH_MHZ: f64 = 30.0;

/// Either a fixed value or one derived from the physics at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Auto,
    Fixed(f64),
}

impl Setting {
    fn parse(key: &str, v: &str) -> Result<Self, PipelineError> {
        if v == "auto" {
            Ok(Self::Auto)
        } else {
            parse_num(key, v).map(Self::Fixed)
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Every knob of an experiment. Serialized as `key=value` lines; each key
/// is also a command-line flag with underscores turned into dashes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub fwhm_um: Vec<f64>,
    /// `None` matches the coupling beam to the probe.
    pub coupling_fwhm_um: Option<f64>,
    pub mean_velocity: f64,
    pub density_scale: f64,
    pub probe_rabi_mhz: f64,
    pub coupling_rabi_mhz: f64,
    /// RF Rabi frequency for a black-level (zero) baseband, MHz. `auto`
    /// centers the modulation on the steepest discriminator slope.
    pub rf_bias_mhz: Setting,
    pub modulation_depth: f64,
    pub detection: DetectionMode,
    /// `auto` scales the detector so a full-scale baseband step gives a unit
    /// output swing.
    pub detector_gain: Setting,
    pub detector_bandwidth_hz: f64,
    pub noise_density: f64,
    pub mode: CalibrationMode,
    pub sample_rate_hz: f64,
    pub subcarrier_hz: f64,
    pub field_rate_hz: f64,
    /// Empty selects the built-in color bars.
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub dump_waveforms: bool,
    /// Frame row whose sent and received line is dumped.
    pub dump_row: usize,
    /// Parallel sweep entries; 0 uses every core.
    pub jobs: usize,
    pub eit_probe_rabi_mhz: Vec<f64>,
    pub eit_scan_mhz: f64,
    pub eit_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let timing = LineTiming::default();
        Self {
            fwhm_um: vec![85.0, 200.0, 400.0, 800.0],
            coupling_fwhm_um: None,
            mean_velocity: DEFAULT_MEAN_VELOCITY,
            density_scale: 1.0,
            probe_rabi_mhz: 2.0,
            coupling_rabi_mhz: 7.0,
            rf_bias_mhz: Setting::Auto,
            modulation_depth: 0.5,
            detection: DetectionMode::Homodyne,
            detector_gain: Setting::Auto,
            detector_bandwidth_hz: DEFAULT_DETECTOR_BANDWIDTH,
            noise_density: DEFAULT_NOISE_DENSITY,
            mode: CalibrationMode::Table,
            sample_rate_hz: timing.sample_rate,
            subcarrier_hz: timing.subcarrier_frequency,
            field_rate_hz: timing.field_rate,
            input: None,
            out_dir: PathBuf::from("out"),
            seed: None,
            dump_waveforms: false,
            dump_row: 240,
            jobs: 0,
            eit_probe_rabi_mhz: vec![1.0, 1.5, 2.0, 2.5, 3.0],
            eit_scan_mhz: 40.0,
            eit_points: 801,
        }
    }
}

pub const KEYS: &[&str] = &[
    "fwhm_um",
    "coupling_fwhm_um",
    "mean_velocity",
    "density_scale",
    "probe_rabi_mhz",
    "coupling_rabi_mhz",
    "rf_bias_mhz",
    "modulation_depth",
    "detection",
    "detector_gain",
    "detector_bandwidth_hz",
    "noise_density",
    "mode",
    "sample_rate_hz",
    "subcarrier_hz",
    "field_rate_hz",
    "input",
    "out_dir",
    "seed",
    "dump_waveforms",
    "dump_row",
    "jobs",
    "eit_probe_rabi_mhz",
    "eit_scan_mhz",
    "eit_points",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, PipelineError> {
    v.parse()
        .map_err(|_| PipelineError::Config(format!("bad value '{v}' for {key}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, PipelineError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are skipped.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut config = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected key=value", n + 1)))?;
            config.set(k.trim(), v.trim())?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), PipelineError> {
        match key {
            "fwhm_um" => self.fwhm_um = parse_list(key, v)?,
            "coupling_fwhm_um" => {
                self.coupling_fwhm_um = match v {
                    "" | "matched" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "mean_velocity" => self.mean_velocity = parse_num(key, v)?,
            "density_scale" => self.density_scale = parse_num(key, v)?,
            "probe_rabi_mhz" => self.probe_rabi_mhz = parse_num(key, v)?,
            "coupling_rabi_mhz" => self.coupling_rabi_mhz = parse_num(key, v)?,
            "rf_bias_mhz" => self.rf_bias_mhz = Setting::parse(key, v)?,
            "modulation_depth" => self.modulation_depth = parse_num(key, v)?,
            "detection" => self.detection = v.parse().map_err(PipelineError::Config)?,
            "detector_gain" => self.detector_gain = Setting::parse(key, v)?,
            "detector_bandwidth_hz" => self.detector_bandwidth_hz = parse_num(key, v)?,
            "noise_density" => self.noise_density = parse_num(key, v)?,
            "mode" => self.mode = v.parse().map_err(PipelineError::Config)?,
            "sample_rate_hz" => self.sample_rate_hz = parse_num(key, v)?,
            "subcarrier_hz" => self.subcarrier_hz = parse_num(key, v)?,
            "field_rate_hz" => self.field_rate_hz = parse_num(key, v)?,
            "input" => self.input = (!v.is_empty()).then(|| PathBuf::from(v)),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "seed" => {
                self.seed = match v {
                    "" | "random" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "dump_waveforms" => self.dump_waveforms = parse_num(key, v)?,
            "dump_row" => self.dump_row = parse_num(key, v)?,
            "jobs" => self.jobs = parse_num(key, v)?,
            "eit_probe_rabi_mhz" => self.eit_probe_rabi_mhz = parse_list(key, v)?,
            "eit_scan_mhz" => self.eit_scan_mhz = parse_num(key, v)?,
            "eit_points" => self.eit_points = parse_num(key, v)?,
            other => return Err(PipelineError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Inverse of [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "matched".to_string(), |v| v.to_string());
        let _ = write!(
            s,
            "fwhm_um={}\ncoupling_fwhm_um={}\nmean_velocity={}\ndensity_scale={}\nprobe_rabi_mhz={}\n\
             coupling_rabi_mhz={}\nrf_bias_mhz={}\nmodulation_depth={}\ndetection={}\ndetector_gain={}\n\
             detector_bandwidth_hz={}\nnoise_density={}\nmode={}\nsample_rate_hz={}\nsubcarrier_hz={}\n\
             field_rate_hz={}\ninput={}\nout_dir={}\nseed={}\ndump_waveforms={}\ndump_row={}\njobs={}\n\
             eit_probe_rabi_mhz={}\neit_scan_mhz={}\neit_points={}\n",
            join(&self.fwhm_um),
            opt(self.coupling_fwhm_um),
            self.mean_velocity,
            self.density_scale,
            self.probe_rabi_mhz,
            self.coupling_rabi_mhz,
            self.rf_bias_mhz,
            self.modulation_depth,
            self.detection,
            self.detector_gain,
            self.detector_bandwidth_hz,
            self.noise_density,
            self.mode,
            self.sample_rate_hz,
            self.subcarrier_hz,
            self.field_rate_hz,
            self.input
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            self.out_dir.display(),
            self.seed.map_or_else(|| "random".to_string(), |v| v.to_string()),
            self.dump_waveforms,
            self.dump_row,
            self.jobs,
            join(&self.eit_probe_rabi_mhz),
            self.eit_scan_mhz,
            self.eit_points,
        );
        s
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.fwhm_um.is_empty() {
            return bad("fwhm_um list is empty".into());
        }
        if let Some(v) = self.fwhm_um.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return bad(format!("beam FWHM must be positive, got {v}"));
        }
        if let Some(c) = self.coupling_fwhm_um {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("coupling FWHM must be positive, got {c}"));
            }
        }
        if self.out_dir.as_os_str().is_empty() {
            return bad("out_dir is empty".into());
        }
        if self.input.as_ref().is_some_and(|p| p.as_os_str().is_empty()) {
            return bad("input path is empty".into());
        }
        for (name, v) in [
            ("mean_velocity", self.mean_velocity),
            ("density_scale", self.density_scale),
            ("probe_rabi_mhz", self.probe_rabi_mhz),
            ("coupling_rabi_mhz", self.coupling_rabi_mhz),
            ("detector_bandwidth_hz", self.detector_bandwidth_hz),
            ("eit_scan_mhz", self.eit_scan_mhz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.modulation_depth > 0.0 && self.modulation_depth <= 1.0) {
            return bad(format!(
                "modulation_depth must be in (0, 1], got {}",
                self.modulation_depth
            ));
        }
        if !(self.noise_density >= 0.0 && self.noise_density.is_finite()) {
            return bad(format!(
                "noise_density must be non-negative, got {}",
                self.noise_density
            ));
        }
        if let Setting::Fixed(b) = self.rf_bias_mhz {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("rf_bias_mhz must be positive, got {b}"));
            }
        }
        if let Setting::Fixed(g) = self.detector_gain {
            if !(g != 0.0 && g.is_finite()) {
                return bad(format!("detector_gain must be finite and non-zero, got {g}"));
            }
        }
        if self.dump_row >= crate::ntsc::HEIGHT {
            return bad(format!(
                "dump_row must be below {}, got {}",
                crate::ntsc::HEIGHT,
                self.dump_row
            ));
        }
        if self.eit_probe_rabi_mhz.iter().any(|v| !(*v > 0.0)) {
            return bad("eit_probe_rabi_mhz values must be positive".into());
        }
        self.timing()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn timing(&self) -> LineTiming {
        LineTiming {
            sample_rate: self.sample_rate_hz,
            subcarrier_frequency: self.subcarrier_hz,
            field_rate: self.field_rate_hz,
            ..LineTiming::default()
        }
    }

    pub fn ensemble(&self) -> AtomicEnsemble {
        AtomicEnsemble {
            mean_velocity: self.mean_velocity,
            density_scale: self.density_scale,
        }
    }

    pub(crate) fn bias_search_limit(&self) -> f64 {
        angular_mhz(BIAS_SEARCH_MHZ)
    }
}
