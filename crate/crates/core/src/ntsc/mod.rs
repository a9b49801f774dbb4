//! NTSC 480i composite video: RGB frames to a sampled composite waveform
//! and back, with per-line burst-lock diagnostics.
//!
//! Time in the composite is absolute (`sample / sample_rate` from the
//! waveform start) and the subcarrier free-runs across lines and fields.
//! At the default sample rate of four samples per subcarrier cycle one
//! pixel is exactly one sample.

mod color;
mod decode;
mod dsp;
mod encode;
mod io;
mod sync;

use thiserror::Error;

use crate::channel::{ChannelError, Waveform};

pub use color::{color_bars, hue_degrees, rgb_to_yiq, yiq_to_rgb, Yiq, MAX_SATURATION};
pub use decode::{decode_frame, decode_line, BurstEstimate, DecodeReport, DecodedLine};
pub use dsp::{fir_filter, lowpass_kernel};
pub use encode::{encode_frame, encode_line, row_start, split_fields};
pub use io::{
    parse_report, read_metadata, read_ppm, report_to_string, write_metadata, write_ppm, PPM_HEADER,
};
pub use sync::{detect_sync, estimate_levels, FieldSync, LineSync, SyncMap};

pub const WIDTH: usize = 720;
pub const HEIGHT: usize = 480;
pub const FIELD_LINES: usize = HEIGHT / 2;

#[derive(Debug, Error)]
pub enum NtscError {
    #[error("format: {0}")]
    Format(String),
    #[error("sync: {0}")]
    Sync(String),
    #[error("invalid timing: {0}")]
    Timing(String),
    #[error("metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// 720x480 frame, 8 bits per channel, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pixels: Vec<[u8; 3]>,
}

impl RgbFrame {
    pub fn new(pixels: Vec<[u8; 3]>) -> Result<Self, NtscError> {
        if pixels.len() != WIDTH * HEIGHT {
            return Err(NtscError::Format(format!(
                "frame needs {} pixels, got {}",
                WIDTH * HEIGHT,
                pixels.len()
            )));
        }
        Ok(Self { pixels })
    }

    pub fn filled(rgb: [u8; 3]) -> Self {
        Self {
            pixels: vec![rgb; WIDTH * HEIGHT],
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(WIDTH * HEIGHT);
        for row in 0..HEIGHT {
            for col in 0..WIDTH {
                pixels.push(f(col, row));
            }
        }
        Self { pixels }
    }

    pub fn get(&self, col: usize, row: usize) -> [u8; 3] {
        self.pixels[row * WIDTH + col]
    }

    pub fn set(&mut self, col: usize, row: usize, rgb: [u8; 3]) {
        self.pixels[row * WIDTH + col] = rgb;
    }

    pub fn row(&self, row: usize) -> &[[u8; 3]] {
        &self.pixels[row * WIDTH..(row + 1) * WIDTH]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [[u8; 3]] {
        &mut self.pixels[row * WIDTH..(row + 1) * WIDTH]
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// First field of a frame; frame rows 0, 2, 4, ...
    Odd,
    /// Second field; frame rows 1, 3, 5, ...
    Even,
}

impl Parity {
    pub fn first_row(self) -> usize {
        match self {
            Parity::Odd => 0,
            Parity::Even => 1,
        }
    }

    pub fn index(self) -> usize {
        self.first_row()
    }

    pub fn other(self) -> Self {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }
}

/// One interlaced half-frame in YIQ.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub parity: Parity,
    pub lines: Vec<Vec<Yiq>>,
}

impl Field {
    pub fn validate(&self) -> Result<(), NtscError> {
        if self.lines.len() != FIELD_LINES {
            return Err(NtscError::Format(format!(
                "field needs {FIELD_LINES} lines, got {}",
                self.lines.len()
            )));
        }
        if let Some(k) = self.lines.iter().position(|l| l.len() != WIDTH) {
            return Err(NtscError::Format(format!("field line {k} is not {WIDTH} pixels")));
        }
        Ok(())
    }
}

pub const SUBCARRIER_HZ: f64 = 3.579545e6;

/// Horizontal and vertical timing. Durations in seconds, rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineTiming {
    pub line_period: f64,
    pub hsync_width: f64,
    pub breezeway: f64,
    pub burst_cycles: u32,
    /// Blank interval between burst end and the active window.
    pub back_porch: f64,
    pub active_duration: f64,
    pub subcarrier_frequency: f64,
    pub sample_rate: f64,
    pub field_rate: f64,
    /// Length of the vertical sync pulse in line periods.
    pub vsync_lines: u32,
}

impl Default for LineTiming {
    fn default() -> Self {
        Self {
            line_period: 63.556e-6,
            hsync_width: 4.7e-6,
            breezeway: 0.6e-6,
            burst_cycles: 9,
            back_porch: 1.6e-6,
            active_duration: 52.6e-6,
            subcarrier_frequency: SUBCARRIER_HZ,
            sample_rate: 4.0 * SUBCARRIER_HZ,
            field_rate: 60.0,
            vsync_lines: 3,
        }
    }
}

impl LineTiming {
    pub fn validate(&self) -> Result<(), NtscError> {
        let durations = [
            ("line_period", self.line_period),
            ("hsync_width", self.hsync_width),
            ("breezeway", self.breezeway),
            ("back_porch", self.back_porch),
            ("active_duration", self.active_duration),
            ("subcarrier_frequency", self.subcarrier_frequency),
            ("sample_rate", self.sample_rate),
            ("field_rate", self.field_rate),
        ];
        for (name, v) in durations {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NtscError::Timing(format!("{name} must be positive, got {v}")));
            }
        }
        if self.burst_cycles == 0 || self.vsync_lines == 0 {
            return Err(NtscError::Timing(
                "burst and vsync lengths must be non-zero".into(),
            ));
        }
        if self.sample_rate < 4.0 * self.subcarrier_frequency * (1.0 - 1e-12) {
            return Err(NtscError::Timing(format!(
                "sample rate {} below four samples per subcarrier cycle",
                self.sample_rate
            )));
        }
        if self.porch_total() + self.active_duration > self.line_period {
            return Err(NtscError::Timing("line intervals exceed the line period".into()));
        }
        if (WIDTH as f64) * self.pixel_period() > self.active_duration {
            return Err(NtscError::Timing(
                "720 pixels do not fit the active window".into(),
            ));
        }
        let field_samples = self.sample_rate / self.field_rate;
        let needed = (FIELD_LINES as f64 + self.vsync_lines as f64 + 1.0) * self.line_samples() as f64;
        if field_samples < needed {
            return Err(NtscError::Timing("field period too short for its lines".into()));
        }
        Ok(())
    }

    fn porch_total(&self) -> f64 {
        self.hsync_width + self.breezeway + self.burst_duration() + self.back_porch
    }

    pub fn burst_duration(&self) -> f64 {
        self.burst_cycles as f64 / self.subcarrier_frequency
    }

    /// One quarter of a subcarrier cycle.
    pub fn pixel_period(&self) -> f64 {
        0.25 / self.subcarrier_frequency
    }

    fn samples(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate).round() as usize
    }

    pub fn line_samples(&self) -> usize {
        self.samples(self.line_period)
    }

    pub fn hsync_samples(&self) -> usize {
        self.samples(self.hsync_width)
    }

    pub fn burst_start(&self) -> usize {
        self.samples(self.hsync_width + self.breezeway)
    }

    pub fn burst_end(&self) -> usize {
        self.samples(self.hsync_width + self.breezeway + self.burst_duration())
    }

    pub fn active_start(&self) -> usize {
        self.samples(self.porch_total())
    }

    pub fn active_end(&self) -> usize {
        self.samples(self.porch_total() + self.active_duration)
    }

    /// Offset of pixel 0 from the line start, in (fractional) samples; the
    /// 720 pixels are centred in the active window.
    pub fn first_pixel(&self) -> f64 {
        let spare = self.active_duration - WIDTH as f64 * self.pixel_period();
        ((self.porch_total() + 0.5 * spare) * self.sample_rate).round()
    }

    /// Pixel spacing in samples.
    pub fn pixel_step(&self) -> f64 {
        self.pixel_period() * self.sample_rate
    }

    /// First sample of field `k` (0 = odd) counted from the waveform start.
    pub fn field_start(&self, k: usize) -> usize {
        (k as f64 * self.sample_rate / self.field_rate).round() as usize
    }

    pub fn field_samples(&self, k: usize) -> usize {
        self.field_start(k + 1) - self.field_start(k)
    }

    /// Offset of the first active line from the field start: everything in
    /// front of the 240 active lines is the field sync interval.
    pub fn active_line_offset(&self, k: usize) -> usize {
        self.field_samples(k) - FIELD_LINES * self.line_samples()
    }

    pub fn vsync_samples(&self) -> usize {
        self.vsync_lines as usize * self.line_samples()
    }

    pub fn frame_samples(&self) -> usize {
        self.field_start(2)
    }
}

/// Composite amplitudes in normalized volts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Levels {
    pub sync: f64,
    pub blank: f64,
    pub black: f64,
    pub white: f64,
    /// Peak amplitude of the colour burst.
    pub burst_amplitude: f64,
}

impl Default for Levels {
    fn default() -> Self {
        Self {
            sync: -0.285,
            blank: 0.0,
            black: 0.054,
            white: 0.714,
            burst_amplitude: 0.1428,
        }
    }
}

impl Levels {
    pub fn validate(&self) -> Result<(), NtscError> {
        if !(self.sync < self.blank && self.blank <= self.black && self.black < self.white) {
            return Err(NtscError::Format(format!(
                "levels must satisfy sync < blank <= black < white, got {self:?}"
            )));
        }
        if !(self.burst_amplitude >= 0.0) {
            return Err(NtscError::Format("burst amplitude must be non-negative".into()));
        }
        Ok(())
    }

    /// Same ratios as `reference`, anchored on a measured sync and blank.
    pub fn scaled_from(reference: &Levels, sync: f64, blank: f64) -> Self {
        let scale = (blank - sync) / (reference.blank - reference.sync);
        let at = |v: f64| blank + (v - reference.blank) * scale;
        Self {
            sync,
            blank,
            black: at(reference.black),
            white: at(reference.white),
            burst_amplitude: reference.burst_amplitude * scale,
        }
    }

    /// Maps a composite amplitude into [0, 1] for the RF modulator.
    pub fn to_baseband(&self, v: f64) -> f64 {
        ((v - self.sync) / (1.0 - self.sync)).clamp(0.0, 1.0)
    }

    pub fn from_baseband(&self, x: f64) -> f64 {
        self.sync + x * (1.0 - self.sync)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeWaveform {
    pub waveform: Waveform,
    pub timing: LineTiming,
    pub levels: Levels,
}

impl CompositeWaveform {
    /// Normalized [0, 1] baseband for the channel.
    pub fn to_baseband(&self) -> Waveform {
        self.waveform.with_samples(
            self.waveform
                .samples
                .iter()
                .map(|&v| self.levels.to_baseband(v))
                .collect(),
        )
    }
}

/// Raw bit rate of uncompressed interlaced video.
pub fn nominal_bitrate(fields_per_s: u64, lines_per_field: u64, px_per_line: u64, bits_per_px: u64) -> u64 {
    fields_per_s * lines_per_field * px_per_line * bits_per_px
}

/// Bit rate rounded to whole Mbps, e.g. "249 Mbps".
pub fn format_mbps(bits_per_s: u64) -> String {
    format!("{:.0} Mbps", bits_per_s as f64 / 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitrate_examples() {
        assert_eq!(nominal_bitrate(60, 240, 720, 24), 248_832_000);
        assert_eq!(format_mbps(nominal_bitrate(60, 240, 720, 24)), "249 Mbps");
        assert_eq!(nominal_bitrate(1, 1, 1, 1), 1);
        assert_eq!(nominal_bitrate(60, 240, 720, 8), 82_944_000);
        assert_eq!(
            nominal_bitrate(60, 240, 720, 8) * 3,
            nominal_bitrate(60, 240, 720, 24)
        );
    }

    #[test]
    fn default_timing_layout() {
        let t = LineTiming::default();
        t.validate().unwrap();
        assert_eq!(t.line_samples(), 910);
        assert_eq!(t.hsync_samples(), 67);
        assert_eq!(t.burst_end() - t.burst_start(), 36);
        assert_eq!(t.pixel_step(), 1.0);
        let first = t.first_pixel() as usize;
        assert!(first >= t.active_start() && first + WIDTH <= t.active_end());
        assert!(t.active_end() <= t.line_samples());
        assert_eq!(t.frame_samples(), 477_273);
        assert_eq!(t.field_samples(0) + t.field_samples(1), t.frame_samples());
        assert!(t.active_line_offset(0) > t.vsync_samples() + t.line_samples());
    }

    #[test]
    fn timing_rejects_slow_sampling() {
        let t = LineTiming {
            sample_rate: 10e6,
            ..LineTiming::default()
        };
        assert!(t.validate().is_err());
    }

    #[test]
    fn levels_ordering_and_scaling() {
        let l = Levels::default();
        l.validate().unwrap();
        let s = Levels::scaled_from(&l, -1.0, 1.0);
        assert!((s.white - (1.0 + 2.0 * 0.714 / 0.285)).abs() < 1e-12);
        assert_eq!(l.to_baseband(l.sync), 0.0);
        assert_eq!(l.to_baseband(1.0), 1.0);
        assert!((l.from_baseband(l.to_baseband(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn frame_requires_exact_size() {
        assert!(RgbFrame::new(vec![[0; 3]; 10]).is_err());
        let mut f = RgbFrame::filled([1, 2, 3]);
        f.set(719, 479, [9, 9, 9]);
        assert_eq!(f.get(719, 479), [9, 9, 9]);
        assert_eq!(f.row(479)[719], [9, 9, 9]);
    }
}
