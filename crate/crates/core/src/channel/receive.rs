use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{single_pole, AsymmetricFilter, ChannelConfig, ChannelError, DetectionMode, Waveform};
use crate::atomic::{discriminator_gain, response_times, steady_state_transmission};

/// Samples in the static discriminator lookup table.
pub const LUT_POINTS: usize = 1024;

/// Maps a normalized baseband in [0, 1] to an RF Rabi-frequency envelope
/// `bias * (1 + depth * x)`.
pub fn envelope_from_baseband(baseband: &Waveform, bias: f64, depth: f64) -> Result<Waveform, ChannelError> {
    baseband.validate()?;
    if !(depth > 0.0 && depth <= 1.0) {
        return Err(ChannelError::Parameter(format!(
            "modulation depth must be in (0, 1], got {depth}"
        )));
    }
    if !(bias >= 0.0 && bias.is_finite()) {
        return Err(ChannelError::Parameter(format!(
            "RF bias must be non-negative, got {bias}"
        )));
    }
    if let Some((k, x)) = baseband
        .samples
        .iter()
        .enumerate()
        .find(|(_, x)| !(0.0..=1.0).contains(*x))
    {
        return Err(ChannelError::Range(format!(
            "baseband sample {k} = {x} outside [0, 1]"
        )));
    }
    Ok(baseband.with_samples(
        baseband
            .samples
            .iter()
            .map(|x| bias * (1.0 + depth * x))
            .collect(),
    ))
}

/// Lock-point transmission versus RF Rabi frequency over
/// `bias * (1 +/- 2 depth)`, clamped at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorTable {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl DiscriminatorTable {
    pub fn build(config: &ChannelConfig) -> Result<Self, ChannelError> {
        let bias = config.drive.rf_rabi;
        let depth = config.modulation_depth;
        let start = (bias * (1.0 - 2.0 * depth)).max(0.0);
        let end = bias * (1.0 + 2.0 * depth);
        let step = (end - start) / (LUT_POINTS - 1) as f64;
        let values = {
            use rayon::prelude::*;
            (0..LUT_POINTS)
                .into_par_iter()
                .map(|k| {
                    steady_state_transmission(
                        &config.drive.with_rf(start + step * k as f64),
                        &config.ladder,
                        &config.geometry,
                        &config.ensemble,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok(Self { start, step, values })
    }

    pub fn range(&self) -> (f64, f64) {
        (
            self.start,
            self.start + self.step * (self.values.len() - 1) as f64,
        )
    }

    /// Four-point Lagrange interpolation, clamped to the table range.
    pub fn lookup(&self, rf_rabi: f64) -> f64 {
        let n = self.values.len();
        if self.step <= 0.0 {
            return self.values[0];
        }
        let pos = ((rf_rabi - self.start) / self.step).clamp(0.0, (n - 1) as f64);
        let k = (pos.floor() as usize).clamp(1, n - 3);
        let t = pos - k as f64;
        let v = &self.values[k - 1..k + 3];
        let (a, b, c, d) = (t + 1.0, t, t - 1.0, t - 2.0);
        -v[0] * b * c * d / 6.0 + v[1] * a * c * d / 2.0 - v[2] * a * b * d / 2.0 + v[3] * a * b * c / 6.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiveDiagnostics {
    /// Envelope left the discriminator's linear region.
    pub compression: bool,
    pub envelope_min: f64,
    pub envelope_max: f64,
    /// Discriminator slope at the envelope midpoint, per rad/s.
    pub operating_gain: f64,
    pub linear_half_width: f64,
    /// Transmission at the zero-baseband envelope.
    pub bias_transmission: f64,
    pub tau_rise: f64,
    pub tau_fall: f64,
    /// +1 if detector output rises with baseband, -1 if inverted.
    pub polarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub waveform: Waveform,
    pub diagnostics: ReceiveDiagnostics,
}

fn detect(config: &ChannelConfig, transmission: f64, bias_transmission: f64) -> f64 {
    let optical = config.detector_gain * config.local_oscillator_factor();
    match config.detection_mode {
        DetectionMode::Homodyne => optical * transmission,
        DetectionMode::Balanced => optical * (transmission - bias_transmission),
    }
}

/// Detector gain that makes a full-scale baseband step (0 -> 1) produce an
/// output swing of `target_swing` on the static path.
pub fn normalized_detector_gain(config: &ChannelConfig, target_swing: f64) -> Result<f64, ChannelError> {
    config.validate()?;
    let table = DiscriminatorTable::build(config)?;
    let bias = config.drive.rf_rabi;
    let swing = (table.lookup(bias * (1.0 + config.modulation_depth)) - table.lookup(bias)).abs()
        * config.local_oscillator_factor();
    if !(swing > 0.0) {
        return Err(ChannelError::Parameter(
            "discriminator has no response over the modulation range".into(),
        ));
    }
    Ok(target_swing / swing)
}

/// Runs a normalized video baseband through the atomic receiver.
///
/// envelope -> static discriminator (lookup table) -> asymmetric
/// transit-limited filter -> detection gain -> white Gaussian noise ->
/// single-pole detector bandwidth.
pub fn atomic_receive(baseband: &Waveform, config: &ChannelConfig) -> Result<Reception, ChannelError> {
    config.validate()?;
    let bias = config.drive.rf_rabi;
    let envelope = envelope_from_baseband(baseband, bias, config.modulation_depth)?;
    let table = DiscriminatorTable::build(config)?;

    let (envelope_min, envelope_max) = envelope
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let (envelope_min, envelope_max) = if envelope.is_empty() {
        (bias, bias)
    } else {
        (envelope_min, envelope_max)
    };
    let midpoint = bias * (1.0 + 0.5 * config.modulation_depth);
    let operating = discriminator_gain(
        &config.drive.with_rf(midpoint),
        &config.ladder,
        &config.geometry,
        &config.ensemble,
    )?;
    let compression = operating.near_zero
        || envelope_max - midpoint > operating.linear_half_width
        || midpoint - envelope_min > operating.linear_half_width;

    let response = response_times(&config.geometry, &config.ensemble, config.calibration)?;
    let bias_transmission = table.lookup(bias);
    let transmission = envelope.with_samples(envelope.samples.iter().map(|&w| table.lookup(w)).collect());

    let initial = transmission.samples.first().copied().unwrap_or(bias_transmission);
    let mut atoms = AsymmetricFilter::new(response.tau_rise(), response.tau_fall(), initial)?;
    let atomic = atoms.process(&transmission)?;

    let mut detected: Vec<f64> = atomic
        .samples
        .iter()
        .map(|&t| detect(config, t, bias_transmission))
        .collect();
    let sigma = config.noise_rms();
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let normal = Normal::new(0.0, sigma).map_err(|e| ChannelError::Parameter(e.to_string()))?;
        for y in detected.iter_mut() {
            *y += normal.sample(&mut rng);
        }
    }
    let waveform = single_pole(&atomic.with_samples(detected), config.detector_bandwidth)?;

    let full_scale = table.lookup(bias * (1.0 + config.modulation_depth)) - bias_transmission;
    let polarity = if full_scale * config.detector_gain < 0.0 {
        -1.0
    } else {
        1.0
    };

    Ok(Reception {
        waveform,
        diagnostics: ReceiveDiagnostics {
            compression,
            envelope_min,
            envelope_max,
            operating_gain: operating.gain,
            linear_half_width: operating.linear_half_width,
            bias_transmission,
            tau_rise: response.tau_rise(),
            tau_fall: response.tau_fall(),
            polarity,
        },
    })
}

/// Amplitude and phase of the `frequency` component by least squares on
/// `[1, cos, sin]`.
pub(crate) fn tone_amplitude(samples: &[f64], sample_rate: f64, frequency: f64, start_index: usize) -> f64 {
    let w = 2.0 * std::f64::consts::PI * frequency / sample_rate;
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (k, &y) in samples.iter().enumerate() {
        let phase = w * (start_index + k) as f64;
        let basis = [1.0, phase.cos(), phase.sin()];
        for i in 0..3 {
            atb[i] += basis[i] * y;
            for j in 0..3 {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    let m = nalgebra::Matrix3::from_fn(|i, j| ata[i][j]);
    let v = nalgebra::Vector3::from_fn(|i, _| atb[i]);
    match m.lu().solve(&v) {
        Some(c) => c[1].hypot(c[2]),
        None => 0.0,
    }
}

/// Small-signal channel response at `frequency`, normalized to the static
/// (DC) response of the same configuration. Noise is disabled.
pub fn measure_channel_gain(
    config: &ChannelConfig,
    frequency: f64,
    sample_rate: f64,
) -> Result<f64, ChannelError> {
    if !(frequency > 0.0 && frequency < 0.5 * sample_rate) {
        return Err(ChannelError::Parameter(format!(
            "frequency {frequency} outside (0, Nyquist)"
        )));
    }
    let quiet = ChannelConfig {
        noise_amplitude_density: 0.0,
        ..*config
    };
    let response = response_times(&quiet.geometry, &quiet.ensemble, quiet.calibration)?;
    let (center, amplitude) = (0.5, 0.05);

    let dc = |x: f64| -> Result<f64, ChannelError> {
        let w = Waveform::new(sample_rate, vec![x; 8], 0.0)?;
        Ok(atomic_receive(&w, &quiet)?.waveform.samples[7])
    };
    let static_slope = (dc(center + amplitude)? - dc(center - amplitude)?) / (2.0 * amplitude);

    let settle = 20.0 * response.tau_fall().max(response.tau_rise()) + 20.0 / frequency;
    let settle_samples = (settle * sample_rate).ceil() as usize;
    let window = ((64.0 / frequency) * sample_rate).ceil() as usize;
    let w = 2.0 * std::f64::consts::PI * frequency / sample_rate;
    let samples: Vec<f64> = (0..settle_samples + window)
        .map(|k| center + amplitude * (w * k as f64).sin())
        .collect();
    let out = atomic_receive(&Waveform::new(sample_rate, samples, 0.0)?, &quiet)?;
    let measured = tone_amplitude(
        &out.waveform.samples[settle_samples..],
        sample_rate,
        frequency,
        settle_samples,
    );
    Ok(measured / (amplitude * static_slope.abs()))
}

/// Frequency at which [`measure_channel_gain`] falls to 1/sqrt(2), found by
/// bisection in log-frequency.
pub fn three_db_bandwidth(config: &ChannelConfig, sample_rate: f64) -> Result<f64, ChannelError> {
    let target = std::f64::consts::FRAC_1_SQRT_2;
    let (mut lo, mut hi) = (1.0e3f64, 0.4 * sample_rate);
    if measure_channel_gain(config, lo, sample_rate)? < target {
        return Err(ChannelError::Measurement("bandwidth below 1 kHz".into()));
    }
    if measure_channel_gain(config, hi, sample_rate)? > target {
        return Ok(hi);
    }
    for _ in 0..30 {
        let mid = (lo * hi).sqrt();
        if measure_channel_gain(config, mid, sample_rate)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::{angular_mhz, BeamGeometry, DriveParameters};

    fn config(fwhm_um: f64) -> ChannelConfig {
        let drive = DriveParameters::locked(angular_mhz(2.0), angular_mhz(7.0)).with_rf(angular_mhz(6.0));
        ChannelConfig {
            detector_bandwidth: 1e12,
            ..ChannelConfig::new(BeamGeometry::matched_um(fwhm_um).unwrap(), drive)
        }
    }

    #[test]
    fn envelope_examples() {
        let bias = 3.0;
        let zeros = Waveform::new(1e6, vec![0.0; 4], 0.0).unwrap();
        let env = envelope_from_baseband(&zeros, bias, 0.5).unwrap();
        assert!(env.samples.iter().all(|&s| s == bias));
        let ones = zeros.with_samples(vec![1.0; 4]);
        let env = envelope_from_baseband(&ones, bias, 0.5).unwrap();
        assert!(env.samples.iter().all(|&s| s == bias * 1.5));
        let square = zeros.with_samples(vec![0.0, 1.0, 0.0, 1.0]);
        let env = envelope_from_baseband(&square, bias, 0.25).unwrap();
        assert_eq!(env.samples, vec![3.0, 3.75, 3.0, 3.75]);
        assert_eq!(env.sample_rate, square.sample_rate);
        let bad = zeros.with_samples(vec![0.0, 1.2]);
        assert!(matches!(
            envelope_from_baseband(&bad, bias, 0.5),
            Err(ChannelError::Range(_))
        ));
    }

    #[test]
    fn lookup_table_matches_solver() {
        let cfg = config(85.0);
        let table = DiscriminatorTable::build(&cfg).unwrap();
        let (lo, hi) = table.range();
        for k in 0..37 {
            let rf = lo + (hi - lo) * (k as f64 + 0.37) / 37.0;
            let direct =
                steady_state_transmission(&cfg.drive.with_rf(rf), &cfg.ladder, &cfg.geometry, &cfg.ensemble)
                    .unwrap();
            let depth_change = 1.0 - direct;
            assert!(
                (table.lookup(rf) - direct).abs() <= 1e-3 * depth_change,
                "at {rf}"
            );
        }
    }

    #[test]
    fn static_path_dc() {
        let cfg = config(85.0);
        for x in [0.0, 0.3, 1.0] {
            let w = Waveform::new(14.31818e6, vec![x; 64], 0.0).unwrap();
            let out = atomic_receive(&w, &cfg).unwrap();
            let rf = cfg.drive.rf_rabi * (1.0 + cfg.modulation_depth * x);
            let t =
                steady_state_transmission(&cfg.drive.with_rf(rf), &cfg.ladder, &cfg.geometry, &cfg.ensemble)
                    .unwrap();
            let expected = cfg.detector_gain * cfg.local_oscillator_factor() * t;
            for y in &out.waveform.samples {
                assert!((y - expected).abs() < 1e-9, "{y} vs {expected}");
            }
        }
    }

    #[test]
    fn deterministic_with_seed() {
        let cfg = ChannelConfig {
            noise_amplitude_density: 1e-6,
            rng_seed: 42,
            detector_bandwidth: 10e6,
            ..config(200.0)
        };
        let x: Vec<f64> = (0..5000).map(|k| ((k / 300) % 2) as f64).collect();
        let w = Waveform::new(14.31818e6, x, 0.0).unwrap();
        let a = atomic_receive(&w, &cfg).unwrap();
        let b = atomic_receive(&w, &cfg).unwrap();
        assert_eq!(a.waveform.samples, b.waveform.samples);
        let other = atomic_receive(&w, &ChannelConfig { rng_seed: 43, ..cfg }).unwrap();
        assert_ne!(a.waveform.samples, other.waveform.samples);
    }

    #[test]
    fn balanced_removes_bias() {
        let cfg = ChannelConfig {
            detection_mode: DetectionMode::Balanced,
            ..config(400.0)
        };
        let w = Waveform::new(14.31818e6, vec![0.0; 16], 0.0).unwrap();
        let out = atomic_receive(&w, &cfg).unwrap();
        assert!(out.waveform.samples.iter().all(|y| y.abs() < 1e-12));
    }

    #[test]
    fn normalized_gain_sets_swing() {
        let mut cfg = config(400.0);
        cfg.detector_gain = normalized_detector_gain(&cfg, 1.0).unwrap();
        let lo = atomic_receive(&Waveform::new(1e7, vec![0.0; 4], 0.0).unwrap(), &cfg).unwrap();
        let hi = atomic_receive(&Waveform::new(1e7, vec![1.0; 4], 0.0).unwrap(), &cfg).unwrap();
        let swing = (hi.waveform.samples[3] - lo.waveform.samples[3]).abs();
        assert!((swing - 1.0).abs() < 1e-9);
        assert_eq!(hi.diagnostics.polarity, -1.0);
    }

    #[test]
    fn chroma_rolloff_follows_fall_times() {
        // High-frequency limit of first-order responses: |H| ~ 1/(2 pi f tau).
        let fs = 4.0 * 3.579545e6;
        let f = 3.579545e6;
        let g85 = measure_channel_gain(&config(85.0), f, fs).unwrap();
        let g800 = measure_channel_gain(&config(800.0), f, fs).unwrap();
        let fall = |us: f64| us * 1e-6 / 9f64.ln();
        let analytic = fall(6.1) / fall(1.2);
        let ratio = g85 / g800;
        assert!(
            (ratio / analytic - 1.0).abs() < 0.15,
            "ratio {ratio} vs {analytic}"
        );
    }
}
