use super::{atomic_receive, ChannelConfig, ChannelError, Waveform};
use crate::atomic::response_times;

/// Minimum samples per time constant for square-wave runs.
const SQUARE_SAMPLES_PER_TAU: f64 = 100.0;
/// Largest freq * tau that still lets every half-period settle.
const MAX_SETTLING_PRODUCT: f64 = 0.2;
/// Required swing in units of the estimated noise RMS.
const MIN_SWING_OVER_NOISE: f64 = 5.0;

/// Square-wave baseband (high for the first half of each period) through the
/// receiver. The sample rate is an integer multiple of `freq` with at least
/// 100 samples per time constant.
pub fn square_wave_response(
    config: &ChannelConfig,
    freq: f64,
    cycles: usize,
) -> Result<Waveform, ChannelError> {
    config.validate()?;
    if !(freq > 0.0 && freq.is_finite()) || cycles == 0 {
        return Err(ChannelError::Parameter(format!(
            "need a positive frequency and cycle count, got {freq} Hz x {cycles}"
        )));
    }
    let response = response_times(&config.geometry, &config.ensemble, config.calibration)?;
    let (tau_min, tau_max) = (
        response.tau_rise().min(response.tau_fall()),
        response.tau_rise().max(response.tau_fall()),
    );
    if freq * tau_max >= MAX_SETTLING_PRODUCT {
        return Err(ChannelError::Parameter(format!(
            "square wave at {freq} Hz cannot settle with tau {tau_max:.3e} s"
        )));
    }
    let mut per_cycle = (SQUARE_SAMPLES_PER_TAU / (tau_min * freq)).ceil() as usize;
    // keep the detector bandwidth resolved as well
    let detector_tau = 1.0 / (2.0 * std::f64::consts::PI * config.detector_bandwidth);
    per_cycle = per_cycle.max((10.0 / (detector_tau * freq)).ceil().min(1e8) as usize);
    per_cycle += per_cycle % 2;
    let sample_rate = per_cycle as f64 * freq;

    let half = per_cycle / 2;
    let baseband: Vec<f64> = (0..per_cycle * cycles)
        .map(|k| if k % per_cycle < half { 1.0 } else { 0.0 })
        .collect();
    Ok(atomic_receive(&Waveform::new(sample_rate, baseband, 0.0)?, config)?.waveform)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiseFall {
    /// Mean 10-90 % rise time, s.
    pub rise: f64,
    /// Mean 90-10 % fall time, s.
    pub fall: f64,
    pub rising_edges: usize,
    pub falling_edges: usize,
    /// Mean per-cycle max - min.
    pub swing: f64,
    pub noise_rms: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// White-noise RMS from the median absolute third difference, which ignores
/// edges and slow drift.
pub(crate) fn robust_noise_rms(samples: &[f64]) -> f64 {
    if samples.len() < 4 {
        return 0.0;
    }
    let mut d3: Vec<f64> = samples
        .windows(4)
        .map(|w| (w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0]).abs())
        .collect();
    1.4826 * median(&mut d3) / 20f64.sqrt()
}

/// Time of the `level` crossing between samples `k - 1` and `k`.
fn cross(samples: &[f64], k: usize, level: f64) -> f64 {
    let (a, b) = (samples[k - 1], samples[k]);
    if a == b {
        k as f64
    } else {
        (k - 1) as f64 + (level - a) / (b - a)
    }
}

/// Average 10-90 % edge times of a periodic two-level waveform. Levels come
/// from each cycle's extremes; the first cycle is discarded.
pub fn measure_rise_fall(waveform: &Waveform, period: f64) -> Result<RiseFall, ChannelError> {
    waveform.validate()?;
    let per = period * waveform.sample_rate;
    if !(per >= 4.0) {
        return Err(ChannelError::Measurement(format!(
            "period of {per:.2} samples is too short"
        )));
    }
    let cycles = (waveform.len() as f64 / per).floor() as usize;
    if cycles < 2 {
        return Err(ChannelError::Measurement(format!(
            "need at least 2 full periods, have {cycles}"
        )));
    }
    let x = &waveform.samples;
    let noise_rms = robust_noise_rms(&x[per.round() as usize..]);

    let bounds = |c: usize| ((c as f64 * per).round() as usize).min(x.len());
    let levels: Vec<(f64, f64)> = (1..cycles)
        .map(|c| {
            let seg = &x[bounds(c)..bounds(c + 1)];
            let lo = seg.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let swings: Vec<f64> = levels.iter().map(|(lo, hi)| hi - lo).collect();

    let (mut rises, mut falls) = (Vec::new(), Vec::new());
    let first = bounds(1).max(1);
    let (lo0, hi0) = levels[0];
    let mut high = x[first] > 0.5 * (lo0 + hi0);
    for k in first..x.len() {
        let c = ((k as f64 / per).floor() as usize).clamp(1, cycles - 1);
        let (lo, hi) = levels[c - 1];
        let swing = hi - lo;
        if !(swing > MIN_SWING_OVER_NOISE * noise_rms && swing > 0.0) {
            continue;
        }
        let (l10, l90) = (lo + 0.1 * swing, lo + 0.9 * swing);
        if !high && x[k] >= l90 {
            // last upward 10 % crossing before reaching 90 %
            let mut j = k;
            while j > 0 && x[j - 1] > l10 {
                j -= 1;
            }
            if j > 0 {
                rises.push(cross(x, k, l90) - cross(x, j, l10));
            }
            high = true;
        } else if high && x[k] <= l10 {
            let mut j = k;
            while j > 0 && x[j - 1] < l90 {
                j -= 1;
            }
            if j > 0 {
                falls.push(cross(x, k, l10) - cross(x, j, l90));
            }
            high = false;
        }
    }
    let swing = swings.iter().sum::<f64>() / swings.len() as f64;
    if !(swing > MIN_SWING_OVER_NOISE * noise_rms) || swing <= 0.0 {
        return Err(ChannelError::Measurement(format!(
            "swing {swing:.3e} indistinguishable from noise {noise_rms:.3e}"
        )));
    }
    if rises.is_empty() || falls.is_empty() {
        return Err(ChannelError::Measurement(
            "no complete rising and falling edges".into(),
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64 / waveform.sample_rate;
    Ok(RiseFall {
        rise: mean(&rises),
        fall: mean(&falls),
        rising_edges: rises.len(),
        falling_edges: falls.len(),
        swing,
        noise_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::{angular_mhz, BeamGeometry, DriveParameters, TABLE_I};
    use crate::channel::{asymmetric_filter, AsymmetricFilter};

    fn step_train(tau_rise: f64, tau_fall: f64) -> (Waveform, f64) {
        let fs = 200e6;
        let period = 20e-6;
        let per = (period * fs) as usize;
        let x: Vec<f64> = (0..4 * per)
            .map(|k| if k % per < per / 2 { 1.0 } else { 0.0 })
            .collect();
        let w = Waveform::new(fs, x, 0.0).unwrap();
        if tau_rise == 0.0 {
            return (w, period);
        }
        let out = asymmetric_filter(&w, AsymmetricFilter::new(tau_rise, tau_fall, 1.0).unwrap()).unwrap();
        (out, period)
    }

    #[test]
    fn first_order_train() {
        let (w, period) = step_train(0.5e-6, 0.5e-6);
        let rf = measure_rise_fall(&w, period).unwrap();
        assert!((rf.rise / 1.099e-6 - 1.0).abs() < 0.02, "{rf:?}");
        assert!((rf.fall / 1.099e-6 - 1.0).abs() < 0.02, "{rf:?}");
    }

    #[test]
    fn asymmetric_train() {
        let (w, period) = step_train(0.5e-6, 1.0e-6);
        let rf = measure_rise_fall(&w, period).unwrap();
        assert!((rf.rise / 1.10e-6 - 1.0).abs() < 0.02, "{rf:?}");
        assert!((rf.fall / 2.20e-6 - 1.0).abs() < 0.02, "{rf:?}");
    }

    #[test]
    fn unfiltered_square_is_sharp() {
        let (w, period) = step_train(0.0, 0.0);
        let rf = measure_rise_fall(&w, period).unwrap();
        assert!(rf.rise <= 2.0 * w.dt() && rf.fall <= 2.0 * w.dt());
        assert!(rf.rising_edges >= 2 && rf.falling_edges >= 2);
    }

    #[test]
    fn rejects_short_or_flat() {
        let w = Waveform::new(1e6, vec![0.0; 150], 0.0).unwrap();
        assert!(measure_rise_fall(&w, 100e-6).is_err());
        assert!(matches!(
            measure_rise_fall(&w, 50e-6),
            Err(ChannelError::Measurement(_))
        ));
    }

    fn config(um: f64) -> ChannelConfig {
        let drive = DriveParameters::locked(angular_mhz(2.0), angular_mhz(7.0)).with_rf(angular_mhz(6.0));
        ChannelConfig::new(BeamGeometry::matched_um(um).unwrap(), drive)
    }

    #[test]
    fn table_rows_recovered() {
        for row in TABLE_I.iter().filter(|r| r.probe_fwhm_um >= 85.0) {
            let w = square_wave_response(&config(row.probe_fwhm_um), 10e3, 3).unwrap();
            let rf = measure_rise_fall(&w, 1e-4).unwrap();
            assert!(
                (rf.rise / (row.rise_us * 1e-6) - 1.0).abs() < 0.1,
                "{} {rf:?}",
                row.probe_fwhm_um
            );
            assert!(
                (rf.fall / (row.fall_us * 1e-6) - 1.0).abs() < 0.1,
                "{} {rf:?}",
                row.probe_fwhm_um
            );
        }
    }

    #[test]
    fn periodic_steady_state() {
        let w = square_wave_response(&config(200.0), 10e3, 3).unwrap();
        let per = (w.sample_rate / 10e3).round() as usize;
        for k in 0..per {
            assert!((w.samples[per + k] - w.samples[2 * per + k]).abs() < 1e-6);
        }
    }

    #[test]
    fn settling_precondition() {
        assert!(matches!(
            square_wave_response(&config(800.0), 200e3, 2),
            Err(ChannelError::Parameter(_))
        ));
    }
}
