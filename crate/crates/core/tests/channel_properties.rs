use proptest::prelude::*;
use rydberg_tv::atomic::{angular_mhz, BeamGeometry, DriveParameters, TABLE_I};
use rydberg_tv::channel::*;

const FS: f64 = 4.0 * 3.579545e6;

fn config(fwhm_um: f64) -> ChannelConfig {
    let row = TABLE_I.iter().find(|r| r.probe_fwhm_um == fwhm_um).unwrap();
    let drive = DriveParameters::locked(angular_mhz(2.0), angular_mhz(7.0)).with_rf(angular_mhz(1.4));
    ChannelConfig::new(BeamGeometry::table_row(row), drive)
}

#[test]
fn bandwidth_shrinks_with_beam_size() {
    let bw: Vec<f64> = [85.0, 200.0, 400.0, 800.0]
        .iter()
        .map(|&w| three_db_bandwidth(&config(w), FS).unwrap())
        .collect();
    assert!(bw.windows(2).all(|b| b[1] < b[0]), "{bw:?}");
    // a first-order filter with the fall time constant sets the corner
    let corner = 9f64.ln() / (2.0 * std::f64::consts::PI * 6.1e-6);
    assert!((bw[3] / corner - 1.0).abs() < 0.5, "{} vs {corner}", bw[3]);
}

#[test]
fn chroma_gain_ratio_between_extreme_beams() {
    let f = 3.579545e6;
    let g85 = measure_channel_gain(&config(85.0), f, FS).unwrap();
    let g800 = measure_channel_gain(&config(800.0), f, FS).unwrap();
    assert!(g85 / g800 >= 3.0, "{g85} / {g800}");
}

#[test]
fn rise_and_fall_follow_table() {
    for row in TABLE_I.iter().filter(|r| r.probe_fwhm_um >= 85.0) {
        let w = square_wave_response(&config(row.probe_fwhm_um), 10e3, 3).unwrap();
        let rf = measure_rise_fall(&w, 1e-4).unwrap();
        assert!((rf.rise * 1e6 / row.rise_us - 1.0).abs() < 0.1);
        assert!((rf.fall * 1e6 / row.fall_us - 1.0).abs() < 0.1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rydwav_roundtrip(samples in prop::collection::vec(-1e6f64..1e6, 1..200), rate in 1.0f64..1e9, t0 in -1.0f64..1.0) {
        let w = Waveform::new(rate, samples, t0).unwrap();
        let mut buf = Vec::new();
        write_waveform(&w, &mut buf).unwrap();
        // samples are stored as binary32
        let back = read_waveform(&buf[..]).unwrap();
        prop_assert_eq!(back.sample_rate, w.sample_rate);
        prop_assert_eq!(back.start_time, w.start_time);
        let narrowed: Vec<f64> = w.samples.iter().map(|&s| s as f32 as f64).collect();
        prop_assert_eq!(back.samples, narrowed);
    }

    #[test]
    fn symmetric_filter_keeps_mean(levels in prop::collection::vec(0.0f64..1.0, 4), tau_us in 6.0f64..40.0) {
        // a square-ish periodic input, many periods long
        let period = 400usize;
        let x: Vec<f64> = (0..period * 60).map(|k| levels[(k % period) * 4 / period]).collect();
        let w = Waveform::new(1e6, x, 0.0).unwrap();
        let tau = tau_us * 1e-6;
        let y = asymmetric_filter(&w, AsymmetricFilter::new(tau, tau, levels[0]).unwrap()).unwrap();
        let tail = &y.samples[period * 50..];
        let mean_in: f64 = levels.iter().sum::<f64>() / 4.0;
        let mean_out: f64 = tail.iter().sum::<f64>() / tail.len() as f64;
        prop_assert!((mean_out - mean_in).abs() <= 1e-3 * mean_in.max(1e-3));
    }

    #[test]
    fn noise_is_reproducible(seed in any::<u64>()) {
        let mut c = config(200.0);
        c.noise_amplitude_density = 1e-7;
        c.rng_seed = seed;
        let w = Waveform::new(FS, vec![0.3; 500], 0.0).unwrap();
        let a = atomic_receive(&w, &c).unwrap().waveform;
        let b = atomic_receive(&w, &c).unwrap().waveform;
        prop_assert_eq!(a, b);
    }
}
