use rayon::prelude::*;

use super::encode::{subcarrier_phase, BURST_PHASE, CHROMA_AXIS_PHASE};
use super::{
    detect_sync, fir_filter, lowpass_kernel, yiq_to_rgb, CompositeWaveform, Levels, LineTiming, NtscError,
    RgbFrame, Yiq, FIELD_LINES, HEIGHT, WIDTH,
};

pub const CHROMA_CUTOFF_HZ: f64 = 1.3e6;
pub const LUMA_CUTOFF_HZ: f64 = 3.0e6;
const CHROMA_TAPS: usize = 31;
const LUMA_TAPS: usize = 31;
/// Burst must exceed this multiple of the per-line noise RMS.
pub const LOCK_RATIO: f64 = 3.0;
/// Bursts below this fraction of nominal are treated as absent even on a
/// noiseless line.
const MIN_BURST_FRACTION: f64 = 1e-3;
/// Samples skipped after the sync leading edge before noise estimation.
const NOISE_GUARD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstEstimate {
    /// Peak amplitude in composite units.
    pub amplitude: f64,
    /// Phase of `amplitude * sin(w t + phase)` against the free-running
    /// subcarrier, radians.
    pub phase: f64,
    /// Noise RMS estimated over the sync tip.
    pub noise_rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLine {
    pub pixels: Vec<Yiq>,
    pub burst: BurstEstimate,
    pub locked: bool,
}

fn sample_at(x: &[f64], pos: f64) -> f64 {
    if pos <= 0.0 {
        return x[0];
    }
    let k = pos.floor() as usize;
    if k + 1 >= x.len() {
        return x[x.len() - 1];
    }
    let w = pos - k as f64;
    x[k] + w * (x[k + 1] - x[k])
}

/// Third-difference noise estimate: for white noise each third difference
/// has variance 20 sigma^2, while ramps and curvature cancel.
fn difference_noise(x: &[f64]) -> f64 {
    if x.len() < 4 {
        return 0.0;
    }
    let d: Vec<f64> = x
        .windows(4)
        .map(|w| w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0])
        .collect();
    (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64 / 20.0).sqrt()
}

/// Least-squares fit of offset, slope, curvature and the two subcarrier
/// quadratures over the burst window.
fn fit_burst(x: &[f64], first: usize, timing: &LineTiming) -> (f64, f64) {
    let n = x.len() as f64;
    let mut ata = nalgebra::SMatrix::<f64, 5, 5>::zeros();
    let mut atb = nalgebra::SVector::<f64, 5>::zeros();
    for (k, &v) in x.iter().enumerate() {
        let t = (k as f64 - 0.5 * n) / n;
        let p = subcarrier_phase(timing, (first + k) as f64);
        let basis = nalgebra::SVector::<f64, 5>::from([1.0, t, t * t, p.cos(), p.sin()]);
        ata += basis * basis.transpose();
        atb += basis * v;
    }
    match ata.lu().solve(&atb) {
        Some(c) => (c[3], c[4]),
        None => (0.0, 0.0),
    }
}

/// Decodes the active pixels of the line whose hsync leading edge sits at
/// fractional sample `start` of `samples`.
pub fn decode_line(samples: &[f64], start: f64, timing: &LineTiming, levels: &Levels) -> DecodedLine {
    let base = start.round().max(0.0) as usize;
    let clip = |a: usize, b: usize| (a.min(samples.len()), b.min(samples.len()));

    // Behind a slow channel the breezeway holds the sync recovery and the
    // early burst; the leading half of the sync tip stays smooth.
    let (b0, b1) = clip(base + NOISE_GUARD, base + timing.hsync_samples() / 2);
    let noise_rms = difference_noise(&samples[b0..b1]);
    let (u0, u1) = clip(base + timing.burst_start(), base + timing.burst_end());
    let (a, b) = if u1 > u0 + 5 {
        fit_burst(&samples[u0..u1], u0, timing)
    } else {
        (0.0, 0.0)
    };
    let burst = BurstEstimate {
        amplitude: a.hypot(b),
        phase: a.atan2(b),
        noise_rms,
    };
    let locked = burst.amplitude >= LOCK_RATIO * noise_rms
        && burst.amplitude > MIN_BURST_FRACTION * levels.burst_amplitude;

    // working segment around the pixels, with filter margin
    let margin = CHROMA_TAPS.max(LUMA_TAPS) + 2;
    let first_pixel = start + timing.first_pixel();
    let seg_start = (first_pixel.floor() as isize - margin as isize).max(0) as usize;
    let seg_end =
        ((first_pixel + WIDTH as f64 * timing.pixel_step()).ceil() as usize + margin).min(samples.len());
    if seg_end <= seg_start + 1 {
        return DecodedLine {
            pixels: vec![Yiq::BLACK; WIDTH],
            burst,
            locked: false,
        };
    }
    let span = levels.white - levels.black;
    let u: Vec<f64> = samples[seg_start..seg_end]
        .iter()
        .map(|v| (v - levels.black) / span)
        .collect();
    let luma_kernel = lowpass_kernel(LUMA_CUTOFF_HZ, timing.sample_rate, LUMA_TAPS);

    let (y, i, q) = if locked {
        let offset = CHROMA_AXIS_PHASE + burst.phase - BURST_PHASE;
        let phases: Vec<f64> = (seg_start..seg_end)
            .map(|n| subcarrier_phase(timing, n as f64) + offset)
            .collect();
        let chroma_kernel = lowpass_kernel(CHROMA_CUTOFF_HZ, timing.sample_rate, CHROMA_TAPS);
        let i_raw: Vec<f64> = u.iter().zip(&phases).map(|(v, p)| 2.0 * v * p.cos()).collect();
        let q_raw: Vec<f64> = u.iter().zip(&phases).map(|(v, p)| 2.0 * v * p.sin()).collect();
        let i = fir_filter(&i_raw, &chroma_kernel);
        let q = fir_filter(&q_raw, &chroma_kernel);
        let luma_raw: Vec<f64> = (0..u.len())
            .map(|k| u[k] - i[k] * phases[k].cos() - q[k] * phases[k].sin())
            .collect();
        let acc = levels.burst_amplitude / burst.amplitude;
        let y = fir_filter(&luma_raw, &luma_kernel);
        (
            y,
            i.into_iter().map(|v| v * acc).collect(),
            q.into_iter().map(|v| v * acc).collect(),
        )
    } else {
        let y = fir_filter(&u, &luma_kernel);
        let zeros = vec![0.0; y.len()];
        (y, zeros.clone(), zeros)
    };

    let pixels = (0..WIDTH)
        .map(|p| {
            let pos = first_pixel + p as f64 * timing.pixel_step() - seg_start as f64;
            Yiq {
                y: sample_at(&y, pos),
                i: sample_at(&i, pos),
                q: sample_at(&q, pos),
            }
        })
        .collect();
    DecodedLine {
        pixels,
        burst,
        locked,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeReport {
    /// Active lines whose hsync was found.
    pub lines_detected: usize,
    pub burst_locked_lines: usize,
    /// Mean burst amplitude relative to nominal over detected lines.
    pub mean_burst_amplitude: f64,
    /// Per frame row: chroma was decoded.
    pub chroma_enabled: Vec<bool>,
    pub missing_lines: usize,
    pub irregular_lines: usize,
    pub fields_detected: usize,
    /// Measured line period, s.
    pub line_period: f64,
    pub levels: Levels,
}

impl DecodeReport {
    pub fn burst_lock_fraction(&self) -> f64 {
        if self.lines_detected == 0 {
            0.0
        } else {
            self.burst_locked_lines as f64 / self.lines_detected as f64
        }
    }
}

/// Sync detection, per-line decoding and de-interlacing of the first two
/// fields. Levels are always estimated from the signal.
pub fn decode_frame(composite: &CompositeWaveform) -> Result<(RgbFrame, DecodeReport), NtscError> {
    let timing = &composite.timing;
    let samples = &composite.waveform.samples;
    let sync = detect_sync(&composite.waveform, timing)?;
    let levels = sync.levels;

    // frame row -> line sync
    let mut rows = vec![None; HEIGHT];
    for line in sync.lines.iter().filter(|l| l.field < 2) {
        let parity = sync.fields[line.field].parity;
        rows[2 * line.line + parity.first_row()] = Some(*line);
    }
    debug_assert_eq!(FIELD_LINES * 2, HEIGHT);

    let decoded: Vec<Option<DecodedLine>> = rows
        .par_iter()
        .map(|l| match l {
            Some(l) if l.found => Some(decode_line(samples, l.start, timing, &levels)),
            _ => None,
        })
        .collect();

    let mut frame = RgbFrame::filled([0, 0, 0]);
    let mut chroma_enabled = vec![false; HEIGHT];
    let (mut detected, mut locked, mut amplitude) = (0usize, 0usize, 0.0);
    for (row, line) in decoded.iter().enumerate() {
        if let Some(line) = line {
            detected += 1;
            amplitude += line.burst.amplitude / levels.burst_amplitude;
            if line.locked {
                locked += 1;
                chroma_enabled[row] = true;
            }
            for (px, yiq) in frame.row_mut(row).iter_mut().zip(&line.pixels) {
                *px = yiq_to_rgb(*yiq);
            }
        }
    }
    let irregular = rows.iter().flatten().filter(|l| l.irregular).count();
    Ok((
        frame,
        DecodeReport {
            lines_detected: detected,
            burst_locked_lines: locked,
            mean_burst_amplitude: if detected > 0 {
                amplitude / detected as f64
            } else {
                0.0
            },
            chroma_enabled,
            missing_lines: HEIGHT - detected,
            irregular_lines: irregular,
            fields_detected: sync.fields.len(),
            line_period: sync.line_period,
            levels,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;
    use crate::ntsc::{color_bars, encode_frame, rgb_to_yiq, Parity};

    fn roundtrip(frame: &RgbFrame) -> (RgbFrame, DecodeReport) {
        let wf = encode_frame(frame, &LineTiming::default(), &Levels::default()).unwrap();
        decode_frame(&wf).unwrap()
    }

    #[test]
    fn gray_decodes_flat() {
        let (out, report) = roundtrip(&RgbFrame::filled([128, 128, 128]));
        assert_eq!(report.lines_detected, 480);
        for row in [0, 1, 239, 240, 479] {
            for col in (8..712).step_by(37) {
                for c in out.get(col, row) {
                    assert!((c as f64 - 128.0).abs() <= 0.02 * 255.0, "{row} {col} {c}");
                }
            }
        }
    }

    #[test]
    fn black_frame_still_locks() {
        let (out, report) = roundtrip(&RgbFrame::filled([0, 0, 0]));
        assert_eq!(report.burst_locked_lines, 480);
        // the blank-to-black step just before the first pixel rings slightly
        for row in 0..HEIGHT {
            for (col, p) in out.row(row).iter().enumerate() {
                let limit = if (16..WIDTH - 16).contains(&col) { 3 } else { 10 };
                assert!(p.iter().all(|&c| c <= limit), "{row} {col} {p:?}");
            }
        }
    }

    #[test]
    fn bar_hue_and_saturation() {
        let bars = color_bars();
        let (out, _) = roundtrip(&bars);
        for k in 1..7 {
            let col = (2 * k + 1) * WIDTH / 14;
            let want = rgb_to_yiq(bars.get(col, 100));
            let got = rgb_to_yiq(out.get(col, 100));
            let dh = (crate::ntsc::hue_degrees(got) - crate::ntsc::hue_degrees(want) + 540.0) % 360.0 - 180.0;
            assert!(dh.abs() < 5.0, "bar {k}: hue off by {dh}");
            assert!(
                (got.saturation() / want.saturation() - 1.0).abs() < 0.05,
                "bar {k}"
            );
        }
    }

    #[test]
    fn clean_roundtrip_psnr() {
        let bars = color_bars();
        let (out, report) = roundtrip(&bars);
        assert!(psnr(&out, &bars) >= 30.0);
        assert_eq!(report.burst_lock_fraction(), 1.0);
        assert_eq!(report.irregular_lines, 0);
    }

    #[test]
    fn rows_interleave() {
        let frame = RgbFrame::from_fn(|_, row| if row % 2 == 0 { [235; 3] } else { [20; 3] });
        let (out, _) = roundtrip(&frame);
        for row in 0..HEIGHT {
            let v = out.get(360, row)[0] as i32;
            let want = if row % 2 == Parity::Odd.first_row() {
                235
            } else {
                20
            };
            assert!((v - want).abs() <= 6, "row {row}: {v}");
        }
    }

    #[test]
    fn burst_phase_is_stable() {
        let t = LineTiming::default();
        let l = Levels::default();
        let wf = encode_frame(&color_bars(), &t, &l).unwrap();
        let map = detect_sync(&wf.waveform, &t).unwrap();
        let phases: Vec<f64> = map
            .lines
            .iter()
            .map(|s| decode_line(&wf.waveform.samples, s.start, &t, &l).burst.phase)
            .collect();
        for w in phases.windows(2) {
            let d = (w[1] - w[0] + 3.0 * std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
                - std::f64::consts::PI;
            assert!(d.abs().to_degrees() < 1.0);
        }
        let d = (phases[0] - BURST_PHASE).abs().to_degrees();
        assert!(d < 1.0, "{d}");
    }

    #[test]
    fn difference_noise_ignores_ramps() {
        let ramp: Vec<f64> = (0..40)
            .map(|k| 0.1 + 0.01 * k as f64 + 1e-4 * (k * k) as f64)
            .collect();
        assert!(difference_noise(&ramp) < 1e-12);
    }
}
