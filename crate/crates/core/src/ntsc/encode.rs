use std::f64::consts::PI;

use rayon::prelude::*;

use super::{
    rgb_to_yiq, CompositeWaveform, Field, Levels, LineTiming, NtscError, Parity, RgbFrame, FIELD_LINES, WIDTH,
};
use crate::channel::Waveform;

/// Chroma axes sit 33 degrees ahead of the burst-derived reference.
pub(crate) const CHROMA_AXIS_PHASE: f64 = 33.0 * PI / 180.0;
/// Burst phase relative to the free-running sine reference.
pub(crate) const BURST_PHASE: f64 = PI;

/// Subcarrier phase at absolute sample `n`, reduced to one cycle.
pub(crate) fn subcarrier_phase(timing: &LineTiming, n: f64) -> f64 {
    2.0 * PI * (n * timing.subcarrier_frequency / timing.sample_rate).fract()
}

pub fn split_fields(frame: &RgbFrame) -> [Field; 2] {
    [Parity::Odd, Parity::Even].map(|parity| Field {
        parity,
        lines: (0..FIELD_LINES)
            .map(|j| {
                frame
                    .row(2 * j + parity.first_row())
                    .iter()
                    .map(|&p| rgb_to_yiq(p))
                    .collect()
            })
            .collect(),
    })
}

/// Writes one line starting at absolute sample `start`: hsync, breezeway,
/// burst, back porch, then pixels (or blank when `pixels` is `None`).
fn render_line(
    out: &mut [f64],
    start: usize,
    pixels: Option<&[super::Yiq]>,
    timing: &LineTiming,
    levels: &Levels,
) {
    let hsync = timing.hsync_samples();
    let (burst_start, burst_end) = (timing.burst_start(), timing.burst_end());
    let first = timing.first_pixel();
    let step = timing.pixel_step();
    let span = levels.white - levels.black;
    for (s, v) in out.iter_mut().enumerate() {
        let n = (start + s) as f64;
        *v = if s < hsync {
            levels.sync
        } else if s >= burst_start && s < burst_end {
            levels.blank + levels.burst_amplitude * (subcarrier_phase(timing, n) + BURST_PHASE).sin()
        } else {
            let p = ((s as f64 - first) / step).floor();
            match pixels {
                Some(px) if p >= 0.0 && (p as usize) < WIDTH => {
                    let c = px[p as usize];
                    let phase = subcarrier_phase(timing, n) + CHROMA_AXIS_PHASE;
                    levels.black + span * (c.y + c.q * phase.sin() + c.i * phase.cos())
                }
                _ => levels.blank,
            }
        };
    }
}

fn line_start(timing: &LineTiming, line_index: usize, parity: Parity) -> usize {
    let k = parity.index();
    timing.field_start(k) + timing.active_line_offset(k) + line_index * timing.line_samples()
}

/// First sample (hsync leading edge) of the line carrying frame row `row`.
pub fn row_start(timing: &LineTiming, row: usize) -> usize {
    let parity = if row % 2 == Parity::Odd.first_row() {
        Parity::Odd
    } else {
        Parity::Even
    };
    line_start(timing, row / 2, parity)
}

/// Samples of active line `line_index` of the given field, placed at its
/// absolute position in the frame so the subcarrier phase is continuous.
pub fn encode_line(
    pixels: &[super::Yiq],
    timing: &LineTiming,
    levels: &Levels,
    line_index: usize,
    parity: Parity,
) -> Result<Vec<f64>, NtscError> {
    if pixels.len() != WIDTH {
        return Err(NtscError::Format(format!(
            "line needs {WIDTH} pixels, got {}",
            pixels.len()
        )));
    }
    if line_index >= FIELD_LINES {
        return Err(NtscError::Format(format!("line index {line_index} out of range")));
    }
    timing.validate()?;
    let mut out = vec![0.0; timing.line_samples()];
    render_line(
        &mut out,
        line_start(timing, line_index, parity),
        Some(pixels),
        timing,
        levels,
    );
    Ok(out)
}

/// Two fields, odd first, each preceded by its vertical sync interval.
pub fn encode_frame(
    frame: &RgbFrame,
    timing: &LineTiming,
    levels: &Levels,
) -> Result<CompositeWaveform, NtscError> {
    timing.validate()?;
    levels.validate()?;
    let line = timing.line_samples();
    let mut samples = vec![levels.blank; timing.frame_samples()];
    for field in split_fields(frame) {
        let k = field.parity.index();
        let field_start = timing.field_start(k);
        let active = field_start + timing.active_line_offset(k);
        samples[field_start..field_start + timing.vsync_samples()].fill(levels.sync);

        // blank lines with sync and burst between the trigger and the picture
        let mut start = active;
        while start >= field_start + timing.vsync_samples() + line {
            start -= line;
            render_line(&mut samples[start..start + line], start, None, timing, levels);
        }
        samples[active..active + FIELD_LINES * line]
            .par_chunks_mut(line)
            .zip(field.lines.par_iter())
            .enumerate()
            .for_each(|(j, (out, pixels))| {
                render_line(out, active + j * line, Some(pixels), timing, levels);
            });
    }
    Ok(CompositeWaveform {
        waveform: Waveform::new(timing.sample_rate, samples, 0.0)?,
        timing: *timing,
        levels: *levels,
    })
}
