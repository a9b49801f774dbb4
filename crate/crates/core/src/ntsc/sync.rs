use super::{Levels, LineTiming, NtscError, Parity, FIELD_LINES};
use crate::channel::Waveform;

/// Runs separated by fewer samples than this are one pulse.
const DEBOUNCE_SAMPLES: usize = 4;
/// Allowed deviation of a line period before the line is flagged.
const PERIOD_TOLERANCE: f64 = 0.05;
const HISTOGRAM_BINS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSync {
    /// Fractional sample index of the line start (hsync leading edge).
    pub start: f64,
    pub field: usize,
    pub line: usize,
    /// False when no hsync pulse was found near the expected position; the
    /// start is then extrapolated from the field trigger.
    pub found: bool,
    /// Distance to the previous detected hsync deviates from the line
    /// period by more than 5 %.
    pub irregular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSync {
    pub start: f64,
    pub parity: Parity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncMap {
    /// Levels estimated from the signal.
    pub levels: Levels,
    pub threshold: f64,
    pub fields: Vec<FieldSync>,
    /// Active lines of every detected field, in signal order.
    pub lines: Vec<LineSync>,
    pub hsync_pulses: usize,
    /// Median hsync spacing, seconds.
    pub line_period: f64,
}

impl SyncMap {
    pub fn lines_found(&self) -> usize {
        self.lines.iter().filter(|l| l.found).count()
    }

    pub fn irregular_lines(&self) -> usize {
        self.lines.iter().filter(|l| l.irregular).count()
    }
}

#[derive(Debug, Clone, Copy)]
struct Pulse {
    /// Fractional index of the falling threshold crossing.
    lead: f64,
    width: usize,
}

fn find_pulses(x: &[f64], threshold: f64) -> Vec<Pulse> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < x.len() {
        if x[k] < threshold {
            let start = k;
            while k < x.len() && x[k] < threshold {
                k += 1;
            }
            match runs.last_mut() {
                Some(last) if start - last.1 < DEBOUNCE_SAMPLES => last.1 = k,
                _ => runs.push((start, k)),
            }
        } else {
            k += 1;
        }
    }
    runs.into_iter()
        .map(|(start, end)| {
            let lead = if start == 0 {
                -0.5
            } else {
                let (a, b) = (x[start - 1], x[start]);
                (start - 1) as f64 + (a - threshold) / (a - b)
            };
            Pulse {
                lead,
                width: end - start,
            }
        })
        .collect()
}

fn percentile(x: &[f64], p: f64) -> f64 {
    let mut v = x.to_vec();
    let k = ((p * (v.len() - 1) as f64).round() as usize).min(v.len() - 1);
    *v.select_nth_unstable_by(k, f64::total_cmp).1
}

fn hsync_pulses(pulses: &[Pulse], timing: &LineTiming) -> Vec<f64> {
    let h = timing.hsync_samples();
    pulses
        .iter()
        .filter(|p| 2 * p.width >= h && p.width <= 2 * h)
        .map(|p| p.lead + 0.5)
        .collect()
}

/// Sync level from the 1st percentile of all samples; blank level from the
/// most common back-porch value; black and white from the nominal ratios.
pub fn estimate_levels(waveform: &Waveform, timing: &LineTiming) -> Result<Levels, NtscError> {
    let x = &waveform.samples;
    if x.len() < timing.line_samples() {
        return Err(NtscError::Sync("waveform shorter than one line".into()));
    }
    let sync = percentile(x, 0.01);
    let median = percentile(x, 0.5);
    let top = percentile(x, 0.99);
    if !(top > sync) {
        return Err(NtscError::Sync("flat signal".into()));
    }
    let provisional = sync + 0.25 * (median.max(sync + 0.1 * (top - sync)) - sync);
    let starts = hsync_pulses(&find_pulses(x, provisional), timing);
    if starts.is_empty() {
        return Err(NtscError::Sync("no sync pulses found".into()));
    }

    let (a, b) = (timing.burst_end() + 2, timing.first_pixel() as usize);
    let bin = |v: f64| (((v - sync) / (top - sync)) * HISTOGRAM_BINS as f64).floor();
    let mut hist = vec![0usize; HISTOGRAM_BINS];
    let mut porch = Vec::new();
    for &s in &starts {
        let s = s.round() as usize;
        for &v in x.iter().take(s + b).skip(s + a) {
            let k = bin(v);
            if k >= 0.0 && (k as usize) < HISTOGRAM_BINS {
                hist[k as usize] += 1;
                porch.push(v);
            }
        }
    }
    if porch.is_empty() {
        return Err(NtscError::Sync("no back-porch samples".into()));
    }
    let mode = hist
        .iter()
        .enumerate()
        .max_by_key(|(_, c)| **c)
        .map(|(k, _)| k as f64)
        .unwrap();
    let near: Vec<f64> = porch
        .into_iter()
        .filter(|&v| (bin(v) - mode).abs() <= 1.0)
        .collect();
    let blank = near.iter().sum::<f64>() / near.len() as f64;
    if !(blank > sync) {
        return Err(NtscError::Sync("blank level not above sync".into()));
    }
    Ok(Levels::scaled_from(&Levels::default(), sync, blank))
}

/// Finds field triggers and active-line starts by thresholding midway
/// between the estimated sync and blank levels.
///
/// Fields alternate in parity starting with odd at the first trigger.
pub fn detect_sync(waveform: &Waveform, timing: &LineTiming) -> Result<SyncMap, NtscError> {
    timing.validate()?;
    let levels = estimate_levels(waveform, timing)?;
    let threshold = 0.5 * (levels.sync + levels.blank);
    let pulses = find_pulses(&waveform.samples, threshold);
    let hsyncs = hsync_pulses(&pulses, timing);
    if hsyncs.is_empty() {
        return Err(NtscError::Sync("no hsync pulses above threshold".into()));
    }
    let vsync_min = timing.vsync_samples() / 2;
    let fields: Vec<FieldSync> = pulses
        .iter()
        .filter(|p| p.width >= vsync_min)
        .enumerate()
        .map(|(k, p)| FieldSync {
            start: p.lead + 0.5,
            parity: if k % 2 == 0 { Parity::Odd } else { Parity::Even },
        })
        .collect();
    if fields.is_empty() {
        return Err(NtscError::Sync("no vertical sync found".into()));
    }

    let line = timing.line_samples() as f64;
    let mut spacings: Vec<f64> = hsyncs
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| (d / line - 1.0).abs() <= PERIOD_TOLERANCE)
        .collect();
    let line_period = if spacings.is_empty() {
        timing.line_period
    } else {
        spacings.sort_by(f64::total_cmp);
        spacings[spacings.len() / 2] / timing.sample_rate
    };

    let mut lines = Vec::with_capacity(fields.len() * FIELD_LINES);
    for (f, field) in fields.iter().enumerate() {
        let offset = timing.active_line_offset(field.parity.index()) as f64;
        let mut previous: Option<f64> = None;
        for j in 0..FIELD_LINES {
            let expected = field.start + offset + j as f64 * line;
            let k = hsyncs.partition_point(|&s| s < expected - 0.5 * line);
            let hit = hsyncs
                .get(k)
                .copied()
                .filter(|s| (s - expected).abs() < 0.5 * line);
            let irregular = match (hit, previous) {
                (Some(s), Some(p)) => ((s - p) / line - 1.0).abs() > PERIOD_TOLERANCE,
                _ => false,
            };
            previous = hit.or(previous.map(|p| p + line));
            lines.push(LineSync {
                start: hit.unwrap_or(expected),
                field: f,
                line: j,
                found: hit.is_some(),
                irregular,
            });
        }
        if let Some(first) = lines.iter_mut().rev().nth(FIELD_LINES - 1) {
            // first line of the field: compare against the blank line ahead
            let k = hsyncs.partition_point(|&s| s < first.start - 0.5);
            if first.found && k > 0 {
                first.irregular = ((first.start - hsyncs[k - 1]) / line - 1.0).abs() > PERIOD_TOLERANCE;
            }
        }
    }
    if lines.iter().all(|l| !l.found) {
        return Err(NtscError::Sync("no active lines found".into()));
    }
    Ok(SyncMap {
        levels,
        threshold,
        fields,
        lines,
        hsync_pulses: hsyncs.len(),
        line_period,
    })
}
