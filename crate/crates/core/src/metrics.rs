//! Reception clarity and colour recovery scores.

use crate::ntsc::{rgb_to_yiq, DecodeReport, RgbFrame, MAX_SATURATION};

pub const PSNR_CAP_DB: f64 = 99.0;
pub const LOCK_THRESHOLD: f64 = 0.9;
/// Decoded saturation must reach this fraction of the reference's.
pub const SATURATION_RATIO: f64 = 0.5;
pub const MONOCHROME_PSNR_DB: f64 = 15.0;
/// Reference pixels below this normalized saturation carry no usable hue.
pub const HUE_MIN_SATURATION: f64 = 0.1;

/// Peak signal-to-noise ratio over all three channels, capped at 99 dB.
pub fn psnr(a: &RgbFrame, b: &RgbFrame) -> f64 {
    let (sum, n) = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |k| p[k] as f64 - q[k] as f64))
        .fold((0.0, 0usize), |(s, n), d| (s + d * d, n + 1));
    let mse = sum / n as f64;
    if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Mean chroma magnitude normalized by the largest legal value.
pub fn mean_chroma_saturation(frame: &RgbFrame) -> f64 {
    let px = frame.pixels();
    px.iter().map(|&p| rgb_to_yiq(p).saturation()).sum::<f64>() / px.len() as f64 / MAX_SATURATION
}

/// Mean absolute hue difference in degrees over pixels whose reference
/// saturation (normalized) is at least `min_saturation`. `None` when no
/// pixel qualifies.
pub fn mean_hue_error(decoded: &RgbFrame, reference: &RgbFrame, min_saturation: f64) -> Option<f64> {
    let (sum, n) = decoded
        .pixels()
        .iter()
        .zip(reference.pixels())
        .filter_map(|(&d, &r)| {
            let r = rgb_to_yiq(r);
            if r.saturation() < min_saturation * MAX_SATURATION {
                return None;
            }
            let d = rgb_to_yiq(d);
            let diff = (d.i.atan2(d.q) - r.i.atan2(r.q)).to_degrees();
            Some((diff + 180.0).rem_euclid(360.0) - 180.0)
        })
        .fold((0.0, 0usize), |(s, n), e| (s + e.abs(), n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ColorVerdict {
    Failed,
    Monochrome,
    Color,
}

impl std::fmt::Display for ColorVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Color => "color",
            Self::Monochrome => "monochrome",
            Self::Failed => "failed",
        })
    }
}

impl std::str::FromStr for ColorVerdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "color" => Ok(Self::Color),
            "monochrome" => Ok(Self::Monochrome),
            "failed" => Ok(Self::Failed),
            other => Err(format!("unknown verdict '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionScore {
    pub psnr_db: f64,
    pub mean_saturation: f64,
    pub reference_saturation: f64,
    pub burst_lock_fraction: f64,
    pub hue_error_deg: Option<f64>,
    pub color_verdict: ColorVerdict,
}

impl ReceptionScore {
    pub fn to_text(&self) -> String {
        let hue = self
            .hue_error_deg
            .map_or_else(|| "nan".to_string(), |h| format!("{h:.4}"));
        format!(
            "psnr_db={:.4}\nmean_saturation={:.6}\nreference_saturation={:.6}\nburst_lock_fraction={:.6}\n\
             hue_error_deg={hue}\ncolor_verdict={}\n",
            self.psnr_db,
            self.mean_saturation,
            self.reference_saturation,
            self.burst_lock_fraction,
            self.color_verdict
        )
    }
}

/// Verdict from threshold constants; colour needs both lock and saturation.
pub fn verdict(
    psnr_db: f64,
    mean_saturation: f64,
    reference_saturation: f64,
    lock_fraction: f64,
) -> ColorVerdict {
    let saturated = reference_saturation > 0.0 && mean_saturation >= SATURATION_RATIO * reference_saturation;
    if lock_fraction >= LOCK_THRESHOLD && saturated {
        ColorVerdict::Color
    } else if psnr_db >= MONOCHROME_PSNR_DB {
        ColorVerdict::Monochrome
    } else {
        ColorVerdict::Failed
    }
}

pub fn color_verdict(report: &DecodeReport, frame: &RgbFrame, reference: &RgbFrame) -> ReceptionScore {
    let psnr_db = psnr(frame, reference);
    let mean_saturation = mean_chroma_saturation(frame);
    let reference_saturation = mean_chroma_saturation(reference);
    let burst_lock_fraction = report.burst_lock_fraction();
    ReceptionScore {
        psnr_db,
        mean_saturation,
        reference_saturation,
        burst_lock_fraction,
        hue_error_deg: mean_hue_error(frame, reference, HUE_MIN_SATURATION),
        color_verdict: verdict(
            psnr_db,
            mean_saturation,
            reference_saturation,
            burst_lock_fraction,
        ),
    }
}
