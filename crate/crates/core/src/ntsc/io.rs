use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use super::{DecodeReport, Levels, LineTiming, NtscError, RgbFrame, HEIGHT, WIDTH};

pub const PPM_HEADER: &str = "P6\n720 480\n255\n";

pub fn write_ppm<W: Write>(frame: &RgbFrame, mut out: W) -> Result<(), NtscError> {
    out.write_all(PPM_HEADER.as_bytes())?;
    let bytes: Vec<u8> = frame.pixels().iter().flatten().copied().collect();
    out.write_all(&bytes)?;
    Ok(())
}

fn ppm_token<R: BufRead>(input: &mut R) -> Result<String, NtscError> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if input.read(&mut byte)? == 0 {
            break;
        }
        match byte[0] {
            b'#' if token.is_empty() => {
                let mut skip = Vec::new();
                input.read_until(b'\n', &mut skip)?;
            }
            b if b.is_ascii_whitespace() => {
                if !token.is_empty() {
                    break;
                }
            }
            b => token.push(b),
        }
    }
    String::from_utf8(token).map_err(|_| NtscError::Format("non-ASCII PPM header".into()))
}

/// Reads a binary 720x480 maxval-255 portable pixmap.
pub fn read_ppm<R: BufRead>(mut input: R) -> Result<RgbFrame, NtscError> {
    let magic = ppm_token(&mut input)?;
    if magic != "P6" {
        return Err(NtscError::Format(format!("expected P6 pixmap, got '{magic}'")));
    }
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        let t = ppm_token(&mut input)?;
        *d = t
            .parse()
            .map_err(|_| NtscError::Format(format!("bad PPM header field '{t}'")))?;
    }
    if dims != [WIDTH, HEIGHT, 255] {
        return Err(NtscError::Format(format!(
            "expected 720x480 maxval 255, got {}x{} maxval {}",
            dims[0], dims[1], dims[2]
        )));
    }
    let mut bytes = vec![0u8; 3 * WIDTH * HEIGHT];
    input
        .read_exact(&mut bytes)
        .map_err(|_| NtscError::Format("truncated pixmap".into()))?;
    RgbFrame::new(bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, NtscError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("line,") {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| NtscError::Metadata(format!("line {}: expected key=value", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, NtscError> {
    let v = map
        .get(key)
        .ok_or_else(|| NtscError::Metadata(format!("missing key '{key}'")))?;
    v.parse()
        .map_err(|_| NtscError::Metadata(format!("bad value '{v}' for '{key}'")))
}

/// Sidecar text for a composite waveform file.
pub fn write_metadata<W: Write>(timing: &LineTiming, levels: &Levels, mut out: W) -> Result<(), NtscError> {
    let t = timing;
    write!(
        out,
        "line_period={}\nhsync_width={}\nbreezeway={}\nburst_cycles={}\nback_porch={}\n\
         active_duration={}\nsubcarrier_frequency={}\nsample_rate={}\nfield_rate={}\nvsync_lines={}\n\
         sync_level={}\nblank_level={}\nblack_level={}\nwhite_level={}\nburst_amplitude={}\n",
        t.line_period,
        t.hsync_width,
        t.breezeway,
        t.burst_cycles,
        t.back_porch,
        t.active_duration,
        t.subcarrier_frequency,
        t.sample_rate,
        t.field_rate,
        t.vsync_lines,
        levels.sync,
        levels.blank,
        levels.black,
        levels.white,
        levels.burst_amplitude
    )?;
    Ok(())
}

pub fn read_metadata<R: Read>(mut input: R) -> Result<(LineTiming, Levels), NtscError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let m = parse_kv(&text)?;
    let timing = LineTiming {
        line_period: get(&m, "line_period")?,
        hsync_width: get(&m, "hsync_width")?,
        breezeway: get(&m, "breezeway")?,
        burst_cycles: get(&m, "burst_cycles")?,
        back_porch: get(&m, "back_porch")?,
        active_duration: get(&m, "active_duration")?,
        subcarrier_frequency: get(&m, "subcarrier_frequency")?,
        sample_rate: get(&m, "sample_rate")?,
        field_rate: get(&m, "field_rate")?,
        vsync_lines: get(&m, "vsync_lines")?,
    };
    let levels = Levels {
        sync: get(&m, "sync_level")?,
        blank: get(&m, "blank_level")?,
        black: get(&m, "black_level")?,
        white: get(&m, "white_level")?,
        burst_amplitude: get(&m, "burst_amplitude")?,
    };
    timing.validate()?;
    levels.validate()?;
    Ok((timing, levels))
}

/// `key=value` summary followed by one `line,<row>,locked,<0|1>` row per
/// frame row.
pub fn report_to_string(report: &DecodeReport) -> String {
    let mut s = format!(
        "lines_detected={}\nburst_locked_lines={}\nburst_lock_fraction={:.6}\nmean_burst_amplitude={:.6}\n\
         missing_lines={}\nirregular_lines={}\nfields_detected={}\nline_period_s={:.9e}\n\
         sync_level={:.6}\nblank_level={:.6}\n",
        report.lines_detected,
        report.burst_locked_lines,
        report.burst_lock_fraction(),
        report.mean_burst_amplitude,
        report.missing_lines,
        report.irregular_lines,
        report.fields_detected,
        report.line_period,
        report.levels.sync,
        report.levels.blank,
    );
    for (row, on) in report.chroma_enabled.iter().enumerate() {
        s.push_str(&format!("line,{row},locked,{}\n", u8::from(*on)));
    }
    s
}

/// Summary keys and the per-row lock flags of a serialized report.
pub fn parse_report(text: &str) -> Result<(BTreeMap<String, String>, Vec<bool>), NtscError> {
    let map = parse_kv(text)?;
    let mut flags = Vec::new();
    for line in text.lines().filter(|l| l.starts_with("line,")) {
        let parts: Vec<&str> = line.split(',').collect();
        match parts.as_slice() {
            ["line", _, "locked", v @ ("0" | "1")] => flags.push(*v == "1"),
            _ => return Err(NtscError::Metadata(format!("bad report row '{line}'"))),
        }
    }
    Ok((map, flags))
}
