//! `RYDWAV1` waveform files: one ASCII header line
//! `RYDWAV1 <sample_rate_hz> <count> <start_time_s>\n` followed by `count`
//! little-endian IEEE-754 binary32 samples.

use std::io::{BufRead, Write};

use super::{ChannelError, Waveform};

pub const WAVEFORM_MAGIC: &str = "RYDWAV1";

pub fn write_waveform<W: Write>(waveform: &Waveform, mut out: W) -> Result<(), ChannelError> {
    writeln!(
        out,
        "{WAVEFORM_MAGIC} {} {} {}",
        waveform.sample_rate,
        waveform.samples.len(),
        waveform.start_time
    )?;
    let mut bytes = Vec::with_capacity(4 * waveform.samples.len());
    for &s in &waveform.samples {
        bytes.extend_from_slice(&(s as f32).to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

pub fn read_waveform<R: BufRead>(mut input: R) -> Result<Waveform, ChannelError> {
    let mut header = Vec::new();
    input.read_until(b'\n', &mut header)?;
    let header = String::from_utf8(header).map_err(|_| ChannelError::Format("header is not ASCII".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != WAVEFORM_MAGIC {
        return Err(ChannelError::Format(format!(
            "expected '{WAVEFORM_MAGIC} <rate> <count> <start>' header, got '{}'",
            header.trim_end()
        )));
    }
    let parse = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| ChannelError::Format(format!("bad {what} '{s}'")))
    };
    let sample_rate = parse(fields[1], "sample rate")?;
    let count: usize = fields[2]
        .parse()
        .map_err(|_| ChannelError::Format(format!("bad count '{}'", fields[2])))?;
    let start_time = parse(fields[3], "start time")?;

    let mut bytes = vec![0u8; 4 * count];
    input
        .read_exact(&mut bytes)
        .map_err(|_| ChannelError::Format(format!("truncated payload, expected {count} samples")))?;
    let samples = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Waveform::new(sample_rate, samples, start_time)
}

/// `time_s,amplitude` rows for plotting.
pub fn waveform_to_csv(waveform: &Waveform) -> String {
    let mut out = String::with_capacity(24 * waveform.len() + 16);
    out.push_str("time_s,amplitude\n");
    for (k, s) in waveform.samples.iter().enumerate() {
        out.push_str(&format!("{:.9e},{}\n", waveform.time(k), s));
    }
    out
}
