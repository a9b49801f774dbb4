use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{write_atomic, ExperimentConfig, PipelineError, Setting};
use crate::atomic::{angular_mhz, optimal_rf_bias, response_times, BeamGeometry, DriveParameters};
use crate::channel::{
    atomic_receive, normalized_detector_gain, write_waveform, ChannelConfig, ReceiveDiagnostics, Waveform,
    MIN_SAMPLES_PER_TAU,
};
use crate::metrics::{color_verdict, ReceptionScore};
use crate::ntsc::{
    color_bars, decode_frame, encode_frame, read_ppm, report_to_string, row_start, write_ppm,
    CompositeWaveform, DecodeReport, Levels, NtscError, RgbFrame,
};

pub const SWEEP_HEADER: &str = "fwhm_um,psnr_db,saturation,lock_fraction,verdict";

/// The configured input frame, or the built-in color bars.
pub fn load_input(config: &ExperimentConfig) -> Result<RgbFrame, PipelineError> {
    match &config.input {
        None => Ok(color_bars()),
        Some(path) => {
            let file =
                fs::File::open(path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
            read_ppm(BufReader::new(file))
                .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
        }
    }
}

/// Channel for one beam size. With `rf_bias_mhz=auto` the bias puts the
/// middle of the modulation range on the steepest discriminator slope;
/// with `detector_gain=auto` a full-scale baseband step maps to a unit
/// swing before the local-oscillator factor.
pub fn channel_config(
    config: &ExperimentConfig,
    fwhm_um: f64,
    seed: u64,
) -> Result<ChannelConfig, PipelineError> {
    let coupling = config.coupling_fwhm_um.unwrap_or(fwhm_um);
    let geometry = BeamGeometry::new(fwhm_um * 1e-6, coupling * 1e-6)?;
    let ensemble = config.ensemble();
    let drive = DriveParameters::locked(
        angular_mhz(config.probe_rabi_mhz),
        angular_mhz(config.coupling_rabi_mhz),
    );
    let mut channel = ChannelConfig::new(geometry, drive);
    let bias = match config.rf_bias_mhz {
        Setting::Fixed(b) => angular_mhz(b),
        Setting::Auto => {
            let best = optimal_rf_bias(
                &drive,
                &channel.ladder,
                &geometry,
                &ensemble,
                config.bias_search_limit(),
            )?;
            best / (1.0 + 0.5 * config.modulation_depth)
        }
    };
    channel.drive = drive.with_rf(bias);
    channel.ensemble = ensemble;
    channel.calibration = config.mode;
    channel.detection_mode = config.detection;
    channel.detector_bandwidth = config.detector_bandwidth_hz;
    channel.noise_amplitude_density = config.noise_density;
    channel.modulation_depth = config.modulation_depth;
    channel.rng_seed = seed;
    // the optical pre-amplification of homodyne detection stays on top of
    // the automatic gain
    channel.detector_gain = match config.detector_gain {
        Setting::Fixed(g) => g,
        Setting::Auto => normalized_detector_gain(&channel, channel.local_oscillator_factor())?,
    };
    Ok(channel)
}

/// In-memory result of one encode -> channel -> decode run.
#[derive(Debug)]
pub struct Simulation {
    pub channel: ChannelConfig,
    /// Channel samples per video sample.
    pub oversampling: usize,
    pub sent: CompositeWaveform,
    /// Detector output, sign-corrected so that sync is the most negative
    /// excursion.
    pub received: CompositeWaveform,
    pub diagnostics: ReceiveDiagnostics,
    pub decoded: Result<(RgbFrame, DecodeReport), NtscError>,
}

impl Simulation {
    pub fn score(&self, reference: &RgbFrame) -> Option<ReceptionScore> {
        self.decoded
            .as_ref()
            .ok()
            .map(|(frame, report)| color_verdict(report, frame, reference))
    }
}

/// Integer rate increase that resolves the fastest atomic time constant.
fn oversampling(channel: &ChannelConfig, sample_rate: f64) -> Result<usize, PipelineError> {
    let r = response_times(&channel.geometry, &channel.ensemble, channel.calibration)?;
    let tau = r.tau_rise().min(r.tau_fall());
    Ok((MIN_SAMPLES_PER_TAU / (sample_rate * tau)).ceil().max(1.0) as usize)
}

/// Linear interpolation to `factor` times the rate; original samples keep
/// their indices times `factor`.
fn upsample(w: &Waveform, factor: usize) -> Waveform {
    if factor == 1 || w.len() < 2 {
        return w.clone();
    }
    let x = &w.samples;
    let mut out = Vec::with_capacity(x.len() * factor);
    for pair in x.windows(2) {
        for k in 0..factor {
            out.push(pair[0] + (pair[1] - pair[0]) * k as f64 / factor as f64);
        }
    }
    out.push(x[x.len() - 1]);
    Waveform {
        sample_rate: w.sample_rate * factor as f64,
        samples: out,
        start_time: w.start_time,
    }
}

pub fn simulate_frame(
    config: &ExperimentConfig,
    frame: &RgbFrame,
    fwhm_um: f64,
    seed: u64,
) -> Result<Simulation, PipelineError> {
    config.validate()?;
    let timing = config.timing();
    let levels = Levels::default();
    let sent = encode_frame(frame, &timing, &levels)?;
    let channel = channel_config(config, fwhm_um, seed)?;
    let factor = oversampling(&channel, timing.sample_rate)?;
    let rx = atomic_receive(&upsample(&sent.to_baseband(), factor), &channel)?;
    let polarity = rx.diagnostics.polarity;
    let waveform = rx.waveform.with_samples(
        rx.waveform
            .samples
            .iter()
            .step_by(factor)
            .map(|v| v * polarity)
            .collect(),
    );
    let waveform = Waveform {
        sample_rate: timing.sample_rate,
        ..waveform
    };
    let received = CompositeWaveform {
        waveform,
        timing,
        levels,
    };
    let decoded = decode_frame(&received);
    Ok(Simulation {
        channel,
        oversampling: factor,
        sent,
        received,
        diagnostics: rx.diagnostics,
        decoded,
    })
}

/// Files written by one run and its score, when decoding succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub fwhm_um: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub score: ReceptionScore,
}

fn resolve_seed(config: &ExperimentConfig) -> u64 {
    config.seed.unwrap_or_else(rand::random)
}

fn run_header(config: &ExperimentConfig, sim: &Simulation, fwhm_um: f64, seed: u64, status: &str) -> String {
    let c = &sim.channel;
    let d = &sim.diagnostics;
    let mut s = String::new();
    let _ = write!(
        s,
        "status={status}\nseed={seed}\nfwhm_um={fwhm_um}\ncoupling_fwhm_um={}\ninput={}\nmode={}\ndetection={}\n\
         rf_bias_mhz={:.6}\ndetector_gain={:.6e}\nnoise_density={}\nnoise_rms={:.6e}\nmodulation_depth={}\n\
         detector_bandwidth_hz={}\noversampling={}\ntau_rise_us={:.6}\ntau_fall_us={:.6}\ncompression={}\npolarity={}\n",
        config.coupling_fwhm_um.unwrap_or(fwhm_um),
        config.input.as_ref().map_or_else(|| "builtin:color_bars".to_string(), |p| p.display().to_string()),
        c.calibration,
        c.detection_mode,
        c.drive.rf_rabi / angular_mhz(1.0),
        c.detector_gain,
        c.noise_amplitude_density,
        c.noise_rms(),
        c.modulation_depth,
        c.detector_bandwidth,
        sim.oversampling,
        d.tau_rise * 1e6,
        d.tau_fall * 1e6,
        d.compression,
        d.polarity,
    );
    s
}

fn dump_row(sim: &Simulation, row: usize, dir: &Path) -> Result<(), PipelineError> {
    let timing = &sim.sent.timing;
    let start = row_start(timing, row);
    let end = start + timing.line_samples();
    for (name, wf) in [("sent", &sim.sent.waveform), ("received", &sim.received.waveform)] {
        let mut buf = Vec::new();
        write_waveform(&wf.slice(start, end.min(wf.len())), &mut buf)?;
        write_atomic(&dir.join(format!("{name}_row{row}.rydwav")), &buf)?;
    }
    Ok(())
}

fn run_one(
    config: &ExperimentConfig,
    frame: &RgbFrame,
    fwhm_um: f64,
    seed: u64,
    out_dir: &Path,
) -> Result<RunSummary, PipelineError> {
    let sim = simulate_frame(config, frame, fwhm_um, seed)?;
    fs::create_dir_all(out_dir)?;
    match &sim.decoded {
        Err(NtscError::Sync(msg)) => {
            let mut report = run_header(config, &sim, fwhm_um, seed, "sync_failed");
            let _ = writeln!(report, "error={msg}");
            write_atomic(&out_dir.join("report.txt"), report.as_bytes())?;
            if config.dump_waveforms {
                dump_row(&sim, config.dump_row, out_dir)?;
            }
            Err(PipelineError::Sync(msg.clone()))
        }
        Err(e) => Err(PipelineError::Config(e.to_string())),
        Ok((decoded, report)) => {
            let score = color_verdict(report, decoded, frame);
            let mut ppm = Vec::new();
            write_ppm(decoded, &mut ppm)?;
            let mut text = run_header(config, &sim, fwhm_um, seed, "ok");
            text.push_str(&report_to_string(report));
            write_atomic(&out_dir.join("decoded.ppm"), &ppm)?;
            write_atomic(&out_dir.join("report.txt"), text.as_bytes())?;
            write_atomic(&out_dir.join("score.txt"), score.to_text().as_bytes())?;
            if config.dump_waveforms {
                dump_row(&sim, config.dump_row, out_dir)?;
            }
            Ok(RunSummary {
                fwhm_um,
                seed,
                out_dir: out_dir.to_path_buf(),
                score,
            })
        }
    }
}

/// One full-frame run at `fwhm_um`, writing `decoded.ppm`, `report.txt`
/// and `score.txt` into the configured output directory. The input is
/// checked before anything is created. On sync failure only the report is
/// written and a [`PipelineError::Sync`] is returned.
pub fn run_simulation(config: &ExperimentConfig, fwhm_um: f64) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let frame = load_input(config)?;
    run_one(config, &frame, fwhm_um, resolve_seed(config), &config.out_dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fwhm_um: f64,
    pub result: Result<ReceptionScore, String>,
}

impl SweepRow {
    fn csv(&self) -> String {
        match &self.result {
            Ok(s) => format!(
                "{},{:.4},{:.6},{:.6},{}",
                self.fwhm_um, s.psnr_db, s.mean_saturation, s.burst_lock_fraction, s.color_verdict
            ),
            Err(_) => format!("{},nan,nan,nan,error", self.fwhm_um),
        }
    }
}

/// Sub-directory of a sweep entry.
pub fn sweep_dir(out_dir: &Path, fwhm_um: f64) -> PathBuf {
    out_dir.join(format!("fwhm_{fwhm_um}um"))
}

/// Runs every configured beam size (at least two) with a shared seed,
/// up to `jobs` at once, and writes `sweep.csv` ordered by FWHM. A failed
/// entry is recorded as an `error` row and its message in `error.txt`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, PipelineError> {
    config.validate()?;
    let mut sizes = config.fwhm_um.clone();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(PipelineError::Config(
            "a sweep needs at least two distinct FWHM values".into(),
        ));
    }
    let frame = load_input(config)?;
    let seed = resolve_seed(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    fs::create_dir_all(&config.out_dir)?;
    let rows: Vec<SweepRow> = pool.install(|| {
        sizes
            .par_iter()
            .map(|&fwhm| {
                let dir = sweep_dir(&config.out_dir, fwhm);
                let result = run_one(config, &frame, fwhm, seed, &dir)
                    .map(|r| r.score)
                    .map_err(|e| {
                        let msg = e.to_string();
                        let _ = fs::create_dir_all(&dir).and_then(|_| {
                            write_atomic(&dir.join("error.txt"), format!("{msg}\n").as_bytes())
                        });
                        msg
                    });
                SweepRow {
                    fwhm_um: fwhm,
                    result,
                }
            })
            .collect()
    });
    let mut csv = format!("{SWEEP_HEADER}\n");
    for row in &rows {
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    write_atomic(&config.out_dir.join("sweep.csv"), csv.as_bytes())?;
    Ok(rows)
}
