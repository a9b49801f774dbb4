use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rydberg_tv::channel::{read_waveform, write_waveform};
use rydberg_tv::metrics::color_verdict;
use rydberg_tv::ntsc::{
    decode_frame, encode_frame, format_mbps, nominal_bitrate, read_metadata, report_to_string,
    write_metadata, write_ppm, CompositeWaveform, Levels,
};
use rydberg_tv::pipeline::{
    load_input, run_eit_study, run_simulation, run_sweep, write_atomic, ExperimentConfig, PipelineError,
};

#[derive(Parser)]
#[command(
    name = "rydtv",
    version,
    about = "Rydberg-atom receiver simulator for NTSC composite video"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a frame into composite.rydwav and composite.meta.
    Encode(ConfigArgs),
    /// Decode a composite waveform file.
    Decode {
        /// Reference frame to score against.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Send one frame through the atomic receiver at a single beam size.
    Simulate(ConfigArgs),
    /// Run `simulate` for every beam size and summarize in sweep.csv.
    Sweep(ConfigArgs),
    /// EIT spectra, fitted height and width, and response-time tables.
    Eit(ConfigArgs),
    /// Raw bit rate of uncompressed interlaced video.
    Bitrate {
        #[arg(long, default_value_t = 60)]
        fields: u64,
        #[arg(long, default_value_t = 240)]
        lines: u64,
        #[arg(long, default_value_t = 720)]
        pixels: u64,
        #[arg(long, default_value_t = 24)]
        bits: u64,
    },
}

/// Every configuration key as a flag; values override `--config`.
#[derive(Args, Default)]
struct ConfigArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Probe beam FWHM in um; repeatable or comma separated.
    #[arg(long)]
    fwhm_um: Vec<String>,
    #[arg(long)]
    coupling_fwhm_um: Option<String>,
    #[arg(long)]
    mean_velocity: Option<String>,
    #[arg(long)]
    density_scale: Option<String>,
    #[arg(long)]
    probe_rabi_mhz: Option<String>,
    #[arg(long)]
    coupling_rabi_mhz: Option<String>,
    #[arg(long)]
    rf_bias_mhz: Option<String>,
    #[arg(long)]
    modulation_depth: Option<String>,
    /// homodyne | balanced
    #[arg(long)]
    detection: Option<String>,
    #[arg(long)]
    detector_gain: Option<String>,
    #[arg(long)]
    detector_bandwidth_hz: Option<String>,
    #[arg(long)]
    noise_density: Option<String>,
    /// Response-time calibration: table | physics
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    sample_rate_hz: Option<String>,
    #[arg(long)]
    subcarrier_hz: Option<String>,
    #[arg(long)]
    field_rate_hz: Option<String>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Write sent and received RYDWAV1 files for `--dump-row`.
    #[arg(long)]
    dump_waveforms: bool,
    #[arg(long)]
    dump_row: Option<String>,
    /// Parallel sweep entries (0 = all cores).
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long)]
    eit_probe_rabi_mhz: Option<String>,
    #[arg(long)]
    eit_scan_mhz: Option<String>,
    #[arg(long)]
    eit_points: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, PipelineError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if !self.fwhm_um.is_empty() {
            config.set("fwhm_um", &self.fwhm_um.join(","))?;
        }
        let pairs = [
            ("coupling_fwhm_um", &self.coupling_fwhm_um),
            ("mean_velocity", &self.mean_velocity),
            ("density_scale", &self.density_scale),
            ("probe_rabi_mhz", &self.probe_rabi_mhz),
            ("coupling_rabi_mhz", &self.coupling_rabi_mhz),
            ("rf_bias_mhz", &self.rf_bias_mhz),
            ("modulation_depth", &self.modulation_depth),
            ("detection", &self.detection),
            ("detector_gain", &self.detector_gain),
            ("detector_bandwidth_hz", &self.detector_bandwidth_hz),
            ("noise_density", &self.noise_density),
            ("mode", &self.mode),
            ("sample_rate_hz", &self.sample_rate_hz),
            ("subcarrier_hz", &self.subcarrier_hz),
            ("field_rate_hz", &self.field_rate_hz),
            ("input", &self.input),
            ("out_dir", &self.out_dir),
            ("seed", &self.seed),
            ("dump_row", &self.dump_row),
            ("jobs", &self.jobs),
            ("eit_probe_rabi_mhz", &self.eit_probe_rabi_mhz),
            ("eit_scan_mhz", &self.eit_scan_mhz),
            ("eit_points", &self.eit_points),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        if self.dump_waveforms {
            config.dump_waveforms = true;
        }
        config.validate()?;
        Ok(config)
    }
}

fn meta_path(wave: &Path) -> PathBuf {
    wave.with_extension("meta")
}

fn encode(config: &ExperimentConfig) -> Result<(), PipelineError> {
    let frame = load_input(config)?;
    let composite = encode_frame(&frame, &config.timing(), &Levels::default())?;
    fs::create_dir_all(&config.out_dir)?;
    let wave = config.out_dir.join("composite.rydwav");
    let mut buf = Vec::new();
    write_waveform(&composite.waveform, &mut buf)?;
    let mut meta = Vec::new();
    write_metadata(&composite.timing, &composite.levels, &mut meta)?;
    write_atomic(&wave, &buf)?;
    write_atomic(&meta_path(&wave), &meta)?;
    println!("wrote {}", wave.display());
    Ok(())
}

fn decode(config: &ExperimentConfig, reference: Option<&Path>) -> Result<(), PipelineError> {
    let input = config
        .input
        .as_ref()
        .ok_or_else(|| PipelineError::Config("decode needs --input <file.rydwav>".into()))?;
    let open =
        |p: &Path| fs::File::open(p).map_err(|e| PipelineError::Input(format!("{}: {e}", p.display())));
    let waveform = read_waveform(BufReader::new(open(input)?))?;
    let (timing, levels) = match open(&meta_path(input)) {
        Ok(f) => read_metadata(f)?,
        Err(_) => (config.timing(), Levels::default()),
    };
    let reference = reference
        .map(|p| {
            let mut c = config.clone();
            c.input = Some(p.to_path_buf());
            load_input(&c)
        })
        .transpose()?;
    let composite = CompositeWaveform {
        waveform,
        timing,
        levels,
    };
    let (frame, report) = decode_frame(&composite)?;
    fs::create_dir_all(&config.out_dir)?;
    let mut ppm = Vec::new();
    write_ppm(&frame, &mut ppm)?;
    write_atomic(&config.out_dir.join("decoded.ppm"), &ppm)?;
    write_atomic(
        &config.out_dir.join("report.txt"),
        report_to_string(&report).as_bytes(),
    )?;
    if let Some(reference) = reference {
        let score = color_verdict(&report, &frame, &reference);
        write_atomic(&config.out_dir.join("score.txt"), score.to_text().as_bytes())?;
        print!("{}", score.to_text());
    }
    println!(
        "lines_detected={} burst_lock_fraction={:.4}",
        report.lines_detected,
        report.burst_lock_fraction()
    );
    Ok(())
}

fn simulate(config: &ExperimentConfig) -> Result<(), PipelineError> {
    let [fwhm] = config.fwhm_um[..] else {
        return Err(PipelineError::Config(format!(
            "simulate takes exactly one --fwhm-um, got {}",
            config.fwhm_um.len()
        )));
    };
    let run = run_simulation(config, fwhm)?;
    println!("seed={} out_dir={}", run.seed, run.out_dir.display());
    print!("{}", run.score.to_text());
    Ok(())
}

fn sweep(config: &ExperimentConfig) -> Result<(), PipelineError> {
    let rows = run_sweep(config)?;
    for row in &rows {
        match &row.result {
            Ok(s) => println!(
                "fwhm_um={} psnr_db={:.2} lock={:.3} verdict={}",
                row.fwhm_um, s.psnr_db, s.burst_lock_fraction, s.color_verdict
            ),
            Err(e) => eprintln!("fwhm_um={} error: {e}", row.fwhm_um),
        }
    }
    println!("wrote {}", config.out_dir.join("sweep.csv").display());
    Ok(())
}

fn eit(config: &ExperimentConfig) -> Result<(), PipelineError> {
    let study = run_eit_study(config)?;
    print!("{}", study.table_csv());
    println!(
        "wrote table_i.csv, trends.csv, spectra.csv to {}",
        config.out_dir.display()
    );
    Ok(())
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Encode(args) => encode(&args.resolve()?),
        Command::Decode { reference, config } => decode(&config.resolve()?, reference.as_deref()),
        Command::Simulate(args) => simulate(&args.resolve()?),
        Command::Sweep(args) => sweep(&args.resolve()?),
        Command::Eit(args) => eit(&args.resolve()?),
        Command::Bitrate {
            fields,
            lines,
            pixels,
            bits,
        } => {
            let rate = nominal_bitrate(fields, lines, pixels, bits);
            println!("{rate} b/s ({})", format_mbps(rate));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rydtv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
