use std::fmt::Write as _;
use std::fs;

use rayon::prelude::*;

use super::{write_atomic, ExperimentConfig, PipelineError};
use crate::atomic::{
    angular_mhz, eit_spectrum_and_fit, response_times, BeamGeometry, CalibrationMode, DriveParameters,
    EitFit, EitSpectrum, LadderScheme, ScanRange, TemporalResponse, TABLE_I,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub fwhm_um: f64,
    /// Physics-model response of this geometry.
    pub response: TemporalResponse,
    /// One fit per configured probe Rabi frequency.
    pub fits: Vec<EitFit>,
    pub spectra: Vec<EitSpectrum>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EitStudy {
    /// Tabulated geometries with their table-mode response.
    pub table: Vec<(BeamGeometry, TemporalResponse)>,
    pub probe_rabi_mhz: Vec<f64>,
    pub trends: Vec<TrendRow>,
}

/// Meters to micrometers without binary round-off in the printed value.
fn um(meters: f64) -> f64 {
    (meters * 1e12).round() / 1e6
}

fn probe_label(mhz: f64) -> String {
    format!("p{mhz}mhz")
}

impl EitStudy {
    /// `probe_fwhm_um,coupling_fwhm_um,transit_us,rise_us,fall_us`
    pub fn table_csv(&self) -> String {
        let mut s = "probe_fwhm_um,coupling_fwhm_um,transit_us,rise_us,fall_us\n".to_string();
        for (g, r) in &self.table {
            let _ = writeln!(
                s,
                "{},{},{:.2},{:.2},{:.2}",
                um(g.probe_fwhm),
                um(g.coupling_fwhm),
                r.transit_time * 1e6,
                r.rise_time * 1e6,
                r.fall_time * 1e6
            );
        }
        s
    }

    /// One row per beam size: physics-model response times, then EIT
    /// height and width (MHz) for each probe Rabi frequency.
    pub fn trends_csv(&self) -> String {
        let mut s = "fwhm_um,transit_us,rise_us,fall_us".to_string();
        for &p in &self.probe_rabi_mhz {
            let l = probe_label(p);
            let _ = write!(s, ",height_{l},width_mhz_{l}");
        }
        s.push('\n');
        for row in &self.trends {
            let r = &row.response;
            let _ = write!(
                s,
                "{},{:.4},{:.4},{:.4}",
                row.fwhm_um,
                r.transit_time * 1e6,
                r.rise_time * 1e6,
                r.fall_time * 1e6
            );
            for fit in &row.fits {
                let _ = write!(s, ",{:.6e},{:.6}", fit.height, fit.fwhm / angular_mhz(1.0));
            }
            s.push('\n');
        }
        s
    }

    /// Long format: `fwhm_um,probe_rabi_mhz,detuning_mhz,transmission`.
    pub fn spectra_csv(&self) -> String {
        let mut s = "fwhm_um,probe_rabi_mhz,detuning_mhz,transmission\n".to_string();
        for row in &self.trends {
            for (spectrum, &p) in row.spectra.iter().zip(&self.probe_rabi_mhz) {
                for (d, t) in spectrum.detuning_grid.iter().zip(&spectrum.transmission) {
                    let _ = writeln!(s, "{},{p},{:.6},{:.9}", row.fwhm_um, d / angular_mhz(1.0), t);
                }
            }
        }
        s
    }
}

/// Computes the response-time table for the tabulated beams and the EIT
/// height/width trends over the configured beam sizes and probe Rabi
/// frequencies, then writes `table_i.csv`, `trends.csv` and `spectra.csv`.
pub fn run_eit_study(config: &ExperimentConfig) -> Result<EitStudy, PipelineError> {
    config.validate()?;
    if config.eit_probe_rabi_mhz.is_empty() {
        return Err(PipelineError::Config("eit_probe_rabi_mhz is empty".into()));
    }
    let ensemble = config.ensemble();
    let ladder = LadderScheme::default();
    let table = TABLE_I
        .iter()
        .map(|row| {
            let g = BeamGeometry::table_row(row);
            response_times(&g, &ensemble, CalibrationMode::Table).map(|r| (g, r))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut sizes = config.fwhm_um.clone();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    let range = ScanRange::symmetric(angular_mhz(config.eit_scan_mhz));
    let trends = sizes
        .par_iter()
        .map(|&fwhm_um| -> Result<TrendRow, PipelineError> {
            let coupling = config.coupling_fwhm_um.unwrap_or(fwhm_um);
            let g = BeamGeometry::new(fwhm_um * 1e-6, coupling * 1e-6)?;
            let response = response_times(&g, &ensemble, CalibrationMode::Physics)?;
            let mut fits = Vec::new();
            let mut spectra = Vec::new();
            for &p in &config.eit_probe_rabi_mhz {
                let drive = DriveParameters::locked(angular_mhz(p), angular_mhz(config.coupling_rabi_mhz));
                let (spectrum, fit) =
                    eit_spectrum_and_fit(&drive, &ladder, &g, &ensemble, range, config.eit_points)?;
                fits.push(fit);
                spectra.push(spectrum);
            }
            Ok(TrendRow {
                fwhm_um,
                response,
                fits,
                spectra,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let study = EitStudy {
        table,
        probe_rabi_mhz: config.eit_probe_rabi_mhz.clone(),
        trends,
    };
    fs::create_dir_all(&config.out_dir)?;
    write_atomic(&config.out_dir.join("table_i.csv"), study.table_csv().as_bytes())?;
    write_atomic(&config.out_dir.join("trends.csv"), study.trends_csv().as_bytes())?;
    write_atomic(
        &config.out_dir.join("spectra.csv"),
        study.spectra_csv().as_bytes(),
    )?;
    Ok(study)
}
