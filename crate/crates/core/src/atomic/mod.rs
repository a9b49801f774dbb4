//! Four-level Rydberg ladder: steady-state EIT / Autler-Townes response and
//! the beam-geometry-dependent temporal response of the receiver.
//!
//! All quantities are SI: lengths in meters, times in seconds, Rabi
//! frequencies, detunings and decay rates in rad/s.

mod density;
mod discriminator;
mod response;
mod spectrum;

use std::f64::consts::{LN_2, PI};

use thiserror::Error;

pub use density::{probe_absorption, steady_state, steady_state_transmission, DensityMatrix};
pub use discriminator::{discriminator_gain, optimal_rf_bias, DiscriminatorGain};
pub use response::{
    physics_coefficients, response_times, CalibrationMode, TableRow, TemporalResponse, TABLE_I,
};
pub use spectrum::{autler_townes_splitting, eit_spectrum_and_fit, EitFit, EitSpectrum, ScanRange};

/// Mean thermal velocity of room-temperature rubidium, m/s.
pub const DEFAULT_MEAN_VELOCITY: f64 = 240.0;

/// Probe FWHM at which the interaction-volume factor equals `density_scale`.
pub const VOLUME_REFERENCE_FWHM: f64 = 1.0e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtomicError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("steady-state solve failed: {0}")]
    Numerical(String),
    #[error("fit failed: {0}")]
    Fit(String),
}

/// Converts a frequency in MHz to an angular frequency in rad/s.
pub fn angular_mhz(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1.0e6
}

/// Level scheme 5S1/2 -> 5P3/2 -> 50D5/2 -> 51P3/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderScheme {
    pub probe_wavelength: f64,
    pub coupling_wavelength: f64,
    pub intermediate_decay_rate: f64,
    pub rydberg_decay_rate: f64,
    pub rf_transition_frequency: f64,
}

impl Default for LadderScheme {
    fn default() -> Self {
        Self {
            probe_wavelength: 780.0e-9,
            coupling_wavelength: 480.0e-9,
            intermediate_decay_rate: angular_mhz(6.07),
            rydberg_decay_rate: angular_mhz(0.010),
            rf_transition_frequency: 17.0434e9,
        }
    }
}

impl LadderScheme {
    pub fn validate(&self) -> Result<(), AtomicError> {
        let positive = [
            ("probe_wavelength", self.probe_wavelength),
            ("coupling_wavelength", self.coupling_wavelength),
            ("intermediate_decay_rate", self.intermediate_decay_rate),
            ("rydberg_decay_rate", self.rydberg_decay_rate),
            ("rf_transition_frequency", self.rf_transition_frequency),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(AtomicError::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.intermediate_decay_rate <= self.rydberg_decay_rate {
            return Err(AtomicError::InvalidParameter(
                "intermediate decay must exceed Rydberg decay".into(),
            ));
        }
        Ok(())
    }
}

/// Probe and coupling beam widths (full width at half maximum).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    pub probe_fwhm: f64,
    pub coupling_fwhm: f64,
}

impl BeamGeometry {
    pub fn new(probe_fwhm: f64, coupling_fwhm: f64) -> Result<Self, AtomicError> {
        let geometry = Self {
            probe_fwhm,
            coupling_fwhm,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Probe FWHM in micrometers, with the coupling beam matched to it.
    pub fn matched_um(probe_fwhm_um: f64) -> Result<Self, AtomicError> {
        Self::new(probe_fwhm_um * 1e-6, probe_fwhm_um * 1e-6)
    }

    /// The probe/coupling widths used for each tabulated beam size.
    pub fn table_row(row: &TableRow) -> Self {
        Self {
            probe_fwhm: row.probe_fwhm_um * 1e-6,
            coupling_fwhm: row.coupling_fwhm_um * 1e-6,
        }
    }

    pub fn validate(&self) -> Result<(), AtomicError> {
        if !(self.probe_fwhm > 0.0 && self.coupling_fwhm > 0.0) {
            return Err(AtomicError::InvalidParameter(format!(
                "beam widths must be positive (probe {}, coupling {})",
                self.probe_fwhm, self.coupling_fwhm
            )));
        }
        if self.coupling_fwhm < self.probe_fwhm {
            return Err(AtomicError::InvalidParameter(format!(
                "coupling FWHM {} must not be smaller than probe FWHM {}",
                self.coupling_fwhm, self.probe_fwhm
            )));
        }
        Ok(())
    }

    pub fn probe_waist(&self) -> f64 {
        self.probe_fwhm / (2.0 * LN_2).sqrt()
    }

    /// Interaction-volume factor relative to [`VOLUME_REFERENCE_FWHM`].
    pub fn volume_factor(&self) -> f64 {
        (self.probe_fwhm / VOLUME_REFERENCE_FWHM).powi(2)
    }
}

/// Thermal vapor parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicEnsemble {
    pub mean_velocity: f64,
    /// Scale linking interaction volume to EIT depth.
    pub density_scale: f64,
}

impl Default for AtomicEnsemble {
    fn default() -> Self {
        Self {
            mean_velocity: DEFAULT_MEAN_VELOCITY,
            density_scale: 1.0,
        }
    }
}

impl AtomicEnsemble {
    pub fn validate(&self) -> Result<(), AtomicError> {
        if !(self.mean_velocity > 0.0 && self.mean_velocity.is_finite()) {
            return Err(AtomicError::InvalidParameter(format!(
                "mean velocity must be positive, got {}",
                self.mean_velocity
            )));
        }
        if !(self.density_scale >= 0.0 && self.density_scale.is_finite()) {
            return Err(AtomicError::InvalidParameter(format!(
                "density scale must be non-negative, got {}",
                self.density_scale
            )));
        }
        Ok(())
    }
}

/// Field strengths and detunings driving the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveParameters {
    pub probe_rabi: f64,
    pub coupling_rabi: f64,
    pub rf_rabi: f64,
    pub probe_detuning: f64,
    pub coupling_detuning: f64,
    pub rf_detuning: f64,
}

impl DriveParameters {
    /// Resonant lasers at the lock point, RF off.
    pub fn locked(probe_rabi: f64, coupling_rabi: f64) -> Self {
        Self {
            probe_rabi,
            coupling_rabi,
            ..Self::default()
        }
    }

    pub fn with_rf(mut self, rf_rabi: f64) -> Self {
        self.rf_rabi = rf_rabi;
        self
    }

    pub fn with_coupling_detuning(mut self, detuning: f64) -> Self {
        self.coupling_detuning = detuning;
        self
    }

    pub fn validate(&self) -> Result<(), AtomicError> {
        let all = [
            self.probe_rabi,
            self.coupling_rabi,
            self.rf_rabi,
            self.probe_detuning,
            self.coupling_detuning,
            self.rf_detuning,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(AtomicError::InvalidParameter(
                "drive parameters must be finite".into(),
            ));
        }
        if self.probe_rabi < 0.0 || self.coupling_rabi < 0.0 || self.rf_rabi < 0.0 {
            return Err(AtomicError::InvalidParameter(
                "Rabi frequencies must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Gaussian beam waist (1/e^2 intensity radius) from the FWHM.
pub fn beam_waist(fwhm: f64) -> Result<f64, AtomicError> {
    if fwhm.is_nan() || fwhm < 0.0 {
        return Err(AtomicError::Domain(format!(
            "beam FWHM must be non-negative, got {fwhm}"
        )));
    }
    Ok(fwhm / (2.0 * LN_2).sqrt())
}

/// Mean time for an atom to cross the probe beam, `2 * waist / velocity`.
pub fn transit_time(geometry: &BeamGeometry, ensemble: &AtomicEnsemble) -> Result<f64, AtomicError> {
    geometry.validate()?;
    ensemble.validate()?;
    Ok(2.0 * geometry.probe_waist() / ensemble.mean_velocity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn waist_from_fwhm() {
        assert_abs_diff_eq!(beam_waist(85e-6).unwrap(), 72.2e-6, epsilon = 0.1e-6);
        assert_abs_diff_eq!(beam_waist(800e-6).unwrap(), 679.4e-6, epsilon = 0.5e-6);
        assert_eq!(beam_waist(0.0).unwrap(), 0.0);
        assert!(matches!(beam_waist(-1e-6), Err(AtomicError::Domain(_))));
    }

    #[test]
    fn transit_examples() {
        let ensemble = AtomicEnsemble::default();
        for (fwhm_um, expected_us) in [(85.0, 0.60), (800.0, 5.66), (200.0, 1.41)] {
            let geometry = BeamGeometry::matched_um(fwhm_um).unwrap();
            let t = transit_time(&geometry, &ensemble).unwrap();
            assert_abs_diff_eq!(t * 1e6, expected_us, epsilon = 0.01);
        }
    }

    #[test]
    fn transit_scales_linearly() {
        let ensemble = AtomicEnsemble::default();
        let a = transit_time(&BeamGeometry::matched_um(150.0).unwrap(), &ensemble).unwrap();
        let b = transit_time(&BeamGeometry::matched_um(300.0).unwrap(), &ensemble).unwrap();
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-18);

        let fast = AtomicEnsemble {
            mean_velocity: 480.0,
            ..ensemble
        };
        let c = transit_time(&BeamGeometry::matched_um(150.0).unwrap(), &fast).unwrap();
        assert_abs_diff_eq!(c, 0.5 * a, epsilon = 1e-18);
    }

    #[test]
    fn geometry_invariants() {
        assert!(BeamGeometry::new(100e-6, 90e-6).is_err());
        assert!(BeamGeometry::new(0.0, 90e-6).is_err());
        assert!(BeamGeometry::new(100e-6, 120e-6).is_ok());
    }

    #[test]
    fn ladder_invariants() {
        assert!(LadderScheme::default().validate().is_ok());
        let inverted = LadderScheme {
            rydberg_decay_rate: angular_mhz(10.0),
            ..LadderScheme::default()
        };
        assert!(inverted.validate().is_err());
    }
}
