use rayon::prelude::*;

use super::{
    steady_state_transmission, AtomicEnsemble, AtomicError, BeamGeometry, DriveParameters, LadderScheme,
};

/// Coupling-detuning scan interval in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRange {
    pub start: f64,
    pub end: f64,
}

impl ScanRange {
    pub fn symmetric(half_width: f64) -> Self {
        Self {
            start: -half_width,
            end: half_width,
        }
    }

    fn grid(&self, points: usize) -> Vec<f64> {
        let step = (self.end - self.start) / (points - 1) as f64;
        (0..points).map(|k| self.start + step * k as f64).collect()
    }
}

/// Probe transmission sampled over coupling detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct EitSpectrum {
    pub detuning_grid: Vec<f64>,
    pub transmission: Vec<f64>,
}

impl EitSpectrum {
    pub fn new(detuning_grid: Vec<f64>, transmission: Vec<f64>) -> Result<Self, AtomicError> {
        if detuning_grid.len() != transmission.len() {
            return Err(AtomicError::InvalidParameter(
                "grid and transmission lengths differ".into(),
            ));
        }
        if detuning_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AtomicError::InvalidParameter(
                "detuning grid must be strictly increasing".into(),
            ));
        }
        if transmission.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(AtomicError::InvalidParameter(
                "transmission outside [0, 1]".into(),
            ));
        }
        Ok(Self {
            detuning_grid,
            transmission,
        })
    }

    /// CSV with detuning in Hz, `detuning_hz,transmission`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("detuning_hz,transmission\n");
        for (d, t) in self.detuning_grid.iter().zip(&self.transmission) {
            out.push_str(&format!("{},{}\n", d / (2.0 * std::f64::consts::PI), t));
        }
        out
    }

    /// Indices of interior local maxima, strongest first.
    fn local_maxima(&self) -> Vec<usize> {
        let t = &self.transmission;
        let mut peaks: Vec<usize> = (1..t.len() - 1)
            .filter(|&k| t[k] > t[k - 1] && t[k] >= t[k + 1])
            .collect();
        peaks.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
        peaks
    }

    /// Sub-grid peak position by a parabola through the three samples.
    fn refine_peak(&self, k: usize) -> f64 {
        let (y0, y1, y2) = (
            self.transmission[k - 1],
            self.transmission[k],
            self.transmission[k + 1],
        );
        let step = self.detuning_grid[k + 1] - self.detuning_grid[k];
        let denom = y0 - 2.0 * y1 + y2;
        let offset = if denom.abs() > 0.0 {
            0.5 * (y0 - y2) / denom
        } else {
            0.0
        };
        self.detuning_grid[k] + offset.clamp(-1.0, 1.0) * step
    }
}

/// Height above baseline and full width at half maximum of the EIT peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EitFit {
    pub height: f64,
    pub fwhm: f64,
    pub baseline: f64,
    pub peak_detuning: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn fit_peak(spectrum: &EitSpectrum) -> Result<EitFit, AtomicError> {
    let t = &spectrum.transmission;
    let x = &spectrum.detuning_grid;
    let n = t.len();
    let edge = (n / 20).max(1);
    let mut outer: Vec<f64> = t[..edge].iter().chain(&t[n - edge..]).copied().collect();
    let baseline = median(&mut outer);

    let (peak, &max) = t
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    if peak == 0 || peak == n - 1 {
        return Err(AtomicError::Fit("peak lies on the scan boundary".into()));
    }
    let height = max - baseline;
    if height <= 0.0 {
        return Err(AtomicError::Fit("no transmission peak above baseline".into()));
    }
    let half = baseline + 0.5 * height;

    let left = (0..peak)
        .rev()
        .find(|&k| t[k] < half)
        .ok_or_else(|| AtomicError::Fit("left half-maximum crossing outside scan range".into()))?;
    let right = (peak + 1..n)
        .find(|&k| t[k] < half)
        .ok_or_else(|| AtomicError::Fit("right half-maximum crossing outside scan range".into()))?;
    let cross = |a: usize, b: usize| x[a] + (half - t[a]) * (x[b] - x[a]) / (t[b] - t[a]);
    let x_left = cross(left, left + 1);
    let x_right = cross(right - 1, right);

    Ok(EitFit {
        height,
        fwhm: x_right - x_left,
        baseline,
        peak_detuning: spectrum.refine_peak(peak),
    })
}

fn scan(
    drive: &DriveParameters,
    ladder: &LadderScheme,
    geometry: &BeamGeometry,
    ensemble: &AtomicEnsemble,
    range: ScanRange,
    points: usize,
) -> Result<EitSpectrum, AtomicError> {
    if points < 16 {
        return Err(AtomicError::InvalidParameter(format!(
            "need at least 16 scan points, got {points}"
        )));
    }
    if !(range.end > range.start) {
        return Err(AtomicError::InvalidParameter("empty scan range".into()));
    }
    let grid = range.grid(points);
    let transmission = grid
        .par_iter()
        .map(|&d| steady_state_transmission(&drive.with_coupling_detuning(d), ladder, geometry, ensemble))
        .collect::<Result<Vec<_>, _>>()?;
    EitSpectrum::new(grid, transmission)
}

/// Scans the coupling detuning and fits the EIT peak.
///
/// The baseline is the median of the outer 10 % of the scan; the width is
/// found by linear interpolation at half the height above that baseline.
pub fn eit_spectrum_and_fit(
    drive: &DriveParameters,
    ladder: &LadderScheme,
    geometry: &BeamGeometry,
    ensemble: &AtomicEnsemble,
    range: ScanRange,
    points: usize,
) -> Result<(EitSpectrum, EitFit), AtomicError> {
    let spectrum = scan(drive, ladder, geometry, ensemble, range, points)?;
    let fit = fit_peak(&spectrum)?;
    Ok((spectrum, fit))
}

/// Separation (rad/s) of the two strongest transmission peaks in a
/// coupling-detuning scan.
pub fn autler_townes_splitting(
    drive: &DriveParameters,
    ladder: &LadderScheme,
    geometry: &BeamGeometry,
    ensemble: &AtomicEnsemble,
    range: ScanRange,
    points: usize,
) -> Result<f64, AtomicError> {
    let spectrum = scan(drive, ladder, geometry, ensemble, range, points)?;
    let peaks = spectrum.local_maxima();
    if peaks.len() < 2 {
        return Err(AtomicError::Fit(format!(
            "expected two Autler-Townes peaks, found {}",
            peaks.len()
        )));
    }
    let a = spectrum.refine_peak(peaks[0]);
    let b = spectrum.refine_peak(peaks[1]);
    Ok((a - b).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::angular_mhz;

    #[test]
    fn spectrum_validation() {
        assert!(EitSpectrum::new(vec![0.0, 1.0], vec![0.5]).is_err());
        assert!(EitSpectrum::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(EitSpectrum::new(vec![0.0, 1.0], vec![0.5, 1.5]).is_err());
        let s = EitSpectrum::new(vec![0.0, 2.0 * std::f64::consts::PI], vec![0.25, 0.5]).unwrap();
        assert_eq!(s.to_csv(), "detuning_hz,transmission\n0,0.25\n1,0.5\n");
    }

    #[test]
    fn fit_on_synthetic_lorentzian() {
        let grid: Vec<f64> = (0..2001).map(|k| -10.0 + 0.01 * k as f64).collect();
        let width: f64 = 1.5;
        let t: Vec<f64> = grid
            .iter()
            .map(|x| 0.2 + 0.3 / (1.0 + (2.0 * (x - 0.5) / width).powi(2)))
            .collect();
        let fit = fit_peak(&EitSpectrum::new(grid, t).unwrap()).unwrap();
        // baseline of a Lorentzian tail at |x| ~ 10 is slightly above 0.2
        assert!((fit.baseline - 0.2).abs() < 0.01);
        assert!((fit.peak_detuning - 0.5).abs() < 1e-3);
        assert!((fit.fwhm - width).abs() / width < 0.05);
    }

    #[test]
    fn fit_rejects_boundary_peak() {
        let grid: Vec<f64> = (0..32).map(f64::from).collect();
        let t: Vec<f64> = (0..32).map(|k| 0.01 * k as f64).collect();
        assert!(matches!(
            fit_peak(&EitSpectrum::new(grid, t).unwrap()),
            Err(AtomicError::Fit(_))
        ));
    }

    #[test]
    fn too_few_points() {
        let r = eit_spectrum_and_fit(
            &DriveParameters::locked(angular_mhz(1.0), angular_mhz(4.0)),
            &LadderScheme::default(),
            &BeamGeometry::matched_um(400.0).unwrap(),
            &AtomicEnsemble::default(),
            ScanRange::symmetric(angular_mhz(20.0)),
            8,
        );
        assert!(r.is_err());
    }
}
