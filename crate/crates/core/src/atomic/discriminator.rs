use rayon::prelude::*;

use super::{
    steady_state_transmission, AtomicEnsemble, AtomicError, BeamGeometry, DriveParameters, LadderScheme,
};

/// Relative finite-difference step.
const RELATIVE_STEP: f64 = 1e-3;
/// Step used when the bias itself is zero, rad/s.
const ZERO_BIAS_STEP: f64 = 2.0 * std::f64::consts::PI * 1.0e3;
/// Allowed change of the derivative when the step is halved.
const RICHARDSON_TOLERANCE: f64 = 0.01;
/// Deviation from the tangent line that bounds the linear region.
const LINEARITY_TOLERANCE: f64 = 0.05;
/// Slope, normalized by absorption depth and probe linewidth, below which
/// the bias is reported as insensitive.
const NEAR_ZERO_SLOPE: f64 = 1e-4;

/// Slope of lock-point transmission with respect to the RF Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorGain {
    /// d(transmission)/d(Omega_RF), per rad/s.
    pub gain: f64,
    /// Half-width (rad/s) of the region around the bias where the response
    /// stays within 5 % of the tangent line.
    pub linear_half_width: f64,
    pub bias_transmission: f64,
    /// Set when the bias sits on a flat part of the response.
    pub near_zero: bool,
}

struct Probe<'a> {
    drive: DriveParameters,
    ladder: &'a LadderScheme,
    geometry: &'a BeamGeometry,
    ensemble: &'a AtomicEnsemble,
}

impl Probe<'_> {
    // Transmission is even in Omega_RF, so negative arguments fold back.
    fn transmission(&self, rf_rabi: f64) -> Result<f64, AtomicError> {
        steady_state_transmission(
            &self.drive.with_rf(rf_rabi.abs()),
            self.ladder,
            self.geometry,
            self.ensemble,
        )
    }

    fn central_difference(&self, bias: f64, step: f64) -> Result<f64, AtomicError> {
        Ok((self.transmission(bias + step)? - self.transmission(bias - step)?) / (2.0 * step))
    }

    fn within_linear(&self, bias: f64, t0: f64, gain: f64, delta: f64) -> Result<bool, AtomicError> {
        let mut sides = vec![delta];
        if bias - delta >= 0.0 {
            sides.push(-delta);
        }
        for d in sides {
            let predicted = gain * d;
            let actual = self.transmission(bias + d)? - t0;
            if (actual - predicted).abs() > LINEARITY_TOLERANCE * predicted.abs() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn linear_half_width(&self, bias: f64, t0: f64, gain: f64, step: f64) -> Result<f64, AtomicError> {
        let mut inside = step;
        let mut outside = step;
        let limit = 1e3 * bias.max(ZERO_BIAS_STEP);
        loop {
            if !self.within_linear(bias, t0, gain, outside)? {
                break;
            }
            inside = outside;
            outside *= 2.0;
            if outside > limit {
                return Ok(inside);
            }
        }
        if inside == outside {
            return Ok(0.0);
        }
        for _ in 0..40 {
            let mid = 0.5 * (inside + outside);
            if self.within_linear(bias, t0, gain, mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    }
}

/// Finite-difference discriminator slope at the drive's RF bias.
///
/// The step is 1e-3 of the bias; the derivative must change by less than
/// 1 % when the step is halved.
pub fn discriminator_gain(
    drive: &DriveParameters,
    ladder: &LadderScheme,
    geometry: &BeamGeometry,
    ensemble: &AtomicEnsemble,
) -> Result<DiscriminatorGain, AtomicError> {
    let probe = Probe {
        drive: *drive,
        ladder,
        geometry,
        ensemble,
    };
    let bias = drive.rf_rabi;
    let step = if bias > 0.0 {
        RELATIVE_STEP * bias
    } else {
        ZERO_BIAS_STEP
    };
    let coarse = probe.central_difference(bias, step)?;
    let fine = probe.central_difference(bias, 0.5 * step)?;
    let t0 = probe.transmission(bias)?;

    let depth = (ensemble.density_scale * geometry.volume_factor()).max(f64::MIN_POSITIVE);
    let normalized = fine.abs() * ladder.intermediate_decay_rate / depth;
    let near_zero = normalized < NEAR_ZERO_SLOPE;

    if !near_zero && (coarse - fine).abs() > RICHARDSON_TOLERANCE * fine.abs() {
        return Err(AtomicError::Numerical(format!(
            "derivative unstable at bias {bias:.6e}: {coarse:.6e} vs {fine:.6e}"
        )));
    }
    let linear_half_width = if near_zero {
        0.0
    } else {
        probe.linear_half_width(bias, t0, fine, step)?
    };
    Ok(DiscriminatorGain {
        gain: fine,
        linear_half_width,
        bias_transmission: t0,
        near_zero,
    })
}

/// RF Rabi frequency in `[0, max_rf_rabi]` that maximizes |discriminator
/// gain| at the lock point.
pub fn optimal_rf_bias(
    drive: &DriveParameters,
    ladder: &LadderScheme,
    geometry: &BeamGeometry,
    ensemble: &AtomicEnsemble,
    max_rf_rabi: f64,
) -> Result<f64, AtomicError> {
    if !(max_rf_rabi > 0.0) {
        return Err(AtomicError::InvalidParameter(
            "RF bias search range must be positive".into(),
        ));
    }
    let probe = Probe {
        drive: *drive,
        ladder,
        geometry,
        ensemble,
    };
    let slope = |bias: f64| -> Result<f64, AtomicError> {
        let step = if bias > 0.0 {
            RELATIVE_STEP * bias
        } else {
            ZERO_BIAS_STEP
        };
        Ok(probe.central_difference(bias, step)?.abs())
    };

    let points = 121;
    let grid: Vec<f64> = (0..points)
        .map(|k| max_rf_rabi * k as f64 / (points - 1) as f64)
        .collect();
    let slopes = grid
        .par_iter()
        .map(|&b| slope(b))
        .collect::<Result<Vec<_>, _>>()?;
    let best = slopes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("non-empty grid");

    // Golden-section refinement between the neighbouring grid points.
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(points - 1)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (slope(a)?, slope(b)?);
    for _ in 0..40 {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = slope(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = slope(b)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::angular_mhz;

    fn setup() -> (DriveParameters, LadderScheme, BeamGeometry, AtomicEnsemble) {
        (
            DriveParameters::locked(angular_mhz(2.0), angular_mhz(5.0)),
            LadderScheme::default(),
            BeamGeometry::matched_um(85.0).unwrap(),
            AtomicEnsemble::default(),
        )
    }

    #[test]
    fn zero_bias_has_zero_gain() {
        let (drive, ladder, geometry, ensemble) = setup();
        let g = discriminator_gain(&drive, &ladder, &geometry, &ensemble).unwrap();
        assert!(g.gain.abs() < 1e-15);
        assert!(g.near_zero);
    }

    #[test]
    fn optimum_bias_is_interior_and_negative() {
        let (drive, ladder, geometry, ensemble) = setup();
        let max = angular_mhz(30.0);
        let bias = optimal_rf_bias(&drive, &ladder, &geometry, &ensemble, max).unwrap();
        assert!(bias > 0.0 && bias < max);
        let g = discriminator_gain(&drive.with_rf(bias), &ladder, &geometry, &ensemble).unwrap();
        assert!(!g.near_zero);
        assert!(g.gain < 0.0);
        assert!(g.linear_half_width > 0.0);
        // more splitting lowers lock-point transmission on both sides
        let t =
            |rf: f64| steady_state_transmission(&drive.with_rf(rf), &ladder, &geometry, &ensemble).unwrap();
        assert!(t(1.1 * bias) < t(bias) && t(bias) < t(0.9 * bias));
    }
}
