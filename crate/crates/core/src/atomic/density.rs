//! Lindblad steady state of the four-level ladder
//! |g> = 5S1/2, |e> = 5P3/2, |r> = 50D5/2, |s> = 51P3/2
//! in the rotating frame of all three fields.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{transit_time, AtomicEnsemble, AtomicError, BeamGeometry, DriveParameters, LadderScheme};

const LEVELS: usize = 4;
const DIM: usize = LEVELS * LEVELS;

/// Residual bound on `L rho = 0` accepted from the linear solve.
const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Steady-state density matrix, row-major `rho[i][j] = <i|rho|j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: [[Complex64; LEVELS]; LEVELS],
}

impl DensityMatrix {
    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.elements[i][j]
    }

    pub fn population(&self, i: usize) -> f64 {
        self.elements[i][i].re
    }

    pub fn trace(&self) -> f64 {
        (0..LEVELS).map(|i| self.population(i)).sum()
    }

    /// Probe coherence `<e|rho|g>`.
    pub fn probe_coherence(&self) -> Complex64 {
        self.elements[1][0]
    }
}

struct Collapse {
    from: usize,
    to: usize,
    rate: f64,
}

fn hamiltonian(drive: &DriveParameters) -> [[Complex64; LEVELS]; LEVELS] {
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut h = [[Complex64::default(); LEVELS]; LEVELS];
    h[1][1] = c(-drive.probe_detuning);
    h[2][2] = c(-(drive.probe_detuning + drive.coupling_detuning));
    h[3][3] = c(-(drive.probe_detuning + drive.coupling_detuning + drive.rf_detuning));
    h[0][1] = c(0.5 * drive.probe_rabi);
    h[1][0] = h[0][1];
    h[1][2] = c(0.5 * drive.coupling_rabi);
    h[2][1] = h[1][2];
    h[2][3] = c(0.5 * drive.rf_rabi);
    h[3][2] = h[2][3];
    h
}

/// Action of the Liouvillian on one matrix.
fn liouvillian_apply(
    h: &[[Complex64; LEVELS]; LEVELS],
    collapses: &[Collapse],
    transit_rate: f64,
    rho: &[[Complex64; LEVELS]; LEVELS],
) -> [[Complex64; LEVELS]; LEVELS] {
    let i_unit = Complex64::new(0.0, 1.0);
    let mut out = [[Complex64::default(); LEVELS]; LEVELS];
    for a in 0..LEVELS {
        for b in 0..LEVELS {
            let mut commutator = Complex64::default();
            for k in 0..LEVELS {
                commutator += h[a][k] * rho[k][b] - rho[a][k] * h[k][b];
            }
            out[a][b] = -i_unit * commutator;
        }
    }
    // D[sqrt(rate) |to><from|]
    for c in collapses {
        out[c.to][c.to] += c.rate * rho[c.from][c.from];
        for k in 0..LEVELS {
            out[c.from][k] -= 0.5 * c.rate * rho[c.from][k];
            out[k][c.from] -= 0.5 * c.rate * rho[k][c.from];
        }
    }
    // Atoms leave the beam at the transit rate and are replaced by fresh
    // ground-state atoms.
    if transit_rate > 0.0 {
        let trace: Complex64 = (0..LEVELS).map(|k| rho[k][k]).sum();
        for a in 0..LEVELS {
            for b in 0..LEVELS {
                out[a][b] -= transit_rate * rho[a][b];
            }
        }
        out[0][0] += transit_rate * trace;
    }
    out
}

fn collapses(ladder: &LadderScheme) -> [Collapse; 3] {
    [
        Collapse {
            from: 1,
            to: 0,
            rate: ladder.intermediate_decay_rate,
        },
        Collapse {
            from: 2,
            to: 1,
            rate: ladder.rydberg_decay_rate,
        },
        Collapse {
            from: 3,
            to: 0,
            rate: ladder.rydberg_decay_rate,
        },
    ]
}

/// Solves `L rho = 0` with unit trace.
///
/// `transit_rate` is the inverse transit time (0 disables transit relaxation).
pub fn steady_state(
    drive: &DriveParameters,
    ladder: &LadderScheme,
    transit_rate: f64,
) -> Result<DensityMatrix, AtomicError> {
    drive.validate()?;
    ladder.validate()?;
    let h = hamiltonian(drive);
    let decays = collapses(ladder);

    let mut generator = DMatrix::<Complex64>::zeros(DIM, DIM);
    for col in 0..DIM {
        let mut basis = [[Complex64::default(); LEVELS]; LEVELS];
        basis[col / LEVELS][col % LEVELS] = Complex64::new(1.0, 0.0);
        let image = liouvillian_apply(&h, &decays, transit_rate, &basis);
        for row in 0..DIM {
            generator[(row, col)] = image[row / LEVELS][row % LEVELS];
        }
    }

    // The ground-population equation is redundant with trace conservation;
    // replace it by Tr(rho) = 1.
    let mut system = generator.clone();
    let mut rhs = DVector::<Complex64>::zeros(DIM);
    for col in 0..DIM {
        system[(0, col)] = Complex64::default();
    }
    for k in 0..LEVELS {
        system[(0, k * LEVELS + k)] = Complex64::new(1.0, 0.0);
    }
    rhs[0] = Complex64::new(1.0, 0.0);

    let solution = system.clone().lu().solve(&rhs).ok_or_else(|| {
        AtomicError::Numerical(format!(
            "singular steady-state system for drive {drive:?}, transit rate {transit_rate}"
        ))
    })?;

    let scale = generator.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let residual = (&generator * &solution)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        / scale;
    if !residual.is_finite() || residual > RESIDUAL_TOLERANCE {
        return Err(AtomicError::Numerical(format!(
            "steady state did not converge: relative residual {residual:.3e} for drive {drive:?}"
        )));
    }

    let mut elements = [[Complex64::default(); LEVELS]; LEVELS];
    for (idx, value) in solution.iter().enumerate() {
        elements[idx / LEVELS][idx % LEVELS] = *value;
    }
    Ok(DensityMatrix { elements })
}

/// Normalized probe absorption `-Gamma_e Im(rho_eg) / Omega_p`; equals 1 for a
/// weak resonant probe on a bare two-level transition.
pub fn probe_absorption(
    drive: &DriveParameters,
    ladder: &LadderScheme,
    transit_rate: f64,
) -> Result<f64, AtomicError> {
    let mut drive = *drive;
    if drive.probe_rabi == 0.0 {
        // weak-probe limit
        drive.probe_rabi = 1e-6 * ladder.intermediate_decay_rate;
    }
    let rho = steady_state(&drive, ladder, transit_rate)?;
    let absorption = -ladder.intermediate_decay_rate * rho.probe_coherence().im / drive.probe_rabi;
    Ok(absorption.clamp(0.0, 1.0))
}

/// Probe transmission fraction, `1 - depth * absorption` with
/// `depth = density_scale * volume_factor`, clamped to [0, 1].
pub fn steady_state_transmission(
    drive: &DriveParameters,
    ladder: &LadderScheme,
    geometry: &BeamGeometry,
    ensemble: &AtomicEnsemble,
) -> Result<f64, AtomicError> {
    let transit = transit_time(geometry, ensemble)?;
    let absorption = probe_absorption(drive, ladder, 1.0 / transit)?;
    let depth = ensemble.density_scale * geometry.volume_factor();
    Ok((1.0 - depth * absorption).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::angular_mhz;
    use approx::assert_abs_diff_eq;

    fn ladder() -> LadderScheme {
        LadderScheme::default()
    }

    #[test]
    fn trace_and_hermiticity() {
        let drive = DriveParameters {
            probe_rabi: angular_mhz(3.0),
            coupling_rabi: angular_mhz(5.0),
            rf_rabi: angular_mhz(8.0),
            probe_detuning: angular_mhz(0.7),
            coupling_detuning: angular_mhz(-1.3),
            rf_detuning: angular_mhz(0.4),
        };
        let rho = steady_state(&drive, &ladder(), 1.0e6).unwrap();
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-10);
        for i in 0..4 {
            assert!(rho.population(i) >= -1e-12);
            assert_abs_diff_eq!(rho.element(i, i).im, 0.0, epsilon = 1e-10);
            for j in 0..4 {
                let diff = rho.element(i, j) - rho.element(j, i).conj();
                assert!(diff.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn two_level_weak_probe_limit() {
        // Lorentzian absorption of a bare two-level atom.
        let l = ladder();
        let gamma = l.intermediate_decay_rate;
        for detuning_mhz in [0.0, 1.0, 3.0, 6.0] {
            let drive = DriveParameters {
                probe_rabi: 1e-4 * gamma,
                probe_detuning: angular_mhz(detuning_mhz),
                ..DriveParameters::default()
            };
            let a = probe_absorption(&drive, &l, 0.0).unwrap();
            let d = angular_mhz(detuning_mhz);
            let expected = (gamma * gamma / 4.0) / (d * d + gamma * gamma / 4.0);
            assert_abs_diff_eq!(a, expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn coupling_opens_transparency() {
        let geometry = BeamGeometry::matched_um(400.0).unwrap();
        let ensemble = AtomicEnsemble::default();
        let off = DriveParameters::locked(angular_mhz(1.0), 0.0);
        let on = DriveParameters::locked(angular_mhz(1.0), angular_mhz(5.0));
        let t_off = steady_state_transmission(&off, &ladder(), &geometry, &ensemble).unwrap();
        let t_on = steady_state_transmission(&on, &ladder(), &geometry, &ensemble).unwrap();
        assert!(t_off < t_on, "{t_off} !< {t_on}");
    }

    #[test]
    fn transmission_linear_in_density() {
        let geometry = BeamGeometry::matched_um(400.0).unwrap();
        let drive = DriveParameters::locked(angular_mhz(2.0), angular_mhz(4.0)).with_rf(angular_mhz(6.0));
        let one = AtomicEnsemble::default();
        let two = AtomicEnsemble {
            density_scale: 2.0,
            ..one
        };
        let a = 1.0 - steady_state_transmission(&drive, &ladder(), &geometry, &one).unwrap();
        let b = 1.0 - steady_state_transmission(&drive, &ladder(), &geometry, &two).unwrap();
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-12);
    }

    #[test]
    fn rejects_negative_rabi() {
        let drive = DriveParameters::locked(-1.0, 1.0);
        assert!(steady_state(&drive, &ladder(), 0.0).is_err());
    }
}
