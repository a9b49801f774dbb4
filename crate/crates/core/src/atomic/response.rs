use super::{transit_time, AtomicEnsemble, AtomicError, BeamGeometry};

/// One measured row of edge times versus beam width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub probe_fwhm_um: f64,
    pub coupling_fwhm_um: f64,
    pub rise_us: f64,
    pub fall_us: f64,
    pub transit_us: f64,
}

const fn row(probe: f64, coupling: f64, rise: f64, fall: f64, transit: f64) -> TableRow {
    TableRow {
        probe_fwhm_um: probe,
        coupling_fwhm_um: coupling,
        rise_us: rise,
        fall_us: fall,
        transit_us: transit,
    }
}

/// Measured rise, fall and transit times for six probe widths.
pub const TABLE_I: [TableRow; 6] = [
    row(55.0, 120.0, 1.5, 2.6, 0.38),
    row(85.0, 120.0, 1.0, 1.2, 0.60),
    row(200.0, 220.0, 1.2, 2.1, 1.41),
    row(400.0, 800.0, 2.1, 3.8, 2.83),
    row(560.0, 800.0, 3.2, 4.5, 3.96),
    row(800.0, 800.0, 5.4, 6.1, 5.66),
];

/// The 55 um row is dominated by probe divergence inside the cell and is
/// kept out of interpolation and fitting.
const DIVERGENT_ROW: usize = 0;

/// Tolerance for recognising a tabulated width, in micrometers.
const TABLE_MATCH_UM: f64 = 1e-6;

/// Edge times of the atomic response (10-90 %) and the transit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalResponse {
    pub rise_time: f64,
    pub fall_time: f64,
    pub transit_time: f64,
}

impl TemporalResponse {
    pub fn validate(&self) -> Result<(), AtomicError> {
        if !(self.rise_time > 0.0 && self.fall_time > 0.0 && self.transit_time > 0.0) {
            return Err(AtomicError::InvalidParameter(format!(
                "response times must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// First-order time constant that reproduces the rise time.
    pub fn tau_rise(&self) -> f64 {
        self.rise_time / 9f64.ln()
    }

    pub fn tau_fall(&self) -> f64 {
        self.fall_time / 9f64.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CalibrationMode {
    /// Piecewise-linear through the measured rows.
    #[default]
    Table,
    /// Rise and fall proportional to transit time.
    Physics,
}

impl std::str::FromStr for CalibrationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Self::Table),
            "physics" => Ok(Self::Physics),
            other => Err(format!("unknown calibration mode '{other}' (table|physics)")),
        }
    }
}

impl std::fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Table => "table",
            Self::Physics => "physics",
        })
    }
}

fn fitted_rows() -> impl Iterator<Item = &'static TableRow> {
    TABLE_I
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != DIVERGENT_ROW)
        .map(|(_, r)| r)
}

/// Least-squares slopes through the origin of rise and fall against transit
/// time, `(alpha, beta)`, with `beta >= alpha`.
pub fn physics_coefficients() -> (f64, f64) {
    let (mut rt, mut ft, mut tt) = (0.0, 0.0, 0.0);
    for r in fitted_rows() {
        rt += r.rise_us * r.transit_us;
        ft += r.fall_us * r.transit_us;
        tt += r.transit_us * r.transit_us;
    }
    let alpha = rt / tt;
    let beta = (ft / tt).max(alpha);
    (alpha, beta)
}

fn interpolate(fwhm_um: f64, value: impl Fn(&TableRow) -> f64) -> f64 {
    let rows: Vec<&TableRow> = fitted_rows().collect();
    let first = rows[0];
    let last = rows[rows.len() - 1];
    if fwhm_um <= first.probe_fwhm_um {
        return value(first);
    }
    if fwhm_um >= last.probe_fwhm_um {
        return value(last);
    }
    for pair in rows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if fwhm_um <= b.probe_fwhm_um {
            let w = (fwhm_um - a.probe_fwhm_um) / (b.probe_fwhm_um - a.probe_fwhm_um);
            return value(a) + w * (value(b) - value(a));
        }
    }
    value(last)
}

/// Rise, fall and transit times for a beam geometry.
///
/// Transit time always follows the beam waist. In table mode a tabulated
/// width returns its row exactly (including the divergent 55 um row); other
/// widths interpolate through the 85-800 um rows, clamped at the ends. In
/// physics mode rise and fall are fixed multiples of the transit time.
pub fn response_times(
    geometry: &BeamGeometry,
    ensemble: &AtomicEnsemble,
    mode: CalibrationMode,
) -> Result<TemporalResponse, AtomicError> {
    let transit = transit_time(geometry, ensemble)?;
    let fwhm_um = geometry.probe_fwhm * 1e6;
    let (rise_us, fall_us) = match mode {
        CalibrationMode::Table => {
            match TABLE_I
                .iter()
                .find(|r| (r.probe_fwhm_um - fwhm_um).abs() < TABLE_MATCH_UM)
            {
                Some(r) => (r.rise_us, r.fall_us),
                None => (
                    interpolate(fwhm_um, |r| r.rise_us),
                    interpolate(fwhm_um, |r| r.fall_us),
                ),
            }
        }
        CalibrationMode::Physics => {
            let (alpha, beta) = physics_coefficients();
            (alpha * transit * 1e6, beta * transit * 1e6)
        }
    };
    let response = TemporalResponse {
        rise_time: rise_us * 1e-6,
        fall_time: fall_us * 1e-6,
        transit_time: transit,
    };
    response.validate()?;
    Ok(response)
}
