use super::{ChannelError, Waveform};

/// Minimum samples per time constant for the recurrence to track the
/// continuous-time response.
/// Resolution floor of the asymmetric filter.
pub const MIN_SAMPLES_PER_TAU: f64 = 5.0;

/// First-order tracker with separate time constants for rising and falling
/// input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetricFilter {
    pub tau_rise: f64,
    pub tau_fall: f64,
    pub state: f64,
}

impl AsymmetricFilter {
    pub fn new(tau_rise: f64, tau_fall: f64, state: f64) -> Result<Self, ChannelError> {
        if !(tau_rise > 0.0 && tau_fall > 0.0) {
            return Err(ChannelError::Parameter(format!(
                "time constants must be positive (rise {tau_rise}, fall {tau_fall})"
            )));
        }
        Ok(Self {
            tau_rise,
            tau_fall,
            state,
        })
    }

    /// Runs the recurrence over `input`, leaving the final output in `state`.
    pub fn process(&mut self, input: &Waveform) -> Result<Waveform, ChannelError> {
        input.validate()?;
        let tau_min = self.tau_rise.min(self.tau_fall);
        if input.sample_rate * tau_min < MIN_SAMPLES_PER_TAU {
            return Err(ChannelError::Resolution(format!(
                "{:.2} samples per time constant, need at least {MIN_SAMPLES_PER_TAU}",
                input.sample_rate * tau_min
            )));
        }
        let dt = input.dt();
        let rise = 1.0 - (-dt / self.tau_rise).exp();
        let fall = 1.0 - (-dt / self.tau_fall).exp();
        let mut y = self.state;
        let samples = input
            .samples
            .iter()
            .map(|&x| {
                let k = if x > y { rise } else { fall };
                y += (x - y) * k;
                y
            })
            .collect();
        self.state = y;
        Ok(input.with_samples(samples))
    }
}

/// Filters `input` through `filter` starting from its current state.
pub fn asymmetric_filter(input: &Waveform, filter: AsymmetricFilter) -> Result<Waveform, ChannelError> {
    let mut filter = filter;
    filter.process(input)
}

/// Single-pole low-pass with -3 dB at `bandwidth`, starting from the first
/// input sample.
pub fn single_pole(input: &Waveform, bandwidth: f64) -> Result<Waveform, ChannelError> {
    if !(bandwidth > 0.0) {
        return Err(ChannelError::Parameter(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let k = 1.0 - (-2.0 * std::f64::consts::PI * bandwidth * input.dt()).exp();
    let mut y = input.samples.first().copied().unwrap_or(0.0);
    let samples = input
        .samples
        .iter()
        .map(|&x| {
            y += (x - y) * k;
            y
        })
        .collect();
    Ok(input.with_samples(samples))
}
