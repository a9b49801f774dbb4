use std::f64::consts::PI;

/// Blackman-windowed sinc low-pass with unit DC gain. `taps` is forced odd
/// so the kernel has a centre sample.
pub fn lowpass_kernel(cutoff: f64, sample_rate: f64, taps: usize) -> Vec<f64> {
    let taps = taps | 1;
    let m = (taps - 1) as f64;
    let fc = cutoff / sample_rate;
    let mut h: Vec<f64> = (0..taps)
        .map(|k| {
            let x = k as f64 - 0.5 * m;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let w = 0.42 - 0.5 * (2.0 * PI * k as f64 / m).cos() + 0.08 * (4.0 * PI * k as f64 / m).cos();
            sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Zero-phase convolution with a centred odd kernel; ends are extended by
/// repeating the edge samples.
pub fn fir_filter(samples: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let half = kernel.len() / 2;
    (0..n)
        .map(|k| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, h)| {
                    let idx = (k + j).saturating_sub(half).min(n - 1);
                    h * samples[idx]
                })
                .sum()
        })
        .collect()
}
