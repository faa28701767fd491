//! Spectral arc length (SPARC) of a speed profile.
//!
//! The magnitude spectrum `V(f)` of the zero-padded profile is normalized by
//! `V(0)`, truncated at an adaptive cutoff `f_c` and its arc length measured
//! on the frequency axis scaled by `1/f_c`:
//!
//! `SAL = -∫₀^{f_c} sqrt((1/f_c)² + (dV̂/df)²) df`
//!
//! which on the discrete spectrum is the negated polyline length
//! `Σ sqrt((Δf/f_c)² + ΔV̂²)`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SpeedProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparcConfig {
    /// Minimum normalized magnitude a bin needs to extend the cutoff.
    pub amplitude_threshold: f64,
    /// Upper bound on the adaptive cutoff frequency.
    pub max_cutoff_hz: f64,
    /// Uniform resampling rate applied before the transform.
    pub resample_hz: f64,
}

impl Default for SparcConfig {
    fn default() -> Self {
        Self {
            amplitude_threshold: 0.05,
            max_cutoff_hz: 20.0,
            resample_hz: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SparcError {
    #[error("speed profile has zero energy (V(0) = 0)")]
    ZeroEnergyProfile,
    #[error("speed profile needs at least 4 samples, got {0}")]
    TooFewSamples(usize),
}

pub(crate) const MIN_SAMPLES: usize = 4;

/// FFT length: the next power of two at least four times the sample count.
pub(crate) fn padded_len(samples: usize) -> usize {
    (4 * samples).next_power_of_two()
}

/// Normalized magnitude spectrum `(frequency, V̂)` for `0 ≤ f ≤ fs/2`.
fn normalized_spectrum(speeds: &[f64], sample_rate_hz: f64) -> Result<Vec<(f64, f64)>, SparcError> {
    let n = padded_len(speeds.len());
    let mut buf: Vec<Complex<f64>> = speeds
        .iter()
        .map(|&s| Complex::new(s, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let dc = buf[0].norm();
    if dc == 0.0 || !dc.is_finite() {
        return Err(SparcError::ZeroEnergyProfile);
    }
    let df = sample_rate_hz / n as f64;
    Ok(buf[..=n / 2]
        .iter()
        .enumerate()
        .map(|(k, c)| (k as f64 * df, c.norm() / dc))
        .collect())
}

/// Smoothness of `profile`; always ≤ 0, closer to zero is smoother.
pub fn sparc(profile: &SpeedProfile, amplitude_threshold: f64, max_cutoff_hz: f64) -> Result<f64, SparcError> {
    if profile.samples.len() < MIN_SAMPLES {
        return Err(SparcError::TooFewSamples(profile.samples.len()));
    }
    let spectrum = normalized_spectrum(&profile.speeds(), profile.sample_rate_hz)?;

    let band = spectrum.partition_point(|&(f, _)| f <= max_cutoff_hz);
    let cutoff = spectrum[..band]
        .iter()
        .rposition(|&(_, v)| v >= amplitude_threshold)
        .unwrap_or(0);
    if cutoff == 0 {
        return Ok(0.0);
    }
    let fc = spectrum[cutoff].0;
    let arc: f64 = spectrum[..=cutoff]
        .windows(2)
        .map(|w| ((w[1].0 - w[0].0) / fc).hypot(w[1].1 - w[0].1))
        .sum();
    Ok(-arc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell(n: usize, rate: f64) -> Vec<f64> {
        let dur = n as f64 / rate;
        (0..n)
            .map(|i| {
                let t = i as f64 / rate - dur / 2.0;
                (-(t * t) / (2.0 * (dur / 6.0).powi(2))).exp() * 300.0
            })
            .collect()
    }

    #[test]
    fn zero_profile_has_no_energy() {
        let p = SpeedProfile::from_uniform(1, 100.0, &[0.0; 16]);
        assert_eq!(sparc(&p, 0.05, 20.0), Err(SparcError::ZeroEnergyProfile));
    }

    #[test]
    fn short_profile_rejected() {
        let p = SpeedProfile::from_uniform(1, 100.0, &[1.0, 2.0, 1.0]);
        assert_eq!(sparc(&p, 0.05, 20.0), Err(SparcError::TooFewSamples(3)));
    }

    #[test]
    fn bell_is_smoother_than_noisy_bell() {
        let smooth = bell(100, 100.0);
        let noisy: Vec<f64> = smooth
            .iter()
            .enumerate()
            .map(|(i, s)| s * (1.0 + 0.3 * (2.0 * std::f64::consts::PI * 12.0 * i as f64 / 100.0).sin()))
            .collect();
        let a = sparc(&SpeedProfile::from_uniform(1, 100.0, &smooth), 0.05, 20.0).unwrap();
        let b = sparc(&SpeedProfile::from_uniform(1, 100.0, &noisy), 0.05, 20.0).unwrap();
        assert!(a <= 0.0 && b <= 0.0);
        assert!(a > b, "smooth {a} vs noisy {b}");
    }

    #[test]
    fn padding_is_next_power_of_two() {
        assert_eq!(padded_len(4), 16);
        assert_eq!(padded_len(100), 512);
        assert_eq!(padded_len(128), 512);
    }
}
