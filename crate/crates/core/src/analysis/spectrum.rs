//! Discrete Fourier spectrum of a uniformly sampled series.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::peaks::{find_peaks, fwhm};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rect" | "rectangular" => Ok(Self::Rectangular),
            "hann" => Ok(Self::Hann),
            other => Err(Error::InvalidParameter(format!("unknown window {other:?}"))),
        }
    }
}

/// One-sided magnitude spectrum `|X_k|/L` at `ω_k = 2πk/T`, `T = L·Δt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub window_length: f64,
    /// Number of samples `L` that entered the transform.
    pub samples: usize,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        2.0 * PI / self.window_length
    }

    /// Total power `Σ_k |X_k|²/L` reconstructed from the one-sided magnitudes.
    pub fn total_power(&self) -> f64 {
        let l = self.samples as f64;
        self.magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let mirrored = k != 0 && !(self.samples % 2 == 0 && k == self.samples / 2);
                let weight = if mirrored { 2.0 } else { 1.0 };
                weight * l * m * m
            })
            .sum()
    }
}

/// Relative spacing deviation tolerated before a series is considered
/// non-uniform.
const UNIFORMITY_TOLERANCE: f64 = 1e-6;

/// Spectrum of `series` sampled at `times`, after removing its mean.
pub fn spectrum(series: &[f64], times: &[f64], window: Window) -> Result<Spectrum> {
    if series.len() != times.len() {
        return Err(Error::InvalidParameter(format!(
            "series has {} values but {} times",
            series.len(),
            times.len()
        )));
    }
    if series.len() < 2 {
        return Err(Error::InvalidParameter("spectrum needs at least two samples".into()));
    }
    let l = series.len();
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("sample times must increase".into()));
    }
    for (k, pair) in times.windows(2).enumerate() {
        if ((pair[1] - pair[0]) - dt).abs() > UNIFORMITY_TOLERANCE * dt {
            return Err(Error::InvalidParameter(format!("non-uniform sampling at index {}", k + 1)));
        }
    }
    let mean = series.iter().sum::<f64>() / l as f64;
    let mut buf: Vec<C64> = series
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let w = match window {
                Window::Rectangular => 1.0,
                Window::Hann => 0.5 - 0.5 * (2.0 * PI * n as f64 / (l - 1) as f64).cos(),
            };
            C64::new((x - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(l).process(&mut buf);
    let window_length = l as f64 * dt;
    let half = l / 2;
    Ok(Spectrum {
        freqs: (0..=half).map(|k| 2.0 * PI * k as f64 / window_length).collect(),
        magnitudes: buf[..=half].iter().map(|x| x.norm() / l as f64).collect(),
        window_length,
        samples: l,
    })
}

/// Sum of squared deviations from the mean, the time-domain side of Parseval's
/// relation for [`Spectrum::total_power`].
pub fn centred_power(series: &[f64]) -> f64 {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    series.iter().map(|x| (x - mean) * (x - mean)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakOptions {
    /// Minimum prominence as a fraction of the largest magnitude.
    pub prominence_fraction: f64,
    /// Largest admissible distance between an expected frequency and its peak.
    pub max_bins: usize,
    /// Peaks wider than this (FWHM, in bins) mark the report low-confidence.
    pub max_fwhm_bins: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self { prominence_fraction: 0.05, max_bins: 3, max_fwhm_bins: 3.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakMatch {
    pub expected: f64,
    pub bin: usize,
    pub freq: f64,
    pub magnitude: f64,
    /// Peak bin minus the bin nearest to the expected frequency.
    pub offset_bins: i64,
    pub fwhm_bins: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakReport {
    pub matches: Vec<PeakMatch>,
    /// Magnitude of the first matched peak over the second.
    pub ratio: Option<f64>,
    pub low_confidence: bool,
    /// Bins of every peak that passed the prominence threshold.
    pub peak_bins: Vec<usize>,
}

/// Matches each expected frequency with the nearest prominent peak.
pub fn peak_report(spec: &Spectrum, expected: &[f64], opts: &PeakOptions) -> Result<PeakReport> {
    let max = spec.magnitudes.iter().cloned().fold(0.0, f64::max);
    let peaks = find_peaks(&spec.magnitudes, opts.prominence_fraction * max, 1);
    let bw = spec.bin_width();
    let mut matches = Vec::with_capacity(expected.len());
    let mut low_confidence = false;
    for &omega in expected {
        if !omega.is_finite() || omega < 0.0 {
            return Err(Error::NoPeak { omega, max_bins: opts.max_bins });
        }
        let target = (omega / bw).round() as i64;
        let best = peaks
            .iter()
            .min_by_key(|p| ((p.index as i64 - target).abs(), p.index))
            .filter(|p| (p.index as i64 - target).unsigned_abs() as usize <= opts.max_bins)
            .ok_or(Error::NoPeak { omega, max_bins: opts.max_bins })?;
        let width = fwhm(&spec.magnitudes, best.index);
        low_confidence |= width > opts.max_fwhm_bins;
        matches.push(PeakMatch {
            expected: omega,
            bin: best.index,
            freq: spec.freqs[best.index],
            magnitude: best.height,
            offset_bins: best.index as i64 - target,
            fwhm_bins: width,
        });
    }
    let ratio = match matches.as_slice() {
        [a, b, ..] if b.magnitude > 0.0 => Some(a.magnitude / b.magnitude),
        _ => None,
    };
    Ok(PeakReport { matches, ratio, low_confidence, peak_bins: peaks.iter().map(|p| p.index).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_end: f64, dt: f64) -> Vec<f64> {
        let n = (t_end / dt).round() as usize;
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn single_tone() {
        let t = grid(1000.0, 0.1);
        let x: Vec<f64> = t.iter().map(|t| 3.0 + (0.1 * t).cos()).collect();
        let s = spectrum(&x, &t, Window::Rectangular).unwrap();
        assert!((s.bin_width() - 2.0 * PI / 1000.0).abs() < 1e-15);
        let (k, _) = s.magnitudes.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((s.freqs[k] - 0.1).abs() <= s.bin_width());
        assert!(s.magnitudes[0] < 1e-12);
    }

    #[test]
    fn two_tones_match_with_zero_offset() {
        let t = grid(1000.0, 0.1);
        let bw = 2.0 * PI / 1000.0;
        let (w1, w2) = (14.0 * bw, 20.0 * bw);
        let x: Vec<f64> = t.iter().map(|t| (w1 * t).sin() + 0.5 * (w2 * t).cos()).collect();
        let s = spectrum(&x, &t, Window::Rectangular).unwrap();
        let r = peak_report(&s, &[w1, w2], &PeakOptions::default()).unwrap();
        assert_eq!(r.matches[0].offset_bins, 0);
        assert_eq!(r.matches[1].offset_bins, 0);
        assert!((r.ratio.unwrap() - 2.0).abs() < 1e-9);
        assert!(!r.low_confidence);
    }

    #[test]
    fn missing_peak_is_reported() {
        let t = grid(100.0, 0.1);
        let x: Vec<f64> = t.iter().map(|t| (0.5 * t).sin()).collect();
        let s = spectrum(&x, &t, Window::Rectangular).unwrap();
        assert!(matches!(peak_report(&s, &[2.0], &PeakOptions::default()), Err(Error::NoPeak { .. })));
    }

    #[test]
    fn parseval_holds_for_both_parities() {
        for n in [1000usize, 1001] {
            let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.05).collect();
            let x: Vec<f64> = t.iter().map(|t| (1.3 * t).sin() + 0.2 * (5.1 * t).cos() + 0.01 * t).collect();
            let s = spectrum(&x, &t, Window::Rectangular).unwrap();
            let (a, b) = (centred_power(&x), s.total_power());
            assert!((a - b).abs() <= 1e-8 * a, "n = {n}: {a} vs {b}");
        }
    }

    #[test]
    fn hann_window_suppresses_leakage() {
        let t = grid(200.0, 0.1);
        let x: Vec<f64> = t.iter().map(|t| (0.1234 * t).sin()).collect();
        let rect = spectrum(&x, &t, Window::Rectangular).unwrap();
        let hann = spectrum(&x, &t, Window::Hann).unwrap();
        let far = rect.magnitudes.len() - 1;
        assert!(hann.magnitudes[far] < rect.magnitudes[far]);
    }

    #[test]
    fn rejects_bad_sampling() {
        assert!(spectrum(&[1.0, 2.0, 3.0], &[0.0, 0.1, 0.3], Window::Rectangular).is_err());
        assert!(spectrum(&[1.0], &[0.0], Window::Rectangular).is_err());
        assert!(spectrum(&[1.0, 2.0], &[0.0], Window::Rectangular).is_err());
    }
}
