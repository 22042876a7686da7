use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{AcquisitionSpec, SignalError};

/// Equivalent noise bandwidth of the periodic Hann window, in bins.
pub const HANN_ENBW_BINS: f64 = 1.5;

/// One-sided power spectrum of a real segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub bin_width_hz: f64,
    pub power: Vec<f64>,
}

impl Spectrum {
    pub fn frequency_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width_hz
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        (0..self.power.len()).map(|k| self.frequency_hz(k)).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// Hann-windowed periodogram with a cached FFT plan.
///
/// Bins are normalized by the window power `Σw²`, so the spectrum sums to
/// the window-weighted mean square `Σ(w x)² / Σw²` of the input. A tone of
/// amplitude `A` centred on a bin reads `A²/2 / ENBW` and white noise of
/// variance `σ²` reads `2σ²/L` per bin.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    len: usize,
    bin_width_hz: f64,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("len", &self.len)
            .field("bin_width_hz", &self.bin_width_hz)
            .finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(segment_length: usize, sample_rate_hz: f64) -> Result<Self, SignalError> {
        if !segment_length.is_power_of_two() || segment_length < 4 {
            return Err(SignalError::NotPowerOfTwo(segment_length));
        }
        let n = segment_length as f64;
        let window: Vec<f64> = (0..segment_length)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos())
            .collect();
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(segment_length);
        Ok(Self {
            len: segment_length,
            bin_width_hz: sample_rate_hz / n,
            window,
            window_power,
            fft,
        })
    }

    pub fn for_acquisition(acq: &AcquisitionSpec) -> Result<Self, SignalError> {
        Self::new(acq.segment_length, acq.sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// `Σ(w x)² / Σw²`, the quantity the spectrum sums to.
    pub fn windowed_mean_square(&self, trace: &[f64]) -> f64 {
        trace
            .iter()
            .zip(&self.window)
            .map(|(x, w)| (x * w) * (x * w))
            .sum::<f64>()
            / self.window_power
    }

    pub fn analyze(&self, trace: &[f64]) -> Result<Spectrum, SignalError> {
        if trace.len() != self.len {
            return Err(SignalError::LengthMismatch {
                expected: self.len,
                got: trace.len(),
            });
        }
        let mut buf: Vec<Complex64> = trace
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex64::new(x * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        let half = self.len / 2;
        let scale = 1.0 / (self.len as f64 * self.window_power);
        let power = (0..=half)
            .map(|k| {
                let p = buf[k].norm_sqr() * scale;
                if k == 0 || k == half {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect();
        Ok(Spectrum {
            bin_width_hz: self.bin_width_hz,
            power,
        })
    }
}

/// One-off spectrum; build a [`SpectrumAnalyzer`] to reuse the FFT plan.
pub fn power_spectrum(trace: &[f64], acq: &AcquisitionSpec) -> Result<Spectrum, SignalError> {
    if trace.len() != acq.segment_length {
        return Err(SignalError::LengthMismatch {
            expected: acq.segment_length,
            got: trace.len(),
        });
    }
    SpectrumAnalyzer::for_acquisition(acq)?.analyze(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths() {
        assert!(matches!(SpectrumAnalyzer::new(1000, 1.0), Err(SignalError::NotPowerOfTwo(1000))));
        let a = SpectrumAnalyzer::new(64, 1.0).unwrap();
        assert!(matches!(a.analyze(&[0.0; 32]), Err(SignalError::LengthMismatch { .. })));
    }

    #[test]
    fn zero_input_zero_spectrum() {
        let a = SpectrumAnalyzer::new(256, 1.0).unwrap();
        let s = a.analyze(&[0.0; 256]).unwrap();
        assert_eq!(s.power.len(), 129);
        assert!(s.power.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn hann_window_constants() {
        let a = SpectrumAnalyzer::new(1024, 1.0).unwrap();
        let sum: f64 = a.window().iter().sum();
        let sum_sq: f64 = a.window().iter().map(|w| w * w).sum();
        assert!((sum - 512.0).abs() < 1e-9);
        assert!((1024.0 * sum_sq / (sum * sum) - HANN_ENBW_BINS).abs() < 1e-12);
    }

    #[test]
    fn bin_centred_tone() {
        let n = 4096;
        let a = SpectrumAnalyzer::new(n, 1e6).unwrap();
        let (amp, bin) = (0.7, 300);
        let x: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * PI * bin as f64 * i as f64 / n as f64 + 0.3).sin())
            .collect();
        let s = a.analyze(&x).unwrap();
        let expected = amp * amp / 2.0 / HANN_ENBW_BINS;
        assert!((s.power[bin] - expected).abs() < 1e-10 * expected);
        // periodic Hann leaks a centred tone into the two neighbours only
        assert!((s.power[bin + 1] - expected / 4.0).abs() < 1e-10 * expected);
        assert!(s.power[bin + 2] < 1e-20);
        assert!((s.frequency_hz(bin) - 300.0 * 1e6 / 4096.0).abs() < 1e-9);
    }
}
