//! GMSK modulation and non-coherent demodulation.
//!
//! The frequency pulse is a Gaussian-filtered one-symbol rectangle sampled
//! at `sps` samples per symbol. The transmitter shapes the NRZ stream with it;
//! the receiver uses the same taps as the post-detection (matched) filter on
//! the phase-discriminator output.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::bits::BitVector;
use crate::error::{Error, Result};

pub const DEFAULT_BT: f64 = 0.5;
pub const DEFAULT_MOD_INDEX: f64 = 0.5;
pub const DEFAULT_SPS: usize = 8;
pub const DEFAULT_SPAN: usize = 3;

/// Complex baseband samples with rate metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub symbol_rate: f64,
}

impl IqFrame {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, symbol_rate: f64) -> Self {
        IqFrame {
            samples,
            sample_rate,
            symbol_rate,
        }
    }

    pub fn zeros(len: usize, sample_rate: f64, symbol_rate: f64) -> Self {
        Self::new(
            vec![Complex64::new(0.0, 0.0); len],
            sample_rate,
            symbol_rate,
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sps(&self) -> usize {
        (self.sample_rate / self.symbol_rate).round() as usize
    }

    /// Same rates, new samples.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        Self::new(samples, self.sample_rate, self.symbol_rate)
    }

    pub fn power(&self) -> f64 {
        crate::dsp::mean_power(&self.samples)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    pub bt_product: f64,
    pub sps: usize,
    pub span_symbols: usize,
    /// `span * sps + 1` taps, even-symmetric, summing to one.
    pub taps: Vec<f64>,
}

impl PulseShape {
    /// Index of the centre tap (the pulse's group delay in samples).
    pub fn center(&self) -> usize {
        (self.taps.len() - 1) / 2
    }
}

fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Gaussian frequency pulse for bandwidth-time product `bt`.
pub fn gaussian_taps(bt: f64, sps: usize, span: usize) -> Result<PulseShape> {
    if !(bt > 0.0 && bt <= 1.0e3) {
        return Err(Error::Param(format!("BT product {bt} must be positive")));
    }
    if sps < 2 || span < 2 {
        return Err(Error::Param(format!(
            "need sps >= 2 and span >= 2, got {sps}, {span}"
        )));
    }
    let len = span * sps + 1;
    let c = (len - 1) as f64 / 2.0;
    // t in symbol periods
    let alpha = 2.0 * PI * bt / 2f64.ln().sqrt();
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let t = (n as f64 - c) / sps as f64;
            q_function(alpha * (t - 0.5)) - q_function(alpha * (t + 0.5))
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    // exact symmetry
    for k in 0..len / 2 {
        let avg = 0.5 * (taps[k] + taps[len - 1 - k]);
        taps[k] = avg;
        taps[len - 1 - k] = avg;
    }
    Ok(PulseShape {
        bt_product: bt,
        sps,
        span_symbols: span,
        taps,
    })
}

/// Instantaneous frequency (radians per sample) of the modulated signal.
fn frequency_track(bits: &BitVector, pulse: &PulseShape, h: f64) -> Vec<f64> {
    let sps = pulse.sps;
    let n = bits.len();
    if n == 0 {
        return Vec::new();
    }
    let len = (n - 1) * sps + pulse.taps.len();
    let mut freq = vec![0.0; len];
    for (k, b) in bits.iter().enumerate() {
        let a = if b { PI * h } else { -PI * h };
        for (j, &g) in pulse.taps.iter().enumerate() {
            freq[k * sps + j] += a * g;
        }
    }
    freq
}

/// Continuous-phase GMSK. Symbol `k`'s pulse is centred on sample
/// `k * sps + pulse.center()`; the frame holds `(N - 1) * sps + taps` samples.
pub fn gmsk_modulate(bits: &BitVector, pulse: &PulseShape, h: f64, symbol_rate: f64) -> IqFrame {
    assert!(
        (0.45..=0.55).contains(&h),
        "modulation index {h} outside [0.45, 0.55]"
    );
    let mut phase = 0.0f64;
    let samples = frequency_track(bits, pulse, h)
        .into_iter()
        .map(|f| {
            phase += f;
            if phase > PI {
                phase -= 2.0 * PI;
            } else if phase < -PI {
                phase += 2.0 * PI;
            }
            Complex64::from_polar(1.0, phase)
        })
        .collect();
    IqFrame::new(samples, symbol_rate * pulse.sps as f64, symbol_rate)
}

/// Sample-to-sample phase increment, `arg(x[n] x*[n-1])`; first output is 0.
pub fn discriminator(samples: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    if samples.is_empty() {
        return out;
    }
    out.push(0.0);
    out.extend(samples.windows(2).map(|w| (w[1] * w[0].conj()).arg()));
    out
}

/// Discriminator output passed through the receive half of the pulse;
/// index `n` of the result holds the full convolution at `n`. A symbol whose
/// transmit pulse starts at sample `s` peaks at index `s + 2 * center`.
pub fn detection_track(samples: &[Complex64], pulse: &PulseShape) -> Vec<f64> {
    crate::dsp::convolve_real(&discriminator(samples), &pulse.taps)
}

/// One soft value per symbol (positive = 1) for a frame whose first symbol
/// pulse starts at sample 0.
pub fn gmsk_demodulate(frame: &IqFrame, pulse: &PulseShape) -> Result<Vec<f64>> {
    let len = frame.len();
    let taps = pulse.taps.len();
    if len < taps {
        return Err(Error::Length {
            needed: taps,
            got: len,
        });
    }
    if frame.sps() != pulse.sps {
        return Err(Error::Param(format!(
            "frame has {} samples/symbol, pulse {}",
            frame.sps(),
            pulse.sps
        )));
    }
    let track = detection_track(&frame.samples, pulse);
    let delay = 2 * pulse.center();
    let symbols = (len - 1 - pulse.center() * 2) / pulse.sps + 1;
    Ok((0..symbols).map(|k| track[k * pulse.sps + delay]).collect())
}

pub fn hard_bits(soft: &[f64]) -> BitVector {
    soft.iter().map(|&s| s > 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut impl Rng, n: usize) -> BitVector {
        (0..n).map(|_| rng.random::<bool>()).collect()
    }

    /// Midpoint-rule integral of a unit-area Gaussian over a one-symbol window.
    fn gaussian_rect_by_quadrature(t: f64, bt: f64) -> f64 {
        let sigma = 2f64.ln().sqrt() / (2.0 * PI * bt);
        let steps = 20_000;
        let dt = 1.0 / steps as f64;
        (0..steps)
            .map(|i| {
                let u = t - 0.5 + (i as f64 + 0.5) * dt;
                (-(u * u) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt()) * dt
            })
            .sum()
    }

    #[test]
    fn taps_are_symmetric_and_normalized() {
        let p = gaussian_taps(0.5, 8, 3).unwrap();
        assert_eq!(p.taps.len(), 25);
        let n = p.taps.len();
        for k in 0..n {
            assert_eq!(p.taps[k], p.taps[n - 1 - k]);
        }
        assert!((p.taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn taps_match_quadrature() {
        let p = gaussian_taps(0.5, 8, 3).unwrap();
        let raw: Vec<f64> = (0..p.taps.len())
            .map(|n| gaussian_rect_by_quadrature((n as f64 - 12.0) / 8.0, 0.5))
            .collect();
        let s: f64 = raw.iter().sum();
        for (a, b) in p.taps.iter().zip(&raw) {
            assert!((a - b / s).abs() < 1e-7, "{a} vs {}", b / s);
        }
    }

    #[test]
    fn large_bt_tends_to_rectangle() {
        let p = gaussian_taps(10.0, 8, 3).unwrap();
        let c = p.center();
        let centre = &p.taps[c - 3..=c + 3];
        let max = centre.iter().cloned().fold(f64::MIN, f64::max);
        let min = centre.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - min) / max < 0.01);
        assert!(p.taps[0] < 1e-9);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(gaussian_taps(0.0, 8, 3).is_err());
        assert!(gaussian_taps(0.5, 1, 3).is_err());
        assert!(gaussian_taps(0.5, 8, 1).is_err());
    }

    #[test]
    fn constant_envelope_and_phase_continuity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = gaussian_taps(0.5, 8, 3).unwrap();
        let bits = random_bits(&mut rng, 500);
        let f = gmsk_modulate(&bits, &p, 0.5, 1e6);
        assert!(f.samples.iter().all(|s| (s.norm() - 1.0).abs() < 1e-9));
        let limit = PI * 0.5 / 8.0 + 1e-3;
        assert!(discriminator(&f.samples).iter().all(|d| d.abs() <= limit));
        assert_eq!(f.sample_rate, 8e6);
    }

    #[test]
    fn all_ones_accumulates_n_pi_h() {
        let p = gaussian_taps(0.5, 8, 3).unwrap();
        let n = 37;
        let f = gmsk_modulate(&BitVector::from(vec![true; n]), &p, 0.5, 1e6);
        let total: f64 = discriminator(&f.samples).iter().sum::<f64>() + f.samples[0].arg();
        assert!((total - n as f64 * PI * 0.5).abs() < 1e-6);
    }

    #[test]
    fn alternating_bits_stay_within_deviation() {
        let p = gaussian_taps(0.5, 8, 3).unwrap();
        let bits: BitVector = (0..200).map(|i| i % 2 == 0).collect();
        let f = gmsk_modulate(&bits, &p, 0.5, 1e6);
        let peak_hz = discriminator(&f.samples)
            .iter()
            .map(|d| d.abs() * f.sample_rate / (2.0 * PI))
            .fold(0.0, f64::max);
        // h * Rs / 2 = 250 kHz
        assert!(peak_hz <= 250e3 + 1.0);
        assert!(peak_hz > 100e3);
    }

    #[test]
    fn noiseless_round_trip_both_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (rate, sps) in [(1e6, 8), (2e6, 8), (1e6, 4)] {
            let p = gaussian_taps(0.5, sps, 3).unwrap();
            let bits = random_bits(&mut rng, 1000);
            let f = gmsk_modulate(&bits, &p, 0.5, rate);
            let soft = gmsk_demodulate(&f, &p).unwrap();
            assert_eq!(hard_bits(&soft), bits);
        }
    }

    #[test]
    fn demod_rejects_short_frame() {
        let p = gaussian_taps(0.5, 8, 3).unwrap();
        let f = IqFrame::zeros(10, 8e6, 1e6);
        assert!(matches!(gmsk_demodulate(&f, &p), Err(Error::Length { .. })));
    }
}
