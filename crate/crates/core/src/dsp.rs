//! Small signal-processing helpers shared by the modem, channel and receiver.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward FFT of size `n`, planned once per thread.
pub fn fft_forward(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

/// Inverse (unnormalized) FFT of size `n`, planned once per thread.
pub fn fft_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Multiplies `x[n]` by `exp(j w (n + start))`. The oscillator runs as a
/// phasor recurrence, re-anchored exactly every 64 samples.
pub fn mix(x: &[Complex64], w: f64, start: usize) -> Vec<Complex64> {
    let step = Complex64::from_polar(1.0, w);
    let mut out = Vec::with_capacity(x.len());
    for (b, block) in x.chunks(64).enumerate() {
        let mut ph = Complex64::from_polar(1.0, w * (start + 64 * b) as f64);
        for s in block {
            out.push(s * ph);
            ph *= step;
        }
    }
    out
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Full linear convolution of real sequences.
pub fn convolve_real(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &hj) in h.iter().enumerate() {
            y[i + j] += xi * hj;
        }
    }
    y
}

/// Filters a complex sequence with real symmetric taps and removes the
/// group delay, so the output is time-aligned and has the input length.
pub fn filter_aligned(x: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    let delay = (taps.len() - 1) / 2;
    let t = taps.len();
    (0..x.len())
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            let k = n + delay;
            if k + 1 >= t && k < x.len() {
                for (xv, &tap) in x[k + 1 - t..=k].iter().rev().zip(taps) {
                    acc += xv * tap;
                }
                return acc;
            }
            let j_lo = k.saturating_sub(x.len() - 1);
            let j_hi = k.min(t - 1);
            for j in j_lo..=j_hi {
                acc += x[k - j] * taps[j];
            }
            acc
        })
        .collect()
}

/// Symmetric windowed-sinc low-pass taps; `cutoff` is in cycles/sample.
pub fn lowpass_taps(cutoff: f64, len: usize) -> Vec<f64> {
    let m = (len - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 - m;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * std::f64::consts::PI * cutoff * t).sin() / (std::f64::consts::PI * t)
            };
            let w = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Welch power spectral density with a Hann window, FFT-shifted so bin 0
/// is -fs/2. Returns (frequencies in Hz, power per bin).
pub fn welch_psd(x: &[Complex64], nfft: usize, fs: f64) -> (Vec<f64>, Vec<f64>) {
    let fft = fft_forward(nfft);
    let window: Vec<f64> = (0..nfft)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / nfft as f64).cos())
        .collect();
    let hop = nfft / 2;
    let mut acc = vec![0.0; nfft];
    let mut segments = 0usize;
    let mut start = 0;
    while start + nfft <= x.len() {
        let mut buf: Vec<Complex64> = x[start..start + nfft]
            .iter()
            .zip(&window)
            .map(|(s, w)| s * w)
            .collect();
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let norm = segments.max(1) as f64;
    let psd: Vec<f64> = (0..nfft)
        .map(|i| acc[(i + nfft / 2) % nfft] / norm)
        .collect();
    let freqs = (0..nfft)
        .map(|i| (i as f64 - (nfft / 2) as f64) * fs / nfft as f64)
        .collect();
    (freqs, psd)
}

/// Width of the band holding `fraction` of the total power, trimming equal
/// tails from both ends of a shifted PSD.
pub fn occupied_bandwidth(freqs: &[f64], psd: &[f64], fraction: f64) -> f64 {
    let total: f64 = psd.iter().sum();
    let tail = total * (1.0 - fraction) / 2.0;
    let mut acc = 0.0;
    let mut lo = 0;
    while lo < psd.len() && acc + psd[lo] < tail {
        acc += psd[lo];
        lo += 1;
    }
    acc = 0.0;
    let mut hi = psd.len() - 1;
    while hi > 0 && acc + psd[hi] < tail {
        acc += psd[hi];
        hi -= 1;
    }
    let bin = freqs[1] - freqs[0];
    freqs[hi] - freqs[lo] + bin
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_tracks_direct_oscillator() {
        let x: Vec<Complex64> = (0..1000)
            .map(|i| Complex64::new(1.0, 0.001 * i as f64))
            .collect();
        let w = 0.0123;
        let y = mix(&x, w, 17);
        for (n, (a, b)) in y.iter().zip(&x).enumerate() {
            let want = b * Complex64::from_polar(1.0, w * (n + 17) as f64);
            assert!((a - want).norm() < 1e-12);
        }
    }

    #[test]
    fn aligned_filter_preserves_length_and_delay() {
        let mut x = vec![Complex64::new(0.0, 0.0); 21];
        x[10] = Complex64::new(1.0, 0.0);
        let taps = [0.25, 0.5, 0.25];
        let y = filter_aligned(&x, &taps);
        assert_eq!(y.len(), 21);
        assert_eq!(y[10].re, 0.5);
        assert_eq!(y[9].re, 0.25);
        assert_eq!(y[11].re, 0.25);
    }

    #[test]
    fn lowpass_has_unit_dc_gain() {
        let t = lowpass_taps(0.1, 31);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((t[0] - t[30]).abs() < 1e-15);
    }
}
