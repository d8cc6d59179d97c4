use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::{db_to_linear, mean_power};
use crate::modem::IqFrame;
use crate::seed;

/// Adds circular complex Gaussian noise at `snr_db` relative to the frame's
/// measured mean power. `snr_db = +inf` returns the input unchanged.
pub fn awgn(frame: &IqFrame, snr_db: f64, seed: u64) -> IqFrame {
    if snr_db == f64::INFINITY {
        return frame.clone();
    }
    let noise_power = mean_power(&frame.samples) / db_to_linear(snr_db);
    add_noise(frame, noise_power, seed)
}

/// Adds complex Gaussian noise of the given total power per sample.
pub fn add_noise(frame: &IqFrame, noise_power: f64, seed: u64) -> IqFrame {
    if noise_power <= 0.0 {
        return frame.clone();
    }
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = seed::rng(seed);
    let samples = frame
        .samples
        .iter()
        .map(|s| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            s + Complex64::new(re, im) * sigma
        })
        .collect();
    frame.with_samples(samples)
}
