//! 802.11a-style OFDM interferer and signal/interferer mixing.
//!
//! The interferer reproduces the spectral footprint and burst structure of
//! a 20 MHz WLAN: 64-point symbols, 52 occupied subcarriers carrying random
//! QPSK, a 1/4 cyclic prefix, bursts gated by a duty cycle. No coding,
//! pilots or preamble.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{db_to_linear, mean_power};
use crate::error::{Error, Result};
use crate::modem::IqFrame;
use crate::seed;

const FFT_SIZE: i32 = 64;
/// Occupied subcarriers -26..=26 except DC.
const OCCUPIED: usize = 52;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfererConfig {
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default)]
    pub center_offset_hz: f64,
    pub sir_db: f64,
    #[serde(default = "default_duty")]
    pub duty_cycle: f64,
    /// OFDM symbols per burst.
    #[serde(default = "default_burst")]
    pub burst_symbols: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_bandwidth() -> f64 {
    20e6
}
fn default_duty() -> f64 {
    1.0
}
fn default_burst() -> usize {
    50
}

impl Default for InterfererConfig {
    fn default() -> Self {
        InterfererConfig {
            bandwidth_hz: default_bandwidth(),
            center_offset_hz: 0.0,
            sir_db: 0.0,
            duty_cycle: default_duty(),
            burst_symbols: default_burst(),
            seed: 0,
        }
    }
}

impl InterfererConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Param("interferer bandwidth must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.duty_cycle) {
            return Err(Error::Param(format!(
                "duty cycle {} outside [0, 1]",
                self.duty_cycle
            )));
        }
        if self.burst_symbols == 0 {
            return Err(Error::Param(
                "burst length must be at least one symbol".into(),
            ));
        }
        Ok(())
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth_hz / f64::from(FFT_SIZE)
    }

    fn subcarrier_offsets(&self) -> impl Iterator<Item = f64> + '_ {
        let df = self.subcarrier_spacing();
        (-26i32..=26)
            .filter(|&k| k != 0)
            .map(move |k| f64::from(k) * df + self.center_offset_hz)
    }
}

/// Full-band interferer at `fs >= bandwidth`. Power over burst-active
/// samples is one.
pub fn wlan_interferer(
    duration_samples: usize,
    config: &InterfererConfig,
    fs: f64,
) -> Result<IqFrame> {
    config.validate()?;
    if fs < config.bandwidth_hz {
        return Err(Error::Param(format!(
            "sample rate {fs} Hz below interferer bandwidth {} Hz",
            config.bandwidth_hz
        )));
    }
    if config.subcarrier_offsets().any(|f| f.abs() >= fs / 2.0) {
        return Err(Error::Param("offset interferer exceeds Nyquist".into()));
    }
    Ok(synthesize(duration_samples, config, fs, |_| true))
}

/// The part of the interferer that falls inside `(-fs/2, fs/2)`, for
/// `fs` below the interferer bandwidth: equivalent to generating the full
/// band, ideal low-pass filtering and decimating. Scaling is unchanged, so
/// SIR stays referenced to the full-band power.
pub fn wlan_interferer_in_band(
    duration_samples: usize,
    config: &InterfererConfig,
    fs: f64,
) -> Result<IqFrame> {
    config.validate()?;
    let edge = fs / 2.0;
    Ok(synthesize(duration_samples, config, fs, |f| f.abs() < edge))
}

fn synthesize(
    duration: usize,
    config: &InterfererConfig,
    fs: f64,
    keep: impl Fn(f64) -> bool,
) -> IqFrame {
    let mut out = vec![Complex64::new(0.0, 0.0); duration];
    let frame = |samples| IqFrame::new(samples, fs, config.bandwidth_hz);
    if config.duty_cycle == 0.0 || duration == 0 {
        return frame(out);
    }
    let df = config.subcarrier_spacing();
    let t_fft = 1.0 / df;
    let t_cp = t_fft / 4.0;
    let t_sym = t_fft + t_cp;
    let t_burst = t_sym * config.burst_symbols as f64;
    let t_period = t_burst / config.duty_cycle;

    let carriers: Vec<f64> = config.subcarrier_offsets().filter(|&f| keep(f)).collect();
    let mut rng = seed::rng(config.seed);
    // burst train phase: first burst may have started before t = 0
    let t_start = -rng.random_range(0.0..t_period);
    let scale = 1.0 / (OCCUPIED as f64).sqrt();
    let dt = 1.0 / fs;
    let t_end = duration as f64 * dt;

    let mut burst_t0 = t_start;
    let mut data = vec![Complex64::new(0.0, 0.0); carriers.len()];
    while burst_t0 < t_end {
        for m in 0..config.burst_symbols {
            let sym_t0 = burst_t0 + m as f64 * t_sym;
            for d in data.iter_mut() {
                *d = Complex64::new(
                    if rng.random::<bool>() {
                        FRAC_1_SQRT_2
                    } else {
                        -FRAC_1_SQRT_2
                    },
                    if rng.random::<bool>() {
                        FRAC_1_SQRT_2
                    } else {
                        -FRAC_1_SQRT_2
                    },
                ) * scale;
            }
            let first = ((sym_t0 / dt).ceil().max(0.0)) as usize;
            let last = (((sym_t0 + t_sym) / dt).ceil().max(0.0) as usize).min(duration);
            if first >= last {
                continue;
            }
            // time from the start of the FFT window; CP samples fall at tau < 0
            let tau0 = first as f64 * dt - sym_t0 - t_cp;
            for (&f, &d) in carriers.iter().zip(&data) {
                let mut ph = d * Complex64::from_polar(1.0, 2.0 * PI * f * tau0);
                let rot = Complex64::from_polar(1.0, 2.0 * PI * f * dt);
                for o in &mut out[first..last] {
                    *o += ph;
                    ph *= rot;
                }
            }
        }
        burst_t0 += t_period;
    }
    frame(out)
}

/// Adds `gain * interferer` to `signal`; the interferer is truncated or
/// repeated to the signal length.
pub fn mix_with_gain(signal: &IqFrame, interferer: &IqFrame, gain: f64) -> Result<IqFrame> {
    if signal.sample_rate != interferer.sample_rate {
        return Err(Error::RateMismatch(
            signal.sample_rate,
            interferer.sample_rate,
        ));
    }
    if interferer.is_empty() || gain == 0.0 {
        return Ok(signal.clone());
    }
    Ok(signal.with_samples(
        signal
            .samples
            .iter()
            .zip(interferer.samples.iter().cycle())
            .map(|(s, i)| s + i * gain)
            .collect(),
    ))
}

/// Scales the interferer so signal/interferer power over interferer-active
/// samples equals `sir_db`, then adds it.
pub fn mix(signal: &IqFrame, interferer: &IqFrame, sir_db: f64) -> Result<IqFrame> {
    if signal.sample_rate != interferer.sample_rate {
        return Err(Error::RateMismatch(
            signal.sample_rate,
            interferer.sample_rate,
        ));
    }
    if sir_db == f64::INFINITY || interferer.is_empty() {
        return Ok(signal.clone());
    }
    let looped: Vec<Complex64> = interferer
        .samples
        .iter()
        .cycle()
        .take(signal.len())
        .copied()
        .collect();
    let active: Vec<usize> = (0..looped.len())
        .filter(|&n| looped[n].norm_sqr() > 0.0)
        .collect();
    if active.is_empty() {
        return Ok(signal.clone());
    }
    let p_int = active.iter().map(|&n| looped[n].norm_sqr()).sum::<f64>() / active.len() as f64;
    let mut p_sig = active
        .iter()
        .map(|&n| signal.samples[n].norm_sqr())
        .sum::<f64>()
        / active.len() as f64;
    if p_sig == 0.0 {
        p_sig = mean_power(&signal.samples);
    }
    let gain = (p_sig / (p_int * db_to_linear(sir_db))).sqrt();
    mix_with_gain(signal, interferer, gain)
}
