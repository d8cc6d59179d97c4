use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::{db_to_linear, linear_to_db};
use crate::error::{Error, Result};
use crate::modem::IqFrame;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Los,
    Nlos,
    Reverberant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tap {
    /// Delay in samples at the profile's reference rate.
    pub delay: usize,
    pub mean_power_db: f64,
}

/// Tapped-delay-line block-fading channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProfile {
    pub kind: ProfileKind,
    /// Rician K factor of tap 0 in dB; `None` for pure Rayleigh profiles.
    #[serde(default)]
    pub rician_k_db: Option<f64>,
    pub taps: Vec<Tap>,
    /// Rate at which tap delays are expressed; delays are rescaled to the
    /// frame's sample rate.
    #[serde(default = "default_reference_rate")]
    pub reference_rate_hz: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_reference_rate() -> f64 {
    8e6
}

impl ChannelProfile {
    /// Rician single tap, K = 10 dB.
    pub fn los() -> Self {
        Self::los_with_k(10.0)
    }

    pub fn los_with_k(k_db: f64) -> Self {
        ChannelProfile {
            kind: ProfileKind::Los,
            rician_k_db: Some(k_db),
            taps: vec![Tap {
                delay: 0,
                mean_power_db: 0.0,
            }],
            reference_rate_hz: default_reference_rate(),
            seed: 0,
        }
    }

    /// Eight Rayleigh taps, two samples apart at 8 Msps, exponential power
    /// decay giving an RMS delay spread of four samples.
    pub fn nlos() -> Self {
        const SPACING: usize = 2;
        const TARGET_RMS: f64 = 4.0;
        let delays: Vec<usize> = (0..8).map(|i| i * SPACING).collect();
        let rms_for = |tau: f64| {
            let p: Vec<f64> = delays.iter().map(|&d| (-(d as f64) / tau).exp()).collect();
            rms_delay(&delays, &p)
        };
        // rms grows monotonically with the decay constant
        let (mut lo, mut hi) = (0.1f64, 1e4f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if rms_for(mid) < TARGET_RMS {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = (lo * hi).sqrt();
        let p: Vec<f64> = delays.iter().map(|&d| (-(d as f64) / tau).exp()).collect();
        Self::rayleigh(ProfileKind::Nlos, &delays, &p)
    }

    /// 32 equal-power Rayleigh taps one sample apart at 8 Msps.
    pub fn reverberant() -> Self {
        let delays: Vec<usize> = (0..32).collect();
        Self::rayleigh(ProfileKind::Reverberant, &delays, &[1.0; 32])
    }

    fn rayleigh(kind: ProfileKind, delays: &[usize], powers: &[f64]) -> Self {
        let total: f64 = powers.iter().sum();
        ChannelProfile {
            kind,
            rician_k_db: None,
            taps: delays
                .iter()
                .zip(powers)
                .map(|(&delay, &p)| Tap {
                    delay,
                    mean_power_db: linear_to_db(p / total),
                })
                .collect(),
            reference_rate_hz: default_reference_rate(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// RMS delay spread in reference-rate samples.
    pub fn rms_delay_spread(&self) -> f64 {
        let delays: Vec<usize> = self.taps.iter().map(|t| t.delay).collect();
        let p: Vec<f64> = self
            .taps
            .iter()
            .map(|t| db_to_linear(t.mean_power_db))
            .collect();
        rms_delay(&delays, &p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(Error::Profile("no taps".into()));
        }
        let total: f64 = self
            .taps
            .iter()
            .map(|t| db_to_linear(t.mean_power_db))
            .sum();
        if (linear_to_db(total)).abs() > 0.01 {
            return Err(Error::Profile(format!(
                "tap powers sum to {:.3} dB, expected 0 dB",
                linear_to_db(total)
            )));
        }
        match (self.kind, self.rician_k_db) {
            (ProfileKind::Los, Some(k)) if k >= 0.0 => {}
            (ProfileKind::Los, _) => {
                return Err(Error::Profile(
                    "LOS profile needs a K factor >= 0 dB".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::Profile(
                    "NLOS/reverberant profiles have no deterministic component".into(),
                ))
            }
            (_, None) => {}
        }
        if !(self.reference_rate_hz > 0.0) {
            return Err(Error::Profile("reference rate must be positive".into()));
        }
        Ok(())
    }

    /// One channel impulse response at `sample_rate`: (delay, gain) pairs.
    pub fn realize(&self, sample_rate: f64) -> Result<Vec<(usize, Complex64)>> {
        self.validate()?;
        let mut rng = seed::rng(self.seed);
        let scale = sample_rate / self.reference_rate_hz;
        let cn = |rng: &mut rand_chacha::ChaCha8Rng| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        };
        let los_phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        Ok(self
            .taps
            .iter()
            .enumerate()
            .map(|(i, tap)| {
                let p = db_to_linear(tap.mean_power_db);
                let diffuse = cn(&mut rng);
                let gain = match (i, self.rician_k_db) {
                    (0, Some(k_db)) => {
                        let k = db_to_linear(k_db);
                        let (los, nlos) = if k.is_infinite() {
                            (1.0, 0.0)
                        } else {
                            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
                        };
                        (Complex64::from_polar(los, los_phase) + diffuse * nlos) * p.sqrt()
                    }
                    _ => diffuse * p.sqrt(),
                };
                ((tap.delay as f64 * scale).round() as usize, gain)
            })
            .collect())
    }
}

fn rms_delay(delays: &[usize], powers: &[f64]) -> f64 {
    let total: f64 = powers.iter().sum();
    let mean: f64 = delays
        .iter()
        .zip(powers)
        .map(|(&d, &p)| d as f64 * p)
        .sum::<f64>()
        / total;
    let second: f64 = delays
        .iter()
        .zip(powers)
        .map(|(&d, &p)| (d as f64 - mean).powi(2) * p)
        .sum::<f64>()
        / total;
    second.sqrt()
}

/// Convolves the frame with one block-fading realization; output keeps the
/// input length.
pub fn fade(frame: &IqFrame, profile: &ChannelProfile) -> Result<IqFrame> {
    let taps = profile.realize(frame.sample_rate)?;
    if let Some((d, _)) = taps.iter().find(|(d, _)| *d >= frame.len()) {
        return Err(Error::Profile(format!(
            "tap delay {d} not shorter than frame length {}",
            frame.len()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); frame.len()];
    for &(d, g) in &taps {
        for (o, s) in out[d..].iter_mut().zip(&frame.samples) {
            *o += s * g;
        }
    }
    Ok(frame.with_samples(out))
}
