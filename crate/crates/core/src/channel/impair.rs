use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modem::IqFrame;

/// Frequency shift by `offset_hz`, phase zero at sample 0.
pub fn apply_cfo(frame: &IqFrame, offset_hz: f64) -> Result<IqFrame> {
    if offset_hz.abs() >= frame.sample_rate / 2.0 {
        return Err(Error::Param(format!(
            "offset {offset_hz} Hz aliases at {} Hz sample rate",
            frame.sample_rate
        )));
    }
    let w = 2.0 * PI * offset_hz / frame.sample_rate;
    Ok(frame.with_samples(crate::dsp::mix(&frame.samples, w, 0)))
}

pub fn apply_dc(frame: &IqFrame, dc: Complex64) -> IqFrame {
    frame.with_samples(frame.samples.iter().map(|s| s + dc).collect())
}
