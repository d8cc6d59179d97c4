//! Receiver chain: AGC, DC notch, coarse CFO, matched filter,
//! preamble synchronization with fine CFO, GMSK demodulation, coded-PHY
//! decoding, de-whitening and access-address/CRC validation.
//!
//! Frequency-offset correction always runs before the matched filter.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::coded::{
    block2_symbols, coded_access_address_symbols, coded_preamble, decode_block1, decode_block2,
    Decision, BLOCK1_SYMBOLS, CODED_PREAMBLE_BITS,
};
use crate::dsp::{
    db_to_linear, fft_forward, fft_inverse, filter_aligned, linear_to_db, mean_power, mix,
};
use crate::error::{Error, Result};
use crate::modem::{
    detection_track, gaussian_taps, gmsk_demodulate, gmsk_modulate, hard_bits, IqFrame, PulseShape,
    DEFAULT_BT, DEFAULT_MOD_INDEX, DEFAULT_SPAN, DEFAULT_SPS,
};
use crate::packet::{uncoded_preamble, validate_packet_with_init, whiten, PacketStatus};
use crate::phy::{ChannelIndex, PhyMode, ADVERTISING_ACCESS_ADDRESS, ADVERTISING_CRC_INIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgcMode {
    SlowAttack,
    FastAttack,
}

impl AgcMode {
    /// (power detector smoothing, loop step in dB per dB of error)
    fn constants(self) -> (f64, f64) {
        match self {
            AgcMode::FastAttack => (0.25, 0.08),
            AgcMode::SlowAttack => (0.02, 0.006),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoarseCfoMethod {
    /// Spectral lines of the squared signal at +-Rs/2 + 2*offset.
    SquaredSpectrum,
    /// Power-weighted lag-one phase increment.
    Correlation,
}

/// Symbol detector run after synchronization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detector {
    /// Per-sample discriminator filtered by the receive pulse.
    Discriminator,
    /// Phase advance over one symbol.
    Differential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionMode {
    Hard,
    Soft,
}

impl From<DecisionMode> for Decision {
    fn from(d: DecisionMode) -> Decision {
        match d {
            DecisionMode::Hard => Decision::Hard,
            DecisionMode::Soft => Decision::Soft,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverConfig {
    pub agc_mode: AgcMode,
    pub agc_target_power_db: f64,
    pub notch_radius: f64,
    /// Minimum normalized preamble correlation, in (0, 1]; `None` picks
    /// 0.6 for uncoded and 0.3 for coded modes (longer sync reference).
    pub preamble_detect_threshold: Option<f64>,
    pub phy_mode: PhyMode,
    pub expected_access_address: u32,
    pub crc_init: u32,
    /// Channel used for de-whitening.
    pub channel: ChannelIndex,
    /// PDU length the link layer expects, in bits.
    pub pdu_bits: usize,
    pub sps: usize,
    pub bt: f64,
    pub modulation_index: f64,
    /// Bandwidth-time product of the receive (IQ) matched filter; `None`
    /// picks 0.8 for uncoded and 0.4 for coded modes.
    pub rx_filter_bt: Option<f64>,
    pub coarse_cfo: CoarseCfoMethod,
    pub decision: DecisionMode,
    pub detector: Detector,
    /// Soft values are clipped to this multiple of their median magnitude.
    pub soft_clip: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            agc_mode: AgcMode::FastAttack,
            agc_target_power_db: 0.0,
            notch_radius: 0.99,
            preamble_detect_threshold: None,
            phy_mode: PhyMode::Le1M,
            expected_access_address: ADVERTISING_ACCESS_ADDRESS,
            crc_init: ADVERTISING_CRC_INIT,
            channel: ChannelIndex::new(37).expect("advertising channel"),
            pdu_bits: 256,
            sps: DEFAULT_SPS,
            bt: DEFAULT_BT,
            modulation_index: DEFAULT_MOD_INDEX,
            rx_filter_bt: None,
            coarse_cfo: CoarseCfoMethod::SquaredSpectrum,
            decision: DecisionMode::Soft,
            soft_clip: 1.0,
            detector: Detector::Discriminator,
        }
    }
}

impl ReceiverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.notch_radius > 0.9 && self.notch_radius < 1.0) {
            return Err(Error::Param(format!(
                "notch radius {} outside (0.9, 1)",
                self.notch_radius
            )));
        }
        let threshold = self.detect_threshold();
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Param(format!(
                "detection threshold {threshold} outside (0, 1]"
            )));
        }
        if !(0.45..=0.55).contains(&self.modulation_index) {
            return Err(Error::Param(format!(
                "modulation index {} outside [0.45, 0.55]",
                self.modulation_index
            )));
        }
        if !(self.soft_clip > 0.0) {
            return Err(Error::Param("soft clip level must be positive".into()));
        }
        if !(self.filter_bt() > 0.0) {
            return Err(Error::Param("receive filter BT must be positive".into()));
        }
        crate::packet::check_pdu_len(self.pdu_bits)?;
        gaussian_taps(self.bt, self.sps, DEFAULT_SPAN)?;
        Ok(())
    }

    pub fn detect_threshold(&self) -> f64 {
        self.preamble_detect_threshold
            .unwrap_or(if self.phy_mode.is_coded() { 0.3 } else { 0.6 })
    }

    pub fn filter_bt(&self) -> f64 {
        self.rx_filter_bt
            .unwrap_or(if self.phy_mode.is_coded() { 0.4 } else { 0.8 })
    }

    pub fn pulse(&self) -> Result<PulseShape> {
        gaussian_taps(self.bt, self.sps, DEFAULT_SPAN)
    }

    pub fn sample_rate(&self) -> f64 {
        self.phy_mode.symbol_rate() * self.sps as f64
    }

    /// Known on-air symbols used for synchronization: preamble and
    /// access address (FEC-coded for the coded PHYs).
    pub fn sync_reference(&self) -> BitVector {
        let aa = self.expected_access_address;
        if self.phy_mode.is_coded() {
            let mut v = coded_preamble();
            v.extend_from(&coded_access_address_symbols(aa));
            v
        } else {
            let mut v = uncoded_preamble(self.phy_mode, aa).expect("uncoded mode");
            v.push_word_lsb_first(u64::from(aa), 32);
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RxPacketReport {
    pub detected: bool,
    pub aa_ok: bool,
    pub crc_ok: bool,
    /// Total (coarse + fine) frequency offset estimate.
    pub cfo_estimate_hz: f64,
    /// Sample index where the packet's first symbol starts.
    pub timing_offset: Option<usize>,
    pub sync_peak: f64,
    pub access_address: Option<u32>,
    pub pdu: Option<BitVector>,
}

impl RxPacketReport {
    fn undetected(cfo: f64, peak: f64) -> Self {
        RxPacketReport {
            detected: false,
            aa_ok: false,
            crc_ok: false,
            cfo_estimate_hz: cfo,
            timing_offset: None,
            sync_peak: peak,
            access_address: None,
            pdu: None,
        }
    }
}

/// Feedback AGC in the log-power domain. Fast-attack mode also cuts the
/// gain at once when a sample lands more than 6 dB above target.
pub fn agc(frame: &IqFrame, cfg: &ReceiverConfig) -> IqFrame {
    agc_with_gain(frame, cfg).0
}

/// [`agc`] together with the amplitude gain applied to each sample.
pub fn agc_with_gain(frame: &IqFrame, cfg: &ReceiverConfig) -> (IqFrame, Vec<f64>) {
    let (alpha, step) = cfg.agc_mode.constants();
    let target = cfg.agc_target_power_db;
    let hard_attack = cfg.agc_mode == AgcMode::FastAttack;
    let mut gain_db = 0.0f64;
    let mut power = db_to_linear(target);
    let mut gains = Vec::with_capacity(frame.len());
    let samples = frame
        .samples
        .iter()
        .map(|&x| {
            let mut g = 10f64.powf(gain_db / 20.0);
            let mut y = x * g;
            let inst_db = linear_to_db(y.norm_sqr().max(1e-30));
            if hard_attack && inst_db > target + 6.0 {
                gain_db -= inst_db - target;
                g = 10f64.powf(gain_db / 20.0);
                y = x * g;
                power = db_to_linear(target);
            }
            gains.push(g);
            power = (1.0 - alpha) * power + alpha * y.norm_sqr();
            let err = target - linear_to_db(power.max(1e-30));
            gain_db = (gain_db + step * err).clamp(-80.0, 80.0);
            y
        })
        .collect();
    (frame.with_samples(samples), gains)
}

/// First-order DC notch y[n] = x[n] - x[n-1] + r y[n-1].
pub fn dc_notch(frame: &IqFrame, radius: f64) -> IqFrame {
    let mut prev_x = Complex64::new(0.0, 0.0);
    let mut prev_y = Complex64::new(0.0, 0.0);
    let samples = frame
        .samples
        .iter()
        .map(|&x| {
            let y = x - prev_x + prev_y * radius;
            prev_x = x;
            prev_y = y;
            y
        })
        .collect();
    frame.with_samples(samples)
}

/// DC notch on an AGC output that follows the AGC's gain: the input is
/// divided by `gains`, notched and scaled back, so a gain step does not
/// turn a constant offset into a step.
pub fn dc_notch_compensated(frame: &IqFrame, gains: &[f64], radius: f64) -> IqFrame {
    assert_eq!(frame.len(), gains.len(), "one gain per sample");
    let raw = frame.with_samples(
        frame
            .samples
            .iter()
            .zip(gains)
            .map(|(x, g)| x / g)
            .collect(),
    );
    let notched = dc_notch(&raw, radius);
    frame.with_samples(
        notched
            .samples
            .iter()
            .zip(gains)
            .map(|(y, g)| y * g)
            .collect(),
    )
}

/// Coarse carrier offset from the squared-signal spectral lines.
pub fn coarse_cfo_estimate(frame: &IqFrame) -> Result<f64> {
    coarse_cfo_estimate_with(frame, CoarseCfoMethod::SquaredSpectrum)
}

pub fn coarse_cfo_estimate_with(frame: &IqFrame, method: CoarseCfoMethod) -> Result<f64> {
    let floor = 1e-12;
    if frame.is_empty() || mean_power(&frame.samples) < floor {
        return Err(Error::NoSignal);
    }
    match method {
        CoarseCfoMethod::Correlation => {
            let acc: Complex64 = frame.samples.windows(2).map(|w| w[1] * w[0].conj()).sum();
            Ok(acc.arg() * frame.sample_rate / (2.0 * PI))
        }
        CoarseCfoMethod::SquaredSpectrum => squared_spectrum_cfo(frame),
    }
}

/// Longest stretch of samples the squared-spectrum estimator transforms.
const SQUARED_SPECTRUM_MAX: usize = 1 << 16;

fn squared_spectrum_cfo(frame: &IqFrame) -> Result<f64> {
    let fs = frame.sample_rate;
    let rs = frame.symbol_rate;
    // envelope limiting keeps AGC transients out of the squared spectrum
    let mut mags: Vec<f64> = frame.samples.iter().map(|s| s.norm()).collect();
    let mid = mags.len() / 2;
    let limit = 2.0 * *mags.select_nth_unstable_by(mid, f64::total_cmp).1;
    let onset = frame
        .samples
        .iter()
        .position(|s| s.norm() > limit / 4.0)
        .unwrap_or(0);
    let segment = &frame.samples[onset.min(frame.len().saturating_sub(SQUARED_SPECTRUM_MAX))..];
    let segment = &segment[..segment.len().min(SQUARED_SPECTRUM_MAX)];
    let n = (segment.len() * 2).next_power_of_two();
    let mut buf: Vec<Complex64> = segment
        .iter()
        .map(|&s| {
            let m = s.norm();
            let s = if m > limit { s * (limit / m) } else { s };
            s * s
        })
        .collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let bin_hz = fs / n as f64;
    // lines sit at +-Rs/2 + 2*offset; search offsets up to Rs/5
    let half_width = 2.0 * rs / 5.0;
    let peak_in = |centre: f64| -> f64 {
        let lo = ((centre - half_width) / bin_hz).round() as i64;
        let hi = ((centre + half_width) / bin_hz).round() as i64;
        let idx = |k: i64| k.rem_euclid(n as i64) as usize;
        let best = (lo..=hi)
            .max_by(|&a, &b| power[idx(a)].total_cmp(&power[idx(b)]))
            .unwrap_or(0);
        let (ym, y0, yp) = (power[idx(best - 1)], power[idx(best)], power[idx(best + 1)]);
        let denom = ym - 2.0 * y0 + yp;
        let delta = if denom.abs() > 0.0 {
            0.5 * (ym - yp) / denom
        } else {
            0.0
        };
        (best as f64 + delta.clamp(-0.5, 0.5)) * bin_hz
    };
    let upper = peak_in(rs / 2.0);
    let lower = peak_in(-rs / 2.0);
    Ok((upper + lower) / 4.0)
}

fn rotate(samples: &[Complex64], offset_hz: f64, fs: f64, start: usize) -> Vec<Complex64> {
    mix(samples, -2.0 * PI * offset_hz / fs, start)
}

/// Gaussian low-pass taps for the receive (IQ) matched filter.
pub fn matched_filter_taps(rx_bt: f64, sps: usize) -> Vec<f64> {
    let span = 4usize;
    let len = span * sps + 1;
    let c = (len - 1) as f64 / 2.0;
    // sigma in samples for 3 dB bandwidth rx_bt * Rs
    let sigma = 2f64.ln().sqrt() / (2.0 * PI * rx_bt) * sps as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|n| (-(n as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

pub fn matched_filter(frame: &IqFrame, cfg: &ReceiverConfig) -> IqFrame {
    frame.with_samples(filter_aligned(
        &frame.samples,
        &matched_filter_taps(cfg.filter_bt(), cfg.sps),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncResult {
    /// Frame from the packet's first sample onward, fine CFO removed.
    pub aligned: IqFrame,
    pub timing_offset: usize,
    pub fine_cfo_hz: f64,
    pub peak: f64,
}

/// Normalized correlation of the detection track against the known
/// reference symbols, for every candidate packet start.
fn preamble_correlation(track: &[f64], delay: usize, reference: &[f64], sps: usize) -> Vec<f64> {
    let k = reference.len();
    let span = (k - 1) * sps + 1;
    if track.len() < delay + span {
        return Vec::new();
    }
    let u = &track[delay..];
    let starts = u.len() - span + 1;
    let n = (u.len() + span).next_power_of_two();
    let fwd = fft_forward(n);
    let inv = fft_inverse(n);
    let mut a: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    a.resize(n, Complex64::new(0.0, 0.0));
    let mut t = vec![Complex64::new(0.0, 0.0); n];
    for (i, &r) in reference.iter().enumerate() {
        t[i * sps] = Complex64::new(r, 0.0);
    }
    fwd.process(&mut a);
    fwd.process(&mut t);
    for (x, y) in a.iter_mut().zip(&t) {
        *x *= y.conj();
    }
    inv.process(&mut a);
    // strided running energy
    let mut cum = vec![0.0; u.len()];
    for i in 0..u.len() {
        cum[i] = u[i] * u[i] + if i >= sps { cum[i - sps] } else { 0.0 };
    }
    (0..starts)
        .map(|s| {
            let last = s + (k - 1) * sps;
            let energy = cum[last] - if s >= sps { cum[s - sps] } else { 0.0 };
            let c = a[s].re / n as f64;
            if energy > 1e-18 {
                c / (k as f64 * energy).sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// Preamble synchronization and fine CFO on a frame whose coarse offset
/// has been removed. The frame must be time-aligned with the transmitter
/// (zero-delay filtering only).
pub fn synchronize(frame: &IqFrame, cfg: &ReceiverConfig) -> Result<SyncResult> {
    synchronize_after(frame, cfg, None)
}

/// As [`synchronize`], for a frame that went through the DC notch before a
/// coarse correction of `notched_at_hz`; the local fine-CFO reference sees
/// the same notch.
fn synchronize_after(
    frame: &IqFrame,
    cfg: &ReceiverConfig,
    notched_at_hz: Option<f64>,
) -> Result<SyncResult> {
    let pulse = cfg.pulse()?;
    let sps = cfg.sps;
    let reference = cfg.sync_reference();
    let ref_nrz = reference.to_nrz();
    let track = detection_track(&frame.samples, &pulse);
    let delay = 2 * pulse.center();
    // only starts that leave room for the whole packet, unless none do
    let span = (ref_nrz.len().max(1) - 1) * sps + 1;
    let packet_span = (expected_symbols(cfg).max(1) - 1) * sps + 1;
    let searched = match track.len().checked_sub(delay + packet_span) {
        Some(extra) if packet_span >= span => &track[..delay + extra + span],
        _ => &track[..],
    };
    let rho = preamble_correlation(searched, delay, &ref_nrz, sps);
    let (mut start, peak) = rho
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &p)| (i, p))
        .unwrap_or((0, 0.0));
    if peak < cfg.detect_threshold() {
        return Err(Error::SyncFailure {
            peak,
            threshold: cfg.detect_threshold(),
        });
    }

    // sampling phase: widest eye over the expected packet around the peak
    let packet_symbols = expected_symbols(cfg);
    let eye = |s: usize| -> f64 {
        (0..packet_symbols)
            .map(|k| s + delay + k * sps)
            .take_while(|&i| i < track.len())
            .map(|i| track[i].abs())
            .sum()
    };
    let lo = start.saturating_sub(1);
    let hi = (start + 1).min(rho.len().saturating_sub(1));
    if let Some(best) = (lo..=hi).max_by(|&a, &b| eye(a).total_cmp(&eye(b)).then(b.cmp(&a))) {
        start = best;
    }

    let fine = fine_cfo(frame, start, &reference, cfg, &pulse, notched_at_hz)?;
    let tail = rotate(&frame.samples[start..], fine, frame.sample_rate, 0);
    Ok(SyncResult {
        aligned: frame.with_samples(tail),
        timing_offset: start,
        fine_cfo_hz: fine,
        peak,
    })
}

/// Residual offset from the phase slope of the received reference segment
/// against a locally modulated copy, one phase sample per symbol.
fn fine_cfo(
    frame: &IqFrame,
    start: usize,
    reference: &BitVector,
    cfg: &ReceiverConfig,
    pulse: &PulseShape,
    notched_at_hz: Option<f64>,
) -> Result<f64> {
    let fs = frame.sample_rate;
    let mut local = gmsk_modulate(reference, pulse, cfg.modulation_index, frame.symbol_rate);
    if let Some(f) = notched_at_hz {
        let shifted = local.with_samples(rotate(&local.samples, -f, fs, 0));
        local.samples = rotate(&dc_notch(&shifted, cfg.notch_radius).samples, f, fs, 0);
    }
    let local = filter_aligned(
        &local.samples,
        &matched_filter_taps(cfg.filter_bt(), cfg.sps),
    );
    let sps = cfg.sps;
    let usable = local.len().min(frame.len() - start);
    // the last symbols' pulse tails depend on data beyond the reference
    let symbols = (usable / sps).min(reference.len().saturating_sub(2));
    if symbols < 4 {
        return Err(Error::Length {
            needed: 4 * sps,
            got: usable,
        });
    }
    let z: Vec<Complex64> = (0..symbols)
        .map(|k| {
            (k * sps..(k + 1) * sps)
                .map(|n| frame.samples[start + n] * local[n].conj())
                .sum()
        })
        .collect();
    // unwrap per-symbol phases and fit a weighted line
    let mut phases = Vec::with_capacity(symbols);
    let mut prev = z[0].arg();
    phases.push(prev);
    for zk in &z[1..] {
        let mut p = zk.arg();
        while p - prev > PI {
            p -= 2.0 * PI;
        }
        while p - prev < -PI {
            p += 2.0 * PI;
        }
        phases.push(p);
        prev = p;
    }
    let w: Vec<f64> = z.iter().map(|c| c.norm()).collect();
    let sw: f64 = w.iter().sum();
    if sw <= 0.0 {
        return Ok(0.0);
    }
    let xm = w
        .iter()
        .enumerate()
        .map(|(k, wk)| k as f64 * wk)
        .sum::<f64>()
        / sw;
    let ym = w.iter().zip(&phases).map(|(wk, p)| wk * p).sum::<f64>() / sw;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, (wk, p)) in w.iter().zip(&phases).enumerate() {
        let dx = k as f64 - xm;
        num += wk * dx * (p - ym);
        den += wk * dx * dx;
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    Ok(slope * frame.symbol_rate / (2.0 * PI))
}

/// Total on-air symbols the receiver expects for its PHY and PDU length
/// (coded modes assume the configured mode's scheme).
pub fn expected_symbols(cfg: &ReceiverConfig) -> usize {
    match cfg.phy_mode.coding_scheme() {
        None => cfg.phy_mode.preamble_bits() + 32 + cfg.pdu_bits + 24,
        Some(s) => CODED_PREAMBLE_BITS + BLOCK1_SYMBOLS + block2_symbols(cfg.pdu_bits, s),
    }
}

/// One processing stage as recorded by [`Receiver`].
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub name: &'static str,
    pub frame: Option<IqFrame>,
}

/// Stateful single-frame receiver.
#[derive(Debug, Clone)]
pub struct Receiver {
    cfg: ReceiverConfig,
    capture_frames: bool,
    trace: Vec<StageRecord>,
}

impl Receiver {
    pub fn new(cfg: ReceiverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Receiver {
            cfg,
            capture_frames: false,
            trace: Vec::new(),
        })
    }

    /// Keep a copy of every intermediate IQ frame in the stage trace.
    pub fn capture_stages(mut self, on: bool) -> Self {
        self.capture_frames = on;
        self
    }

    pub fn config(&self) -> &ReceiverConfig {
        &self.cfg
    }

    /// Stages run by the last call to [`receive`](Self::receive), in order.
    pub fn trace(&self) -> &[StageRecord] {
        &self.trace
    }

    fn record(&mut self, name: &'static str, frame: Option<&IqFrame>) {
        let frame = if self.capture_frames {
            frame.cloned()
        } else {
            None
        };
        self.trace.push(StageRecord { name, frame });
    }

    pub fn receive(&mut self, frame: &IqFrame) -> RxPacketReport {
        self.trace.clear();
        self.record("input", Some(frame));
        if frame.is_empty() {
            return RxPacketReport::undetected(0.0, 0.0);
        }
        let cfg = self.cfg.clone();

        let (x, gains) = agc_with_gain(frame, &cfg);
        self.record("agc", Some(&x));
        let x = dc_notch_compensated(&x, &gains, cfg.notch_radius);
        self.record("dc_notch", Some(&x));

        let coarse = match coarse_cfo_estimate_with(&x, cfg.coarse_cfo) {
            Ok(f) if f.abs() < x.sample_rate / 2.0 => f,
            _ => return RxPacketReport::undetected(0.0, 0.0),
        };
        let x = x.with_samples(rotate(&x.samples, coarse, x.sample_rate, 0));
        self.record("coarse_cfo", Some(&x));

        let x = matched_filter(&x, &cfg);
        self.record("matched_filter", Some(&x));

        let sync = match synchronize_after(&x, &cfg, Some(coarse)) {
            Ok(s) => s,
            Err(Error::SyncFailure { peak, .. }) => {
                return RxPacketReport::undetected(coarse, peak)
            }
            Err(_) => return RxPacketReport::undetected(coarse, 0.0),
        };
        self.record("synchronize", Some(&sync.aligned));

        let mut report = RxPacketReport {
            detected: true,
            aa_ok: false,
            crc_ok: false,
            cfo_estimate_hz: coarse + sync.fine_cfo_hz,
            timing_offset: Some(sync.timing_offset),
            sync_peak: sync.peak,
            access_address: None,
            pdu: None,
        };

        let pulse = match cfg.pulse() {
            Ok(p) => p,
            Err(_) => return report,
        };
        let demod = match cfg.detector {
            Detector::Discriminator => gmsk_demodulate(&sync.aligned, &pulse),
            Detector::Differential => differential_demodulate(&sync.aligned, &pulse),
        };
        let soft = match demod {
            Ok(s) => clip_soft(s, expected_symbols(&cfg), cfg.soft_clip),
            Err(_) => return report,
        };
        self.record("demodulate", None);

        let decoded = if cfg.phy_mode.is_coded() {
            decode_coded_symbols(&soft, &cfg)
        } else {
            decode_uncoded_symbols(&soft, &cfg)
        };
        self.record("decode", None);
        let Some((aa, body)) = decoded else {
            return report;
        };
        report.access_address = Some(aa);

        let status = body.and_then(|b| {
            validate_packet_with_init(aa, cfg.expected_access_address, &b, cfg.crc_init)
                .ok()
                .map(|s| (s, b))
        });
        self.record("validate", None);
        report.aa_ok = aa == cfg.expected_access_address;
        if let Some((PacketStatus::Valid, b)) = status {
            report.crc_ok = true;
            report.pdu = Some(b.slice(0, b.len() - 24));
        }
        report
    }
}

/// One-symbol differential detection: the phase advance across each
/// symbol's pulse centre, wrapped to (-pi, pi].
pub fn differential_demodulate(frame: &IqFrame, pulse: &PulseShape) -> Result<Vec<f64>> {
    let sps = pulse.sps;
    let c = pulse.center();
    let (before, after) = (c - sps / 2, c + sps / 2);
    if frame.len() <= after {
        return Err(Error::Length {
            needed: after + 1,
            got: frame.len(),
        });
    }
    let x = &frame.samples;
    let symbols = (frame.len() - 1 - after) / sps + 1;
    Ok((0..symbols)
        .map(|k| (x[k * sps + after] * x[k * sps + before].conj()).arg())
        .collect())
}

/// Limits soft values to `clip` times their median magnitude over the
/// packet, so discriminator clicks do not dominate soft-decision metrics.
fn clip_soft(mut soft: Vec<f64>, packet_symbols: usize, clip: f64) -> Vec<f64> {
    let mut mags: Vec<f64> = soft.iter().take(packet_symbols).map(|v| v.abs()).collect();
    if mags.is_empty() || !clip.is_finite() {
        return soft;
    }
    let mid = mags.len() / 2;
    let limit = clip * *mags.select_nth_unstable_by(mid, f64::total_cmp).1;
    soft.iter_mut().for_each(|v| *v = v.clamp(-limit, limit));
    soft
}

/// Returns the received access address and, when enough symbols are
/// present, the de-whitened PDU ‖ CRC.
fn decode_uncoded_symbols(soft: &[f64], cfg: &ReceiverConfig) -> Option<(u32, Option<BitVector>)> {
    let pre = cfg.phy_mode.preamble_bits();
    if soft.len() < pre + 32 {
        return None;
    }
    let bits = hard_bits(soft);
    let aa = bits.word_lsb_first(pre, 32) as u32;
    let body_len = cfg.pdu_bits + 24;
    let body = (bits.len() >= pre + 32 + body_len)
        .then(|| whiten(&bits.slice(pre + 32, pre + 32 + body_len), cfg.channel));
    Some((aa, body))
}

fn decode_coded_symbols(soft: &[f64], cfg: &ReceiverConfig) -> Option<(u32, Option<BitVector>)> {
    let b1_start = CODED_PREAMBLE_BITS;
    let b2_start = b1_start + BLOCK1_SYMBOLS;
    if soft.len() < b2_start {
        return None;
    }
    let decision: Decision = cfg.decision.into();
    let block1 = decode_block1(&soft[b1_start..b2_start], decision).ok()?;
    let body = block1.scheme.and_then(|scheme| {
        let n = block2_symbols(cfg.pdu_bits, scheme);
        (soft.len() >= b2_start + n)
            .then(|| {
                decode_block2(&soft[b2_start..b2_start + n], scheme, cfg.channel, decision).ok()
            })
            .flatten()
    });
    Some((block1.access_address, body))
}

/// Convenience wrapper: one-shot receive with a fresh receiver.
pub fn receive(frame: &IqFrame, cfg: &ReceiverConfig) -> Result<RxPacketReport> {
    Ok(Receiver::new(cfg.clone())?.receive(frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_noise, apply_cfo};

    fn tone_frame(n: usize, amp: f64) -> IqFrame {
        IqFrame::new(
            (0..n)
                .map(|i| Complex64::from_polar(amp, 0.3 * i as f64))
                .collect(),
            8e6,
            1e6,
        )
    }

    fn tail_power_db(f: &IqFrame, from: usize) -> f64 {
        linear_to_db(mean_power(&f.samples[from..]))
    }

    #[test]
    fn agc_fixed_point() {
        let cfg = ReceiverConfig::default();
        let f = tone_frame(4096, 1.0);
        let y = agc(&f, &cfg);
        assert!(tail_power_db(&y, 0).abs() < 1.0);
        assert!((y.samples[4000] / f.samples[4000]).norm() > 0.89);
    }

    #[test]
    fn agc_lifts_weak_input() {
        for mode in [AgcMode::FastAttack, AgcMode::SlowAttack] {
            let cfg = ReceiverConfig {
                agc_mode: mode,
                ..Default::default()
            };
            let y = agc(&tone_frame(8192, 0.01), &cfg);
            assert!(tail_power_db(&y, 4096).abs() < 1.0, "{mode:?}");
        }
    }

    #[test]
    fn agc_step_response() {
        for (mode, settle) in [(AgcMode::FastAttack, 64), (AgcMode::SlowAttack, 1024)] {
            let cfg = ReceiverConfig {
                agc_mode: mode,
                ..Default::default()
            };
            for step_db in [20.0, -20.0] {
                let mut f = tone_frame(8192, 1.0);
                let g = 10f64.powf(step_db / 20.0);
                f.samples[4096..].iter_mut().for_each(|s| *s *= g);
                let y = agc(&f, &cfg);
                let after: Vec<f64> = y.samples[4096 + settle..4096 + settle + 256]
                    .iter()
                    .map(|s| linear_to_db(s.norm_sqr()))
                    .collect();
                assert!(
                    after.iter().all(|p| p.abs() < 1.0),
                    "{mode:?} {step_db}: {:?}",
                    &after[..4]
                );
            }
        }
    }

    #[test]
    fn notch_behaviour() {
        let r = 0.99;
        let dc = IqFrame::new(vec![Complex64::new(0.7, -0.2); 2000], 8e6, 1e6);
        let y = dc_notch(&dc, r);
        let settle = (5.0 / (1.0 - r)) as usize;
        assert!(y.samples[settle..].iter().all(|s| s.norm() < 0.01 * 0.73));
        let zero = IqFrame::zeros(100, 8e6, 1e6);
        assert!(dc_notch(&zero, r).samples.iter().all(|s| s.norm() == 0.0));
        // fs/4 tone
        let tone = IqFrame::new(
            (0..4000)
                .map(|n| Complex64::from_polar(1.0, PI / 2.0 * n as f64))
                .collect(),
            8e6,
            1e6,
        );
        let y = dc_notch(&tone, r);
        assert!(tail_power_db(&y, 2000).abs() < 0.5);
    }

    #[test]
    fn compensated_notch_ignores_gain_steps() {
        let n = 4000;
        let dc = IqFrame::new(vec![Complex64::new(0.1, 0.05); n], 8e6, 1e6);
        let gains: Vec<f64> = (0..n).map(|i| if i < 2000 { 10.0 } else { 1.0 }).collect();
        let scaled = dc.with_samples(dc.samples.iter().zip(&gains).map(|(x, g)| x * g).collect());
        let plain = dc_notch(&scaled, 0.99);
        let comp = dc_notch_compensated(&scaled, &gains, 0.99);
        assert!(plain.samples[2000].norm() > 0.5);
        assert!(comp.samples[1000..].iter().all(|s| s.norm() < 1e-3));
    }

    #[test]
    fn config_validation() {
        let bad = ReceiverConfig {
            notch_radius: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ReceiverConfig {
            preamble_detect_threshold: Some(0.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(Receiver::new(ReceiverConfig::default()).is_ok());
    }

    #[test]
    fn coarse_cfo_rejects_empty_band() {
        assert!(matches!(
            coarse_cfo_estimate(&IqFrame::zeros(1000, 8e6, 1e6)),
            Err(Error::NoSignal)
        ));
    }

    #[test]
    fn noise_only_fails_sync() {
        let cfg = ReceiverConfig::default();
        let f = add_noise(&IqFrame::zeros(6000, 8e6, 1e6), 1.0, 3);
        assert!(matches!(
            synchronize(&f, &cfg),
            Err(Error::SyncFailure { .. })
        ));
        let r = receive(&apply_cfo(&f, 1e3).unwrap(), &cfg).unwrap();
        assert!(!r.detected && !r.aa_ok && !r.crc_ok);
    }

    fn transmit(mode: PhyMode, pdu_bits: usize, lead: usize, seed: u64) -> (IqFrame, BitVector) {
        use crate::packet::{assemble_uncoded, LinkLayerPacket};
        use rand::Rng;
        let mut rng = crate::seed::rng(seed);
        let pdu: BitVector = (0..pdu_bits).map(|_| rng.random::<bool>()).collect();
        let ch = ChannelIndex::new(37).unwrap();
        let pkt = LinkLayerPacket::advertising(ADVERTISING_ACCESS_ADDRESS, pdu.clone(), mode, ch)
            .unwrap();
        let bits = match mode.coding_scheme() {
            None => assemble_uncoded(&pkt).unwrap(),
            Some(s) => crate::coded::assemble_coded(&pkt, s).unwrap(),
        };
        let pulse = gaussian_taps(DEFAULT_BT, DEFAULT_SPS, DEFAULT_SPAN).unwrap();
        let tx = gmsk_modulate(&bits, &pulse, DEFAULT_MOD_INDEX, mode.symbol_rate());
        let mut samples = vec![Complex64::new(0.0, 0.0); lead];
        samples.extend(&tx.samples);
        samples.extend(vec![Complex64::new(0.0, 0.0); 40 * DEFAULT_SPS]);
        (tx.with_samples(samples), pdu)
    }

    #[test]
    fn clean_round_trip_all_modes() {
        for mode in PhyMode::ALL {
            let (f, pdu) = transmit(mode, 256, 100, 1);
            let f = add_noise(&apply_cfo(&f, 37e3).unwrap(), 1e-4, 2);
            let cfg = ReceiverConfig {
                phy_mode: mode,
                ..Default::default()
            };
            let r = receive(&f, &cfg).unwrap();
            assert!(r.detected && r.aa_ok && r.crc_ok, "{mode}: {r:?}");
            assert_eq!(r.pdu.unwrap(), pdu);
            assert_eq!(r.timing_offset, Some(100), "{mode}");
            assert!(
                (r.cfo_estimate_hz - 37e3).abs() < 1e3,
                "{mode}: {}",
                r.cfo_estimate_hz
            );
        }
    }
}
