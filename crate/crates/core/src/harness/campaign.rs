use num_complex::Complex64;
use rand::Rng;

use crate::bits::BitVector;
use crate::channel::{
    add_noise, apply_cfo, apply_dc, fade, mix_with_gain, wlan_interferer_in_band,
};
use crate::coded::assemble_coded;
use crate::csa::{csa1_next, csa2_select, HopState};
use crate::error::Result;
use crate::modem::{gmsk_modulate, IqFrame};
use crate::packet::{assemble_uncoded, LinkLayerPacket};
use crate::phy::{ChannelIndex, PhyMode};
use crate::rx::{Receiver, ReceiverConfig, RxPacketReport};
use crate::seed;

use super::config::{ChannelPlan, HopAlgorithm, ScenarioConfig};
use super::results::PerResult;

const LEAD_GUARD_SYMBOLS: std::ops::RangeInclusive<usize> = 16..=80;
const TRAIL_GUARD_SYMBOLS: usize = 16;

const STREAM_TX: u64 = 1;
const STREAM_FADING: u64 = 2;
const STREAM_INTERFERER: u64 = 3;
const STREAM_NOISE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon data-parallel over frames; sequential when built without the
    /// `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// One sweep point: SNR and SIR in dB, `None` meaning absent.
pub type SweepPoint = (Option<f64>, Option<f64>);

/// A transmitted frame and its ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedFrame {
    pub frame: IqFrame,
    pub channel: ChannelIndex,
    pub pdu: BitVector,
    /// Samples preceding the packet's first symbol.
    pub lead_samples: usize,
    pub cfo_hz: f64,
}

fn point_bits(v: Option<f64>) -> u64 {
    v.map_or(u64::MAX, f64::to_bits)
}

fn mode_tag(mode: PhyMode) -> u64 {
    PhyMode::ALL
        .iter()
        .position(|&m| m == mode)
        .expect("known mode") as u64
}

fn frame_seed(cfg: &ScenarioConfig, mode: PhyMode, point: SweepPoint, index: u64) -> u64 {
    seed::derive(
        cfg.seed,
        &[
            seed::hash_str(&cfg.name),
            mode_tag(mode),
            point_bits(point.0),
            point_bits(point.1),
            index,
        ],
    )
}

fn channel_for(cfg: &ScenarioConfig, index: u64, rng: &mut impl Rng) -> Result<ChannelIndex> {
    match &cfg.channel {
        ChannelPlan::Fixed(c) => Ok(*c),
        ChannelPlan::Random => ChannelIndex::new(rng.random_range(0..ChannelIndex::DATA_COUNT)),
        ChannelPlan::Hopping {
            algorithm: HopAlgorithm::Csa1,
            hop_increment,
            map,
        } => {
            let mut state = HopState::new(*hop_increment, cfg.access_address)?;
            state.last_unmapped = ((index % 37) * u64::from(*hop_increment) % 37) as u8;
            Ok(csa1_next(state, map)?.0)
        }
        ChannelPlan::Hopping {
            algorithm: HopAlgorithm::Csa2,
            map,
            ..
        } => csa2_select(index as u16, cfg.access_address, map),
    }
}

/// Builds frame `index` of a sweep point: random PDU, assembly,
/// modulation, guard intervals, fading, CFO, DC, interference and noise.
pub fn generate_frame(
    cfg: &ScenarioConfig,
    mode: PhyMode,
    point: SweepPoint,
    index: u64,
) -> Result<GeneratedFrame> {
    let base = frame_seed(cfg, mode, point, index);
    let mut rng = seed::rng(seed::derive(base, &[STREAM_TX]));
    let channel = channel_for(cfg, index, &mut rng)?;
    let pdu: BitVector = (0..cfg.pdu_bits).map(|_| rng.random::<bool>()).collect();
    let packet =
        LinkLayerPacket::new(cfg.access_address, pdu.clone(), mode, channel, cfg.crc_init)?;
    let bits = match mode.coding_scheme() {
        None => assemble_uncoded(&packet)?,
        Some(scheme) => assemble_coded(&packet, scheme)?,
    };
    let rx = &cfg.receiver;
    let sps = rx.sps;
    let pulse = rx.pulse()?;
    let tx = gmsk_modulate(&bits, &pulse, rx.modulation_index, mode.symbol_rate());

    let lead = rng.random_range(LEAD_GUARD_SYMBOLS) * sps;
    let zero = Complex64::new(0.0, 0.0);
    let mut samples = vec![zero; lead];
    samples.extend_from_slice(&tx.samples);
    samples.resize(samples.len() + TRAIL_GUARD_SYMBOLS * sps, zero);
    let mut frame = tx.with_samples(samples);

    let cfo_hz = if cfg.cfo_max_hz > 0.0 {
        rng.random_range(-cfg.cfo_max_hz..=cfg.cfo_max_hz)
    } else {
        0.0
    };
    let dc = cfg.dc_dbc.map(|dbc| {
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        Complex64::from_polar(10f64.powf(dbc / 20.0), phase)
    });

    let profile = cfg.profile.resolve();
    let profile_seed = seed::derive(base, &[STREAM_FADING, profile.seed]);
    frame = fade(&frame, &profile.with_seed(profile_seed))?;
    frame = apply_cfo(&frame, cfo_hz)?;
    if let Some(dc) = dc {
        frame = apply_dc(&frame, dc);
    }
    if let (Some(sir), Some(icfg)) = (point.1, &cfg.interferer) {
        let mut icfg = icfg.clone();
        icfg.sir_db = sir;
        icfg.seed = seed::derive(base, &[STREAM_INTERFERER, icfg.seed]);
        let interferer = wlan_interferer_in_band(frame.len(), &icfg, frame.sample_rate)?;
        // unit-power transmit signal; full-band interferer power is one
        frame = mix_with_gain(&frame, &interferer, 10f64.powf(-sir / 20.0))?;
    }
    if let Some(snr) = point.0 {
        frame = add_noise(
            &frame,
            10f64.powf(-snr / 10.0),
            seed::derive(base, &[STREAM_NOISE]),
        );
    }
    Ok(GeneratedFrame {
        frame,
        channel,
        pdu,
        lead_samples: lead,
        cfo_hz,
    })
}

/// Receiver settings for one frame of a campaign.
pub fn receiver_config(
    cfg: &ScenarioConfig,
    mode: PhyMode,
    channel: ChannelIndex,
) -> ReceiverConfig {
    ReceiverConfig {
        phy_mode: mode,
        channel,
        pdu_bits: cfg.pdu_bits,
        expected_access_address: cfg.access_address,
        crc_init: cfg.crc_init,
        ..cfg.receiver.clone()
    }
}

/// Generates and receives one frame.
pub fn run_frame(
    cfg: &ScenarioConfig,
    mode: PhyMode,
    point: SweepPoint,
    index: u64,
) -> Result<(GeneratedFrame, RxPacketReport)> {
    let generated = generate_frame(cfg, mode, point, index)?;
    let mut receiver = Receiver::new(receiver_config(cfg, mode, generated.channel))?;
    let report = receiver.receive(&generated.frame);
    Ok((generated, report))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    detected: u64,
    valid: u64,
}

impl Counts {
    fn merge(self, o: Counts) -> Counts {
        Counts {
            detected: self.detected + o.detected,
            valid: self.valid + o.valid,
        }
    }
}

fn frame_counts(
    cfg: &ScenarioConfig,
    mode: PhyMode,
    point: SweepPoint,
    index: u64,
) -> Result<Counts> {
    let (_, r) = run_frame(cfg, mode, point, index)?;
    Ok(Counts {
        detected: u64::from(r.detected),
        valid: u64::from(r.aa_ok && r.crc_ok),
    })
}

fn run_point(
    cfg: &ScenarioConfig,
    mode: PhyMode,
    point: SweepPoint,
    exec: Execution,
) -> Result<Counts> {
    let frames = cfg.frames as u64;
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..frames)
                .into_par_iter()
                .map(|i| frame_counts(cfg, mode, point, i))
                .try_reduce(Counts::default, |a, b| Ok(a.merge(b)))
        }
        _ => (0..frames).try_fold(Counts::default(), |acc, i| {
            Ok(acc.merge(frame_counts(cfg, mode, point, i)?))
        }),
    }
}

/// Runs every (PHY mode, sweep point) of the scenario.
pub fn run_campaign(cfg: &ScenarioConfig) -> Result<Vec<PerResult>> {
    run_campaign_with(cfg, Execution::default())
}

pub fn run_campaign_with(cfg: &ScenarioConfig, exec: Execution) -> Result<Vec<PerResult>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &mode in &cfg.phy_modes {
        for point in cfg.sweep_points() {
            let c = run_point(cfg, mode, point, exec)?;
            out.push(PerResult::new(
                cfg.name.clone(),
                mode,
                point.0,
                point.1,
                cfg.frames as u64,
                c.detected,
                c.valid,
            ));
        }
    }
    Ok(out)
}

/// Runs the scenario once per listed channel (fixed-channel each), for
/// feeding [`update_channel_map`](super::update_channel_map).
pub fn run_channel_survey(
    cfg: &ScenarioConfig,
    channels: &[ChannelIndex],
    mode: PhyMode,
    point: SweepPoint,
) -> Result<Vec<(ChannelIndex, PerResult)>> {
    channels
        .iter()
        .map(|&c| {
            let mut one = cfg.clone();
            one.channel = ChannelPlan::Fixed(c);
            one.phy_modes = vec![mode];
            one.snr_sweep = vec![point.0];
            one.sir_sweep = point.1.map(|s| vec![s]);
            let r = run_campaign(&one)?.remove(0);
            Ok((c, r))
        })
        .collect()
}
