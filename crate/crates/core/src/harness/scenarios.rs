use crate::channel::{InterfererConfig, ProfileKind};
use crate::phy::{ChannelIndex, PhyMode};

use super::config::{ChannelPlan, ProfileSpec, ScenarioConfig};

/// Campaign seed shared by the canned scenarios.
pub const PAPER_SEED: u64 = 2021;

/// SIR points standing in for the three interferer gain settings, weakest
/// interferer first.
pub const PAPER_SIR_DB: [f64; 3] = [0.0, -5.0, -10.0];

/// SNR at which the interference scenarios run.
pub const INTERFERENCE_SNR_DB: f64 = 20.0;

/// The four measurement campaigns: LOS and NLOS, each with and without a
/// co-channel 20 MHz WLAN interferer, all four PHY modes on 2402 MHz.
pub fn paper_scenarios() -> Vec<ScenarioConfig> {
    let base = |name: &str, kind: ProfileKind| {
        let mut c = ScenarioConfig::new(
            name,
            PhyMode::ALL.to_vec(),
            ProfileSpec::Named(kind),
            PAPER_SEED,
        );
        c.channel = ChannelPlan::Fixed(ChannelIndex::new(37).expect("advertising channel"));
        c
    };
    let with_interference = |name: &str, kind: ProfileKind| {
        let mut c = base(name, kind);
        c.snr_sweep = vec![Some(INTERFERENCE_SNR_DB)];
        c.sir_sweep = Some(PAPER_SIR_DB.to_vec());
        c.interferer = Some(InterfererConfig::default());
        c
    };
    vec![
        base("los", ProfileKind::Los),
        base("nlos", ProfileKind::Nlos),
        with_interference("los-interference", ProfileKind::Los),
        with_interference("nlos-interference", ProfileKind::Nlos),
    ]
}
