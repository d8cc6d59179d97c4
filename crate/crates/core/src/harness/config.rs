use serde::{Deserialize, Serialize};

use crate::channel::{ChannelProfile, InterfererConfig, ProfileKind};
use crate::csa::ChannelMap;
use crate::error::{Error, Result};
use crate::packet::check_pdu_len;
use crate::phy::{ChannelIndex, PhyMode, ADVERTISING_ACCESS_ADDRESS, ADVERTISING_CRC_INIT};
use crate::rx::ReceiverConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HopAlgorithm {
    Csa1,
    Csa2,
}

/// How each frame's RF channel is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelPlan {
    Fixed(ChannelIndex),
    /// Uniformly random data channel per frame.
    Random,
    /// Frame `i` is connection event `i`.
    Hopping {
        algorithm: HopAlgorithm,
        #[serde(default = "default_hop")]
        hop_increment: u8,
        #[serde(default)]
        map: ChannelMap,
    },
}

fn default_hop() -> u8 {
    7
}

/// A named default profile or a fully specified one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(ProfileKind),
    Custom(ChannelProfile),
}

impl ProfileSpec {
    pub fn resolve(&self) -> ChannelProfile {
        match self {
            ProfileSpec::Named(ProfileKind::Los) => ChannelProfile::los(),
            ProfileSpec::Named(ProfileKind::Nlos) => ChannelProfile::nlos(),
            ProfileSpec::Named(ProfileKind::Reverberant) => ChannelProfile::reverberant(),
            ProfileSpec::Custom(p) => p.clone(),
        }
    }
}

/// One Monte Carlo campaign, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub phy_modes: Vec<PhyMode>,
    pub channel: ChannelPlan,
    /// Signal-to-noise ratios in dB; `null` runs without noise.
    pub snr_sweep: Vec<Option<f64>>,
    /// Signal-to-interference ratios in dB, referenced to the full-band
    /// interferer power. Requires `interferer`.
    #[serde(default)]
    pub sir_sweep: Option<Vec<f64>>,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub interferer: Option<InterfererConfig>,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_pdu_bits")]
    pub pdu_bits: usize,
    pub seed: u64,
    #[serde(default = "default_aa")]
    pub access_address: u32,
    #[serde(default = "default_crc_init")]
    pub crc_init: u32,
    /// Carrier offset drawn uniformly from +-cfo_max_hz per frame.
    #[serde(default = "default_cfo")]
    pub cfo_max_hz: f64,
    /// DC offset level relative to the signal, random phase; `null` disables.
    #[serde(default = "default_dc")]
    pub dc_dbc: Option<f64>,
    #[serde(default)]
    pub receiver: ReceiverConfig,
}

fn default_frames() -> usize {
    10_000
}
/// 255-octet PDU; an LE1M packet then spans 16832 samples at 8 samples
/// per symbol.
fn default_pdu_bits() -> usize {
    2040
}
fn default_aa() -> u32 {
    ADVERTISING_ACCESS_ADDRESS
}
fn default_crc_init() -> u32 {
    ADVERTISING_CRC_INIT
}
fn default_cfo() -> f64 {
    50e3
}
fn default_dc() -> Option<f64> {
    Some(-20.0)
}

impl ScenarioConfig {
    /// A config with every optional field at its default.
    pub fn new(
        name: impl Into<String>,
        phy_modes: Vec<PhyMode>,
        profile: ProfileSpec,
        seed: u64,
    ) -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            phy_modes,
            channel: ChannelPlan::Random,
            snr_sweep: (0..=10).map(|i| Some(2.0 * f64::from(i))).collect(),
            sir_sweep: None,
            profile,
            interferer: None,
            frames: default_frames(),
            pdu_bits: default_pdu_bits(),
            seed,
            access_address: default_aa(),
            crc_init: default_crc_init(),
            cfo_max_hz: default_cfo(),
            dc_dbc: default_dc(),
            receiver: ReceiverConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
            Error::config(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str, e: Error| Error::config(f, e.to_string());
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if self.name.is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        if self.phy_modes.is_empty() {
            return Err(Error::config("phy_modes", "must list at least one mode"));
        }
        if self.snr_sweep.is_empty() {
            return Err(Error::config("snr_sweep", "must not be empty"));
        }
        if self.snr_sweep.iter().flatten().any(|s| !s.is_finite()) {
            return Err(Error::config(
                "snr_sweep",
                "values must be finite (use null for no noise)",
            ));
        }
        match (&self.sir_sweep, &self.interferer) {
            (Some(s), _) if s.is_empty() => {
                return Err(Error::config("sir_sweep", "must not be empty"))
            }
            (Some(s), _) if s.iter().any(|v| !v.is_finite()) => {
                return Err(Error::config("sir_sweep", "values must be finite"))
            }
            (Some(_), None) => return Err(Error::config("sir_sweep", "requires an interferer")),
            (None, Some(_)) => return Err(Error::config("interferer", "requires a sir_sweep")),
            _ => {}
        }
        if let Some(i) = &self.interferer {
            i.validate().map_err(|e| field("interferer", e))?;
        }
        if self.frames == 0 {
            return Err(Error::config("frames", "must be at least 1"));
        }
        check_pdu_len(self.pdu_bits).map_err(|e| field("pdu_bits", e))?;
        self.profile
            .resolve()
            .validate()
            .map_err(|e| field("profile", e))?;
        if let ChannelPlan::Hopping { hop_increment, .. } = &self.channel {
            if !(5..=16).contains(hop_increment) {
                return Err(Error::config(
                    "channel.hop_increment",
                    "must be within 5..=16",
                ));
            }
        }
        if !(self.cfo_max_hz >= 0.0 && self.cfo_max_hz.is_finite()) {
            return Err(Error::config(
                "cfo_max_hz",
                "must be finite and non-negative",
            ));
        }
        for mode in &self.phy_modes {
            let fs = mode.symbol_rate() * self.receiver.sps as f64;
            if self.cfo_max_hz >= fs / 2.0 {
                return Err(Error::config(
                    "cfo_max_hz",
                    format!("aliases at {fs} Hz sampling"),
                ));
            }
        }
        if let Some(dc) = self.dc_dbc {
            if !dc.is_finite() {
                return Err(Error::config(
                    "dc_dbc",
                    "must be finite (use null to disable)",
                ));
            }
        }
        self.receiver.validate().map_err(|e| field("receiver", e))?;
        Ok(())
    }

    /// (SNR, SIR) points in sweep order.
    pub fn sweep_points(&self) -> Vec<(Option<f64>, Option<f64>)> {
        let sirs: Vec<Option<f64>> = match &self.sir_sweep {
            Some(s) => s.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        };
        self.snr_sweep
            .iter()
            .flat_map(|&snr| sirs.iter().map(move |&sir| (snr, sir)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "schema_version": 1,
            "name": "t",
            "phy_modes": ["LE1M", "LE125K"],
            "channel": {"fixed": 12},
            "snr_sweep": [null, 10],
            "profile": "nlos",
            "seed": 9
        }"#
    }

    #[test]
    fn parses_with_defaults() {
        let c = ScenarioConfig::from_json(minimal()).unwrap();
        assert_eq!(c.frames, 10_000);
        assert_eq!(c.pdu_bits, 2040);
        assert_eq!(
            c.channel,
            ChannelPlan::Fixed(ChannelIndex::new(12).unwrap())
        );
        assert_eq!(c.profile.resolve(), ChannelProfile::nlos());
        assert_eq!(c.sweep_points(), vec![(None, None), (Some(10.0), None)]);
        let back = ScenarioConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_fields() {
        let typo = minimal().replace("\"seed\"", "\"sed\"");
        assert!(matches!(
            ScenarioConfig::from_json(&typo),
            Err(Error::Config { .. })
        ));
        let no_seed = minimal().replace(",\n            \"seed\": 9", "");
        assert!(ScenarioConfig::from_json(&no_seed).is_err());
        let mut c = ScenarioConfig::from_json(minimal()).unwrap();
        c.frames = 0;
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "frames"));
        let mut c = ScenarioConfig::from_json(minimal()).unwrap();
        c.sir_sweep = Some(vec![0.0]);
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "sir_sweep"));
        let mut c = ScenarioConfig::from_json(minimal()).unwrap();
        c.schema_version = 2;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::from_json(minimal()).unwrap();
        c.snr_sweep.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hopping_plan_parses() {
        let text = minimal().replace(
            r#"{"fixed": 12}"#,
            r#"{"hopping": {"algorithm": "csa2", "map": "0x00000000ff"}}"#,
        );
        let c = ScenarioConfig::from_json(&text).unwrap();
        match c.channel {
            ChannelPlan::Hopping {
                algorithm,
                hop_increment,
                map,
            } => {
                assert_eq!(algorithm, HopAlgorithm::Csa2);
                assert_eq!(hop_increment, 7);
                assert_eq!(map.n_used(), 8);
            }
            other => panic!("{other:?}"),
        }
    }
}
