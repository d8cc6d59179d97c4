//! PHY modes and the RF channel plan.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default advertising access address.
pub const ADVERTISING_ACCESS_ADDRESS: u32 = 0x8E89_BED6;
/// CRC preset used on advertising channels.
pub const ADVERTISING_CRC_INIT: u32 = 0x55_5555;

pub const MIN_PDU_BITS: usize = 16;
pub const MAX_PDU_BITS: usize = 2056;

/// Coded-PHY symbol mapping: S=2 (500 kb/s) or S=8 (125 kb/s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodingScheme {
    S2,
    S8,
}

impl CodingScheme {
    /// On-air symbols per FEC output bit.
    pub fn pattern_len(self) -> usize {
        match self {
            CodingScheme::S2 => 1,
            CodingScheme::S8 => 4,
        }
    }

    /// Two-bit coding indicator value.
    pub fn coding_indicator(self) -> u8 {
        match self {
            CodingScheme::S8 => 0b00,
            CodingScheme::S2 => 0b01,
        }
    }

    pub fn from_coding_indicator(ci: u8) -> Option<Self> {
        match ci {
            0b00 => Some(CodingScheme::S8),
            0b01 => Some(CodingScheme::S2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhyMode {
    #[serde(rename = "LE1M")]
    Le1M,
    #[serde(rename = "LE2M")]
    Le2M,
    #[serde(rename = "LE500K")]
    Le500K,
    #[serde(rename = "LE125K")]
    Le125K,
}

impl PhyMode {
    pub const ALL: [PhyMode; 4] = [
        PhyMode::Le1M,
        PhyMode::Le2M,
        PhyMode::Le500K,
        PhyMode::Le125K,
    ];

    pub fn is_coded(self) -> bool {
        matches!(self, PhyMode::Le500K | PhyMode::Le125K)
    }

    pub fn preamble_bits(self) -> usize {
        match self {
            PhyMode::Le1M => 8,
            PhyMode::Le2M => 16,
            PhyMode::Le500K | PhyMode::Le125K => 80,
        }
    }

    /// GMSK symbol rate in Hz.
    pub fn symbol_rate(self) -> f64 {
        match self {
            PhyMode::Le2M => 2e6,
            _ => 1e6,
        }
    }

    /// User data rate in bit/s.
    pub fn data_rate(self) -> f64 {
        match self.coding_scheme() {
            None => self.symbol_rate(),
            Some(s) => self.symbol_rate() / (2 * s.pattern_len()) as f64,
        }
    }

    /// Coding scheme of the payload block; `None` for uncoded modes.
    pub fn coding_scheme(self) -> Option<CodingScheme> {
        match self {
            PhyMode::Le500K => Some(CodingScheme::S2),
            PhyMode::Le125K => Some(CodingScheme::S8),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhyMode::Le1M => "LE1M",
            PhyMode::Le2M => "LE2M",
            PhyMode::Le500K => "LE500K",
            PhyMode::Le125K => "LE125K",
        }
    }
}

impl fmt::Display for PhyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LE1M" | "1M" => Ok(PhyMode::Le1M),
            "LE2M" | "2M" => Ok(PhyMode::Le2M),
            "LE500K" | "500K" => Ok(PhyMode::Le500K),
            "LE125K" | "125K" => Ok(PhyMode::Le125K),
            other => Err(Error::Param(format!("unknown PHY mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Data,
    Advertising,
}

/// Link-layer channel index 0..=39. Indices 0..=36 are data channels,
/// 37..=39 advertising channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ChannelIndex(u8);

impl ChannelIndex {
    pub const COUNT: u8 = 40;
    pub const DATA_COUNT: u8 = 37;

    pub fn new(index: u8) -> Result<Self> {
        if index < Self::COUNT {
            Ok(ChannelIndex(index))
        } else {
            Err(Error::Param(format!(
                "channel index {index} outside 0..=39"
            )))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn kind(self) -> ChannelKind {
        if self.0 >= Self::DATA_COUNT {
            ChannelKind::Advertising
        } else {
            ChannelKind::Data
        }
    }

    /// RF channel number 0..=39 (ascending frequency).
    pub fn rf_channel(self) -> u8 {
        match self.0 {
            37 => 0,
            38 => 12,
            39 => 39,
            i if i <= 10 => i + 1,
            i => i + 2,
        }
    }

    pub fn center_frequency_mhz(self) -> f64 {
        2402.0 + 2.0 * f64::from(self.rf_channel())
    }

    pub fn all() -> impl Iterator<Item = ChannelIndex> {
        (0..Self::COUNT).map(ChannelIndex)
    }

    pub fn data_channels() -> impl Iterator<Item = ChannelIndex> {
        (0..Self::DATA_COUNT).map(ChannelIndex)
    }
}

impl TryFrom<u8> for ChannelIndex {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        ChannelIndex::new(v)
    }
}

impl From<ChannelIndex> for u8 {
    fn from(c: ChannelIndex) -> u8 {
        c.0
    }
}
