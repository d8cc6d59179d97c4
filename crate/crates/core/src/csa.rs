//! Channel selection algorithms #1 and #2 over a used-channel map.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::phy::ChannelIndex;

const DATA_CHANNELS: u8 = ChannelIndex::DATA_COUNT;
const FULL_MASK: u64 = (1 << DATA_CHANNELS) - 1;

/// Set of usable data channels, bit `i` = channel `i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelMap {
    mask: u64,
}

impl ChannelMap {
    pub fn all() -> Self {
        ChannelMap { mask: FULL_MASK }
    }

    pub fn from_mask(mask: u64) -> Result<Self> {
        if mask & !FULL_MASK != 0 {
            return Err(Error::Map(format!(
                "mask {mask:#x} has bits above channel 36"
            )));
        }
        let map = ChannelMap { mask };
        map.check()?;
        Ok(map)
    }

    pub fn from_channels(channels: impl IntoIterator<Item = u8>) -> Result<Self> {
        let mut mask = 0u64;
        for c in channels {
            if c >= DATA_CHANNELS {
                return Err(Error::Map(format!("channel {c} is not a data channel")));
            }
            mask |= 1 << c;
        }
        Self::from_mask(mask)
    }

    fn check(&self) -> Result<()> {
        if self.n_used() < 2 {
            Err(Error::Map(format!(
                "{} used channels, need at least 2",
                self.n_used()
            )))
        } else {
            Ok(())
        }
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn n_used(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(&self, channel: u8) -> bool {
        channel < DATA_CHANNELS && (self.mask >> channel) & 1 == 1
    }

    /// Used channels in ascending order.
    pub fn used(&self) -> Vec<u8> {
        (0..DATA_CHANNELS).filter(|&c| self.contains(c)).collect()
    }

    /// Keeps channels whose PER is below `threshold`. If fewer than two
    /// survive, the two lowest-PER channels are kept (ties to lower index).
    pub fn from_channel_per(per: &[(u8, f64)], threshold: f64) -> Result<Self> {
        if per.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "PER for {} channel(s), need at least 2",
                per.len()
            )));
        }
        if let Some((c, _)) = per.iter().find(|(c, _)| *c >= DATA_CHANNELS) {
            return Err(Error::Map(format!("channel {c} is not a data channel")));
        }
        let good: Vec<u8> = per
            .iter()
            .filter(|(_, p)| *p < threshold)
            .map(|(c, _)| *c)
            .collect();
        if good.len() >= 2 {
            return Self::from_channels(good);
        }
        let mut ranked = per.to_vec();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        ranked.dedup_by_key(|(c, _)| *c);
        Self::from_channels(ranked.iter().take(2).map(|(c, _)| *c))
    }
}

impl Default for ChannelMap {
    fn default() -> Self {
        Self::all()
    }
}

impl fmt::Debug for ChannelMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChannelMap({self})")
    }
}

impl fmt::Display for ChannelMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:010x}", self.mask)
    }
}

impl FromStr for ChannelMap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim_start_matches("0x").trim_start_matches("0X");
        let mask = u64::from_str_radix(digits, 16)
            .map_err(|e| Error::Map(format!("bad channel map `{s}`: {e}")))?;
        Self::from_mask(mask)
    }
}

impl Serialize for ChannelMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ChannelMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopState {
    pub last_unmapped: u8,
    pub hop_increment: u8,
    pub event_counter: u16,
    pub access_address: u32,
}

impl HopState {
    pub fn new(hop_increment: u8, access_address: u32) -> Result<Self> {
        if !(5..=16).contains(&hop_increment) {
            return Err(Error::Param(format!(
                "hop increment {hop_increment} outside 5..=16"
            )));
        }
        Ok(HopState {
            last_unmapped: 0,
            hop_increment,
            event_counter: 0,
            access_address,
        })
    }
}

/// Algorithm #1: fixed hop with remapping into the used set.
pub fn csa1_next(state: HopState, map: &ChannelMap) -> Result<(ChannelIndex, HopState)> {
    map.check()?;
    let unmapped = (state.last_unmapped + state.hop_increment) % DATA_CHANNELS;
    let channel = if map.contains(unmapped) {
        unmapped
    } else {
        map.used()[usize::from(unmapped) % map.n_used()]
    };
    let next = HopState {
        last_unmapped: unmapped,
        event_counter: state.event_counter.wrapping_add(1),
        ..state
    };
    Ok((ChannelIndex::new(channel)?, next))
}

fn permute(v: u16) -> u16 {
    let [hi, lo] = v.to_be_bytes();
    u16::from_be_bytes([hi.reverse_bits(), lo.reverse_bits()])
}

fn mam(a: u16, b: u16) -> u16 {
    a.wrapping_mul(17).wrapping_add(b)
}

pub fn channel_identifier(access_address: u32) -> u16 {
    ((access_address >> 16) as u16) ^ (access_address as u16)
}

/// Pseudo-random number prn_e for an event counter.
pub fn csa2_prn_e(event_counter: u16, access_address: u32) -> u16 {
    let id = channel_identifier(access_address);
    let mut x = event_counter ^ id;
    for _ in 0..3 {
        x = mam(permute(x), id);
    }
    x ^ id
}

/// Algorithm #2: stateless selection seeded by the access address.
pub fn csa2_select(
    event_counter: u16,
    access_address: u32,
    map: &ChannelMap,
) -> Result<ChannelIndex> {
    map.check()?;
    let prn_e = csa2_prn_e(event_counter, access_address);
    let unmapped = (prn_e % u16::from(DATA_CHANNELS)) as u8;
    let channel = if map.contains(unmapped) {
        unmapped
    } else {
        let idx = (map.n_used() as u32 * u32::from(prn_e)) >> 16;
        map.used()[idx as usize]
    };
    ChannelIndex::new(channel)
}
