//! Uncoded link-layer packets: preamble, access address, PDU, CRC-24 and
//! data whitening.

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::phy::{ChannelIndex, PhyMode, ADVERTISING_CRC_INIT, MAX_PDU_BITS, MIN_PDU_BITS};

/// CRC-24 generator x^24 + x^10 + x^9 + x^6 + x^4 + x^3 + x + 1 (x^24 implicit).
pub const CRC24_POLY: u32 = 0x00_065B;
const CRC_MASK: u32 = 0xFF_FFFF;

/// Runs the CRC LFSR over `payload` (transmission order) from `init`.
///
/// The result is the register value with position 23 in bit 23; that bit is
/// the first CRC bit on air.
pub fn crc24(payload: &BitVector, init: u32) -> u32 {
    payload.iter().fold(init & CRC_MASK, |crc, bit| {
        let feedback = ((crc >> 23) & 1 == 1) ^ bit;
        let shifted = (crc << 1) & CRC_MASK;
        if feedback {
            shifted ^ CRC24_POLY
        } else {
            shifted
        }
    })
}

/// Whitening sequence generator, x^7 + x^4 + 1.
///
/// The register is kept with position 0 in bit 6 and position 6 in bit 0;
/// it is seeded with 1 in position 0 and the channel index in positions 1..=6.
#[derive(Debug, Clone)]
pub struct Whitener {
    lfsr: u8,
}

impl Whitener {
    pub fn new(channel: ChannelIndex) -> Self {
        Whitener {
            lfsr: 0b0100_0000 | channel.index(),
        }
    }

    pub fn next_bit(&mut self) -> bool {
        let out = self.lfsr & 1 == 1;
        self.lfsr >>= 1;
        if out {
            self.lfsr ^= 0b0100_0100;
        }
        out
    }
}

/// XORs `bits` with the channel's whitening stream. Applying it twice is the identity.
pub fn whiten(bits: &BitVector, channel: ChannelIndex) -> BitVector {
    let mut w = Whitener::new(channel);
    bits.iter().map(|b| b ^ w.next_bit()).collect()
}

/// Alternating preamble whose first bit equals the access address LSB.
pub fn uncoded_preamble(mode: PhyMode, access_address: u32) -> Result<BitVector> {
    if mode.is_coded() {
        return Err(Error::Mode(mode));
    }
    let first = access_address & 1 == 1;
    Ok((0..mode.preamble_bits())
        .map(|i| first ^ (i % 2 == 1))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkLayerPacket {
    pub access_address: u32,
    pub pdu: BitVector,
    pub crc: u32,
    pub phy_mode: PhyMode,
    /// Channel whose whitening sequence is applied on air.
    pub channel: ChannelIndex,
}

impl LinkLayerPacket {
    /// Builds a packet with the CRC computed from `crc_init`.
    pub fn new(
        access_address: u32,
        pdu: BitVector,
        phy_mode: PhyMode,
        channel: ChannelIndex,
        crc_init: u32,
    ) -> Result<Self> {
        check_pdu_len(pdu.len())?;
        let crc = crc24(&pdu, crc_init);
        Ok(LinkLayerPacket {
            access_address,
            pdu,
            crc,
            phy_mode,
            channel,
        })
    }

    /// Advertising-style packet: CRC preset 0x555555.
    pub fn advertising(
        access_address: u32,
        pdu: BitVector,
        phy_mode: PhyMode,
        channel: ChannelIndex,
    ) -> Result<Self> {
        Self::new(access_address, pdu, phy_mode, channel, ADVERTISING_CRC_INIT)
    }

    /// PDU followed by the CRC (MSB first), before whitening.
    pub fn pdu_and_crc(&self) -> BitVector {
        let mut v = BitVector::with_capacity(self.pdu.len() + 24);
        v.extend_from(&self.pdu);
        v.push_word_msb_first(u64::from(self.crc), 24);
        v
    }
}

pub(crate) fn check_pdu_len(n: usize) -> Result<()> {
    if (MIN_PDU_BITS..=MAX_PDU_BITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::PduLength(n))
    }
}

/// On-air bits of an LE1M/LE2M packet:
/// preamble ‖ access address ‖ whiten(PDU ‖ CRC).
pub fn assemble_uncoded(packet: &LinkLayerPacket) -> Result<BitVector> {
    check_pdu_len(packet.pdu.len())?;
    let preamble = uncoded_preamble(packet.phy_mode, packet.access_address)?;
    let body = whiten(&packet.pdu_and_crc(), packet.channel);
    let mut out = BitVector::with_capacity(preamble.len() + 32 + body.len());
    out.extend_from(&preamble);
    out.push_word_lsb_first(u64::from(packet.access_address), 32);
    out.extend_from(&body);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketStatus {
    Valid,
    BadAccessAddress,
    BadCrc,
}

/// Access address first, then CRC over the de-whitened PDU ‖ CRC bits.
pub fn validate_packet(
    aa_rx: u32,
    aa_expected: u32,
    pdu_and_crc: &BitVector,
) -> Result<PacketStatus> {
    validate_packet_with_init(aa_rx, aa_expected, pdu_and_crc, ADVERTISING_CRC_INIT)
}

pub fn validate_packet_with_init(
    aa_rx: u32,
    aa_expected: u32,
    pdu_and_crc: &BitVector,
    crc_init: u32,
) -> Result<PacketStatus> {
    let needed = MIN_PDU_BITS + 24;
    if pdu_and_crc.len() < needed {
        return Err(Error::Length {
            needed,
            got: pdu_and_crc.len(),
        });
    }
    if aa_rx != aa_expected {
        return Ok(PacketStatus::BadAccessAddress);
    }
    let split = pdu_and_crc.len() - 24;
    let computed = crc24(&pdu_and_crc.slice(0, split), crc_init);
    let received = pdu_and_crc.word_msb_first(split, 24) as u32;
    Ok(if computed == received {
        PacketStatus::Valid
    } else {
        PacketStatus::BadCrc
    })
}
