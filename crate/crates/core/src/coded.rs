//! LE Coded PHY framing: rate-1/2 K=4 convolutional code, S=2/S=8 pattern
//! mapping, coding indicator and terminator fields, Viterbi decoding.
//!
//! Soft symbol convention used throughout: a positive value means bit 1.

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::packet::{check_pdu_len, whiten, LinkLayerPacket};
use crate::phy::{ChannelIndex, CodingScheme};

/// Coded-PHY preamble: ten repetitions of 0,0,1,1,1,1,0,0.
pub const CODED_PREAMBLE_BITS: usize = 80;
pub const CI_BITS: usize = 2;
pub const TERM_BITS: usize = 3;
/// Access address + CI + TERM1.
pub const BLOCK1_INFO_BITS: usize = 32 + CI_BITS + TERM_BITS;

/// Generator taps over (b[n], b[n-1], b[n-2], b[n-3]), b[n] in bit 3.
const G0: u8 = 0b1111; // 1 + x + x^2 + x^3
const G1: u8 = 0b1011; // 1 + x^2 + x^3
const STATES: usize = 8;

const S8_ZERO: [bool; 4] = [false, false, true, true];
const S8_ONE: [bool; 4] = [true, true, false, false];

pub fn coded_preamble() -> BitVector {
    (0..CODED_PREAMBLE_BITS)
        .map(|i| matches!(i % 8, 2..=5))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FecCodeword {
    pub coded_bits: BitVector,
}

/// Output pair for input `bit` entering a register holding
/// state = b[n-1] | b[n-2] << 1 | b[n-3] << 2.
fn branch_output(state: usize, bit: bool) -> (bool, bool) {
    let reg = (u8::from(bit) << 3)
        | (((state & 1) as u8) << 2)
        | ((((state >> 1) & 1) as u8) << 1)
        | ((state >> 2) & 1) as u8;
    (
        (reg & G0).count_ones() % 2 == 1,
        (reg & G1).count_ones() % 2 == 1,
    )
}

fn next_state(state: usize, bit: bool) -> usize {
    ((state << 1) | usize::from(bit)) & (STATES - 1)
}

/// Rate-1/2 encoding from the zero state. Terminator bits, when wanted,
/// are part of `bits`.
pub fn fec_encode(bits: &BitVector) -> FecCodeword {
    let mut state = 0usize;
    let mut out = BitVector::with_capacity(2 * bits.len());
    for b in bits.iter() {
        let (a0, a1) = branch_output(state, b);
        out.push(a0);
        out.push(a1);
        state = next_state(state, b);
    }
    FecCodeword { coded_bits: out }
}

pub fn pattern_map(codeword: &FecCodeword, scheme: CodingScheme) -> BitVector {
    match scheme {
        CodingScheme::S2 => codeword.coded_bits.clone(),
        CodingScheme::S8 => codeword
            .coded_bits
            .iter()
            .flat_map(|b| if b { S8_ONE } else { S8_ZERO })
            .collect(),
    }
}

/// Collapses on-air soft symbols back to one soft value per FEC output bit.
pub fn pattern_demap(symbols: &[f64], scheme: CodingScheme) -> Result<Vec<f64>> {
    let p = scheme.pattern_len();
    if symbols.len() % p != 0 {
        return Err(Error::Length {
            needed: symbols.len().next_multiple_of(p),
            got: symbols.len(),
        });
    }
    Ok(match scheme {
        CodingScheme::S2 => symbols.to_vec(),
        CodingScheme::S8 => symbols
            .chunks_exact(4)
            .map(|c| c[0] + c[1] - c[2] - c[3])
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decision {
    /// Branch metric on the sign of each de-mapped value.
    #[default]
    Hard,
    /// Branch metric on the de-mapped values themselves.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Termination {
    /// Trellis forced to end in the zero state (terminator bits present).
    #[default]
    ZeroState,
    /// Trace back from whichever state has the best metric.
    BestState,
}

/// Hard-decision, zero-terminated Viterbi decode of on-air symbols.
pub fn viterbi_decode(symbols: &[f64], scheme: CodingScheme) -> Result<BitVector> {
    viterbi_decode_with(symbols, scheme, Decision::Hard, Termination::ZeroState)
}

pub fn viterbi_decode_with(
    symbols: &[f64],
    scheme: CodingScheme,
    decision: Decision,
    termination: Termination,
) -> Result<BitVector> {
    let needed = 2 * scheme.pattern_len();
    if symbols.len() % needed != 0 {
        return Err(Error::Length {
            needed: symbols.len().next_multiple_of(needed),
            got: symbols.len(),
        });
    }
    let mut soft = pattern_demap(symbols, scheme)?;
    if decision == Decision::Hard {
        for s in &mut soft {
            *s = if *s > 0.0 {
                1.0
            } else if *s < 0.0 {
                -1.0
            } else {
                0.0
            };
        }
    }
    Ok(viterbi_core(&soft, termination))
}

/// Maximum-correlation path through the 8-state trellis; full traceback.
fn viterbi_core(soft: &[f64], termination: Termination) -> BitVector {
    let steps = soft.len() / 2;
    // expected antipodal outputs per (state, input)
    let mut expect = [[(0.0f64, 0.0f64); 2]; STATES];
    for (s, e) in expect.iter_mut().enumerate() {
        for bit in [false, true] {
            let (a0, a1) = branch_output(s, bit);
            e[usize::from(bit)] = (if a0 { 1.0 } else { -1.0 }, if a1 { 1.0 } else { -1.0 });
        }
    }

    let mut metric = [f64::NEG_INFINITY; STATES];
    metric[0] = 0.0;
    // survivor predecessor's high bit, per step and next state
    let mut decisions: Vec<u8> = Vec::with_capacity(steps);
    for pair in soft.chunks_exact(2) {
        let (r0, r1) = (pair[0], pair[1]);
        let mut next = [f64::NEG_INFINITY; STATES];
        let mut dec = 0u8;
        for (ns, slot) in next.iter_mut().enumerate() {
            let bit = ns & 1;
            let lo = ns >> 1;
            let hi = lo | 4;
            let (e0, e1) = expect[lo][bit];
            let m_lo = metric[lo] + r0 * e0 + r1 * e1;
            let (e0, e1) = expect[hi][bit];
            let m_hi = metric[hi] + r0 * e0 + r1 * e1;
            if m_hi > m_lo {
                *slot = m_hi;
                dec |= 1 << ns;
            } else {
                *slot = m_lo;
            }
        }
        metric = next;
        decisions.push(dec);
    }

    let mut state = match termination {
        Termination::ZeroState => 0,
        Termination::BestState => (0..STATES)
            .max_by(|&a, &b| metric[a].total_cmp(&metric[b]).then(b.cmp(&a)))
            .unwrap_or(0),
    };
    let mut out = vec![false; steps];
    for (k, dec) in decisions.iter().enumerate().rev() {
        out[k] = state & 1 == 1;
        let hi = (dec >> state) & 1;
        state = (state >> 1) | (usize::from(hi) << 2);
    }
    out.into()
}

/// The fields of a coded packet before modulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedPacketBits {
    pub preamble: BitVector,
    /// S=8 symbols of AA ‖ CI ‖ TERM1.
    pub fec_block1: BitVector,
    /// Scheme-coded symbols of whiten(PDU ‖ CRC) ‖ TERM2.
    pub fec_block2: BitVector,
    pub ci: u8,
}

impl CodedPacketBits {
    pub fn build(packet: &LinkLayerPacket, scheme: CodingScheme) -> Result<Self> {
        if !packet.phy_mode.is_coded() {
            return Err(Error::Mode(packet.phy_mode));
        }
        check_pdu_len(packet.pdu.len())?;
        let ci = scheme.coding_indicator();
        let mut block1 = BitVector::with_capacity(BLOCK1_INFO_BITS);
        block1.push_word_lsb_first(u64::from(packet.access_address), 32);
        block1.push_word_lsb_first(u64::from(ci), CI_BITS);
        block1.push_word_lsb_first(0, TERM_BITS);

        let mut block2 = whiten(&packet.pdu_and_crc(), packet.channel);
        block2.push_word_lsb_first(0, TERM_BITS);

        Ok(CodedPacketBits {
            preamble: coded_preamble(),
            fec_block1: pattern_map(&fec_encode(&block1), CodingScheme::S8),
            fec_block2: pattern_map(&fec_encode(&block2), scheme),
            ci,
        })
    }

    pub fn on_air(&self) -> BitVector {
        let mut out = BitVector::with_capacity(
            self.preamble.len() + self.fec_block1.len() + self.fec_block2.len(),
        );
        out.extend_from(&self.preamble);
        out.extend_from(&self.fec_block1);
        out.extend_from(&self.fec_block2);
        out
    }
}

/// On-air symbols of an LE500K/LE125K packet.
pub fn assemble_coded(packet: &LinkLayerPacket, scheme: CodingScheme) -> Result<BitVector> {
    Ok(CodedPacketBits::build(packet, scheme)?.on_air())
}

pub const BLOCK1_SYMBOLS: usize = BLOCK1_INFO_BITS * 2 * 4;

pub fn block2_symbols(pdu_bits: usize, scheme: CodingScheme) -> usize {
    (pdu_bits + 24 + TERM_BITS) * 2 * scheme.pattern_len()
}

/// Known S=8 symbols that encode the access address (first 256 of block 1).
pub fn coded_access_address_symbols(access_address: u32) -> BitVector {
    let aa = BitVector::from_word_lsb_first(u64::from(access_address), 32);
    pattern_map(&fec_encode(&aa), CodingScheme::S8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block1 {
    pub access_address: u32,
    pub ci: u8,
    pub scheme: Option<CodingScheme>,
}

/// Decodes block 1 from its 296 soft symbols.
pub fn decode_block1(symbols: &[f64], decision: Decision) -> Result<Block1> {
    if symbols.len() != BLOCK1_SYMBOLS {
        return Err(Error::Length {
            needed: BLOCK1_SYMBOLS,
            got: symbols.len(),
        });
    }
    let bits = viterbi_decode_with(symbols, CodingScheme::S8, decision, Termination::ZeroState)?;
    let ci = bits.word_lsb_first(32, CI_BITS) as u8;
    Ok(Block1 {
        access_address: bits.word_lsb_first(0, 32) as u32,
        ci,
        scheme: CodingScheme::from_coding_indicator(ci),
    })
}

/// Decodes block 2 and removes whitening; returns PDU ‖ CRC.
pub fn decode_block2(
    symbols: &[f64],
    scheme: CodingScheme,
    channel: ChannelIndex,
    decision: Decision,
) -> Result<BitVector> {
    let bits = viterbi_decode_with(symbols, scheme, decision, Termination::ZeroState)?;
    if bits.len() < TERM_BITS {
        return Err(Error::Length {
            needed: 2 * TERM_BITS * scheme.pattern_len(),
            got: symbols.len(),
        });
    }
    Ok(whiten(&bits.slice(0, bits.len() - TERM_BITS), channel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{validate_packet, PacketStatus};
    use crate::phy::{PhyMode, ADVERTISING_ACCESS_ADDRESS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut impl Rng, n: usize) -> BitVector {
        (0..n).map(|_| rng.random::<bool>()).collect()
    }

    /// Independent encoder: explicit shift register and tap lists.
    fn encode_by_taps(bits: &BitVector) -> BitVector {
        let mut reg = [false; 4]; // reg[0] = newest
        let mut out = BitVector::new();
        for b in bits.iter() {
            reg = [b, reg[0], reg[1], reg[2]];
            out.push(reg[0] ^ reg[1] ^ reg[2] ^ reg[3]);
            out.push(reg[0] ^ reg[2] ^ reg[3]);
        }
        out
    }

    fn with_term(mut bits: BitVector) -> BitVector {
        bits.push_word_lsb_first(0, TERM_BITS);
        bits
    }

    #[test]
    fn zero_in_zero_out() {
        assert_eq!(
            fec_encode(&BitVector::zeros(40)).coded_bits,
            BitVector::zeros(80)
        );
    }

    #[test]
    fn impulse_response_matches_generators() {
        let cw = fec_encode(&BitVector::from(vec![true, false, false, false]));
        // G0 = 1111, G1 = 1011 interleaved
        let expect: BitVector = [1, 1, 1, 0, 1, 1, 1, 1].iter().map(|&b| b == 1).collect();
        assert_eq!(cw.coded_bits, expect);
    }

    #[test]
    fn encoder_matches_tap_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let m = random_bits(&mut rng, 16);
            assert_eq!(fec_encode(&m).coded_bits, encode_by_taps(&m));
        }
    }

    #[test]
    fn pattern_lengths() {
        let cw = FecCodeword {
            coded_bits: BitVector::from(vec![true]),
        };
        assert_eq!(pattern_map(&cw, CodingScheme::S8).len(), 4);
        assert_eq!(pattern_map(&cw, CodingScheme::S2), cw.coded_bits);
        assert_eq!(1e6 / (2.0 * 4.0), 125e3);
    }

    #[test]
    fn corrects_every_single_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let msg = with_term(random_bits(&mut rng, 97));
        let sym = fec_encode(&msg).coded_bits.to_nrz();
        for i in 0..sym.len() {
            let mut s = sym.clone();
            s[i] = -s[i];
            assert_eq!(
                viterbi_decode(&s, CodingScheme::S2).unwrap(),
                msg,
                "flip {i}"
            );
        }
    }

    #[test]
    fn random_input_degrades_gracefully() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<f64> = (0..800).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert_eq!(viterbi_decode(&s, CodingScheme::S8).unwrap().len(), 100);
        assert!(viterbi_decode(&s[..799], CodingScheme::S2).is_err());
        assert!(viterbi_decode(&s[..796], CodingScheme::S8).is_err());
    }

    #[test]
    fn coded_lengths() {
        let ch = ChannelIndex::new(37).unwrap();
        for (mode, scheme, total) in [
            (PhyMode::Le125K, CodingScheme::S8, 80 + 37 * 8 + 43 * 8),
            (PhyMode::Le500K, CodingScheme::S2, 80 + 37 * 8 + 43 * 2),
        ] {
            let p = LinkLayerPacket::advertising(
                ADVERTISING_ACCESS_ADDRESS,
                BitVector::zeros(16),
                mode,
                ch,
            )
            .unwrap();
            let bits = CodedPacketBits::build(&p, scheme).unwrap();
            assert_eq!(bits.preamble.len(), 80);
            assert_eq!(bits.fec_block1.len(), BLOCK1_SYMBOLS);
            assert_eq!(bits.fec_block2.len(), block2_symbols(16, scheme));
            assert_eq!(bits.on_air().len(), total);
        }
        let p = LinkLayerPacket::advertising(1, BitVector::zeros(16), PhyMode::Le1M, ch).unwrap();
        assert_eq!(
            assemble_coded(&p, CodingScheme::S2),
            Err(Error::Mode(PhyMode::Le1M))
        );
    }

    #[test]
    fn coded_round_trip_and_ci() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (mode, scheme) in [
            (PhyMode::Le125K, CodingScheme::S8),
            (PhyMode::Le500K, CodingScheme::S2),
        ] {
            let ch = ChannelIndex::new(rng.random_range(0..40)).unwrap();
            let pdu = random_bits(&mut rng, 120);
            let p = LinkLayerPacket::advertising(0x1234_5678, pdu.clone(), mode, ch).unwrap();
            let air = assemble_coded(&p, scheme).unwrap().to_nrz();
            let b1 = decode_block1(&air[80..80 + BLOCK1_SYMBOLS], Decision::Hard).unwrap();
            assert_eq!(b1.access_address, 0x1234_5678);
            assert_eq!(b1.scheme, Some(scheme));
            let body =
                decode_block2(&air[80 + BLOCK1_SYMBOLS..], scheme, ch, Decision::Soft).unwrap();
            assert_eq!(
                validate_packet(b1.access_address, 0x1234_5678, &body).unwrap(),
                PacketStatus::Valid
            );
            assert_eq!(body.slice(0, 120), pdu);
        }
    }

    #[test]
    fn preamble_pattern() {
        let p = coded_preamble();
        assert_eq!(p.len(), 80);
        assert_eq!(p.to_hex(), "3c".repeat(10));
    }
}
