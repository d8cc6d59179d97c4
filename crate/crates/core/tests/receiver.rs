use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blesim::channel::{add_noise, apply_cfo, apply_dc};
use blesim::coded::assemble_coded;
use blesim::modem::gmsk_modulate;
use blesim::packet::{assemble_uncoded, LinkLayerPacket};
use blesim::rx::{Receiver, ReceiverConfig, RxPacketReport};
use blesim::{BitVector, ChannelIndex, IqFrame, PhyMode};

const AA: u32 = 0x71764129;

fn config(mode: PhyMode, ch: ChannelIndex, pdu_bits: usize) -> ReceiverConfig {
    ReceiverConfig {
        phy_mode: mode,
        expected_access_address: AA,
        channel: ch,
        pdu_bits,
        ..ReceiverConfig::default()
    }
}

/// A packet preceded by `lead` zero samples, with CFO, DC and noise.
fn packet_frame(
    mode: PhyMode,
    ch: ChannelIndex,
    pdu: &BitVector,
    lead: usize,
    cfo: f64,
    noise_power: f64,
    seed: u64,
) -> IqFrame {
    let pkt = LinkLayerPacket::advertising(AA, pdu.clone(), mode, ch).unwrap();
    let bits = match mode.coding_scheme() {
        None => assemble_uncoded(&pkt).unwrap(),
        Some(s) => assemble_coded(&pkt, s).unwrap(),
    };
    let cfg = config(mode, ch, pdu.len());
    let tx = gmsk_modulate(&bits, &cfg.pulse().unwrap(), 0.5, mode.symbol_rate());
    let zero = Complex64::new(0.0, 0.0);
    let mut s = vec![zero; lead];
    s.extend_from_slice(&tx.samples);
    s.extend(std::iter::repeat_n(zero, 128));
    let f = apply_cfo(&tx.with_samples(s), cfo).unwrap();
    let f = apply_dc(&f, Complex64::from_polar(0.1, 1.0));
    if noise_power > 0.0 {
        add_noise(&f, noise_power, seed)
    } else {
        f
    }
}

fn hierarchy_holds(r: &RxPacketReport) -> bool {
    (!r.crc_ok || r.aa_ok) && (!r.aa_ok || r.detected)
}

fn mode() -> impl Strategy<Value = PhyMode> {
    prop_oneof![
        Just(PhyMode::Le1M),
        Just(PhyMode::Le2M),
        Just(PhyMode::Le500K),
        Just(PhyMode::Le125K)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hierarchy_on_noise_and_silence(m in mode(), len in 0usize..20_000, seed in any::<u64>(), zeros in any::<bool>()) {
        let cfg = config(m, ChannelIndex::new(3).unwrap(), 64);
        let fs = cfg.sample_rate();
        let silent = IqFrame::zeros(len, fs, m.symbol_rate());
        let frame = if zeros { silent } else { add_noise(&silent, 1.0, seed) };
        let r = Receiver::new(cfg).unwrap().receive(&frame);
        prop_assert!(hierarchy_holds(&r), "{:?}", r);
        if zeros {
            prop_assert!(!r.detected);
        }
    }

    #[test]
    fn hierarchy_on_impaired_packets(
        m in mode(),
        snr in -5.0f64..15.0,
        cfo in -50e3f64..50e3,
        lead in 0usize..400,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = ChannelIndex::new(rng.random_range(0..37)).unwrap();
        let pdu: BitVector = (0..64).map(|_| rng.random::<bool>()).collect();
        let f = packet_frame(m, ch, &pdu, lead, cfo, 10f64.powf(-snr / 10.0), seed);
        let cfg = config(m, ch, 64);
        let a = Receiver::new(cfg.clone()).unwrap().receive(&f);
        let b = Receiver::new(cfg).unwrap().receive(&f);
        prop_assert!(hierarchy_holds(&a), "{:?}", a);
        prop_assert_eq!(&a, &b);
        if a.crc_ok {
            prop_assert_eq!(a.pdu.as_ref(), Some(&pdu));
        }
    }
}

#[test]
fn frequency_correction_precedes_matched_filter() {
    let ch = ChannelIndex::new(9).unwrap();
    let pdu = BitVector::zeros(64);
    for m in PhyMode::ALL {
        let f = packet_frame(m, ch, &pdu, 80, 20e3, 0.0, 0);
        let mut rx = Receiver::new(config(m, ch, 64)).unwrap();
        assert!(rx.receive(&f).crc_ok);
        let names: Vec<&str> = rx.trace().iter().map(|s| s.name).collect();
        assert_eq!(
            names,
            [
                "input",
                "agc",
                "dc_notch",
                "coarse_cfo",
                "matched_filter",
                "synchronize",
                "demodulate",
                "decode",
                "validate"
            ]
        );
        let pos = |n: &str| names.iter().position(|&s| s == n).unwrap();
        assert!(pos("coarse_cfo") < pos("matched_filter"));
        assert!(rx.trace().iter().all(|s| s.frame.is_none()));
    }
}

#[test]
fn captured_stages_hold_frames() {
    let ch = ChannelIndex::new(2).unwrap();
    let f = packet_frame(PhyMode::Le1M, ch, &BitVector::zeros(32), 64, 0.0, 0.0, 0);
    let mut rx = Receiver::new(config(PhyMode::Le1M, ch, 32))
        .unwrap()
        .capture_stages(true);
    rx.receive(&f);
    let with_iq: Vec<&str> = rx
        .trace()
        .iter()
        .filter(|s| s.frame.is_some())
        .map(|s| s.name)
        .collect();
    assert_eq!(
        with_iq,
        [
            "input",
            "agc",
            "dc_notch",
            "coarse_cfo",
            "matched_filter",
            "synchronize"
        ]
    );
    assert_eq!(rx.trace()[0].frame.as_ref(), Some(&f));
}

#[test]
fn injected_delays_recovered_exactly_without_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for m in PhyMode::ALL {
        for _ in 0..10 {
            let ch = ChannelIndex::new(rng.random_range(0..37)).unwrap();
            let pdu: BitVector = (0..48).map(|_| rng.random::<bool>()).collect();
            let lead = rng.random_range(0..1000);
            let cfo = rng.random_range(-50e3..50e3);
            let f = packet_frame(m, ch, &pdu, lead, cfo, 0.0, 0);
            let r = Receiver::new(config(m, ch, 48)).unwrap().receive(&f);
            assert_eq!(r.timing_offset, Some(lead), "{m}");
            assert!(
                (r.cfo_estimate_hz - cfo).abs() < 1e3,
                "{m}: {} vs {cfo}",
                r.cfo_estimate_hz
            );
            assert!(r.crc_ok);
        }
    }
}

#[test]
fn wrong_access_address_is_detected_but_rejected() {
    let ch = ChannelIndex::new(4).unwrap();
    let f = packet_frame(PhyMode::Le125K, ch, &BitVector::zeros(32), 100, 0.0, 0.0, 0);
    let mut cfg = config(PhyMode::Le125K, ch, 32);
    cfg.expected_access_address = AA ^ 0x0100_0000;
    let r = Receiver::new(cfg).unwrap().receive(&f);
    assert!(!r.aa_ok && !r.crc_ok);
}
