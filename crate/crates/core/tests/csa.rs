use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use blesim::csa::{csa1_next, csa2_select, ChannelMap, HopState};

/// CSA#1 walked by hand: hop, then if the channel is unused, count
/// through the mask bits for the (unmapped mod n_used)-th used channel.
fn csa1_oracle(last: u8, hop: u8, mask: u64) -> (u8, u8) {
    let unmapped = (last + hop) % 37;
    if mask >> unmapped & 1 == 1 {
        return (unmapped, unmapped);
    }
    let n_used = mask.count_ones() as u8;
    let mut want = unmapped % n_used;
    for ch in 0..37u8 {
        if mask >> ch & 1 == 1 {
            if want == 0 {
                return (ch, unmapped);
            }
            want -= 1;
        }
    }
    unreachable!()
}

fn random_mask(rng: &mut impl Rng) -> u64 {
    loop {
        let m = rng.random::<u64>() & ((1 << 37) - 1);
        // sparse maps too
        let m = if rng.random_bool(0.3) {
            m & rng.random::<u64>() & rng.random::<u64>()
        } else {
            m
        };
        if m.count_ones() >= 2 {
            return m;
        }
    }
}

fn chi2_critical(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha)
}

fn chi2(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

#[test]
fn csa1_matches_hand_walked_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for _ in 0..1000 {
        let mask = random_mask(&mut rng);
        let map = ChannelMap::from_mask(mask).unwrap();
        let mut s = HopState::new(rng.random_range(5..=16), rng.random()).unwrap();
        s.last_unmapped = rng.random_range(0..37);
        s.event_counter = rng.random();
        let (ch, next) = csa1_next(s, &map).unwrap();
        let (want, unmapped) = csa1_oracle(s.last_unmapped, s.hop_increment, mask);
        assert_eq!(ch.index(), want);
        assert_eq!(next.last_unmapped, unmapped);
        assert_eq!(next.event_counter, s.event_counter.wrapping_add(1));
    }
}

#[test]
fn csa2_core_spec_sample_data() {
    let aa = 0x8E89_BED6;
    let all = ChannelMap::all();
    let got: Vec<u8> = (0..4)
        .map(|e| csa2_select(e, aa, &all).unwrap().index())
        .collect();
    assert_eq!(got, [25, 20, 6, 21]);
    let nine = ChannelMap::from_channels([9, 10, 21, 22, 23, 33, 34, 35, 36]).unwrap();
    let got: Vec<u8> = (6..9)
        .map(|e| csa2_select(e, aa, &nine).unwrap().index())
        .collect();
    assert_eq!(got, [23, 9, 34]);
}

#[test]
fn selections_stay_in_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    for _ in 0..10_000 {
        let mask = random_mask(&mut rng);
        let map = ChannelMap::from_mask(mask).unwrap();
        let aa: u32 = rng.random();
        let c2 = csa2_select(rng.random(), aa, &map).unwrap().index();
        assert!(map.contains(c2), "csa2 picked {c2} from {map}");
        let mut s = HopState::new(rng.random_range(5..=16), aa).unwrap();
        s.last_unmapped = rng.random_range(0..37);
        let c1 = csa1_next(s, &map).unwrap().0.index();
        assert!(map.contains(c1), "csa1 picked {c1} from {map}");
    }
}

#[test]
fn csa1_full_map_has_period_37() {
    for hop in 5..=16u8 {
        let mut s = HopState::new(hop, 0).unwrap();
        let mut seen = Vec::new();
        for _ in 0..74 {
            let (ch, next) = csa1_next(s, &ChannelMap::all()).unwrap();
            seen.push(ch.index());
            s = next;
        }
        assert_eq!(seen[..37], seen[37..]);
        let mut sorted = seen[..37].to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..37).collect::<Vec<u8>>(), "hop {hop}");
    }
}

#[test]
fn csa2_uniform_over_full_map() {
    let mut counts = [0u64; 37];
    for e in 0..=u16::MAX {
        counts[csa2_select(e, 0x8E89_BED6, &ChannelMap::all())
            .unwrap()
            .index() as usize] += 1;
    }
    let stat = chi2(&counts);
    assert!(stat < chi2_critical(36, 0.01), "chi2 {stat}");
}

#[test]
fn csa2_uniform_over_partial_map() {
    let map = ChannelMap::from_channels([0, 3, 4, 8, 12, 17, 20, 25, 29, 33, 36]).unwrap();
    let used = map.used();
    let mut counts = vec![0u64; used.len()];
    for e in 0..=u16::MAX {
        let ch = csa2_select(e, 0x5A3C_96E1, &map).unwrap().index();
        counts[used.iter().position(|&u| u == ch).unwrap()] += 1;
    }
    let stat = chi2(&counts);
    assert!(stat < chi2_critical(used.len() - 1, 0.01), "chi2 {stat}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn removed_channel_never_selected(
        mask in (0u64..(1 << 37)).prop_filter("three channels", |m| m.count_ones() >= 3),
        drop_pick in any::<prop::sample::Index>(),
        counter in any::<u16>(),
        aa in any::<u32>(),
        hop in 5u8..=16,
        last in 0u8..37,
    ) {
        let used: Vec<u8> = (0..37).filter(|c| mask >> c & 1 == 1).collect();
        let removed = used[drop_pick.index(used.len())];
        let map = ChannelMap::from_mask(mask & !(1 << removed)).unwrap();
        prop_assert_ne!(csa2_select(counter, aa, &map).unwrap().index(), removed);
        let mut s = HopState::new(hop, aa).unwrap();
        s.last_unmapped = last;
        prop_assert_ne!(csa1_next(s, &map).unwrap().0.index(), removed);
    }

    #[test]
    fn map_round_trips_through_hex(mask in (0u64..(1 << 37)).prop_filter("two channels", |m| m.count_ones() >= 2)) {
        let map = ChannelMap::from_mask(mask).unwrap();
        let back: ChannelMap = map.to_string().parse().unwrap();
        prop_assert_eq!(back, map);
    }
}
