#[path = "support/fuzzy_oracle.rs"]
mod fuzzy_oracle;
#[path = "support/fuzzy_trials.rs"]
mod fuzzy_trials;

use fuzzy_oracle::{nearest_symbol, predicted_success_rate, sylvester_codewords, RS_RADIUS};
use fuzzy_trials::{measured_success_rate, BASELINES, TOLERANCE, TRIALS, TRIAL_SEED};
use pokimd::fuzzycommit::{
    commit_codeword, hadamard, lock, sample_iris_with, unlock, CacheKey, IrisCode, BLOCKS,
};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn flips<R: Rng>(rng: &mut R, weight: usize) -> u64 {
    sample(rng, 64, weight).iter().fold(0u64, |w, j| w | 1 << j)
}

#[test]
fn codeword_sets_agree_with_sylvester_construction() {
    let ours: BTreeSet<u64> = (0..128).map(hadamard::encode).collect();
    let oracle: BTreeSet<u64> = sylvester_codewords().into_iter().collect();
    assert_eq!(ours.len(), 128);
    assert_eq!(ours, oracle);
}

#[test]
fn every_symbol_survives_every_weight_up_to_15() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for symbol in 0..128u8 {
        let cw = hadamard::encode(symbol);
        for weight in 0..=15 {
            for _ in 0..8 {
                assert_eq!(hadamard::decode(cw ^ flips(&mut rng, weight)), symbol);
            }
        }
    }
}

#[test]
fn exact_iris_always_unlocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..TRIALS {
        let ck = CacheKey::random(&mut rng);
        let theta = IrisCode::random(&mut rng);
        assert_eq!(unlock(&lock(&ck, &theta), &theta), Ok(ck));
    }
}

/// Up to six blocks replaced by arbitrary garbage, the rest carrying up to
/// 15 bit errors each, for every count of bad blocks.
#[test]
fn six_block_failures_plus_15_bit_noise_elsewhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for bad in 0..=RS_RADIUS {
        for _ in 0..100 {
            let ck = CacheKey::random(&mut rng);
            let theta = IrisCode::random(&mut rng);
            let locked = lock(&ck, &theta);
            let bad_blocks = sample(&mut rng, BLOCKS, bad).into_vec();
            let mut sam = theta;
            for (k, w) in sam.0.iter_mut().enumerate() {
                *w ^= if bad_blocks.contains(&k) {
                    rng.random::<u64>()
                } else {
                    let weight = rng.random_range(0..=15);
                    flips(&mut rng, weight)
                };
            }
            assert_eq!(unlock(&locked, &sam), Ok(ck), "{bad} bad blocks");
        }
    }
}

#[test]
fn seven_wrong_symbols_never_yield_the_key() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let ck = CacheKey::random(&mut rng);
        let theta = IrisCode::random(&mut rng);
        let locked = lock(&ck, &theta);
        let cw = commit_codeword(&ck);
        let mut sam = theta;
        for k in sample(&mut rng, BLOCKS, RS_RADIUS + 1) {
            // Move the block onto a different codeword entirely.
            let other = loop {
                let s = rng.random_range(0..128u8);
                let w = hadamard::encode(s);
                if w != cw.0[k] {
                    break w;
                }
            };
            sam.0[k] ^= cw.0[k] ^ other;
        }
        assert_ne!(unlock(&locked, &sam), Ok(ck));
    }
}

/// Per-trial oracle verdict on identical noise. A block where the true
/// codeword ties with another is counted both ways; `None` when that
/// changes the verdict.
fn oracle_verdict(codewords: &[u64], ck: &CacheKey, noise: &IrisCode) -> Option<bool> {
    let cw = commit_codeword(ck);
    let (mut wrong, mut tied) = (0, 0);
    for k in 0..BLOCKS {
        let word = cw.0[k] ^ noise.0[k];
        let s = nearest_symbol(codewords, word);
        let d = (codewords[s as usize] ^ word).count_ones();
        let nearest: Vec<u64> = codewords
            .iter()
            .copied()
            .filter(|c| (c ^ word).count_ones() == d)
            .collect();
        match (nearest.contains(&cw.0[k]), nearest.len()) {
            (true, 1) => {}
            (true, _) => tied += 1,
            (false, _) => wrong += 1,
        }
    }
    let best = wrong <= RS_RADIUS;
    (best == (wrong + tied <= RS_RADIUS)).then_some(best)
}

#[test]
fn unlock_agrees_with_oracle_trial_by_trial() {
    let codewords = sylvester_codewords();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut compared = 0;
    for ber in [0.20, 0.25, 0.28, 0.30, 0.33] {
        for _ in 0..200 {
            let ck = CacheKey::random(&mut rng);
            let theta = IrisCode::random(&mut rng);
            let sam = sample_iris_with(&theta, ber, &mut rng).unwrap();
            let Some(expect) = oracle_verdict(&codewords, &ck, &theta.xor(&sam)) else {
                continue;
            };
            compared += 1;
            assert_eq!(
                unlock(&lock(&ck, &theta), &sam) == Ok(ck),
                expect,
                "ber {ber}"
            );
        }
    }
    assert!(compared > 500, "too many tied trials: {compared} compared");
}

#[test]
fn monte_carlo_matches_baselines() {
    for (ber, baseline) in BASELINES {
        let rate = measured_success_rate(ber, TRIALS, TRIAL_SEED);
        assert!(
            (rate - baseline).abs() <= TOLERANCE,
            "ber {ber}: measured {rate}, baseline {baseline}"
        );
    }
}

#[test]
fn ten_percent_ber_meets_95_percent() {
    assert!(measured_success_rate(0.10, TRIALS, TRIAL_SEED + 1) >= 0.95);
}

#[test]
fn thirty_five_percent_ber_fails_99_percent() {
    assert!(measured_success_rate(0.35, TRIALS, TRIAL_SEED + 2) <= 0.01);
}

/// With the key random, every bit of the lock is a fair coin regardless of
/// the iris code underneath.
#[test]
fn lock_bits_are_balanced_for_a_fixed_iris() {
    const N: usize = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let theta = IrisCode::random(&mut rng);
    let mut ones = vec![0u32; 2048];
    for _ in 0..N {
        let locked = lock(&CacheKey::random(&mut rng), &theta);
        for (k, w) in locked.0 .0.iter().enumerate() {
            for j in 0..64 {
                ones[k * 64 + j] += ((w >> j) & 1) as u32;
            }
        }
    }
    // Sum of squared z-scores is chi-square with 2048 degrees of freedom
    // (mean 2048, sd 64); allow five standard deviations.
    let half = N as f64 / 2.0;
    let chi2: f64 = ones
        .iter()
        .map(|&c| (c as f64 - half).powi(2) / (N as f64 / 4.0))
        .sum();
    assert!(chi2 < 2048.0 + 5.0 * 64.0, "chi2 = {chi2}");
}

#[test]
fn sample_distance_follows_binomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let theta = IrisCode::random(&mut rng);
    for _ in 0..50 {
        let sam = sample_iris_with(&theta, 0.5, &mut rng).unwrap();
        let d = theta.hamming(&sam);
        assert!((924..=1124).contains(&d), "distance {d}");
    }
}

#[test]
#[ignore = "prints fresh baselines; run manually after changing the code"]
fn regenerate_baselines() {
    for ber in [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35] {
        println!(
            "ber {ber:.2}: oracle {:.4} implementation {:.4}",
            predicted_success_rate(ber, TRIALS, TRIAL_SEED),
            measured_success_rate(ber, TRIALS, TRIAL_SEED),
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounded_noise_always_unlocks(
        seed in any::<u64>(),
        bad in proptest::collection::btree_set(0usize..BLOCKS, 0..=RS_RADIUS),
        weights in proptest::collection::vec(0usize..=15, BLOCKS),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ck = CacheKey::random(&mut rng);
        let theta = IrisCode::random(&mut rng);
        let mut sam = theta;
        for (k, (w, &weight)) in sam.0.iter_mut().zip(&weights).enumerate() {
            *w ^= if bad.contains(&k) { rng.random() } else { flips(&mut rng, weight) };
        }
        prop_assert_eq!(unlock(&lock(&ck, &theta), &sam), Ok(ck));
    }

    #[test]
    fn garbage_never_panics(words in any::<[u64; 32]>(), theta in any::<[u64; 32]>()) {
        let locked = pokimd::fuzzycommit::LockedCode(IrisCode(words));
        let _ = unlock(&locked, &IrisCode(theta));
    }
}
