//! Independent success oracle for the iris fuzzy commitment.
//!
//! Builds the 64x64 Hadamard matrix by Sylvester doubling, decodes each
//! noisy block by exhaustive nearest-codeword search over all 128
//! codewords, and predicts success iff at most 6 blocks decode to the wrong
//! symbol (the RS(32,20) bounded-distance radius). Shares no code with the
//! FWHT or Berlekamp-Massey paths it checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const RS_RADIUS: usize = 6;

pub fn sylvester_codewords() -> Vec<u64> {
    // H_1 = [1]; H_2n = [[H, H], [H, -H]], entries stored as bits (1 = -1).
    let mut h: Vec<Vec<u8>> = vec![vec![0]];
    while h.len() < 64 {
        let n = h.len();
        let mut next = vec![vec![0u8; 2 * n]; 2 * n];
        for r in 0..n {
            for c in 0..n {
                next[r][c] = h[r][c];
                next[r][c + n] = h[r][c];
                next[r + n][c] = h[r][c];
                next[r + n][c + n] = h[r][c] ^ 1;
            }
        }
        h = next;
    }
    let rows: Vec<u64> = h
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(0u64, |acc, (j, &b)| acc | ((b as u64) << j))
        })
        .collect();
    // Symbols 0..64 are the rows, 64..128 their complements.
    rows.iter()
        .copied()
        .chain(rows.iter().map(|r| !r))
        .collect()
}

pub fn nearest_symbol(codewords: &[u64], word: u64) -> u8 {
    let mut best = (u32::MAX, 0u8);
    for (s, cw) in codewords.iter().enumerate() {
        let d = (cw ^ word).count_ones();
        if d < best.0 {
            best = (d, s as u8);
        }
    }
    best.1
}

/// Fraction of trials in which the cascade is predicted to recover `Ck`.
pub fn predicted_success_rate(ber: f64, trials: usize, seed: u64) -> f64 {
    let codewords = sylvester_codewords();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ok = 0;
    for _ in 0..trials {
        let mut wrong_blocks = 0;
        for _ in 0..32 {
            let symbol: u8 = rng.random_range(0..128);
            let mut noise = 0u64;
            for j in 0..64 {
                if rng.random_bool(ber) {
                    noise |= 1 << j;
                }
            }
            if nearest_symbol(&codewords, codewords[symbol as usize] ^ noise) != symbol {
                wrong_blocks += 1;
            }
        }
        if wrong_blocks <= RS_RADIUS {
            ok += 1;
        }
    }
    ok as f64 / trials as f64
}
