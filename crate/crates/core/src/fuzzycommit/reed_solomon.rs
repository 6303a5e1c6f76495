//! Systematic RS(32, 20) over GF(2^7), a shortened narrow-sense code with
//! generator roots alpha^1..alpha^12. Corrects up to 6 symbol errors.
//!
//! Symbol `t` of a codeword is the coefficient of x^(31 - t); the first 20
//! symbols are the data, the last 12 the parity.
//!
//! Decoding: syndromes, Berlekamp-Massey for the error locator, Chien
//! search for positions, Forney for magnitudes. A locator whose roots do
//! not all fall inside the shortened word, or a corrected word with a
//! non-zero syndrome, is reported as [`DecodeFailure`].

use super::gf;
use thiserror::Error;

pub const N: usize = 32;
pub const K: usize = 20;
pub const PARITY: usize = N - K;
pub const T: usize = PARITY / 2;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("uncorrectable word: more than {T} symbol errors")]
pub struct DecodeFailure;

/// Generator polynomial, lowest degree first; degree 12, monic.
fn generator() -> [u8; PARITY + 1] {
    let mut g = [0u8; PARITY + 1];
    g[0] = 1;
    for j in 1..=PARITY {
        let root = gf::alpha_pow(j as i64);
        // g(x) *= (x + root)
        for d in (0..=j).rev() {
            let shifted = if d > 0 { g[d - 1] } else { 0 };
            g[d] = shifted ^ gf::mul(g[d], root);
        }
    }
    g
}

pub fn encode(data: &[u8; K]) -> [u8; N] {
    let g = generator();
    // Long division of data(x) * x^12 by g(x), highest degree first.
    let mut rem = [0u8; PARITY];
    for &d in data.iter() {
        debug_assert!(d < 128);
        let feedback = d ^ rem[0];
        rem.copy_within(1.., 0);
        rem[PARITY - 1] = 0;
        if feedback != 0 {
            for (i, r) in rem.iter_mut().enumerate() {
                // rem[i] holds the coefficient of x^(11 - i)
                *r ^= gf::mul(feedback, g[PARITY - 1 - i]);
            }
        }
    }
    let mut out = [0u8; N];
    out[..K].copy_from_slice(data);
    out[K..].copy_from_slice(&rem);
    out
}

fn syndromes(word: &[u8; N]) -> [u8; PARITY] {
    let mut s = [0u8; PARITY];
    for (j, sj) in s.iter_mut().enumerate() {
        let x = gf::alpha_pow(j as i64 + 1);
        // Horner, highest power first.
        *sj = word.iter().fold(0u8, |acc, &c| gf::mul(acc, x) ^ c);
    }
    s
}

/// Error locator from the syndrome sequence, lowest degree first.
fn berlekamp_massey(s: &[u8; PARITY]) -> Vec<u8> {
    let mut c = vec![1u8];
    let mut b = vec![1u8];
    let mut l = 0usize;
    let mut m = 1usize;
    let mut last_d = 1u8;
    for n in 0..PARITY {
        let mut d = s[n];
        for i in 1..=l.min(c.len() - 1) {
            d ^= gf::mul(c[i], s[n - i]);
        }
        if d == 0 {
            m += 1;
            continue;
        }
        let coef = gf::div(d, last_d);
        let mut next = c.clone();
        if next.len() < b.len() + m {
            next.resize(b.len() + m, 0);
        }
        for (i, &bi) in b.iter().enumerate() {
            next[i + m] ^= gf::mul(coef, bi);
        }
        if 2 * l <= n {
            l = n + 1 - l;
            b = std::mem::replace(&mut c, next);
            last_d = d;
            m = 1;
        } else {
            c = next;
            m += 1;
        }
    }
    c.truncate(l + 1);
    c.resize(l + 1, 0);
    c
}

fn eval(poly: &[u8], x: u8) -> u8 {
    poly.iter().rev().fold(0u8, |acc, &c| gf::mul(acc, x) ^ c)
}

/// Corrects the word in place and returns the data symbols.
pub fn decode(word: &[u8; N]) -> Result<[u8; K], DecodeFailure> {
    if word.iter().any(|&s| s >= 128) {
        return Err(DecodeFailure);
    }
    let s = syndromes(word);
    let mut fixed = *word;
    if s.iter().any(|&v| v != 0) {
        let locator = berlekamp_massey(&s);
        let errors = locator.len() - 1;
        if errors == 0 || errors > T || locator[errors] == 0 {
            return Err(DecodeFailure);
        }
        // Omega(x) = S(x) * Lambda(x) mod x^12
        let mut omega = [0u8; PARITY];
        for (i, &li) in locator.iter().enumerate() {
            for (j, &sj) in s.iter().enumerate() {
                if i + j < PARITY {
                    omega[i + j] ^= gf::mul(li, sj);
                }
            }
        }
        // Formal derivative: odd-degree terms survive in characteristic 2.
        let derivative: Vec<u8> = (1..locator.len())
            .map(|i| if i % 2 == 1 { locator[i] } else { 0 })
            .collect();
        let mut found = 0;
        for (t, sym) in fixed.iter_mut().enumerate() {
            let power = (N - 1 - t) as i64;
            let x_inv = gf::alpha_pow(-power);
            if eval(&locator, x_inv) != 0 {
                continue;
            }
            let denom = eval(&derivative, x_inv);
            if denom == 0 {
                return Err(DecodeFailure);
            }
            *sym ^= gf::div(eval(&omega, x_inv), denom);
            found += 1;
        }
        if found != errors || syndromes(&fixed).iter().any(|&v| v != 0) {
            return Err(DecodeFailure);
        }
    }
    let mut data = [0u8; K];
    data.copy_from_slice(&fixed[..K]);
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::index::sample, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(rng: &mut ChaCha8Rng) -> [u8; K] {
        std::array::from_fn(|_| rng.random_range(0..128))
    }

    fn corrupt(rng: &mut ChaCha8Rng, word: &mut [u8; N], count: usize) {
        for pos in sample(rng, N, count) {
            word[pos] ^= rng.random_range(1..128);
        }
    }

    #[test]
    fn zero_data_gives_zero_codeword() {
        assert_eq!(encode(&[0; K]), [0; N]);
    }

    #[test]
    fn generator_has_the_designed_roots() {
        let g = generator();
        assert_eq!(g[PARITY], 1);
        for j in 1..=PARITY {
            assert_eq!(eval(&g, gf::alpha_pow(j as i64)), 0);
        }
        assert_ne!(eval(&g, gf::alpha_pow(PARITY as i64 + 1)), 0);
    }

    #[test]
    fn codewords_have_zero_syndrome() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let cw = encode(&random_data(&mut rng));
            assert!(syndromes(&cw).iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn round_trip_and_up_to_six_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..3_000 {
            let data = random_data(&mut rng);
            let mut cw = encode(&data);
            corrupt(&mut rng, &mut cw, trial % (T + 1));
            assert_eq!(decode(&cw), Ok(data), "trial {trial}");
        }
    }

    #[test]
    fn seven_errors_fail_or_miscorrect() {
        // Beyond the bound: failure or a different codeword, never a panic.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut failures = 0;
        for _ in 0..2_000 {
            let data = random_data(&mut rng);
            let mut cw = encode(&data);
            corrupt(&mut rng, &mut cw, 7);
            match decode(&cw) {
                Err(DecodeFailure) => failures += 1,
                Ok(d) => assert_ne!(d, data),
            }
        }
        assert!(failures > 1_900, "failures = {failures}");
    }

    #[test]
    fn random_words_do_not_panic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5_000 {
            let w: [u8; N] = std::array::from_fn(|_| rng.random_range(0..128));
            let _ = decode(&w);
        }
        assert_eq!(decode(&[200; N]), Err(DecodeFailure));
    }

    #[test]
    fn errors_in_parity_only_are_corrected() {
        let data = [5u8; K];
        let mut cw = encode(&data);
        for sym in &mut cw[K..K + T] {
            *sym ^= 0x55;
        }
        assert_eq!(decode(&cw), Ok(data));
    }
}
