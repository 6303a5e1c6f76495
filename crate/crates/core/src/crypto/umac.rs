//! Doctor-card message authentication under `Key3`.
//!
//! Polynomial-evaluation universal hash over GF(2^128) with the key as the
//! evaluation point, finalized with SHA-256 to a 256-bit tag.

use super::{sha256_concat, Digest256};

/// Reduction polynomial x^128 + x^7 + x^2 + x + 1, low-order terms.
const REDUCTION: u128 = 0x87;

/// 128-bit doctor master key.
#[derive(Clone, PartialEq, Eq)]
pub struct MacKey3(pub [u8; 16]);

impl std::fmt::Debug for MacKey3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("MacKey3(..)")
    }
}

impl MacKey3 {
    pub fn from_slice(bytes: &[u8]) -> Option<MacKey3> {
        bytes.try_into().ok().map(MacKey3)
    }

    fn point(&self) -> u128 {
        u128::from_be_bytes(self.0)
    }
}

/// Carry-less multiplication modulo the reduction polynomial.
/// Bit 127 of the integer is the coefficient of x^127.
pub fn gf128_mul(mut a: u128, mut b: u128) -> u128 {
    let mut acc = 0u128;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        let carry = a >> 127;
        a <<= 1;
        if carry == 1 {
            a ^= REDUCTION;
        }
    }
    acc
}

/// Horner evaluation over 16-byte big-endian blocks (last one zero padded)
/// followed by a block carrying the message length in bits.
pub fn poly_hash(point: u128, message: &[u8]) -> u128 {
    let mut acc = 0u128;
    for chunk in message.chunks(16) {
        let mut block = [0u8; 16];
        block[..chunk.len()].copy_from_slice(chunk);
        acc = gf128_mul(acc ^ u128::from_be_bytes(block), point);
    }
    let bit_len = (message.len() as u128) * 8;
    gf128_mul(acc ^ bit_len, point)
}

pub fn umac_key3(key: &MacKey3, message: &[u8]) -> Digest256 {
    let eval = poly_hash(key.point(), message);
    sha256_concat(&[&key.0, &eval.to_be_bytes()])
}

pub fn umac_verify(key: &MacKey3, message: &[u8], tag: &Digest256) -> bool {
    // Digest equality is not constant time; side channels are out of scope.
    umac_key3(key, message) == *tag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::sha256;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_message_evaluates_to_zero() {
        let key = MacKey3([0x42; 16]);
        let mut expect = key.0.to_vec();
        expect.extend_from_slice(&[0u8; 16]);
        assert_eq!(umac_key3(&key, b""), sha256(&expect));
        assert_eq!(umac_key3(&key, b""), umac_key3(&key, b""));
    }

    #[test]
    fn one_is_the_multiplicative_identity() {
        assert_eq!(gf128_mul(1, 0xdead_beef), 0xdead_beef);
        // x * x^127 = x^128 = x^7 + x^2 + x + 1
        assert_eq!(gf128_mul(2, 1 << 127), REDUCTION);
    }

    #[test]
    fn distinct_doctors_get_distinct_tags() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let k1 = MacKey3(rng.random());
            let k2 = MacKey3(rng.random());
            let msg: [u8; 40] = std::array::from_fn(|_| rng.random());
            assert_ne!(umac_key3(&k1, &msg), umac_key3(&k2, &msg));
        }
    }

    #[test]
    fn tampered_message_fails_verification() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let key = MacKey3(rng.random());
            let msg: Vec<u8> = (0..84).map(|_| rng.random()).collect();
            let tag = umac_key3(&key, &msg);
            assert!(umac_verify(&key, &msg, &tag));
            let mut bad = msg.clone();
            let bit = rng.random_range(0..bad.len() * 8);
            bad[bit / 8] ^= 1 << (bit % 8);
            assert!(!umac_verify(&key, &bad, &tag));
        }
    }

    #[test]
    fn trailing_zero_padding_is_not_a_collision() {
        let key = MacKey3([7; 16]);
        assert_ne!(umac_key3(&key, b"ab"), umac_key3(&key, b"ab\0"));
    }

    proptest! {
        #[test]
        fn field_multiplication_is_commutative(a: u128, b: u128) {
            prop_assert_eq!(gf128_mul(a, b), gf128_mul(b, a));
        }

        #[test]
        fn field_multiplication_distributes(a: u128, b: u128, c: u128) {
            prop_assert_eq!(gf128_mul(a, b ^ c), gf128_mul(a, b) ^ gf128_mul(a, c));
        }

        #[test]
        fn field_multiplication_associates(a: u128, b: u128, c: u128) {
            prop_assert_eq!(gf128_mul(gf128_mul(a, b), c), gf128_mul(a, gf128_mul(b, c)));
        }
    }
}
