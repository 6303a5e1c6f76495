//! The Trivium stream cipher (80-bit key, 80-bit IV, 288-bit state).
//!
//! Key and IV bytes follow the eSTREAM reference convention: the 80-bit
//! value is read as a little-endian integer and its most significant bit is
//! loaded into `s1`. Keystream bits are packed least-significant-bit first
//! into output bytes, so `keystream_bytes` reproduces the published
//! eSTREAM test vectors byte for byte.

use super::CryptoError;

/// Key width in bytes.
pub const KEY_BYTES: usize = 10;
/// IV width in bytes.
pub const IV_BYTES: usize = 10;

const WARM_UP_ROUNDS: usize = 4 * 288;

const MASK_A: u128 = (1 << 93) - 1;
const MASK_B: u128 = (1 << 84) - 1;
const MASK_C: u128 = (1 << 111) - 1;

/// Running Trivium generator.
///
/// The three shift registers hold `s1..s93`, `s94..s177` and `s178..s288`
/// with `s_k` of each register stored at bit `k - first`.
#[derive(Clone)]
pub struct TriviumState {
    key: [u8; KEY_BYTES],
    iv: [u8; IV_BYTES],
    a: u128,
    b: u128,
    c: u128,
    position: u64,
}

impl std::fmt::Debug for TriviumState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Never print key material.
        f.debug_struct("TriviumState")
            .field("position", &self.position)
            .finish_non_exhaustive()
    }
}

fn load_80(bytes: &[u8; 10]) -> u128 {
    let mut reg = 0u128;
    for p in 0..80 {
        let src = 79 - p;
        let bit = (bytes[src / 8] >> (src % 8)) & 1;
        reg |= (bit as u128) << p;
    }
    reg
}

#[inline(always)]
fn bit(reg: u128, idx: u32) -> u8 {
    ((reg >> idx) & 1) as u8
}

impl TriviumState {
    /// Loads key and IV and runs the 1152 warm-up rounds.
    pub fn new(key: &[u8], iv: &[u8]) -> Result<Self, CryptoError> {
        let key: [u8; KEY_BYTES] = key.try_into().map_err(|_| CryptoError::InvalidKeyLength {
            what: "trivium key",
            expected: KEY_BYTES,
            got: key.len(),
        })?;
        let iv: [u8; IV_BYTES] = iv.try_into().map_err(|_| CryptoError::InvalidKeyLength {
            what: "trivium iv",
            expected: IV_BYTES,
            got: iv.len(),
        })?;
        let mut state = TriviumState {
            key,
            iv,
            a: load_80(&key),
            b: load_80(&iv),
            c: 0b111 << 108,
            position: 0,
        };
        for _ in 0..WARM_UP_ROUNDS {
            state.clock();
        }
        Ok(state)
    }

    /// Number of keystream bits emitted so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn key(&self) -> &[u8; KEY_BYTES] {
        &self.key
    }

    pub fn iv(&self) -> &[u8; IV_BYTES] {
        &self.iv
    }

    #[inline(always)]
    fn clock(&mut self) -> u8 {
        let (a, b, c) = (self.a, self.b, self.c);
        let mut t1 = bit(a, 65) ^ bit(a, 92);
        let mut t2 = bit(b, 68) ^ bit(b, 83);
        let mut t3 = bit(c, 65) ^ bit(c, 110);
        let z = t1 ^ t2 ^ t3;
        t1 ^= (bit(a, 90) & bit(a, 91)) ^ bit(b, 77);
        t2 ^= (bit(b, 81) & bit(b, 82)) ^ bit(c, 86);
        t3 ^= (bit(c, 108) & bit(c, 109)) ^ bit(a, 68);
        self.a = ((a << 1) | t3 as u128) & MASK_A;
        self.b = ((b << 1) | t1 as u128) & MASK_B;
        self.c = ((c << 1) | t2 as u128) & MASK_C;
        z
    }

    fn next_bit(&mut self) -> u8 {
        self.position += 1;
        self.clock()
    }

    /// Emits the next `n_bits` keystream bits in stream order.
    pub fn keystream(&mut self, n_bits: usize) -> Vec<bool> {
        (0..n_bits).map(|_| self.next_bit() == 1).collect()
    }

    /// Emits the next `n` keystream bytes, LSB-first packing.
    pub fn keystream_bytes(&mut self, n: usize) -> Vec<u8> {
        let mut out = vec![0u8; n];
        self.fill(&mut out);
        out
    }

    pub fn fill(&mut self, out: &mut [u8]) {
        for byte in out.iter_mut() {
            let mut v = 0u8;
            for j in 0..8 {
                v |= self.next_bit() << j;
            }
            *byte = v;
        }
    }

    /// Discards `n_bits` of keystream.
    pub fn skip(&mut self, n_bits: u64) {
        for _ in 0..n_bits {
            self.clock();
        }
        self.position += n_bits;
    }

    /// XORs the keystream into `data` in place.
    pub fn apply_keystream(&mut self, data: &mut [u8]) {
        for byte in data.iter_mut() {
            let mut ks = [0u8; 1];
            self.fill(&mut ks);
            *byte ^= ks[0];
        }
    }
}

/// Packs bits LSB-first, matching [`TriviumState::keystream_bytes`].
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (j, &b)| acc | ((b as u8) << j))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_widths() {
        assert!(matches!(
            TriviumState::new(&[0; 9], &[0; 10]),
            Err(CryptoError::InvalidKeyLength { got: 9, .. })
        ));
        assert!(matches!(
            TriviumState::new(&[0; 10], &[0; 16]),
            Err(CryptoError::InvalidKeyLength { got: 16, .. })
        ));
    }

    #[test]
    fn zero_length_request_is_a_no_op() {
        let mut s = TriviumState::new(&[0; 10], &[0; 10]).unwrap();
        assert!(s.keystream(0).is_empty());
        assert_eq!(s.position(), 0);
    }

    #[test]
    fn split_reads_equal_one_read() {
        let key = *b"an example";
        let iv = *b"a nonce...";
        let mut one = TriviumState::new(&key, &iv).unwrap();
        let mut two = one.clone();
        let whole = one.keystream(256);
        let mut halves = two.keystream(128);
        halves.extend(two.keystream(128));
        assert_eq!(whole, halves);
        assert_eq!(one.position(), 256);
        assert_eq!(two.position(), 256);
    }

    #[test]
    fn bit_and_byte_interfaces_agree() {
        let mut s1 = TriviumState::new(&[7; 10], &[3; 10]).unwrap();
        let mut s2 = s1.clone();
        assert_eq!(pack_bits(&s1.keystream(64)), s2.keystream_bytes(8));
    }

    #[test]
    fn register_invariant_holds() {
        let mut s = TriviumState::new(&[0xff; 10], &[0xff; 10]).unwrap();
        for _ in 0..1000 {
            s.next_bit();
            assert_eq!(s.a & !MASK_A, 0);
            assert_eq!(s.b & !MASK_B, 0);
            assert_eq!(s.c & !MASK_C, 0);
        }
    }
}
