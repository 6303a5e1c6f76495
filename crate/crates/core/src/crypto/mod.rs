//! Deterministic primitives shared by every protocol entity.
//!
//! SHA-256 and HMAC come from the RustCrypto `sha2`/`hmac` crates; Trivium
//! and the doctor-card MAC are implemented here.

mod trivium;
mod umac;

pub use trivium::{pack_bits, TriviumState, IV_BYTES, KEY_BYTES};
pub use umac::{gf128_mul, poly_hash, umac_key3, umac_verify, MacKey3};

use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use thiserror::Error;

type HmacSha256 = Hmac<Sha256>;

/// Largest HMAC key accepted; one SHA-256 block.
pub const MAX_HMAC_KEY: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("{what}: expected {expected} bytes, got {got}")]
    InvalidKeyLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid HMAC key length {0} (must be 1..=64 bytes)")]
    InvalidKey(usize),
}

/// A 256-bit digest or tag.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest256(pub [u8; 32]);

impl Digest256 {
    pub const ZERO: Digest256 = Digest256([0; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn xor(&self, other: &Digest256) -> Digest256 {
        let mut out = [0u8; 32];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a ^ b;
        }
        Digest256(out)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Digest256> {
        bytes.try_into().ok().map(Digest256)
    }
}

impl std::fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest256({})", self.to_hex())
    }
}

impl AsRef<[u8]> for Digest256 {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

pub fn sha256(data: &[u8]) -> Digest256 {
    Digest256(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn sha256_concat(parts: &[&[u8]]) -> Digest256 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest256(h.finalize().into())
}

fn keyed(key: &[u8]) -> Result<HmacSha256, CryptoError> {
    if key.is_empty() || key.len() > MAX_HMAC_KEY {
        return Err(CryptoError::InvalidKey(key.len()));
    }
    Ok(HmacSha256::new_from_slice(key).expect("HMAC accepts any key length"))
}

/// HMAC-SHA-256 (RFC 2104).
pub fn hmac_sha256(key: &[u8], data: &[u8]) -> Result<Digest256, CryptoError> {
    let mut mac = keyed(key)?;
    mac.update(data);
    Ok(Digest256(mac.finalize().into_bytes().into()))
}

/// Constant-time tag comparison; a malformed key never verifies.
pub fn hmac_verify(key: &[u8], data: &[u8], tag: &Digest256) -> bool {
    match keyed(key) {
        Ok(mut mac) => {
            mac.update(data);
            mac.verify_slice(&tag.0).is_ok()
        }
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nist_sha256_vectors() {
        assert_eq!(
            sha256(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(sha256_concat(&[b"a", b"", b"bc"]), sha256(b"abc"));
    }

    #[test]
    fn rfc4231_case_1_and_2() {
        let tag = hmac_sha256(&[0x0b; 20], b"Hi There").unwrap();
        assert_eq!(
            tag.to_hex(),
            "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"
        );
        let tag = hmac_sha256(b"Jefe", b"what do ya want for nothing?").unwrap();
        assert_eq!(
            tag.to_hex(),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
        );
    }

    #[test]
    fn empty_and_oversized_keys_rejected() {
        assert_eq!(hmac_sha256(b"", b"x"), Err(CryptoError::InvalidKey(0)));
        assert_eq!(
            hmac_sha256(&[1; 65], b"x"),
            Err(CryptoError::InvalidKey(65))
        );
        assert!(!hmac_verify(b"", b"x", &Digest256::ZERO));
    }

    #[test]
    fn verify_round_trip() {
        let key = [9u8; 32];
        let tag = hmac_sha256(&key, b"T1||R").unwrap();
        assert!(hmac_verify(&key, b"T1||R", &tag));
        assert!(!hmac_verify(&key, b"T1||S", &tag));
        assert!(!hmac_verify(&[8u8; 32], b"T1||R", &tag));
    }

    #[test]
    fn single_bit_flips_change_the_tag() {
        let key = [0x5au8; 32];
        let msg = b"0123456789abcdef".to_vec();
        let tag = hmac_sha256(&key, &msg).unwrap();
        for bit in 0..msg.len() * 8 {
            let mut m = msg.clone();
            m[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(hmac_sha256(&key, &m).unwrap(), tag, "bit {bit}");
        }
    }

    #[test]
    fn verify_iff_same_message_on_toy_domain() {
        // Exhaustive over all 8-bit messages with a fixed key.
        let key = [0x11u8; 32];
        let tags: Vec<_> = (0..=255u8)
            .map(|m| hmac_sha256(&key, &[m]).unwrap())
            .collect();
        for (m, tag) in tags.iter().enumerate() {
            for other in 0..=255u8 {
                assert_eq!(hmac_verify(&key, &[other], tag), other as usize == m);
            }
        }
    }

    #[test]
    fn digest_xor_identities() {
        let a = sha256(b"a");
        let b = sha256(b"b");
        assert_eq!(a.xor(&a), Digest256::ZERO);
        assert_eq!(a.xor(&b), b.xor(&a));
        assert_eq!(a.xor(&b).xor(&b), a);
    }
}
