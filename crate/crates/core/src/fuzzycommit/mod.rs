//! Biometric key binding for emergency access.
//!
//! The 140-bit cache key `Ck` is RS(32,20)-encoded over GF(2^7), each of
//! the 32 symbols is expanded to a 64-bit RM(1,6) codeword, and the
//! resulting 2048 bits are XORed with the reference iris code. A fresh
//! iris sample close enough to the reference unlocks `Ck` again: the
//! Hadamard layer absorbs scattered bit errors, Reed-Solomon absorbs whole
//! blocks the Hadamard layer got wrong.

pub mod gf;
pub mod hadamard;
pub mod reed_solomon;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use reed_solomon::DecodeFailure;

pub const IRIS_BITS: usize = 2048;
pub const BLOCKS: usize = reed_solomon::N;
pub const CACHE_KEY_SYMBOLS: usize = reed_solomon::K;
pub const CACHE_KEY_BITS: usize = CACHE_KEY_SYMBOLS * 7;
/// `Ck` packed MSB-first into bytes; the final 4 bits are zero.
pub const CACHE_KEY_BYTES: usize = CACHE_KEY_BITS.div_ceil(8);

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FuzzyError {
    #[error("bit error rate {0} outside [0, 0.5]")]
    InvalidParameter(f64),
    #[error("symbol {0} does not fit in 7 bits")]
    SymbolOutOfRange(u8),
    #[error(transparent)]
    Decode(#[from] DecodeFailure),
}

/// A 2048-bit binary iris code, stored as 32 blocks of 64 bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct IrisCode(pub [u64; BLOCKS]);

impl std::fmt::Debug for IrisCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "IrisCode({}..)", &hex::encode(self.to_bytes())[..16])
    }
}

impl IrisCode {
    pub const ZERO: IrisCode = IrisCode([0; BLOCKS]);

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> IrisCode {
        IrisCode(std::array::from_fn(|_| rng.random()))
    }

    pub fn xor(&self, other: &IrisCode) -> IrisCode {
        IrisCode(std::array::from_fn(|k| self.0[k] ^ other.0[k]))
    }

    pub fn hamming(&self, other: &IrisCode) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn bit(&self, index: usize) -> bool {
        (self.0[index / 64] >> (index % 64)) & 1 == 1
    }

    /// Big-endian per block.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|w| w.to_be_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<IrisCode> {
        if bytes.len() != IRIS_BITS / 8 {
            return None;
        }
        let mut words = [0u64; BLOCKS];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks_exact(8)) {
            *w = u64::from_be_bytes(chunk.try_into().unwrap());
        }
        Some(IrisCode(words))
    }
}

/// Θ_lock: the committed codeword XOR the reference iris code.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct LockedCode(pub IrisCode);

/// The 140-bit cache encryption key `Ck`: 20 symbols of 7 bits.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct CacheKey([u8; CACHE_KEY_SYMBOLS]);

impl std::fmt::Debug for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("CacheKey(..)")
    }
}

impl CacheKey {
    pub fn from_symbols(symbols: [u8; CACHE_KEY_SYMBOLS]) -> Result<CacheKey, FuzzyError> {
        if let Some(&bad) = symbols.iter().find(|&&s| s >= 128) {
            return Err(FuzzyError::SymbolOutOfRange(bad));
        }
        Ok(CacheKey(symbols))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> CacheKey {
        CacheKey(std::array::from_fn(|_| rng.random_range(0..128)))
    }

    pub fn symbols(&self) -> &[u8; CACHE_KEY_SYMBOLS] {
        &self.0
    }

    pub fn to_bytes(&self) -> [u8; CACHE_KEY_BYTES] {
        let mut out = [0u8; CACHE_KEY_BYTES];
        for (s, &sym) in self.0.iter().enumerate() {
            for b in 0..7 {
                let bit = (sym >> (6 - b)) & 1;
                let pos = s * 7 + b;
                out[pos / 8] |= bit << (7 - pos % 8);
            }
        }
        out
    }
}

/// Full 2048-bit commitment codeword for `ck`.
pub fn commit_codeword(ck: &CacheKey) -> IrisCode {
    let rs = reed_solomon::encode(&ck.0);
    IrisCode(std::array::from_fn(|k| hadamard::encode(rs[k])))
}

pub fn lock(ck: &CacheKey, theta_ref: &IrisCode) -> LockedCode {
    LockedCode(commit_codeword(ck).xor(theta_ref))
}

pub fn unlock(locked: &LockedCode, theta_sam: &IrisCode) -> Result<CacheKey, DecodeFailure> {
    let noisy = locked.0.xor(theta_sam);
    let symbols: [u8; BLOCKS] = std::array::from_fn(|k| hadamard::decode(noisy.0[k]));
    reed_solomon::decode(&symbols).map(CacheKey)
}

/// Synthetic capture: flips each bit independently with probability `ber`.
pub fn sample_iris(theta_ref: &IrisCode, ber: f64, seed: u64) -> Result<IrisCode, FuzzyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_iris_with(theta_ref, ber, &mut rng)
}

pub fn sample_iris_with<R: Rng + ?Sized>(
    theta_ref: &IrisCode,
    ber: f64,
    rng: &mut R,
) -> Result<IrisCode, FuzzyError> {
    if !(0.0..=0.5).contains(&ber) {
        return Err(FuzzyError::InvalidParameter(ber));
    }
    let mut out = *theta_ref;
    if ber == 0.0 {
        return Ok(out);
    }
    for word in out.0.iter_mut() {
        for j in 0..64 {
            if rng.random_bool(ber) {
                *word ^= 1 << j;
            }
        }
    }
    Ok(out)
}
