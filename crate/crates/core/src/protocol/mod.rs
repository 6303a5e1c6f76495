//! Protocol entities and message flows: enrollment, normal access,
//! emergency access and recovery.
//!
//! Entities are sans-IO state machines. They take decoded messages plus the
//! current time and return the messages to send; the simulator owns
//! transport, timing and the adversary.

mod card;
mod enrollment;
mod has;
mod imd;
pub mod messages;
mod programmer;

pub use card::{DoctorCard, PatientCard};
pub use enrollment::{enroll_doctor, enroll_patient, PatientRegistration};
pub use has::{DoctorSession, Has, PatientRecord};
pub use imd::{Imd, ImdConfig, ImdMode, ImdOutput};
pub use messages::*;
pub use programmer::{Outgoing, Programmer, ProgrammerMode, ProgrammerOutcome, ProgrammerStep};

use crate::crypto::{hmac_sha256, sha256, sha256_concat, Digest256};
use crate::fuzzycommit::CacheKey;
use crate::keygen::{KeyGenError, TempKey};
use thiserror::Error;

pub const REQUEST_READ: u32 = 1;
pub const REQUEST_REPROGRAM: u32 = 2;
/// Service request code that starts recovery mode.
pub const REQUEST_RESET: u32 = 0xFFFF_FFFF;
/// Doctor ID bound into the server share during emergency access.
pub const FIRST_AIDER: u32 = 0xFFFF_FFFE;
pub const DEFAULT_TS_MS: u32 = 5000;
pub const DEFAULT_CACHE_SIZE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("enrollment failed: {0}")]
    EnrollmentFailure(String),
    #[error("HMAC verification failed")]
    AuthRejected,
    #[error("counter {received} cannot be served at local cycle {local}")]
    Desync { local: u32, received: u32 },
    #[error("timestamp outside the time window")]
    StaleTimestamp,
    #[error("doctor identity not verified")]
    BadDoctorIdentity,
    #[error("request not permitted by policy")]
    PolicyDenied,
    #[error("implant rejected the flow: {0:?}")]
    Rejected(RejectReason),
    #[error("could not unlock or validate cached key")]
    DecodeFailure,
    #[error("no cached key for this cycle")]
    CacheExhausted,
    #[error("key material destroyed")]
    KeyDestroyed,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{entity} cannot handle {kind:?} now")]
    UnexpectedMessage {
        entity: &'static str,
        kind: MessageKind,
    },
    #[error("malformed message: {0}")]
    Malformed(#[from] WireError),
    #[error("device has no keys loaded")]
    NotProvisioned,
}

impl ProtocolError {
    /// The reason carried on the wire or into a verdict.
    pub fn reason(&self) -> RejectReason {
        match self {
            ProtocolError::AuthRejected => RejectReason::AuthRejected,
            ProtocolError::Desync { .. } => RejectReason::Desync,
            ProtocolError::StaleTimestamp => RejectReason::StaleTimestamp,
            ProtocolError::BadDoctorIdentity => RejectReason::BadDoctorIdentity,
            ProtocolError::PolicyDenied => RejectReason::PolicyDenied,
            ProtocolError::Rejected(r) => *r,
            ProtocolError::DecodeFailure => RejectReason::DecodeFailure,
            ProtocolError::CacheExhausted => RejectReason::CacheExhausted,
            ProtocolError::KeyDestroyed => RejectReason::KeyDestroyed,
            _ => RejectReason::Other,
        }
    }
}

impl From<KeyGenError> for ProtocolError {
    fn from(e: KeyGenError) -> Self {
        match e {
            KeyGenError::Desync { local, received } => ProtocolError::Desync { local, received },
            KeyGenError::KeyDestroyed => ProtocolError::KeyDestroyed,
            KeyGenError::InvalidCycle => ProtocolError::Desync {
                local: 0,
                received: 0,
            },
            other => ProtocolError::InvalidParameter(other.to_string()),
        }
    }
}

fn cat(parts: &[u32]) -> Vec<u8> {
    parts.iter().flat_map(|v| v.to_be_bytes()).collect()
}

/// HMAC keyed by a temporary key; temporary keys are always 32 bytes.
pub fn hmac_with(key: &TempKey, data: &[u8]) -> Digest256 {
    hmac_sha256(&key.bytes, data).expect("temporary keys are 32 bytes")
}

/// `HMAC_SA(T1)`, carried in the challenge for the card.
pub fn challenge_hmac_a(sa: &TempKey, t1: u32) -> Digest256 {
    hmac_with(sa, &cat(&[t1]))
}

/// `HMAC_SB(T1 || ID_P || ID_I)`, carried in the challenge for the server.
pub fn challenge_hmac_b(sb: &TempKey, t1: u32, id_p: u32, id_i: u32) -> Digest256 {
    hmac_with(sb, &cat(&[t1, id_p, id_i]))
}

/// Card share `HMAC_SA(T1 || R)`.
pub fn card_share(sa: &TempKey, t1: u32, r: u32) -> Digest256 {
    hmac_with(sa, &cat(&[t1, r]))
}

/// Server share `HMAC_SB(T1 || ID_P || ID_I || R)`.
pub fn has_share(sb: &TempKey, t1: u32, id_p: u32, id_i: u32, r: u32) -> Digest256 {
    hmac_with(sb, &cat(&[t1, id_p, id_i, r]))
}

pub fn assemble_token(card: &Digest256, has: &Digest256) -> Digest256 {
    card.xor(has)
}

/// `Hash(T1 || Token)`.
pub fn token_proof(t1: u32, token: &Digest256) -> Digest256 {
    sha256_concat(&[&t1.to_be_bytes(), token.as_bytes()])
}

/// `SKey = Hash(card share) XOR Hash(server share)`.
pub fn session_key(card: &Digest256, has: &Digest256) -> Digest256 {
    sha256(card.as_bytes()).xor(&sha256(has.as_bytes()))
}

/// One keystream block for cache item `i`: `sha256(Ck || i || 0)`.
fn cache_pad(ck: &CacheKey, i: u32) -> Digest256 {
    sha256_concat(&[&ck.to_bytes(), &i.to_be_bytes(), &0u32.to_be_bytes()])
}

pub fn encrypt_cached_key(ck: &CacheKey, i: u32, sb: &TempKey) -> CacheItem {
    CacheItem {
        i,
        ct: Digest256(sb.bytes).xor(&cache_pad(ck, i)),
    }
}

/// Recovers `SB_i` bytes; a wrong `Ck` yields unrelated bytes.
pub fn decrypt_cached_key(ck: &CacheKey, item: &CacheItem) -> [u8; 32] {
    item.ct.xor(&cache_pad(ck, item.i)).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keygen::Lineage;

    fn key(byte: u8, lineage: Lineage) -> TempKey {
        TempKey {
            bytes: [byte; 32],
            cycle: 1,
            lineage,
        }
    }

    #[test]
    fn token_of_equal_shares_is_zero() {
        let d = sha256(b"x");
        assert_eq!(assemble_token(&d, &d), Digest256::ZERO);
    }

    #[test]
    fn token_is_commutative() {
        let (a, b) = (sha256(b"a"), sha256(b"b"));
        assert_eq!(assemble_token(&a, &b), assemble_token(&b, &a));
    }

    #[test]
    fn hmac_inputs_have_the_listed_lengths() {
        let sa = key(1, Lineage::SA);
        let sb = key(2, Lineage::SB);
        assert_eq!(
            challenge_hmac_a(&sa, 9),
            hmac_sha256(&sa.bytes, &[0, 0, 0, 9]).unwrap()
        );
        assert_eq!(
            challenge_hmac_b(&sb, 1, 2, 3),
            hmac_sha256(&sb.bytes, &[0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3]).unwrap()
        );
        assert_eq!(
            card_share(&sa, 1, 2),
            hmac_sha256(&sa.bytes, &[0, 0, 0, 1, 0, 0, 0, 2]).unwrap()
        );
        let mut input = Vec::new();
        for v in [1u32, 2, 3, 4] {
            input.extend_from_slice(&v.to_be_bytes());
        }
        assert_eq!(
            has_share(&sb, 1, 2, 3, 4),
            hmac_sha256(&sb.bytes, &input).unwrap()
        );
    }

    #[test]
    fn cache_items_decrypt_only_with_ck() {
        let ck = CacheKey::from_symbols([3; 20]).unwrap();
        let other = CacheKey::from_symbols([4; 20]).unwrap();
        let sb = key(7, Lineage::SB);
        let item = encrypt_cached_key(&ck, 5, &sb);
        assert_eq!(decrypt_cached_key(&ck, &item), sb.bytes);
        assert_ne!(decrypt_cached_key(&other, &item), sb.bytes);
        // Same key under another cycle number gets a different pad.
        assert_ne!(encrypt_cached_key(&ck, 6, &sb).ct, item.ct);
    }
}
