//! Per-cycle temporary key derivation.
//!
//! Cycle `i` owns keystream bits `[256(i-1), 256i)` of Trivium keyed by the
//! master key and the patient IV; the temporary key is SHA-256 of those 256
//! bits. Derivation restarts from the head of the stream every time, so any
//! cycle can be re-derived without stored stream state.

use crate::crypto::{sha256, CryptoError, TriviumState, IV_BYTES};
use crate::pok::{PokContainer, PokError};
use thiserror::Error;

pub const TEMP_KEY_BYTES: usize = 32;
const BITS_PER_CYCLE: u64 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyGenError {
    #[error("cycle counters start at 1")]
    InvalidCycle,
    #[error("master key destroyed")]
    KeyDestroyed,
    #[error("counter {received} outside recovery window (local cycle {local})")]
    Desync { local: u32, received: u32 },
    #[error("cycle counter exhausted")]
    CounterExhausted,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

impl From<PokError> for KeyGenError {
    fn from(_: PokError) -> Self {
        KeyGenError::KeyDestroyed
    }
}

/// Which master key a temporary key descends from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lineage {
    /// From `Key1`, held by the patient card.
    SA,
    /// From `Key2`, held by the hospital server.
    SB,
}

#[derive(Clone, PartialEq, Eq)]
pub struct TempKey {
    pub bytes: [u8; TEMP_KEY_BYTES],
    pub cycle: u32,
    pub lineage: Lineage,
}

impl std::fmt::Debug for TempKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TempKey({:?}_{})", self.lineage, self.cycle)
    }
}

impl TempKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvePath {
    /// Received counter equals the local cycle.
    Current,
    /// Received counter is one behind; served from the one-step cache.
    Cached,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub key: TempKey,
    pub path: ResolvePath,
}

#[derive(Debug)]
pub struct KeyGenerator {
    master: PokContainer,
    iv: [u8; IV_BYTES],
    lineage: Lineage,
    cycle: u32,
    caching: bool,
    cache_prev: Option<TempKey>,
}

impl KeyGenerator {
    /// A generator at cycle 1. `caching` enables the one-step cache held by
    /// the patient card and the server; the implant does not keep one.
    pub fn new(master: PokContainer, iv: [u8; IV_BYTES], lineage: Lineage, caching: bool) -> Self {
        KeyGenerator {
            master,
            iv,
            lineage,
            cycle: 1,
            caching,
            cache_prev: None,
        }
    }

    pub fn cycle(&self) -> u32 {
        self.cycle
    }

    pub fn lineage(&self) -> Lineage {
        self.lineage
    }

    pub fn iv(&self) -> &[u8; IV_BYTES] {
        &self.iv
    }

    pub fn cached(&self) -> Option<&TempKey> {
        self.cache_prev.as_ref()
    }

    pub fn master_mut(&mut self) -> &mut PokContainer {
        &mut self.master
    }

    pub fn master(&self) -> &PokContainer {
        &self.master
    }

    pub fn into_master(self) -> PokContainer {
        self.master
    }

    /// Pure; does not move the cycle counter.
    pub fn derive_key(&self, i: u32) -> Result<TempKey, KeyGenError> {
        if i == 0 {
            return Err(KeyGenError::InvalidCycle);
        }
        let master = self.master.internal_read()?;
        let mut stream = TriviumState::new(master, &self.iv)?;
        stream.skip(BITS_PER_CYCLE * (i as u64 - 1));
        let block = stream.keystream_bytes(BITS_PER_CYCLE as usize / 8);
        Ok(TempKey {
            bytes: sha256(&block).0,
            cycle: i,
            lineage: self.lineage,
        })
    }

    pub fn current_key(&self) -> Result<TempKey, KeyGenError> {
        self.derive_key(self.cycle)
    }

    pub fn advance(&mut self) -> Result<(), KeyGenError> {
        let next = self
            .cycle
            .checked_add(1)
            .ok_or(KeyGenError::CounterExhausted)?;
        if self.caching {
            self.cache_prev = Some(self.derive_key(self.cycle)?);
        }
        self.cycle = next;
        Ok(())
    }

    /// Accepts the local cycle, or one behind it when a cached key exists.
    pub fn resolve_for_counter(&self, received: u32) -> Result<Resolved, KeyGenError> {
        if received == self.cycle {
            return Ok(Resolved {
                key: self.derive_key(received)?,
                path: ResolvePath::Current,
            });
        }
        if let Some(prev) = &self.cache_prev {
            if prev.cycle == received && received + 1 == self.cycle {
                if !self.master.is_sound() {
                    return Err(KeyGenError::KeyDestroyed);
                }
                return Ok(Resolved {
                    key: prev.clone(),
                    path: ResolvePath::Cached,
                });
            }
        }
        Err(KeyGenError::Desync {
            local: self.cycle,
            received,
        })
    }
}
