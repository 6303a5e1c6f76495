//! Simulated Physically Obfuscated Key storage.
//!
//! A [`PokContainer`] holds one secret that the on-chip cipher may read any
//! number of times. The secret can be extracted exactly once through the
//! one-time-programming port, after which the port is fused. Tampering
//! zeroizes the secret and every later read fails.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PokError {
    #[error("secret must be non-empty")]
    InvalidSecret,
    #[error("one-time-programming port already fused")]
    OtpFused,
    #[error("key container destroyed by tampering")]
    KeyDestroyed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtpState {
    Intact,
    Fused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TamperState {
    Sound,
    Destroyed,
}

pub struct PokContainer {
    secret: Vec<u8>,
    otp: OtpState,
    tamper: TamperState,
}

impl std::fmt::Debug for PokContainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PokContainer")
            .field("len", &self.secret.len())
            .field("otp", &self.otp)
            .field("tamper", &self.tamper)
            .finish()
    }
}

impl PokContainer {
    /// Stands in for fabrication of the chip.
    pub fn provision(secret: &[u8]) -> Result<PokContainer, PokError> {
        if secret.is_empty() {
            return Err(PokError::InvalidSecret);
        }
        Ok(PokContainer {
            secret: secret.to_vec(),
            otp: OtpState::Intact,
            tamper: TamperState::Sound,
        })
    }

    pub fn otp_state(&self) -> OtpState {
        self.otp
    }

    pub fn tamper_state(&self) -> TamperState {
        self.tamper
    }

    pub fn is_sound(&self) -> bool {
        self.tamper == TamperState::Sound
    }

    /// Reads the secret through the one-time-programming port and fuses it.
    pub fn otp_extract(&mut self) -> Result<Vec<u8>, PokError> {
        if self.tamper == TamperState::Destroyed {
            return Err(PokError::KeyDestroyed);
        }
        if self.otp == OtpState::Fused {
            return Err(PokError::OtpFused);
        }
        self.otp = OtpState::Fused;
        Ok(self.secret.clone())
    }

    /// The on-chip cipher path. Unaffected by the OTP fuse.
    pub fn internal_read(&self) -> Result<&[u8], PokError> {
        match self.tamper {
            TamperState::Sound => Ok(&self.secret),
            TamperState::Destroyed => Err(PokError::KeyDestroyed),
        }
    }

    /// Physical tampering: destroys the secret permanently. Idempotent.
    pub fn tamper(&mut self) {
        self.secret.iter_mut().for_each(|b| *b = 0);
        self.secret.clear();
        self.tamper = TamperState::Destroyed;
    }
}
