//! Patient and doctor IC cards.

use super::messages::{CacheItem, CardAuthRequest, CardAuthResponse, EmergentCardResponse};
use super::{card_share, challenge_hmac_a, ProtocolError};
use crate::crypto::{umac_key3, Digest256, MacKey3, IV_BYTES};
use crate::fuzzycommit::LockedCode;
use crate::keygen::{KeyGenerator, Lineage, ResolvePath};
use crate::pok::PokContainer;

#[derive(Debug)]
enum Slot {
    Blank(PokContainer),
    Bound(KeyGenerator),
    Moving,
}

/// The patient's card: `Key1` in a POK, the `SA` generator with its
/// one-step cache, and the emergency material.
#[derive(Debug)]
pub struct PatientCard {
    id_i: u32,
    slot: Slot,
    emergency_cache: Vec<CacheItem>,
    theta_lock: Option<LockedCode>,
    max_cache: usize,
}

impl PatientCard {
    /// An unissued card around a chip whose OTP port is still intact.
    pub fn blank(chip: PokContainer, max_cache: usize) -> PatientCard {
        PatientCard {
            id_i: 0,
            slot: Slot::Blank(chip),
            emergency_cache: Vec::new(),
            theta_lock: None,
            max_cache,
        }
    }

    pub fn id_i(&self) -> u32 {
        self.id_i
    }

    pub fn chip(&self) -> &PokContainer {
        match &self.slot {
            Slot::Blank(c) => c,
            Slot::Bound(g) => g.master(),
            Slot::Moving => unreachable!(),
        }
    }

    pub fn chip_mut(&mut self) -> &mut PokContainer {
        match &mut self.slot {
            Slot::Blank(c) => c,
            Slot::Bound(g) => g.master_mut(),
            Slot::Moving => unreachable!(),
        }
    }

    pub(crate) fn bind(&mut self, id_i: u32, iv: [u8; IV_BYTES]) {
        let chip = match std::mem::replace(&mut self.slot, Slot::Moving) {
            Slot::Blank(c) => c,
            Slot::Bound(g) => g.into_master(),
            Slot::Moving => unreachable!(),
        };
        self.slot = Slot::Bound(KeyGenerator::new(chip, iv, Lineage::SA, true));
        self.id_i = id_i;
        self.emergency_cache.clear();
        self.theta_lock = None;
    }

    pub fn generator(&self) -> Option<&KeyGenerator> {
        match &self.slot {
            Slot::Bound(g) => Some(g),
            _ => None,
        }
    }

    fn generator_mut(&mut self) -> Result<&mut KeyGenerator, ProtocolError> {
        match &mut self.slot {
            Slot::Bound(g) => Ok(g),
            _ => Err(ProtocolError::NotProvisioned),
        }
    }

    pub fn cycle(&self) -> Option<u32> {
        self.generator().map(|g| g.cycle())
    }

    pub fn max_cache(&self) -> usize {
        self.max_cache
    }

    pub fn emergency_cache(&self) -> &[CacheItem] {
        &self.emergency_cache
    }

    /// Items must be strictly increasing in cycle and at most `max_cache`.
    pub(crate) fn store_cache(&mut self, items: Vec<CacheItem>) -> Result<(), ProtocolError> {
        if items.len() > self.max_cache {
            return Err(ProtocolError::InvalidParameter(format!(
                "{} cache items exceed capacity {}",
                items.len(),
                self.max_cache
            )));
        }
        if items.windows(2).any(|w| w[0].i >= w[1].i) {
            return Err(ProtocolError::InvalidParameter(
                "cache items out of order".into(),
            ));
        }
        self.emergency_cache = items;
        Ok(())
    }

    pub fn theta_lock(&self) -> Option<&LockedCode> {
        self.theta_lock.as_ref()
    }

    pub fn set_theta_lock(&mut self, locked: LockedCode) {
        self.theta_lock = Some(locked);
    }

    /// Physical intrusion: the POK loses its key.
    pub fn tamper(&mut self) {
        self.chip_mut().tamper();
    }

    /// Resolves `SA_i`, checks `HMAC_SA(T1)` and returns the card share.
    /// Advances only when `i` is the local cycle.
    pub fn authorize(&mut self, req: &CardAuthRequest) -> Result<CardAuthResponse, ProtocolError> {
        let (hmac, _) = self.share_for(req, false)?;
        Ok(CardAuthResponse { hmac })
    }

    /// As [`authorize`](Self::authorize), also returning the cached
    /// `SB_i` for cycle `i`.
    pub fn emergent_authorize(
        &mut self,
        req: &CardAuthRequest,
    ) -> Result<EmergentCardResponse, ProtocolError> {
        let (hmac_a_resp, item) = self.share_for(req, true)?;
        Ok(EmergentCardResponse {
            hmac_a_resp,
            cache_item: item.expect("looked up"),
        })
    }

    fn share_for(
        &mut self,
        req: &CardAuthRequest,
        emergent: bool,
    ) -> Result<(Digest256, Option<CacheItem>), ProtocolError> {
        let gen = self.generator_mut()?;
        let resolved = gen.resolve_for_counter(req.i)?;
        if challenge_hmac_a(&resolved.key, req.t1) != req.hmac_a {
            return Err(ProtocolError::AuthRejected);
        }
        let share = card_share(&resolved.key, req.t1, req.r);
        let item = if emergent {
            let found = self.emergency_cache.iter().find(|c| c.i == req.i).copied();
            Some(found.ok_or(ProtocolError::CacheExhausted)?)
        } else {
            None
        };
        if resolved.path == ResolvePath::Current {
            self.generator_mut()?.advance()?;
        }
        Ok((share, item))
    }
}

/// A doctor's card: an ID and `Key3` sealed in a POK.
#[derive(Debug)]
pub struct DoctorCard {
    id_p: u32,
    chip: PokContainer,
}

impl DoctorCard {
    pub fn new(id_p: u32, chip: PokContainer) -> DoctorCard {
        DoctorCard { id_p, chip }
    }

    pub fn id_p(&self) -> u32 {
        self.id_p
    }

    pub fn chip_mut(&mut self) -> &mut PokContainer {
        &mut self.chip
    }

    pub fn tamper(&mut self) {
        self.chip.tamper();
    }

    pub fn umac(&self, message: &[u8]) -> Result<Digest256, ProtocolError> {
        let raw = self
            .chip
            .internal_read()
            .map_err(|_| ProtocolError::KeyDestroyed)?;
        let key = MacKey3::from_slice(raw)
            .ok_or_else(|| ProtocolError::InvalidParameter("Key3 must be 16 bytes".into()))?;
        Ok(umac_key3(&key, message))
    }
}
