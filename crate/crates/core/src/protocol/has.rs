//! The hospital authentication server.

use super::card::PatientCard;
use super::messages::{HasAuthRequest, HasAuthResponse, HasResetRequest, ResetResponse};
use super::{challenge_hmac_b, encrypt_cached_key, has_share, ProtocolError};
use crate::crypto::{sha256_concat, umac_verify, Digest256, MacKey3, IV_BYTES};
use crate::fuzzycommit::{lock, CacheKey, IrisCode, LockedCode};
use crate::keygen::{KeyGenerator, Lineage, ResolvePath, TempKey};
use crate::pok::PokContainer;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug)]
pub struct PatientRecord {
    pub gen_b: KeyGenerator,
    pub profile: String,
    cache_key: Option<CacheKey>,
    /// One past the highest cycle whose `SB` was handed to the card cache.
    issued_until: u32,
}

#[derive(Debug)]
struct DoctorRecord {
    key3: MacKey3,
    password_hash: Digest256,
    #[allow(dead_code)]
    profile: String,
}

/// Proof of a completed login; the programmer-server pipe is tagged by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoctorSession {
    pub id_p: u32,
}

#[derive(Debug)]
pub struct Has {
    patients: BTreeMap<u32, PatientRecord>,
    doctors: BTreeMap<u32, DoctorRecord>,
    policy: BTreeMap<(u32, u32), BTreeSet<u32>>,
    ts_window_ms: u32,
}

fn password_hash(id_p: u32, password: &str) -> Digest256 {
    sha256_concat(&[&id_p.to_be_bytes(), password.as_bytes()])
}

fn within_window(now_ms: u64, t1: u32, ts: u32) -> bool {
    let diff = (now_ms as u32).wrapping_sub(t1) as i32;
    diff.unsigned_abs() <= ts
}

impl Has {
    pub fn new(ts_window_ms: u32) -> Has {
        Has {
            patients: BTreeMap::new(),
            doctors: BTreeMap::new(),
            policy: BTreeMap::new(),
            ts_window_ms,
        }
    }

    pub fn ts_window_ms(&self) -> u32 {
        self.ts_window_ms
    }

    pub fn register_doctor(
        &mut self,
        id_p: u32,
        key3: MacKey3,
        password: &str,
        profile: &str,
    ) -> Result<(), ProtocolError> {
        if self.doctors.contains_key(&id_p) {
            return Err(ProtocolError::EnrollmentFailure(format!(
                "doctor {id_p} already registered"
            )));
        }
        self.doctors.insert(
            id_p,
            DoctorRecord {
                key3,
                password_hash: password_hash(id_p, password),
                profile: profile.to_string(),
            },
        );
        Ok(())
    }

    /// Stores `Key2` and the IV, replacing any earlier record.
    pub fn register_patient(
        &mut self,
        id_i: u32,
        key2: PokContainer,
        iv: [u8; IV_BYTES],
        profile: &str,
    ) {
        self.patients.insert(
            id_i,
            PatientRecord {
                gen_b: KeyGenerator::new(key2, iv, Lineage::SB, true),
                profile: profile.to_string(),
                cache_key: None,
                issued_until: 0,
            },
        );
    }

    pub fn grant(&mut self, id_p: u32, id_i: u32, codes: &[u32]) {
        self.policy
            .entry((id_p, id_i))
            .or_default()
            .extend(codes.iter().copied());
    }

    pub fn allows(&self, id_p: u32, id_i: u32, r: u32) -> bool {
        self.policy
            .get(&(id_p, id_i))
            .is_some_and(|s| s.contains(&r))
    }

    pub fn login(&self, id_p: u32, password: &str) -> Result<DoctorSession, ProtocolError> {
        match self.doctors.get(&id_p) {
            Some(d) if d.password_hash == password_hash(id_p, password) => {
                Ok(DoctorSession { id_p })
            }
            _ => Err(ProtocolError::BadDoctorIdentity),
        }
    }

    pub fn patient(&self, id_i: u32) -> Option<&PatientRecord> {
        self.patients.get(&id_i)
    }

    pub fn patient_mut(&mut self, id_i: u32) -> Option<&mut PatientRecord> {
        self.patients.get_mut(&id_i)
    }

    pub fn cycle(&self, id_i: u32) -> Option<u32> {
        self.patients.get(&id_i).map(|p| p.gen_b.cycle())
    }

    fn check_doctor(
        &self,
        session: &DoctorSession,
        id_p: u32,
        mac_input: &[u8],
        tag: &Digest256,
    ) -> Result<(), ProtocolError> {
        if session.id_p != id_p {
            return Err(ProtocolError::BadDoctorIdentity);
        }
        let doctor = self
            .doctors
            .get(&id_p)
            .ok_or(ProtocolError::BadDoctorIdentity)?;
        if !umac_verify(&doctor.key3, mac_input, tag) {
            return Err(ProtocolError::BadDoctorIdentity);
        }
        Ok(())
    }

    /// Checks, in order: patient known, `SB_i` resolvable, `hmac_b`, time
    /// window, doctor MAC, policy. Returns the server share.
    ///
    /// A counter ahead of the local cycle is accepted only inside the range
    /// already released to the card cache, since emergency access advances
    /// the implant without the server.
    pub fn authorize(
        &mut self,
        session: &DoctorSession,
        req: &HasAuthRequest,
        now_ms: u64,
    ) -> Result<HasAuthResponse, ProtocolError> {
        let record = self
            .patients
            .get(&req.id_i)
            .ok_or(ProtocolError::AuthRejected)?;
        let local = record.gen_b.cycle();
        let (sb, path): (TempKey, Option<ResolvePath>) =
            if req.i > local && req.i < record.issued_until {
                (record.gen_b.derive_key(req.i)?, None)
            } else {
                let r = record.gen_b.resolve_for_counter(req.i)?;
                (r.key, Some(r.path))
            };
        if challenge_hmac_b(&sb, req.t1, req.id_p, req.id_i) != req.hmac_b {
            return Err(ProtocolError::AuthRejected);
        }
        if !within_window(now_ms, req.t1, self.ts_window_ms) {
            return Err(ProtocolError::StaleTimestamp);
        }
        self.check_doctor(session, req.id_p, &req.mac_input(), &req.umac)?;
        if !self.allows(req.id_p, req.id_i, req.r) {
            return Err(ProtocolError::PolicyDenied);
        }
        let hmac = has_share(&sb, req.t1, req.id_p, req.id_i, req.r);
        let gen = &mut self.patients.get_mut(&req.id_i).expect("looked up").gen_b;
        match path {
            Some(ResolvePath::Current) => gen.advance()?,
            Some(ResolvePath::Cached) => {}
            None => {
                while gen.cycle() <= req.i {
                    gen.advance()?;
                }
            }
        }
        Ok(HasAuthResponse { hmac })
    }

    /// Answers one recovery challenge with `SB_k` for a doctor allowed to
    /// reset this patient's implant.
    pub fn reset_key(
        &self,
        session: &DoctorSession,
        req: &HasResetRequest,
    ) -> Result<ResetResponse, ProtocolError> {
        let record = self
            .patients
            .get(&req.id_i)
            .ok_or(ProtocolError::AuthRejected)?;
        self.check_doctor(session, req.id_p, &req.mac_input(), &req.umac)?;
        if !self.allows(req.id_p, req.id_i, super::REQUEST_RESET) {
            return Err(ProtocolError::PolicyDenied);
        }
        let sb = record.gen_b.derive_key(req.k)?;
        Ok(ResetResponse {
            sb_k: Digest256(sb.bytes),
        })
    }

    /// Draws `Ck` for the patient and returns the iris-locked commitment
    /// to store on the card.
    pub fn setup_emergency<R: Rng + ?Sized>(
        &mut self,
        id_i: u32,
        theta_ref: &IrisCode,
        rng: &mut R,
    ) -> Result<LockedCode, ProtocolError> {
        let record = self
            .patients
            .get_mut(&id_i)
            .ok_or(ProtocolError::AuthRejected)?;
        let ck = CacheKey::random(rng);
        record.cache_key = Some(ck);
        Ok(lock(&ck, theta_ref))
    }

    /// Replaces the card's cache with `SB` for cycles
    /// `[current, current + count)`.
    pub fn refill_cache(
        &mut self,
        card: &mut PatientCard,
        count: usize,
    ) -> Result<(), ProtocolError> {
        if count > card.max_cache() {
            return Err(ProtocolError::InvalidParameter(format!(
                "refill of {count} exceeds cache size {}",
                card.max_cache()
            )));
        }
        let record = self
            .patients
            .get_mut(&card.id_i())
            .ok_or(ProtocolError::AuthRejected)?;
        let ck = record
            .cache_key
            .ok_or_else(|| ProtocolError::InvalidParameter("no emergency key set up".into()))?;
        let start = record.gen_b.cycle();
        let mut items = Vec::with_capacity(count);
        for i in start..start + count as u32 {
            items.push(encrypt_cached_key(&ck, i, &record.gen_b.derive_key(i)?));
        }
        card.store_cache(items)?;
        record.issued_until = start + count as u32;
        Ok(())
    }
}
