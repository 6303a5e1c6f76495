//! A fully enrolled hospital: one patient with implant and card, a chief
//! physician, a resident, and the server.

use crate::crypto::Digest256;
use crate::fuzzycommit::{sample_iris_with, unlock, IrisCode};
use crate::pok::PokContainer;
use crate::protocol::{
    decrypt_cached_key, enroll_doctor, enroll_patient, DoctorCard, Has, Imd, ImdConfig,
    PatientCard, PatientRegistration, Programmer, ProtocolError, DEFAULT_CACHE_SIZE, DEFAULT_TS_MS,
    REQUEST_READ, REQUEST_REPROGRAM, REQUEST_RESET,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const PATIENT_ID: u32 = 0x0001_0001;
/// May read, reprogram and reset.
pub const CHIEF_ID: u32 = 7;
/// May only read.
pub const RESIDENT_ID: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub ts_ms: u32,
    pub cache_size: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            ts_ms: DEFAULT_TS_MS,
            cache_size: DEFAULT_CACHE_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CardHolder {
    Patient,
    Thief,
}

/// Who is at the programmer for a flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Operator {
    /// An enrolled doctor with their own card and password.
    Doctor { id_p: u32 },
    /// Knows a doctor's ID and password but holds a forged card.
    Impersonator { claimed_id_p: u32 },
    /// Emergency responder scanning the patient's iris.
    FirstAider { iris_ber: f64 },
    /// Holds the stolen patient card. With `knows_ck` the thief has also
    /// decrypted every cached `SB` (worst case).
    Thief { iris_ber: f64, knows_ck: bool },
}

#[derive(Debug)]
pub struct World {
    pub config: WorldConfig,
    pub imd: Imd,
    pub card: PatientCard,
    pub has: Has,
    pub programmer: Programmer,
    pub doctor_cards: BTreeMap<u32, DoctorCard>,
    pub passwords: BTreeMap<u32, String>,
    pub theta_ref: IrisCode,
    pub card_holder: CardHolder,
    pub rng: ChaCha8Rng,
}

impl World {
    /// Enrolls everything from `seed`: random master keys, IV, iris code
    /// and `Ck`; the card cache is filled to capacity.
    pub fn enrolled(config: WorldConfig, seed: u64) -> Result<World, ProtocolError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut has = Has::new(config.ts_ms);
        let mut imd = Imd::new(ImdConfig {
            id_i: PATIENT_ID,
            ts_window_ms: config.ts_ms,
            cache_size: config.cache_size,
        });
        let key1: [u8; 10] = rng.random();
        let mut card = PatientCard::blank(
            PokContainer::provision(&key1).expect("10 bytes"),
            config.cache_size,
        );
        let reg = PatientRegistration {
            key2: rng.random::<[u8; 10]>().to_vec(),
            iv: rng.random(),
            profile: "pacemaker".into(),
        };
        enroll_patient(&mut has, &mut imd, &mut card, &reg)?;

        let mut doctor_cards = BTreeMap::new();
        let mut passwords = BTreeMap::new();
        for (id_p, profile, codes) in [
            (
                CHIEF_ID,
                "chief physician",
                &[REQUEST_READ, REQUEST_REPROGRAM, REQUEST_RESET][..],
            ),
            (RESIDENT_ID, "resident", &[REQUEST_READ][..]),
        ] {
            let key3: [u8; 16] = rng.random();
            let mut dc = DoctorCard::new(id_p, PokContainer::provision(&key3).expect("16 bytes"));
            let password = format!("pw-{id_p}-{:08x}", rng.random::<u32>());
            enroll_doctor(&mut has, &mut dc, &password, profile)?;
            has.grant(id_p, PATIENT_ID, codes);
            doctor_cards.insert(id_p, dc);
            passwords.insert(id_p, password);
        }

        let theta_ref = IrisCode::random(&mut rng);
        let locked = has.setup_emergency(PATIENT_ID, &theta_ref, &mut rng)?;
        card.set_theta_lock(locked);
        has.refill_cache(&mut card, config.cache_size)?;

        Ok(World {
            config,
            imd,
            card,
            has,
            programmer: Programmer::new(),
            doctor_cards,
            passwords,
            theta_ref,
            card_holder: CardHolder::Patient,
            rng,
        })
    }

    /// Whether `operator` can touch the patient card right now.
    pub fn card_reachable(&self, operator: &Operator) -> bool {
        let thief = matches!(operator, Operator::Thief { .. });
        match self.card_holder {
            CardHolder::Patient => !thief,
            CardHolder::Thief => thief,
        }
    }

    fn return_doctor_card(&mut self) {
        if let Some(card) = self.programmer.remove_doctor_card() {
            // Forged cards are discarded.
            if self.passwords.contains_key(&card.id_p())
                && !self.doctor_cards.contains_key(&card.id_p())
            {
                self.doctor_cards.insert(card.id_p(), card);
            }
        }
    }

    /// Configures the programmer for `operator`. Fails with the login
    /// error when the operator cannot open a server session.
    pub(crate) fn seat(&mut self, operator: &Operator) -> Result<(), ProtocolError> {
        self.return_doctor_card();
        let p = &mut self.programmer;
        p.set_session(None);
        p.set_iris_sample(None);
        p.set_theta_lock(None);
        p.set_known_keys(BTreeMap::new());
        p.claim_identity(0);
        match *operator {
            Operator::Doctor { id_p } => {
                let password = self.passwords.get(&id_p).cloned().unwrap_or_default();
                let session = self.has.login(id_p, &password)?;
                if let Some(card) = self.doctor_cards.remove(&id_p) {
                    self.programmer.insert_doctor_card(card);
                }
                self.programmer.set_session(Some(session));
            }
            Operator::Impersonator { claimed_id_p } => {
                let forged: [u8; 16] = self.rng.random();
                self.programmer.claim_identity(claimed_id_p);
                self.programmer.insert_doctor_card(DoctorCard::new(
                    claimed_id_p,
                    PokContainer::provision(&forged).expect("16 bytes"),
                ));
                if let Some(password) = self.passwords.get(&claimed_id_p).cloned() {
                    self.programmer
                        .set_session(self.has.login(claimed_id_p, &password).ok());
                }
            }
            Operator::FirstAider { iris_ber } => {
                let sample = sample_iris_with(&self.theta_ref, iris_ber, &mut self.rng)
                    .map_err(|e| ProtocolError::InvalidParameter(e.to_string()))?;
                self.programmer.set_iris_sample(Some(sample));
                if self.card_reachable(operator) {
                    self.programmer
                        .set_theta_lock(self.card.theta_lock().copied());
                }
            }
            Operator::Thief { iris_ber, knows_ck } => {
                let sample = sample_iris_with(&self.theta_ref, iris_ber, &mut self.rng)
                    .map_err(|e| ProtocolError::InvalidParameter(e.to_string()))?;
                self.programmer.set_iris_sample(Some(sample));
                if self.card_reachable(operator) {
                    let locked = self.card.theta_lock().copied();
                    self.programmer.set_theta_lock(locked);
                    if knows_ck {
                        let keys = locked
                            .and_then(|l| unlock(&l, &self.theta_ref).ok())
                            .map(|ck| {
                                self.card
                                    .emergency_cache()
                                    .iter()
                                    .map(|item| (item.i, Digest256(decrypt_cached_key(&ck, item))))
                                    .collect()
                            })
                            .unwrap_or_default();
                        self.programmer.set_known_keys(keys);
                    }
                }
            }
        }
        Ok(())
    }
}
