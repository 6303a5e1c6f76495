//! The clinician's programmer. It relays the challenge to the patient card
//! and the server, combines their shares into the token, and during
//! recovery relays reset challenges.

use super::card::DoctorCard;
use super::has::DoctorSession;
use super::messages::*;
use super::{
    assemble_token, challenge_hmac_b, decrypt_cached_key, has_share, session_key, token_proof,
    FIRST_AIDER, REQUEST_RESET,
};
use crate::crypto::{sha256_concat, Digest256};
use crate::fuzzycommit::{unlock, IrisCode, LockedCode};
use crate::keygen::{Lineage, TempKey};
use crate::Entity;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProgrammerMode {
    Idle,
    Normal,
    Emergent,
    Recovery,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: Entity,
    pub msg: ProtocolMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgrammerOutcome {
    TokenSent { skey: Digest256 },
    Aborted(RejectReason),
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ProgrammerStep {
    pub outgoing: Vec<Outgoing>,
    pub outcome: Option<ProgrammerOutcome>,
}

impl ProgrammerStep {
    fn send(to: Entity, msg: ProtocolMessage) -> ProgrammerStep {
        ProgrammerStep {
            outgoing: vec![Outgoing { to, msg }],
            outcome: None,
        }
    }

    fn abort(reason: RejectReason) -> ProgrammerStep {
        ProgrammerStep {
            outgoing: Vec::new(),
            outcome: Some(ProgrammerOutcome::Aborted(reason)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Stage {
    Idle,
    AwaitChallenge,
    AwaitShares {
        ch: ImdChallenge,
        card: Option<Digest256>,
        has: Option<Digest256>,
    },
    AwaitEmergentCard {
        ch: ImdChallenge,
    },
    Recovering,
    Finished,
}

#[derive(Debug)]
pub struct Programmer {
    mode: ProgrammerMode,
    stage: Stage,
    session: Option<DoctorSession>,
    doctor_card: Option<DoctorCard>,
    claimed_id_p: u32,
    iris_sample: Option<IrisCode>,
    theta_lock: Option<LockedCode>,
    known_keys: BTreeMap<u32, Digest256>,
    request: u32,
    id_i: u32,
}

impl Default for Programmer {
    fn default() -> Self {
        Self::new()
    }
}

impl Programmer {
    pub fn new() -> Programmer {
        Programmer {
            mode: ProgrammerMode::Idle,
            stage: Stage::Idle,
            session: None,
            doctor_card: None,
            claimed_id_p: 0,
            iris_sample: None,
            theta_lock: None,
            known_keys: BTreeMap::new(),
            request: 0,
            id_i: 0,
        }
    }

    pub fn mode(&self) -> ProgrammerMode {
        self.mode
    }

    /// Server login result; the backhaul pipe is tagged by it.
    pub fn set_session(&mut self, session: Option<DoctorSession>) {
        self.session = session;
    }

    pub fn session(&self) -> Option<&DoctorSession> {
        self.session.as_ref()
    }

    pub fn insert_doctor_card(&mut self, card: DoctorCard) {
        self.doctor_card = Some(card);
    }

    pub fn remove_doctor_card(&mut self) -> Option<DoctorCard> {
        self.doctor_card.take()
    }

    /// The doctor ID written into requests when no session exists.
    pub fn claim_identity(&mut self, id_p: u32) {
        self.claimed_id_p = id_p;
    }

    pub fn set_iris_sample(&mut self, sample: Option<IrisCode>) {
        self.iris_sample = sample;
    }

    pub fn set_theta_lock(&mut self, locked: Option<LockedCode>) {
        self.theta_lock = locked;
    }

    /// `SB_k` values the operator already holds (an attacker who decrypted
    /// a stolen cache).
    pub fn set_known_keys(&mut self, keys: BTreeMap<u32, Digest256>) {
        self.known_keys = keys;
    }

    fn id_p(&self) -> u32 {
        self.session.map_or(self.claimed_id_p, |s| s.id_p)
    }

    /// Tag from the inserted doctor card; all zero without one.
    fn umac(&self, input: &[u8]) -> Digest256 {
        self.doctor_card
            .as_ref()
            .and_then(|c| c.umac(input).ok())
            .unwrap_or(Digest256::ZERO)
    }

    /// Begins a flow and returns the service request for the implant.
    pub fn start(&mut self, mode: ProgrammerMode, request: u32, id_i: u32) -> ProgrammerStep {
        self.mode = mode;
        self.id_i = id_i;
        let (r, id_p) = match mode {
            ProgrammerMode::Idle => {
                self.stage = Stage::Idle;
                return ProgrammerStep::default();
            }
            ProgrammerMode::Normal => (request, self.id_p()),
            ProgrammerMode::Emergent => (request, FIRST_AIDER),
            ProgrammerMode::Recovery => (REQUEST_RESET, self.id_p()),
        };
        self.request = r;
        self.stage = match mode {
            ProgrammerMode::Recovery => Stage::Recovering,
            _ => Stage::AwaitChallenge,
        };
        ProgrammerStep::send(
            Entity::Imd,
            ProtocolMessage::ServiceRequest(ServiceRequest { r, id_p }),
        )
    }

    pub fn handle(&mut self, from: Entity, msg: &ProtocolMessage) -> ProgrammerStep {
        if let ProtocolMessage::Reject(reason) = msg {
            if matches!(from, Entity::PatientCard | Entity::Has)
                && !matches!(self.stage, Stage::Idle | Stage::Finished)
            {
                self.stage = Stage::Finished;
                return ProgrammerStep::abort(*reason);
            }
            return ProgrammerStep::default();
        }
        match (self.stage, from, msg) {
            (Stage::AwaitChallenge, Entity::Imd, ProtocolMessage::ImdChallenge(ch)) => {
                self.on_challenge(*ch)
            }
            (
                Stage::AwaitShares { ch, card, has },
                Entity::PatientCard,
                ProtocolMessage::CardAuthResponse(r),
            ) => self.on_shares(ch, Some(card.unwrap_or(r.hmac)), has),
            (
                Stage::AwaitShares { ch, card, has },
                Entity::Has,
                ProtocolMessage::HasAuthResponse(r),
            ) => self.on_shares(ch, card, Some(has.unwrap_or(r.hmac))),
            (
                Stage::AwaitEmergentCard { ch },
                Entity::PatientCard,
                ProtocolMessage::EmergentCardResponse(r),
            ) => self.on_emergent(ch, r),
            (Stage::Recovering, Entity::Imd, ProtocolMessage::ResetChallenge(c)) => {
                self.on_reset_challenge(c.k)
            }
            (Stage::Recovering, Entity::Has, ProtocolMessage::ResetResponse(r)) => {
                ProgrammerStep::send(Entity::Imd, ProtocolMessage::ResetResponse(*r))
            }
            _ => ProgrammerStep::default(),
        }
    }

    fn on_challenge(&mut self, ch: ImdChallenge) -> ProgrammerStep {
        let card_req = CardAuthRequest {
            i: ch.i,
            t1: ch.t1,
            hmac_a: ch.hmac_a,
            r: self.request,
        };
        if self.mode == ProgrammerMode::Emergent {
            self.stage = Stage::AwaitEmergentCard { ch };
            return ProgrammerStep::send(
                Entity::PatientCard,
                ProtocolMessage::CardEmergentRequest(card_req),
            );
        }
        let mut has_req = HasAuthRequest {
            i: ch.i,
            t1: ch.t1,
            id_i: ch.id_i,
            id_p: self.id_p(),
            r: self.request,
            hmac_b: ch.hmac_b,
            umac: Digest256::ZERO,
        };
        has_req.umac = self.umac(&has_req.mac_input());
        self.stage = Stage::AwaitShares {
            ch,
            card: None,
            has: None,
        };
        ProgrammerStep {
            outgoing: vec![
                Outgoing {
                    to: Entity::PatientCard,
                    msg: ProtocolMessage::CardAuthRequest(card_req),
                },
                Outgoing {
                    to: Entity::Has,
                    msg: ProtocolMessage::HasAuthRequest(has_req),
                },
            ],
            outcome: None,
        }
    }

    fn on_shares(
        &mut self,
        ch: ImdChallenge,
        card: Option<Digest256>,
        has: Option<Digest256>,
    ) -> ProgrammerStep {
        match (card, has) {
            (Some(a), Some(b)) => self.submit(ch.t1, &a, &b),
            _ => {
                self.stage = Stage::AwaitShares { ch, card, has };
                ProgrammerStep::default()
            }
        }
    }

    fn submit(&mut self, t1: u32, card: &Digest256, has: &Digest256) -> ProgrammerStep {
        let proof = token_proof(t1, &assemble_token(card, has));
        self.stage = Stage::Finished;
        ProgrammerStep {
            outgoing: vec![Outgoing {
                to: Entity::Imd,
                msg: ProtocolMessage::TokenSubmit(TokenSubmit { proof }),
            }],
            outcome: Some(ProgrammerOutcome::TokenSent {
                skey: session_key(card, has),
            }),
        }
    }

    /// Unlocks `Ck` with the iris sample, decrypts `SB_i`, checks it
    /// against the challenge, and computes the server share locally.
    fn on_emergent(&mut self, ch: ImdChallenge, resp: &EmergentCardResponse) -> ProgrammerStep {
        self.stage = Stage::Finished;
        let (Some(locked), Some(sample)) = (self.theta_lock.as_ref(), self.iris_sample.as_ref())
        else {
            return ProgrammerStep::abort(RejectReason::DecodeFailure);
        };
        let Ok(ck) = unlock(locked, sample) else {
            return ProgrammerStep::abort(RejectReason::DecodeFailure);
        };
        let sb = TempKey {
            bytes: decrypt_cached_key(&ck, &resp.cache_item),
            cycle: resp.cache_item.i,
            lineage: Lineage::SB,
        };
        if resp.cache_item.i != ch.i
            || challenge_hmac_b(&sb, ch.t1, FIRST_AIDER, ch.id_i) != ch.hmac_b
        {
            return ProgrammerStep::abort(RejectReason::DecodeFailure);
        }
        let share_b = has_share(&sb, ch.t1, FIRST_AIDER, ch.id_i, self.request);
        self.submit(ch.t1, &resp.hmac_a_resp, &share_b)
    }

    fn on_reset_challenge(&mut self, k: u32) -> ProgrammerStep {
        if let Some(sb) = self.known_keys.get(&k) {
            return ProgrammerStep::send(
                Entity::Imd,
                ProtocolMessage::ResetResponse(ResetResponse { sb_k: *sb }),
            );
        }
        if self.session.is_some() {
            let mut req = HasResetRequest {
                id_i: self.id_i,
                id_p: self.id_p(),
                k,
                umac: Digest256::ZERO,
            };
            req.umac = self.umac(&req.mac_input());
            return ProgrammerStep::send(Entity::Has, ProtocolMessage::HasResetRequest(req));
        }
        // No way to learn SB_k: answer with a guess.
        let guess = sha256_concat(&[b"guess", &k.to_be_bytes()]);
        ProgrammerStep::send(
            Entity::Imd,
            ProtocolMessage::ResetResponse(ResetResponse { sb_k: guess }),
        )
    }
}
