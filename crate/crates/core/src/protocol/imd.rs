//! The implant. It answers every service request with a challenge and
//! decides access only when the token proof arrives.

use super::messages::*;
use super::{
    assemble_token, card_share, challenge_hmac_a, challenge_hmac_b, has_share, session_key,
    token_proof, ProtocolError, REQUEST_RESET,
};
use crate::crypto::{Digest256, IV_BYTES};
use crate::energy::OpEvent;
use crate::keygen::{KeyGenerator, Lineage, TempKey};
use crate::pok::PokContainer;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImdConfig {
    pub id_i: u32,
    pub ts_window_ms: u32,
    /// `S`; recovery issues `2 * S` challenges.
    pub cache_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ImdMode {
    /// No keys loaded; waiting for enrollment.
    Registration,
    Listening,
    AwaitToken,
    RecoveryChallenge {
        next_k: u32,
        remaining: u32,
    },
}

/// What the implant did with a delivered frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImdOutput {
    Reply(ProtocolMessage),
    SessionEstablished { skey: Digest256, cycle: u32 },
    ResetComplete,
    Rejected(RejectReason),
    Ignored(String),
}

#[derive(Debug)]
struct Pending {
    t1: u32,
    sa: TempKey,
    sb: TempKey,
    id_p: u32,
    r: u32,
}

#[derive(Debug)]
struct Recovery {
    next_k: u32,
    remaining: u32,
    issued_at: u64,
}

#[derive(Debug)]
pub struct Imd {
    config: ImdConfig,
    gens: Option<(KeyGenerator, KeyGenerator)>,
    pending: Option<Pending>,
    recovery: Option<Recovery>,
    ops: Vec<OpEvent>,
}

impl Imd {
    /// A fresh implant in registration mode.
    pub fn new(config: ImdConfig) -> Imd {
        Imd {
            config,
            gens: None,
            pending: None,
            recovery: None,
            ops: Vec::new(),
        }
    }

    pub fn config(&self) -> &ImdConfig {
        &self.config
    }

    pub fn id_i(&self) -> u32 {
        self.config.id_i
    }

    pub fn mode(&self) -> ImdMode {
        if self.gens.is_none() {
            ImdMode::Registration
        } else if let Some(r) = &self.recovery {
            ImdMode::RecoveryChallenge {
                next_k: r.next_k,
                remaining: r.remaining,
            }
        } else if self.pending.is_some() {
            ImdMode::AwaitToken
        } else {
            ImdMode::Listening
        }
    }

    /// Current cycle `i`; zero while unprovisioned.
    pub fn cycle(&self) -> u32 {
        self.gens.as_ref().map_or(0, |(a, _)| a.cycle())
    }

    pub fn generators(&self) -> Option<(&KeyGenerator, &KeyGenerator)> {
        self.gens.as_ref().map(|(a, b)| (a, b))
    }

    /// Loads both master keys and the IV; cycle starts at 1.
    pub fn provision(
        &mut self,
        key1: &[u8],
        key2: &[u8],
        iv: [u8; IV_BYTES],
    ) -> Result<(), ProtocolError> {
        if self.gens.is_some() {
            return Err(ProtocolError::EnrollmentFailure(
                "implant already holds keys".into(),
            ));
        }
        let load = |k: &[u8]| {
            PokContainer::provision(k).map_err(|e| ProtocolError::EnrollmentFailure(e.to_string()))
        };
        self.gens = Some((
            KeyGenerator::new(load(key1)?, iv, Lineage::SA, false),
            KeyGenerator::new(load(key2)?, iv, Lineage::SB, false),
        ));
        self.pending = None;
        self.recovery = None;
        Ok(())
    }

    pub fn tamper(&mut self) {
        if let Some((a, b)) = &mut self.gens {
            a.master_mut().tamper();
            b.master_mut().tamper();
        }
    }

    /// Costed operations since the last drain.
    pub fn drain_ops(&mut self) -> Vec<OpEvent> {
        std::mem::take(&mut self.ops)
    }

    fn gens(&self) -> Result<&(KeyGenerator, KeyGenerator), ProtocolError> {
        self.gens.as_ref().ok_or(ProtocolError::NotProvisioned)
    }

    /// Issues a challenge for the current cycle, or the first recovery
    /// challenge when `r` is the reset code. A request during a pending
    /// flow replaces it.
    pub fn handle_request(
        &mut self,
        req: &ServiceRequest,
        now_ms: u64,
    ) -> Result<ProtocolMessage, ProtocolError> {
        let cycle = self.gens()?.0.cycle();
        self.pending = None;
        self.recovery = None;
        if req.r == REQUEST_RESET {
            let remaining = 2 * self.config.cache_size as u32;
            if remaining == 0 {
                return Err(ProtocolError::InvalidParameter(
                    "cache size 0 leaves no challenges".into(),
                ));
            }
            self.recovery = Some(Recovery {
                next_k: cycle,
                remaining,
                issued_at: now_ms,
            });
            return Ok(ProtocolMessage::ResetChallenge(ResetChallenge { k: cycle }));
        }
        let t1 = now_ms as u32;
        let (ga, gb) = self.gens()?;
        let sa = ga.derive_key(cycle)?;
        let sb = gb.derive_key(cycle)?;
        self.ops.push(OpEvent::GeneratorRun);
        let hmac_a = challenge_hmac_a(&sa, t1);
        let hmac_b = challenge_hmac_b(&sb, t1, req.id_p, self.config.id_i);
        self.ops.extend([OpEvent::Hmac, OpEvent::Hmac]);
        self.pending = Some(Pending {
            t1,
            sa,
            sb,
            id_p: req.id_p,
            r: req.r,
        });
        Ok(ProtocolMessage::ImdChallenge(ImdChallenge {
            id_i: self.config.id_i,
            i: cycle,
            t1,
            hmac_a,
            hmac_b,
        }))
    }

    /// Compares the proof against `Hash(T1 || Token')`. Success advances
    /// both generators and returns the session key; any failure drops the
    /// pending flow.
    pub fn verify_token(
        &mut self,
        msg: &TokenSubmit,
        now_ms: u64,
    ) -> Result<Digest256, ProtocolError> {
        let pending = self
            .pending
            .take()
            .ok_or(ProtocolError::UnexpectedMessage {
                entity: "imd",
                kind: MessageKind::TokenSubmit,
            })?;
        if (now_ms as u32).wrapping_sub(pending.t1) > self.config.ts_window_ms {
            return Err(ProtocolError::Rejected(RejectReason::Timeout));
        }
        let share_a = card_share(&pending.sa, pending.t1, pending.r);
        let share_b = has_share(
            &pending.sb,
            pending.t1,
            pending.id_p,
            self.config.id_i,
            pending.r,
        );
        self.ops.extend([OpEvent::Hmac, OpEvent::Hmac]);
        let expected = token_proof(pending.t1, &assemble_token(&share_a, &share_b));
        self.ops.push(OpEvent::Sha256);
        if expected != msg.proof {
            return Err(ProtocolError::Rejected(RejectReason::BadProof));
        }
        let skey = session_key(&share_a, &share_b);
        self.ops.extend([OpEvent::Sha256, OpEvent::Sha256]);
        let (a, b) = self.gens.as_mut().ok_or(ProtocolError::NotProvisioned)?;
        a.advance()?;
        b.advance()?;
        Ok(skey)
    }

    /// Checks one `SB_k`. Returns the next challenge, or `None` once all
    /// `2 * S` answers were right, at which point the keys are erased and
    /// the implant waits for re-enrollment.
    pub fn handle_reset_response(
        &mut self,
        msg: &ResetResponse,
        now_ms: u64,
    ) -> Result<Option<ResetChallenge>, ProtocolError> {
        let rec = self
            .recovery
            .take()
            .ok_or(ProtocolError::UnexpectedMessage {
                entity: "imd",
                kind: MessageKind::ResetResponse,
            })?;
        if now_ms.saturating_sub(rec.issued_at) > self.config.ts_window_ms as u64 {
            return Err(ProtocolError::Rejected(RejectReason::Timeout));
        }
        let expected = self.gens()?.1.derive_key(rec.next_k)?;
        self.ops.push(OpEvent::GeneratorRun);
        if expected.bytes != msg.sb_k.0 {
            return Err(ProtocolError::Rejected(RejectReason::ResetFailed));
        }
        if rec.remaining == 1 {
            self.tamper();
            self.gens = None;
            return Ok(None);
        }
        let next_k = rec.next_k.wrapping_add(1);
        self.recovery = Some(Recovery {
            next_k,
            remaining: rec.remaining - 1,
            issued_at: now_ms,
        });
        Ok(Some(ResetChallenge { k: next_k }))
    }

    /// Decodes and dispatches one received frame.
    pub fn receive(&mut self, kind: MessageKind, bytes: &[u8], now_ms: u64) -> ImdOutput {
        let msg = match ProtocolMessage::decode(kind, bytes) {
            Ok(m) => m,
            Err(e) => return ImdOutput::Ignored(e.to_string()),
        };
        let result = match msg {
            ProtocolMessage::ServiceRequest(req) => {
                self.handle_request(&req, now_ms).map(ImdOutput::Reply)
            }
            ProtocolMessage::TokenSubmit(t) => {
                self.verify_token(&t, now_ms)
                    .map(|skey| ImdOutput::SessionEstablished {
                        skey,
                        cycle: self.cycle(),
                    })
            }
            ProtocolMessage::ResetResponse(r) => {
                self.handle_reset_response(&r, now_ms)
                    .map(|next| match next {
                        Some(c) => ImdOutput::Reply(ProtocolMessage::ResetChallenge(c)),
                        None => ImdOutput::ResetComplete,
                    })
            }
            other => {
                return ImdOutput::Ignored(format!(
                    "{} not accepted by implant",
                    other.kind().name()
                ))
            }
        };
        match result {
            Ok(out) => out,
            Err(ProtocolError::Rejected(reason)) => ImdOutput::Rejected(reason),
            Err(e) => ImdOutput::Ignored(e.to_string()),
        }
    }
}
