//! Wire messages. Every field is a fixed-width big-endian integer or a raw
//! 256-bit tag, laid out in declaration order with no framing; the kind is
//! carried out of band by the link.

use crate::crypto::Digest256;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("{kind:?}: expected {expected} bytes, got {got}")]
    Length {
        kind: MessageKind,
        expected: usize,
        got: usize,
    },
    #[error("unknown reject code {0}")]
    RejectCode(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    ServiceRequest,
    ImdChallenge,
    CardAuthRequest,
    CardEmergentRequest,
    CardAuthResponse,
    EmergentCardResponse,
    HasAuthRequest,
    HasAuthResponse,
    HasResetRequest,
    TokenSubmit,
    ResetChallenge,
    ResetResponse,
    Reject,
}

impl MessageKind {
    pub const ALL: [MessageKind; 13] = [
        MessageKind::ServiceRequest,
        MessageKind::ImdChallenge,
        MessageKind::CardAuthRequest,
        MessageKind::CardEmergentRequest,
        MessageKind::CardAuthResponse,
        MessageKind::EmergentCardResponse,
        MessageKind::HasAuthRequest,
        MessageKind::HasAuthResponse,
        MessageKind::HasResetRequest,
        MessageKind::TokenSubmit,
        MessageKind::ResetChallenge,
        MessageKind::ResetResponse,
        MessageKind::Reject,
    ];

    /// Serialized size in bytes.
    pub fn wire_len(&self) -> usize {
        match self {
            MessageKind::ServiceRequest => 8,
            MessageKind::ImdChallenge => 76,
            MessageKind::CardAuthRequest | MessageKind::CardEmergentRequest => 44,
            MessageKind::CardAuthResponse => 32,
            MessageKind::EmergentCardResponse => 68,
            MessageKind::HasAuthRequest => 84,
            MessageKind::HasAuthResponse => 32,
            MessageKind::HasResetRequest => 44,
            MessageKind::TokenSubmit => 32,
            MessageKind::ResetChallenge => 4,
            MessageKind::ResetResponse => 32,
            MessageKind::Reject => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MessageKind::ServiceRequest => "ServiceRequest",
            MessageKind::ImdChallenge => "ImdChallenge",
            MessageKind::CardAuthRequest => "CardAuthRequest",
            MessageKind::CardEmergentRequest => "CardEmergentRequest",
            MessageKind::CardAuthResponse => "CardAuthResponse",
            MessageKind::EmergentCardResponse => "EmergentCardResponse",
            MessageKind::HasAuthRequest => "HasAuthRequest",
            MessageKind::HasAuthResponse => "HasAuthResponse",
            MessageKind::HasResetRequest => "HasResetRequest",
            MessageKind::TokenSubmit => "TokenSubmit",
            MessageKind::ResetChallenge => "ResetChallenge",
            MessageKind::ResetResponse => "ResetResponse",
            MessageKind::Reject => "Reject",
        }
    }
}

/// Reasons a flow ends without access, as seen in traces and verdicts.
/// The subset produced by cards and the server also travels on the wire
/// as a one-byte code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    AuthRejected,
    Desync,
    StaleTimestamp,
    BadDoctorIdentity,
    PolicyDenied,
    CacheExhausted,
    KeyDestroyed,
    /// Implant: token arrived after the time window.
    Timeout,
    /// Implant: token proof did not match.
    BadProof,
    /// Implant: a recovery challenge was answered wrongly.
    ResetFailed,
    /// Programmer: iris unlock or cached-key check failed.
    DecodeFailure,
    Other,
}

impl RejectReason {
    pub fn code(&self) -> u8 {
        match self {
            RejectReason::AuthRejected => 1,
            RejectReason::Desync => 2,
            RejectReason::StaleTimestamp => 3,
            RejectReason::BadDoctorIdentity => 4,
            RejectReason::PolicyDenied => 5,
            RejectReason::CacheExhausted => 6,
            RejectReason::KeyDestroyed => 7,
            RejectReason::Timeout => 8,
            RejectReason::BadProof => 9,
            RejectReason::ResetFailed => 10,
            RejectReason::DecodeFailure => 11,
            RejectReason::Other => 255,
        }
    }

    pub fn from_code(code: u8) -> Result<RejectReason, WireError> {
        Ok(match code {
            1 => RejectReason::AuthRejected,
            2 => RejectReason::Desync,
            3 => RejectReason::StaleTimestamp,
            4 => RejectReason::BadDoctorIdentity,
            5 => RejectReason::PolicyDenied,
            6 => RejectReason::CacheExhausted,
            7 => RejectReason::KeyDestroyed,
            8 => RejectReason::Timeout,
            9 => RejectReason::BadProof,
            10 => RejectReason::ResetFailed,
            11 => RejectReason::DecodeFailure,
            255 => RejectReason::Other,
            other => return Err(WireError::RejectCode(other)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceRequest {
    pub r: u32,
    pub id_p: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImdChallenge {
    pub id_i: u32,
    pub i: u32,
    pub t1: u32,
    pub hmac_a: Digest256,
    pub hmac_b: Digest256,
}

/// Sent to the patient card; the emergent variant has the same layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CardAuthRequest {
    pub i: u32,
    pub t1: u32,
    pub hmac_a: Digest256,
    pub r: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CardAuthResponse {
    pub hmac: Digest256,
}

/// `cache(i) = i || En_Ck(SB_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheItem {
    pub i: u32,
    pub ct: Digest256,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmergentCardResponse {
    pub hmac_a_resp: Digest256,
    pub cache_item: CacheItem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HasAuthRequest {
    pub i: u32,
    pub t1: u32,
    pub id_i: u32,
    pub id_p: u32,
    pub r: u32,
    pub hmac_b: Digest256,
    pub umac: Digest256,
}

impl HasAuthRequest {
    /// The bytes covered by the doctor-card MAC: everything but the tag.
    pub fn mac_input(&self) -> Vec<u8> {
        let mut w = Vec::with_capacity(52);
        for v in [self.i, self.t1, self.id_i, self.id_p, self.r] {
            w.extend_from_slice(&v.to_be_bytes());
        }
        w.extend_from_slice(self.hmac_b.as_bytes());
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HasAuthResponse {
    pub hmac: Digest256,
}

/// Asks the server for `SB_k` during recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HasResetRequest {
    pub id_i: u32,
    pub id_p: u32,
    pub k: u32,
    pub umac: Digest256,
}

impl HasResetRequest {
    pub fn mac_input(&self) -> Vec<u8> {
        [self.id_i, self.id_p, self.k]
            .iter()
            .flat_map(|v| v.to_be_bytes())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSubmit {
    pub proof: Digest256,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResetChallenge {
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResetResponse {
    pub sb_k: Digest256,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolMessage {
    ServiceRequest(ServiceRequest),
    ImdChallenge(ImdChallenge),
    CardAuthRequest(CardAuthRequest),
    CardEmergentRequest(CardAuthRequest),
    CardAuthResponse(CardAuthResponse),
    EmergentCardResponse(EmergentCardResponse),
    HasAuthRequest(HasAuthRequest),
    HasAuthResponse(HasAuthResponse),
    HasResetRequest(HasResetRequest),
    TokenSubmit(TokenSubmit),
    ResetChallenge(ResetChallenge),
    ResetResponse(ResetResponse),
    Reject(RejectReason),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }

    fn tag(&mut self, d: &Digest256) -> &mut Self {
        self.0.extend_from_slice(d.as_bytes());
        self
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn u32(&mut self) -> u32 {
        let (head, rest) = self.0.split_at(4);
        self.0 = rest;
        u32::from_be_bytes(head.try_into().unwrap())
    }

    fn tag(&mut self) -> Digest256 {
        let (head, rest) = self.0.split_at(32);
        self.0 = rest;
        Digest256(head.try_into().unwrap())
    }
}

impl ProtocolMessage {
    pub fn kind(&self) -> MessageKind {
        match self {
            ProtocolMessage::ServiceRequest(_) => MessageKind::ServiceRequest,
            ProtocolMessage::ImdChallenge(_) => MessageKind::ImdChallenge,
            ProtocolMessage::CardAuthRequest(_) => MessageKind::CardAuthRequest,
            ProtocolMessage::CardEmergentRequest(_) => MessageKind::CardEmergentRequest,
            ProtocolMessage::CardAuthResponse(_) => MessageKind::CardAuthResponse,
            ProtocolMessage::EmergentCardResponse(_) => MessageKind::EmergentCardResponse,
            ProtocolMessage::HasAuthRequest(_) => MessageKind::HasAuthRequest,
            ProtocolMessage::HasAuthResponse(_) => MessageKind::HasAuthResponse,
            ProtocolMessage::HasResetRequest(_) => MessageKind::HasResetRequest,
            ProtocolMessage::TokenSubmit(_) => MessageKind::TokenSubmit,
            ProtocolMessage::ResetChallenge(_) => MessageKind::ResetChallenge,
            ProtocolMessage::ResetResponse(_) => MessageKind::ResetResponse,
            ProtocolMessage::Reject(_) => MessageKind::Reject,
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.kind().wire_len() as u64 * 8
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(self.kind().wire_len()));
        match self {
            ProtocolMessage::ServiceRequest(m) => {
                w.u32(m.r).u32(m.id_p);
            }
            ProtocolMessage::ImdChallenge(m) => {
                w.u32(m.id_i)
                    .u32(m.i)
                    .u32(m.t1)
                    .tag(&m.hmac_a)
                    .tag(&m.hmac_b);
            }
            ProtocolMessage::CardAuthRequest(m) | ProtocolMessage::CardEmergentRequest(m) => {
                w.u32(m.i).u32(m.t1).tag(&m.hmac_a).u32(m.r);
            }
            ProtocolMessage::CardAuthResponse(m) => {
                w.tag(&m.hmac);
            }
            ProtocolMessage::EmergentCardResponse(m) => {
                w.tag(&m.hmac_a_resp)
                    .u32(m.cache_item.i)
                    .tag(&m.cache_item.ct);
            }
            ProtocolMessage::HasAuthRequest(m) => {
                w.u32(m.i).u32(m.t1).u32(m.id_i).u32(m.id_p).u32(m.r);
                w.tag(&m.hmac_b).tag(&m.umac);
            }
            ProtocolMessage::HasAuthResponse(m) => {
                w.tag(&m.hmac);
            }
            ProtocolMessage::HasResetRequest(m) => {
                w.u32(m.id_i).u32(m.id_p).u32(m.k).tag(&m.umac);
            }
            ProtocolMessage::TokenSubmit(m) => {
                w.tag(&m.proof);
            }
            ProtocolMessage::ResetChallenge(m) => {
                w.u32(m.k);
            }
            ProtocolMessage::ResetResponse(m) => {
                w.tag(&m.sb_k);
            }
            ProtocolMessage::Reject(reason) => w.0.push(reason.code()),
        }
        debug_assert_eq!(w.0.len(), self.kind().wire_len());
        w.0
    }

    pub fn decode(kind: MessageKind, bytes: &[u8]) -> Result<ProtocolMessage, WireError> {
        if bytes.len() != kind.wire_len() {
            return Err(WireError::Length {
                kind,
                expected: kind.wire_len(),
                got: bytes.len(),
            });
        }
        let mut r = Reader(bytes);
        let card_request = |r: &mut Reader| CardAuthRequest {
            i: r.u32(),
            t1: r.u32(),
            hmac_a: r.tag(),
            r: r.u32(),
        };
        Ok(match kind {
            MessageKind::ServiceRequest => ProtocolMessage::ServiceRequest(ServiceRequest {
                r: r.u32(),
                id_p: r.u32(),
            }),
            MessageKind::ImdChallenge => ProtocolMessage::ImdChallenge(ImdChallenge {
                id_i: r.u32(),
                i: r.u32(),
                t1: r.u32(),
                hmac_a: r.tag(),
                hmac_b: r.tag(),
            }),
            MessageKind::CardAuthRequest => ProtocolMessage::CardAuthRequest(card_request(&mut r)),
            MessageKind::CardEmergentRequest => {
                ProtocolMessage::CardEmergentRequest(card_request(&mut r))
            }
            MessageKind::CardAuthResponse => {
                ProtocolMessage::CardAuthResponse(CardAuthResponse { hmac: r.tag() })
            }
            MessageKind::EmergentCardResponse => {
                ProtocolMessage::EmergentCardResponse(EmergentCardResponse {
                    hmac_a_resp: r.tag(),
                    cache_item: CacheItem {
                        i: r.u32(),
                        ct: r.tag(),
                    },
                })
            }
            MessageKind::HasAuthRequest => ProtocolMessage::HasAuthRequest(HasAuthRequest {
                i: r.u32(),
                t1: r.u32(),
                id_i: r.u32(),
                id_p: r.u32(),
                r: r.u32(),
                hmac_b: r.tag(),
                umac: r.tag(),
            }),
            MessageKind::HasAuthResponse => {
                ProtocolMessage::HasAuthResponse(HasAuthResponse { hmac: r.tag() })
            }
            MessageKind::HasResetRequest => ProtocolMessage::HasResetRequest(HasResetRequest {
                id_i: r.u32(),
                id_p: r.u32(),
                k: r.u32(),
                umac: r.tag(),
            }),
            MessageKind::TokenSubmit => {
                ProtocolMessage::TokenSubmit(TokenSubmit { proof: r.tag() })
            }
            MessageKind::ResetChallenge => {
                ProtocolMessage::ResetChallenge(ResetChallenge { k: r.u32() })
            }
            MessageKind::ResetResponse => {
                ProtocolMessage::ResetResponse(ResetResponse { sb_k: r.tag() })
            }
            MessageKind::Reject => ProtocolMessage::Reject(RejectReason::from_code(bytes[0])?),
        })
    }
}
