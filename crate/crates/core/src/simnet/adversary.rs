//! Scripted network adversary. Message indexes count the frames honest
//! parties sent on one link, starting at 0.

use super::Link;
use crate::protocol::MessageKind;
use crate::Entity;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversaryAction {
    /// Passive listening; every frame is already in the trace.
    Eavesdrop,
    Drop {
        link: Link,
        index: usize,
    },
    /// Flips the given bit positions (bit 0 = MSB of byte 0).
    Tamper {
        link: Link,
        index: usize,
        bits: Vec<usize>,
    },
    /// Re-sends an observed frame to its original destination.
    Replay {
        link: Link,
        index: usize,
        at_ms: u64,
    },
    Inject {
        link: Link,
        to: Entity,
        kind: MessageKind,
        bytes: Vec<u8>,
        at_ms: u64,
    },
    /// Takes the patient card; from then on only a thief can use it.
    StealCard {
        at_ms: u64,
    },
    /// Physically probes the patient card, destroying its POK key.
    TamperCard {
        at_ms: u64,
    },
}

impl AdversaryAction {
    /// Time at which a timed action fires; `None` for per-message hooks.
    pub fn at_ms(&self) -> Option<u64> {
        match self {
            AdversaryAction::Replay { at_ms, .. }
            | AdversaryAction::Inject { at_ms, .. }
            | AdversaryAction::StealCard { at_ms }
            | AdversaryAction::TamperCard { at_ms } => Some(*at_ms),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryScript {
    pub actions: Vec<AdversaryAction>,
}

impl AdversaryScript {
    pub fn new(actions: Vec<AdversaryAction>) -> AdversaryScript {
        AdversaryScript { actions }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// The hook for the `index`-th frame on `link`, if any.
    pub(crate) fn hook(&self, link: Link, index: usize) -> Option<&AdversaryAction> {
        self.actions.iter().find(|a| match a {
            AdversaryAction::Drop { link: l, index: i }
            | AdversaryAction::Tamper {
                link: l, index: i, ..
            } => *l == link && *i == index,
            _ => false,
        })
    }
}

/// Flips bit positions in place; `false` if any position is out of range.
pub(crate) fn flip_bits(bytes: &mut [u8], bits: &[usize]) -> bool {
    if bits.iter().any(|&b| b >= bytes.len() * 8) {
        return false;
    }
    for &b in bits {
        bytes[b / 8] ^= 0x80 >> (b % 8);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flips_msb_first() {
        let mut b = [0u8; 2];
        assert!(flip_bits(&mut b, &[0, 15]));
        assert_eq!(b, [0x80, 0x01]);
        assert!(!flip_bits(&mut b, &[16]));
        assert_eq!(b, [0x80, 0x01]);
    }

    #[test]
    fn hook_lookup() {
        let s = AdversaryScript::new(vec![
            AdversaryAction::Eavesdrop,
            AdversaryAction::Drop {
                link: Link::Wireless,
                index: 2,
            },
        ]);
        assert!(s.hook(Link::Wireless, 2).is_some());
        assert!(s.hook(Link::Wireless, 1).is_none());
        assert!(s.hook(Link::CardLink, 2).is_none());
    }
}
