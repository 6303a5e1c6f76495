//! Access control for implantable medical devices built on physically
//! obfuscated keys.
//!
//! The implant never trusts a programmer on its own: every access needs a
//! fresh HMAC share from the patient's card (`Key1` lineage) and one from
//! the hospital server (`Key2` lineage), XORed into a one-time token.
//! Emergency access replaces the server share with keys cached on the card
//! under an iris-locked fuzzy commitment.

pub mod crypto;
pub mod energy;
pub mod fuzzycommit;
pub mod keygen;
pub mod pok;
pub mod protocol;
pub mod simnet;

use serde::{Deserialize, Serialize};

pub use crypto::{Digest256, MacKey3};
pub use energy::{EnergyLedger, EnergyReport, OpEvent};
pub use fuzzycommit::{CacheKey, IrisCode, LockedCode};
pub use keygen::{KeyGenerator, Lineage, TempKey};
pub use pok::PokContainer;
pub use protocol::{ProtocolError, ProtocolMessage, RejectReason};
pub use simnet::{run_scenario, Scenario, SimError, Trace, Verdict};

/// The parties of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Entity {
    Imd,
    Programmer,
    PatientCard,
    DoctorCard,
    Has,
    Adversary,
}

impl Entity {
    pub fn name(&self) -> &'static str {
        match self {
            Entity::Imd => "imd",
            Entity::Programmer => "programmer",
            Entity::PatientCard => "patient_card",
            Entity::DoctorCard => "doctor_card",
            Entity::Has => "has",
            Entity::Adversary => "adversary",
        }
    }
}

impl std::fmt::Display for Entity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
