//! Implant-side time and energy accounting.
//!
//! Operation counts are mapped through the TelosB power model and the
//! measured per-operation costs. Radio costs were measured for two
//! bundles only (320 received bits, 608 sent bits); other sizes scale
//! linearly in bits. Listen and sleep states are not part of the totals.

use crate::Entity;
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use thiserror::Error;

/// Expected totals for one complete normal-access cycle.
pub const EXPECTED_CYCLE_ENERGY_UJ: f64 = 5306.0;
pub const EXPECTED_CYCLE_TIME_MS: f64 = 343.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("unknown ledger event kind {0:?}")]
    UnknownEvent(String),
}

/// Power draw per radio/CPU state, in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub transmit_mw: f64,
    pub listen_mw: f64,
    pub receive_mw: f64,
    pub compute_active_mw: f64,
    pub compute_idle_mw: f64,
    pub sleep_mw: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            transmit_mw: 69.0,
            listen_mw: 60.0,
            receive_mw: 61.0,
            compute_active_mw: 4.8,
            compute_idle_mw: 4.5,
            sleep_mw: 0.035,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpCost {
    pub time_ms: f64,
    pub energy_uj: f64,
}

/// A radio cost measured for a bundle of `bits`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioCost {
    pub bits: u64,
    pub time_ms: f64,
    pub energy_uj: f64,
}

impl RadioCost {
    fn scaled(&self, bits: u64) -> OpCost {
        // Multiply before dividing so the measured bundle maps back exactly.
        OpCost {
            time_ms: bits as f64 * self.time_ms / self.bits as f64,
            energy_uj: bits as f64 * self.energy_uj / self.bits as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpCostTable {
    pub generator: OpCost,
    pub hmac: OpCost,
    pub sha256: OpCost,
    pub receive: RadioCost,
    pub send: RadioCost,
}

impl Default for OpCostTable {
    fn default() -> Self {
        OpCostTable {
            generator: OpCost {
                time_ms: 52.0,
                energy_uj: 249.0,
            },
            hmac: OpCost {
                time_ms: 46.0,
                energy_uj: 220.8,
            },
            sha256: OpCost {
                time_ms: 15.0,
                energy_uj: 72.0,
            },
            receive: RadioCost {
                bits: 320,
                time_ms: 40.0,
                energy_uj: 2440.0,
            },
            send: RadioCost {
                bits: 608,
                time_ms: 22.0,
                energy_uj: 1518.0,
            },
        }
    }
}

/// One costed implant operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpEvent {
    /// One run of the key pair generator (Trivium plus SHA-256 per key).
    GeneratorRun,
    Hmac,
    Sha256,
    Receive {
        bits: u64,
    },
    Transmit {
        bits: u64,
    },
}

impl OpEvent {
    pub fn name(&self) -> &'static str {
        match self {
            OpEvent::GeneratorRun => "generator",
            OpEvent::Hmac => "hmac",
            OpEvent::Sha256 => "sha256",
            OpEvent::Receive { .. } => "receive",
            OpEvent::Transmit { .. } => "transmit",
        }
    }
}

/// Parses `generator`, `hmac`, `sha256`, `receive:<bits>`, `transmit:<bits>`.
impl FromStr for OpEvent {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || LedgerError::UnknownEvent(s.to_string());
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let bits = || arg.and_then(|a| a.parse::<u64>().ok()).ok_or_else(unknown);
        match (name, arg) {
            ("generator", None) => Ok(OpEvent::GeneratorRun),
            ("hmac", None) => Ok(OpEvent::Hmac),
            ("sha256", None) => Ok(OpEvent::Sha256),
            ("receive", Some(_)) => Ok(OpEvent::Receive { bits: bits()? }),
            ("transmit", Some(_)) => Ok(OpEvent::Transmit { bits: bits()? }),
            _ => Err(unknown()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub generator_runs: u64,
    pub hmac_ops: u64,
    pub sha_ops: u64,
    pub bits_received: u64,
    pub bits_sent: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub energy_uj: f64,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub counts: OpCounts,
    pub per_op_costs: OpCostTable,
    pub power_model: PowerModel,
    pub totals: Totals,
    pub expected: Totals,
    pub delta: Totals,
}

#[derive(Debug, Clone, Default)]
pub struct EnergyLedger {
    counts: OpCounts,
    costs: OpCostTable,
    power: PowerModel,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_costs(costs: OpCostTable, power: PowerModel) -> Self {
        EnergyLedger {
            counts: OpCounts::default(),
            costs,
            power,
        }
    }

    pub fn counts(&self) -> &OpCounts {
        &self.counts
    }

    pub fn costs(&self) -> &OpCostTable {
        &self.costs
    }

    /// Adds another ledger's counts, e.g. to total several runs.
    pub fn merge(&mut self, other: &EnergyLedger) {
        let (c, o) = (&mut self.counts, &other.counts);
        c.generator_runs += o.generator_runs;
        c.hmac_ops += o.hmac_ops;
        c.sha_ops += o.sha_ops;
        c.bits_received += o.bits_received;
        c.bits_sent += o.bits_sent;
    }

    /// Records `event` if it happened on the implant; anything else is
    /// ignored. Returns whether the event was counted.
    pub fn record(&mut self, source: Entity, event: OpEvent) -> bool {
        if source != Entity::Imd {
            return false;
        }
        let c = &mut self.counts;
        match event {
            OpEvent::GeneratorRun => c.generator_runs += 1,
            OpEvent::Hmac => c.hmac_ops += 1,
            OpEvent::Sha256 => c.sha_ops += 1,
            OpEvent::Receive { bits } => c.bits_received += bits,
            OpEvent::Transmit { bits } => c.bits_sent += bits,
        }
        true
    }

    /// Records an event given in its textual form.
    pub fn record_named(&mut self, source: Entity, event: &str) -> Result<bool, LedgerError> {
        Ok(self.record(source, event.parse()?))
    }

    pub fn summarize(&self) -> Totals {
        let c = &self.counts;
        let k = &self.costs;
        let rx = k.receive.scaled(c.bits_received);
        let tx = k.send.scaled(c.bits_sent);
        let energy_uj = c.generator_runs as f64 * k.generator.energy_uj
            + c.hmac_ops as f64 * k.hmac.energy_uj
            + c.sha_ops as f64 * k.sha256.energy_uj
            + rx.energy_uj
            + tx.energy_uj;
        let time_ms = c.generator_runs as f64 * k.generator.time_ms
            + c.hmac_ops as f64 * k.hmac.time_ms
            + c.sha_ops as f64 * k.sha256.time_ms
            + rx.time_ms
            + tx.time_ms;
        Totals { energy_uj, time_ms }
    }

    pub fn report(&self) -> EnergyReport {
        let round = |x: f64| (x * 1000.0).round() / 1000.0;
        let t = self.summarize();
        let totals = Totals {
            energy_uj: round(t.energy_uj),
            time_ms: round(t.time_ms),
        };
        let expected = Totals {
            energy_uj: EXPECTED_CYCLE_ENERGY_UJ,
            time_ms: EXPECTED_CYCLE_TIME_MS,
        };
        EnergyReport {
            counts: self.counts,
            per_op_costs: self.costs,
            power_model: self.power,
            totals,
            expected,
            delta: Totals {
                energy_uj: round(totals.energy_uj - expected.energy_uj),
                time_ms: round(totals.time_ms - expected.time_ms),
            },
        }
    }
}
