//! Run records: the event log, per-flow verdicts, implant decisions,
//! channel counters and the implant energy ledger.

use super::{Flow, Link, Origin, Verdict};
use crate::energy::EnergyLedger;
use crate::protocol::{MessageKind, ProgrammerMode};
use serde::Serialize;
use std::collections::BTreeMap;

/// One line of the JSONL trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub time: u64,
    pub src: String,
    pub dst: String,
    pub kind: String,
    pub bits: u64,
    pub payload_hex: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRecord {
    pub index: usize,
    pub start_ms: u64,
    pub end_ms: Option<u64>,
    pub mode: ProgrammerMode,
    pub operator: String,
    pub started: bool,
    /// An adversary dropped or altered one of this flow's frames.
    pub tainted: bool,
    pub verdict: Option<Verdict>,
}

impl FlowRecord {
    pub(crate) fn new(index: usize, flow: &Flow) -> FlowRecord {
        FlowRecord {
            index,
            start_ms: flow.start_ms,
            end_ms: None,
            mode: flow.mode,
            operator: format!("{:?}", flow.operator),
            started: false,
            tainted: false,
            verdict: None,
        }
    }
}

/// An access decision taken by the implant, with the frame that caused it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImdDecision {
    pub time: u64,
    pub flow: Option<usize>,
    pub origin: Origin,
    pub trigger: MessageKind,
    pub outcome: String,
}

impl ImdDecision {
    pub fn accepted(&self) -> bool {
        self.outcome == "SessionEstablished" || self.outcome == "ResetComplete"
    }
}

/// Frame counters for one link. Honest frames end up delivered (possibly
/// tampered) or dropped; adversary frames are counted separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ChannelStats {
    pub sent: u64,
    pub sent_bits: u64,
    pub delivered: u64,
    pub delivered_bits: u64,
    pub dropped: u64,
    pub dropped_bits: u64,
    pub tampered: u64,
    pub adversarial: u64,
    pub adversarial_bits: u64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub flows: Vec<FlowRecord>,
    pub decisions: Vec<ImdDecision>,
    pub channels: BTreeMap<Link, ChannelStats>,
    pub energy: EnergyLedger,
    pub script_errors: Vec<String>,
}

impl Trace {
    pub(crate) fn new(energy: EnergyLedger) -> Trace {
        Trace {
            events: Vec::new(),
            flows: Vec::new(),
            decisions: Vec::new(),
            channels: BTreeMap::new(),
            energy,
            script_errors: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, ev: TraceEvent) {
        self.events.push(ev);
    }

    pub fn verdicts(&self) -> Vec<Option<Verdict>> {
        self.flows.iter().map(|f| f.verdict).collect()
    }

    pub fn channel(&self, link: Link) -> ChannelStats {
        self.channels.get(&link).copied().unwrap_or_default()
    }

    /// Any implant acceptance triggered by a frame an honest party did not
    /// send as-is.
    pub fn accepted_forgery(&self) -> bool {
        self.decisions
            .iter()
            .any(|d| d.accepted() && d.origin != Origin::Honest)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("plain struct"));
            out.push('\n');
        }
        out
    }
}
