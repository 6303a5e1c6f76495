//! Deterministic discrete-event simulation of the protocol.
//!
//! A single queue ordered by `(time, sequence)` drives every entity; ties
//! are delivered first-in first-out. All randomness comes from the world's
//! seeded generator, so a trace is a pure function of the world, the
//! flows, the adversary script and the seed.

mod adversary;
mod scenario;
mod trace;
mod world;

pub use adversary::{AdversaryAction, AdversaryScript};
pub use scenario::{
    run_config, run_once, Expectation, FinalCycles, RunSummary, Scenario, ScenarioConfig,
    ScenarioReport, DEFAULT_SCENARIO_SEED, EMERGENT_BER_LIMIT, EMERGENT_MATCH_THRESHOLD,
    THIEF_IRIS_BER,
};
pub use trace::{ChannelStats, FlowRecord, ImdDecision, Trace, TraceEvent};
pub use world::{CardHolder, Operator, World, WorldConfig, CHIEF_ID, PATIENT_ID, RESIDENT_ID};

use crate::crypto::Digest256;
use crate::energy::EnergyLedger;
use crate::protocol::{
    ImdOutput, MessageKind, ProgrammerMode, ProgrammerOutcome, ProtocolError, ProtocolMessage,
    RejectReason,
};
use crate::Entity;
use adversary::flip_bits;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("adversary script: {0}")]
    ScriptError(String),
    #[error("flow {flow} has no verdict when the run ended")]
    ScenarioStalled { flow: usize },
    #[error("world setup failed: {0}")]
    Setup(#[from] ProtocolError),
    #[error("invalid scenario configuration: {0}")]
    Config(String),
}

/// Logical clock in milliseconds. Only the scheduler moves it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimClock {
    now: u64,
}

impl SimClock {
    pub fn now(&self) -> u64 {
        self.now
    }

    fn advance_to(&mut self, t: u64) {
        debug_assert!(t >= self.now, "clock moved backwards");
        self.now = self.now.max(t);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Link {
    /// Programmer to implant radio.
    Wireless,
    /// Programmer to patient card contact interface.
    CardLink,
    /// Programmer to server pipe.
    Backhaul,
}

impl Link {
    pub const ALL: [Link; 3] = [Link::Wireless, Link::CardLink, Link::Backhaul];

    pub fn latency_ms(&self) -> u64 {
        match self {
            Link::Wireless | Link::CardLink => 1,
            Link::Backhaul => 10,
        }
    }

    pub fn between(a: Entity, b: Entity) -> Option<Link> {
        use Entity::*;
        match (a, b) {
            (Programmer, Imd) | (Imd, Programmer) => Some(Link::Wireless),
            (Programmer, PatientCard) | (PatientCard, Programmer) => Some(Link::CardLink),
            (Programmer, Has) | (Has, Programmer) => Some(Link::Backhaul),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Honest,
    Replayed,
    Injected,
    Tampered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Frame {
    kind: MessageKind,
    bytes: Vec<u8>,
    origin: Origin,
    flow: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    SessionEstablished {
        skey_agree: bool,
    },
    ResetComplete,
    Rejected(RejectReason),
    /// The flow deadline passed without an outcome.
    Incomplete,
}

/// One programmer session to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub start_ms: u64,
    pub operator: Operator,
    pub mode: ProgrammerMode,
    pub request: u32,
}

#[derive(Debug)]
enum Action {
    Deliver {
        link: Link,
        from: Entity,
        to: Entity,
        frame: Frame,
    },
    StartFlow(usize),
    FlowDeadline(usize),
    Adversary(usize),
}

#[derive(Debug)]
struct Event {
    time: u64,
    seq: u64,
    action: Action,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

#[derive(Debug, Clone)]
struct Observed {
    to: Entity,
    kind: MessageKind,
    bytes: Vec<u8>,
}

pub struct Simulation {
    world: World,
    clock: SimClock,
    queue: BinaryHeap<Event>,
    seq: u64,
    flows: Vec<Flow>,
    records: Vec<FlowRecord>,
    programmer_skeys: BTreeMap<usize, Digest256>,
    active_flow: Option<usize>,
    script: AdversaryScript,
    observed: BTreeMap<Link, Vec<Observed>>,
    trace: Trace,
    flow_timeout_ms: u64,
}

impl Simulation {
    pub fn new(world: World) -> Simulation {
        let flow_timeout_ms = 2 * world.config.ts_ms as u64 + 1000;
        Simulation {
            world,
            clock: SimClock::default(),
            queue: BinaryHeap::new(),
            seq: 0,
            flows: Vec::new(),
            records: Vec::new(),
            programmer_skeys: BTreeMap::new(),
            active_flow: None,
            script: AdversaryScript::default(),
            observed: BTreeMap::new(),
            trace: Trace::new(EnergyLedger::new()),
            flow_timeout_ms,
        }
    }

    /// How long a flow may run before it is declared incomplete.
    pub fn flow_timeout_ms(&self) -> u64 {
        self.flow_timeout_ms
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(mut self) -> Trace {
        self.trace.flows = self.records;
        self.trace
    }

    fn schedule(&mut self, time: u64, action: Action) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            seq: self.seq,
            action,
        });
    }

    /// Adds a flow; returns its index.
    pub fn add_flow(&mut self, flow: Flow) -> usize {
        let idx = self.flows.len();
        self.flows.push(flow);
        self.records.push(FlowRecord::new(idx, &flow));
        self.schedule(flow.start_ms, Action::StartFlow(idx));
        idx
    }

    /// Appends adversary actions. Timed actions are scheduled now;
    /// message hooks apply to frames sent from here on.
    pub fn install_script(&mut self, script: AdversaryScript) {
        for action in script.actions {
            let idx = self.script.actions.len();
            if let Some(at) = action.at_ms() {
                self.schedule(at, Action::Adversary(idx));
            }
            self.script.actions.push(action);
        }
    }

    /// Processes every event with time `<= until`. Fails if a flow that
    /// has started is still without a verdict afterwards.
    pub fn run_until(&mut self, until: u64) -> Result<(), SimError> {
        while let Some(ev) = self.queue.peek() {
            if ev.time > until {
                break;
            }
            let ev = self.queue.pop().expect("peeked");
            self.clock.advance_to(ev.time);
            self.dispatch(ev.action)?;
        }
        if until != u64::MAX {
            self.clock.advance_to(until);
        }
        self.trace.flows = self.records.clone();
        if let Some(stalled) = self
            .records
            .iter()
            .find(|r| r.started && r.verdict.is_none())
        {
            return Err(SimError::ScenarioStalled {
                flow: stalled.index,
            });
        }
        Ok(())
    }

    /// Runs until the queue is empty.
    pub fn run_to_completion(&mut self) -> Result<(), SimError> {
        self.run_until(u64::MAX)
    }

    fn note(&mut self, src: &str, dst: &str, kind: &str, note: String) {
        self.trace.push(TraceEvent {
            time: self.clock.now(),
            src: src.to_string(),
            dst: dst.to_string(),
            kind: kind.to_string(),
            bits: 0,
            payload_hex: String::new(),
            note,
        });
    }

    fn set_verdict(&mut self, flow: usize, verdict: Verdict) {
        let rec = &mut self.records[flow];
        if rec.verdict.is_some() {
            return;
        }
        rec.verdict = Some(verdict);
        rec.end_ms = Some(self.clock.now());
        if self.active_flow == Some(flow) {
            self.active_flow = None;
        }
        self.note("sim", "", "verdict", format!("flow {flow}: {verdict:?}"));
    }

    fn mark_tainted(&mut self, flow: Option<usize>) {
        if let Some(f) = flow {
            self.records[f].tainted = true;
        }
    }

    fn dispatch(&mut self, action: Action) -> Result<(), SimError> {
        match action {
            Action::StartFlow(idx) => self.start_flow(idx),
            Action::FlowDeadline(idx) => {
                self.set_verdict(idx, Verdict::Incomplete);
                Ok(())
            }
            Action::Adversary(idx) => self.adversary_act(idx),
            Action::Deliver {
                link,
                from,
                to,
                frame,
            } => {
                self.deliver(link, from, to, frame);
                Ok(())
            }
        }
    }

    fn start_flow(&mut self, idx: usize) -> Result<(), SimError> {
        let flow = self.flows[idx];
        if let Some(prev) = self.active_flow {
            self.set_verdict(prev, Verdict::Incomplete);
        }
        self.records[idx].started = true;
        self.active_flow = Some(idx);
        let now = self.clock.now();
        self.schedule(now + self.flow_timeout_ms, Action::FlowDeadline(idx));
        self.note(
            "programmer",
            "",
            "flow_start",
            format!(
                "flow {idx}: {:?} {:?} r={:#x}",
                flow.operator, flow.mode, flow.request
            ),
        );
        if let Err(e) = self.world.seat(&flow.operator) {
            self.note("has", "programmer", "error", e.to_string());
            self.set_verdict(idx, Verdict::Rejected(e.reason()));
            return Ok(());
        }
        let before = self.world.programmer.mode();
        let step = self
            .world
            .programmer
            .start(flow.mode, flow.request, PATIENT_ID);
        self.log_transition(
            "programmer",
            format!("{before:?}"),
            format!("{:?}", self.world.programmer.mode()),
        );
        self.apply_programmer_step(step, Some(idx));
        Ok(())
    }

    fn log_transition(&mut self, who: &str, before: String, after: String) {
        if before != after {
            self.note(who, "", "transition", format!("{before} -> {after}"));
        }
    }

    fn apply_programmer_step(
        &mut self,
        step: crate::protocol::ProgrammerStep,
        flow: Option<usize>,
    ) {
        if let Some(outcome) = step.outcome {
            match (outcome, flow) {
                (ProgrammerOutcome::TokenSent { skey }, Some(f)) => {
                    self.programmer_skeys.insert(f, skey);
                }
                (ProgrammerOutcome::Aborted(reason), Some(f)) => {
                    self.note("programmer", "", "error", format!("aborted: {reason:?}"));
                    self.set_verdict(f, Verdict::Rejected(reason));
                }
                _ => {}
            }
        }
        for out in step.outgoing {
            self.send(Entity::Programmer, out.to, &out.msg, flow);
        }
    }

    /// Puts an honest frame on the wire, applying any adversary hook.
    fn send(&mut self, from: Entity, to: Entity, msg: &ProtocolMessage, flow: Option<usize>) {
        let link = Link::between(from, to).expect("entities are wired");
        let kind = msg.kind();
        let mut bytes = msg.encode();
        let bits = bytes.len() as u64 * 8;
        if from == Entity::Imd {
            self.trace
                .energy
                .record(Entity::Imd, crate::energy::OpEvent::Transmit { bits });
        }
        let stats = self.trace.channels.entry(link).or_default();
        stats.sent += 1;
        stats.sent_bits += bits;
        self.trace.push(TraceEvent {
            time: self.clock.now(),
            src: from.name().into(),
            dst: to.name().into(),
            kind: "send".into(),
            bits,
            payload_hex: hex::encode(&bytes),
            note: kind.name().into(),
        });
        let observed = self.observed.entry(link).or_default();
        let index = observed.len();
        observed.push(Observed {
            to,
            kind,
            bytes: bytes.clone(),
        });

        let mut origin = Origin::Honest;
        match self.script.hook(link, index).cloned() {
            Some(AdversaryAction::Drop { .. }) => {
                let stats = self.trace.channels.entry(link).or_default();
                stats.dropped += 1;
                stats.dropped_bits += bits;
                self.mark_tainted(flow);
                self.note(
                    "adversary",
                    to.name(),
                    "drop",
                    format!("{} #{index} on {link:?}", kind.name()),
                );
                return;
            }
            Some(AdversaryAction::Tamper {
                bits: positions, ..
            }) => {
                if flip_bits(&mut bytes, &positions) {
                    origin = Origin::Tampered;
                    self.trace.channels.entry(link).or_default().tampered += 1;
                    self.mark_tainted(flow);
                    self.note(
                        "adversary",
                        to.name(),
                        "tamper",
                        format!("{} #{index} bits {positions:?}", kind.name()),
                    );
                } else {
                    self.note(
                        "adversary",
                        to.name(),
                        "error",
                        format!(
                            "tamper positions {positions:?} outside {} #{index}",
                            kind.name()
                        ),
                    );
                    self.trace
                        .script_errors
                        .push(format!("tamper out of range on {link:?} #{index}"));
                }
            }
            _ => {}
        }
        let at = self.clock.now() + link.latency_ms();
        self.schedule(
            at,
            Action::Deliver {
                link,
                from,
                to,
                frame: Frame {
                    kind,
                    bytes,
                    origin,
                    flow,
                },
            },
        );
    }

    fn adversary_act(&mut self, idx: usize) -> Result<(), SimError> {
        let action = self.script.actions[idx].clone();
        match action {
            AdversaryAction::Replay { link, index, .. } => {
                let Some(obs) = self.observed.get(&link).and_then(|v| v.get(index)).cloned() else {
                    return Err(SimError::ScriptError(format!(
                        "replay of {link:?} #{index} before it was observed"
                    )));
                };
                self.note(
                    "adversary",
                    obs.to.name(),
                    "replay",
                    format!("{} #{index} on {link:?}", obs.kind.name()),
                );
                self.inject_frame(link, obs.to, obs.kind, obs.bytes, Origin::Replayed);
            }
            AdversaryAction::Inject {
                link,
                to,
                kind,
                bytes,
                ..
            } => {
                if Link::between(Entity::Programmer, to) != Some(link) {
                    return Err(SimError::ScriptError(format!(
                        "{to} is not reachable on {link:?}"
                    )));
                }
                self.note(
                    "adversary",
                    to.name(),
                    "inject",
                    format!("{} ({} bytes)", kind.name(), bytes.len()),
                );
                self.inject_frame(link, to, kind, bytes, Origin::Injected);
            }
            AdversaryAction::StealCard { .. } => {
                self.world.card_holder = CardHolder::Thief;
                self.note("adversary", "patient_card", "steal_card", String::new());
            }
            AdversaryAction::TamperCard { .. } => {
                self.world.card.tamper();
                self.note(
                    "adversary",
                    "patient_card",
                    "tamper_card",
                    "POK key destroyed".into(),
                );
            }
            AdversaryAction::Eavesdrop
            | AdversaryAction::Drop { .. }
            | AdversaryAction::Tamper { .. } => {}
        }
        Ok(())
    }

    fn inject_frame(
        &mut self,
        link: Link,
        to: Entity,
        kind: MessageKind,
        bytes: Vec<u8>,
        origin: Origin,
    ) {
        let stats = self.trace.channels.entry(link).or_default();
        stats.adversarial += 1;
        stats.adversarial_bits += bytes.len() as u64 * 8;
        let at = self.clock.now() + link.latency_ms();
        self.schedule(
            at,
            Action::Deliver {
                link,
                from: Entity::Adversary,
                to,
                frame: Frame {
                    kind,
                    bytes,
                    origin,
                    flow: None,
                },
            },
        );
    }

    fn deliver(&mut self, link: Link, from: Entity, to: Entity, frame: Frame) {
        let bits = frame.bytes.len() as u64 * 8;
        if frame.origin == Origin::Honest || frame.origin == Origin::Tampered {
            let stats = self.trace.channels.entry(link).or_default();
            stats.delivered += 1;
            stats.delivered_bits += bits;
        }
        let note = match frame.origin {
            Origin::Honest => frame.kind.name().to_string(),
            o => format!("{} origin={o:?}", frame.kind.name()),
        };
        self.trace.push(TraceEvent {
            time: self.clock.now(),
            src: from.name().into(),
            dst: to.name().into(),
            kind: "deliver".into(),
            bits,
            payload_hex: hex::encode(&frame.bytes),
            note,
        });
        match to {
            Entity::Imd => self.deliver_imd(frame),
            Entity::PatientCard => self.deliver_card(frame),
            Entity::Has => self.deliver_has(frame),
            Entity::Programmer => self.deliver_programmer(from, frame),
            _ => {}
        }
    }

    fn deliver_imd(&mut self, frame: Frame) {
        let bits = frame.bytes.len() as u64 * 8;
        self.trace
            .energy
            .record(Entity::Imd, crate::energy::OpEvent::Receive { bits });
        let before = self.world.imd.mode();
        let out = self
            .world
            .imd
            .receive(frame.kind, &frame.bytes, self.clock.now());
        for op in self.world.imd.drain_ops() {
            self.trace.energy.record(Entity::Imd, op);
            self.note("imd", "", "op", op.name().into());
        }
        let after = self.world.imd.mode();
        self.log_transition("imd", format!("{before:?}"), format!("{after:?}"));
        let now = self.clock.now();
        let decision = |s: &str| ImdDecision {
            time: now,
            flow: frame.flow,
            origin: frame.origin,
            trigger: frame.kind,
            outcome: s.to_string(),
        };
        match out {
            ImdOutput::Reply(msg) => self.send(Entity::Imd, Entity::Programmer, &msg, frame.flow),
            ImdOutput::SessionEstablished { skey, cycle } => {
                let d = decision("SessionEstablished");
                self.trace.decisions.push(d);
                self.note("imd", "", "session", format!("cycle now {cycle}"));
                if let Some(f) = frame.flow {
                    let agree = self.programmer_skeys.get(&f) == Some(&skey);
                    self.set_verdict(f, Verdict::SessionEstablished { skey_agree: agree });
                }
            }
            ImdOutput::ResetComplete => {
                let d = decision("ResetComplete");
                self.trace.decisions.push(d);
                if let Some(f) = frame.flow {
                    self.set_verdict(f, Verdict::ResetComplete);
                }
            }
            ImdOutput::Rejected(reason) => {
                let d = decision(&format!("Rejected({reason:?})"));
                self.trace.decisions.push(d);
                self.note("imd", "", "error", format!("rejected: {reason:?}"));
                if let Some(f) = frame.flow {
                    self.set_verdict(f, Verdict::Rejected(reason));
                }
            }
            ImdOutput::Ignored(why) => self.note("imd", "", "ignored", why),
        }
    }

    fn reply_or_reject(
        &mut self,
        from: Entity,
        result: Result<ProtocolMessage, ProtocolError>,
        flow: Option<usize>,
    ) {
        let msg = match result {
            Ok(m) => m,
            Err(e) => {
                self.note(from.name(), "programmer", "error", e.to_string());
                ProtocolMessage::Reject(e.reason())
            }
        };
        self.send(from, Entity::Programmer, &msg, flow);
    }

    fn deliver_card(&mut self, frame: Frame) {
        let operator = frame.flow.map(|f| self.flows[f].operator);
        let reachable = match operator {
            Some(op) => self.world.card_reachable(&op),
            // Adversary frames reach the card only once it is stolen.
            None => self.world.card_holder == CardHolder::Thief,
        };
        if !reachable {
            self.note("patient_card", "", "ignored", "card not present".into());
            return;
        }
        let before = self.world.card.cycle();
        let result = match ProtocolMessage::decode(frame.kind, &frame.bytes) {
            Ok(ProtocolMessage::CardAuthRequest(req)) => self
                .world
                .card
                .authorize(&req)
                .map(ProtocolMessage::CardAuthResponse),
            Ok(ProtocolMessage::CardEmergentRequest(req)) => self
                .world
                .card
                .emergent_authorize(&req)
                .map(ProtocolMessage::EmergentCardResponse),
            Ok(other) => {
                self.note(
                    "patient_card",
                    "",
                    "ignored",
                    format!("{} not accepted", other.kind().name()),
                );
                return;
            }
            Err(e) => {
                self.note("patient_card", "", "ignored", e.to_string());
                return;
            }
        };
        let after = self.world.card.cycle();
        self.log_transition(
            "patient_card",
            format!("cycle {before:?}"),
            format!("cycle {after:?}"),
        );
        self.reply_or_reject(Entity::PatientCard, result, frame.flow);
    }

    fn deliver_has(&mut self, frame: Frame) {
        let Some(session) = self.world.programmer.session().copied() else {
            self.reply_or_reject(
                Entity::Has,
                Err(ProtocolError::BadDoctorIdentity),
                frame.flow,
            );
            return;
        };
        let before = self.world.has.cycle(PATIENT_ID);
        let now = self.clock.now();
        let result = match ProtocolMessage::decode(frame.kind, &frame.bytes) {
            Ok(ProtocolMessage::HasAuthRequest(req)) => self
                .world
                .has
                .authorize(&session, &req, now)
                .map(ProtocolMessage::HasAuthResponse),
            Ok(ProtocolMessage::HasResetRequest(req)) => self
                .world
                .has
                .reset_key(&session, &req)
                .map(ProtocolMessage::ResetResponse),
            Ok(other) => {
                self.note(
                    "has",
                    "",
                    "ignored",
                    format!("{} not accepted", other.kind().name()),
                );
                return;
            }
            Err(e) => {
                self.note("has", "", "ignored", e.to_string());
                return;
            }
        };
        let after = self.world.has.cycle(PATIENT_ID);
        self.log_transition(
            "has",
            format!("cycle {before:?}"),
            format!("cycle {after:?}"),
        );
        self.reply_or_reject(Entity::Has, result, frame.flow);
    }

    fn deliver_programmer(&mut self, from: Entity, frame: Frame) {
        let msg = match ProtocolMessage::decode(frame.kind, &frame.bytes) {
            Ok(m) => m,
            Err(e) => {
                self.note("programmer", "", "ignored", e.to_string());
                return;
            }
        };
        // Replies reach the programmer over the link they came in on, so
        // an adversary frame looks like it came from the link's far end.
        let sender = match from {
            Entity::Adversary => match frame.kind {
                MessageKind::ImdChallenge | MessageKind::ResetChallenge => Entity::Imd,
                MessageKind::CardAuthResponse | MessageKind::EmergentCardResponse => {
                    Entity::PatientCard
                }
                _ => Entity::Has,
            },
            other => other,
        };
        let flow = frame.flow.or(self.active_flow);
        let before = self.world.programmer.mode();
        let step = self.world.programmer.handle(sender, &msg);
        self.log_transition(
            "programmer",
            format!("{before:?}"),
            format!("{:?}", self.world.programmer.mode()),
        );
        self.apply_programmer_step(step, flow);
    }
}

/// Builds a simulation over `world`, runs every flow and the script to
/// completion, and returns the trace.
pub fn run_scenario(
    world: World,
    flows: &[Flow],
    script: AdversaryScript,
    until: u64,
) -> Result<Trace, SimError> {
    let mut sim = Simulation::new(world);
    for f in flows {
        sim.add_flow(*f);
    }
    sim.install_script(script);
    sim.run_until(until)?;
    let trace = sim.into_trace();
    if let Some(e) = trace.script_errors.first() {
        return Err(SimError::ScriptError(e.clone()));
    }
    Ok(trace)
}
