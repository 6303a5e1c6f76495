//! Config handling and output rendering for the `pokimd` binary.

use pokimd::energy::{EnergyLedger, OpCostTable, OpCounts, PowerModel, Totals};
use pokimd::energy::{EXPECTED_CYCLE_ENERGY_UJ, EXPECTED_CYCLE_TIME_MS};
use pokimd::simnet::{
    run_once, RunSummary, Scenario, ScenarioConfig, ScenarioReport, SimError, TraceEvent,
};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: String, message: String },
}

/// Reads a TOML config. Missing keys take their defaults; unknown keys and
/// unknown scenario names are errors.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text).map_err(|message| ConfigError::Parse {
        path: path.display().to_string(),
        message,
    })
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, String> {
    toml::from_str(text).map_err(|e| e.message().to_string())
}

pub fn config_to_toml(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("flat config serializes")
}

/// Flag values that override the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub ts_ms: Option<u32>,
    pub iris_ber: Option<f64>,
    pub cache_size: Option<usize>,
    pub repetitions: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, mut config: ScenarioConfig) -> ScenarioConfig {
        if let Some(v) = self.scenario {
            config.scenario = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.ts_ms {
            config.ts_ms = v;
        }
        if let Some(v) = self.iris_ber {
            config.iris_ber = v;
        }
        if let Some(v) = self.cache_size {
            config.cache_size = v;
        }
        if let Some(v) = self.repetitions {
            config.repetitions = v;
        }
        config
    }
}

/// Runs all repetitions in parallel; results come back in repetition order.
pub fn run_repetitions(config: &ScenarioConfig) -> Result<Vec<ScenarioReport>, SimError> {
    config.validate()?;
    (0..config.repetitions)
        .into_par_iter()
        .map(|k| run_once(config, config.seed_for(k)))
        .collect()
}

/// The JSONL trace. With several repetitions each one is introduced by a
/// `repetition` event.
pub fn render_trace(reports: &[ScenarioReport]) -> String {
    let mut out = String::new();
    for (k, r) in reports.iter().enumerate() {
        if reports.len() > 1 {
            let marker = TraceEvent {
                time: 0,
                src: "sim".into(),
                dst: String::new(),
                kind: "repetition".into(),
                bits: 0,
                payload_hex: String::new(),
                note: format!("repetition {k} seed {}", r.seed),
            };
            out.push_str(&serde_json::to_string(&marker).expect("plain struct"));
            out.push('\n');
        }
        out.push_str(&r.trace.to_jsonl());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyDocument {
    pub scenario: Scenario,
    pub seed: u64,
    pub repetitions: usize,
    /// Summed over all repetitions.
    pub counts: OpCounts,
    pub per_op_costs: OpCostTable,
    pub power_model: PowerModel,
    /// Summed over all repetitions.
    pub totals: Totals,
    pub per_repetition: Totals,
    pub expected: Totals,
    /// `per_repetition - expected`.
    pub delta: Totals,
}

pub fn energy_document(config: &ScenarioConfig, reports: &[ScenarioReport]) -> EnergyDocument {
    let mut ledger = EnergyLedger::new();
    for r in reports {
        ledger.merge(&r.trace.energy);
    }
    let report = ledger.report();
    let n = reports.len().max(1) as f64;
    let round = |x: f64| (x * 1000.0).round() / 1000.0;
    let per_repetition = Totals {
        energy_uj: round(report.totals.energy_uj / n),
        time_ms: round(report.totals.time_ms / n),
    };
    EnergyDocument {
        scenario: config.scenario,
        seed: config.seed,
        repetitions: reports.len(),
        counts: report.counts,
        per_op_costs: report.per_op_costs,
        power_model: report.power_model,
        totals: report.totals,
        per_repetition,
        expected: report.expected,
        delta: Totals {
            energy_uj: round(per_repetition.energy_uj - EXPECTED_CYCLE_ENERGY_UJ),
            time_ms: round(per_repetition.time_ms - EXPECTED_CYCLE_TIME_MS),
        },
    }
}

pub fn render_energy(doc: &EnergyDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("plain struct");
    s.push('\n');
    s
}

/// One line per scenario for `--list`.
pub fn render_list() -> String {
    let mut out = String::new();
    for sc in Scenario::ALL {
        let _ = writeln!(out, "{:<14} {}", sc.name(), sc.claim());
    }
    out
}

/// Human-readable summary for standard output.
pub fn render_summary(
    config: &ScenarioConfig,
    reports: &[ScenarioReport],
    summary: &RunSummary,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario     {}", config.scenario);
    let _ = writeln!(out, "claim        {}", config.scenario.claim());
    let _ = writeln!(
        out,
        "config       seed={} ts_ms={} iris_ber={} cache_size={} repetitions={}",
        config.seed, config.ts_ms, config.iris_ber, config.cache_size, config.repetitions
    );
    if let Some(first) = reports.first() {
        for (k, (exp, got)) in first.expected.iter().zip(&first.verdicts).enumerate() {
            let _ = writeln!(
                out,
                "flow {k}       expected {exp:?}, got {}",
                fmt_verdict(got)
            );
        }
        for (name, ok) in &first.checks {
            let _ = writeln!(
                out,
                "check        {name}: {}",
                if *ok { "ok" } else { "FAILED" }
            );
        }
        let t = first.trace.energy.report().totals;
        let _ = writeln!(
            out,
            "imd energy   {} uJ, {} ms (first repetition)",
            t.energy_uj, t.time_ms
        );
    }
    if summary.repetitions > 1 {
        let _ = writeln!(
            out,
            "matched      {}/{} repetitions",
            summary.matched, summary.repetitions
        );
    }
    if config.scenario == Scenario::Emergent || summary.repetitions > 1 {
        let _ = writeln!(
            out,
            "success rate {:.3} ({}/{} sessions)",
            summary.success_rate(),
            summary.sessions,
            summary.repetitions
        );
    }
    let _ = writeln!(
        out,
        "result       {}",
        if summary.pass { "MATCH" } else { "MISMATCH" }
    );
    out
}

fn fmt_verdict(v: &Option<pokimd::simnet::Verdict>) -> String {
    match v {
        Some(v) => format!("{v:?}"),
        None => "no verdict (flow never started)".into(),
    }
}
