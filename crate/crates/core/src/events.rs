//! Session event log: a versioned header line followed by one JSON record per line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::needs::{Need, NeedsState};
use crate::world::AttrChange;

pub const LOG_SCHEMA: &str = "indoorsim-events";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub version: u32,
    pub mode: String,
    pub seed: u64,
    pub duration_min: u64,
    pub agents: Vec<String>,
    /// Last tick simulated; equals `duration_min` unless the session exited early or aborted.
    pub end_tick: u64,
    pub complete: bool,
    pub early_exit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
}

/// Where a dispatched command came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandSource {
    Admissible,
    LearnFromFailure,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Action {
        command: String,
        verb: String,
        source: CommandSource,
    },
    Outcome {
        command: String,
        success: bool,
        message: String,
        duration_ticks: u32,
        diff: Vec<AttrChange>,
    },
    Utterance {
        session: String,
        text: String,
    },
    NeedsSample {
        location: String,
        needs: NeedsState,
        unmet: Vec<Need>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: u64,
    pub agent: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    pub events: Vec<EventRecord>,
}

impl EventLog {
    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serializes");
        s.push('\n');
        for e in &self.events {
            s.push_str(&serde_json::to_string(e).expect("event serializes"));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or("empty log")?;
        let header: LogHeader = serde_json::from_str(first).map_err(|e| format!("line 1: bad header: {e}"))?;
        if header.schema != LOG_SCHEMA {
            return Err(format!("line 1: unknown schema `{}`", header.schema));
        }
        if header.version != LOG_VERSION {
            return Err(format!("line 1: unsupported version {}", header.version));
        }
        let events = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<Vec<EventRecord>, String>>()?;
        Ok(Self { header, events })
    }

    /// Structural checks: per-agent ticks never decrease and every action
    /// is followed by its outcome.
    pub fn check(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut last_tick: BTreeMap<&str, u64> = BTreeMap::new();
        let mut pending: BTreeMap<&str, &str> = BTreeMap::new();
        for (i, e) in self.events.iter().enumerate() {
            let prev = last_tick.insert(&e.agent, e.tick);
            if prev.is_some_and(|p| p > e.tick) {
                errs.push(format!("event {i}: tick goes backwards for {}", e.agent));
            }
            if e.tick > self.header.duration_min {
                errs.push(format!("event {i}: tick {} beyond duration", e.tick));
            }
            match &e.kind {
                EventKind::Action { command, .. } => {
                    if pending.insert(&e.agent, command).is_some() {
                        errs.push(format!("event {i}: action without outcome for {}", e.agent));
                    }
                }
                EventKind::Outcome { command, .. } => match pending.remove(e.agent.as_str()) {
                    Some(c) if c == command => {}
                    _ => errs.push(format!("event {i}: outcome without matching action for {}", e.agent)),
                },
                _ => {}
            }
        }
        for a in pending.keys() {
            errs.push(format!("action without outcome for {a} at end of log"));
        }
        errs
    }
}
