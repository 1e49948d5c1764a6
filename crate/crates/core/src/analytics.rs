//! Reports derived from a session event log: occupancy, activity time,
//! well-being, suboptimal-state breakdown and resource stress.
//!
//! Every report is a pure function of the log. Ticks run from 1 to the
//! header's `end_tick`; each agent contributes one needs sample per tick.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::Verb;
use crate::events::{EventKind, EventLog};
use crate::needs::Need;

/// Problems found while building a report. Reports are still produced.
pub type Diagnostics = Vec<String>;

fn frac(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn base_diagnostics(log: &EventLog) -> Diagnostics {
    let mut d = Vec::new();
    if !log.header.complete {
        d.push(format!(
            "log is incomplete (ended at tick {} of {})",
            log.header.end_tick, log.header.duration_min
        ));
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub agent: String,
    /// Location, category or need name.
    pub key: String,
    pub ticks: u64,
    pub fraction: f64,
}

fn share_csv(header: &str, rows: &[ShareRow]) -> String {
    let mut s = format!("agent,{header},ticks,fraction\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:.6}", r.agent, r.key, r.ticks, r.fraction);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyReport {
    pub rows: Vec<ShareRow>,
    pub diagnostics: Diagnostics,
}

impl OccupancyReport {
    pub fn to_csv(&self) -> String {
        share_csv("location", &self.rows)
    }

    pub fn fraction(&self, agent: &str, location: &str) -> f64 {
        self.rows
            .iter()
            .find(|r| r.agent == agent && r.key == location)
            .map_or(0.0, |r| r.fraction)
    }

    /// Share of all agent-ticks spent at `location`.
    pub fn overall(&self, location: &str) -> f64 {
        let total: u64 = self.rows.iter().map(|r| r.ticks).sum();
        let here: u64 = self.rows.iter().filter(|r| r.key == location).map(|r| r.ticks).sum();
        frac(here, total)
    }
}

/// Tick-weighted location residency. Samples are taken after each tick's
/// actions, so travel time counts toward the destination.
pub fn occupancy_report(log: &EventLog) -> OccupancyReport {
    let mut diagnostics = base_diagnostics(log);
    let mut counts: BTreeMap<&str, BTreeMap<&str, u64>> = BTreeMap::new();
    for e in &log.events {
        if let EventKind::NeedsSample { location, .. } = &e.kind {
            *counts.entry(&e.agent).or_default().entry(location).or_default() += 1;
        }
    }
    let mut rows = Vec::new();
    for agent in &log.header.agents {
        let Some(m) = counts.get(agent.as_str()) else {
            if log.header.end_tick > 0 {
                diagnostics.push(format!("no samples for {agent}"));
            }
            continue;
        };
        let total: u64 = m.values().sum();
        if total != log.header.end_tick {
            diagnostics.push(format!("{agent}: {total} samples for {} ticks", log.header.end_tick));
        }
        for (loc, &n) in m {
            rows.push(ShareRow { agent: agent.clone(), key: loc.to_string(), ticks: n, fraction: frac(n, total) });
        }
    }
    OccupancyReport { rows, diagnostics }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityCategory {
    RoleWork,
    Movement,
    Social,
    Physiological,
    Other,
}

impl ActivityCategory {
    pub const ALL: [ActivityCategory; 5] = [
        ActivityCategory::RoleWork,
        ActivityCategory::Movement,
        ActivityCategory::Social,
        ActivityCategory::Physiological,
        ActivityCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityCategory::RoleWork => "role_work",
            ActivityCategory::Movement => "movement",
            ActivityCategory::Social => "social",
            ActivityCategory::Physiological => "physiological",
            ActivityCategory::Other => "other",
        }
    }
}

/// Category of a verb, or `None` if the verb is unknown.
pub fn verb_category(verb: &str) -> Option<ActivityCategory> {
    if verb == "wait" {
        return Some(ActivityCategory::Other);
    }
    let v: Verb = verb.parse().ok()?;
    Some(match v {
        Verb::GoTo | Verb::MoveFurniture => ActivityCategory::Movement,
        _ if v.is_conversation() => ActivityCategory::Social,
        Verb::Eat | Verb::Drink | Verb::UseRestroom | Verb::Rest => ActivityCategory::Physiological,
        Verb::WorkAtDesk => ActivityCategory::RoleWork,
        _ if v.spec().role_gate.is_some() => ActivityCategory::RoleWork,
        _ => ActivityCategory::Other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityReport {
    pub rows: Vec<ShareRow>,
    pub diagnostics: Diagnostics,
}

impl ActivityReport {
    pub fn to_csv(&self) -> String {
        share_csv("category", &self.rows)
    }

    pub fn fraction(&self, agent: &str, category: ActivityCategory) -> f64 {
        self.rows
            .iter()
            .find(|r| r.agent == agent && r.key == category.as_str())
            .map_or(0.0, |r| r.fraction)
    }

    /// Share of all agent-ticks spent in `category`.
    pub fn overall(&self, category: ActivityCategory) -> f64 {
        let total: u64 = self.rows.iter().map(|r| r.ticks).sum();
        let here: u64 = self.rows.iter().filter(|r| r.key == category.as_str()).map(|r| r.ticks).sum();
        frac(here, total)
    }
}

/// Each tick of each agent goes to exactly one category: the category of
/// the action occupying it, or `other` when idle. Failed actions occupy
/// their (one-tick) duration too.
pub fn activity_report(log: &EventLog) -> ActivityReport {
    let mut diagnostics = base_diagnostics(log);
    let end = log.header.end_tick;
    let mut timeline: BTreeMap<&str, Vec<ActivityCategory>> = log
        .header
        .agents
        .iter()
        .map(|a| (a.as_str(), vec![ActivityCategory::Other; end as usize]))
        .collect();
    let mut verbs: BTreeMap<&str, &str> = BTreeMap::new();
    for e in &log.events {
        match &e.kind {
            EventKind::Action { verb, .. } => {
                verbs.insert(&e.agent, verb);
            }
            EventKind::Outcome { duration_ticks, .. } => {
                let verb = verbs.remove(e.agent.as_str()).unwrap_or("");
                let cat = verb_category(verb).unwrap_or_else(|| {
                    diagnostics.push(format!("tick {}: unknown verb `{verb}` counted as other", e.tick));
                    ActivityCategory::Other
                });
                let Some(line) = timeline.get_mut(e.agent.as_str()) else { continue };
                let from = e.tick.max(1);
                let to = (e.tick + *duration_ticks as u64).min(end + 1);
                for t in from..to {
                    line[(t - 1) as usize] = cat;
                }
            }
            _ => {}
        }
    }
    let mut rows = Vec::new();
    for agent in &log.header.agents {
        let line = &timeline[agent.as_str()];
        for c in ActivityCategory::ALL {
            let n = line.iter().filter(|&&x| x == c).count() as u64;
            rows.push(ShareRow { agent: agent.clone(), key: c.as_str().into(), ticks: n, fraction: frac(n, end) });
        }
    }
    ActivityReport { rows, diagnostics }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellbeingRow {
    pub agent: String,
    pub samples: u64,
    pub optimal_ticks: u64,
    pub optimal_fraction: f64,
    pub unmet_ticks: BTreeMap<Need, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellbeingReport {
    pub agents: Vec<WellbeingRow>,
    pub aggregate_optimal_fraction: f64,
    pub diagnostics: Diagnostics,
}

impl WellbeingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("agent,samples,optimal_ticks,optimal_fraction\n");
        for r in &self.agents {
            let _ = writeln!(s, "{},{},{},{:.6}", r.agent, r.samples, r.optimal_ticks, r.optimal_fraction);
        }
        let samples: u64 = self.agents.iter().map(|r| r.samples).sum();
        let optimal: u64 = self.agents.iter().map(|r| r.optimal_ticks).sum();
        let _ = writeln!(s, "all,{samples},{optimal},{:.6}", self.aggregate_optimal_fraction);
        s
    }

    /// Unmet-need ticks per agent and need. A tick with two unmet needs
    /// counts once for each.
    pub fn suboptimal_rows(&self) -> Vec<ShareRow> {
        let mut rows = Vec::new();
        for r in &self.agents {
            for n in Need::PRIORITY {
                let t = r.unmet_ticks.get(&n).copied().unwrap_or(0);
                rows.push(ShareRow { agent: r.agent.clone(), key: n.as_str().into(), ticks: t, fraction: frac(t, r.samples) });
            }
        }
        rows
    }

    pub fn suboptimal_csv(&self) -> String {
        share_csv("need", &self.suboptimal_rows())
    }

    pub fn row(&self, agent: &str) -> Option<&WellbeingRow> {
        self.agents.iter().find(|r| r.agent == agent)
    }
}

pub fn wellbeing_report(log: &EventLog) -> WellbeingReport {
    let mut diagnostics = base_diagnostics(log);
    let mut rows: BTreeMap<&str, WellbeingRow> = log
        .header
        .agents
        .iter()
        .map(|a| {
            (
                a.as_str(),
                WellbeingRow { agent: a.clone(), samples: 0, optimal_ticks: 0, optimal_fraction: 0.0, unmet_ticks: BTreeMap::new() },
            )
        })
        .collect();
    for e in &log.events {
        if let EventKind::NeedsSample { unmet, .. } = &e.kind {
            let Some(r) = rows.get_mut(e.agent.as_str()) else { continue };
            r.samples += 1;
            if unmet.is_empty() {
                r.optimal_ticks += 1;
            }
            for n in unmet {
                *r.unmet_ticks.entry(*n).or_default() += 1;
            }
        }
    }
    let mut agents = Vec::new();
    for a in &log.header.agents {
        let mut r = rows.remove(a.as_str()).expect("row per agent");
        if r.samples != log.header.end_tick {
            diagnostics.push(format!("{a}: {} samples for {} ticks", r.samples, log.header.end_tick));
        }
        r.optimal_fraction = frac(r.optimal_ticks, r.samples);
        agents.push(r);
    }
    let samples: u64 = agents.iter().map(|r| r.samples).sum();
    let optimal: u64 = agents.iter().map(|r| r.optimal_ticks).sum();
    WellbeingReport { agents, aggregate_optimal_fraction: frac(optimal, samples), diagnostics }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstDrink {
    pub agent: String,
    pub tick: Option<u64>,
    pub beverage: Option<String>,
}

/// Drinkers of water (X) and coffee (Y), and the minute of the last
/// agent's first successful drink (Z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceStressReport {
    pub water: u32,
    pub coffee: u32,
    /// `None` when some agent never drank.
    pub completion_min: Option<u64>,
    pub agents: Vec<FirstDrink>,
}

impl ResourceStressReport {
    /// "X/Y/Z", with Z as `incomplete` when someone never drank.
    pub fn summary(&self) -> String {
        match self.completion_min {
            Some(z) => format!("{}/{}/{z}", self.water, self.coffee),
            None => format!("{}/{}/incomplete", self.water, self.coffee),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("agent,first_drink_tick,beverage\n");
        for a in &self.agents {
            let t = a.tick.map_or("incomplete".to_string(), |t| t.to_string());
            let _ = writeln!(s, "{},{t},{}", a.agent, a.beverage.as_deref().unwrap_or(""));
        }
        let _ = writeln!(s, "# X/Y/Z = {}", self.summary());
        s
    }
}

pub fn resource_stress_report(log: &EventLog) -> ResourceStressReport {
    let mut first: BTreeMap<&str, (u64, Option<String>)> = BTreeMap::new();
    let mut verbs: BTreeMap<&str, &str> = BTreeMap::new();
    for e in &log.events {
        match &e.kind {
            EventKind::Action { verb, .. } => {
                verbs.insert(&e.agent, verb);
            }
            EventKind::Outcome { success, diff, .. } => {
                let verb = verbs.remove(e.agent.as_str());
                if !*success || verb != Some("drink") || first.contains_key(e.agent.as_str()) {
                    continue;
                }
                let beverage = diff
                    .iter()
                    .find(|c| c.attribute == "contains" && c.old != Value::Null)
                    .and_then(|c| c.old.as_str().map(str::to_string));
                first.insert(&e.agent, (e.tick, beverage));
            }
            _ => {}
        }
    }
    let agents: Vec<FirstDrink> = log
        .header
        .agents
        .iter()
        .map(|a| {
            let f = first.get(a.as_str());
            FirstDrink { agent: a.clone(), tick: f.map(|x| x.0), beverage: f.and_then(|x| x.1.clone()) }
        })
        .collect();
    let count = |b: &str| agents.iter().filter(|a| a.beverage.as_deref() == Some(b)).count() as u32;
    let completion_min = if agents.iter().all(|a| a.tick.is_some()) {
        Some(agents.iter().filter_map(|a| a.tick).max().unwrap_or(0))
    } else {
        None
    };
    ResourceStressReport { water: count("water"), coffee: count("coffee"), completion_min, agents }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Occupancy,
    Activity,
    Wellbeing,
    Suboptimal,
    Resource,
}

impl std::str::FromStr for ReportKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "occupancy" => ReportKind::Occupancy,
            "activity" => ReportKind::Activity,
            "wellbeing" => ReportKind::Wellbeing,
            "suboptimal" => ReportKind::Suboptimal,
            "resource" => ReportKind::Resource,
            _ => return Err(format!("unknown report kind `{s}`")),
        })
    }
}

impl ReportKind {
    pub const ALL: [ReportKind; 5] = [
        ReportKind::Occupancy,
        ReportKind::Activity,
        ReportKind::Wellbeing,
        ReportKind::Suboptimal,
        ReportKind::Resource,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportKind::Occupancy => "occupancy.csv",
            ReportKind::Activity => "activity.csv",
            ReportKind::Wellbeing => "wellbeing.csv",
            ReportKind::Suboptimal => "suboptimal.csv",
            ReportKind::Resource => "resource.csv",
        }
    }
}

/// CSV text of one report plus its diagnostics.
pub fn report_csv(log: &EventLog, kind: ReportKind) -> (String, Diagnostics) {
    match kind {
        ReportKind::Occupancy => {
            let r = occupancy_report(log);
            (r.to_csv(), r.diagnostics)
        }
        ReportKind::Activity => {
            let r = activity_report(log);
            (r.to_csv(), r.diagnostics)
        }
        ReportKind::Wellbeing => {
            let r = wellbeing_report(log);
            (r.to_csv(), r.diagnostics)
        }
        ReportKind::Suboptimal => {
            let r = wellbeing_report(log);
            (r.suboptimal_csv(), r.diagnostics)
        }
        ReportKind::Resource => (resource_stress_report(log).to_csv(), base_diagnostics(log)),
    }
}
