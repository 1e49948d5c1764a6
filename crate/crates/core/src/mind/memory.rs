use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::Value;

use crate::catalog::ObjectType;
use crate::evaluation::{condition_score, GoalSpec, Observable};
use crate::needs::NeedsState;
use crate::world::{ActionOutcome, Booking, Knowledge, ObjectEntity};

use super::perception::Observation;

/// Episodic log bound.
pub const EPISODE_CAPACITY: usize = 200;

/// Last-known view of one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticEntry {
    pub entity: ObjectEntity,
    pub receptacle_type: Option<ObjectType>,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionProgress {
    pub task: String,
    pub condition: usize,
    pub satisfied: bool,
    /// Tick the current verdict was first reached.
    pub since: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub tick: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStore {
    pub agent: String,
    pub tick: u64,
    pub semantic: BTreeMap<String, SemanticEntry>,
    pub progress: Vec<ConditionProgress>,
    pub episodes: VecDeque<Episode>,
    pub knowledge: BTreeSet<Knowledge>,
    pub needs: NeedsState,
    pub inventory: Vec<String>,
    pub bookings: Vec<Booking>,
    pub location: String,
}

impl MemoryStore {
    pub fn new(agent: &str, knowledge: BTreeSet<Knowledge>) -> Self {
        Self {
            agent: agent.to_string(),
            tick: 0,
            semantic: BTreeMap::new(),
            progress: Vec::new(),
            episodes: VecDeque::new(),
            knowledge,
            needs: NeedsState::default(),
            inventory: Vec::new(),
            bookings: Vec::new(),
            location: String::new(),
        }
    }

    pub fn remember(&mut self, tick: u64, text: impl Into<String>) {
        if self.episodes.len() == EPISODE_CAPACITY {
            self.episodes.pop_front();
        }
        self.episodes.push_back(Episode { tick, text: text.into() });
    }

    fn remembers(&self, tick: u64, text: &str) -> bool {
        self.episodes.iter().rev().take_while(|e| e.tick + 1 >= tick).any(|e| e.text == text)
    }

    /// Whether every known goal condition is satisfied.
    pub fn task_done(&self, task: &str) -> bool {
        let mut any = false;
        for p in self.progress.iter().filter(|p| p.task == task) {
            any = true;
            if !p.satisfied {
                return false;
            }
        }
        any
    }

    /// Updates the agent's records after dispatching one of its commands.
    pub fn record_outcome(&mut self, tick: u64, command: &str, outcome: &ActionOutcome) {
        let verdict = if outcome.success { "ok" } else { "failed" };
        self.remember(tick, format!("I did `{command}` ({verdict}): {}", outcome.message));
        for c in &outcome.state_diff {
            if c.attribute == "record" {
                if let Ok(b) = serde_json::from_value::<Booking>(c.new.clone()) {
                    if !self.bookings.contains(&b) {
                        self.bookings.push(b);
                    }
                }
            }
        }
    }
}

/// Folds one observation into memory: upserts seen entities, drops entries
/// the observation contradicts, logs new peer actions and utterances, and
/// re-evaluates goal progress against the updated map.
pub fn update_memory(memory: &mut MemoryStore, obs: &Observation, goals: Option<&GoalSpec>) {
    memory.tick = obs.tick;
    memory.needs = obs.needs;
    memory.location = obs.location.clone();
    memory.inventory = obs.inventory.iter().map(|o| o.entity.name.clone()).collect();

    let seen: BTreeSet<&str> = obs.objects.iter().chain(&obs.inventory).map(|o| o.entity.name.as_str()).collect();
    let open_here: BTreeSet<&str> = obs
        .objects
        .iter()
        .filter(|o| o.entity.is_receptacle() && o.entity.is_open())
        .map(|o| o.entity.name.as_str())
        .collect();
    let stale: Vec<String> = memory
        .semantic
        .iter()
        .filter(|(n, e)| {
            e.entity.location == obs.location
                && !seen.contains(n.as_str())
                && match &e.entity.receptacle {
                    None => true,
                    Some(r) => open_here.contains(r.as_str()),
                }
        })
        .map(|(n, _)| n.clone())
        .collect();
    for n in stale {
        memory.semantic.remove(&n);
    }
    for o in obs.objects.iter().chain(&obs.inventory) {
        let changed = memory
            .semantic
            .get(&o.entity.name)
            .is_none_or(|e| e.entity != o.entity || e.receptacle_type != o.receptacle_type);
        if changed {
            memory.semantic.insert(
                o.entity.name.clone(),
                SemanticEntry { entity: o.entity.clone(), receptacle_type: o.receptacle_type, tick: obs.tick },
            );
        }
    }
    if let Some(b) = &obs.bookings {
        memory.bookings = b.clone();
    }
    for p in &obs.peers {
        if let Some(c) = &p.last_action {
            let text = format!("{} did `{c}` in {}", p.name, obs.location);
            if !memory.remembers(obs.tick, &text) {
                memory.remember(obs.tick, text);
            }
        }
    }
    for s in &obs.sessions {
        for u in &s.recent {
            let text = format!("{} said in {}: {}", u.speaker, s.id, u.text);
            if !memory.episodes.iter().any(|e| e.tick == u.tick && e.text == text) {
                memory.episodes.push_back(Episode { tick: u.tick, text });
                if memory.episodes.len() > EPISODE_CAPACITY {
                    memory.episodes.pop_front();
                }
            }
        }
    }
    if let Some(g) = goals {
        refresh_progress(memory, g);
    }
}

fn refresh_progress(memory: &mut MemoryStore, goals: &GoalSpec) {
    let mut next = Vec::new();
    for t in &goals.tasks {
        for (i, c) in t.conditions.iter().enumerate() {
            let satisfied = condition_score(&*memory, c).is_met();
            let since = memory
                .progress
                .iter()
                .find(|p| p.task == t.id && p.condition == i && p.satisfied == satisfied)
                .map_or(memory.tick, |p| p.since);
            next.push(ConditionProgress { task: t.id.clone(), condition: i, satisfied, since });
        }
    }
    memory.progress = next;
}

impl Observable for MemoryStore {
    fn instances(&self, otype: ObjectType) -> Vec<String> {
        self.semantic.values().filter(|e| e.entity.otype == otype).map(|e| e.entity.name.clone()).collect()
    }

    fn otype_of(&self, name: &str) -> Option<ObjectType> {
        self.semantic.get(name).map(|e| e.entity.otype)
    }

    fn attribute(&self, name: &str, key: &str) -> Value {
        self.semantic.get(name).map_or(Value::Null, |e| e.entity.attribute(key, e.receptacle_type))
    }

    fn known_bookings(&self) -> Vec<Booking> {
        self.bookings.clone()
    }
}
