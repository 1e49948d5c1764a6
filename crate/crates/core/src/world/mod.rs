//! World state and generic state transitions.

mod admissible;
mod rules;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{ObjectType, Role};
use crate::conversation::ConversationSession;
use crate::error::WorldError;
use crate::needs::{NeedsModel, NeedsState};

pub use rules::{event_from_token, event_token};
pub use snapshot::{diff, AttrChange, Snapshot, SnapshotAgent, SnapshotObject, SnapshotReceptacle};

/// Most objects an agent can hold at once.
pub const HANDS: usize = 2;
/// Food at or above this temperature counts as heated.
pub const HEATED_AT: f64 = 60.0;
pub const DEFAULT_TEMPERATURE: f64 = 20.0;
/// Goal attributes computed from structure rather than stored in `state`.
pub const DERIVED_ATTRIBUTES: &[&str] = &["location", "receptacle", "receptacle_type", "holder", "is_heated"];

#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub name: String,
    /// Neighbour name to distance.
    pub connections: BTreeMap<String, u32>,
    pub agents: BTreeSet<String>,
    pub objects: BTreeSet<String>,
}

/// An object or receptacle. Receptacles carry `contents` and a positive capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectEntity {
    pub name: String,
    pub otype: ObjectType,
    pub location: String,
    pub receptacle: Option<String>,
    pub holder: Option<String>,
    pub weight_kg: f64,
    pub carryable: bool,
    pub requires_receptacle: bool,
    pub state: BTreeMap<String, Value>,
    pub contents: Vec<String>,
    pub capacity: u32,
}

impl ObjectEntity {
    pub fn is_receptacle(&self) -> bool {
        self.otype.is_receptacle()
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        self.state.get(key).and_then(Value::as_bool)
    }

    pub fn is_closable(&self) -> bool {
        self.flag("closable").unwrap_or(false)
    }

    /// Non-closable receptacles are permanently open.
    pub fn is_open(&self) -> bool {
        !self.is_closable() || self.flag("is_open").unwrap_or(false)
    }

    pub fn is_working(&self) -> bool {
        self.flag("is_working").unwrap_or(true)
    }

    pub fn is_clean(&self) -> bool {
        self.flag("is_clean").unwrap_or(true)
    }

    pub fn is_fixed(&self) -> bool {
        self.flag("fixed").unwrap_or(false)
    }

    /// Devices without an on/off switch count as on.
    pub fn is_powered(&self) -> bool {
        self.flag("is_turned_on").unwrap_or(true)
    }

    pub fn temperature(&self) -> f64 {
        self.state
            .get("temperature")
            .and_then(Value::as_f64)
            .unwrap_or(DEFAULT_TEMPERATURE)
    }

    pub fn is_heated(&self) -> bool {
        self.otype.is_food() && self.temperature() >= HEATED_AT
    }

    pub fn contains(&self) -> Option<&str> {
        self.state.get("contains").and_then(Value::as_str)
    }

    pub fn has_room(&self) -> bool {
        self.is_receptacle() && (self.contents.len() as u32) < self.capacity
    }

    /// Besides raw state keys this resolves `location`, `receptacle`,
    /// `receptacle_type`, `holder`, `is_heated` and the defaulted
    /// `temperature` / `is_open`. Absent values are `null`.
    pub fn attribute(&self, key: &str, receptacle_type: Option<ObjectType>) -> Value {
        match key {
            "location" => Value::from(self.location.clone()),
            "receptacle" => self.receptacle.clone().map_or(Value::Null, Value::from),
            "receptacle_type" => receptacle_type.map_or(Value::Null, |t| Value::from(t.as_str())),
            "holder" => self.holder.clone().map_or(Value::Null, Value::from),
            "is_heated" => Value::from(self.is_heated()),
            "temperature" => Value::from(self.temperature()),
            "is_open" if self.is_receptacle() => Value::from(self.is_open()),
            other => self.state.get(other).cloned().unwrap_or(Value::Null),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub name: String,
    pub gender: String,
    pub role: Role,
    pub strength_kg: f64,
    pub internal_profile: String,
    pub appearance: String,
    /// Skill name to duration multiplier.
    pub skills: BTreeMap<String, f64>,
    /// Beverage preference used by scripted occupants ("water" or "coffee").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preference: Option<String>,
}

/// A meeting-room booking request an agent knows about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventRequest {
    pub name: String,
    pub start: String,
    pub end: String,
    pub room: String,
}

/// A private fact held by an agent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knowledge {
    BookingPassword(String),
    EventRequest(EventRequest),
}

impl Knowledge {
    pub fn describe(&self) -> String {
        match self {
            Knowledge::BookingPassword(p) => format!("the meeting-room booking password is {p}"),
            Knowledge::EventRequest(e) => format!(
                "event \"{}\" must be booked in {} from {} to {}",
                e.name, e.room, e.start, e.end
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub profile: AgentProfile,
    pub location: String,
    pub needs: NeedsState,
    pub inventory: Vec<String>,
    pub conversation: Option<String>,
    pub knowledge: BTreeSet<Knowledge>,
}

impl AgentState {
    pub fn name(&self) -> &str {
        &self.profile.name
    }

    pub fn password(&self) -> Option<&str> {
        self.knowledge.iter().find_map(|k| match k {
            Knowledge::BookingPassword(p) => Some(p.as_str()),
            _ => None,
        })
    }

    pub fn event_requests(&self) -> impl Iterator<Item = &EventRequest> {
        self.knowledge.iter().filter_map(|k| match k {
            Knowledge::EventRequest(e) => Some(e),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Booking {
    pub name: String,
    pub start: String,
    pub end: String,
    pub room: String,
    pub booked_by: String,
    pub tick: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldSettings {
    pub booking_password: Option<String>,
    pub unlimited_locations: BTreeSet<String>,
    pub needs_model: NeedsModel,
    pub seed: u64,
}

/// Most recent command issued by an agent, visible to co-located peers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LastAction {
    pub tick: u64,
    pub location: String,
    pub command: String,
    pub success: bool,
}

/// Result of dispatching one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub success: bool,
    pub message: String,
    pub duration_ticks: u32,
    pub state_diff: Vec<AttrChange>,
}

impl ActionOutcome {
    pub(crate) fn failure(message: impl Into<String>) -> Self {
        Self {
            success: false,
            message: message.into(),
            duration_ticks: 1,
            state_diff: Vec::new(),
        }
    }
}

/// The joint valuation of every agent, object and location variable.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    pub location_order: Vec<String>,
    pub locations: BTreeMap<String, Location>,
    /// Objects and receptacles, keyed by name.
    pub objects: BTreeMap<String, ObjectEntity>,
    /// Canonical (scenario) agent order.
    pub agent_order: Vec<String>,
    pub agents: BTreeMap<String, AgentState>,
    pub conversations: BTreeMap<String, ConversationSession>,
    pub next_session: u64,
    pub bookings: Vec<Booking>,
    /// Device name to the tick it becomes free again.
    pub busy_until: BTreeMap<String, u64>,
    pub last_actions: BTreeMap<String, LastAction>,
    pub settings: WorldSettings,
}

impl WorldState {
    pub fn agent(&self, name: &str) -> Result<&AgentState, WorldError> {
        self.agents
            .get(name)
            .ok_or_else(|| WorldError::UnknownAgent(name.to_string()))
    }

    pub fn object(&self, name: &str) -> Option<&ObjectEntity> {
        self.objects.get(name)
    }

    pub fn distance(&self, from: &str, to: &str) -> Option<u32> {
        self.locations.get(from)?.connections.get(to).copied()
    }

    pub fn is_busy(&self, device: &str) -> bool {
        self.busy_until.get(device).is_some_and(|&t| t > self.tick)
    }

    /// Whether `agent` can reach `object`: held by them, or co-located, not
    /// held by anyone, and not inside a closed receptacle.
    pub fn is_accessible(&self, agent: &AgentState, object: &ObjectEntity) -> bool {
        if object.holder.as_deref() == Some(agent.name()) {
            return true;
        }
        if object.holder.is_some() || object.location != agent.location {
            return false;
        }
        match &object.receptacle {
            None => true,
            Some(r) => self.objects.get(r).is_some_and(ObjectEntity::is_open),
        }
    }

    /// Objects the agent can see and reach, including its inventory, sorted by name.
    pub fn accessible_objects<'a>(&'a self, agent: &'a AgentState) -> impl Iterator<Item = &'a ObjectEntity> + 'a {
        let here = self
            .locations
            .get(&agent.location)
            .map(|l| l.objects.iter())
            .into_iter()
            .flatten()
            .filter_map(|n| self.objects.get(n))
            .filter(move |o| self.is_accessible(agent, o));
        here
    }

    pub fn carried_weight(&self, agent: &AgentState) -> f64 {
        agent
            .inventory
            .iter()
            .filter_map(|n| self.objects.get(n))
            .map(|o| o.weight_kg)
            .sum()
    }

    /// Weight of an object together with anything stored in it.
    pub fn total_weight(&self, object: &ObjectEntity) -> f64 {
        object.weight_kg
            + object
                .contents
                .iter()
                .filter_map(|n| self.objects.get(n))
                .map(|o| o.weight_kg)
                .sum::<f64>()
    }

    /// Goal-facing attribute lookup; see [`ObjectEntity::attribute`].
    pub fn object_attribute(&self, object: &ObjectEntity, key: &str) -> Value {
        let rtype = object
            .receptacle
            .as_ref()
            .and_then(|r| self.objects.get(r))
            .map(|r| r.otype);
        object.attribute(key, rtype)
    }

    /// Rebuilds the per-location agent and object indices from entity fields.
    pub fn reindex(&mut self) {
        for loc in self.locations.values_mut() {
            loc.agents.clear();
            loc.objects.clear();
        }
        for (name, a) in &self.agents {
            if let Some(loc) = self.locations.get_mut(&a.location) {
                loc.agents.insert(name.clone());
            }
        }
        for (name, o) in &self.objects {
            if let Some(loc) = self.locations.get_mut(&o.location) {
                loc.objects.insert(name.clone());
            }
        }
    }

    /// Checks every structural invariant; returns one line per violation.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, loc) in &self.locations {
            for (other, d) in &loc.connections {
                match self.distance(other, name) {
                    Some(back) if back == *d => {}
                    _ => errs.push(format!("connection {name}->{other} is not symmetric")),
                }
            }
            for a in &loc.agents {
                if self.agents.get(a).map(|x| x.location.as_str()) != Some(name) {
                    errs.push(format!("{name} lists agent {a} located elsewhere"));
                }
            }
            for o in &loc.objects {
                if self.objects.get(o).map(|x| x.location.as_str()) != Some(name) {
                    errs.push(format!("{name} lists object {o} located elsewhere"));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for name in self.locations.keys().chain(self.objects.keys()).chain(self.agents.keys()) {
            if !seen.insert(name) {
                errs.push(format!("name {name} is not unique"));
            }
        }
        for (name, a) in &self.agents {
            match self.locations.get(&a.location) {
                None => errs.push(format!("agent {name} at unknown location {}", a.location)),
                Some(l) if !l.agents.contains(name) => {
                    errs.push(format!("agent {name} missing from {} index", a.location))
                }
                _ => {}
            }
            if a.inventory.len() > HANDS {
                errs.push(format!("agent {name} holds {} objects", a.inventory.len()));
            }
            let w = self.carried_weight(a);
            if w > a.profile.strength_kg {
                errs.push(format!("agent {name} carries {w} kg over strength"));
            }
            for item in &a.inventory {
                match self.objects.get(item) {
                    Some(o) if o.holder.as_deref() == Some(name) && o.location == a.location => {}
                    _ => errs.push(format!("inventory item {item} of {name} inconsistent")),
                }
            }
            if let Some(s) = &a.conversation {
                match self.conversations.get(s) {
                    Some(sess) if sess.participants.contains(name) => {}
                    _ => errs.push(format!("agent {name} references stale session {s}")),
                }
            }
        }
        for (name, o) in &self.objects {
            match self.locations.get(&o.location) {
                None => errs.push(format!("object {name} at unknown location {}", o.location)),
                Some(l) if !l.objects.contains(name) => {
                    errs.push(format!("object {name} missing from {} index", o.location))
                }
                _ => {}
            }
            if let Some(h) = &o.holder {
                match self.agents.get(h) {
                    Some(a) if a.inventory.contains(name) => {}
                    _ => errs.push(format!("object {name} held by {h} who does not list it")),
                }
                if o.receptacle.is_some() {
                    errs.push(format!("held object {name} still has a receptacle"));
                }
            } else if o.requires_receptacle && o.receptacle.is_none() {
                errs.push(format!("object {name} requires a receptacle but has none"));
            }
            if let Some(r) = &o.receptacle {
                match self.objects.get(r) {
                    Some(rec) if rec.is_receptacle() && rec.contents.contains(name) => {
                        if rec.location != o.location {
                            errs.push(format!("object {name} and its receptacle {r} are apart"));
                        }
                    }
                    _ => errs.push(format!("object {name} names receptacle {r} that does not hold it")),
                }
            }
            if o.is_receptacle() {
                if o.contents.len() as u32 > o.capacity {
                    errs.push(format!("receptacle {name} over capacity"));
                }
                for c in &o.contents {
                    if self.objects.get(c).and_then(|x| x.receptacle.as_deref()) != Some(name) {
                        errs.push(format!("receptacle {name} lists {c} which points elsewhere"));
                    }
                }
                if !o.is_closable() && !o.is_open() {
                    errs.push(format!("non-closable receptacle {name} reports closed"));
                }
            }
            // Containment forest: follow receptacle links, never revisiting.
            let mut cur = o.receptacle.as_deref();
            let mut hops = 0;
            while let Some(r) = cur {
                if r == name || hops > self.objects.len() {
                    errs.push(format!("object {name} transitively contains itself"));
                    break;
                }
                cur = self.objects.get(r).and_then(|x| x.receptacle.as_deref());
                hops += 1;
            }
        }
        let mut members = BTreeSet::new();
        for (id, s) in &self.conversations {
            for p in &s.participants {
                if !members.insert(p.clone()) {
                    errs.push(format!("agent {p} is in two sessions"));
                }
                match self.agents.get(p) {
                    Some(a) if a.location == s.location && a.conversation.as_deref() == Some(id) => {}
                    _ => errs.push(format!("participant {p} of {id} not consistent with session")),
                }
            }
            if s.participants.len() < 2 {
                errs.push(format!("session {id} has fewer than two participants"));
            }
        }
        errs
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::scenario::{self, ScenarioConfig};
    use crate::world::WorldState;

    pub fn small_config() -> ScenarioConfig {
        scenario::parse(scenario::fixtures::SMALL_OFFICE).unwrap()
    }

    pub fn small_world() -> WorldState {
        scenario::instantiate(&small_config()).unwrap()
    }
}
