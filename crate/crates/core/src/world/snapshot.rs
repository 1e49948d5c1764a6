//! Serialized world snapshots and attribute-level diffs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::ObjectType;
use crate::conversation::ConversationSession;
use crate::error::WorldError;
use crate::needs::NeedsState;
use crate::world::{
    AgentProfile, AgentState, Booking, Knowledge, LastAction, Location, ObjectEntity, WorldSettings,
    WorldState,
};

/// One changed attribute. Absent values are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrChange {
    pub entity: String,
    pub attribute: String,
    pub old: Value,
    pub new: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotReceptacle {
    pub name: String,
    pub location: String,
    pub rtype: ObjectType,
    pub weight_kg: f64,
    pub state: BTreeMap<String, Value>,
    pub capacity: u32,
    pub contents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotObject {
    pub name: String,
    pub otype: ObjectType,
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receptacle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<String>,
    pub weight_kg: f64,
    pub state: BTreeMap<String, Value>,
    pub carryable: bool,
    pub requires_receptacle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotAgent {
    #[serde(flatten)]
    pub profile: AgentProfile,
    pub location: String,
    #[serde(flatten)]
    pub needs: NeedsState,
    pub inventory: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conversation: Option<String>,
    pub knowledge: BTreeSet<Knowledge>,
}

/// Scenario-shaped view of a world plus runtime fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub locations: Vec<String>,
    pub location_distances: BTreeMap<String, BTreeMap<String, u32>>,
    pub receptacles: Vec<SnapshotReceptacle>,
    pub objects: Vec<SnapshotObject>,
    pub agents: Vec<SnapshotAgent>,
    pub conversations: Vec<ConversationSession>,
    pub next_session: u64,
    pub bookings: Vec<Booking>,
    pub busy_until: BTreeMap<String, u64>,
    pub last_actions: BTreeMap<String, LastAction>,
    pub settings: WorldSettings,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        serde_json::from_str(text).map_err(|e| WorldError::Snapshot(e.to_string()))
    }
}

impl WorldState {
    pub fn to_snapshot(&self) -> Snapshot {
        let mut receptacles = Vec::new();
        let mut objects = Vec::new();
        for o in self.objects.values() {
            if o.is_receptacle() {
                receptacles.push(SnapshotReceptacle {
                    name: o.name.clone(),
                    location: o.location.clone(),
                    rtype: o.otype,
                    weight_kg: o.weight_kg,
                    state: o.state.clone(),
                    capacity: o.capacity,
                    contents: o.contents.clone(),
                });
            } else {
                objects.push(SnapshotObject {
                    name: o.name.clone(),
                    otype: o.otype,
                    location: o.location.clone(),
                    receptacle: o.receptacle.clone(),
                    holder: o.holder.clone(),
                    weight_kg: o.weight_kg,
                    state: o.state.clone(),
                    carryable: o.carryable,
                    requires_receptacle: o.requires_receptacle,
                });
            }
        }
        Snapshot {
            tick: self.tick,
            locations: self.location_order.clone(),
            location_distances: self
                .locations
                .iter()
                .map(|(n, l)| (n.clone(), l.connections.clone()))
                .collect(),
            receptacles,
            objects,
            agents: self
                .agent_order
                .iter()
                .map(|n| {
                    let a = &self.agents[n];
                    SnapshotAgent {
                        profile: a.profile.clone(),
                        location: a.location.clone(),
                        needs: a.needs,
                        inventory: a.inventory.clone(),
                        conversation: a.conversation.clone(),
                        knowledge: a.knowledge.clone(),
                    }
                })
                .collect(),
            conversations: self.conversations.values().cloned().collect(),
            next_session: self.next_session,
            bookings: self.bookings.clone(),
            busy_until: self.busy_until.clone(),
            last_actions: self.last_actions.clone(),
            settings: self.settings.clone(),
        }
    }

    /// Rebuilds a world from a snapshot, rejecting structurally broken ones.
    pub fn from_snapshot(s: &Snapshot) -> Result<WorldState, WorldError> {
        let bad = |m: String| WorldError::Snapshot(m);
        let mut locations = BTreeMap::new();
        for name in &s.locations {
            locations.insert(
                name.clone(),
                Location {
                    name: name.clone(),
                    connections: s.location_distances.get(name).cloned().unwrap_or_default(),
                    agents: BTreeSet::new(),
                    objects: BTreeSet::new(),
                },
            );
        }
        for from in s.location_distances.keys() {
            if !locations.contains_key(from) {
                return Err(bad(format!("distance table names unknown location {from}")));
            }
        }
        let mut objects = BTreeMap::new();
        for r in &s.receptacles {
            objects.insert(
                r.name.clone(),
                ObjectEntity {
                    name: r.name.clone(),
                    otype: r.rtype,
                    location: r.location.clone(),
                    receptacle: None,
                    holder: None,
                    weight_kg: r.weight_kg,
                    carryable: false,
                    requires_receptacle: false,
                    state: r.state.clone(),
                    contents: r.contents.clone(),
                    capacity: r.capacity,
                },
            );
        }
        for o in &s.objects {
            let prev = objects.insert(
                o.name.clone(),
                ObjectEntity {
                    name: o.name.clone(),
                    otype: o.otype,
                    location: o.location.clone(),
                    receptacle: o.receptacle.clone(),
                    holder: o.holder.clone(),
                    weight_kg: o.weight_kg,
                    carryable: o.carryable,
                    requires_receptacle: o.requires_receptacle,
                    state: o.state.clone(),
                    contents: Vec::new(),
                    capacity: 0,
                },
            );
            if prev.is_some() {
                return Err(bad(format!("duplicate entity {}", o.name)));
            }
        }
        let mut agents = BTreeMap::new();
        for a in &s.agents {
            agents.insert(
                a.profile.name.clone(),
                AgentState {
                    profile: a.profile.clone(),
                    location: a.location.clone(),
                    needs: a.needs,
                    inventory: a.inventory.clone(),
                    conversation: a.conversation.clone(),
                    knowledge: a.knowledge.clone(),
                },
            );
        }
        let mut w = WorldState {
            tick: s.tick,
            location_order: s.locations.clone(),
            locations,
            objects,
            agent_order: s.agents.iter().map(|a| a.profile.name.clone()).collect(),
            agents,
            conversations: s.conversations.iter().map(|c| (c.id.clone(), c.clone())).collect(),
            next_session: s.next_session,
            bookings: s.bookings.clone(),
            busy_until: s.busy_until.clone(),
            last_actions: s.last_actions.clone(),
            settings: s.settings.clone(),
        };
        w.reindex();
        let errs = w.check_invariants();
        if !errs.is_empty() {
            return Err(bad(errs.join("; ")));
        }
        Ok(w)
    }

    pub fn snapshot_json(&self) -> String {
        self.to_snapshot().to_json()
    }

    /// Flattens every diffable attribute. The clock and last-action
    /// bookkeeping are excluded.
    pub(crate) fn attributes(&self) -> BTreeMap<(String, String), Value> {
        let mut m = BTreeMap::new();
        let mut put = |e: &str, k: &str, v: Value| {
            m.insert((e.to_string(), k.to_string()), v);
        };
        for (n, o) in &self.objects {
            put(n, "location", Value::from(o.location.clone()));
            if let Some(r) = &o.receptacle {
                put(n, "receptacle", Value::from(r.clone()));
            }
            if let Some(h) = &o.holder {
                put(n, "holder", Value::from(h.clone()));
            }
            if o.is_receptacle() {
                put(n, "contents", Value::from(o.contents.clone()));
            }
            for (k, v) in &o.state {
                put(n, k, v.clone());
            }
        }
        for (n, t) in &self.busy_until {
            put(n, "busy_until", Value::from(*t));
        }
        for (n, a) in &self.agents {
            put(n, "location", Value::from(a.location.clone()));
            put(n, "inventory", Value::from(a.inventory.clone()));
            if let Some(c) = &a.conversation {
                put(n, "conversation", Value::from(c.clone()));
            }
            put(n, "fullness", Value::from(a.needs.fullness));
            put(n, "hydration", Value::from(a.needs.hydration));
            put(n, "energy", Value::from(a.needs.energy));
            put(n, "social_fulfillment", Value::from(a.needs.social_fulfillment));
            put(n, "bladder", Value::from(a.needs.bladder));
            let k: Vec<String> = a.knowledge.iter().map(Knowledge::describe).collect();
            put(n, "knowledge", Value::from(k));
        }
        for (id, s) in &self.conversations {
            put(id, "location", Value::from(s.location.clone()));
            let p: Vec<String> = s.participants.iter().cloned().collect();
            put(id, "participants", Value::from(p));
            put(id, "transcript_len", Value::from(s.transcript.len()));
        }
        for (i, b) in self.bookings.iter().enumerate() {
            put(&format!("booking_{i}"), "record", serde_json::to_value(b).expect("booking"));
        }
        m
    }
}

pub(crate) fn diff_maps(
    a: &BTreeMap<(String, String), Value>,
    b: &BTreeMap<(String, String), Value>,
) -> Vec<AttrChange> {
    let keys: BTreeSet<&(String, String)> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .filter_map(|k| {
            let old = a.get(k).cloned().unwrap_or(Value::Null);
            let new = b.get(k).cloned().unwrap_or(Value::Null);
            (old != new).then(|| AttrChange {
                entity: k.0.clone(),
                attribute: k.1.clone(),
                old,
                new,
            })
        })
        .collect()
}

/// Attribute-level changes from `a` to `b`, ordered by (entity, attribute).
pub fn diff(a: &WorldState, b: &WorldState) -> Vec<AttrChange> {
    diff_maps(&a.attributes(), &b.attributes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::testutil::small_world;

    #[test]
    fn diff_of_identical_states_is_empty() {
        let w = small_world();
        assert!(diff(&w, &w).is_empty());
    }

    #[test]
    fn snapshot_round_trips_byte_identically() {
        let mut w = small_world();
        w.dispatch("irene", "pick_up cup_1");
        w.dispatch("ryan", "go_to kitchen");
        w.tick = 7;
        let text = w.snapshot_json();
        let back = WorldState::from_snapshot(&Snapshot::from_json(&text).unwrap()).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.snapshot_json(), text);
    }

    #[test]
    fn diff_reports_moves() {
        let a = small_world();
        let mut b = a.clone();
        b.dispatch("irene", "go_to meeting_room1");
        let d = diff(&a, &b);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].entity, "irene");
        assert_eq!(d[0].old, Value::from("kitchen"));
    }

    #[test]
    fn broken_snapshot_is_rejected() {
        let w = small_world();
        let mut s = w.to_snapshot();
        s.objects[0].location = "attic".into();
        assert!(WorldState::from_snapshot(&s).is_err());
    }
}
