use std::fmt::Write as _;

use serde::Serialize;

use crate::catalog::{ObjectType, Role};
use crate::conversation::Utterance;
use crate::needs::NeedsState;
use crate::world::{Booking, ObjectEntity, WorldState};

/// An object as seen by an agent, with the type of the receptacle it sits in.
#[derive(Debug, Clone, PartialEq)]
pub struct SeenObject {
    pub entity: ObjectEntity,
    pub receptacle_type: Option<ObjectType>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeerView {
    pub name: String,
    pub role: Role,
    /// Command the peer issued here on this or the previous tick.
    pub last_action: Option<String>,
    pub in_conversation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub id: String,
    pub participants: Vec<String>,
    pub recent: Vec<Utterance>,
}

/// What one agent perceives at the start of a tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub tick: u64,
    pub agent: String,
    pub location: String,
    /// Reachable objects at the location, excluding the agent's own inventory.
    pub objects: Vec<SeenObject>,
    pub inventory: Vec<SeenObject>,
    pub peers: Vec<PeerView>,
    pub sessions: Vec<SessionView>,
    pub needs: NeedsState,
    pub exits: Vec<(String, u32)>,
    /// Booking list, shown only when a usable terminal is at hand.
    pub bookings: Option<Vec<Booking>>,
}

const RECENT_UTTERANCES: usize = 6;

/// Projects the world onto what `agent` can see. Panics if the agent does not exist.
pub fn perceive(world: &WorldState, agent: &str) -> Observation {
    let a = world.agent(agent).expect("perceive: unknown agent");
    let seen = |o: &ObjectEntity| SeenObject {
        entity: o.clone(),
        receptacle_type: o.receptacle.as_ref().and_then(|r| world.objects.get(r)).map(|r| r.otype),
    };
    let mut objects = Vec::new();
    let mut terminal = false;
    for o in world.accessible_objects(a) {
        if o.holder.as_deref() == Some(agent) {
            continue;
        }
        terminal |= matches!(o.otype, ObjectType::TouchScreen | ObjectType::Computer) && o.is_working() && o.is_powered();
        objects.push(seen(o));
    }
    let inventory = a.inventory.iter().filter_map(|n| world.objects.get(n)).map(seen).collect();
    let here = &world.locations[&a.location];
    let peers = here
        .agents
        .iter()
        .filter(|n| n.as_str() != agent)
        .map(|n| {
            let p = &world.agents[n];
            let last_action = world
                .last_actions
                .get(n)
                .filter(|l| l.location == a.location && l.tick + 1 >= world.tick)
                .map(|l| l.command.clone());
            PeerView { name: n.clone(), role: p.profile.role, last_action, in_conversation: p.conversation.is_some() }
        })
        .collect();
    let sessions = world
        .conversations
        .values()
        .filter(|s| s.location == a.location)
        .map(|s| SessionView {
            id: s.id.clone(),
            participants: s.participants.iter().cloned().collect(),
            recent: s.transcript.iter().rev().take(RECENT_UTTERANCES).rev().cloned().collect(),
        })
        .collect();
    Observation {
        tick: world.tick,
        agent: agent.to_string(),
        location: a.location.clone(),
        objects,
        inventory,
        peers,
        sessions,
        needs: a.needs,
        exits: here.connections.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        bookings: terminal.then(|| world.bookings.clone()),
    }
}

fn describe_object(o: &SeenObject) -> String {
    let e = &o.entity;
    let mut s = format!("{} ({})", e.name, e.otype);
    if let Some(r) = &e.receptacle {
        let _ = write!(s, " on/in {r}");
    }
    let mut flags: Vec<String> = e
        .state
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "closable" | "fixed" | "temperature"))
        .map(|(k, v)| format!("{k}={}", crate::evaluation::show(v)))
        .collect();
    if e.otype.is_food() {
        flags.push(format!("temperature={}", e.temperature()));
    }
    if !flags.is_empty() {
        let _ = write!(s, " [{}]", flags.join(", "));
    }
    s
}

impl Observation {
    pub fn render(&self) -> String {
        let mut s = format!("Time: minute {}. You are in {}.\n", self.tick, self.location);
        let exits: Vec<String> = self.exits.iter().map(|(n, d)| format!("{n} ({d} min)")).collect();
        let _ = writeln!(s, "Exits: {}.", exits.join(", "));
        if self.objects.is_empty() {
            s.push_str("You see nothing of note.\n");
        } else {
            s.push_str("You see:\n");
            for o in &self.objects {
                let _ = writeln!(s, "- {}", describe_object(o));
            }
        }
        if self.inventory.is_empty() {
            s.push_str("Your hands are empty.\n");
        } else {
            let inv: Vec<String> = self.inventory.iter().map(describe_object).collect();
            let _ = writeln!(s, "You are holding: {}.", inv.join("; "));
        }
        for p in &self.peers {
            match &p.last_action {
                Some(c) => {
                    let _ = writeln!(s, "{} ({}) is here; last action: {c}.", p.name, p.role);
                }
                None => {
                    let _ = writeln!(s, "{} ({}) is here.", p.name, p.role);
                }
            }
        }
        for c in &self.sessions {
            let _ = writeln!(s, "Conversation {} between {}:", c.id, c.participants.join(", "));
            for u in &c.recent {
                let _ = writeln!(s, "  {}: {}", u.speaker, u.text);
            }
        }
        if let Some(b) = &self.bookings {
            if b.is_empty() {
                s.push_str("The booking screen shows no bookings.\n");
            } else {
                for x in b {
                    let _ = writeln!(s, "Booked: {} for \"{}\" from {} to {}.", x.room, x.name, x.start, x.end);
                }
            }
        }
        let n = &self.needs;
        let _ = writeln!(
            s,
            "Your needs: fullness {:.1}, hydration {:.1}, energy {:.1}, social {:.1}, bladder {:.1}.",
            n.fullness, n.hydration, n.energy, n.social_fulfillment, n.bladder
        );
        s
    }
}
