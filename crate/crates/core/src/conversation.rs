//! Multi-party conversation sessions.
//!
//! A session lives at one location; any number of co-located agents may
//! take part, but each agent is in at most one session. Leaving the
//! location ends membership, and a session left with fewer than two
//! participants dissolves.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::needs::{apply_restoration, Restoration};
use crate::world::{ActionOutcome, Knowledge, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub tick: u64,
    pub speaker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationSession {
    pub id: String,
    pub location: String,
    pub participants: BTreeSet<String>,
    pub transcript: Vec<Utterance>,
}

pub(crate) fn check_initiate(world: &WorldState, initiator: &str, target: &str) -> Result<(), String> {
    let a = world.agent(initiator).map_err(|e| e.to_string())?;
    if a.conversation.is_some() {
        return Err(format!("{initiator} is already in a conversation."));
    }
    if initiator == target {
        return Err(format!("{initiator} cannot start a conversation with themselves."));
    }
    let Some(b) = world.agents.get(target) else {
        return Err(format!("{initiator} cannot find {target}."));
    };
    if b.location != a.location {
        return Err(format!("{initiator} cannot find {target} in the current location."));
    }
    if b.conversation.is_some() {
        return Err(format!(
            "{target} is already in a conversation; use join_chat to take part."
        ));
    }
    Ok(())
}

pub(crate) fn check_join(world: &WorldState, agent: &str, session: &str) -> Result<(), String> {
    let a = world.agent(agent).map_err(|e| e.to_string())?;
    if a.conversation.is_some() {
        return Err(format!("{agent} is already in a conversation."));
    }
    match world.conversations.get(session) {
        Some(s) if s.location == a.location => Ok(()),
        _ => Err(format!("{agent} cannot find conversation {session}.")),
    }
}

pub(crate) fn check_in_session(world: &WorldState, agent: &str, verb: &str) -> Result<String, String> {
    let a = world.agent(agent).map_err(|e| e.to_string())?;
    a.conversation
        .clone()
        .ok_or_else(|| format!("{agent} cannot perform action {verb}."))
}

pub(crate) fn apply_start(world: &mut WorldState, initiator: &str, target: &str, text: &str) -> String {
    world.next_session += 1;
    let id = format!("chat_{}", world.next_session);
    let location = world.agents[initiator].location.clone();
    world.conversations.insert(
        id.clone(),
        ConversationSession {
            id: id.clone(),
            location,
            participants: [initiator.to_string(), target.to_string()].into_iter().collect(),
            transcript: Vec::new(),
        },
    );
    for n in [initiator, target] {
        if let Some(a) = world.agents.get_mut(n) {
            a.conversation = Some(id.clone());
        }
    }
    apply_utter(world, initiator, text, false);
    id
}

pub(crate) fn apply_join(world: &mut WorldState, agent: &str, session: &str) {
    if let Some(s) = world.conversations.get_mut(session) {
        s.participants.insert(agent.to_string());
    }
    if let Some(a) = world.agents.get_mut(agent) {
        a.conversation = Some(session.to_string());
    }
}

/// Records an utterance. With `restore`, every participant regains social
/// fulfilment for the tick. A speaker who knows the booking password and
/// says it shares it with every participant.
pub(crate) fn apply_utter(world: &mut WorldState, speaker: &str, text: &str, restore: bool) {
    let Some(id) = world.agents.get(speaker).and_then(|a| a.conversation.clone()) else {
        return;
    };
    let tick = world.tick;
    let shared = world.agents[speaker]
        .password()
        .filter(|p| !p.is_empty() && text.contains(*p))
        .map(|p| Knowledge::BookingPassword(p.to_string()));
    let Some(session) = world.conversations.get_mut(&id) else {
        return;
    };
    session.transcript.push(Utterance {
        tick,
        speaker: speaker.to_string(),
        text: text.to_string(),
    });
    let participants: Vec<String> = session.participants.iter().cloned().collect();
    let model = world.settings.needs_model.clone();
    for p in participants {
        if let Some(a) = world.agents.get_mut(&p) {
            if restore {
                a.needs = apply_restoration(&a.needs, Restoration::Chat, &model);
            }
            if let Some(k) = &shared {
                a.knowledge.insert(k.clone());
            }
        }
    }
}

/// Removes the agent from its session, dissolving the session if fewer
/// than two participants remain.
pub(crate) fn apply_leave(world: &mut WorldState, agent: &str) {
    let Some(id) = world.agents.get_mut(agent).and_then(|a| a.conversation.take()) else {
        return;
    };
    let Some(session) = world.conversations.get_mut(&id) else {
        return;
    };
    session.participants.remove(agent);
    if session.participants.len() < 2 {
        let rest: Vec<String> = session.participants.iter().cloned().collect();
        world.conversations.remove(&id);
        for p in rest {
            if let Some(a) = world.agents.get_mut(&p) {
                a.conversation = None;
            }
        }
    }
}

/// Starts a session between two co-located idle agents; returns its id.
pub fn initiate(world: &mut WorldState, initiator: &str, target: &str, opening: &str) -> Result<String, String> {
    let out = world.dispatch_with(initiator, &format!("initiating_chat {target}"), Some(opening));
    if !out.success {
        return Err(out.message);
    }
    Ok(world.agents[initiator].conversation.clone().unwrap_or_default())
}

pub fn join(world: &mut WorldState, agent: &str, session: &str) -> ActionOutcome {
    world.dispatch(agent, &format!("join_chat {session}"))
}

pub fn stay(world: &mut WorldState, agent: &str, utterance: &str) -> ActionOutcome {
    world.dispatch_with(agent, "stay_chat", Some(utterance))
}

pub fn end(world: &mut WorldState, agent: &str) -> ActionOutcome {
    world.dispatch(agent, "end_chat")
}

/// Conversation commands admissible for `agent`: `initiating_chat` per idle
/// co-located peer and `join_chat` per local session while idle; `stay_chat`
/// and `end_chat` while in a session.
pub fn admissible_conversation_actions(world: &WorldState, agent: &str) -> Vec<String> {
    let Ok(a) = world.agent(agent) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    if a.conversation.is_some() {
        out.push("end_chat".to_string());
        out.push("stay_chat".to_string());
    } else {
        for peer in world.locations[&a.location].agents.iter() {
            if check_initiate(world, agent, peer).is_ok() {
                out.push(format!("initiating_chat {peer}"));
            }
        }
        for (id, s) in &world.conversations {
            if s.location == a.location {
                out.push(format!("join_chat {id}"));
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::testutil::small_world;

    fn co_located() -> WorldState {
        let mut w = small_world();
        // Bring ryan to the kitchen where irene is.
        assert!(w.dispatch("ryan", "go_to kitchen").success);
        w
    }

    #[test]
    fn idle_agent_without_peers_has_nothing() {
        let w = small_world();
        assert!(admissible_conversation_actions(&w, "ryan").is_empty());
    }

    #[test]
    fn initiate_between_co_located_idle_agents() {
        let mut w = co_located();
        assert_eq!(
            admissible_conversation_actions(&w, "ryan"),
            vec!["initiating_chat irene".to_string()]
        );
        let id = initiate(&mut w, "ryan", "irene", "Hi Irene.").unwrap();
        let s = &w.conversations[&id];
        assert_eq!(s.participants.len(), 2);
        assert_eq!(s.transcript.len(), 1);
        assert_eq!(w.agents["irene"].conversation.as_deref(), Some(id.as_str()));
        assert!(w.check_invariants().is_empty());

        let acts = admissible_conversation_actions(&w, "irene");
        assert_eq!(acts, vec!["end_chat".to_string(), "stay_chat".to_string()]);
    }

    #[test]
    fn initiate_fails_across_rooms() {
        let mut w = small_world();
        let err = initiate(&mut w, "ryan", "irene", "Hello?").unwrap_err();
        assert!(err.contains("cannot find irene"), "{err}");
        assert!(w.conversations.is_empty());
    }

    #[test]
    fn initiate_fails_when_target_busy() {
        let mut w = co_located();
        add_agent(&mut w, "jenny", "kitchen");
        initiate(&mut w, "ryan", "irene", "Hi.").unwrap();
        let err = initiate(&mut w, "jenny", "irene", "Hey").unwrap_err();
        assert!(err.contains("join_chat"), "{err}");
        let acts = admissible_conversation_actions(&w, "jenny");
        assert_eq!(acts, vec!["join_chat chat_1".to_string()]);
    }

    #[test]
    fn third_agent_joins_and_sessions_dissolve() {
        let mut w = co_located();
        add_agent(&mut w, "jenny", "kitchen");
        let id = initiate(&mut w, "ryan", "irene", "Hi.").unwrap();
        assert!(join(&mut w, "jenny", &id).success);
        assert_eq!(w.conversations[&id].participants.len(), 3);
        assert!(end(&mut w, "ryan").success);
        assert_eq!(w.conversations[&id].participants.len(), 2);
        assert!(end(&mut w, "irene").success);
        assert!(w.conversations.is_empty());
        assert_eq!(w.agents["jenny"].conversation, None);
        assert!(w.check_invariants().is_empty());
    }

    #[test]
    fn stay_by_non_participant_fails() {
        let mut w = co_located();
        let out = stay(&mut w, "ryan", "anyone?");
        assert!(!out.success);
        assert!(out.message.contains("cannot perform action stay_chat"));
    }

    #[test]
    fn stay_restores_social_for_everyone() {
        let mut w = co_located();
        for a in w.agents.values_mut() {
            a.needs.social_fulfillment = 50.0;
        }
        initiate(&mut w, "ryan", "irene", "Hi.").unwrap();
        stay(&mut w, "irene", "Hello Ryan.");
        assert_eq!(w.agents["ryan"].needs.social_fulfillment, 55.0);
        assert_eq!(w.agents["irene"].needs.social_fulfillment, 55.0);
    }

    #[test]
    fn leaving_the_room_ends_membership() {
        let mut w = co_located();
        initiate(&mut w, "ryan", "irene", "Hi.").unwrap();
        assert!(w.dispatch("ryan", "go_to meeting_room1").success);
        assert!(w.conversations.is_empty());
        assert_eq!(w.agents["ryan"].conversation, None);
        assert_eq!(w.agents["irene"].conversation, None);
    }

    #[test]
    fn password_spoken_by_a_knower_is_shared() {
        let mut w = co_located();
        let pw = w.settings.booking_password.clone().unwrap();
        assert!(w.agents["irene"].password().is_none());
        initiate(&mut w, "ryan", "irene", "Hello!").unwrap();
        stay(&mut w, "ryan", "The weather is nice.");
        assert!(w.agents["irene"].password().is_none());
        stay(&mut w, "ryan", &format!("The password is {pw}."));
        assert_eq!(w.agents["irene"].password(), Some(pw.as_str()));
    }

    pub(crate) fn add_agent(w: &mut WorldState, name: &str, location: &str) {
        let mut a = w.agents["irene"].clone();
        a.profile.name = name.to_string();
        a.profile.role = crate::catalog::Role::Janitor;
        a.location = location.to_string();
        a.inventory.clear();
        a.conversation = None;
        a.knowledge.clear();
        w.agents.insert(name.to_string(), a);
        w.agent_order.push(name.to_string());
        w.reindex();
    }
}
