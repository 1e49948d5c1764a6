//! Admissible-action enumeration.
//!
//! Candidates are generated from the agent's surroundings and then filtered
//! through the same precondition checks `dispatch` uses.

use std::collections::BTreeSet;

use crate::catalog::{qualifies, ObjectType, Verb};
use crate::conversation::admissible_conversation_actions;
use crate::error::WorldError;
use crate::world::rules::event_token;
use crate::world::{AgentState, WorldState};

impl WorldState {
    /// Every fully-instantiated command whose preconditions hold for
    /// `agent` now, sorted and deduplicated.
    pub fn admissible_actions(&self, agent: &str) -> Result<Vec<String>, WorldError> {
        let a = self.agent(agent)?;
        let out: BTreeSet<String> = self
            .candidates(a)
            .into_iter()
            .filter(|c| self.plan_command(agent, c, None).is_ok())
            .chain(admissible_conversation_actions(self, agent))
            .collect();
        Ok(out.into_iter().collect())
    }

    pub fn is_admissible(&self, agent: &str, command: &str) -> bool {
        self.plan_command(agent, command, None).is_ok()
    }

    fn candidates(&self, a: &AgentState) -> Vec<String> {
        let mut c = Vec::new();
        let may = |v: Verb| qualifies(v.spec(), &a.profile.skills);
        let here = &self.locations[&a.location];
        let neighbours: Vec<&String> = here.connections.keys().collect();
        for to in &neighbours {
            c.push(format!("go_to {to}"));
        }
        for v in [
            "look_around",
            "wash_hands",
            "use_restroom",
            "rest",
            "fetch_meal",
            "refill_supplies",
            "work_at_desk",
            "check_bookings",
        ] {
            c.push(v.to_string());
        }
        let visible: Vec<_> = self.accessible_objects(a).collect();
        let peers: Vec<&String> = here.agents.iter().filter(|n| *n != a.name()).collect();
        let receptacles: Vec<_> = visible.iter().filter(|o| o.is_receptacle() && o.holder.is_none()).collect();
        let of_type = |ts: &[ObjectType]| -> Vec<&String> {
            visible.iter().filter(|o| ts.contains(&o.otype)).map(|o| &o.name).collect()
        };
        let machines = of_type(&[ObjectType::CoffeeMachine, ObjectType::WaterDispenser]);
        let microwaves = of_type(&[ObjectType::Microwave]);

        for o in &visible {
            let n = &o.name;
            for v in ["pick_up", "open", "close", "turn_on", "turn_off", "inspect_device"] {
                c.push(format!("{v} {n}"));
            }
            if let Some(v) = o.otype.repair_verb() {
                if may(v) {
                    c.push(format!("{v} {n}"));
                }
            }
            if o.otype.is_furniture() {
                for to in &neighbours {
                    c.push(format!("move_furniture {n} {to}"));
                }
            }
        }
        for n in &a.inventory {
            let Some(o) = self.objects.get(n) else { continue };
            for v in ["drop", "clean", "eat", "drink"] {
                c.push(format!("{v} {n}"));
            }
            for r in &receptacles {
                c.push(format!("put_on {n} {}", r.name));
                c.push(format!("put_in {n} {}", r.name));
            }
            for p in &peers {
                c.push(format!("give_to {n} {p}"));
            }
            if o.otype == ObjectType::Cup {
                for m in &machines {
                    for v in ["brew_coffee", "make_tea", "dispense_water"] {
                        c.push(format!("{v} {n} {m}"));
                    }
                }
            }
            if o.otype.is_food() {
                for m in &microwaves {
                    c.push(format!("heat_food {n} {m}"));
                }
            }
        }
        if may(Verb::BookMeetingRoom) {
            if let Some(pw) = a.password() {
                let terminals = of_type(&[ObjectType::TouchScreen, ObjectType::Computer]);
                for e in a.event_requests() {
                    for t in &terminals {
                        c.push(format!(
                            "book_meeting_room {t} {} {} {} {} {pw}",
                            e.room,
                            event_token(&e.name),
                            e.start,
                            e.end
                        ));
                    }
                }
            }
        }
        c
    }
}
