//! Needs-driven scripted occupant used by simulation sessions.
//!
//! Below a need threshold the agent walks to the nearest place that can
//! relieve it, does so, tidies up its cup and lingers a few minutes;
//! otherwise it goes home and does its role's routine work. Only commands
//! from the admissible list are ever returned.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::catalog::ObjectType;
use crate::error::PolicyError;
use crate::needs::Need;
use crate::world::{ObjectEntity, WorldState};

use super::policy::{Decision, Policy, PolicyContext};

/// A declining need is acted on below this value.
pub const ACT_BELOW: f64 = 40.0;
/// Bladder is acted on above this value.
pub const BLADDER_ABOVE: f64 = 60.0;
/// Minutes spent lingering after eating or drinking.
pub const LINGER: u32 = 6;
/// Conversations end once social fulfillment reaches this value.
pub const CHAT_UNTIL: f64 = 60.0;

/// Shortest distance and first hop to every reachable location.
pub fn routes(world: &WorldState, from: &str) -> BTreeMap<String, (u32, String)> {
    let mut best: BTreeMap<String, (u32, String)> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    for (n, d) in &world.locations[from].connections {
        heap.push(Reverse((*d, n.clone(), n.clone())));
    }
    while let Some(Reverse((d, at, hop))) = heap.pop() {
        if at == from || best.contains_key(&at) {
            continue;
        }
        for (n, w) in &world.locations[&at].connections {
            if !best.contains_key(n) {
                heap.push(Reverse((d + w, n.clone(), hop.clone())));
            }
        }
        best.insert(at, (d, hop));
    }
    best
}

#[derive(Debug, Default)]
pub struct RoutinePolicy {
    home: Option<String>,
    linger: u32,
}

impl RoutinePolicy {
    pub fn new() -> Self {
        Self::default()
    }
}

struct Step<'c, 'a> {
    ctx: &'c PolicyContext<'a>,
}

impl<'c, 'a> Step<'c, 'a> {
    fn world(&self) -> &'a WorldState {
        self.ctx.world
    }

    fn here(&self) -> &str {
        &self.ctx.observation.location
    }

    fn try_cmd(&self, c: String) -> Option<Decision> {
        self.ctx.is_admissible(&c).then(|| Decision::admissible(c))
    }

    fn first_of(&self, cs: impl IntoIterator<Item = String>) -> Option<Decision> {
        cs.into_iter().find_map(|c| self.try_cmd(c))
    }

    fn held(&self) -> Vec<&'a ObjectEntity> {
        let w = self.world();
        w.agents[self.ctx.agent].inventory.iter().filter_map(|n| w.objects.get(n)).collect()
    }

    fn local(&self, pred: impl Fn(&ObjectEntity) -> bool) -> Vec<&'a ObjectEntity> {
        let w = self.world();
        let a = &w.agents[self.ctx.agent];
        w.accessible_objects(a).filter(|o| o.holder.is_none() && pred(o)).collect()
    }

    /// Walks one hop toward the nearest location satisfying `pred`.
    fn head_to(&self, pred: impl Fn(&str) -> bool) -> Option<Decision> {
        let r = routes(self.world(), self.here());
        let (_, hop) = r.iter().filter(|(l, _)| pred(l)).map(|(_, v)| v).min_by_key(|(d, h)| (*d, h.clone()))?;
        self.try_cmd(format!("go_to {hop}"))
    }

    fn rotate<T: Clone>(&self, v: &[T]) -> Vec<T> {
        if v.is_empty() {
            return Vec::new();
        }
        let k = self.ctx.agent_index % v.len();
        v[k..].iter().chain(&v[..k]).cloned().collect()
    }

    fn has_at(&self, loc: &str, pred: impl Fn(&ObjectEntity) -> bool) -> bool {
        let w = self.world();
        w.locations[loc].objects.iter().filter_map(|n| w.objects.get(n)).any(|o| {
            o.holder.is_none()
                && pred(o)
                && o.receptacle.as_ref().is_none_or(|r| w.objects.get(r).is_some_and(ObjectEntity::is_open))
        })
    }

    fn unlimited(&self, loc: &str) -> bool {
        self.world().settings.unlimited_locations.contains(loc)
    }

    fn drop_one(&self) -> Option<Decision> {
        let surfaces: Vec<String> = self.local(|o| o.otype.is_surface()).iter().map(|o| o.name.clone()).collect();
        let held = self.held();
        let o = held.first()?;
        self.first_of(surfaces.iter().map(|s| format!("put_on {} {s}", o.name)))
            .or_else(|| self.try_cmd(format!("drop {}", o.name)))
    }

    fn thirst(&self) -> Option<Decision> {
        let held = self.held();
        if let Some(c) = held.iter().find(|o| o.contains().is_some()) {
            return self.try_cmd(format!("drink {}", c.name));
        }
        let pref = self.ctx.profile.preference.as_deref().unwrap_or("water");
        let (verb, machine) = if pref == "coffee" {
            ("brew_coffee", ObjectType::CoffeeMachine)
        } else {
            ("dispense_water", ObjectType::WaterDispenser)
        };
        let is_station = |o: &ObjectEntity| o.otype == machine;
        if let Some(cup) = held.iter().find(|o| o.otype == ObjectType::Cup && o.is_clean()) {
            let machines: Vec<String> = self.local(is_station).iter().map(|o| o.name.clone()).collect();
            if !machines.is_empty() {
                return self
                    .first_of(self.rotate(&machines).into_iter().map(|m| format!("{verb} {} {m}", cup.name)))
                    .or_else(|| Some(Decision::wait()));
            }
            return self.head_to(|l| self.has_at(l, is_station)).or_else(|| Some(Decision::wait()));
        }
        if let Some(cup) = held.iter().find(|o| o.otype == ObjectType::Cup) {
            return self.try_cmd(format!("clean {}", cup.name)).or_else(|| self.drop_one());
        }
        if held.len() >= 2 {
            return self.drop_one();
        }
        let here_station = !self.local(is_station).is_empty();
        if here_station {
            let clean: Vec<String> = self
                .local(|o| o.otype == ObjectType::Cup && o.is_clean() && o.contains().is_none())
                .iter()
                .map(|o| o.name.clone())
                .collect();
            if let Some(d) = self.first_of(self.rotate(&clean).into_iter().map(|c| format!("pick_up {c}"))) {
                return Some(d);
            }
            let sink = !self.local(|o| o.otype == ObjectType::Sinkbasin).is_empty();
            let dirty: Vec<String> = self.local(|o| o.otype == ObjectType::Cup).iter().map(|o| o.name.clone()).collect();
            if sink {
                if let Some(d) = self.first_of(self.rotate(&dirty).into_iter().map(|c| format!("pick_up {c}"))) {
                    return Some(d);
                }
            }
            if clean.is_empty() && dirty.is_empty() {
                // Cups are all elsewhere or in use: look for another source.
                if self.unlimited(self.here()) {
                    return self.try_cmd("refill_supplies".into());
                }
                return self.head_to(|l| self.unlimited(l)).or_else(|| Some(Decision::wait()));
            }
            return Some(Decision::wait());
        }
        if self.unlimited(self.here()) {
            return self.try_cmd("refill_supplies".into());
        }
        let cup_station = |l: &str| self.has_at(l, is_station) && self.has_at(l, |o| o.otype == ObjectType::Cup);
        self.head_to(cup_station).or_else(|| self.head_to(|l| self.unlimited(l)))
    }

    fn hunger(&self) -> Option<Decision> {
        let held = self.held();
        if let Some(f) = held.iter().find(|o| o.otype.is_food()) {
            return self.try_cmd(format!("eat {}", f.name));
        }
        if held.len() >= 2 {
            return self.drop_one();
        }
        let food: Vec<String> = self.local(|o| o.otype.is_food()).iter().map(|o| o.name.clone()).collect();
        if let Some(d) = self.first_of(self.rotate(&food).into_iter().map(|f| format!("pick_up {f}"))) {
            return Some(d);
        }
        if self.unlimited(self.here()) {
            return self.try_cmd("fetch_meal".into());
        }
        let here = self.here().to_string();
        self.head_to(|l| l != here && self.has_at(l, |o| o.otype.is_food()))
            .or_else(|| self.head_to(|l| self.unlimited(l)))
    }

    fn bladder(&self) -> Option<Decision> {
        if !self.local(|o| o.otype == ObjectType::Toilet).is_empty() {
            return self.try_cmd("use_restroom".into()).or_else(|| Some(Decision::wait()));
        }
        self.head_to(|l| self.has_at(l, |o| o.otype == ObjectType::Toilet))
    }

    fn loneliness(&self) -> Option<Decision> {
        let me = &self.world().agents[self.ctx.agent];
        if me.conversation.is_some() {
            return self.try_cmd("stay_chat".into());
        }
        let chats: Vec<String> = self
            .ctx
            .admissible
            .iter()
            .filter(|c| c.starts_with("initiating_chat ") || c.starts_with("join_chat "))
            .cloned()
            .collect();
        if let Some(c) = self.rotate(&chats).into_iter().next() {
            return Some(Decision::admissible(c));
        }
        let w = self.world();
        let here = self.here().to_string();
        let busiest = w
            .locations
            .values()
            .filter(|l| l.name != here)
            .map(|l| l.agents.len())
            .max()
            .unwrap_or(0);
        if busiest == 0 {
            return None;
        }
        self.head_to(|l| l != here && w.locations[l].agents.len() == busiest)
    }

    fn tidy(&self) -> Option<Decision> {
        let held = self.held();
        let cup = held.iter().find(|o| o.otype == ObjectType::Cup)?;
        if !cup.is_clean() {
            if let Some(d) = self.try_cmd(format!("clean {}", cup.name)) {
                return Some(d);
            }
        }
        let surfaces: Vec<String> = self.local(|o| o.otype.is_surface()).iter().map(|o| o.name.clone()).collect();
        self.first_of(surfaces.iter().map(|s| format!("put_on {} {s}", cup.name)))
    }

    fn home(&self, home: &str) -> Decision {
        if self.here() != home {
            if let Some(d) = self.head_to(|l| l == home) {
                return d;
            }
        }
        self.first_of(["work_at_desk".to_string(), "check_bookings".to_string(), "look_around".to_string()])
            .unwrap_or_else(Decision::wait)
    }
}

/// Most pressing need by the routine's own (earlier) thresholds.
pub fn pressing_need(ctx: &PolicyContext<'_>) -> Option<Need> {
    let n = &ctx.observation.needs;
    let mut best: Option<(Need, f64)> = None;
    for need in Need::PRIORITY {
        let deficit = match need {
            Need::Bladder => n.bladder - BLADDER_ABOVE,
            other => ACT_BELOW - n.value(other),
        };
        if deficit > 0.0 && best.is_none_or(|(_, b)| deficit > b) {
            best = Some((need, deficit));
        }
    }
    best.map(|b| b.0)
}

fn just_consumed(ctx: &PolicyContext<'_>) -> bool {
    ctx.memory.episodes.back().is_some_and(|e| {
        e.tick + 1 >= ctx.tick
            && e.text.contains("(ok)")
            && ["`drink ", "`eat ", "`fetch_meal`", "`refill_supplies`"].iter().any(|v| e.text.contains(v))
    })
}

impl Policy for RoutinePolicy {
    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Result<Decision, PolicyError> {
        let home = self.home.get_or_insert_with(|| ctx.observation.location.clone()).clone();
        let s = Step { ctx };
        if just_consumed(ctx) {
            self.linger = LINGER;
        }
        let in_chat = ctx.world.agents[ctx.agent].conversation.is_some();
        let need = pressing_need(ctx);
        if let Some(n) = need {
            if in_chat && n != Need::Loneliness {
                if let Some(d) = s.try_cmd("end_chat".into()) {
                    return Ok(d);
                }
            }
            let d = match n {
                Need::Thirst => s.thirst(),
                Need::Hunger => s.hunger(),
                Need::Bladder => s.bladder(),
                Need::Fatigue => s.try_cmd("rest".into()),
                Need::Loneliness => s.loneliness(),
            };
            if let Some(d) = d {
                return Ok(d);
            }
        }
        if let Some(d) = s.tidy() {
            return Ok(d);
        }
        if in_chat {
            if ctx.observation.needs.social_fulfillment < CHAT_UNTIL && self.linger > 0 {
                self.linger -= 1;
                if let Some(d) = s.try_cmd("stay_chat".into()) {
                    return Ok(d);
                }
            }
            if let Some(d) = s.try_cmd("end_chat".into()) {
                return Ok(d);
            }
        }
        if self.linger > 0 {
            self.linger -= 1;
            return Ok(s.try_cmd("look_around".into()).unwrap_or_else(Decision::wait));
        }
        Ok(s.home(&home))
    }
}
