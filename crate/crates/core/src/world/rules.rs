//! Per-verb precondition checks and effect application.
//!
//! `plan` validates a command against the current state without mutating it
//! and returns the list of primitive effects; `apply` executes them. Both
//! dispatch and admissible-action enumeration go through `plan`, so an
//! admissible command always passes its preconditions.

use chrono::NaiveDateTime;
use serde_json::Value;

use crate::catalog::{effective_duration, qualifies, ObjectType, Verb};
use crate::conversation;
use crate::needs::{apply_restoration, Restoration};
use crate::world::{
    ActionOutcome, AgentState, Booking, LastAction, ObjectEntity, WorldState, HANDS,
};

const HOT: f64 = 70.0;
const TIMESTAMP: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone)]
pub(crate) enum Effect {
    SetAttr { object: String, key: &'static str, value: Value },
    RemoveAttr { object: String, key: &'static str },
    MoveAgent { agent: String, to: String },
    MoveFurniture { object: String, to: String },
    Take { agent: String, object: String },
    Place { object: String, receptacle: Option<String> },
    Give { object: String, to: String },
    Consume { object: String },
    Restore { agent: String, kind: Restoration },
    Occupy { device: String },
    Book(Booking),
    StartChat { initiator: String, peer: String, text: String },
    Utter { agent: String, text: String },
    JoinChat { agent: String, session: String },
    LeaveChat { agent: String },
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub effects: Vec<Effect>,
    pub message: String,
    pub distance: Option<u32>,
}

impl Plan {
    fn new(message: impl Into<String>) -> Self {
        Self {
            effects: Vec::new(),
            message: message.into(),
            distance: None,
        }
    }

    fn with(mut self, e: Effect) -> Self {
        self.effects.push(e);
        self
    }
}

type Check<T> = Result<T, String>;

/// Turns a free-text event name into a single command token.
pub fn event_token(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join("_")
}

pub fn event_from_token(token: &str) -> String {
    token.replace('_', " ")
}

impl WorldState {
    /// Parses and executes `command` for `agent`. Never panics on bad input:
    /// every failure is reported as an unsuccessful outcome.
    pub fn dispatch(&mut self, agent: &str, command: &str) -> ActionOutcome {
        self.dispatch_with(agent, command, None)
    }

    /// Like [`dispatch`](Self::dispatch), with an utterance payload for
    /// conversation verbs.
    pub fn dispatch_with(&mut self, agent: &str, command: &str, utterance: Option<&str>) -> ActionOutcome {
        let outcome = match self.plan_command(agent, command, utterance) {
            Err(msg) => ActionOutcome::failure(msg),
            Ok((verb, plan)) => self.execute(agent, verb, plan),
        };
        if self.agents.contains_key(agent) {
            let location = self.agents[agent].location.clone();
            self.last_actions.insert(
                agent.to_string(),
                LastAction {
                    tick: self.tick,
                    location,
                    command: command.trim().to_string(),
                    success: outcome.success,
                },
            );
        }
        outcome
    }

    pub(crate) fn plan_command(
        &self,
        agent: &str,
        command: &str,
        utterance: Option<&str>,
    ) -> Check<(Verb, Plan)> {
        let Some(a) = self.agents.get(agent) else {
            return Err(format!("cannot find agent {agent}."));
        };
        let tokens: Vec<&str> = command.split_whitespace().collect();
        let Some((&head, args)) = tokens.split_first() else {
            return Err(format!("{agent} cannot parse command {command}."));
        };
        let Ok(verb) = head.parse::<Verb>() else {
            return Err(format!("{agent} cannot perform action {head}."));
        };
        let spec = verb.spec();
        if !qualifies(spec, &a.profile.skills) {
            return Err(format!("{agent} cannot perform action {head}."));
        }
        if args.len() != spec.arity() {
            return Err(format!(
                "{agent} received an incorrect number of arguments for action {head}."
            ));
        }
        let plan = self.plan(a, verb, args, utterance)?;
        Ok((verb, plan))
    }

    fn execute(&mut self, agent: &str, verb: Verb, plan: Plan) -> ActionOutcome {
        let skills = &self.agents[agent].profile.skills;
        let duration = effective_duration(verb.spec(), skills, plan.distance).unwrap_or(1);
        let before = self.attributes();
        for effect in plan.effects {
            self.apply(effect, duration);
        }
        let after = self.attributes();
        ActionOutcome {
            success: true,
            message: plan.message,
            duration_ticks: duration,
            state_diff: super::snapshot::diff_maps(&before, &after),
        }
    }

    fn plan(&self, a: &AgentState, verb: Verb, args: &[&str], utterance: Option<&str>) -> Check<Plan> {
        let me = a.name();
        match verb {
            Verb::GoTo => {
                let to = args[0];
                if !self.locations.contains_key(to) {
                    return Err(format!("{me} cannot find {to}."));
                }
                if to == a.location {
                    return Err(format!("{me} is already at {to}."));
                }
                let Some(d) = self.distance(&a.location, to) else {
                    return Err(format!("{to} is not connected to {}.", a.location));
                };
                let mut p = Plan::new(format!("{me} went to {to}."))
                    .with(Effect::MoveAgent { agent: me.into(), to: to.into() });
                p.distance = Some(d);
                Ok(p)
            }
            Verb::PickUp => {
                let o = self.reachable(a, args[0])?;
                if o.holder.as_deref() == Some(me) {
                    return Err(format!("{me} is already holding {}.", o.name));
                }
                if !o.carryable {
                    return Err(format!("{} cannot be picked up.", o.name));
                }
                if a.inventory.len() >= HANDS {
                    return Err(format!("{me}'s hands are full."));
                }
                if self.carried_weight(a) + o.weight_kg > a.profile.strength_kg {
                    return Err(format!("{} is too heavy for {me}.", o.name));
                }
                Ok(Plan::new(format!("{me} picked up {}.", o.name))
                    .with(Effect::Take { agent: me.into(), object: o.name.clone() }))
            }
            Verb::Drop => {
                let o = self.held(a, args[0])?;
                let target = if o.requires_receptacle {
                    let r = self
                        .local_receptacles(a)
                        .find(|r| r.is_open() && r.has_room())
                        .ok_or_else(|| format!("{me} has nowhere to put {}.", o.name))?;
                    Some(r.name.clone())
                } else {
                    None
                };
                let msg = match &target {
                    Some(r) => format!("{me} dropped {} onto {r}.", o.name),
                    None => format!("{me} dropped {}.", o.name),
                };
                Ok(Plan::new(msg).with(Effect::Place { object: o.name.clone(), receptacle: target }))
            }
            Verb::PutOn | Verb::PutIn => {
                let o = self.held(a, args[0])?;
                let r = self.local_receptacle(a, args[1])?;
                let surface = verb == Verb::PutOn;
                if r.otype.is_surface() != surface {
                    let prep = if surface { "on" } else { "in" };
                    return Err(format!("{me} cannot put things {prep} {}.", r.name));
                }
                if !r.is_open() {
                    return Err(format!("{} is closed.", r.name));
                }
                if !r.has_room() {
                    return Err(format!("{} is full.", r.name));
                }
                let prep = if surface { "on" } else { "in" };
                Ok(Plan::new(format!("{me} put {} {prep} {}.", o.name, r.name))
                    .with(Effect::Place { object: o.name.clone(), receptacle: Some(r.name.clone()) }))
            }
            Verb::Open | Verb::Close => {
                let r = self.local_receptacle(a, args[0])?;
                let opening = verb == Verb::Open;
                if !r.is_closable() {
                    let what = if opening { "opened" } else { "closed" };
                    return Err(format!("{} cannot be {what}.", r.name));
                }
                if r.is_open() == opening {
                    let what = if opening { "open" } else { "closed" };
                    return Err(format!("{} is already {what}.", r.name));
                }
                let what = if opening { "opened" } else { "closed" };
                Ok(Plan::new(format!("{me} {what} {}.", r.name)).with(Effect::SetAttr {
                    object: r.name.clone(),
                    key: "is_open",
                    value: Value::Bool(opening),
                }))
            }
            Verb::GiveTo => {
                let o = self.held(a, args[0])?;
                let to = args[1];
                let Some(b) = self.agents.get(to).filter(|b| b.location == a.location && to != me) else {
                    return Err(format!("{me} cannot find {to} in the current location."));
                };
                if b.inventory.len() >= HANDS {
                    return Err(format!("{to}'s hands are full."));
                }
                if self.carried_weight(b) + o.weight_kg > b.profile.strength_kg {
                    return Err(format!("{} is too heavy for {to}.", o.name));
                }
                Ok(Plan::new(format!("{me} gave {} to {to}.", o.name))
                    .with(Effect::Give { object: o.name.clone(), to: to.into() }))
            }
            Verb::LookAround => Ok(Plan::new(self.describe_location(a))),
            Verb::TurnOn | Verb::TurnOff => {
                let o = self.reachable(a, args[0])?;
                let on = verb == Verb::TurnOn;
                let Some(state) = o.flag("is_turned_on") else {
                    let what = if on { "on" } else { "off" };
                    return Err(format!("{} cannot be turned {what}.", o.name));
                };
                let what = if on { "on" } else { "off" };
                if state == on {
                    return Err(format!("{} is already turned {what}.", o.name));
                }
                Ok(Plan::new(format!("{} is now turned {what}.", o.name)).with(Effect::SetAttr {
                    object: o.name.clone(),
                    key: "is_turned_on",
                    value: Value::Bool(on),
                }))
            }
            v if v.is_repair() => {
                let name = args[0];
                let o = self
                    .objects
                    .get(name)
                    .filter(|o| self.is_accessible(a, o))
                    .ok_or_else(|| format!("{me} cannot find {name} in the current location."))?;
                if !o.otype.is_repairable() {
                    return Err(format!("{} is not a repairable electronic device.", o.name));
                }
                if o.flag("is_working") != Some(false) {
                    return Err(format!("{} is already in working condition.", o.name));
                }
                Ok(Plan::new(format!("{me} repaired the {}.", o.name)).with(Effect::SetAttr {
                    object: o.name.clone(),
                    key: "is_working",
                    value: Value::Bool(true),
                }))
            }
            Verb::Clean => {
                let o = self.held(a, args[0])?;
                if !o.otype.is_utensil() {
                    return Err(format!("{} cannot be cleaned.", o.name));
                }
                if o.is_clean() {
                    return Err(format!("{} is already clean.", o.name));
                }
                let sink = self.free_fixture(a, ObjectType::Sinkbasin)?;
                Ok(Plan::new(format!("{me} cleaned {} at {}.", o.name, sink.name))
                    .with(Effect::SetAttr { object: o.name.clone(), key: "is_clean", value: Value::Bool(true) })
                    .with(Effect::RemoveAttr { object: o.name.clone(), key: "contains" })
                    .with(Effect::Occupy { device: sink.name.clone() }))
            }
            Verb::WashHands => {
                if !self.local_objects(a).any(|o| o.otype == ObjectType::Sinkbasin) {
                    return Err(format!("{me} cannot find a Sinkbasin in the current location."));
                }
                Ok(Plan::new(format!("{me} washed their hands.")))
            }
            Verb::BrewCoffee | Verb::MakeTea | Verb::DispenseWater => {
                let cup = self.held(a, args[0])?;
                if cup.otype != ObjectType::Cup {
                    return Err(format!("{} is not a cup.", cup.name));
                }
                if !cup.is_clean() {
                    return Err(format!("{} is not clean.", cup.name));
                }
                if let Some(c) = cup.contains() {
                    return Err(format!("{} already contains {c}.", cup.name));
                }
                let machine = self.reachable(a, args[1])?;
                let allowed: &[ObjectType] = match verb {
                    Verb::BrewCoffee => &[ObjectType::CoffeeMachine],
                    Verb::MakeTea => &[ObjectType::WaterDispenser, ObjectType::CoffeeMachine],
                    _ => &[ObjectType::WaterDispenser],
                };
                if !allowed.contains(&machine.otype) {
                    return Err(format!("{} cannot be used for {verb}.", machine.name));
                }
                self.usable_device(machine)?;
                let (drink, mut plan) = match verb {
                    Verb::BrewCoffee => ("coffee", Plan::new(format!("{me} brewed coffee into {}.", cup.name))),
                    Verb::MakeTea => {
                        let bag = a
                            .inventory
                            .iter()
                            .filter_map(|n| self.objects.get(n))
                            .chain(self.local_objects(a))
                            .find(|o| o.otype == ObjectType::TeaBag)
                            .ok_or_else(|| format!("{me} cannot find a TeaBag."))?;
                        let p = Plan::new(format!("{me} made tea in {}.", cup.name))
                            .with(Effect::Consume { object: bag.name.clone() });
                        ("tea", p)
                    }
                    _ => ("water", Plan::new(format!("{me} filled {} with water.", cup.name))),
                };
                plan = plan
                    .with(Effect::SetAttr { object: cup.name.clone(), key: "contains", value: Value::from(drink) })
                    .with(Effect::Occupy { device: machine.name.clone() });
                Ok(plan)
            }
            Verb::HeatFood => {
                let food = self.held(a, args[0])?;
                if !food.otype.is_food() {
                    return Err(format!("{} is not food.", food.name));
                }
                let mw = self.reachable(a, args[1])?;
                if mw.otype != ObjectType::Microwave {
                    return Err(format!("{} cannot heat food.", mw.name));
                }
                self.usable_device(mw)?;
                Ok(Plan::new(format!("{me} heated {} in {}.", food.name, mw.name))
                    .with(Effect::SetAttr { object: food.name.clone(), key: "temperature", value: Value::from(HOT) })
                    .with(Effect::Occupy { device: mw.name.clone() }))
            }
            Verb::Eat => {
                let food = self.held(a, args[0])?;
                if !food.otype.is_food() {
                    return Err(format!("{} is not edible.", food.name));
                }
                Ok(Plan::new(format!("{me} ate {}.", food.name))
                    .with(Effect::Consume { object: food.name.clone() })
                    .with(Effect::Restore { agent: me.into(), kind: Restoration::Eat }))
            }
            Verb::Drink => {
                let cup = self.held(a, args[0])?;
                let Some(drink) = cup.contains() else {
                    return Err(format!("{} is empty.", cup.name));
                };
                Ok(Plan::new(format!("{me} drank the {drink} from {}.", cup.name))
                    .with(Effect::RemoveAttr { object: cup.name.clone(), key: "contains" })
                    .with(Effect::SetAttr { object: cup.name.clone(), key: "is_clean", value: Value::Bool(false) })
                    .with(Effect::Restore { agent: me.into(), kind: Restoration::Drink }))
            }
            Verb::UseRestroom => {
                let toilet = self.free_fixture(a, ObjectType::Toilet)?;
                Ok(Plan::new(format!("{me} used the restroom."))
                    .with(Effect::Occupy { device: toilet.name.clone() })
                    .with(Effect::Restore { agent: me.into(), kind: Restoration::UseRestroom }))
            }
            Verb::Rest => {
                if a.conversation.is_some() {
                    return Err(format!("{me} cannot rest during a conversation."));
                }
                Ok(Plan::new(format!("{me} took a rest."))
                    .with(Effect::Restore { agent: me.into(), kind: Restoration::Rest }))
            }
            Verb::FetchMeal | Verb::RefillSupplies => {
                if !self.settings.unlimited_locations.contains(&a.location) {
                    return Err(format!("{me} cannot perform action {verb} in {}.", a.location));
                }
                let (kind, msg) = if verb == Verb::FetchMeal {
                    (Restoration::Eat, format!("{me} had a meal in {}.", a.location))
                } else {
                    (Restoration::Drink, format!("{me} had a drink in {}.", a.location))
                };
                Ok(Plan::new(msg).with(Effect::Restore { agent: me.into(), kind }))
            }
            Verb::WorkAtDesk => {
                let desk = self
                    .local_objects(a)
                    .find(|o| o.otype == ObjectType::Desk)
                    .ok_or_else(|| format!("{me} cannot find a Desk in the current location."))?;
                Ok(Plan::new(format!("{me} worked at {}.", desk.name)))
            }
            Verb::BookMeetingRoom => self.plan_booking(a, args),
            Verb::CheckBookings => {
                let t = self
                    .local_objects(a)
                    .find(|o| self.is_terminal(o))
                    .ok_or_else(|| format!("{me} cannot find a usable terminal in the current location."))?;
                let list = if self.bookings.is_empty() {
                    "no bookings".to_string()
                } else {
                    self.bookings
                        .iter()
                        .map(|b| format!("\"{}\" in {} from {} to {}", b.name, b.room, b.start, b.end))
                        .collect::<Vec<_>>()
                        .join("; ")
                };
                Ok(Plan::new(format!("{me} checked bookings on {}: {list}.", t.name)))
            }
            Verb::MoveFurniture => {
                let o = self.reachable(a, args[0])?;
                if !o.otype.is_furniture() || o.is_fixed() {
                    return Err(format!("{} cannot be moved.", o.name));
                }
                if !a.inventory.is_empty() {
                    return Err(format!("{me} needs both hands free to move {}.", o.name));
                }
                let to = args[1];
                if to == a.location {
                    return Err(format!("{} is already at {to}.", o.name));
                }
                let Some(d) = self.distance(&a.location, to) else {
                    return Err(format!("{me} cannot find {to}."));
                };
                if self.total_weight(o) > a.profile.strength_kg {
                    return Err(format!("{} is too heavy for {me}.", o.name));
                }
                let mut p = Plan::new(format!("{me} moved {} to {to}.", o.name))
                    .with(Effect::MoveFurniture { object: o.name.clone(), to: to.into() })
                    .with(Effect::MoveAgent { agent: me.into(), to: to.into() });
                p.distance = Some(d);
                Ok(p)
            }
            Verb::InspectDevice => {
                let o = self.reachable(a, args[0])?;
                let Some(working) = o.flag("is_working") else {
                    return Err(format!("{} is not a device.", o.name));
                };
                let status = if working { "working" } else { "broken" };
                Ok(Plan::new(format!("{} is {status}.", o.name)))
            }
            Verb::InitiatingChat => {
                conversation::check_initiate(self, me, args[0])?;
                let text = utterance.map(str::to_string).unwrap_or_else(|| format!("Hi {}.", args[0]));
                Ok(Plan::new(format!("{me} started a conversation with {}.", args[0]))
                    .with(Effect::StartChat { initiator: me.into(), peer: args[0].into(), text }))
            }
            Verb::StayChat => {
                conversation::check_in_session(self, me, verb.as_str())?;
                let text = utterance.unwrap_or("...").to_string();
                Ok(Plan::new(format!("{me} said: {text}"))
                    .with(Effect::Utter { agent: me.into(), text }))
            }
            Verb::EndChat => {
                let id = conversation::check_in_session(self, me, verb.as_str())?;
                Ok(Plan::new(format!("{me} left conversation {id}."))
                    .with(Effect::LeaveChat { agent: me.into() }))
            }
            Verb::JoinChat => {
                conversation::check_join(self, me, args[0])?;
                Ok(Plan::new(format!("{me} joined conversation {}.", args[0]))
                    .with(Effect::JoinChat { agent: me.into(), session: args[0].into() }))
            }
            _ => unreachable!("every verb is handled above"),
        }
    }

    fn plan_booking(&self, a: &AgentState, args: &[&str]) -> Check<Plan> {
        let me = a.name();
        let [terminal, room, event, start, end, password] = args else {
            unreachable!("arity checked by caller");
        };
        let t = self.reachable(a, terminal)?;
        match t.otype {
            ObjectType::TouchScreen => {
                if t.location != *room {
                    return Err(format!("{} can only book {}.", t.name, t.location));
                }
            }
            ObjectType::Computer => {}
            _ => return Err(format!("{} cannot be used to book rooms.", t.name)),
        }
        if !self.is_terminal(t) {
            return Err(format!("{} is not usable right now.", t.name));
        }
        if !self.locations.contains_key(*room) {
            return Err(format!("{me} cannot find {room}."));
        }
        let (Ok(s), Ok(e)) = (
            NaiveDateTime::parse_from_str(start, TIMESTAMP),
            NaiveDateTime::parse_from_str(end, TIMESTAMP),
        ) else {
            return Err(format!("{me} entered a malformed time range {start} to {end}."));
        };
        if s >= e {
            return Err(format!("{me} entered a malformed time range {start} to {end}."));
        }
        match &self.settings.booking_password {
            Some(pw) if pw == password => {}
            _ => return Err(format!("{me} entered an incorrect password.")),
        }
        let clash = self.bookings.iter().any(|b| {
            b.room == *room
                && NaiveDateTime::parse_from_str(&b.start, TIMESTAMP).is_ok_and(|bs| bs < e)
                && NaiveDateTime::parse_from_str(&b.end, TIMESTAMP).is_ok_and(|be| s < be)
        });
        if clash {
            return Err(format!("{room} is already booked for that time."));
        }
        let name = event_from_token(event);
        Ok(Plan::new(format!("{me} booked {room} for \"{name}\" from {start} to {end}."))
            .with(Effect::Book(Booking {
                name,
                start: start.to_string(),
                end: end.to_string(),
                room: room.to_string(),
                booked_by: me.to_string(),
                tick: self.tick,
            })))
    }

    // -- lookups used by checks --------------------------------------------

    pub(crate) fn local_objects<'a>(&'a self, a: &'a AgentState) -> impl Iterator<Item = &'a ObjectEntity> + 'a {
        self.accessible_objects(a).filter(move |o| o.holder.is_none())
    }

    pub(crate) fn local_receptacles<'a>(&'a self, a: &'a AgentState) -> impl Iterator<Item = &'a ObjectEntity> + 'a {
        self.local_objects(a).filter(|o| o.is_receptacle())
    }

    fn reachable(&self, a: &AgentState, name: &str) -> Check<&ObjectEntity> {
        self.objects
            .get(name)
            .filter(|o| self.is_accessible(a, o))
            .ok_or_else(|| format!("{} cannot find {name}.", a.name()))
    }

    fn held(&self, a: &AgentState, name: &str) -> Check<&ObjectEntity> {
        if a.inventory.iter().any(|n| n == name) {
            return Ok(&self.objects[name]);
        }
        match self.objects.get(name) {
            Some(o) if self.is_accessible(a, o) => Err(format!("{} is not holding {name}.", a.name())),
            _ => Err(format!("{} cannot find {name}.", a.name())),
        }
    }

    fn local_receptacle(&self, a: &AgentState, name: &str) -> Check<&ObjectEntity> {
        let r = self.reachable(a, name)?;
        if !r.is_receptacle() || r.holder.is_some() {
            return Err(format!("{name} is not a receptacle."));
        }
        Ok(r)
    }

    fn usable_device(&self, d: &ObjectEntity) -> Check<()> {
        if !d.is_working() {
            return Err(format!("{} is broken.", d.name));
        }
        if !d.is_powered() {
            return Err(format!("{} is turned off.", d.name));
        }
        if self.is_busy(&d.name) {
            return Err(format!("{} is in use.", d.name));
        }
        Ok(())
    }

    /// First free, working fixture of the given type at the agent's location.
    fn free_fixture<'a>(&'a self, a: &'a AgentState, otype: ObjectType) -> Check<&'a ObjectEntity> {
        let mut any = false;
        for o in self.local_objects(a).filter(|o| o.otype == otype) {
            any = true;
            if o.is_working() && !self.is_busy(&o.name) {
                return Ok(o);
            }
        }
        if any {
            Err(format!("every {otype} here is in use or broken."))
        } else {
            Err(format!("{} cannot find a {otype} in the current location.", a.name()))
        }
    }

    pub(crate) fn is_terminal(&self, o: &ObjectEntity) -> bool {
        matches!(o.otype, ObjectType::TouchScreen | ObjectType::Computer)
            && o.is_working()
            && o.is_powered()
    }

    fn describe_location(&self, a: &AgentState) -> String {
        let mut parts = vec![format!("{} is in {}.", a.name(), a.location)];
        let objs: Vec<&str> = self.accessible_objects(a).map(|o| o.name.as_str()).collect();
        if !objs.is_empty() {
            parts.push(format!("Visible: {}.", objs.join(", ")));
        }
        let peers: Vec<&str> = self.locations[&a.location]
            .agents
            .iter()
            .filter(|n| *n != a.name())
            .map(String::as_str)
            .collect();
        if !peers.is_empty() {
            parts.push(format!("People here: {}.", peers.join(", ")));
        }
        parts.join(" ")
    }

    // -- effect application ------------------------------------------------

    fn apply(&mut self, effect: Effect, duration: u32) {
        match effect {
            Effect::SetAttr { object, key, value } => {
                if let Some(o) = self.objects.get_mut(&object) {
                    o.state.insert(key.to_string(), value);
                }
            }
            Effect::RemoveAttr { object, key } => {
                if let Some(o) = self.objects.get_mut(&object) {
                    o.state.remove(key);
                }
            }
            Effect::MoveAgent { agent, to } => {
                conversation::apply_leave(self, &agent);
                let from = std::mem::replace(&mut self.agents.get_mut(&agent).unwrap().location, to.clone());
                self.locations.get_mut(&from).unwrap().agents.remove(&agent);
                self.locations.get_mut(&to).unwrap().agents.insert(agent.clone());
                let carried = self.agents[&agent].inventory.clone();
                for item in carried {
                    self.move_object(&item, &to);
                }
            }
            Effect::MoveFurniture { object, to } => {
                let contents = self.objects[&object].contents.clone();
                self.move_object(&object, &to);
                for c in contents {
                    self.move_object(&c, &to);
                }
            }
            Effect::Take { agent, object } => {
                self.detach(&object);
                let o = self.objects.get_mut(&object).unwrap();
                o.holder = Some(agent.clone());
                self.agents.get_mut(&agent).unwrap().inventory.push(object);
            }
            Effect::Place { object, receptacle } => {
                self.release(&object);
                let o = self.objects.get_mut(&object).unwrap();
                o.receptacle = receptacle.clone();
                if let Some(r) = receptacle {
                    self.objects.get_mut(&r).unwrap().contents.push(object);
                }
            }
            Effect::Give { object, to } => {
                self.release(&object);
                self.objects.get_mut(&object).unwrap().holder = Some(to.clone());
                self.agents.get_mut(&to).unwrap().inventory.push(object);
            }
            Effect::Consume { object } => {
                self.release(&object);
                self.detach(&object);
                if let Some(o) = self.objects.remove(&object) {
                    if let Some(l) = self.locations.get_mut(&o.location) {
                        l.objects.remove(&object);
                    }
                }
                self.busy_until.remove(&object);
            }
            Effect::Restore { agent, kind } => {
                let model = self.settings.needs_model.clone();
                let a = self.agents.get_mut(&agent).unwrap();
                a.needs = apply_restoration(&a.needs, kind, &model);
            }
            Effect::Occupy { device } => {
                self.busy_until.insert(device, self.tick + u64::from(duration));
            }
            Effect::Book(b) => self.bookings.push(b),
            Effect::StartChat { initiator, peer, text } => {
                conversation::apply_start(self, &initiator, &peer, &text);
            }
            Effect::Utter { agent, text } => conversation::apply_utter(self, &agent, &text, true),
            Effect::JoinChat { agent, session } => conversation::apply_join(self, &agent, &session),
            Effect::LeaveChat { agent } => conversation::apply_leave(self, &agent),
        }
    }

    fn move_object(&mut self, name: &str, to: &str) {
        let o = self.objects.get_mut(name).unwrap();
        let from = std::mem::replace(&mut o.location, to.to_string());
        self.locations.get_mut(&from).unwrap().objects.remove(name);
        self.locations.get_mut(to).unwrap().objects.insert(name.to_string());
    }

    /// Takes an object out of its receptacle, if any.
    fn detach(&mut self, name: &str) {
        let Some(r) = self.objects.get_mut(name).and_then(|o| o.receptacle.take()) else {
            return;
        };
        if let Some(rec) = self.objects.get_mut(&r) {
            rec.contents.retain(|c| c != name);
        }
    }

    /// Takes an object out of its holder's hands, if held.
    fn release(&mut self, name: &str) {
        let Some(h) = self.objects.get_mut(name).and_then(|o| o.holder.take()) else {
            return;
        };
        if let Some(a) = self.agents.get_mut(&h) {
            a.inventory.retain(|c| c != name);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::testutil::small_world;

    fn add_computer(w: &mut WorldState, on: bool, working: bool) {
        let mut c = w.objects["touchscreen_1"].clone();
        c.name = "computer_1".into();
        c.otype = ObjectType::Computer;
        c.location = "kitchen".into();
        c.receptacle = Some("Countertop1".into());
        c.requires_receptacle = true;
        c.carryable = true;
        c.state.insert("is_turned_on".into(), Value::Bool(on));
        c.state.insert("is_working".into(), Value::Bool(working));
        w.objects.get_mut("Countertop1").unwrap().contents.push("computer_1".into());
        w.objects.insert("computer_1".into(), c);
        w.reindex();
    }

    #[test]
    fn turn_on_messages_follow_reference_phrasing() {
        let mut w = small_world();
        add_computer(&mut w, false, true);
        let out = w.dispatch("irene", "turn_on computer_1");
        assert!(out.success, "{}", out.message);
        assert_eq!(out.message, "computer_1 is now turned on.");
        assert_eq!(out.state_diff.len(), 1);
        assert_eq!(out.state_diff[0].attribute, "is_turned_on");

        let again = w.dispatch("irene", "turn_on computer_1");
        assert!(!again.success);
        assert_eq!(again.message, "computer_1 is already turned on.");
        assert!(again.state_diff.is_empty());
    }

    #[test]
    fn unknown_verb_and_arity_errors() {
        let mut w = small_world();
        let out = w.dispatch("irene", "fly_to roof");
        assert!(!out.success);
        assert_eq!(out.message, "irene cannot perform action fly_to.");

        let out = w.dispatch("irene", "pick_up");
        assert_eq!(out.message, "irene received an incorrect number of arguments for action pick_up.");

        let out = w.dispatch("irene", "   ");
        assert_eq!(out.message, "irene cannot parse command    .");

        let out = w.dispatch("irene", "turn_on laptop_9");
        assert_eq!(out.message, "irene cannot find laptop_9.");
    }

    #[test]
    fn repair_gating_and_messages() {
        let mut w = small_world();
        add_computer(&mut w, true, false);
        // ryan is a receptionist: gated out.
        w.dispatch("ryan", "go_to kitchen");
        let out = w.dispatch("ryan", "repair_computer computer_1");
        assert_eq!(out.message, "ryan cannot perform action repair_computer.");

        let out = w.dispatch("irene", "repair_computer computer_1");
        assert!(out.success);
        assert_eq!(out.message, "irene repaired the computer_1.");
        assert_eq!(out.duration_ticks, 5);
        assert_eq!(w.objects["computer_1"].flag("is_working"), Some(true));

        let out = w.dispatch("irene", "repair_computer computer_1");
        assert_eq!(out.message, "computer_1 is already in working condition.");

        let out = w.dispatch("irene", "repair_computer cup_1");
        assert_eq!(out.message, "cup_1 is not a repairable electronic device.");

        let out = w.dispatch("irene", "repair_computer computer_9");
        assert_eq!(out.message, "irene cannot find computer_9 in the current location.");
    }

    #[test]
    fn movement_duration_and_failures() {
        let mut w = small_world();
        let out = w.dispatch("irene", "go_to meeting_room1");
        assert!(out.success);
        assert_eq!(out.duration_ticks, 1);
        let out = w.dispatch("irene", "go_to meeting_room1");
        assert!(!out.success);
        assert!(out.state_diff.is_empty());
        assert!(w.check_invariants().is_empty());
    }

    #[test]
    fn closed_cabinet_hides_its_contents() {
        let mut w = small_world();
        // Move cup_1 into the closed cabinet by hand.
        w.dispatch("irene", "pick_up cup_1");
        w.dispatch("irene", "open Cabinet1");
        assert!(w.dispatch("irene", "put_in cup_1 Cabinet1").success);
        assert!(w.dispatch("irene", "close Cabinet1").success);
        let out = w.dispatch("irene", "pick_up cup_1");
        assert!(!out.success);
        assert_eq!(out.message, "irene cannot find cup_1.");
        assert!(w.check_invariants().is_empty());
    }

    #[test]
    fn carried_objects_travel_with_agent() {
        let mut w = small_world();
        assert!(w.dispatch("irene", "pick_up cup_1").success);
        assert!(w.dispatch("irene", "go_to meeting_room1").success);
        assert_eq!(w.objects["cup_1"].location, "meeting_room1");
        assert!(w.check_invariants().is_empty());
    }

    #[test]
    fn booking_password_and_overlap() {
        let mut w = small_world();
        let pw = w.settings.booking_password.clone().unwrap();
        let cmd = |p: &str| {
            format!(
                "book_meeting_room touchscreen_1 meeting_room1 Lunch_and_Listen 2024-09-02T12:00:00 2024-09-02T13:00:00 {p}"
            )
        };
        let out = w.dispatch("ryan", &cmd("hunter2"));
        assert!(!out.success);
        assert_eq!(out.message, "ryan entered an incorrect password.");
        assert!(w.bookings.is_empty());

        let out = w.dispatch("ryan", &cmd(&pw));
        assert!(out.success, "{}", out.message);
        assert_eq!(w.bookings.len(), 1);
        assert_eq!(w.bookings[0].name, "Lunch and Listen");
        assert_eq!(out.duration_ticks, 1, "receptionists book twice as fast");

        let out = w.dispatch("ryan", &cmd(&pw));
        assert!(!out.success);
        assert!(out.message.contains("already booked"));
        assert_eq!(w.bookings.len(), 1);

        let out = w.dispatch(
            "ryan",
            &format!("book_meeting_room touchscreen_1 meeting_room1 X 2024-09-02T14:00 2024-09-02T15:00:00 {pw}"),
        );
        assert!(out.message.contains("malformed"));
    }

    #[test]
    fn dispatch_is_deterministic() {
        let mut a = small_world();
        let mut b = small_world();
        for cmd in ["pick_up cup_1", "go_to meeting_room1", "drop cup_1", "look_around"] {
            assert_eq!(a.dispatch("irene", cmd), b.dispatch("irene", cmd));
        }
        assert_eq!(a, b);
    }

    #[test]
    fn event_tokens_round_trip() {
        assert_eq!(event_token("Lunch and Listen"), "Lunch_and_Listen");
        assert_eq!(event_from_token("Lunch_and_Listen"), "Lunch and Listen");
    }
}
