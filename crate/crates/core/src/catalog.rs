//! The fixed action catalog: verbs, object types and agent roles.
//!
//! Action logic lives in `world::rules`; this module holds the declarative
//! side (arity, gating, durations, capability scaling) that both the engine
//! and the `actions.json` reference are built from.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CatalogError;

macro_rules! string_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = CatalogError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(CatalogError::Unknown {
                        kind: stringify!($name),
                        name: other.to_string(),
                    }),
                }
            }
        }
    };
}

string_enum! {
    /// Predefined object types. The last seven are receptacle types.
    pub enum ObjectType {
        Chair => "Chair",
        Plate => "Plate",
        Knife => "Knife",
        Fork => "Fork",
        Cup => "Cup",
        Bread => "Bread",
        Apple => "Apple",
        Meal => "Meal",
        TeaBag => "TeaBag",
        CoffeeBean => "CoffeeBean",
        Computer => "Computer",
        Projector => "Projector",
        Microphone => "Microphone",
        TouchScreen => "TouchScreen",
        CoffeeMachine => "CoffeeMachine",
        WaterDispenser => "WaterDispenser",
        Microwave => "Microwave",
        Toilet => "Toilet",
        Table => "Table",
        Podium => "Podium",
        Sinkbasin => "Sinkbasin",
        Cabinet => "Cabinet",
        Countertop => "Countertop",
        Desk => "Desk",
        Fridge => "Fridge",
    }
}

impl ObjectType {
    pub fn is_receptacle(self) -> bool {
        matches!(
            self,
            ObjectType::Table
                | ObjectType::Podium
                | ObjectType::Sinkbasin
                | ObjectType::Cabinet
                | ObjectType::Countertop
                | ObjectType::Desk
                | ObjectType::Fridge
        )
    }

    /// Receptacles objects are put *on* (as opposed to *in*).
    pub fn is_surface(self) -> bool {
        matches!(
            self,
            ObjectType::Table | ObjectType::Podium | ObjectType::Countertop | ObjectType::Desk
        )
    }

    /// Moved with `move_furniture` rather than carried.
    pub fn is_furniture(self) -> bool {
        matches!(self, ObjectType::Table | ObjectType::Chair | ObjectType::Podium)
    }

    pub fn is_utensil(self) -> bool {
        matches!(
            self,
            ObjectType::Plate | ObjectType::Knife | ObjectType::Fork | ObjectType::Cup
        )
    }

    pub fn is_food(self) -> bool {
        matches!(self, ObjectType::Bread | ObjectType::Apple | ObjectType::Meal)
    }

    pub fn is_consumable(self) -> bool {
        self.is_food() || self == ObjectType::TeaBag
    }

    /// Electronic devices an IT administrator can repair.
    pub fn is_repairable(self) -> bool {
        self.repair_verb().is_some()
    }

    pub fn repair_verb(self) -> Option<Verb> {
        match self {
            ObjectType::Computer => Some(Verb::RepairComputer),
            ObjectType::Projector => Some(Verb::RepairProjector),
            ObjectType::Microphone => Some(Verb::RepairMicrophone),
            ObjectType::CoffeeMachine => Some(Verb::RepairCoffeeMachine),
            ObjectType::WaterDispenser => Some(Verb::RepairWaterDispenser),
            ObjectType::Microwave => Some(Verb::RepairMicrowave),
            _ => None,
        }
    }

    pub fn default_carryable(self) -> bool {
        !self.is_receptacle()
            && !matches!(
                self,
                ObjectType::Chair
                    | ObjectType::TouchScreen
                    | ObjectType::CoffeeMachine
                    | ObjectType::WaterDispenser
                    | ObjectType::Microwave
                    | ObjectType::Toilet
            )
    }

    pub fn default_requires_receptacle(self) -> bool {
        matches!(
            self,
            ObjectType::Plate
                | ObjectType::Knife
                | ObjectType::Fork
                | ObjectType::Cup
                | ObjectType::Bread
                | ObjectType::Apple
                | ObjectType::Meal
                | ObjectType::TeaBag
                | ObjectType::CoffeeBean
                | ObjectType::Computer
                | ObjectType::Projector
                | ObjectType::Microphone
        )
    }

    pub fn default_capacity(self) -> u32 {
        match self {
            ObjectType::Table | ObjectType::Countertop => 20,
            _ => 10,
        }
    }

    /// Type-specific state keys accepted beyond the common ones.
    pub fn extra_state_keys(self) -> &'static [&'static str] {
        match self {
            ObjectType::Cup => &["contains"],
            _ => &[],
        }
    }
}

/// State keys every object type accepts.
pub const COMMON_STATE_KEYS: &[&str] = &[
    "is_clean",
    "is_turned_on",
    "is_working",
    "fixed",
    "closable",
    "is_open",
    "temperature",
];

string_enum! {
    pub enum Role {
        Janitor => "janitor",
        ItAdmin => "IT_admin",
        Receptionist => "receptionist",
        SoftwareEngineer => "software_engineer",
    }
}

string_enum! {
    pub enum Verb {
        GoTo => "go_to",
        PickUp => "pick_up",
        Drop => "drop",
        PutOn => "put_on",
        PutIn => "put_in",
        Open => "open",
        Close => "close",
        GiveTo => "give_to",
        LookAround => "look_around",
        TurnOn => "turn_on",
        TurnOff => "turn_off",
        RepairComputer => "repair_computer",
        RepairProjector => "repair_projector",
        RepairMicrophone => "repair_microphone",
        RepairCoffeeMachine => "repair_coffee_machine",
        RepairWaterDispenser => "repair_water_dispenser",
        RepairMicrowave => "repair_microwave",
        Clean => "clean",
        WashHands => "wash_hands",
        BrewCoffee => "brew_coffee",
        MakeTea => "make_tea",
        DispenseWater => "dispense_water",
        HeatFood => "heat_food",
        Eat => "eat",
        Drink => "drink",
        UseRestroom => "use_restroom",
        Rest => "rest",
        FetchMeal => "fetch_meal",
        RefillSupplies => "refill_supplies",
        WorkAtDesk => "work_at_desk",
        BookMeetingRoom => "book_meeting_room",
        CheckBookings => "check_bookings",
        MoveFurniture => "move_furniture",
        InspectDevice => "inspect_device",
        InitiatingChat => "initiating_chat",
        StayChat => "stay_chat",
        EndChat => "end_chat",
        JoinChat => "join_chat",
    }
}

impl Verb {
    pub fn is_repair(self) -> bool {
        matches!(
            self,
            Verb::RepairComputer
                | Verb::RepairProjector
                | Verb::RepairMicrophone
                | Verb::RepairCoffeeMachine
                | Verb::RepairWaterDispenser
                | Verb::RepairMicrowave
        )
    }

    pub fn is_conversation(self) -> bool {
        matches!(
            self,
            Verb::InitiatingChat | Verb::StayChat | Verb::EndChat | Verb::JoinChat
        )
    }

    pub fn spec(self) -> &'static ActionSpec {
        &CATALOG[self as usize]
    }
}

/// How an action's base duration is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationRule {
    Fixed(u32),
    /// Travel distance between locations (minimum 1).
    Distance,
    /// Travel distance plus a fixed handling overhead.
    DistancePlus(u32),
}

impl DurationRule {
    pub fn base(self, distance: Option<u32>) -> u32 {
        match self {
            DurationRule::Fixed(n) => n,
            DurationRule::Distance => distance.unwrap_or(1).max(1),
            DurationRule::DistancePlus(n) => distance.unwrap_or(1).max(1) + n,
        }
    }
}

/// Declarative description of one action type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionSpec {
    pub verb: Verb,
    /// Argument placeholders; their count is the arity.
    pub args: &'static [&'static str],
    /// Skill an agent must hold to perform the action at all.
    pub role_gate: Option<&'static str>,
    pub base_duration: DurationRule,
    pub preconditions: &'static [&'static str],
    pub effects: &'static [&'static str],
}

impl ActionSpec {
    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn usage(&self) -> String {
        let mut s = self.verb.as_str().to_string();
        for a in self.args {
            s.push_str(" <");
            s.push_str(a);
            s.push('>');
        }
        s
    }

    /// Duration multiplier per role, derived from the role definitions.
    pub fn scaling(&self) -> BTreeMap<Role, f64> {
        Role::ALL
            .iter()
            .filter_map(|&r| {
                let def = role_definition(r);
                let gated_out = self
                    .role_gate
                    .is_some_and(|g| !def.skills.contains_key(g));
                (!gated_out).then(|| (r, def.multiplier(self.verb)))
            })
            .collect()
    }
}

macro_rules! spec {
    ($verb:ident, [$($arg:literal),*], $gate:expr, $dur:expr, [$($pre:literal),*], [$($eff:literal),*]) => {
        ActionSpec {
            verb: Verb::$verb,
            args: &[$($arg),*],
            role_gate: $gate,
            base_duration: $dur,
            preconditions: &[$($pre),*],
            effects: &[$($eff),*],
        }
    };
}

use DurationRule::{Distance, DistancePlus, Fixed};

/// Indexed by `Verb as usize`.
static CATALOG: [ActionSpec; 38] = [
    spec!(GoTo, ["location"], None, Distance,
        ["location connected to current location"],
        ["agent.location := location", "held objects move along", "leave conversation"]),
    spec!(PickUp, ["object"], None, Fixed(1),
        ["object accessible", "object carryable", "fewer than 2 held objects", "carried weight + object weight <= strength_kg"],
        ["object.holder := agent", "object.receptacle := none"]),
    spec!(Drop, ["object"], None, Fixed(1),
        ["object held", "floor allowed or an open local receptacle has room"],
        ["object placed on floor or first open local receptacle"]),
    spec!(PutOn, ["object", "receptacle"], None, Fixed(1),
        ["object held", "receptacle is a local surface with room"],
        ["object.receptacle := receptacle"]),
    spec!(PutIn, ["object", "receptacle"], None, Fixed(1),
        ["object held", "receptacle is a local open container with room"],
        ["object.receptacle := receptacle"]),
    spec!(Open, ["receptacle"], None, Fixed(1),
        ["receptacle local", "closable", "is_open = false"],
        ["is_open := true"]),
    spec!(Close, ["receptacle"], None, Fixed(1),
        ["receptacle local", "closable", "is_open = true"],
        ["is_open := false"]),
    spec!(GiveTo, ["object", "agent"], None, Fixed(1),
        ["object held", "recipient co-located with a free hand and enough strength"],
        ["object.holder := recipient"]),
    spec!(LookAround, [], None, Fixed(1), [], []),
    spec!(TurnOn, ["device"], None, Fixed(1),
        ["device accessible", "is_turned_on = false"],
        ["is_turned_on := true"]),
    spec!(TurnOff, ["device"], None, Fixed(1),
        ["device accessible", "is_turned_on = true"],
        ["is_turned_on := false"]),
    spec!(RepairComputer, ["device"], Some("repair_computer"), Fixed(5),
        ["device accessible", "repairable type", "is_working = false"],
        ["is_working := true"]),
    spec!(RepairProjector, ["device"], Some("repair_projector"), Fixed(5),
        ["device accessible", "repairable type", "is_working = false"],
        ["is_working := true"]),
    spec!(RepairMicrophone, ["device"], Some("repair_microphone"), Fixed(5),
        ["device accessible", "repairable type", "is_working = false"],
        ["is_working := true"]),
    spec!(RepairCoffeeMachine, ["device"], Some("repair_coffee_machine"), Fixed(5),
        ["device accessible", "repairable type", "is_working = false"],
        ["is_working := true"]),
    spec!(RepairWaterDispenser, ["device"], Some("repair_water_dispenser"), Fixed(5),
        ["device accessible", "repairable type", "is_working = false"],
        ["is_working := true"]),
    spec!(RepairMicrowave, ["device"], Some("repair_microwave"), Fixed(5),
        ["device accessible", "repairable type", "is_working = false"],
        ["is_working := true"]),
    spec!(Clean, ["utensil"], None, Fixed(4),
        ["utensil held", "is_clean = false", "free working Sinkbasin local"],
        ["is_clean := true", "contains := none", "sink busy for duration"]),
    spec!(WashHands, [], None, Fixed(1), ["Sinkbasin local"], []),
    spec!(BrewCoffee, ["cup", "machine"], None, Fixed(2),
        ["clean empty cup held", "machine is a free, working, turned-on CoffeeMachine"],
        ["cup.contains := coffee", "machine busy for duration"]),
    spec!(MakeTea, ["cup", "machine"], None, Fixed(2),
        ["clean empty cup held", "machine is a free, working, turned-on CoffeeMachine or WaterDispenser", "TeaBag accessible"],
        ["cup.contains := tea", "one TeaBag consumed", "machine busy for duration"]),
    spec!(DispenseWater, ["cup", "dispenser"], None, Fixed(2),
        ["clean empty cup held", "dispenser is a free, working WaterDispenser"],
        ["cup.contains := water", "dispenser busy for duration"]),
    spec!(HeatFood, ["food", "microwave"], None, Fixed(3),
        ["food held", "microwave is a free, working Microwave"],
        ["food.temperature := 70", "microwave busy for duration"]),
    spec!(Eat, ["food"], None, Fixed(5),
        ["food held"],
        ["food consumed", "fullness += eat_restore"]),
    spec!(Drink, ["cup"], None, Fixed(1),
        ["cup held", "cup contains a beverage"],
        ["cup.contains := none", "cup.is_clean := false", "hydration += drink_restore", "bladder += drink_bladder"]),
    spec!(UseRestroom, [], None, Fixed(3),
        ["free working Toilet local"],
        ["bladder := 0", "toilet busy for duration"]),
    spec!(Rest, [], None, Fixed(10), ["not in a conversation"], ["energy += rest_restore"]),
    spec!(FetchMeal, [], None, Fixed(10),
        ["location has unlimited resources"],
        ["fullness += eat_restore"]),
    spec!(RefillSupplies, [], None, Fixed(5),
        ["location has unlimited resources"],
        ["hydration += drink_restore", "bladder += drink_bladder"]),
    spec!(WorkAtDesk, [], None, Fixed(10), ["Desk local"], []),
    spec!(BookMeetingRoom, ["terminal", "room", "event", "start", "end", "password"], None, Fixed(2),
        ["terminal local (TouchScreen books its own room; turned-on Computer books any room)", "well-formed start < end", "password matches", "no overlapping booking for room"],
        ["booking record appended"]),
    spec!(CheckBookings, [], None, Fixed(1), ["usable terminal local"], []),
    spec!(MoveFurniture, ["furniture", "location"], None, DistancePlus(1),
        ["furniture local and not fixed", "hands empty", "furniture weight (with contents) <= strength_kg", "location connected"],
        ["furniture and agent relocate", "contents move along", "leave conversation"]),
    spec!(InspectDevice, ["device"], Some("inspect_device"), Fixed(1),
        ["device accessible", "device reports is_working"], []),
    spec!(InitiatingChat, ["agent"], None, Fixed(1),
        ["peer co-located", "neither agent in a conversation"],
        ["new session with both agents", "opening utterance recorded"]),
    spec!(StayChat, [], None, Fixed(1),
        ["agent in a conversation"],
        ["utterance recorded", "every participant social_fulfillment += chat_restore"]),
    spec!(EndChat, [], None, Fixed(1),
        ["agent in a conversation"],
        ["agent leaves", "sessions with fewer than 2 participants dissolve"]),
    spec!(JoinChat, ["session"], None, Fixed(1),
        ["session at agent's location", "agent not in a conversation"],
        ["agent joins session"]),
];

pub fn catalog() -> &'static [ActionSpec] {
    &CATALOG
}

pub fn lookup(verb: &str) -> Option<&'static ActionSpec> {
    Verb::from_str(verb).ok().map(Verb::spec)
}

/// Skill proficiencies and private knowledge attached to a role.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoleDefinition {
    pub role: Role,
    /// Skill name (a verb) to duration multiplier; below 1.0 is faster.
    pub skills: BTreeMap<&'static str, f64>,
    /// Whether the role is granted the scenario's booking password.
    pub knows_booking_password: bool,
}

impl RoleDefinition {
    pub fn multiplier(&self, verb: Verb) -> f64 {
        self.skills.get(verb.as_str()).copied().unwrap_or(1.0)
    }
}

pub fn role_definition(role: Role) -> RoleDefinition {
    let skills: &[(&'static str, f64)] = match role {
        Role::Janitor => &[("clean", 0.5), ("wash_hands", 0.5), ("move_furniture", 1.0)],
        Role::ItAdmin => &[
            ("repair_computer", 1.0),
            ("repair_projector", 1.0),
            ("repair_microphone", 1.0),
            ("repair_coffee_machine", 1.0),
            ("repair_water_dispenser", 1.0),
            ("repair_microwave", 1.0),
            ("inspect_device", 1.0),
        ],
        Role::Receptionist => &[("book_meeting_room", 0.5), ("check_bookings", 1.0)],
        Role::SoftwareEngineer => &[("work_at_desk", 0.8)],
    };
    RoleDefinition {
        role,
        skills: skills.iter().copied().collect(),
        knows_booking_password: role == Role::Receptionist,
    }
}

pub fn roles() -> Vec<RoleDefinition> {
    Role::ALL.iter().map(|&r| role_definition(r)).collect()
}

/// Whether an agent holding `skills` may perform `spec` at all.
pub fn qualifies(spec: &ActionSpec, skills: &BTreeMap<String, f64>) -> bool {
    spec.role_gate.is_none_or(|g| skills.contains_key(g))
}

/// `ceil(base * multiplier)`, at least one tick. `distance` feeds
/// distance-based rules and is ignored otherwise.
pub fn effective_duration(
    spec: &ActionSpec,
    skills: &BTreeMap<String, f64>,
    distance: Option<u32>,
) -> Result<u32, CatalogError> {
    if !qualifies(spec, skills) {
        return Err(CatalogError::NotQualified {
            verb: spec.verb.as_str(),
            skill: spec.role_gate.unwrap_or_default(),
        });
    }
    let base = spec.base_duration.base(distance);
    let mult = skills.get(spec.verb.as_str()).copied().unwrap_or(1.0);
    let ticks = (base as f64 * mult).ceil() as u32;
    Ok(ticks.max(1))
}

/// Machine-readable reference of verbs, object types and roles.
pub fn actions_json() -> Value {
    let verbs: Vec<Value> = catalog()
        .iter()
        .map(|s| {
            let base = match s.base_duration {
                Fixed(n) => json!({ "fixed": n }),
                Distance => json!("distance"),
                DistancePlus(n) => json!({ "distance_plus": n }),
            };
            json!({
                "verb": s.verb,
                "arity": s.arity(),
                "usage": s.usage(),
                "role_gate": s.role_gate,
                "base_duration": base,
                "scaling": s.scaling().into_iter().map(|(r, m)| (r.as_str().to_string(), json!(m))).collect::<serde_json::Map<_, _>>(),
                "preconditions": s.preconditions,
                "effects": s.effects,
            })
        })
        .collect();
    let object_types: Vec<&str> = ObjectType::ALL
        .iter()
        .filter(|t| !t.is_receptacle())
        .map(|t| t.as_str())
        .collect();
    let receptacle_types: Vec<&str> = ObjectType::ALL
        .iter()
        .filter(|t| t.is_receptacle())
        .map(|t| t.as_str())
        .collect();
    json!({
        "verbs": verbs,
        "object_types": object_types,
        "receptacle_types": receptacle_types,
        "roles": roles(),
    })
}
