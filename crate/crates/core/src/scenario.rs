//! Scenario files: parsing, validation and instantiation.
//!
//! The format is the plain `locations` / `location_distances` /
//! `receptacles` / `objects` / `agents` layout, plus an optional `settings`
//! object. Unknown keys are rejected.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{role_definition, ObjectType, Role, COMMON_STATE_KEYS};
use crate::error::ScenarioError;
use crate::needs::{NeedsModel, NeedsState};
use crate::world::{
    AgentProfile, AgentState, Knowledge, Location, ObjectEntity, WorldSettings, WorldState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub locations: Vec<String>,
    pub location_distances: BTreeMap<String, BTreeMap<String, u32>>,
    pub receptacles: Vec<ReceptacleConfig>,
    pub objects: Vec<ObjectConfig>,
    pub agents: Vec<AgentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<ScenarioSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceptacleConfig {
    pub name: String,
    pub location: String,
    pub rtype: ObjectType,
    pub weight_kg: f64,
    pub state: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub name: String,
    pub otype: ObjectType,
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receptacle: Option<String>,
    pub weight_kg: f64,
    pub state: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carryable: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires_receptacle: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub name: String,
    pub gender: String,
    pub role: Role,
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fullness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub social_fulfillment: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bladder: Option<f64>,
    pub strength_kg: f64,
    pub internal_profile: String,
    pub appearance: String,
}

/// Partial need levels; unset fields keep their previous value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeedsOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fullness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub social_fulfillment: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bladder: Option<f64>,
}

impl NeedsOverride {
    fn apply(&self, n: &mut NeedsState) {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut n.fullness, self.fullness);
        set(&mut n.hydration, self.hydration);
        set(&mut n.energy, self.energy);
        set(&mut n.social_fulfillment, self.social_fulfillment);
        set(&mut n.bladder, self.bladder);
    }

    fn values(&self) -> impl Iterator<Item = (&'static str, f64)> {
        [
            ("fullness", self.fullness),
            ("hydration", self.hydration),
            ("energy", self.energy),
            ("social_fulfillment", self.social_fulfillment),
            ("bladder", self.bladder),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub booking_password: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub needs_model: Option<NeedsModel>,
    /// Applied to every agent after its own need fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_needs: Option<NeedsOverride>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unlimited_locations: Vec<String>,
    /// Agent name to beverage preference ("water" or "coffee").
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub preferences: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{s}: {}: {}", self.path, self.message)
    }
}

/// Parses scenario JSON. Syntax errors carry line/column, schema errors the
/// offending path.
pub fn parse(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            ScenarioError::Syntax {
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        } else {
            ScenarioError::Schema {
                path,
                message: inner.to_string(),
            }
        }
    })?;
    if cfg.locations.is_empty() {
        return Err(ScenarioError::Schema {
            path: "locations".into(),
            message: "at least one location is required".into(),
        });
    }
    Ok(cfg)
}

/// Canonical pretty-printed form; `parse(serialize(c)) == c`.
pub fn serialize(cfg: &ScenarioConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("config serializes");
    s.push('\n');
    s
}

/// Parses and validates; any error diagnostic fails.
pub fn load(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg = parse(text)?;
    let errs: Vec<Diagnostic> = validate(&cfg)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ScenarioError::Invalid(errs))
    }
}

pub fn load_file(path: &std::path::Path) -> Result<ScenarioConfig, ScenarioError> {
    load(&std::fs::read_to_string(path)?)
}

struct Diags(Vec<Diagnostic>);

impl Diags {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }
}

fn check_state(d: &mut Diags, path: &str, otype: ObjectType, state: &BTreeMap<String, Value>) {
    for (k, v) in state {
        let p = format!("{path}.state.{k}");
        if k == "temperature" {
            if !v.is_number() {
                d.error(p, "temperature must be a number");
            }
        } else if k == "contains" {
            if !v.is_string() && !v.is_null() {
                d.error(p, "contains must be a string");
            }
        } else if COMMON_STATE_KEYS.contains(&k.as_str()) || otype.extra_state_keys().contains(&k.as_str()) {
            if !v.is_boolean() {
                d.error(p, format!("{k} must be a boolean"));
            }
        } else {
            d.error(p, format!("unknown state key `{k}` for {otype}"));
        }
    }
}

/// Referential and structural checks. Returns an empty list for a valid config.
// `!(x > 0.0)` also rejects NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate(cfg: &ScenarioConfig) -> Vec<Diagnostic> {
    let mut d = Diags(Vec::new());
    let locs: BTreeSet<&str> = cfg.locations.iter().map(String::as_str).collect();
    let mut names = BTreeSet::new();
    let all_names = cfg
        .locations
        .iter()
        .map(|n| ("locations", n))
        .chain(cfg.receptacles.iter().map(|r| ("receptacles", &r.name)))
        .chain(cfg.objects.iter().map(|o| ("objects", &o.name)))
        .chain(cfg.agents.iter().map(|a| ("agents", &a.name)));
    for (kind, n) in all_names {
        if n.is_empty() || n.contains(char::is_whitespace) {
            d.error(format!("{kind}.{n}"), "names must be non-empty and contain no whitespace");
        }
        if !names.insert(n.as_str()) {
            d.error(format!("{kind}.{n}"), format!("name `{n}` is not unique"));
        }
    }

    for (from, row) in &cfg.location_distances {
        if !locs.contains(from.as_str()) {
            d.error(format!("location_distances.{from}"), format!("unknown location `{from}`"));
        }
        for (to, dist) in row {
            let p = format!("location_distances.{from}.{to}");
            if !locs.contains(to.as_str()) {
                d.error(&p, format!("unknown location `{to}`"));
            }
            if from == to {
                d.error(&p, "a location cannot connect to itself");
            }
            if *dist == 0 {
                d.error(&p, "distances must be positive");
            }
            match cfg.location_distances.get(to).and_then(|r| r.get(from)) {
                Some(back) if back == dist => {}
                Some(back) => d.error(&p, format!("asymmetric distance: {from}->{to}={dist} but {to}->{from}={back}")),
                None => d.error(&p, format!("missing reverse distance {to}->{from}")),
            }
        }
    }
    if let Some(first) = cfg.locations.first() {
        let mut seen = BTreeSet::from([first.as_str()]);
        let mut queue = VecDeque::from([first.as_str()]);
        while let Some(l) = queue.pop_front() {
            for to in cfg.location_distances.get(l).into_iter().flat_map(|r| r.keys()) {
                if seen.insert(to.as_str()) {
                    queue.push_back(to);
                }
            }
        }
        for l in &locs {
            if !seen.contains(l) {
                d.warn(format!("locations.{l}"), format!("`{l}` is unreachable from `{first}`"));
            }
        }
    }

    let mut receptacles: BTreeMap<&str, &ReceptacleConfig> = BTreeMap::new();
    for (i, r) in cfg.receptacles.iter().enumerate() {
        let p = format!("receptacles[{i}]");
        if !r.rtype.is_receptacle() {
            d.error(format!("{p}.rtype"), format!("{} is not a receptacle type", r.rtype));
        }
        if !locs.contains(r.location.as_str()) {
            d.error(format!("{p}.location"), format!("unknown location `{}`", r.location));
        }
        if !(r.weight_kg > 0.0) {
            d.error(format!("{p}.weight_kg"), "weight must be positive");
        }
        if r.capacity == Some(0) {
            d.error(format!("{p}.capacity"), "capacity must be positive");
        }
        check_state(&mut d, &p, r.rtype, &r.state);
        receptacles.insert(&r.name, r);
    }

    let mut load: BTreeMap<&str, u32> = BTreeMap::new();
    for (i, o) in cfg.objects.iter().enumerate() {
        let p = format!("objects[{i}]");
        if o.otype.is_receptacle() {
            d.error(format!("{p}.otype"), format!("{} must be declared under receptacles", o.otype));
        }
        if !locs.contains(o.location.as_str()) {
            d.error(format!("{p}.location"), format!("unknown location `{}`", o.location));
        }
        if !(o.weight_kg > 0.0) {
            d.error(format!("{p}.weight_kg"), "weight must be positive");
        }
        check_state(&mut d, &p, o.otype, &o.state);
        match &o.receptacle {
            Some(r) => match receptacles.get(r.as_str()) {
                None => d.error(format!("{p}.receptacle"), format!("unknown receptacle `{r}`")),
                Some(rec) => {
                    if rec.location != o.location {
                        d.error(
                            format!("{p}.receptacle"),
                            format!("receptacle `{r}` is in {}, not {}", rec.location, o.location),
                        );
                    }
                    *load.entry(rec.name.as_str()).or_default() += 1;
                }
            },
            None => {
                if o.requires_receptacle.unwrap_or(o.otype.default_requires_receptacle()) {
                    d.error(format!("{p}.receptacle"), format!("{} requires a receptacle", o.name));
                }
            }
        }
    }
    for (r, n) in load {
        let rec = receptacles[r];
        let cap = rec.capacity.unwrap_or(rec.rtype.default_capacity());
        if n > cap {
            d.error(format!("receptacles.{r}"), format!("{n} objects exceed capacity {cap}"));
        }
    }

    for (i, a) in cfg.agents.iter().enumerate() {
        let p = format!("agents[{i}]");
        if !locs.contains(a.location.as_str()) {
            d.error(format!("{p}.location"), format!("unknown location `{}`", a.location));
        }
        if !(a.strength_kg > 0.0) {
            d.error(format!("{p}.strength_kg"), "strength must be positive");
        }
        let own = NeedsOverride {
            fullness: a.fullness,
            hydration: a.hydration,
            energy: a.energy,
            social_fulfillment: a.social_fulfillment,
            bladder: a.bladder,
        };
        for (k, v) in own.values() {
            if !(0.0..=100.0).contains(&v) {
                d.error(format!("{p}.{k}"), "need values must lie in [0, 100]");
            }
        }
    }

    if let Some(s) = &cfg.settings {
        if let Some(m) = &s.needs_model {
            if let Err(e) = m.check() {
                d.error("settings.needs_model", e);
            }
        }
        if let Some(n) = &s.initial_needs {
            for (k, v) in n.values() {
                if !(0.0..=100.0).contains(&v) {
                    d.error(format!("settings.initial_needs.{k}"), "need values must lie in [0, 100]");
                }
            }
        }
        for l in &s.unlimited_locations {
            if !locs.contains(l.as_str()) {
                d.error("settings.unlimited_locations", format!("unknown location `{l}`"));
            }
        }
        for (agent, pref) in &s.preferences {
            if !cfg.agents.iter().any(|a| &a.name == agent) {
                d.error(format!("settings.preferences.{agent}"), format!("unknown agent `{agent}`"));
            }
            if pref != "water" && pref != "coffee" {
                d.error(format!("settings.preferences.{agent}"), "preference must be `water` or `coffee`");
            }
        }
        if let Some(pw) = &s.booking_password {
            if pw.is_empty() || pw.contains(char::is_whitespace) {
                d.error("settings.booking_password", "password must be a single non-empty token");
            }
        }
    }
    let has_receptionist = cfg.agents.iter().any(|a| a.role == Role::Receptionist);
    let has_password = cfg.settings.as_ref().is_some_and(|s| s.booking_password.is_some());
    if has_receptionist && !has_password {
        d.warn("settings.booking_password", "a receptionist is present but no booking password is configured");
    }
    d.0
}

/// Builds the tick-0 world. Refuses configs with error diagnostics.
pub fn instantiate(cfg: &ScenarioConfig) -> Result<WorldState, ScenarioError> {
    let errs: Vec<Diagnostic> = validate(cfg)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if !errs.is_empty() {
        return Err(ScenarioError::Invalid(errs));
    }
    let settings = cfg.settings.clone().unwrap_or_default();

    let locations = cfg
        .locations
        .iter()
        .map(|n| {
            let loc = Location {
                name: n.clone(),
                connections: cfg.location_distances.get(n).cloned().unwrap_or_default(),
                agents: BTreeSet::new(),
                objects: BTreeSet::new(),
            };
            (n.clone(), loc)
        })
        .collect();

    let mut objects = BTreeMap::new();
    for r in &cfg.receptacles {
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
                contents: Vec::new(),
                capacity: r.capacity.unwrap_or(r.rtype.default_capacity()),
            },
        );
    }
    for o in &cfg.objects {
        if let Some(r) = &o.receptacle {
            objects.get_mut(r).expect("validated").contents.push(o.name.clone());
        }
        objects.insert(
            o.name.clone(),
            ObjectEntity {
                name: o.name.clone(),
                otype: o.otype,
                location: o.location.clone(),
                receptacle: o.receptacle.clone(),
                holder: None,
                weight_kg: o.weight_kg,
                carryable: o.carryable.unwrap_or(o.otype.default_carryable()),
                requires_receptacle: o.requires_receptacle.unwrap_or(o.otype.default_requires_receptacle()),
                state: o.state.clone(),
                contents: Vec::new(),
                capacity: 0,
            },
        );
    }

    let mut agents = BTreeMap::new();
    for a in &cfg.agents {
        let role = role_definition(a.role);
        let mut needs = NeedsState::default();
        NeedsOverride {
            fullness: a.fullness,
            hydration: a.hydration,
            energy: a.energy,
            social_fulfillment: a.social_fulfillment,
            bladder: a.bladder,
        }
        .apply(&mut needs);
        if let Some(n) = &settings.initial_needs {
            n.apply(&mut needs);
        }
        let mut knowledge = BTreeSet::new();
        if role.knows_booking_password {
            if let Some(pw) = &settings.booking_password {
                knowledge.insert(Knowledge::BookingPassword(pw.clone()));
            }
        }
        agents.insert(
            a.name.clone(),
            AgentState {
                profile: AgentProfile {
                    name: a.name.clone(),
                    gender: a.gender.clone(),
                    role: a.role,
                    strength_kg: a.strength_kg,
                    internal_profile: a.internal_profile.clone(),
                    appearance: a.appearance.clone(),
                    skills: role.skills.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
                    preference: settings.preferences.get(&a.name).cloned(),
                },
                location: a.location.clone(),
                needs,
                inventory: Vec::new(),
                conversation: None,
                knowledge,
            },
        );
    }

    let mut w = WorldState {
        tick: 0,
        location_order: cfg.locations.clone(),
        locations,
        objects,
        agent_order: cfg.agents.iter().map(|a| a.name.clone()).collect(),
        agents,
        conversations: BTreeMap::new(),
        next_session: 0,
        bookings: Vec::new(),
        busy_until: BTreeMap::new(),
        last_actions: BTreeMap::new(),
        settings: WorldSettings {
            booking_password: settings.booking_password.clone(),
            unlimited_locations: settings.unlimited_locations.iter().cloned().collect(),
            needs_model: settings.needs_model.clone().unwrap_or_default(),
            seed: settings.seed.unwrap_or(0),
        },
    };
    w.reindex();
    Ok(w)
}

/// Bundled scenario and goal files.
pub mod fixtures {
    pub const SMALL_OFFICE: &str = include_str!("../fixtures/small_office.json");
    pub const OFFICE_EVENT: &str = include_str!("../fixtures/office_event.json");
    pub const OFFICE_EVENT_GOALS: &str = include_str!("../fixtures/office_event_goals.json");
    pub const OFFICE_EVENT_PLAYBOOK: &str = include_str!("../fixtures/office_event_playbook.json");
    pub const LAYOUT_DESIGN1: &str = include_str!("../fixtures/layout_design1.json");
    pub const LAYOUT_DESIGN2: &str = include_str!("../fixtures/layout_design2.json");
    pub const HYDRATION_2: &str = include_str!("../fixtures/hydration_2.json");
    pub const HYDRATION_4: &str = include_str!("../fixtures/hydration_4.json");
    pub const HYDRATION_8: &str = include_str!("../fixtures/hydration_8.json");
    pub const HYDRATION_2_DOUBLE: &str = include_str!("../fixtures/hydration_2_double.json");
    pub const HYDRATION_4_DOUBLE: &str = include_str!("../fixtures/hydration_4_double.json");
    pub const HYDRATION_8_DOUBLE: &str = include_str!("../fixtures/hydration_8_double.json");
    pub const SCHEMA: &str = include_str!("../fixtures/scenario.schema.json");

    /// Every bundled scenario, by file name.
    pub const SCENARIOS: &[(&str, &str)] = &[
        ("small_office.json", SMALL_OFFICE),
        ("office_event.json", OFFICE_EVENT),
        ("layout_design1.json", LAYOUT_DESIGN1),
        ("layout_design2.json", LAYOUT_DESIGN2),
        ("hydration_2.json", HYDRATION_2),
        ("hydration_4.json", HYDRATION_4),
        ("hydration_8.json", HYDRATION_8),
        ("hydration_2_double.json", HYDRATION_2_DOUBLE),
        ("hydration_4_double.json", HYDRATION_4_DOUBLE),
        ("hydration_8_double.json", HYDRATION_8_DOUBLE),
    ];
}
