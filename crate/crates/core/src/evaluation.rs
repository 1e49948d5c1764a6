//! Goal specifications and instance/attribute task-completion scores.
//!
//! Each condition asks for `count` objects of a type (or one named object)
//! with a set of desired attribute values. A condition independently picks
//! its best `count` candidates by number of matched attributes; IS counts
//! fully matching picks, AS counts matched (object, attribute) pairs.
//! Conditions average into tasks and tasks into the overall score,
//! unweighted.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{ObjectType, Role, COMMON_STATE_KEYS};
use crate::error::EvalError;
use crate::scenario::fixtures;
use crate::world::{Booking, EventRequest, WorldState, DERIVED_ATTRIBUTES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub description: String,
    /// Roles the task suits; empty means any role.
    #[serde(default)]
    pub preferred_roles: Vec<Role>,
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Condition {
    Booking { booking: EventRequest },
    Objects(ObjectCondition),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectCondition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub otype: Option<ObjectType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub count: u32,
    pub attributes: BTreeMap<String, Value>,
}

fn one() -> u32 {
    1
}

const BOOKING_ATTRIBUTES: [&str; 3] = ["name", "start", "end"];

impl Condition {
    /// Number of instances the condition requires.
    pub fn required(&self) -> u32 {
        match self {
            Condition::Booking { .. } => 1,
            Condition::Objects(c) if c.name.is_some() => 1,
            Condition::Objects(c) => c.count,
        }
    }

    pub fn attribute_count(&self) -> usize {
        match self {
            Condition::Booking { .. } => BOOKING_ATTRIBUTES.len(),
            Condition::Objects(c) => c.attributes.len(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Condition::Booking { booking: b } => {
                format!("{} booked for \"{}\" from {} to {}", b.room, b.name, b.start, b.end)
            }
            Condition::Objects(c) => {
                let who = match (&c.name, c.otype) {
                    (Some(n), _) => n.clone(),
                    (None, Some(t)) => format!("{} x {t}", c.count),
                    (None, None) => "?".into(),
                };
                let attrs: Vec<String> = c.attributes.iter().map(|(k, v)| format!("{k}={}", show(v))).collect();
                format!("{who} with {}", attrs.join(", "))
            }
        }
    }

    /// Whether `otype`/`name` is selected by this condition.
    pub fn selects(&self, name: &str, otype: ObjectType) -> bool {
        match self {
            Condition::Booking { .. } => false,
            Condition::Objects(c) => match &c.name {
                Some(n) => n == name,
                None => c.otype == Some(otype),
            },
        }
    }
}

pub(crate) fn show(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "none".into(),
        other => other.to_string(),
    }
}

/// Numeric values compare by magnitude; everything else structurally.
pub fn values_match(desired: &Value, actual: &Value) -> bool {
    match (desired.as_f64(), actual.as_f64()) {
        (Some(a), Some(b)) => a == b,
        _ => desired == actual,
    }
}

/// Anything goals can be evaluated against: the true world or an agent's
/// belief about it.
pub trait Observable {
    /// Names of known instances of `otype`, sorted.
    fn instances(&self, otype: ObjectType) -> Vec<String>;
    /// Type of a known object, if any.
    fn otype_of(&self, name: &str) -> Option<ObjectType>;
    fn attribute(&self, name: &str, key: &str) -> Value;
    fn known_bookings(&self) -> Vec<Booking>;
}

impl Observable for WorldState {
    fn instances(&self, otype: ObjectType) -> Vec<String> {
        self.objects.values().filter(|o| o.otype == otype).map(|o| o.name.clone()).collect()
    }

    fn otype_of(&self, name: &str) -> Option<ObjectType> {
        self.objects.get(name).map(|o| o.otype)
    }

    fn attribute(&self, name: &str, key: &str) -> Value {
        self.objects
            .get(name)
            .map_or(Value::Null, |o| self.object_attribute(o, key))
    }

    fn known_bookings(&self) -> Vec<Booking> {
        self.bookings.clone()
    }
}

/// Score of one condition under its best assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionScore {
    pub satisfied: u32,
    pub required: u32,
    pub matched_pairs: u32,
    pub required_pairs: u32,
}

impl ConditionScore {
    pub fn instance(&self) -> f64 {
        if self.required == 0 {
            1.0
        } else {
            (self.satisfied as f64 / self.required as f64).min(1.0)
        }
    }

    pub fn attribute(&self) -> f64 {
        if self.required_pairs == 0 {
            self.instance()
        } else {
            self.matched_pairs as f64 / self.required_pairs as f64
        }
    }

    pub fn is_met(&self) -> bool {
        self.satisfied >= self.required
    }
}

/// Matched-attribute count of every candidate for a condition, sorted best first.
pub fn candidate_matches(src: &dyn Observable, cond: &Condition) -> Vec<(String, u32)> {
    let mut out: Vec<(String, u32)> = match cond {
        Condition::Booking { booking } => src
            .known_bookings()
            .iter()
            .filter(|b| b.room == booking.room)
            .enumerate()
            .map(|(i, b)| {
                let m = [(&b.name, &booking.name), (&b.start, &booking.start), (&b.end, &booking.end)]
                    .iter()
                    .filter(|(x, y)| x == y)
                    .count() as u32;
                (format!("booking_{i}"), m)
            })
            .collect(),
        Condition::Objects(c) => {
            let names = match (&c.name, c.otype) {
                (Some(n), _) => src.otype_of(n).map(|_| vec![n.clone()]).unwrap_or_default(),
                (None, Some(t)) => src.instances(t),
                (None, None) => Vec::new(),
            };
            names
                .into_iter()
                .map(|n| {
                    let m = c
                        .attributes
                        .iter()
                        .filter(|(k, v)| values_match(v, &src.attribute(&n, k)))
                        .count() as u32;
                    (n, m)
                })
                .collect()
        }
    };
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Greedy top-k assignment. Because each condition is scored on its own,
/// taking the k candidates with the most matches maximises both the
/// fully-matched count and the matched-pair sum.
pub fn condition_score(src: &dyn Observable, cond: &Condition) -> ConditionScore {
    let k = cond.required();
    let n = cond.attribute_count() as u32;
    let picked: Vec<u32> = candidate_matches(src, cond).into_iter().take(k as usize).map(|c| c.1).collect();
    ConditionScore {
        satisfied: picked.iter().filter(|&&m| m == n).count() as u32,
        required: k,
        matched_pairs: picked.iter().sum(),
        required_pairs: k * n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub id: String,
    pub instance: f64,
    pub attribute: f64,
    pub conditions: Vec<ConditionScore>,
}

/// Per-task and average IS/AS, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub tasks: Vec<TaskScore>,
    pub instance_average: f64,
    pub attribute_average: f64,
}

/// Per-task fractions and their average, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub per_task: Vec<(String, f64)>,
    pub average: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        1.0
    } else {
        s / n as f64
    }
}

pub fn score(src: &dyn Observable, goal: &GoalSpec) -> ScoreReport {
    let tasks: Vec<TaskScore> = goal
        .tasks
        .iter()
        .map(|t| {
            let conditions: Vec<ConditionScore> = t.conditions.iter().map(|c| condition_score(src, c)).collect();
            TaskScore {
                id: t.id.clone(),
                instance: 100.0 * mean(conditions.iter().map(ConditionScore::instance)),
                attribute: 100.0 * mean(conditions.iter().map(ConditionScore::attribute)),
                conditions,
            }
        })
        .collect();
    ScoreReport {
        instance_average: mean(tasks.iter().map(|t| t.instance / 100.0)) * 100.0,
        attribute_average: mean(tasks.iter().map(|t| t.attribute / 100.0)) * 100.0,
        tasks,
    }
}

pub fn instance_score(src: &dyn Observable, goal: &GoalSpec) -> Scores {
    let r = score(src, goal);
    Scores {
        per_task: r.tasks.iter().map(|t| (t.id.clone(), t.instance)).collect(),
        average: r.instance_average,
    }
}

pub fn attribute_score(src: &dyn Observable, goal: &GoalSpec) -> Scores {
    let r = score(src, goal);
    Scores {
        per_task: r.tasks.iter().map(|t| (t.id.clone(), t.attribute)).collect(),
        average: r.attribute_average,
    }
}

impl ScoreReport {
    pub fn all_met(&self) -> bool {
        self.tasks.iter().all(|t| t.conditions.iter().all(ConditionScore::is_met))
    }

    /// Two-column text table: task, IS, AS.
    pub fn to_table(&self) -> String {
        let mut s = String::from("task   IS      AS\n");
        for t in &self.tasks {
            let _ = writeln!(s, "{:<6} {:>6.1}  {:>6.1}", t.id, t.instance, t.attribute);
        }
        let _ = writeln!(s, "{:<6} {:>6.1}  {:>6.1}", "avg", self.instance_average, self.attribute_average);
        s
    }
}

impl GoalSpec {
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let g: GoalSpec = serde_path_to_error::deserialize(de)
            .map_err(|e| EvalError::Parse(format!("{}: {}", e.path(), e.inner())))?;
        for t in &g.tasks {
            for c in &t.conditions {
                if let Condition::Objects(o) = c {
                    if o.name.is_none() == o.otype.is_none() {
                        return Err(EvalError::Parse(format!(
                            "task {}: a condition needs exactly one of `otype` or `name`",
                            t.id
                        )));
                    }
                    if o.count == 0 {
                        return Err(EvalError::Parse(format!("task {}: count must be positive", t.id)));
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn load_file(path: &std::path::Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("goal serializes")
    }

    /// Booking requests the goal asks for.
    pub fn event_requests(&self) -> Vec<EventRequest> {
        self.tasks
            .iter()
            .flat_map(|t| &t.conditions)
            .filter_map(|c| match c {
                Condition::Booking { booking } => Some(booking.clone()),
                _ => None,
            })
            .collect()
    }

    /// Checks the goal against a scenario's initial world: selectors resolve,
    /// counts fit, attribute keys exist for the type, booking rooms exist and
    /// a booking password is configured when a booking is required.
    pub fn check(&self, world: &WorldState) -> Result<(), EvalError> {
        let mut errs = Vec::new();
        for t in &self.tasks {
            for c in &t.conditions {
                match c {
                    Condition::Booking { booking: b } => {
                        if !world.locations.contains_key(&b.room) {
                            errs.push(format!("{}: unknown room `{}`", t.id, b.room));
                        }
                        if b.start >= b.end {
                            errs.push(format!("{}: booking start must precede end", t.id));
                        }
                        if world.settings.booking_password.is_none() {
                            errs.push(format!("{}: booking required but no password configured", t.id));
                        }
                    }
                    Condition::Objects(o) => {
                        let otype = match (&o.name, o.otype) {
                            (Some(n), _) => match world.objects.get(n) {
                                Some(x) => x.otype,
                                None => {
                                    errs.push(format!("{}: unknown object `{n}`", t.id));
                                    continue;
                                }
                            },
                            (None, Some(ty)) => ty,
                            (None, None) => continue,
                        };
                        let available = world.objects.values().filter(|x| x.otype == otype).count() as u32;
                        if o.name.is_none() && o.count > available {
                            errs.push(format!("{}: needs {} {otype} but the scenario has {available}", t.id, o.count));
                        }
                        for k in o.attributes.keys() {
                            let ok = DERIVED_ATTRIBUTES.contains(&k.as_str())
                                || COMMON_STATE_KEYS.contains(&k.as_str())
                                || otype.extra_state_keys().contains(&k.as_str());
                            if !ok {
                                errs.push(format!("{}: attribute `{k}` does not exist on {otype}", t.id));
                            }
                        }
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(EvalError::Mismatch(errs.join("; ")))
        }
    }
}

/// The bundled five-task office event benchmark.
pub fn office_event_goals() -> GoalSpec {
    GoalSpec::parse(fixtures::OFFICE_EVENT_GOALS).expect("bundled goals parse")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;
    use crate::world::Booking;

    fn office() -> WorldState {
        scenario::instantiate(&scenario::parse(fixtures::OFFICE_EVENT).unwrap()).unwrap()
    }

    /// Exhaustive k-subset search, independent of the greedy ordering.
    fn oracle(src: &dyn Observable, cond: &Condition) -> (u32, u32) {
        let ms: Vec<u32> = candidate_matches(src, cond).into_iter().map(|c| c.1).collect();
        let n = cond.attribute_count() as u32;
        let k = (cond.required() as usize).min(ms.len());
        let (mut best_full, mut best_pairs) = (0, 0);
        for mask in 0u32..(1 << ms.len()) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let pick: Vec<u32> = (0..ms.len()).filter(|i| mask & (1 << i) != 0).map(|i| ms[i]).collect();
            best_full = best_full.max(pick.iter().filter(|&&m| m == n).count() as u32);
            best_pairs = best_pairs.max(pick.iter().sum());
        }
        (best_full, best_pairs)
    }

    #[test]
    fn office_goals_shape() {
        let g = office_event_goals();
        assert_eq!(g.tasks.len(), 5);
        let t2: u32 = g.tasks[1].conditions.iter().map(Condition::required).sum();
        assert_eq!(t2, 12);
        assert_eq!(g.tasks[3].conditions.len(), 1);
        assert_eq!(g.tasks[3].conditions[0].required(), 1);
        assert_eq!(g.event_requests()[0].name, "Lunch and Listen");
        g.check(&office()).unwrap();
    }

    #[test]
    fn initial_office_state_scores_nothing_on_t4() {
        let r = score(&office(), &office_event_goals());
        assert_eq!(r.tasks[3].instance, 0.0);
        assert_eq!(r.tasks[3].attribute, 0.0);
        assert!(r.instance_average < 1e-9);
    }

    #[test]
    fn all_met_scores_full() {
        let mut w = office();
        for (i, t) in ["table_1", "table_2", "chair_1", "chair_2"].iter().enumerate() {
            let _ = i;
            w.objects.get_mut(*t).unwrap().location = "open_area_1".into();
        }
        w.bookings.push(Booking {
            name: "Lunch and Listen".into(),
            start: "2024-09-02T12:00:00".into(),
            end: "2024-09-02T13:00:00".into(),
            room: "open_area_1".into(),
            booked_by: "ryan".into(),
            tick: 3,
        });
        let g = office_event_goals();
        let r = score(&w, &g);
        assert_eq!((r.tasks[0].instance, r.tasks[0].attribute), (100.0, 100.0));
        assert_eq!((r.tasks[3].instance, r.tasks[3].attribute), (100.0, 100.0));
        let only = GoalSpec { tasks: vec![g.tasks[0].clone(), g.tasks[3].clone()] };
        assert!(score(&w, &only).all_met());
        assert_eq!(score(&w, &only).instance_average, 100.0);
    }

    #[test]
    fn partial_t1_matches_oracle() {
        let mut w = office();
        w.objects.get_mut("table_1").unwrap().location = "open_area_1".into();
        for c in ["chair_1", "chair_2"] {
            w.objects.get_mut(c).unwrap().location = "open_area_1".into();
        }
        let g = office_event_goals();
        let r = score(&w, &g);
        // Tables 1/2, chairs 2/2.
        assert_eq!(r.tasks[0].instance, 75.0);
        for c in &g.tasks[0].conditions {
            let s = condition_score(&w, c);
            assert_eq!((s.satisfied, s.matched_pairs), oracle(&w, c));
        }
    }

    #[test]
    fn coffee_cup_in_wrong_place_counts_one_third() {
        let mut w = office();
        w.objects.get_mut("cup_1").unwrap().state.insert("contains".into(), Value::from("coffee"));
        let cond = Condition::Objects(ObjectCondition {
            otype: None,
            name: Some("cup_1".into()),
            count: 1,
            attributes: [
                ("contains".to_string(), Value::from("coffee")),
                ("location".to_string(), Value::from("open_area_1")),
                ("receptacle_type".to_string(), Value::from("Table")),
            ]
            .into_iter()
            .collect(),
        });
        let s = condition_score(&w, &cond);
        assert_eq!((s.matched_pairs, s.required_pairs), (1, 3));
        assert_eq!(s.satisfied, 0);
        assert_eq!(oracle(&w, &cond), (0, 1));
    }

    #[test]
    fn heated_meal_maps_to_temperature_threshold() {
        let mut w = office();
        let g = office_event_goals();
        let meals = &g.tasks[4].conditions[2];
        assert_eq!(condition_score(&w, meals).matched_pairs, 0);
        w.objects.get_mut("meal_1").unwrap().state.insert("temperature".into(), Value::from(59.9));
        assert_eq!(condition_score(&w, meals).matched_pairs, 0);
        w.objects.get_mut("meal_1").unwrap().state.insert("temperature".into(), Value::from(60));
        assert_eq!(condition_score(&w, meals).matched_pairs, 1);
    }

    #[test]
    fn booking_attributes_count_separately() {
        let mut w = office();
        w.bookings.push(Booking {
            name: "Lunch and Listen".into(),
            start: "2024-09-02T12:00:00".into(),
            end: "2024-09-02T14:00:00".into(),
            room: "open_area_1".into(),
            booked_by: "jeff".into(),
            tick: 1,
        });
        let g = office_event_goals();
        let s = condition_score(&w, &g.tasks[3].conditions[0]);
        assert_eq!((s.satisfied, s.matched_pairs, s.required_pairs), (0, 2, 3));
    }

    #[test]
    fn check_rejects_mismatches() {
        let w = office();
        let bad = GoalSpec::parse(
            r#"{"tasks":[{"id":"X","description":"d","conditions":[
                {"otype":"Cup","count":13,"attributes":{"colour":"red"}}]}]}"#,
        )
        .unwrap();
        let err = bad.check(&w).unwrap_err().to_string();
        assert!(err.contains("13") && err.contains("colour"), "{err}");
        assert!(GoalSpec::parse(r#"{"tasks":[{"id":"X","description":"d","conditions":[{"count":1,"attributes":{}}]}]}"#).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let g = office_event_goals();
        assert_eq!(GoalSpec::parse(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn numeric_values_compare_by_magnitude() {
        assert!(values_match(&Value::from(20), &Value::from(20.0)));
        assert!(!values_match(&Value::from(true), &Value::from(1)));
    }
}
