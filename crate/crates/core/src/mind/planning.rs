use std::fmt;
use std::fmt::Write as _;

use serde_json::Value;

use crate::catalog::Role;
use crate::evaluation::{candidate_matches, show, Condition, GoalSpec, Observable};
use crate::needs::{Need, NeedsModel};

use super::memory::MemoryStore;

/// The agent's current objective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Objective {
    Need(Need),
    Task(String),
    Idle,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Need(n) => write!(f, "relieve {n}"),
            Objective::Task(t) => write!(f, "work on task {t}"),
            Objective::Idle => f.write_str("idle or socialise"),
        }
    }
}

fn suits(roles: &[Role], role: Role) -> bool {
    roles.is_empty() || roles.contains(&role)
}

/// Most urgent unmet need (largest deficit, ties in need-priority order),
/// else the first unfinished task suited to the role, else idle.
pub fn plan(memory: &MemoryStore, role: Role, goals: Option<&GoalSpec>, model: &NeedsModel) -> Objective {
    let mut best: Option<(Need, f64)> = None;
    for n in Need::PRIORITY {
        if !model.is_unmet(&memory.needs, n) {
            continue;
        }
        let d = model.deficit(&memory.needs, n);
        if best.is_none_or(|(_, b)| d > b) {
            best = Some((n, d));
        }
    }
    if let Some((n, _)) = best {
        return Objective::Need(n);
    }
    if let Some(g) = goals {
        if let Some(t) = g.tasks.iter().find(|t| suits(&t.preferred_roles, role) && !memory.task_done(&t.id)) {
            return Objective::Task(t.id.clone());
        }
    }
    Objective::Idle
}

/// Reminder text restating what memory says is still missing. Held objects
/// relevant to an unfinished task are listed with their unmet attributes;
/// otherwise unfinished tasks are listed with role-suited ones suggested.
pub fn prioritize(memory: &MemoryStore, role: Role, goals: &GoalSpec) -> String {
    let open: Vec<_> = goals.tasks.iter().filter(|t| !memory.task_done(&t.id)).collect();
    if open.is_empty() {
        return String::new();
    }
    let mut held = String::new();
    for item in &memory.inventory {
        let Some(otype) = memory.otype_of(item) else { continue };
        // Condition where this item already matches the most attributes.
        let mut best: Option<(&str, &Condition, u32)> = None;
        for t in &open {
            for c in t.conditions.iter().filter(|c| c.selects(item, otype)) {
                let m = candidate_matches(memory, c)
                    .into_iter()
                    .find(|(n, _)| n == item)
                    .map_or(0, |x| x.1);
                if best.is_none_or(|(_, _, b)| m > b) {
                    best = Some((&t.id, c, m));
                }
            }
        }
        let Some((task, Condition::Objects(c), _)) = best else { continue };
        let missing: Vec<String> = c
            .attributes
            .iter()
            .filter_map(|(k, want)| {
                let have = memory.attribute(item, k);
                (!crate::evaluation::values_match(want, &have)).then(|| {
                    let now = if have == Value::Null { "none".to_string() } else { show(&have) };
                    format!("{k} should be {} (now {now})", show(want))
                })
            })
            .collect();
        if !missing.is_empty() {
            let _ = writeln!(held, "You are holding {item} for {task}: {}.", missing.join("; "));
        }
    }
    if !held.is_empty() {
        return held;
    }
    let mut s = String::from("Unfinished tasks:\n");
    for t in &open {
        let _ = writeln!(s, "- {}: {}", t.id, t.description);
    }
    let suited: Vec<&str> = open.iter().filter(|t| suits(&t.preferred_roles, role)).map(|t| t.id.as_str()).collect();
    if !suited.is_empty() {
        let _ = writeln!(s, "As {role}, consider: {}.", suited.join(", "));
    }
    s
}
