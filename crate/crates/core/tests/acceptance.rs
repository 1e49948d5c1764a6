//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::*;
use indoorsim::analytics::{activity_report, occupancy_report, report_csv, resource_stress_report, wellbeing_report, ActivityCategory, ReportKind};
use indoorsim::catalog::{actions_json, ObjectType};
use indoorsim::conversation::admissible_conversation_actions;
use indoorsim::evaluation::{condition_score, score, Condition, ConditionScore, GoalSpec, ObjectCondition, Observable, Task};
use indoorsim::events::{CommandSource, EventKind};
use indoorsim::mind::policy::learn_from_failure_candidate;
use indoorsim::mind::Playbook;
use indoorsim::needs::{Need, NeedsState};
use indoorsim::runner::{run, Mode, PolicyKind, SessionConfig, SessionOutput};
use indoorsim::scenario::{self, fixtures, ScenarioConfig, Severity};
use indoorsim::world::{Booking, EventRequest, Knowledge, WorldState};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parse(text: &str) -> ScenarioConfig {
    scenario::parse(text).expect("bundled fixture parses")
}

fn scripted(mode: Mode, playbook: Option<Playbook>, minutes: u64) -> SessionConfig {
    let mut cfg = SessionConfig::new(mode, PolicyKind::Scripted { playbook });
    cfg.duration_min = Some(minutes);
    cfg
}

fn simulate(text: &str, minutes: u64) -> SessionOutput {
    run(&scripted(Mode::Simulation, None, minutes), &parse(text), None).expect("session runs")
}

// 1 -----------------------------------------------------------------------

fn scenario_fidelity() -> Outcome {
    let text = fixtures::SMALL_OFFICE;
    let cfg = scenario::parse(text).map_err(|e| e.to_string())?;
    let errors: Vec<_> = scenario::validate(&cfg).into_iter().filter(|d| d.severity == Severity::Error).collect();
    ensure(errors.is_empty(), || format!("validation errors: {errors:?}"))?;
    let w = scenario::instantiate(&cfg).map_err(|e| e.to_string())?;
    ensure(w.check_invariants().is_empty(), || format!("{:?}", w.check_invariants()))?;
    let again = scenario::serialize(&cfg);
    ensure(again == text, || "serialize(parse(x)) differs from x".into())?;
    ensure(scenario::serialize(&scenario::parse(&again).unwrap()) == again, || "second round trip differs".into())?;
    Ok(format!("{} bytes round-trip, {} agents, {} objects", text.len(), w.agents.len(), w.objects.len()))
}

// 2 -----------------------------------------------------------------------

fn catalog_size() -> Outcome {
    let v = actions_json();
    let verbs = v["verbs"].as_array().unwrap().len();
    let plain = v["object_types"].as_array().unwrap().len();
    let receptacles = v["receptacle_types"].as_array().unwrap().len();
    let roles = v["roles"].as_array().unwrap().len();
    let distinct: BTreeSet<&str> = v["verbs"].as_array().unwrap().iter().map(|x| x["verb"].as_str().unwrap()).collect();
    ensure(
        (verbs, distinct.len(), plain + receptacles, receptacles, roles) == (38, 38, 25, 7, 4),
        || format!("verbs {verbs} (distinct {}), types {}, receptacles {receptacles}, roles {roles}", distinct.len(), plain + receptacles),
    )?;
    Ok("38 verbs, 25 object types (7 receptacle), 4 roles".into())
}

// 3 -----------------------------------------------------------------------

const FUZZ_DRAWS: usize = 10_000;
const FUZZ_RESET_EVERY: usize = 150;

fn admissibility_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let fixtures_list: Vec<WorldState> = fixtures::SCENARIOS.iter().map(|(_, t)| scenario::instantiate(&parse(t)).unwrap()).collect();
    let mut worlds = fixtures_list.clone();
    let mut steps = vec![0usize; worlds.len()];
    let mut draws = 0;
    let mut verbs = BTreeSet::new();
    while draws < FUZZ_DRAWS {
        let i = draws % worlds.len();
        if steps[i] == FUZZ_RESET_EVERY {
            worlds[i] = fixtures_list[i].clone();
            steps[i] = 0;
        }
        let w = &mut worlds[i];
        w.tick += rng.gen_range(0..3);
        let agent = w.agent_order.choose(&mut rng).unwrap().clone();
        let adm = w.admissible_actions(&agent).map_err(|e| e.to_string())?;
        let Some(cmd) = adm.choose(&mut rng).cloned() else {
            steps[i] += 1;
            continue;
        };
        let out = w.dispatch_with(&agent, &cmd, Some("Hello there."));
        ensure(out.success, || format!("{}: `{agent}: {cmd}` failed: {}", fixtures::SCENARIOS[i].0, out.message))?;
        let inv = w.check_invariants();
        ensure(inv.is_empty(), || format!("invariants broken after `{cmd}`: {inv:?}"))?;
        verbs.insert(cmd.split_whitespace().next().unwrap().to_string());
        steps[i] += 1;
        draws += 1;
    }
    Ok(format!("{draws} draws over {} fixtures, {} distinct verbs", worlds.len(), verbs.len()))
}

// 4 -----------------------------------------------------------------------

const ORACLE_WORLDS: u32 = 500;
const MAX_CANDIDATES: usize = 12;
const AVERAGE_TOLERANCE: f64 = 1e-9;

/// Small hand-built world for scoring.
#[derive(Debug, Clone)]
struct ToyWorld {
    objects: BTreeMap<String, (ObjectType, BTreeMap<String, Value>)>,
    bookings: Vec<Booking>,
}

impl Observable for ToyWorld {
    fn instances(&self, otype: ObjectType) -> Vec<String> {
        self.objects.iter().filter(|(_, o)| o.0 == otype).map(|(n, _)| n.clone()).collect()
    }
    fn otype_of(&self, name: &str) -> Option<ObjectType> {
        self.objects.get(name).map(|o| o.0)
    }
    fn attribute(&self, name: &str, key: &str) -> Value {
        self.objects.get(name).and_then(|o| o.1.get(key).cloned()).unwrap_or(Value::Null)
    }
    fn known_bookings(&self) -> Vec<Booking> {
        self.bookings.clone()
    }
}

const TOY_TYPES: [ObjectType; 2] = [ObjectType::Cup, ObjectType::Plate];

fn attr_domain(key: &str) -> Vec<Value> {
    match key {
        "location" => vec![json!("kitchen"), json!("open_area_1"), json!("hallway")],
        "is_clean" => vec![json!(true), json!(false)],
        "contains" => vec![json!("coffee"), json!("tea"), Value::Null],
        _ => vec![json!(1), json!(1.0), json!(2)],
    }
}

const TOY_KEYS: [&str; 4] = ["location", "is_clean", "contains", "weight_kg"];
const ROOMS: [&str; 2] = ["open_area_1", "meeting_room1"];

fn toy_world() -> impl Strategy<Value = (ToyWorld, GoalSpec)> {
    let object = (0..2usize, prop::collection::vec(0..3usize, 4));
    let booking = (0..2usize, 0..2usize, 0..2usize, 0..2usize);
    let cond = (0..3usize, 0..2usize, 1..5u32, prop::collection::vec(prop::option::of(0..3usize), 4), 0..MAX_CANDIDATES);
    (
        prop::collection::vec(object, 0..=MAX_CANDIDATES),
        prop::collection::vec(booking, 0..4),
        prop::collection::vec(prop::collection::vec(cond, 1..4), 1..4),
    )
        .prop_map(|(objects, bookings, tasks)| {
            let mut w = ToyWorld { objects: BTreeMap::new(), bookings: Vec::new() };
            for (i, (t, vals)) in objects.into_iter().enumerate() {
                let attrs = TOY_KEYS
                    .iter()
                    .zip(vals)
                    .map(|(k, v)| {
                        let d = attr_domain(k);
                        (k.to_string(), d[v % d.len()].clone())
                    })
                    .collect();
                w.objects.insert(format!("obj_{i:02}"), (TOY_TYPES[t], attrs));
            }
            for (room, n, s, e) in bookings {
                w.bookings.push(Booking {
                    name: ["Lunch and Listen", "Standup"][n].into(),
                    start: ["2024-09-02T12:00:00", "2024-09-02T09:00:00"][s].into(),
                    end: ["2024-09-02T13:00:00", "2024-09-02T10:00:00"][e].into(),
                    room: ROOMS[room].into(),
                    booked_by: "ryan".into(),
                    tick: 1,
                });
            }
            let tasks = tasks
                .into_iter()
                .enumerate()
                .map(|(ti, conds)| Task {
                    id: format!("T{}", ti + 1),
                    description: String::new(),
                    preferred_roles: vec![],
                    conditions: conds
                        .into_iter()
                        .map(|(kind, t, count, want, named)| match kind {
                            0 => Condition::Booking {
                                booking: EventRequest {
                                    name: "Lunch and Listen".into(),
                                    start: "2024-09-02T12:00:00".into(),
                                    end: "2024-09-02T13:00:00".into(),
                                    room: ROOMS[t].into(),
                                },
                            },
                            _ => {
                                let mut attributes: BTreeMap<String, Value> = TOY_KEYS
                                    .iter()
                                    .zip(want)
                                    .filter_map(|(k, v)| v.map(|v| (k.to_string(), attr_domain(k)[v % attr_domain(k).len()].clone())))
                                    .collect();
                                if attributes.is_empty() {
                                    attributes.insert("location".into(), json!("open_area_1"));
                                }
                                let by_name = kind == 2;
                                Condition::Objects(ObjectCondition {
                                    otype: (!by_name).then_some(TOY_TYPES[t]),
                                    name: by_name.then(|| format!("obj_{named:02}")),
                                    count: if by_name { 1 } else { count },
                                    attributes,
                                })
                            }
                        })
                        .collect(),
                })
                .collect();
            (w, GoalSpec { tasks })
        })
}

fn oracle_match(desired: &Value, actual: &Value) -> bool {
    match (desired, actual) {
        (Value::Number(a), Value::Number(b)) => a.as_f64() == b.as_f64(),
        _ => desired == actual,
    }
}

/// Exhaustive best assignment: every subset of `min(k, n)` candidates.
fn oracle_condition(w: &ToyWorld, c: &Condition) -> ConditionScore {
    let (k, nattr, matches): (u32, u32, Vec<u32>) = match c {
        Condition::Booking { booking: b } => (
            1,
            3,
            w.bookings
                .iter()
                .filter(|x| x.room == b.room)
                .map(|x| (x.name == b.name) as u32 + (x.start == b.start) as u32 + (x.end == b.end) as u32)
                .collect(),
        ),
        Condition::Objects(oc) => {
            let k = if oc.name.is_some() { 1 } else { oc.count };
            let ms = w
                .objects
                .iter()
                .filter(|(n, o)| match &oc.name {
                    Some(want) => *n == want,
                    None => Some(o.0) == oc.otype,
                })
                .map(|(_, o)| {
                    oc.attributes.iter().filter(|(key, v)| oracle_match(v, o.1.get(*key).unwrap_or(&Value::Null))).count() as u32
                })
                .collect();
            (k, oc.attributes.len() as u32, ms)
        }
    };
    let take = (k as usize).min(matches.len());
    let (mut full, mut pairs) = (0, 0);
    for mask in 0u32..(1 << matches.len()) {
        if mask.count_ones() as usize != take {
            continue;
        }
        let pick: Vec<u32> = (0..matches.len()).filter(|i| mask >> i & 1 == 1).map(|i| matches[i]).collect();
        full = full.max(pick.iter().filter(|&&m| m == nattr).count() as u32);
        pairs = pairs.max(pick.iter().sum());
    }
    ConditionScore { satisfied: full, required: k, matched_pairs: pairs, required_pairs: k * nattr }
}

fn metric_oracle() -> Outcome {
    let mut runner = TestRunner::new_with_rng(
        PtConfig { cases: ORACLE_WORLDS, failure_persistence: None, ..PtConfig::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let mut conditions = 0u32;
    let counter = std::cell::Cell::new(0u32);
    runner
        .run(&toy_world(), |(w, goals)| {
            let report = score(&w, &goals);
            let (mut is_sum, mut as_sum) = (0.0, 0.0);
            for (t, ts) in goals.tasks.iter().zip(&report.tasks) {
                let mut ti = 0.0;
                let mut ta = 0.0;
                for (c, got) in t.conditions.iter().zip(&ts.conditions) {
                    let want = oracle_condition(&w, c);
                    prop_assert_eq!(condition_score(&w, c), want);
                    prop_assert_eq!(*got, want);
                    ti += want.satisfied as f64 / want.required as f64;
                    ta += if want.required_pairs == 0 { 0.0 } else { want.matched_pairs as f64 / want.required_pairs as f64 };
                    counter.set(counter.get() + 1);
                }
                let n = t.conditions.len() as f64;
                prop_assert!((ts.instance - 100.0 * ti / n).abs() < AVERAGE_TOLERANCE);
                prop_assert!((ts.attribute - 100.0 * ta / n).abs() < AVERAGE_TOLERANCE);
                is_sum += ti / n;
                as_sum += ta / n;
            }
            let n = goals.tasks.len() as f64;
            prop_assert!((report.instance_average - 100.0 * is_sum / n).abs() < AVERAGE_TOLERANCE);
            prop_assert!((report.attribute_average - 100.0 * as_sum / n).abs() < AVERAGE_TOLERANCE);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    conditions += counter.get();
    Ok(format!("{ORACLE_WORLDS} worlds, {conditions} conditions, greedy == exhaustive"))
}

// 5 -----------------------------------------------------------------------

fn solvability() -> Outcome {
    let playbook = Playbook::parse(fixtures::OFFICE_EVENT_PLAYBOOK)?;
    let cfg = scripted(Mode::Task, Some(playbook), 60);
    let a = run(&cfg, &office(), Some(&goals())).map_err(|e| e.to_string())?;
    let b = run(&cfg, &office(), Some(&goals())).map_err(|e| e.to_string())?;
    ensure(a.log.to_jsonl() == b.log.to_jsonl(), || "playbook session is not deterministic".into())?;
    let s = a.score.unwrap();
    for id in ["T1", "T4"] {
        let t = s.tasks.iter().find(|t| t.id == id).unwrap();
        ensure(t.instance == 100.0 && t.attribute == 100.0, || format!("{id} scored {}/{}", t.instance, t.attribute))?;
    }
    Ok(format!("T1 100/100, T4 100/100 by minute {}", a.log.header.end_tick))
}

// 6 -----------------------------------------------------------------------

const RANDOM_SEEDS: [u64; 3] = [0, 1, 2];
const RANDOM_IS_MAX: f64 = 10.0;
const RANDOM_AS_MAX: f64 = 35.0;

fn random_band() -> Outcome {
    let (mut is, mut as_) = (0.0, 0.0);
    for seed in RANDOM_SEEDS {
        let mut cfg = SessionConfig::new(Mode::Task, PolicyKind::Random);
        cfg.seed = Some(seed);
        let s = run(&cfg, &office(), Some(&goals())).map_err(|e| e.to_string())?.score.unwrap();
        is += s.instance_average;
        as_ += s.attribute_average;
    }
    let n = RANDOM_SEEDS.len() as f64;
    let (is, as_) = (is / n, as_ / n);
    let line = format!("average IS {is:.1}% (<= {RANDOM_IS_MAX}), AS {as_:.1}% (<= {RANDOM_AS_MAX})");
    ensure(is <= RANDOM_IS_MAX && as_ <= RANDOM_AS_MAX, || line.clone())?;
    Ok(line)
}

// 7 -----------------------------------------------------------------------

fn needs_of(e: &EventKind) -> Option<NeedsState> {
    match e {
        EventKind::NeedsSample { needs, .. } => Some(*needs),
        _ => None,
    }
}

fn clamp(x: f64) -> f64 {
    x.clamp(0.0, 100.0)
}

/// Replays need trajectories from the log: every change is decay, the
/// restoration of the agent's own successful action, or chat.
fn check_needs_trajectories(text: &str, minutes: u64) -> Result<usize, String> {
    let cfg = parse(text);
    let out = run(&scripted(Mode::Simulation, None, minutes), &cfg, None).map_err(|e| e.to_string())?;
    let w0 = scenario::instantiate(&cfg).unwrap();
    let m = &w0.settings.needs_model;
    let mut prev: BTreeMap<String, NeedsState> = w0.agents.iter().map(|(n, a)| (n.clone(), a.needs)).collect();
    let mut restored: BTreeMap<(u64, String), String> = BTreeMap::new();
    let mut chat_ticks = BTreeSet::new();
    for e in &out.log.events {
        match &e.kind {
            EventKind::Outcome { command, success: true, .. } => {
                restored.insert((e.tick, e.agent.clone()), command.split_whitespace().next().unwrap_or("").to_string());
            }
            EventKind::Utterance { .. } => {
                chat_ticks.insert(e.tick);
            }
            _ => {}
        }
    }
    let mut samples = 0;
    for e in &out.log.events {
        let Some(n) = needs_of(&e.kind) else { continue };
        samples += 1;
        for v in [n.fullness, n.hydration, n.energy, n.social_fulfillment, n.bladder] {
            ensure((0.0..=100.0).contains(&v), || format!("{} out of range at {}: {v}", e.agent, e.tick))?;
        }
        let p = prev[&e.agent];
        let verb = restored.get(&(e.tick, e.agent.clone())).map(String::as_str).unwrap_or("");
        let mut want = NeedsState {
            fullness: clamp(p.fullness - m.fullness_decay),
            hydration: clamp(p.hydration - m.hydration_decay),
            energy: clamp(p.energy - m.energy_decay),
            social_fulfillment: clamp(p.social_fulfillment - m.social_decay),
            bladder: clamp(p.bladder + m.bladder_rise),
        };
        match verb {
            // Cafeteria meals and drinks restore like their pantry counterparts.
            "eat" | "fetch_meal" => want.fullness = clamp(want.fullness + m.eat_restore),
            "drink" | "refill_supplies" => {
                want.hydration = clamp(want.hydration + m.drink_restore);
                want.bladder = clamp(want.bladder + m.drink_bladder);
            }
            "rest" => want.energy = clamp(want.energy + m.rest_restore),
            "use_restroom" => want.bladder = 0.0,
            _ => {}
        }
        let social_ok = if chat_ticks.contains(&e.tick) {
            let gained = n.social_fulfillment - want.social_fulfillment;
            n.social_fulfillment == want.social_fulfillment || n.social_fulfillment == 100.0 || (gained > 0.0 && (gained / m.chat_restore).fract().abs() < 1e-9)
        } else {
            n.social_fulfillment == want.social_fulfillment
        };
        ensure(
            n.fullness == want.fullness && n.hydration == want.hydration && n.energy == want.energy && n.bladder == want.bladder && social_ok,
            || format!("{} at {} after `{verb}`: got {n:?}, expected {want:?}", e.agent, e.tick),
        )?;
        prev.insert(e.agent.clone(), n);
    }
    Ok(samples)
}

/// Ticks t in 1..=minutes with `h0 - rate * t < threshold`, in quarter units.
fn closed_form_unmet(h0_quarters: i64, rate_quarters: i64, threshold_quarters: i64, minutes: i64) -> i64 {
    (1..=minutes).filter(|t| h0_quarters - rate_quarters * t < threshold_quarters).count() as i64
}

fn needs_dynamics() -> Outcome {
    let mut samples = 0;
    for (text, minutes) in [(fixtures::HYDRATION_4, 240), (fixtures::LAYOUT_DESIGN1, 480), (fixtures::LAYOUT_DESIGN2, 480)] {
        samples += check_needs_trajectories(text, minutes)?;
    }
    // Idle agents starting at hydration h0 for T minutes.
    let mut cases = 0;
    for (h0, minutes) in [(40.0, 60u64), (40.0, 40), (35.5, 90), (100.0, 480), (29.0, 10), (30.0, 1)] {
        let mut cfg: Value = serde_json::from_str(fixtures::HYDRATION_2).unwrap();
        cfg["settings"]["initial_needs"] = json!({ "hydration": h0 });
        let scenario_cfg = scenario::parse(&cfg.to_string()).map_err(|e| e.to_string())?;
        let idle = Playbook { agents: scenario_cfg.agents.iter().map(|a| (a.name.clone(), vec![])).collect() };
        let out = run(&scripted(Mode::Simulation, Some(idle), minutes), &scenario_cfg, None).map_err(|e| e.to_string())?;
        let expected = closed_form_unmet((h0 * 4.0) as i64, 1, 120, minutes as i64) as u64;
        let report = wellbeing_report(&out.log);
        let rows = report.suboptimal_rows();
        for a in &out.log.header.agents {
            let thirst = rows.iter().find(|r| &r.agent == a && r.key == Need::Thirst.as_str());
            let got = thirst.map_or(0, |r| r.ticks);
            ensure(got == expected, || format!("h0 {h0}, T {minutes}: {a} thirsty {got} ticks, expected {expected}"))?;
            let frac = thirst.map_or(0.0, |r| r.fraction);
            ensure(frac == expected as f64 / minutes as f64, || format!("fraction {frac} != {expected}/{minutes}"))?;
            let row = report.row(a).unwrap();
            ensure(row.samples == minutes && row.optimal_ticks == minutes - expected, || format!("{row:?}"))?;
        }
        cases += 1;
    }
    Ok(format!("{samples} samples replayed exactly; {cases} closed-form cases (h0 40, T 60 -> 20/60)"))
}

// 8 -----------------------------------------------------------------------

const CHAT_CASES: u32 = 1000;

#[derive(Debug, Clone)]
enum ChatOp {
    Initiate(usize, usize),
    Join(usize, usize),
    Stay(usize),
    End(usize),
    Move(usize, usize),
}

fn chat_op() -> impl Strategy<Value = ChatOp> {
    prop_oneof![
        3 => (0..6usize, 0..6usize).prop_map(|(a, b)| ChatOp::Initiate(a, b)),
        2 => (0..6usize, 1..4usize).prop_map(|(a, s)| ChatOp::Join(a, s)),
        3 => (0..6usize).prop_map(ChatOp::Stay),
        1 => (0..6usize).prop_map(ChatOp::End),
        2 => (0..6usize, 0..4usize).prop_map(|(a, l)| ChatOp::Move(a, l)),
    ]
}

const CHAT_ROOMS: [&str; 4] = ["hallway", "kitchen", "open_area_1", "reception"];

fn chat_invariants(w: &WorldState) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for (id, s) in &w.conversations {
        if s.participants.len() < 2 {
            return Err(format!("{id} has {} participants", s.participants.len()));
        }
        for p in &s.participants {
            if !seen.insert(p.clone()) {
                return Err(format!("{p} is in two sessions"));
            }
            let a = &w.agents[p];
            if a.location != s.location {
                return Err(format!("{p} is in {id} at {} but is in {}", s.location, a.location));
            }
            if a.conversation.as_deref() != Some(id.as_str()) {
                return Err(format!("{p} does not point back at {id}"));
            }
        }
    }
    for (n, a) in &w.agents {
        if let Some(c) = &a.conversation {
            if !w.conversations.get(c).is_some_and(|s| s.participants.contains(n)) {
                return Err(format!("{n} points at {c} without membership"));
            }
        }
    }
    Ok(())
}

fn conversation_invariants() -> Outcome {
    let base = scenario::instantiate(&office()).unwrap();
    let agents = base.agent_order.clone();
    let mut runner = TestRunner::new_with_rng(
        PtConfig { cases: CHAT_CASES, failure_persistence: None, ..PtConfig::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let started = std::cell::Cell::new(0u32);
    runner
        .run(&prop::collection::vec(chat_op(), 1..40), |ops| {
            let mut w = base.clone();
            // Gather everyone in two rooms so conversations are possible.
            for (i, a) in agents.iter().enumerate() {
                w.dispatch(a, &format!("go_to {}", CHAT_ROOMS[i % 2]));
            }
            for op in ops {
                w.tick += 1;
                let (agent, cmd) = match op {
                    ChatOp::Initiate(a, b) => (a, format!("initiating_chat {}", agents[b])),
                    ChatOp::Join(a, s) => (a, format!("join_chat chat_{s}")),
                    ChatOp::Stay(a) => (a, "stay_chat".to_string()),
                    ChatOp::End(a) => (a, "end_chat".to_string()),
                    ChatOp::Move(a, l) => (a, format!("go_to {}", CHAT_ROOMS[l])),
                };
                let name = &agents[agent];
                let listed = admissible_conversation_actions(&w, name).contains(&cmd);
                let full_listed = w.admissible_actions(name).unwrap().contains(&cmd);
                let before_social: Vec<f64> = agents.iter().map(|a| w.agents[a].needs.social_fulfillment).collect();
                let session_before = w.agents[name].conversation.clone();
                let out = w.dispatch_with(name, &cmd, Some("How is it going?"));
                if !cmd.starts_with("go_to") {
                    prop_assert_eq!(out.success, listed, "`{}: {}` -> {}", name, cmd, out.message);
                    prop_assert_eq!(listed, full_listed);
                    if !out.success {
                        let after: Vec<f64> = agents.iter().map(|a| w.agents[a].needs.social_fulfillment).collect();
                        prop_assert_eq!(before_social, after);
                    }
                }
                if out.success && cmd.starts_with("initiating_chat") {
                    started.set(started.get() + 1);
                }
                if out.success && cmd == "stay_chat" {
                    let sid = session_before.unwrap();
                    let s = &w.conversations[&sid];
                    prop_assert_eq!(&s.transcript.last().unwrap().speaker, name);
                }
                if let Err(e) = chat_invariants(&w) {
                    return Err(TestCaseError::fail(format!("after `{name}: {cmd}`: {e}")));
                }
                let inv = w.check_invariants();
                prop_assert!(inv.is_empty(), "{:?}", inv);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{CHAT_CASES} sequences, {} sessions started", started.get()))
}

// 9 -----------------------------------------------------------------------

const HYDRATION_MINUTES: u64 = 60;

fn preference_counts(text: &str) -> (u32, u32) {
    let v: Value = serde_json::from_str(text).unwrap();
    let prefs = &v["settings"]["preferences"];
    let mut counts = (0, 0);
    for a in v["agents"].as_array().unwrap() {
        match prefs[a["name"].as_str().unwrap()].as_str().unwrap_or("water") {
            "coffee" => counts.1 += 1,
            _ => counts.0 += 1,
        }
    }
    counts
}

fn resource_stress() -> Outcome {
    let mut lines = Vec::new();
    for (n, single, double) in [
        (2, fixtures::HYDRATION_2, fixtures::HYDRATION_2_DOUBLE),
        (4, fixtures::HYDRATION_4, fixtures::HYDRATION_4_DOUBLE),
        (8, fixtures::HYDRATION_8, fixtures::HYDRATION_8_DOUBLE),
    ] {
        let mut z = Vec::new();
        for text in [single, double] {
            let r = resource_stress_report(&simulate(text, HYDRATION_MINUTES).log);
            let (water, coffee) = preference_counts(text);
            ensure((r.water, r.coffee) == (water, coffee), || format!("N={n}: X/Y {}/{} expected {water}/{coffee}", r.water, r.coffee))?;
            z.push(r.completion_min.ok_or_else(|| format!("N={n}: not every agent drank"))?);
            lines.push(r.summary());
        }
        ensure(z[1] < z[0], || format!("N={n}: Z(double) {} !< Z(single) {}", z[1], z[0]))?;
    }
    Ok(format!("single vs double: {}", lines.join(", ")))
}

// 10 ----------------------------------------------------------------------

const LAYOUT_MINUTES: u64 = 480;

fn layout_discrimination() -> Outcome {
    let d1 = simulate(fixtures::LAYOUT_DESIGN1, LAYOUT_MINUTES);
    let d2 = simulate(fixtures::LAYOUT_DESIGN2, LAYOUT_MINUTES);
    let pantry = |o: &SessionOutput| occupancy_report(&o.log).overall("pantry");
    let movement = |o: &SessionOutput| activity_report(&o.log).overall(ActivityCategory::Movement);
    let (p1, p2, m1, m2) = (pantry(&d1), pantry(&d2), movement(&d1), movement(&d2));
    let line = format!("pantry {p1:.3} -> {p2:.3}, movement {m1:.3} -> {m2:.3}");
    ensure(p2 > p1 && m2 > m1, || line.clone())?;
    Ok(line)
}

// 11 ----------------------------------------------------------------------

fn artifacts(out: &SessionOutput) -> Vec<String> {
    let mut v = vec![out.log.to_jsonl(), out.world.snapshot_json()];
    v.extend(ReportKind::ALL.iter().map(|&k| report_csv(&out.log, k).0));
    v.push(serde_json::to_string(&out.score).unwrap());
    v
}

fn determinism() -> Outcome {
    let mut sessions = 0;
    for (text, seed) in [(fixtures::HYDRATION_8, 7u64), (fixtures::LAYOUT_DESIGN2, 3)] {
        let mut cfg = scripted(Mode::Simulation, None, 240);
        cfg.seed = Some(seed);
        let a = run(&cfg, &parse(text), None).unwrap();
        let b = run(&cfg, &parse(text), None).unwrap();
        ensure(artifacts(&a) == artifacts(&b), || format!("scripted session with seed {seed} differs"))?;
        sessions += 1;
    }
    let mut cfg = SessionConfig::new(Mode::Task, PolicyKind::Random);
    cfg.seed = Some(11);
    let a = run(&cfg, &office(), Some(&goals())).unwrap();
    let b = run(&cfg, &office(), Some(&goals())).unwrap();
    ensure(artifacts(&a) == artifacts(&b), || "random session differs".into())?;
    let a = run(&recorded_config(false, false), &office(), Some(&goals())).unwrap();
    let b = run(&recorded_config(false, false), &office(), Some(&goals())).unwrap();
    ensure(artifacts(&a) == artifacts(&b), || "recorded session differs".into())?;
    Ok(format!("{} session pairs byte-identical", sessions + 2))
}

// 12 ----------------------------------------------------------------------

fn drop_section(prompt: &str, heading: &str) -> String {
    let mut out = String::new();
    let mut skipping = false;
    for line in prompt.split_inclusive('\n') {
        if line.starts_with("## ") {
            skipping = line.trim_end() == heading;
        }
        if !skipping {
            out.push_str(line);
        }
    }
    out
}

fn golden(name: &str, actual: &str) -> Result<(), String> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    ensure(want == actual, || format!("{name} differs from golden"))
}

/// Re-executes the log against a fresh world, checking that every action
/// was admissible at the start of its tick (or the one-off
/// learn-from-failure path) and that outcomes reproduce.
fn replay_contract(out: &SessionOutput) -> Result<(usize, usize), String> {
    let mut w = scenario::instantiate(&office()).unwrap();
    w.settings.seed = out.log.header.seed;
    for a in w.agents.values_mut() {
        for e in goals().event_requests() {
            a.knowledge.insert(Knowledge::EventRequest(e));
        }
    }
    let said: BTreeMap<(u64, &str), &str> = out
        .log
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Utterance { text, .. } => Some(((e.tick, e.agent.as_str()), text.as_str())),
            _ => None,
        })
        .collect();
    let mut lff_seen = BTreeSet::new();
    let (mut listed, mut lff) = (0, 0);
    let mut busy: BTreeMap<&str, u64> = BTreeMap::new();
    let mut events = out.log.events.iter().peekable();
    for t in 1..=out.log.header.end_tick {
        w.tick = t;
        let model = w.settings.needs_model.clone();
        for a in w.agents.values_mut() {
            a.needs = indoorsim::needs::tick_decay(&a.needs, &model, 1);
        }
        let snapshot = w.clone();
        while let Some(e) = events.next_if(|e| e.tick == t) {
            let EventKind::Action { command, source, .. } = &e.kind else { continue };
            let agent = e.agent.as_str();
            ensure(busy.get(agent).is_none_or(|&b| b <= t), || format!("{agent} decided while busy at {t}"))?;
            match source {
                CommandSource::Admissible => {
                    let adm = snapshot.admissible_actions(agent).unwrap();
                    ensure(adm.contains(command), || format!("{agent} at {t}: `{command}` was not admissible"))?;
                    listed += 1;
                }
                CommandSource::LearnFromFailure => {
                    ensure(learn_from_failure_candidate(command), || format!("bad learn-from-failure command `{command}`"))?;
                    ensure(lff_seen.insert((agent, command.clone())), || format!("`{command}` retried by {agent}"))?;
                    lff += 1;
                }
                CommandSource::Fallback => ensure(command == "wait", || format!("fallback `{command}`"))?,
            }
            let Some(o) = events.next() else { return Err("log ends after an action".into()) };
            let EventKind::Outcome { success, message, duration_ticks, .. } = &o.kind else {
                return Err(format!("action at {t} not followed by its outcome"));
            };
            if command != "wait" {
                let r = w.dispatch_with(agent, command, said.get(&(t, agent)).copied());
                ensure(r.success == *success && &r.message == message, || format!("{agent} at {t}: replay gave `{}`", r.message))?;
            }
            busy.insert(agent, t + u64::from(*duration_ticks));
        }
    }
    ensure(events.next().is_none(), || "events beyond the last tick".into())?;
    ensure(w.snapshot_json() == out.world.snapshot_json(), || "replayed final state differs".into())?;
    Ok((listed, lff))
}

fn generation_contract() -> Outcome {
    let full = run(&recorded_config(false, false), &office(), Some(&goals())).map_err(|e| e.to_string())?;
    let h = &full.log.header;
    ensure(h.complete && (h.end_tick == 60 || h.early_exit), || format!("incomplete session: {h:?}"))?;
    let (listed, lff) = replay_contract(&full)?;
    ensure(lff >= 1, || "the learn-from-failure path was never exercised".into())?;

    let no_tp = run(&recorded_config(true, false), &office(), Some(&goals())).unwrap();
    let no_st = run(&recorded_config(false, true), &office(), Some(&goals())).unwrap();
    let key = |o: &SessionOutput| o.prompts.iter().map(|p| (p.tick, p.agent.clone())).collect::<Vec<_>>();
    ensure(key(&full) == key(&no_tp) && key(&full) == key(&no_st), || "ablations changed the decision schedule".into())?;
    let user = |o: &SessionOutput, i: usize| o.prompts[i].messages[1].content.clone();
    let (mut tp_diff, mut st_diff) = (0, 0);
    for i in 0..full.prompts.len() {
        let (f, t, s) = (user(&full, i), user(&no_tp, i), user(&no_st, i));
        ensure(drop_section(&f, "## Reminder") == t, || format!("prompt {i}: no-tp differs beyond the reminder"))?;
        ensure(!s.contains("Known objects:") && !s.contains("Task progress:"), || format!("prompt {i}: no-st kept structure"))?;
        tp_diff += (f != t) as usize;
        st_diff += (f != s) as usize;
    }
    ensure(tp_diff > 0 && st_diff > 0, || format!("ablations left prompts unchanged ({tp_diff}, {st_diff})"))?;
    // Freeze one mid-session prompt per variant.
    let i = full.prompts.iter().position(|p| p.agent == "jeff" && p.tick >= 5).ok_or("no jeff prompt")?;
    golden("prompt_full.txt", &user(&full, i))?;
    golden("prompt_no_tp.txt", &user(&no_tp, i))?;
    golden("prompt_no_st.txt", &user(&no_st, i))?;
    Ok(format!(
        "{} decisions ({listed} listed, {lff} learn-from-failure), {tp_diff}/{} prompts differ without TP, {st_diff} without ST",
        full.prompts.len(),
        full.prompts.len()
    ))
}

// -------------------------------------------------------------------------

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, name: "scenario fidelity", budget: Duration::from_secs(1), check: scenario_fidelity },
    Criterion { id: 2, name: "catalog size", budget: Duration::from_secs(1), check: catalog_size },
    Criterion { id: 3, name: "admissibility fuzz", budget: Duration::from_secs(60), check: admissibility_fuzz },
    Criterion { id: 4, name: "metric oracle equivalence", budget: Duration::from_secs(120), check: metric_oracle },
    Criterion { id: 5, name: "solvability oracle", budget: Duration::from_secs(10), check: solvability },
    Criterion { id: 6, name: "random baseline band", budget: Duration::from_secs(60), check: random_band },
    Criterion { id: 7, name: "needs dynamics", budget: Duration::from_secs(10), check: needs_dynamics },
    Criterion { id: 8, name: "conversation invariants", budget: Duration::from_secs(30), check: conversation_invariants },
    Criterion { id: 9, name: "resource-stress direction", budget: Duration::from_secs(30), check: resource_stress },
    Criterion { id: 10, name: "layout-report discrimination", budget: Duration::from_secs(30), check: layout_discrimination },
    Criterion { id: 11, name: "determinism", budget: Duration::from_secs(60), check: determinism },
    Criterion { id: 12, name: "generation-policy contract", budget: Duration::from_secs(60), check: generation_contract },
];

fn main() {
    let only: Option<u8> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| only.is_none_or(|o| o == c.id)) {
        let start = Instant::now();
        let result = std::panic::catch_unwind(c.check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        let result = result.and_then(|d| if took <= c.budget { Ok(d) } else { Err(format!("{d}; took {took:.2?} > budget {:?}", c.budget)) });
        match result {
            Ok(detail) => println!("PASS [{:>2}] {} ({took:.2?}): {detail}", c.id, c.name),
            Err(e) => {
                failed += 1;
                println!("FAIL [{:>2}] {} ({took:.2?}): {e}", c.id, c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
