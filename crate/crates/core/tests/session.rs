mod common;

use proptest::prelude::*;

use common::*;
use indoorsim::events::EventKind;
use indoorsim::runner::{run, Mode, PolicyKind, SessionConfig};
use indoorsim::scenario::{self, fixtures};

fn check_session(text: &str, mode: Mode, policy: PolicyKind, seed: u64, minutes: u64) -> Result<(), TestCaseError> {
    let cfg_scenario = scenario::parse(text).unwrap();
    let initial = scenario::instantiate(&cfg_scenario).unwrap();
    let mut cfg = SessionConfig::new(mode, policy);
    cfg.seed = Some(seed);
    cfg.duration_min = Some(minutes);
    let g = goals();
    let out = run(&cfg, &cfg_scenario, (mode == Mode::Task).then_some(&g)).unwrap();
    prop_assert!(out.log.check().is_empty(), "{:?}", out.log.check());
    prop_assert!(out.world.check_invariants().is_empty());
    // Conservation: nothing appears; only consumables disappear.
    for name in out.world.objects.keys() {
        prop_assert!(initial.objects.contains_key(name), "{} appeared", name);
    }
    for (name, o) in &initial.objects {
        if !out.world.objects.contains_key(name) {
            prop_assert!(o.otype.is_consumable(), "{} ({}) vanished", name, o.otype);
        }
    }
    // Clock monotonicity and one decision per free agent.
    let mut last = 0;
    let mut free_at = std::collections::BTreeMap::new();
    for e in &out.log.events {
        prop_assert!(e.tick >= last && e.tick <= minutes);
        last = e.tick;
        match &e.kind {
            EventKind::Action { .. } => {
                prop_assert!(*free_at.get(&e.agent).unwrap_or(&0) <= e.tick, "{} busy at {}", e.agent, e.tick);
            }
            EventKind::Outcome { duration_ticks, .. } => {
                prop_assert!(*duration_ticks >= 1);
                free_at.insert(e.agent.clone(), e.tick + u64::from(*duration_ticks));
            }
            _ => {}
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn random_sessions_respect_runner_invariants(seed in any::<u64>(), minutes in 1u64..90, which in 0usize..fixtures::SCENARIOS.len()) {
        let (name, text) = fixtures::SCENARIOS[which];
        let mode = if name == "office_event.json" { Mode::Task } else { Mode::Simulation };
        check_session(text, mode, PolicyKind::Random, seed, minutes)?;
    }

    #[test]
    fn routine_sessions_respect_runner_invariants(seed in any::<u64>(), which in 0usize..fixtures::SCENARIOS.len()) {
        let (_, text) = fixtures::SCENARIOS[which];
        check_session(text, Mode::Simulation, PolicyKind::Scripted { playbook: None }, seed, 120)?;
    }
}

#[test]
fn early_exit_is_logged_when_all_goals_are_met() {
    // Goals reduced to T1 and T4, which the playbook completes.
    let mut g = goals();
    g.tasks.retain(|t| t.id == "T1" || t.id == "T4");
    let playbook = indoorsim::mind::Playbook::parse(fixtures::OFFICE_EVENT_PLAYBOOK).unwrap();
    let cfg = SessionConfig::new(Mode::Task, PolicyKind::Scripted { playbook: Some(playbook) });
    let out = run(&cfg, &office(), Some(&g)).unwrap();
    assert!(out.log.header.early_exit);
    assert!(out.log.header.end_tick < 60);
    assert!(out.score.unwrap().all_met());
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&recorded_config(false, false), &office(), Some(&goals())).unwrap();
    out.write_outputs(dir.path(), &office()).unwrap();
    for f in ["scenario.json", "config.json", "events.jsonl", "final_snapshot.json", "score.json", "prompts.jsonl", "occupancy.csv", "activity.csv", "wellbeing.csv", "suboptimal.csv", "resource.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let echo: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["policy"]["kind"], "recorded");
    assert_eq!(echo["seed"], 7);
    let log = indoorsim::events::EventLog::parse(&std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap()).unwrap();
    assert_eq!(log, out.log);
}
