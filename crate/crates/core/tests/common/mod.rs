//! Shared helpers for integration tests: a deterministic heuristic responder
//! standing in for a generation service, and the recorded-fixture builder.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use indoorsim::error::PolicyError;
use indoorsim::evaluation::{office_event_goals, GoalSpec};
use indoorsim::mind::service::{GenerationRequest, RecordedFixture};
use indoorsim::mind::{GenerationService, RecordingService};
use indoorsim::runner::{run, Mode, PolicyKind, SessionConfig, SessionOutput};
use indoorsim::scenario::{self, fixtures, ScenarioConfig};

pub const RECORDED_MODEL: &str = "heuristic-responder";
pub const RECORDED_TEMPERATURE: f64 = 0.0;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn office() -> ScenarioConfig {
    scenario::parse(fixtures::OFFICE_EVENT).unwrap()
}

pub fn goals() -> GoalSpec {
    office_event_goals()
}

fn admissible_of(req: &GenerationRequest) -> Vec<String> {
    let user = req.messages.iter().find(|m| m.content.contains("## Admissible commands")).expect("prompt lists commands");
    let (_, tail) = user.content.split_once("## Admissible commands\n").unwrap();
    tail.lines()
        .take_while(|l| !l.trim().is_empty())
        .filter_map(|l| l.split_once(". ").map(|(_, c)| c.to_string()))
        .collect()
}

fn mix(agent: &str, n: u64) -> u64 {
    let h = agent.bytes().fold(1469598103934665603u64, |h, b| (h ^ u64::from(b)).wrapping_mul(1099511628211));
    (h ^ n.wrapping_mul(0x9E3779B97F4A7C15)).wrapping_mul(0xBF58476D1CE4E5B9) >> 17
}

/// Answers like a mediocre model: mostly task-flavoured admissible picks,
/// sometimes by list index, sometimes malformed, and one hallucinated
/// booking password.
#[derive(Default)]
pub struct HeuristicResponder {
    calls: Mutex<BTreeMap<String, u64>>,
}

impl GenerationService for HeuristicResponder {
    fn complete(&self, req: &GenerationRequest) -> Result<String, PolicyError> {
        let n = {
            let mut calls = self.calls.lock().unwrap();
            let c = calls.entry(req.agent.clone()).or_insert(0);
            *c += 1;
            *c
        };
        let retry = req.messages.len() > 2;
        if req.agent == "julia" && (10..=12).contains(&n) {
            return Ok("I would rather not decide yet.".into());
        }
        if !retry {
            if n % 9 == 4 {
                return Ok("REASON: Not sure what to do.\nI will look around first.".into());
            }
            if n % 13 == 7 {
                return Ok("REASON: Quicker this way.\nACTION: teleport open_area_1".into());
            }
            if req.agent == "jeff" && n == 2 {
                return Ok("REASON: The event room must be reserved.\nACTION: book_meeting_room touchscreen_1 open_area_1 \
                           Lunch_and_Listen 2024-09-02T12:00:00 2024-09-02T13:00:00 password123"
                    .into());
            }
        }
        let adm = admissible_of(req);
        if adm.is_empty() {
            return Ok("ACTION: wait".into());
        }
        let r = mix(&req.agent, n);
        let focused: Vec<usize> = (0..adm.len())
            .filter(|&i| {
                let c = &adm[i];
                c.starts_with("book_meeting_room")
                    || (c.contains("open_area_1") && !c.starts_with("look"))
                    || c.starts_with("pick_up")
                    || c.starts_with("clean")
            })
            .collect();
        let i = if !focused.is_empty() && !r.is_multiple_of(4) { focused[(r / 4) as usize % focused.len()] } else { (r / 4) as usize % adm.len() };
        let cmd = &adm[i];
        let say = if cmd.starts_with("initiating_chat") || cmd.starts_with("stay_chat") {
            "\nSAY: Could you help me get open_area_1 ready for the lunch event?"
        } else {
            ""
        };
        Ok(if r % 5 == 1 {
            format!("REASON: Working towards the event.\nACTION: {}{say}", i + 1)
        } else {
            format!("REASON: Working towards the event.\nACTION: {cmd}{say}")
        })
    }
}

pub fn recording_config(service: Arc<dyn GenerationService>) -> SessionConfig {
    let mut cfg = SessionConfig::new(
        Mode::Task,
        PolicyKind::Service { service, model: RECORDED_MODEL.into(), temperature: RECORDED_TEMPERATURE },
    );
    cfg.seed = Some(7);
    cfg
}

/// Runs the 60-minute benchmark against the heuristic responder and returns
/// the recorded replies with the session output.
pub fn record_office_session() -> (RecordedFixture, SessionOutput) {
    let recorder = Arc::new(RecordingService::new(HeuristicResponder::default()));
    let out = run(&recording_config(recorder.clone()), &office(), Some(&goals())).unwrap();
    (recorder.fixture(), out)
}

pub fn recorded_config(no_tp: bool, no_st: bool) -> SessionConfig {
    let mut cfg = SessionConfig::new(
        Mode::Task,
        PolicyKind::Recorded {
            path: fixture_path("office_event_recorded.json"),
            model: RECORDED_MODEL.into(),
            temperature: RECORDED_TEMPERATURE,
        },
    );
    cfg.seed = Some(7);
    cfg.options.no_tp = no_tp;
    cfg.options.no_st = no_st;
    cfg.capture_prompts = true;
    cfg
}
