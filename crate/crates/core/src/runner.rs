//! Session orchestration: the tick loop, scheduling of multi-tick actions,
//! policy fan-out and event logging.
//!
//! Each tick: needs decay; every idle agent perceives the same start-of-tick
//! snapshot, updates memory and decides; decisions are then dispatched in
//! scenario agent order; finally one needs sample per agent is logged.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytics::{report_csv, ReportKind};
use crate::error::{PolicyError, RunError};
use crate::evaluation::{score, GoalSpec, ScoreReport};
use crate::events::{CommandSource, EventKind, EventLog, EventRecord, LogHeader, LOG_SCHEMA, LOG_VERSION};
use crate::mind::policy::DEFAULT_TEMPERATURE;
use crate::mind::service::ChatMessage;
use crate::mind::{
    perceive, plan, prioritize, update_memory, Decision, GenerationPolicy, GenerationService, HttpService, MemoryStore,
    Playbook, Policy, PolicyContext, PromptOptions, RandomPolicy, RecordedService, RoutinePolicy, ScriptedPolicy, WAIT,
};
use crate::needs::{classify, tick_decay};
use crate::scenario::{self, ScenarioConfig, Severity};
use crate::world::{ActionOutcome, Knowledge, WorldState};

pub const TASK_DURATION_MIN: u64 = 60;
pub const SIMULATION_DURATION_MIN: u64 = 480;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Task,
    Simulation,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Task => "task",
            Mode::Simulation => "simulation",
        }
    }

    pub fn default_duration(self) -> u64 {
        match self {
            Mode::Task => TASK_DURATION_MIN,
            Mode::Simulation => SIMULATION_DURATION_MIN,
        }
    }
}

#[derive(Clone)]
pub enum PolicyKind {
    /// HTTP generation service.
    Generation { endpoint: String, model: String, temperature: f64 },
    /// Replays a recorded-response fixture file.
    Recorded { path: PathBuf, model: String, temperature: f64 },
    /// Any in-process service.
    Service { service: Arc<dyn GenerationService>, model: String, temperature: f64 },
    /// Playbook agents follow their steps; everyone else follows the
    /// needs-driven routine.
    Scripted { playbook: Option<Playbook> },
    Random,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Generation { .. } => "generation",
            PolicyKind::Recorded { .. } => "recorded",
            PolicyKind::Service { .. } => "service",
            PolicyKind::Scripted { .. } => "scripted",
            PolicyKind::Random => "random",
        }
    }

    fn is_generation(&self) -> bool {
        matches!(self, PolicyKind::Generation { .. } | PolicyKind::Recorded { .. } | PolicyKind::Service { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryConfig {
    /// Calls per decision before a transport failure counts as persistent.
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self { attempts: 3, backoff_ms: 500 }
    }
}

#[derive(Clone)]
pub struct SessionConfig {
    pub mode: Mode,
    /// Simulated minutes; `None` picks the mode default.
    pub duration_min: Option<u64>,
    pub policy: PolicyKind,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    pub options: PromptOptions,
    pub max_in_flight: usize,
    pub retry: RetryConfig,
    /// Persistent failures for one agent, in consecutive decisions, before the session aborts.
    pub abort_after: u32,
    /// Keep every generation prompt in the output.
    pub capture_prompts: bool,
}

impl SessionConfig {
    pub fn new(mode: Mode, policy: PolicyKind) -> Self {
        Self {
            mode,
            duration_min: None,
            policy,
            seed: None,
            options: PromptOptions::default(),
            max_in_flight: 8,
            retry: RetryConfig::default(),
            abort_after: 3,
            capture_prompts: false,
        }
    }

    pub fn duration(&self) -> u64 {
        self.duration_min.unwrap_or(self.mode.default_duration())
    }

    /// JSON echo written next to the session outputs.
    pub fn echo(&self, seed: u64) -> Value {
        let mut policy = json!({ "kind": self.policy.name() });
        match &self.policy {
            PolicyKind::Generation { endpoint, model, temperature } => {
                policy["endpoint"] = json!(endpoint);
                policy["model"] = json!(model);
                policy["temperature"] = json!(temperature);
            }
            PolicyKind::Recorded { path, model, temperature } => {
                policy["fixture"] = json!(path.display().to_string());
                policy["model"] = json!(model);
                policy["temperature"] = json!(temperature);
            }
            PolicyKind::Service { model, temperature, .. } => {
                policy["model"] = json!(model);
                policy["temperature"] = json!(temperature);
            }
            PolicyKind::Scripted { playbook } => {
                policy["playbook"] = json!(playbook.is_some());
            }
            PolicyKind::Random => {}
        }
        json!({
            "mode": self.mode.as_str(),
            "duration_min": self.duration(),
            "seed": seed,
            "policy": policy,
            "no_tp": self.options.no_tp,
            "no_st": self.options.no_st,
            "max_in_flight": self.max_in_flight,
            "retry": self.retry,
            "abort_after": self.abort_after,
        })
    }
}

/// A generation prompt as sent on one agent's turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub tick: u64,
    pub agent: String,
    pub messages: Vec<ChatMessage>,
}

pub struct SessionOutput {
    pub world: WorldState,
    pub log: EventLog,
    pub score: Option<ScoreReport>,
    pub prompts: Vec<PromptRecord>,
    pub config_echo: Value,
}

struct Slot {
    name: String,
    index: usize,
    memory: MemoryStore,
    policy: Box<dyn Policy>,
    busy_until: u64,
    failures: u32,
}

fn build_policy(kind: &PolicyKind, service: Option<&Arc<dyn GenerationService>>, seed: u64, name: &str, index: usize) -> Box<dyn Policy> {
    match kind {
        PolicyKind::Generation { model, temperature, .. }
        | PolicyKind::Recorded { model, temperature, .. }
        | PolicyKind::Service { model, temperature, .. } => {
            Box::new(GenerationPolicy::new(service.expect("service built").clone(), model, *temperature))
        }
        PolicyKind::Scripted { playbook } => match playbook.as_ref().and_then(|p| p.agents.get(name)) {
            Some(steps) => Box::new(ScriptedPolicy::new(steps.clone())),
            None => Box::new(RoutinePolicy::new()),
        },
        PolicyKind::Random => Box::new(RandomPolicy::new(seed, index)),
    }
}

struct Turn {
    index: usize,
    admissible: Vec<String>,
    result: Result<Decision, PolicyError>,
}

struct TickInputs<'a> {
    snapshot: &'a WorldState,
    goals: Option<&'a GoalSpec>,
    mode: Mode,
    options: PromptOptions,
    retry: RetryConfig,
}

fn take_turn(slot: &mut Slot, t: &TickInputs<'_>) -> Turn {
    let w = t.snapshot;
    let obs = perceive(w, &slot.name);
    update_memory(&mut slot.memory, &obs, t.goals);
    let profile = &w.agents[&slot.name].profile;
    let objective = plan(&slot.memory, profile.role, t.goals, &w.settings.needs_model);
    let reminder = match (t.mode, t.goals) {
        (Mode::Task, Some(g)) if !t.options.no_tp => prioritize(&slot.memory, profile.role, g),
        _ => String::new(),
    };
    let admissible = w.admissible_actions(&slot.name).unwrap_or_default();
    let ctx = PolicyContext {
        tick: w.tick,
        agent: &slot.name,
        agent_index: slot.index,
        profile,
        world: w,
        observation: &obs,
        memory: &slot.memory,
        objective: &objective,
        reminder: &reminder,
        admissible: &admissible,
        options: t.options,
    };
    let mut attempt = 0;
    let result = loop {
        match slot.policy.decide(&ctx) {
            Err(e) if e.is_retriable() && attempt + 1 < t.retry.attempts => {
                std::thread::sleep(Duration::from_millis(t.retry.backoff_ms << attempt.min(6)));
                attempt += 1;
            }
            other => break other,
        }
    };
    Turn { index: slot.index, admissible, result }
}

fn wait_outcome(agent: &str) -> ActionOutcome {
    ActionOutcome { success: true, message: format!("{agent} waits."), duration_ticks: 1, state_diff: Vec::new() }
}

/// Runs one session. Task mode requires goals; simulation mode forbids them.
pub fn run(cfg: &SessionConfig, scenario_cfg: &ScenarioConfig, goals: Option<&GoalSpec>) -> Result<SessionOutput, RunError> {
    match (cfg.mode, goals) {
        (Mode::Task, None) => return Err(RunError::Config("task mode requires a goal file".into())),
        (Mode::Simulation, Some(_)) => return Err(RunError::Config("goals are only accepted in task mode".into())),
        _ => {}
    }
    if cfg.max_in_flight == 0 {
        return Err(RunError::Config("max_in_flight must be positive".into()));
    }
    let errors: Vec<_> = scenario::validate(scenario_cfg).into_iter().filter(|d| d.severity == Severity::Error).collect();
    if !errors.is_empty() {
        return Err(crate::error::ScenarioError::Invalid(errors).into());
    }
    let mut world = scenario::instantiate(scenario_cfg)?;
    let seed = cfg.seed.unwrap_or(world.settings.seed);
    world.settings.seed = seed;
    if let Some(g) = goals {
        g.check(&world)?;
        // Every task-reading agent receives the full task structure, booking
        // requests included. Random agents never read it.
        let reads_tasks = !matches!(cfg.policy, PolicyKind::Random);
        for a in world.agents.values_mut().filter(|_| reads_tasks) {
            for e in g.event_requests() {
                a.knowledge.insert(Knowledge::EventRequest(e));
            }
        }
    }

    let service: Option<Arc<dyn GenerationService>> = match &cfg.policy {
        PolicyKind::Generation { endpoint, .. } => Some(Arc::new(HttpService::new(endpoint))),
        PolicyKind::Recorded { path, .. } => {
            Some(Arc::new(RecordedService::load(path).map_err(|e| RunError::Config(e.to_string()))?))
        }
        PolicyKind::Service { service, .. } => Some(service.clone()),
        _ => None,
    };
    let mut slots: Vec<Slot> = world
        .agent_order
        .iter()
        .enumerate()
        .map(|(i, n)| Slot {
            name: n.clone(),
            index: i,
            memory: MemoryStore::new(n, world.agents[n].knowledge.clone()),
            policy: build_policy(&cfg.policy, service.as_ref(), seed, n, i),
            busy_until: 0,
            failures: 0,
        })
        .collect();

    let duration = cfg.duration();
    let parallel = cfg.policy.is_generation() && cfg.max_in_flight > 1;
    let mut events = Vec::new();
    let mut prompts = Vec::new();
    let mut end_tick = 0;
    let mut early_exit = false;
    let mut abort_reason = None;

    for t in 1..=duration {
        world.tick = t;
        let model = world.settings.needs_model.clone();
        for a in world.agents.values_mut() {
            a.needs = tick_decay(&a.needs, &model, 1);
        }

        let snapshot = world.clone();
        let inputs = TickInputs { snapshot: &snapshot, goals, mode: cfg.mode, options: cfg.options, retry: cfg.retry };
        let mut idle: Vec<&mut Slot> = slots.iter_mut().filter(|s| s.busy_until <= t).collect();
        let mut turns: Vec<Turn> = Vec::with_capacity(idle.len());
        if parallel {
            for chunk in idle.chunks_mut(cfg.max_in_flight) {
                std::thread::scope(|scope| {
                    let handles: Vec<_> = chunk.iter_mut().map(|s| scope.spawn(|| take_turn(s, &inputs))).collect();
                    for h in handles {
                        turns.push(h.join().expect("policy thread panicked"));
                    }
                });
            }
        } else {
            for s in idle.iter_mut() {
                turns.push(take_turn(s, &inputs));
            }
        }
        drop(idle);

        // Abort before touching the world if any failure is fatal.
        for turn in &turns {
            let slot = &mut slots[turn.index];
            match &turn.result {
                Err(e) if !e.is_retriable() => {
                    abort_reason = Some(format!("{}: {e}", slot.name));
                }
                Err(e) => {
                    slot.failures += 1;
                    if slot.failures >= cfg.abort_after {
                        abort_reason = Some(format!("{}: persistent failure: {e}", slot.name));
                    }
                }
                Ok(_) => slot.failures = 0,
            }
        }
        if abort_reason.is_some() {
            break;
        }

        for turn in turns {
            let slot = &mut slots[turn.index];
            let name = slot.name.clone();
            let mut d = turn.result.unwrap_or_else(|_| Decision::wait());
            if cfg.capture_prompts {
                if let Some(p) = d.prompt.take() {
                    prompts.push(PromptRecord { tick: t, agent: name.clone(), messages: p });
                }
            }
            let listed = turn.admissible.iter().any(|c| c == &d.command);
            let allowed = d.command == WAIT || listed || d.source == CommandSource::LearnFromFailure;
            if !allowed {
                d = Decision::wait();
            }
            let verb = d.command.split_whitespace().next().unwrap_or(WAIT).to_string();
            events.push(EventRecord {
                tick: t,
                agent: name.clone(),
                kind: EventKind::Action { command: d.command.clone(), verb: verb.clone(), source: d.source },
            });
            let outcome = if d.command == WAIT {
                wait_outcome(&name)
            } else {
                world.dispatch_with(&name, &d.command, d.utterance.as_deref())
            };
            events.push(EventRecord {
                tick: t,
                agent: name.clone(),
                kind: EventKind::Outcome {
                    command: d.command.clone(),
                    success: outcome.success,
                    message: outcome.message.clone(),
                    duration_ticks: outcome.duration_ticks,
                    diff: outcome.state_diff.clone(),
                },
            });
            if outcome.success && (verb == "initiating_chat" || verb == "stay_chat") {
                if let Some(sid) = world.agents[&name].conversation.clone() {
                    if let Some(u) = world.conversations[&sid].transcript.last().filter(|u| u.speaker == name && u.tick == t) {
                        events.push(EventRecord {
                            tick: t,
                            agent: name.clone(),
                            kind: EventKind::Utterance { session: sid.clone(), text: u.text.clone() },
                        });
                    }
                }
            }
            slot.busy_until = t + u64::from(outcome.duration_ticks.max(1));
            slot.memory.record_outcome(t, &d.command, &outcome);
        }

        let model = &world.settings.needs_model;
        for n in &world.agent_order {
            let a = &world.agents[n];
            events.push(EventRecord {
                tick: t,
                agent: n.clone(),
                kind: EventKind::NeedsSample {
                    location: a.location.clone(),
                    needs: a.needs,
                    unmet: classify(&a.needs, model).unmet().into_iter().collect(),
                },
            });
        }
        end_tick = t;
        if let Some(g) = goals {
            if score(&world, g).all_met() {
                early_exit = t < duration;
                break;
            }
        }
    }

    let header = LogHeader {
        schema: LOG_SCHEMA.into(),
        version: LOG_VERSION,
        mode: cfg.mode.as_str().into(),
        seed,
        duration_min: duration,
        agents: world.agent_order.clone(),
        end_tick,
        complete: abort_reason.is_none(),
        early_exit,
        abort_reason,
    };
    Ok(SessionOutput {
        score: goals.map(|g| score(&world, g)),
        log: EventLog { header, events },
        prompts,
        config_echo: cfg.echo(seed),
        world,
    })
}

impl SessionOutput {
    /// Writes the scenario copy, config echo, event log, final snapshot,
    /// score report (task mode), analytics CSVs and captured prompts.
    pub fn write_outputs(&self, dir: &Path, scenario_cfg: &ScenarioConfig) -> Result<(), RunError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("scenario.json"), scenario::serialize(scenario_cfg))?;
        std::fs::write(dir.join("config.json"), format!("{}\n", serde_json::to_string_pretty(&self.config_echo)?))?;
        std::fs::write(dir.join("events.jsonl"), self.log.to_jsonl())?;
        std::fs::write(dir.join("final_snapshot.json"), format!("{}\n", self.world.snapshot_json()))?;
        if let Some(s) = &self.score {
            std::fs::write(dir.join("score.json"), format!("{}\n", serde_json::to_string_pretty(s)?))?;
        }
        for k in ReportKind::ALL {
            std::fs::write(dir.join(k.file_name()), report_csv(&self.log, k).0)?;
        }
        if !self.prompts.is_empty() {
            let mut s = String::new();
            for p in &self.prompts {
                s.push_str(&serde_json::to_string(p)?);
                s.push('\n');
            }
            std::fs::write(dir.join("prompts.jsonl"), s)?;
        }
        Ok(())
    }
}

/// Default model settings for the generation-backed policies.
pub fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
