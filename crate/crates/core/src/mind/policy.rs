//! Decision policies: generation-backed, scripted playbook, random and
//! the needs-driven routine (see `routine`).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::PolicyError;
use crate::events::CommandSource;
use crate::world::{AgentProfile, WorldState};

use super::memory::MemoryStore;
use super::perception::Observation;
use super::planning::Objective;
use super::prompt::{build_messages, parse_reply, PromptInput, PromptOptions};
use super::service::{ChatMessage, GenerationRequest, GenerationService};

/// The no-op every policy may fall back to; handled by the runner, not dispatched.
pub const WAIT: &str = "wait";

/// Attempts per decision before falling back to [`WAIT`].
pub const MAX_ATTEMPTS: usize = 3;

pub const DEFAULT_TEMPERATURE: f64 = 0.6;

/// Everything a policy may look at for one decision.
pub struct PolicyContext<'a> {
    pub tick: u64,
    pub agent: &'a str,
    /// Position in the scenario's agent list.
    pub agent_index: usize,
    pub profile: &'a AgentProfile,
    /// Immutable start-of-tick world, for predicate-driven policies.
    pub world: &'a WorldState,
    pub observation: &'a Observation,
    pub memory: &'a MemoryStore,
    pub objective: &'a Objective,
    pub reminder: &'a str,
    pub admissible: &'a [String],
    pub options: PromptOptions,
}

impl PolicyContext<'_> {
    pub fn messages(&self) -> Vec<ChatMessage> {
        build_messages(&PromptInput {
            profile: self.profile,
            observation: self.observation,
            memory: self.memory,
            objective: self.objective,
            reminder: self.reminder,
            admissible: self.admissible,
            options: self.options,
        })
    }

    pub fn is_admissible(&self, command: &str) -> bool {
        self.admissible.iter().any(|c| c == command)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub command: String,
    pub utterance: Option<String>,
    pub source: CommandSource,
    /// Initial prompt, for generation-backed policies.
    pub prompt: Option<Vec<ChatMessage>>,
    /// Raw replies, one per attempt.
    pub replies: Vec<String>,
}

impl Decision {
    pub fn admissible(command: impl Into<String>) -> Self {
        Self { command: command.into(), utterance: None, source: CommandSource::Admissible, prompt: None, replies: Vec::new() }
    }

    pub fn wait() -> Self {
        Self { source: CommandSource::Fallback, ..Self::admissible(WAIT) }
    }
}

pub trait Policy: Send {
    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Result<Decision, PolicyError>;
}

/// Uniform draw from the admissible list.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64, agent_index: usize) -> Self {
        let mut s = ChaCha8Rng::seed_from_u64(seed);
        s.set_stream(agent_index as u64 + 1);
        Self { rng: s }
    }
}

impl Policy for RandomPolicy {
    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Result<Decision, PolicyError> {
        if ctx.admissible.is_empty() {
            return Ok(Decision::wait());
        }
        let i = self.rng.gen_range(0..ctx.admissible.len());
        Ok(Decision::admissible(ctx.admissible[i].clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaybookStep {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub say: Option<String>,
}

/// Per-agent command lists. A step is issued once it is admissible; until
/// then the agent waits. `wait` steps idle for one tick.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Playbook {
    pub agents: BTreeMap<String, Vec<PlaybookStep>>,
}

impl Playbook {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

pub struct ScriptedPolicy {
    steps: VecDeque<PlaybookStep>,
}

impl ScriptedPolicy {
    pub fn new(steps: Vec<PlaybookStep>) -> Self {
        Self { steps: steps.into() }
    }

    pub fn remaining(&self) -> usize {
        self.steps.len()
    }
}

impl Policy for ScriptedPolicy {
    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Result<Decision, PolicyError> {
        let Some(step) = self.steps.front() else {
            return Ok(Decision::wait());
        };
        if step.command == WAIT {
            self.steps.pop_front();
            return Ok(Decision::wait());
        }
        if !ctx.is_admissible(&step.command) {
            return Ok(Decision::wait());
        }
        let step = self.steps.pop_front().expect("front exists");
        Ok(Decision { utterance: step.say, ..Decision::admissible(step.command) })
    }
}

/// A command that may be dispatched once even though it is not listed:
/// a fully-argued booking attempt, so an agent can discover a wrong password.
pub fn learn_from_failure_candidate(command: &str) -> bool {
    let mut it = command.split_whitespace();
    it.next() == Some("book_meeting_room") && it.count() == 6
}

/// Prompts a generation service and parses its `ACTION:` line.
pub struct GenerationPolicy {
    service: Arc<dyn GenerationService>,
    model: String,
    temperature: f64,
    tried: BTreeSet<String>,
}

impl GenerationPolicy {
    pub fn new(service: Arc<dyn GenerationService>, model: &str, temperature: f64) -> Self {
        Self { service, model: model.to_string(), temperature, tried: BTreeSet::new() }
    }
}

impl Policy for GenerationPolicy {
    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Result<Decision, PolicyError> {
        let prompt = ctx.messages();
        let mut messages = prompt.clone();
        let mut replies = Vec::new();
        for _ in 0..MAX_ATTEMPTS {
            let req = GenerationRequest {
                agent: ctx.agent.to_string(),
                model: self.model.clone(),
                temperature: self.temperature,
                messages: messages.clone(),
            };
            let text = self.service.complete(&req)?;
            replies.push(text.clone());
            let reply = parse_reply(&text, ctx.admissible);
            let feedback = match reply.command {
                Some(c) if ctx.is_admissible(&c) => {
                    return Ok(Decision {
                        command: c,
                        utterance: reply.say,
                        source: CommandSource::Admissible,
                        prompt: Some(prompt),
                        replies,
                    });
                }
                Some(c) if learn_from_failure_candidate(&c) && !self.tried.contains(&c) => {
                    self.tried.insert(c.clone());
                    return Ok(Decision {
                        command: c,
                        utterance: None,
                        source: CommandSource::LearnFromFailure,
                        prompt: Some(prompt),
                        replies,
                    });
                }
                Some(c) => format!("`{c}` is not one of the admissible commands."),
                None => "Your answer had no ACTION line.".to_string(),
            };
            messages.push(ChatMessage::assistant(text));
            messages.push(ChatMessage::user(format!("{feedback} Choose exactly one command from the numbered list.")));
        }
        Ok(Decision { prompt: Some(prompt), replies, ..Decision::wait() })
    }
}
