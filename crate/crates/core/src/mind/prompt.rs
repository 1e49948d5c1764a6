use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::world::AgentProfile;

use super::memory::MemoryStore;
use super::perception::Observation;
use super::planning::Objective;
use super::service::ChatMessage;

/// Semantic-map entries older than this many ticks stay out of the digest.
pub const DIGEST_WINDOW: u64 = 30;
/// Hard cap on digest lines of each kind.
pub const DIGEST_MAX_ENTRIES: usize = 40;
pub const DIGEST_EPISODES: usize = 8;

/// Ablation switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    /// Drop the prioritization reminder.
    pub no_tp: bool,
    /// Drop the semantic map and task progress from the digest.
    pub no_st: bool,
}

pub struct PromptInput<'a> {
    pub profile: &'a AgentProfile,
    pub observation: &'a Observation,
    pub memory: &'a MemoryStore,
    pub objective: &'a Objective,
    pub reminder: &'a str,
    pub admissible: &'a [String],
    pub options: PromptOptions,
}

pub fn system_section(p: &AgentProfile, memory: &MemoryStore) -> String {
    let mut s = format!(
        "You are {}, a {} working in an office building. {}\nAppearance: {}.\n",
        p.name, p.role, p.internal_profile, p.appearance
    );
    let skills: Vec<&str> = p.skills.keys().map(String::as_str).collect();
    if !skills.is_empty() {
        let _ = writeln!(s, "Skills: {}.", skills.join(", "));
    }
    for k in &memory.knowledge {
        let _ = writeln!(s, "You know that {}.", k.describe());
    }
    s
}

pub fn memory_digest(memory: &MemoryStore, options: PromptOptions) -> String {
    let mut s = String::new();
    if !options.no_st {
        let recent: Vec<_> = memory
            .semantic
            .values()
            .filter(|e| e.tick + DIGEST_WINDOW >= memory.tick)
            .take(DIGEST_MAX_ENTRIES)
            .collect();
        if !recent.is_empty() {
            s.push_str("Known objects:\n");
            for e in recent {
                let place = match (&e.entity.holder, &e.entity.receptacle) {
                    (Some(h), _) => format!("held by {h}"),
                    (None, Some(r)) => format!("at {} in {r}", e.entity.location),
                    (None, None) => format!("at {}", e.entity.location),
                };
                let _ = writeln!(s, "- {} ({}) {place}, seen minute {}", e.entity.name, e.entity.otype, e.tick);
            }
        }
        if !memory.progress.is_empty() {
            s.push_str("Task progress:\n");
            for p in &memory.progress {
                let v = if p.satisfied { "done" } else { "open" };
                let _ = writeln!(s, "- {} condition {}: {v} since minute {}", p.task, p.condition + 1, p.since);
            }
        }
    }
    let n = memory.episodes.len();
    if n > 0 {
        s.push_str("Recent events:\n");
        for e in memory.episodes.iter().skip(n.saturating_sub(DIGEST_EPISODES)) {
            let _ = writeln!(s, "- minute {}: {}", e.tick, e.text);
        }
    }
    s
}

pub const INSTRUCTION: &str = "Think about your situation, then choose exactly one command from the list.\n\
Answer in this format:\nREASON: <one or two sentences>\nACTION: <command copied from the list>\n\
If the command is a chat command you may add a line SAY: <what you say>.";

pub fn build_messages(input: &PromptInput<'_>) -> Vec<ChatMessage> {
    let mut u = String::new();
    let _ = writeln!(u, "## Observation\n{}", input.observation.render());
    let digest = memory_digest(input.memory, input.options);
    if !digest.is_empty() {
        let _ = writeln!(u, "## Memory\n{digest}");
    }
    let _ = writeln!(u, "## Current objective\n{}.\n", input.objective);
    if !input.options.no_tp && !input.reminder.is_empty() {
        let _ = writeln!(u, "## Reminder\n{}", input.reminder);
    }
    u.push_str("## Admissible commands\n");
    for (i, c) in input.admissible.iter().enumerate() {
        let _ = writeln!(u, "{}. {c}", i + 1);
    }
    u.push('\n');
    u.push_str(INSTRUCTION);
    vec![ChatMessage::system(system_section(input.profile, input.memory)), ChatMessage::user(u)]
}

/// Parsed model reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub command: Option<String>,
    pub say: Option<String>,
}

/// Reads the last `ACTION:` line; a bare list index selects from `admissible`.
pub fn parse_reply(text: &str, admissible: &[String]) -> Reply {
    let mut command = None;
    let mut say = None;
    for line in text.lines() {
        let l = line.trim().trim_start_matches(['*', '-', ' ']);
        if let Some(rest) = strip_label(l, "ACTION:") {
            let c = rest.trim().trim_matches(['`', '"', '.', '*']).trim();
            let c = match c.parse::<usize>() {
                Ok(i) if i >= 1 && i <= admissible.len() => admissible[i - 1].clone(),
                _ => {
                    // "3. go_to kitchen" style answers.
                    let stripped = c.split_once(". ").filter(|(n, _)| n.parse::<usize>().is_ok()).map_or(c, |x| x.1);
                    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
                }
            };
            if !c.is_empty() {
                command = Some(c);
            }
        } else if let Some(rest) = strip_label(l, "SAY:") {
            let t = rest.trim();
            if !t.is_empty() {
                say = Some(t.to_string());
            }
        }
    }
    Reply { command, say }
}

fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let head = line.get(..label.len())?;
    head.eq_ignore_ascii_case(label).then(|| &line[label.len()..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adm() -> Vec<String> {
        vec!["go_to kitchen".into(), "look_around".into()]
    }

    #[test]
    fn parses_last_action_line() {
        let r = parse_reply("REASON: x\nACTION: look_around\nACTION: `go_to kitchen`", &adm());
        assert_eq!(r.command.as_deref(), Some("go_to kitchen"));
    }

    #[test]
    fn parses_index_and_say() {
        let r = parse_reply("reason: hm\naction: 2\nSay: hello there", &adm());
        assert_eq!(r.command.as_deref(), Some("look_around"));
        assert_eq!(r.say.as_deref(), Some("hello there"));
        let r = parse_reply("ACTION: 1. go_to kitchen", &adm());
        assert_eq!(r.command.as_deref(), Some("go_to kitchen"));
    }

    #[test]
    fn missing_action_is_none() {
        assert_eq!(parse_reply("I think I will rest.", &adm()).command, None);
    }
}
