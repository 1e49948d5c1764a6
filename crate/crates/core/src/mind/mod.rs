//! Agent cognition: perception, memory, planning, task prioritization,
//! prompting and the pluggable decision policies.

pub mod memory;
pub mod perception;
pub mod planning;
pub mod policy;
pub mod prompt;
pub mod routine;
pub mod service;

pub use memory::{update_memory, MemoryStore};
pub use perception::{perceive, Observation};
pub use planning::{plan, prioritize, Objective};
pub use policy::{
    Decision, GenerationPolicy, Playbook, PlaybookStep, Policy, PolicyContext, RandomPolicy, ScriptedPolicy, WAIT,
};
pub use prompt::PromptOptions;
pub use routine::RoutinePolicy;
pub use service::{GenerationService, HttpService, RecordedFixture, RecordedService, RecordingService};
