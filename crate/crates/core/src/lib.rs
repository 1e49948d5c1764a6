//! Deterministic, text-based multi-agent indoor world simulation.

pub mod analytics;
pub mod catalog;
pub mod conversation;
pub mod error;
pub mod evaluation;
pub mod events;
pub mod mind;
pub mod needs;
pub mod runner;
pub mod scenario;
pub mod world;
