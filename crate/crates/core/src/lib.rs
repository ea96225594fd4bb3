//! Wizard-of-Oz dialogue collection toolkit.
//!
//! A human dialogue-manager wizard answers a participant by pressing buttons,
//! each bound to a message template and a single recipient (the participant
//! or the robot-navigator wizard). This crate provides the pieces behind that
//! setup:
//!
//! - [`template`]: `{NAME:KIND}` slot templates, filling and inverse matching
//! - [`inventory`]: the tabbed, validated button registry
//! - [`environment`]: environment entities and generated navigation buttons
//! - [`router`]: sessions, three-role message routing and transcripts
//! - [`server`]: the network front end for the router
//! - [`bridge`]: wizard-frame ↔ robot-topic protocol bridge
//! - [`analytics`]: frequency, coverage and pacing reports over corpora
//! - [`cli`]: validation, replay and environment generation commands
//!
//! Runnable examples live in `examples/`; `cargo run --example <name>`.

pub mod analytics;
pub mod bridge;
pub mod cli;
pub mod environment;
pub mod inventory;
pub mod router;
pub mod server;
pub mod template;

pub use template::{normalize, MessageTemplate, SlotBinding, SlotKind, SlotSpec};
