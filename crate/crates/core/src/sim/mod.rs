//! Deterministic discrete-event simulation of a federated deployment: a
//! central server (CS) and `P` sender/receiver user pairs, backed by the TRA
//! and KGC, with scripted adversaries on the message channel.
//!
//! Each round advances a logical clock by the round interval plus a Poisson
//! waiting delay, then runs signed update upload, aggregation over accepted
//! updates, a signed global-model broadcast and one user-to-user exchange per
//! pair. Key material moves over a trusted in-memory channel; model and
//! application traffic crosses the adversary-observable channel as wire bytes.

pub mod adversary;
mod config;
mod engine;
mod metrics;
mod transcript;

use crate::group::{P256Group, WeierstrassCurve};

pub use self::config::{AttackScenario, CurveChoice, ScenarioKind, SimConfig};
pub use self::engine::{Node, SimState};
pub use self::metrics::{summarize, RoundRecord, SimOutcome, Summary, TraExport};
pub use self::transcript::{Event, EventKind, Transcript};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("build failed during {step}: {detail}")]
    Build { step: &'static str, detail: String },
}

fn run_with<G: crate::group::Group>(config: &SimConfig, group: G) -> Result<SimOutcome, SimError> {
    let mut state = SimState::build(config, group)?;
    state.inject(config.scenario)?;
    state.run_rounds(config.fl.rounds)?;
    state.finish()
}

/// Builds, runs all configured rounds and summarizes.
pub fn run(config: &SimConfig) -> Result<SimOutcome, SimError> {
    match config.curve {
        CurveChoice::Toy => run_with(config, WeierstrassCurve::toy()),
        CurveChoice::Prod => run_with(config, P256Group::new()),
    }
}
