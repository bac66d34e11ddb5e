//! Deterministic TTI-stepped simulator of RL-driven radio slicing (eMBB +
//! uRLLC) under jamming attacks, with a decoy-based defense and a
//! suspend-learning baseline, plus the metrics pipeline that turns run
//! records into degradation/recovery comparisons.
//!
//! The `examples/` directory holds one runnable program per major
//! capability; the `slicesim` binary wraps the same machinery behind
//! `validate`, `run`, `report`, and `list-recipes` subcommands.

pub mod attacks;
pub mod cli;
pub mod config;
pub mod dtrl;
pub mod engine;
pub mod metrics;
pub mod mitigation;
pub mod netmodel;
pub mod nn;
pub mod recipes;
pub mod rng;

pub use config::{AttackKind, ExperimentManifest, MitigationKind, ScenarioConfig};
pub use engine::{run_batch, run_scenario, Phase, RunRecord};
pub use metrics::{degradation, recovery, Ecdf, KpiKind, KpiSummary};
