//! Blind user-to-AP association learned online.
//!
//! The crate models a downlink cellular network (APs serving a grid of
//! locations), learns association policies slot by slot with a periodic
//! exponentiated-gradient scheme that never sees the demand before deciding,
//! and scores the learned play against hindsight-optimal periodic static
//! policies.
//!
//! Module map:
//!
//! - [`topology`]: radio geometry, Shannon rates, neighbourhoods.
//! - [`traffic`]: demand traces and the zone/window calendar.
//! - [`cost`]: AP loads, the alpha-fair cost family, the penalised objective
//!   and its gradient.
//! - [`learner`]: exponentiated-gradient updates and the periodic online
//!   learner.
//! - [`benchmark`]: offline periodic-static, static and dynamic benchmarks.
//! - [`metrics`]: run logs, regret, theoretical bounds, violation counts.
//! - [`experiment`]: config-driven runs and parameter sweeps.

pub mod benchmark;
pub mod cost;
pub mod error;
pub mod experiment;
pub mod learner;
pub mod metrics;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
