//! Distributed PageRank engines.
//!
//! All engines share the two-state push formulation: each page holds an
//! estimate `x_i` and a residual `z_i`, and an acting page forwards its
//! residual along its out-links. The crate provides
//!
//! * [`graph`]: web graphs, dangling-page patching and partitions,
//! * [`reference`]: dense, power-method and Neumann-sum oracles,
//! * [`push`]: synchronous, gossip and simultaneous-set engines,
//! * [`cluster`]: group updates backed by per-group local solves,
//! * [`schedule`]: seeded update policies and liveness auditing,
//! * [`lifted`]: dense lifted matrices used as small-scale test oracles,
//! * [`harness`]: experiment configuration, Monte Carlo batches and CSV
//!   comparison tables.

pub mod cluster;
pub mod error;
pub mod generate;
pub mod graph;
pub mod harness;
pub mod lifted;
mod linalg;
pub mod push;
pub mod reference;
pub mod schedule;
pub mod trace;

pub use cluster::{run_clustered, step_group, GroupFactors};
pub use error::{Error, Result};
pub use graph::{Damping, Partition, WebGraph};
pub use push::{
    exact_error, init_state, run, run_sync, step_gossip, step_set, step_sync, PushEngine, PushState,
};
pub use reference::{neumann_partial, power_method, solve_dense, Oracle, RankVector};
pub use schedule::{liveness_audit, Schedule, ScheduleKind};
pub use trace::{Cadence, StopRule, Trace, TraceOptions, TraceRow};
