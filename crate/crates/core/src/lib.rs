//! Hindsight goal generation for sparse-reward, goal-conditioned reinforcement
//! learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`domain`]: states, goals, tasks, trajectories and the FIFO replay buffer.
//! - [`env`]: the goal-oriented MDP interface and three kinematic desk tasks.
//! - [`metric`]: task distance, the polyline obstacle metric and the discrete
//!   Wasserstein distance between equal-size particle sets.
//! - [`matching`]: trajectory scoring, min-cost max-flow assignment and the
//!   hindsight goal selector.
//! - [`agent`]: a goal-conditioned DDPG agent written against `ndarray`.
//! - [`replay`]: "future"-strategy hindsight relabeling.
//! - [`hgg`]: the outer training loop and the HER-only baseline.
//! - [`harness`]: configuration, CSV logging and run aggregation for the CLI.

pub mod agent;
pub mod domain;
pub mod env;
pub mod error;
pub mod harness;
pub mod hgg;
pub mod matching;
pub mod metric;
pub mod replay;

pub use error::{Error, Result};
