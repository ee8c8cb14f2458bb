//! Information-transfer dynamics and parameter sharing in multi-agent learning.
//!
//! - [`mailp`]: simulator for the information gain/loss dynamics between agents.
//! - [`bounds`]: closed-form convergence-time bounds and their diagnostics.
//! - [`posg`]: finite stochastic games and the agent-indication, policy-merge,
//!   padding and trimming transforms.
//! - [`pursuit`]: the pursuit gridworld.
//! - [`learn`]: tabular Q-learning with a shared table or per-agent tables.
//! - [`harness`]: experiment configs, CSV output and the command-line runner.

pub mod bounds;
pub mod harness;
pub mod learn;
pub mod mailp;
pub mod posg;
pub mod pursuit;
