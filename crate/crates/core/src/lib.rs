//! Discrete-event simulation of a message-passing application that loses one
//! node, with energy-saving strategies for the surviving nodes while they wait
//! for the failed node to recover.

// Negated float comparisons are used on purpose so NaN inputs fail checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod cascade;
pub mod energy;
pub mod error;
pub mod ft;
pub mod queue;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use error::{ModelError, QueueError, ScenarioError};
pub use report::{ReportFormat, SavingsReport};
pub use scenario::{load_scenario, Scenario};
pub use sim::{run_simulation, SimOutcome};
