//! Screw fastening workbench.
//!
//! * [`sim`]: screwdriver, screw and substrate plant with cam-out and sensor noise.
//! * [`controller`]: force-controlled screwing/unscrewing with a torque-proportional force law.
//! * [`analysis`]: peaks, envelopes, regrasp rate, force/torque ratio and rank tests.
//! * [`scenario`], [`run`], [`csvlog`], [`reports`]: files and orchestration behind the CLI.

pub mod analysis;
pub mod controller;
pub mod csvlog;
mod fit;
pub mod reports;
pub mod run;
pub mod scenario;
pub mod sim;

pub use run::{run_scenario, Outcome, RunOutput, RunReport};
pub use scenario::Scenario;
