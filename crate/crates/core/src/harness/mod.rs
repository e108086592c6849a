//! Seeded scenario simulations and the gas cost model.

pub mod confidentiality;
mod driver;
pub mod gas;
mod scenario;
pub mod suite;

pub use driver::{run_scenario, Atomicity, CheckResult, Observation, ScenarioReport, Simulation};
pub use scenario::*;
pub use suite::{run_suite, SCENARIOS};
