//! Constant-product AMM engine and scripted scenario simulator.

pub mod ledger;
pub mod math;
pub mod scenarios;
pub mod sim;

pub use ledger::{ConservationError, Ledger};
pub use math::{AddOutcome, AmmError, PoolState, RemoveOutcome, Side, SwapOutcome};
pub use sim::{parse_scenario, run_scenario, units, Action, LpAmount, Scenario, SimError, SimOutput, SimPool, Step, StepError};
