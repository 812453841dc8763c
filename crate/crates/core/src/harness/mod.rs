//! Scenario configuration, the simulator wiring every module together, and
//! parameter sweeps.

pub mod config;
pub mod sim;
pub mod sweep;

pub use config::{AccessMode, AgreementType, ConfigError, ScenarioConfig, PRESET_DEFAULT};
pub use sim::{run_scenario, RunReport, SimError};
pub use sweep::{run_sweep, ModeSpec, SweepRow, SweepSpec};
