//! Configuration files, initial data, snapshots and batch runs.

pub mod config;
pub mod presets;
pub mod run;
pub mod snapshot;

pub use config::{load_config, load_config_with, parse_config, InitialData, RunConfig, RunMode};
pub use presets::{initial_data_presets, PresetParams, PRESET_NAMES};
pub use run::{run, RunOutcome, RunStatus, RunSummary};
pub use snapshot::{read_snapshot, read_snapshot_on, write_snapshot};
