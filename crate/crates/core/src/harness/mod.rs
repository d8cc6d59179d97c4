//! Monte Carlo PER campaigns: scenario configs, the frame loop, result
//! files and the canned measurement scenarios.

mod campaign;
mod config;
mod results;
mod scenarios;

pub use campaign::{
    generate_frame, receiver_config, run_campaign, run_campaign_with, run_channel_survey,
    run_frame, Execution, GeneratedFrame, SweepPoint,
};
pub use config::{ChannelPlan, HopAlgorithm, ProfileSpec, ScenarioConfig, SCHEMA_VERSION};
pub use results::{
    emit_results, from_json, to_csv, to_json, update_channel_map, wilson_interval, OutputFormat,
    PerResult, CSV_HEADER, Z_95,
};
pub use scenarios::{paper_scenarios, INTERFERENCE_SNR_DB, PAPER_SEED, PAPER_SIR_DB};
