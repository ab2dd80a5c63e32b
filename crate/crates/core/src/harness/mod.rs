//! Campaign configuration, execution and export.

pub mod campaign;
pub mod config;
pub mod export;
pub mod seeds;

pub use campaign::{
    run_campaign, wilson_interval, Campaign, CampaignOutput, PointCounts, ResultRecord,
};
pub use config::{CampaignConfig, SCHEMA_VERSION};
pub use export::{
    config_hash, export_results, read_csv, read_json, Format, JsonResults, Metadata, CSV_COLUMNS,
};
pub use seeds::trial_seed;
