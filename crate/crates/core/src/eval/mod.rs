//! Metrics and the experiment protocol: mapping sessions, localization runs
//! and navigation episodes, batched over seeds.

mod batch;
mod episode;
mod localization;
mod mapping;
mod metrics;

pub use batch::{
    format_table, par_seeds, run_batch, summarize, with_pool, write_quality_csv, write_reports_csv, BatchSummary, RunConfig,
    QUALITY_HEADER, REPORT_HEADER, THREADS_ENV,
};
pub use episode::{
    run_episode, shortest_route_length, EpisodeConfig, EpisodeOutput, LocalizerChoice, Outcome, PlannerChoice, RunReport,
};
pub use localization::{
    localization_run, write_localization_log, LocalizationConfig, LocalizationOutcome, LocalizationSample, LOCALIZATION_HEADER,
};
pub use mapping::{mapping_session, pedestrian_positions, snapshot_quality, MappingConfig, MappingOutcome};
pub use metrics::{detect_ca_actions, localization_mse, CaParams};
