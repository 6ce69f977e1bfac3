//! Configuration, sweeps and artifact emission behind the command-line
//! front end.

mod commands;
mod config;
mod output;

pub use commands::{
    cmd_count, cmd_gen, cmd_report, cmd_scan, cmd_verify, predicted_area_exponent, AreaLevel,
    CountFlags, ScanSummary, SlopeRow, VerifySummary, LEMMA_ORDER,
};
pub use config::{
    parse_n_range, BudgetBlock, Deadline, OmegaSpec, OutputBlock, Overrides, RunConfig, SweepBlock,
    SystemBlock, ThetaGrid,
};
pub use output::{num, write_atomic};
