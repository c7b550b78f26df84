//! Sweep harness around the `fbmac` core: a flat key=value configuration
//! format, a grid runner that writes one CSV row per grid point, and a
//! consistency checker that validates simulated runs against the analytic
//! bounds and extracts the feedback gain between the two-round and one-shot
//! curves.

pub mod config;
pub mod report;
pub mod sweep;

pub use config::{ConfigError, Mode, SweepConfig};
pub use report::{consistency_report, consistency_report_from_path, ConsistencyReport};
pub use sweep::{run_sweep, SweepOutcome, SweepRow, CSV_COLUMNS};
