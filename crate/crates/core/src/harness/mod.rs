//! Experiment orchestration: configuration, the training loop, metrics,
//! reports and sweeps.

pub mod config;
pub mod metrics;
pub mod report;
pub mod sweep;
pub mod train;

pub use config::{Method, RunConfig, RunSettings};
pub use metrics::{evaluate, segmentation_metrics, PrototypeSet, SegMetrics};
pub use report::{read_epochs_csv, EpochRecord, RunReport, RunSummary, CSV_COLUMNS};
pub use sweep::{sweep, Axis, SweepOutcome};
pub use train::{evaluate_snapshot, train, train_on, Trainer};
