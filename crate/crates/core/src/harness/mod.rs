//! Experiment driver: Monte-Carlo SER sweeps, multiplexed and duty-cycled
//! reception, analytic throughput and overhead reports, CSV output.
//!
//! Every trial derives its own seed from the root seed and its grid position,
//! so results do not depend on thread scheduling and reruns are byte-identical.

pub mod config;
pub mod duty;
pub mod report;
pub mod stats;
pub mod sweep;
pub mod trial;

pub use config::{ExperimentConfig, FloatList, KeyValues, RhoRange, DEFAULT_LEARN_ROWS};
pub use duty::{duty_cycle_experiment, duty_success_rate, write_duty_csv, DutyExperiment};
pub use report::{
    overhead_report, overhead_report_multiplexed, throughput_report, write_overhead_csv,
    write_throughput_csv, OverheadReport, ThroughputMode, ThroughputRow,
};
pub use stats::{derive_seed, wilson_half_width, wilson_interval};
pub use sweep::{
    channel_at, check_occupancy_trend, check_rho_trend, multiplex_experiment, ser_sweep,
    write_multiplex_csv, write_ser_csv, MultiplexExperiment, MultiplexPoint, SerPoint, TrendCheck,
};
pub use trial::{run_trial, sampling_duration_s, symbol_trial, DutySpec, TrialOutcome, TrialSetup};
