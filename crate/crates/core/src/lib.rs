//! Online changepoint detection across a network of sensor streams using
//! thresholded moving-sum (MOSUM) statistics.
//!
//! Each sensor keeps a sliding window over its own centered observations and
//! only forwards its local statistic to the fusion centre when the weighted
//! value clears a local threshold. The centre aggregates whatever it receives
//! into a root-sum-square statistic and raises an alarm once the weighted
//! aggregate crosses a global threshold. A zero local threshold recovers the
//! fully centralized scheme in which every sensor reports at every step.
//!
//! Module map:
//!
//! - [`stats`]: baseline estimation, kernels, long-run variance, weight
//!   function, and the incremental local window.
//! - [`detection`]: per-sensor monitors, messaging regimes, global statistic
//!   and the closed-end stopping rule.
//! - [`calibration`]: Monte Carlo critical values from the limiting Gaussian
//!   processes, transmission-cost prediction and finite-sample recalibration.
//! - [`simgen`]: synthetic scenarios (null, mean shifts, AR(1) noise).
//! - [`harness`]: replicated experiments and the derived studies.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod detection;
pub mod harness;
pub mod panel;
pub mod rng;
pub mod simgen;
pub mod stats;
mod sum;

pub use calibration::{
    critical_value_centralized, critical_value_distributed, critical_value_local,
    empirical_null_thresholds, expected_transmission_fraction, LimitGrid,
};
pub use detection::{
    global_statistic, run_monitor, stream_monitor, DetectionOutcome, MessageBatch,
    MonitorConfig, Regime, ScaleEstimator, SensorMonitor,
};
pub use panel::Panel;
pub use harness::{run_experiment, ExperimentReport, HarnessError};
pub use simgen::{generate, Noise, Scenario, Shift};
pub use stats::{estimate_baseline, estimate_lrv, kernel_weight, weight, Baseline, Kernel, WeightFn};
