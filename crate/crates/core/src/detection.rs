//! The online monitoring protocol: per-sensor monitors, message filtering,
//! aggregation at the fusion centre and the closed-end stopping rule.
//!
//! At monitoring time `k` (absolute time `m + k`) sensor `i` computes its
//! local statistic `T_i` and, under the distributed regime, transmits it only
//! if `w(k,h)·T_i > c_local`. The centre forms `sqrt(Σ M_i²)` over the
//! messages it received and stops at the first `k ≤ ⌊m·T̃⌋` with
//! `w(k,h)·sqrt(Σ M_i²) > c_global`.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{CsvFormat, CsvRows, Panel, PanelError};
use crate::stats::{
    default_bandwidth, estimate_baseline, estimate_lrv_with_fallback, weight, Baseline, Kernel,
    LocalWindow, LrvFallback, StatsError, WeightFn,
};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("stream {stream}: {source}")]
    Baseline { stream: usize, source: StatsError },
    #[error("source ended after {rows} rows; training needs {needed}")]
    SourceExhausted { rows: usize, needed: usize },
    #[error("data has {rows} rows; training plus monitoring needs {needed}")]
    IncompleteData { rows: usize, needed: usize },
    #[error("row {row}: expected {expected} columns, found {found}")]
    Width { row: usize, expected: usize, found: usize },
    #[error(transparent)]
    Data(#[from] PanelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{key}: {reason}")]
pub struct ConfigError {
    pub key: &'static str,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: &'static str, reason: impl Into<String>) -> Self {
        Self { key, reason: reason.into() }
    }
}

/// Messaging regime between sensors and the fusion centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    /// Every sensor reports at every step.
    Centralized,
    /// A sensor reports only when `w(k,h)·T_i > c_local`. A zero threshold
    /// transmits everything, matching [`Regime::Centralized`] exactly.
    Distributed { c_local: f64 },
}

impl Regime {
    pub fn c_local(&self) -> f64 {
        match *self {
            Regime::Centralized => 0.0,
            Regime::Distributed { c_local } => c_local,
        }
    }

    #[inline]
    fn transmits(&self, weighted: f64) -> bool {
        match *self {
            Regime::Centralized => true,
            Regime::Distributed { c_local } => c_local == 0.0 || weighted > c_local,
        }
    }
}

/// How each stream's noise scale is estimated from its training sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ScaleEstimator {
    #[default]
    Plain,
    /// Kernel long-run variance; `bandwidth = None` uses `⌈m^{1/3}⌉`.
    LongRun { kernel: Kernel, bandwidth: Option<usize>, fallback: LrvFallback },
}

impl ScaleEstimator {
    pub fn estimate(&self, history: &[f64]) -> Result<Baseline, StatsError> {
        match *self {
            ScaleEstimator::Plain => estimate_baseline(history),
            ScaleEstimator::LongRun { kernel, bandwidth, fallback } => {
                let l = bandwidth.unwrap_or_else(|| default_bandwidth(history.len()));
                estimate_lrv_with_fallback(history, kernel, l, fallback)
            }
        }
    }
}

/// Protocol parameters.
#[derive(Debug, Clone)]
pub struct MonitorConfig {
    /// Number of streams.
    pub d: usize,
    /// Training length.
    pub m: usize,
    /// Window length, `1 ≤ h ≤ m`.
    pub h: usize,
    /// Monitoring horizon factor; monitoring runs for `⌊m·T̃⌋` steps.
    pub t_tilde: f64,
    pub weight: WeightFn,
    pub regime: Regime,
    pub c_global: f64,
    pub scale: ScaleEstimator,
    /// Keep the weighted global statistic of every executed step.
    pub record_trace: bool,
}

impl MonitorConfig {
    pub fn new(d: usize, m: usize, h: usize, t_tilde: f64, regime: Regime, c_global: f64) -> Self {
        Self {
            d,
            m,
            h,
            t_tilde,
            weight: WeightFn::LogWeight,
            regime,
            c_global,
            scale: ScaleEstimator::Plain,
            record_trace: false,
        }
    }

    /// Configuration whose monitoring period is exactly `steps` long.
    pub fn with_steps(d: usize, m: usize, h: usize, steps: usize, regime: Regime, c_global: f64) -> Self {
        Self::new(d, m, h, steps as f64 / m as f64, regime, c_global)
    }

    /// `h / m`.
    pub fn beta(&self) -> f64 {
        self.h as f64 / self.m as f64
    }

    /// `⌊m·T̃⌋`. Products within 1e-9 relative of an integer are taken as that
    /// integer so that `T̃ = steps / m` round-trips.
    pub fn horizon(&self) -> usize {
        let x = self.m as f64 * self.t_tilde;
        let r = x.round();
        if (x - r).abs() <= 1e-9 * r.max(1.0) {
            r as usize
        } else {
            x.floor() as usize
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.d == 0 {
            return Err(ConfigError::new("d", "must be at least 1"));
        }
        if self.m < 2 {
            return Err(ConfigError::new("m", "must be at least 2"));
        }
        if self.h == 0 || self.h > self.m {
            return Err(ConfigError::new("h", format!("must lie in [1, m = {}], got {}", self.m, self.h)));
        }
        if !(self.t_tilde.is_finite() && self.t_tilde > 0.0) {
            return Err(ConfigError::new("t_tilde", format!("must be finite and positive, got {}", self.t_tilde)));
        }
        if self.horizon() == 0 {
            return Err(ConfigError::new("t_tilde", "m·t_tilde must be at least 1"));
        }
        if let Regime::Distributed { c_local } = self.regime {
            if c_local.is_nan() || c_local < 0.0 {
                return Err(ConfigError::new("c_local", format!("must be non-negative, got {c_local}")));
            }
        }
        if self.c_global.is_nan() || self.c_global < 0.0 {
            return Err(ConfigError::new("c_global", format!("must be non-negative, got {}", self.c_global)));
        }
        if let ScaleEstimator::LongRun { bandwidth: Some(l), .. } = self.scale {
            if l == 0 || l >= self.m {
                return Err(ConfigError::new("bandwidth", format!("must lie in [1, m - 1], got {l}")));
            }
        }
        Ok(())
    }
}

/// One sensor: frozen baseline plus a window of its last `h` centered values.
#[derive(Debug, Clone)]
pub struct SensorMonitor {
    baseline: Baseline,
    window: LocalWindow,
}

impl SensorMonitor {
    /// Estimates the baseline on `history` and seeds the window with the last
    /// `h` training values, so the statistic is defined from the first
    /// monitoring step on.
    pub fn train(history: &[f64], h: usize, scale: &ScaleEstimator) -> Result<Self, StatsError> {
        let baseline = scale.estimate(history)?;
        Ok(Self::with_baseline(baseline, history, h))
    }

    /// Uses a given baseline; `history` only seeds the window.
    pub fn with_baseline(baseline: Baseline, history: &[f64], h: usize) -> Self {
        let mut window = LocalWindow::new(h);
        let start = history.len().saturating_sub(h);
        for x in &history[start..] {
            window.push(x - baseline.mean());
        }
        Self { baseline, window }
    }

    pub fn baseline(&self) -> &Baseline {
        &self.baseline
    }

    pub fn window(&self) -> &LocalWindow {
        &self.window
    }

    #[inline]
    pub fn observe(&mut self, x: f64) {
        self.window.push(x - self.baseline.mean());
    }

    pub fn statistic(&self) -> Result<f64, StatsError> {
        crate::stats::local_statistic(&self.window, &self.baseline)
    }
}

/// Messages received by the centre at absolute time `time`. Entries are
/// `(stream index, unweighted T_i)` in increasing stream order; absent
/// streams sent nothing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageBatch {
    pub time: usize,
    pub entries: Vec<(usize, f64)>,
}

impl MessageBatch {
    pub fn transmissions(&self) -> usize {
        self.entries.len()
    }
}

/// Root-sum-square of the received messages; missing entries count as zero.
pub fn global_statistic(batch: &MessageBatch) -> f64 {
    batch.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
}

/// Result of one monitoring step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub batch: MessageBatch,
    /// `w(k,h)·sqrt(Σ M²)`.
    pub global_weighted: f64,
    pub alarmed: bool,
}

/// Feeds one observation per stream, filters messages and applies the global
/// test at monitoring time `k ≥ 1`.
pub fn step(
    monitors: &mut [SensorMonitor],
    config: &MonitorConfig,
    observations: &[f64],
    k: usize,
) -> Result<StepResult, StatsError> {
    let mut batch = MessageBatch::default();
    let (global_weighted, alarmed) = step_into(monitors, config, observations, k, &mut batch)?;
    Ok(StepResult { batch, global_weighted, alarmed })
}

fn step_into(
    monitors: &mut [SensorMonitor],
    config: &MonitorConfig,
    observations: &[f64],
    k: usize,
    batch: &mut MessageBatch,
) -> Result<(f64, bool), StatsError> {
    debug_assert!(k >= 1);
    debug_assert_eq!(monitors.len(), observations.len());
    let w = weight(&config.weight, k, config.h);
    batch.time = config.m + k;
    batch.entries.clear();
    for (i, (mon, &x)) in monitors.iter_mut().zip(observations).enumerate() {
        mon.observe(x);
        let t = mon.statistic()?;
        if config.regime.transmits(w * t) {
            batch.entries.push((i, t));
        }
    }
    let global_weighted = w * global_statistic(batch);
    Ok((global_weighted, global_weighted > config.c_global))
}

/// Stopping time and communication record of one monitoring run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub m: usize,
    pub horizon: usize,
    /// Monitoring time `k̂` of the first alarm; `None` means no alarm.
    pub stopped_at: Option<usize>,
    /// Messages sent at each executed step.
    pub transmissions_per_step: Vec<u32>,
    pub global_trace: Option<Vec<f64>>,
    /// Largest weighted global statistic over the executed steps.
    pub max_global_weighted: f64,
    pub baselines: Vec<Baseline>,
}

impl DetectionOutcome {
    pub fn alarm_time_abs(&self) -> Option<usize> {
        self.stopped_at.map(|k| self.m + k)
    }

    pub fn total_transmissions(&self) -> u64 {
        self.transmissions_per_step.iter().map(|&n| n as u64).sum()
    }

    pub fn steps_executed(&self) -> usize {
        self.transmissions_per_step.len()
    }

    pub fn report(&self) -> OutcomeReport {
        OutcomeReport {
            stopped_at_k: self.stopped_at,
            alarm_time_abs: self.alarm_time_abs(),
            total_transmissions: self.total_transmissions(),
            steps_executed: self.steps_executed(),
        }
    }
}

/// Flat summary written by the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub stopped_at_k: Option<usize>,
    pub alarm_time_abs: Option<usize>,
    pub total_transmissions: u64,
    pub steps_executed: usize,
}

impl OutcomeReport {
    /// `key,value` lines; absent values are left empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "key,value\nstopped_at_k,{}\nalarm_time_abs,{}\ntotal_transmissions,{}\nsteps_executed,{}\n",
            opt(self.stopped_at_k),
            opt(self.alarm_time_abs),
            self.total_transmissions,
            self.steps_executed
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Anything that yields rows of `d` observations in time order.
pub trait RowSource {
    /// 1-based index of the next row, for error messages.
    fn next_row(&mut self) -> Result<Option<&[f64]>, PanelError>;
}

impl<R: Read> RowSource for CsvRows<R> {
    fn next_row(&mut self) -> Result<Option<&[f64]>, PanelError> {
        CsvRows::next_row(self)
    }
}

/// Row source over an in-memory panel.
pub struct PanelRows<'a> {
    panel: &'a Panel,
    next: usize,
}

impl<'a> PanelRows<'a> {
    pub fn new(panel: &'a Panel) -> Self {
        Self { panel, next: 0 }
    }
}

impl RowSource for PanelRows<'_> {
    fn next_row(&mut self) -> Result<Option<&[f64]>, PanelError> {
        if self.next >= self.panel.rows() {
            return Ok(None);
        }
        self.next += 1;
        Ok(Some(self.panel.row(self.next - 1)))
    }
}

/// Online engine: trained monitors plus the running outcome.
pub struct Detector {
    config: MonitorConfig,
    monitors: Vec<SensorMonitor>,
    batch: MessageBatch,
    k: usize,
    outcome: DetectionOutcome,
}

impl Detector {
    /// Trains one monitor per column of `training` (`m` rows × `d` columns,
    /// supplied column-wise).
    pub fn train(config: &MonitorConfig, columns: &[Vec<f64>]) -> Result<Self, DetectError> {
        config.validate()?;
        debug_assert_eq!(columns.len(), config.d);
        let monitors = columns
            .iter()
            .enumerate()
            .map(|(stream, col)| {
                SensorMonitor::train(col, config.h, &config.scale).map_err(|source| DetectError::Baseline { stream, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_monitors(config, monitors))
    }

    /// Starts monitoring with already-trained monitors.
    pub fn from_monitors(config: &MonitorConfig, monitors: Vec<SensorMonitor>) -> Self {
        let baselines = monitors.iter().map(|m| *m.baseline()).collect();
        Self {
            config: config.clone(),
            monitors,
            batch: MessageBatch::default(),
            k: 0,
            outcome: DetectionOutcome {
                m: config.m,
                horizon: config.horizon(),
                stopped_at: None,
                transmissions_per_step: Vec::new(),
                global_trace: config.record_trace.then(Vec::new),
                max_global_weighted: 0.0,
                baselines,
            },
        }
    }

    /// True once an alarm fired or the horizon is exhausted.
    pub fn is_done(&self) -> bool {
        self.outcome.stopped_at.is_some() || self.k >= self.outcome.horizon
    }

    /// Processes the next monitoring row. Returns whether it alarmed.
    pub fn push(&mut self, row: &[f64]) -> Result<bool, DetectError> {
        debug_assert!(!self.is_done());
        self.k += 1;
        let (g, alarmed) = step_into(&mut self.monitors, &self.config, row, self.k, &mut self.batch)
            .map_err(|source| DetectError::Baseline { stream: 0, source })?;
        let out = &mut self.outcome;
        out.transmissions_per_step.push(self.batch.transmissions() as u32);
        if let Some(trace) = out.global_trace.as_mut() {
            trace.push(g);
        }
        if g > out.max_global_weighted {
            out.max_global_weighted = g;
        }
        if alarmed {
            out.stopped_at = Some(self.k);
        }
        Ok(alarmed)
    }

    /// The most recent batch received by the centre.
    pub fn last_batch(&self) -> &MessageBatch {
        &self.batch
    }

    pub fn finish(self) -> DetectionOutcome {
        self.outcome
    }
}

fn drive<S: RowSource>(config: &MonitorConfig, source: &mut S) -> Result<DetectionOutcome, DetectError> {
    config.validate()?;
    let d = config.d;
    let mut columns = vec![Vec::with_capacity(config.m); d];
    let mut rows = 0;
    while rows < config.m {
        let Some(row) = source.next_row()? else {
            return Err(DetectError::SourceExhausted { rows, needed: config.m });
        };
        rows += 1;
        if row.len() != d {
            return Err(DetectError::Width { row: rows, expected: d, found: row.len() });
        }
        for (col, &x) in columns.iter_mut().zip(row) {
            col.push(x);
        }
    }
    let mut det = Detector::train(config, &columns)?;
    drop(columns);
    while !det.is_done() {
        let Some(row) = source.next_row()? else { break };
        rows += 1;
        if row.len() != d {
            return Err(DetectError::Width { row: rows, expected: d, found: row.len() });
        }
        det.push(row)?;
    }
    Ok(det.finish())
}

/// Runs the full protocol on a materialized panel whose first `m` rows are
/// training data. The panel must cover the whole horizon.
pub fn run_monitor(config: &MonitorConfig, data: &Panel) -> Result<DetectionOutcome, DetectError> {
    config.validate()?;
    if data.width() != config.d {
        return Err(DetectError::Width { row: 1, expected: config.d, found: data.width() });
    }
    let needed = config.m + config.horizon();
    if data.rows() < needed {
        return Err(DetectError::IncompleteData { rows: data.rows(), needed });
    }
    drive(config, &mut PanelRows::new(data))
}

/// Online form of [`run_monitor`]: rows are consumed one at a time and only
/// the training block and the windows are held in memory. A source that ends
/// before the horizon simply ends monitoring there.
pub fn stream_monitor<S: RowSource>(config: &MonitorConfig, source: &mut S) -> Result<DetectionOutcome, DetectError> {
    drive(config, source)
}

/// [`stream_monitor`] over a CSV reader.
pub fn stream_monitor_csv<R: Read>(config: &MonitorConfig, input: R, format: CsvFormat) -> Result<DetectionOutcome, DetectError> {
    let format = CsvFormat { width: Some(config.d), ..format };
    let mut rows = CsvRows::new(input, format);
    match drive(config, &mut rows) {
        Err(DetectError::Data(PanelError::Width { row, expected, found })) => Err(DetectError::Width { row, expected, found }),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, substream, Domain};

    fn noise_panel(d: usize, rows: usize, seed: u64) -> Panel {
        let mut p = Panel::zeros(d, rows);
        for i in 0..d {
            let mut r = substream(seed, Domain::Noise, 0, i as u64);
            for t in 0..rows {
                p.set(t, i, standard_normal(&mut r));
            }
        }
        p
    }

    #[test]
    fn global_statistic_examples() {
        let b = MessageBatch { time: 0, entries: vec![(1, 3.0), (2, 4.0)] };
        assert_eq!(global_statistic(&b), 5.0);
        assert_eq!(global_statistic(&MessageBatch::default()), 0.0);
        let one = MessageBatch { time: 0, entries: vec![(0, 2.5)] };
        assert_eq!(global_statistic(&one), 2.5);
    }

    #[test]
    fn hand_evaluated_single_stream_step() {
        let cfg = MonitorConfig::with_steps(1, 2, 2, 4, Regime::Centralized, 1.0);
        let base = Baseline::known(0.0, 1.0).unwrap();
        let mut mons = vec![SensorMonitor::with_baseline(base, &[0.0, 10.0], 2)];
        let r = step(&mut mons, &cfg, &[10.0], 1).unwrap();
        assert_eq!(r.batch.entries, vec![(0, 20.0)]);
        assert!((r.global_weighted - 20.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(r.alarmed);
        assert_eq!(r.batch.time, 3);
    }

    #[test]
    fn infinite_local_threshold_sends_nothing() {
        let cfg = MonitorConfig::with_steps(3, 20, 5, 50, Regime::Distributed { c_local: f64::INFINITY }, 0.0);
        let out = run_monitor(&cfg, &noise_panel(3, 70, 1)).unwrap();
        assert_eq!(out.stopped_at, None);
        assert_eq!(out.total_transmissions(), 0);
        assert_eq!(out.steps_executed(), 50);
    }

    #[test]
    fn zero_local_threshold_matches_centralized() {
        let data = noise_panel(5, 150, 2);
        for c_global in [2.0, 3.0, f64::INFINITY] {
            let mut a = MonitorConfig::with_steps(5, 50, 25, 100, Regime::Centralized, c_global);
            a.record_trace = true;
            let mut b = a.clone();
            b.regime = Regime::Distributed { c_local: 0.0 };
            let oa = run_monitor(&a, &data).unwrap();
            let ob = run_monitor(&b, &data).unwrap();
            assert_eq!(oa, ob);
            assert!(oa.transmissions_per_step.iter().all(|&n| n == 5));
        }
    }

    #[test]
    fn zero_threshold_keeps_exact_zero_statistics() {
        // a window centered exactly at the mean gives T = 0
        let base = Baseline::known(1.0, 1.0).unwrap();
        let cfg = MonitorConfig::with_steps(1, 2, 2, 3, Regime::Distributed { c_local: 0.0 }, 10.0);
        let mut mons = vec![SensorMonitor::with_baseline(base, &[1.0, 1.0], 2)];
        let r = step(&mut mons, &cfg, &[1.0], 1).unwrap();
        assert_eq!(r.batch.entries, vec![(0, 0.0)]);
    }

    #[test]
    fn strict_inequality_at_thresholds() {
        let base = Baseline::known(0.0, 1.0).unwrap();
        // h = 1, k = 1: w = ρ(1) = 1, T = |x|
        let cfg = MonitorConfig::with_steps(1, 2, 1, 2, Regime::Distributed { c_local: 2.0 }, 2.0);
        let mut mons = vec![SensorMonitor::with_baseline(base, &[0.0, 0.0], 1)];
        let r = step(&mut mons, &cfg, &[2.0], 1).unwrap();
        assert!(r.batch.entries.is_empty());
        assert!(!r.alarmed);
        let cfg = MonitorConfig::with_steps(1, 2, 1, 2, Regime::Centralized, 2.0);
        let mut mons = vec![SensorMonitor::with_baseline(base, &[0.0, 0.0], 1)];
        let r = step(&mut mons, &cfg, &[2.0], 1).unwrap();
        assert_eq!(r.global_weighted, 2.0);
        assert!(!r.alarmed);
    }

    #[test]
    fn large_shift_alarms_within_window() {
        let (d, m, h) = (100, 200, 100);
        let mut data = noise_panel(d, m + 2000, 3);
        let tau = m + 50;
        for t in tau - 1..data.rows() {
            for x in data.row_mut(t) {
                *x += 100.0;
            }
        }
        let cfg = MonitorConfig::new(d, m, h, 10.0, Regime::Distributed { c_local: 3.44 }, 7.16);
        let out = run_monitor(&cfg, &data).unwrap();
        let alarm = out.alarm_time_abs().unwrap();
        assert!(alarm >= tau && alarm < tau + h, "alarm at {alarm}");
        assert_eq!(out.steps_executed(), out.stopped_at.unwrap());
    }

    #[test]
    fn huge_global_threshold_runs_to_horizon() {
        let cfg = MonitorConfig::new(4, 40, 20, 2.5, Regime::Distributed { c_local: 1.0 }, 1e300);
        let out = run_monitor(&cfg, &noise_panel(4, 140, 4)).unwrap();
        assert_eq!(out.stopped_at, None);
        assert_eq!(out.steps_executed(), 100);
        assert_eq!(out.alarm_time_abs(), None);
    }

    #[test]
    fn first_crossing_is_minimal() {
        let data = noise_panel(10, 400, 5);
        let mut cfg = MonitorConfig::with_steps(10, 100, 50, 300, Regime::Distributed { c_local: 1.0 }, f64::INFINITY);
        cfg.record_trace = true;
        let trace = run_monitor(&cfg, &data).unwrap().global_trace.unwrap();
        // threshold just below the overall maximum of the trace
        let peak = trace.iter().copied().fold(0.0, f64::max);
        cfg.c_global = peak * (1.0 - 1e-9);
        cfg.record_trace = false;
        let out = run_monitor(&cfg, &data).unwrap();
        let k = out.stopped_at.expect("the peak exceeds the threshold");
        assert_eq!(k, 1 + trace.iter().position(|&g| g > cfg.c_global).unwrap());
        if k == 1 {
            return;
        }
        cfg.t_tilde = (k - 1) as f64 / cfg.m as f64;
        let truncated = run_monitor(&cfg, &data).unwrap();
        assert_eq!(truncated.stopped_at, None);
        assert_eq!(truncated.steps_executed(), k - 1);
    }

    #[test]
    fn config_validation_names_keys() {
        let ok = MonitorConfig::new(2, 10, 5, 1.0, Regime::Centralized, 1.0);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.h = 11;
        assert_eq!(c.validate().unwrap_err().key, "h");
        let mut c = ok.clone();
        c.d = 0;
        assert_eq!(c.validate().unwrap_err().key, "d");
        let mut c = ok.clone();
        c.regime = Regime::Distributed { c_local: -1.0 };
        assert_eq!(c.validate().unwrap_err().key, "c_local");
        let mut c = ok;
        c.t_tilde = 0.0;
        assert_eq!(c.validate().unwrap_err().key, "t_tilde");
    }

    #[test]
    fn horizon_tolerates_representation_error() {
        let c = MonitorConfig::with_steps(1, 200, 100, 9800, Regime::Centralized, 1.0);
        assert_eq!(c.horizon(), 9800);
        let c = MonitorConfig::new(1, 3, 1, 0.5, Regime::Centralized, 1.0);
        assert_eq!(c.horizon(), 1);
    }

    #[test]
    fn degenerate_training_is_reported_with_stream() {
        let mut data = noise_panel(3, 30, 6);
        for t in 0..10 {
            data.set(t, 2, 1.0);
        }
        let cfg = MonitorConfig::with_steps(3, 10, 5, 20, Regime::Centralized, 1.0);
        match run_monitor(&cfg, &data) {
            Err(DetectError::Baseline { stream: 2, source: StatsError::DegenerateTraining }) => {}
            other => panic!("{other:?}"),
        }
    }
}
