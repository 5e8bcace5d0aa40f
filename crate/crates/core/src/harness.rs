//! Replicated experiments: detection delay, transmission cost, false alarms,
//! and the derived studies (threshold sweeps, bandwidth recovery, training
//! size, autocorrelated noise).
//!
//! Replication `r` of an experiment seeded with `seed` generates its panel
//! from `replication_seed(seed, r)`, so cells that share a seed see the same
//! noise (common random numbers) and results are independent of the number of
//! worker threads.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::calibration::{critical_value_table, empirical_null_thresholds, CalibrationError, LimitGrid};
use crate::detection::{run_monitor, DetectError, MonitorConfig, Regime, ScaleEstimator};
use crate::rng::replication_seed;
use crate::simgen::{generate, InvalidScenario, Noise, Scenario, Shift};
use crate::stats::{Kernel, LrvFallback};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("replication {rep}: {source}")]
    Detection { rep: usize, source: DetectError },
    #[error(transparent)]
    Scenario(#[from] InvalidScenario),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("{0}")]
    Mismatch(String),
    #[error("bandwidth search range [{h0}, {m}] is empty")]
    SearchRangeEmpty { h0: usize, m: usize },
}

/// What one replication produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    /// Absolute alarm time.
    pub alarm: Option<usize>,
    pub steps: usize,
    pub transmissions: u64,
    pub max_global_weighted: f64,
    /// Mean over streams of `(μ̂_i - μ_i)²`.
    pub sq_err_mean: f64,
    /// Mean over streams of `(σ̂_i - σ_i)²`.
    pub sq_err_scale: f64,
}

/// Aggregated metrics of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    /// Average detection delay `τ̂ - τ` over replications alarming at or
    /// after the change; NaN when there are none.
    pub add: f64,
    pub add_count: usize,
    /// Average messages per step, `Σ transmissions / (τ̂ - m + 1)` averaged
    /// over replications; `τ̂ = m + horizon` when no alarm fired.
    pub trans_avg: f64,
    pub fp_rate: f64,
    pub fp_count: usize,
    pub detect_rate: f64,
    pub reps: usize,
    pub mse_mean: f64,
    pub mse_sd: f64,
    pub mean_max_stat: f64,
    pub d: usize,
    pub m: usize,
    pub h: usize,
    pub horizon: usize,
    pub c_local: f64,
    pub c_global: f64,
    pub tau: Option<usize>,
}

impl ExperimentReport {
    /// Conditional delay, or the longest possible delay when nothing was
    /// detected after the change.
    pub fn add_or_max(&self) -> f64 {
        match self.tau {
            Some(tau) if self.add_count == 0 => (self.m + self.horizon).saturating_sub(tau) as f64,
            _ => self.add,
        }
    }
}

fn check_lengths(scenario: &Scenario, config: &MonitorConfig) -> Result<(), HarnessError> {
    config.validate().map_err(|e| HarnessError::Detection { rep: 0, source: e.into() })?;
    scenario.validate()?;
    if scenario.d != config.d {
        return Err(HarnessError::Mismatch(format!("scenario d = {} but config d = {}", scenario.d, config.d)));
    }
    if scenario.training_len != config.m {
        return Err(HarnessError::Mismatch(format!(
            "scenario training length {} but config m = {}",
            scenario.training_len, config.m
        )));
    }
    let needed = config.m + config.horizon();
    if scenario.total_length < needed {
        return Err(HarnessError::Mismatch(format!(
            "scenario length {} shorter than m + horizon = {needed}",
            scenario.total_length
        )));
    }
    Ok(())
}

/// Runs `reps` independent generate-then-monitor pipelines.
pub fn run_replications(
    scenario: &Scenario,
    config: &MonitorConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<RepOutcome>, HarnessError> {
    check_lengths(scenario, config)?;
    let true_sd = scenario.noise.marginal_sd();
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let g = generate(scenario, replication_seed(seed, rep as u64))?;
            let out = run_monitor(config, &g.data).map_err(|source| HarnessError::Detection { rep, source })?;
            let d = out.baselines.len() as f64;
            Ok(RepOutcome {
                alarm: out.alarm_time_abs(),
                steps: out.steps_executed(),
                transmissions: out.total_transmissions(),
                max_global_weighted: out.max_global_weighted,
                sq_err_mean: out.baselines.iter().map(|b| b.mean().powi(2)).sum::<f64>() / d,
                sq_err_scale: out.baselines.iter().map(|b| (b.scale() - true_sd).powi(2)).sum::<f64>() / d,
            })
        })
        .collect()
}

/// Aggregates replication outcomes. Under the null every alarm is a false
/// positive; under an alternative only alarms before `τ` are.
pub fn summarize(scenario: &Scenario, config: &MonitorConfig, outcomes: &[RepOutcome]) -> ExperimentReport {
    let reps = outcomes.len();
    let n = reps.max(1) as f64;
    let tau = scenario.changepoint();
    let horizon = config.horizon();
    let mut fp_count = 0;
    let mut detect_count = 0;
    let (mut delay_sum, mut add_count) = (0.0, 0);
    let mut trans = 0.0;
    for o in outcomes {
        match (o.alarm, tau) {
            (Some(_), None) => fp_count += 1,
            (Some(a), Some(t)) if a < t => fp_count += 1,
            (Some(a), Some(t)) => {
                detect_count += 1;
                delay_sum += (a - t) as f64;
                add_count += 1;
            }
            (None, _) => {}
        }
        let stop = o.alarm.unwrap_or(config.m + horizon);
        trans += o.transmissions as f64 / (stop - config.m + 1) as f64;
    }
    ExperimentReport {
        add: if add_count > 0 { delay_sum / add_count as f64 } else { f64::NAN },
        add_count,
        trans_avg: trans / n,
        fp_rate: fp_count as f64 / n,
        fp_count,
        detect_rate: detect_count as f64 / n,
        reps,
        mse_mean: outcomes.iter().map(|o| o.sq_err_mean).sum::<f64>() / n,
        mse_sd: outcomes.iter().map(|o| o.sq_err_scale).sum::<f64>() / n,
        mean_max_stat: outcomes.iter().map(|o| o.max_global_weighted).sum::<f64>() / n,
        d: config.d,
        m: config.m,
        h: config.h,
        horizon,
        c_local: config.regime.c_local(),
        c_global: config.c_global,
        tau,
    }
}

pub fn run_experiment(
    scenario: &Scenario,
    config: &MonitorConfig,
    reps: usize,
    seed: u64,
) -> Result<ExperimentReport, HarnessError> {
    if reps == 0 {
        return Err(HarnessError::Mismatch("reps must be at least 1".into()));
    }
    let outcomes = run_replications(scenario, config, reps, seed)?;
    Ok(summarize(scenario, config, &outcomes))
}

/// Source of global thresholds for studies that vary `c_local` or `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum GlobalThresholds {
    /// One `c_global` per requested local threshold, in the same order.
    Supplied(Vec<f64>),
    /// Monte Carlo critical values at level `alpha` from the limit process.
    Calibrated { alpha: f64, increments: usize, reps: usize, seed: u64 },
}

/// Limit-process critical values at level `alpha`, one per local threshold.
#[allow(clippy::too_many_arguments)]
pub fn calibrated_globals(
    d: usize,
    beta: f64,
    t_tilde: f64,
    c_locals: &[f64],
    alpha: f64,
    increments: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>, HarnessError> {
    let grid = LimitGrid::new(beta, t_tilde, increments)?;
    let rows = critical_value_table(d, &[alpha], c_locals, &grid, reps, seed)?;
    Ok(rows.into_iter().map(|r| r.c_global).collect())
}

fn resolve_globals(thresholds: &GlobalThresholds, config: &MonitorConfig, c_locals: &[f64]) -> Result<Vec<f64>, HarnessError> {
    match thresholds {
        GlobalThresholds::Supplied(v) => {
            if v.len() != c_locals.len() {
                return Err(HarnessError::Mismatch(format!(
                    "{} global thresholds for {} local thresholds",
                    v.len(),
                    c_locals.len()
                )));
            }
            Ok(v.clone())
        }
        &GlobalThresholds::Calibrated { alpha, increments, reps, seed } => {
            calibrated_globals(config.d, config.beta(), config.t_tilde, c_locals, alpha, increments, reps, seed)
        }
    }
}

/// Which shift family a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftFamily {
    Fixed,
    RandomGaussian,
}

impl ShiftFamily {
    pub fn shift(self, size: f64) -> Shift {
        match self {
            ShiftFamily::Fixed => Shift::Fixed(size),
            ShiftFamily::RandomGaussian => Shift::RandomGaussian(size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub c_local: f64,
    pub c_global: f64,
    pub family: ShiftFamily,
    /// `δ` or `η`.
    pub size: f64,
    pub add: f64,
    pub add_count: usize,
    pub trans_avg: f64,
    pub detect_rate: f64,
    pub fp_rate: f64,
}

/// One experiment per `(c_local, size)` cell. `base` supplies everything but
/// the shift; all cells share `seed`.
#[allow(clippy::too_many_arguments)]
pub fn threshold_sweep(
    base: &Scenario,
    family: ShiftFamily,
    sizes: &[f64],
    c_locals: &[f64],
    thresholds: &GlobalThresholds,
    config: &MonitorConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepRow>, HarnessError> {
    let globals = resolve_globals(thresholds, config, c_locals)?;
    let mut rows = Vec::with_capacity(c_locals.len() * sizes.len());
    for (&c_local, &c_global) in c_locals.iter().zip(&globals) {
        let mut cfg = config.clone();
        cfg.regime = Regime::Distributed { c_local };
        cfg.c_global = c_global;
        for &size in sizes {
            let scenario = Scenario { shift: family.shift(size), ..base.clone() };
            let r = run_experiment(&scenario, &cfg, reps, seed)?;
            rows.push(SweepRow {
                c_local,
                c_global,
                family,
                size,
                add: r.add,
                add_count: r.add_count,
                trans_avg: r.trans_avg,
                detect_rate: r.detect_rate,
                fp_rate: r.fp_rate,
            });
        }
    }
    Ok(rows)
}

/// Reference shift size for the bandwidth search.
#[derive(Debug, Clone, PartialEq)]
pub enum Delta0 {
    Value(f64),
    /// Midpoint of the narrowest interval of `grid` (ascending) over which the
    /// centralized delay falls from at least 80% to at most 20% of its largest
    /// value on the grid.
    Auto { grid: Vec<f64> },
}

/// Thresholds for the bandwidth search.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthThresholds {
    /// The same pair for every window length.
    Fixed { c_global_centralized: f64, c_global_distributed: f64 },
    /// Recalibrated from the limit process at each `β = h/m`.
    Calibrated { alpha: f64, increments: usize, reps: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthPoint {
    pub h: usize,
    pub c_global: f64,
    pub add: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthResult {
    pub h_star: usize,
    pub delta0: f64,
    /// Centralized delay at `(h0, δ0)`.
    pub add_reference: f64,
    pub add_at_h_star: f64,
    pub curve: Vec<BandwidthPoint>,
}

/// Finds the window length at which the distributed procedure's delay is
/// closest to the centralized delay at `h0`. `base` supplies the scenario
/// (its shift is replaced by `Fixed(δ0)`), `config` everything else.
#[allow(clippy::too_many_arguments)]
pub fn recover_bandwidth(
    base: &Scenario,
    delta0: &Delta0,
    h0: usize,
    c_local: f64,
    thresholds: &BandwidthThresholds,
    config: &MonitorConfig,
    stride: usize,
    reps: usize,
    seed: u64,
) -> Result<BandwidthResult, HarnessError> {
    if h0 == 0 || h0 > config.m {
        return Err(HarnessError::SearchRangeEmpty { h0, m: config.m });
    }
    let stride = stride.max(1);
    let globals_at = |h: usize, c_locals: &[f64]| -> Result<Vec<f64>, HarnessError> {
        match *thresholds {
            BandwidthThresholds::Fixed { c_global_centralized, c_global_distributed } => Ok(c_locals
                .iter()
                .map(|&c| if c == 0.0 { c_global_centralized } else { c_global_distributed })
                .collect()),
            BandwidthThresholds::Calibrated { alpha, increments, reps, seed } => calibrated_globals(
                config.d,
                h as f64 / config.m as f64,
                config.t_tilde,
                c_locals,
                alpha,
                increments,
                reps,
                seed,
            ),
        }
    };
    let central_at = |h: usize, c_global: f64| {
        let mut cfg = config.clone();
        cfg.h = h;
        cfg.regime = Regime::Centralized;
        cfg.c_global = c_global;
        cfg
    };

    let c_central = globals_at(h0, &[0.0])?[0];
    let reference_cfg = central_at(h0, c_central);
    let delta0 = match delta0 {
        Delta0::Value(v) => *v,
        Delta0::Auto { grid } => {
            let mut curve = Vec::with_capacity(grid.len());
            for &delta in grid {
                let s = Scenario { shift: Shift::Fixed(delta), ..base.clone() };
                curve.push((delta, run_experiment(&s, &reference_cfg, reps, seed)?.add_or_max()));
            }
            gray_area_midpoint(&curve)
                .ok_or_else(|| HarnessError::Mismatch("delay never falls from 80% to 20% of its maximum on the grid".into()))?
        }
    };
    let scenario = Scenario { shift: Shift::Fixed(delta0), ..base.clone() };
    let add_reference = run_experiment(&scenario, &reference_cfg, reps, seed)?.add_or_max();

    let mut hs: Vec<usize> = (h0..=config.m).step_by(stride).collect();
    if *hs.last().expect("h0 ≤ m") != config.m {
        hs.push(config.m);
    }
    let mut curve = Vec::with_capacity(hs.len());
    for h in hs {
        let c_global = globals_at(h, &[c_local])?[0];
        let mut cfg = central_at(h, c_global);
        cfg.regime = Regime::Distributed { c_local };
        let add = run_experiment(&scenario, &cfg, reps, seed)?.add_or_max();
        curve.push(BandwidthPoint { h, c_global, add, gap: (add - add_reference).abs() });
    }
    let best = curve
        .iter()
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
        .expect("non-empty search range");
    Ok(BandwidthResult {
        h_star: best.h,
        delta0,
        add_reference,
        add_at_h_star: best.add,
        curve: curve.clone(),
    })
}

/// Midpoint of the narrowest `[δ_a, δ_b]` with `D(δ_a) ≥ 0.8·max` and
/// `D(δ_b) ≤ 0.2·max`, `δ_a < δ_b`.
pub fn gray_area_midpoint(curve: &[(f64, f64)]) -> Option<f64> {
    let max = curve.iter().map(|&(_, d)| d).fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return None;
    }
    let mut best: Option<(f64, f64)> = None;
    for (i, &(a, da)) in curve.iter().enumerate() {
        if da < 0.8 * max {
            continue;
        }
        if let Some(&(b, _)) = curve[i + 1..].iter().find(|&&(_, db)| db <= 0.2 * max) {
            if best.is_none_or(|(x, y)| b - a < y - x) {
                best = Some((a, b));
            }
        }
    }
    best.map(|(a, b)| 0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingRow {
    pub m: usize,
    pub c_global: f64,
    pub empirical_size: f64,
    pub mse_mean: f64,
    pub mse_sd: f64,
}

/// Null experiments at several training lengths with the window fixed. Each
/// row uses the threshold calibrated (or supplied) for its `β = h/m` and a
/// monitoring period filling `total_length - m`.
#[allow(clippy::too_many_arguments)]
pub fn training_size_study(
    ms: &[usize],
    h: usize,
    d: usize,
    total_length: usize,
    c_local: f64,
    thresholds: &GlobalThresholds,
    reps: usize,
    seed: u64,
) -> Result<Vec<TrainingRow>, HarnessError> {
    if let GlobalThresholds::Supplied(v) = thresholds {
        if v.len() != ms.len() {
            return Err(HarnessError::Mismatch(format!("{} global thresholds for {} training sizes", v.len(), ms.len())));
        }
    }
    let mut rows = Vec::with_capacity(ms.len());
    for (j, &m) in ms.iter().enumerate() {
        if m < h || m >= total_length {
            return Err(HarnessError::Mismatch(format!("training size {m} must lie in [h = {h}, total_length)")));
        }
        let mut cfg = MonitorConfig::with_steps(d, m, h, total_length - m, Regime::Distributed { c_local }, 0.0);
        cfg.c_global = match thresholds {
            GlobalThresholds::Supplied(v) => v[j],
            GlobalThresholds::Calibrated { .. } => resolve_globals(thresholds, &cfg, &[c_local])?[0],
        };
        let scenario = Scenario::null(d, m, total_length, Noise::IidNormal);
        let r = run_experiment(&scenario, &cfg, reps, seed)?;
        rows.push(TrainingRow { m, c_global: cfg.c_global, empirical_size: r.fp_rate, mse_mean: r.mse_mean, mse_sd: r.mse_sd });
    }
    Ok(rows)
}

/// Handling of temporally dependent noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustMethod {
    /// Plain variance, thresholds calibrated for iid noise.
    NoAdjust,
    /// Plain variance, global threshold recalibrated under the AR(1) null.
    InflateThresholds,
    /// Long-run variance baseline, thresholds calibrated for iid noise.
    Lrv,
}

impl AdjustMethod {
    pub const ALL: [AdjustMethod; 3] = [AdjustMethod::NoAdjust, AdjustMethod::InflateThresholds, AdjustMethod::Lrv];
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrelationSpec {
    pub phis: Vec<f64>,
    pub methods: Vec<AdjustMethod>,
    /// `(p, δ)` cells.
    pub cells: Vec<(usize, f64)>,
    pub alpha: f64,
    /// Null replications used for each empirical calibration.
    pub calibration_reps: usize,
    pub kernel: Kernel,
    /// `None` uses `⌈m^{1/3}⌉`.
    pub bandwidth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocorrelationRow {
    pub phi: f64,
    pub p: usize,
    pub delta: f64,
    pub method: AdjustMethod,
    pub c_global: f64,
    pub fp_rate: f64,
    /// False positives per 1000 replications.
    pub fp_per_1000: f64,
    pub add: f64,
    pub add_count: usize,
    pub detect_rate: f64,
    pub trans_avg: f64,
}

/// Runs every `(φ, method, p, δ)` cell. `base` supplies `d`, `m`, `τ` and the
/// length; `config` supplies `h`, the weight and the local threshold.
///
/// Global thresholds are recalibrated by finite-sample null simulation over
/// the pre-change span (`τ - m - 1` monitoring steps), which is where false
/// alarms are counted: under iid noise for `NoAdjust` and `Lrv`, under the
/// AR(1) null for `InflateThresholds`.
pub fn autocorrelation_study(
    base: &Scenario,
    config: &MonitorConfig,
    spec: &AutocorrelationSpec,
    reps: usize,
    seed: u64,
) -> Result<Vec<AutocorrelationRow>, HarnessError> {
    let tau = base.tau;
    if tau <= config.m + 1 {
        return Err(HarnessError::Mismatch(format!("tau = {tau} leaves no pre-change monitoring span")));
    }
    let calib_seed = seed ^ 0x5eed_ca1b;
    let pre_change = MonitorConfig { t_tilde: (tau - config.m - 1) as f64 / config.m as f64, ..config.clone() };
    let (_, c_iid) = empirical_null_thresholds(&pre_change, Noise::IidNormal, spec.alpha, spec.calibration_reps, calib_seed)?;
    let lrv_scale = ScaleEstimator::LongRun { kernel: spec.kernel, bandwidth: spec.bandwidth, fallback: LrvFallback::PlainVariance };

    let mut rows = Vec::new();
    for &phi in &spec.phis {
        let noise = if phi == 0.0 { Noise::IidNormal } else { Noise::Ar1(phi) };
        let mut c_inflated = None;
        for &method in &spec.methods {
            let mut cfg = config.clone();
            cfg.c_global = match method {
                AdjustMethod::NoAdjust | AdjustMethod::Lrv => c_iid,
                AdjustMethod::InflateThresholds => match c_inflated {
                    Some(c) => c,
                    None => {
                        let c = empirical_null_thresholds(&pre_change, noise, spec.alpha, spec.calibration_reps, calib_seed)?.1;
                        c_inflated = Some(c);
                        c
                    }
                },
            };
            if method == AdjustMethod::Lrv {
                cfg.scale = lrv_scale;
            }
            for &(p, delta) in &spec.cells {
                let scenario = Scenario { p, shift: Shift::Fixed(delta), noise, ..base.clone() };
                let r = run_experiment(&scenario, &cfg, reps, seed)?;
                rows.push(AutocorrelationRow {
                    phi,
                    p,
                    delta,
                    method,
                    c_global: cfg.c_global,
                    fp_rate: r.fp_rate,
                    fp_per_1000: 1000.0 * r.fp_rate,
                    add: r.add,
                    add_count: r.add_count,
                    detect_rate: r.detect_rate,
                    trans_avg: r.trans_avg,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes any serializable rows as CSV with a header.
pub fn write_rows<W: std::io::Write, T: Serialize>(out: W, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::expected_transmission_fraction;
    use crate::stats::WeightFn;

    fn small(c_local: f64, c_global: f64) -> MonitorConfig {
        MonitorConfig::with_steps(20, 100, 50, 400, Regime::Distributed { c_local }, c_global)
    }

    #[test]
    fn conditional_delay_matches_raw_outcomes() {
        let cfg = small(1.0, 7.0);
        let s = Scenario::dense(20, 100, 500, 300, Shift::Fixed(0.4), Noise::IidNormal);
        let raw = run_replications(&s, &cfg, 60, 1).unwrap();
        let rep = summarize(&s, &cfg, &raw);
        let delays: Vec<f64> = raw.iter().filter_map(|o| o.alarm).filter(|&a| a >= 300).map(|a| (a - 300) as f64).collect();
        assert_eq!(rep.add_count, delays.len());
        assert!(rep.add_count > 30);
        assert!((rep.add - delays.iter().sum::<f64>() / delays.len() as f64).abs() < 1e-12);
        let fp = raw.iter().filter(|o| o.alarm.is_some_and(|a| a < 300)).count();
        assert_eq!(rep.fp_count, fp);
    }

    #[test]
    fn transmission_average_uses_stopping_denominator() {
        let cfg = small(2.0, f64::INFINITY);
        let s = Scenario::null(20, 100, 500, Noise::IidNormal);
        let raw = run_replications(&s, &cfg, 5, 2).unwrap();
        let rep = summarize(&s, &cfg, &raw);
        let want = raw.iter().map(|o| o.transmissions as f64 / 401.0).sum::<f64>() / 5.0;
        assert!((rep.trans_avg - want).abs() < 1e-12);
        assert_eq!(rep.fp_rate, 0.0);
        assert_eq!(rep.detect_rate, 0.0);
    }

    #[test]
    fn saturated_shift_is_always_detected_quickly() {
        let cfg = MonitorConfig::with_steps(20, 100, 50, 400, Regime::Distributed { c_local: 3.44 }, 7.16);
        let s = Scenario::dense(20, 100, 500, 200, Shift::Fixed(100.0), Noise::IidNormal);
        let r = run_experiment(&s, &cfg, 20, 3).unwrap();
        assert_eq!(r.detect_rate, 1.0);
        assert!(r.add < 50.0);
    }

    #[test]
    fn sweep_monotone_in_local_threshold() {
        let base = Scenario::dense(20, 100, 500, 200, Shift::Fixed(1.0), Noise::IidNormal);
        let cfg = small(0.0, 0.0);
        let c_locals = [0.0, 2.0, 3.0];
        let rows = threshold_sweep(
            &base,
            ShiftFamily::Fixed,
            &[1.0, 2.0],
            &c_locals,
            &GlobalThresholds::Supplied(vec![f64::INFINITY; 3]),
            &cfg,
            10,
            4,
        )
        .unwrap();
        assert_eq!(rows.len(), 6);
        assert!((rows[0].trans_avg - 20.0 * 400.0 / 401.0).abs() < 1e-12);
        for size in [1.0, 2.0] {
            let t: Vec<f64> = rows.iter().filter(|r| r.size == size).map(|r| r.trans_avg).collect();
            assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
        }
    }

    #[test]
    fn zero_local_threshold_row_equals_centralized_run() {
        let base = Scenario::dense(20, 100, 500, 200, Shift::Fixed(0.5), Noise::IidNormal);
        let cfg = small(0.0, 0.0);
        let rows = threshold_sweep(&base, ShiftFamily::Fixed, &[0.5], &[0.0], &GlobalThresholds::Supplied(vec![5.0]), &cfg, 15, 5).unwrap();
        let mut central = cfg.clone();
        central.regime = Regime::Centralized;
        central.c_global = 5.0;
        let r = run_experiment(&base, &central, 15, 5).unwrap();
        assert_eq!(rows[0].add.to_bits(), r.add.to_bits());
        assert_eq!(rows[0].trans_avg.to_bits(), r.trans_avg.to_bits());
        assert_eq!(rows[0].detect_rate, r.detect_rate);
    }

    #[test]
    fn transmissions_follow_normal_tail_for_small_beta() {
        // m ≫ h so the estimated mean barely inflates the window variance
        let (d, m, h, steps) = (50, 4000, 10, 15);
        let c_local = 2.0;
        let cfg = MonitorConfig::with_steps(d, m, h, steps, Regime::Distributed { c_local }, f64::INFINITY);
        let s = Scenario::null(d, m, m + steps, Noise::IidNormal);
        let raw = run_replications(&s, &cfg, 40, 6).unwrap();
        let observed: u64 = raw.iter().map(|o| o.transmissions).sum();
        let wf = WeightFn::LogWeight;
        let per_rep: f64 = (1..=steps).map(|k| expected_transmission_fraction(c_local, k as f64 / h as f64, d, &wf)).sum();
        let expected = per_rep * 40.0;
        assert!((observed as f64 / expected - 1.0).abs() < 0.15, "{observed} vs {expected}");
    }

    #[test]
    fn gray_area() {
        let curve = [(0.1, 100.0), (0.2, 95.0), (0.3, 85.0), (0.4, 40.0), (0.5, 15.0), (0.6, 5.0)];
        assert!((gray_area_midpoint(&curve).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(gray_area_midpoint(&[(0.1, 1.0), (0.2, 1.0)]), None);
    }

    #[test]
    fn bandwidth_zero_local_threshold_keeps_h0() {
        let base = Scenario::dense(10, 80, 400, 200, Shift::Fixed(0.5), Noise::IidNormal);
        let cfg = MonitorConfig::with_steps(10, 80, 20, 320, Regime::Centralized, 0.0);
        let th = BandwidthThresholds::Fixed { c_global_centralized: 6.0, c_global_distributed: 6.0 };
        let r = recover_bandwidth(&base, &Delta0::Value(0.5), 20, 0.0, &th, &cfg, 20, 10, 7).unwrap();
        assert_eq!(r.h_star, 20);
        assert_eq!(r.curve[0].gap, 0.0);
        assert!(matches!(
            recover_bandwidth(&base, &Delta0::Value(0.5), 81, 0.0, &th, &cfg, 20, 10, 7),
            Err(HarnessError::SearchRangeEmpty { h0: 81, m: 80 })
        ));
    }

    #[test]
    fn training_mse_shrinks_with_m() {
        let rows = training_size_study(
            &[40, 160],
            20,
            10,
            400,
            3.44,
            &GlobalThresholds::Supplied(vec![f64::INFINITY, f64::INFINITY]),
            60,
            8,
        )
        .unwrap();
        assert!(rows[1].mse_mean < rows[0].mse_mean);
        for r in &rows {
            assert!(r.mse_mean * r.m as f64 > 0.5 && r.mse_mean * (r.m as f64) < 2.0, "{r:?}");
            assert_eq!(r.empirical_size, 0.0);
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let cfg = small(1.0, 1.0);
        let s = Scenario::null(20, 100, 300, Noise::IidNormal);
        assert!(matches!(run_experiment(&s, &cfg, 2, 0), Err(HarnessError::Mismatch(_))));
        let s = Scenario::null(21, 100, 600, Noise::IidNormal);
        assert!(matches!(run_experiment(&s, &cfg, 2, 0), Err(HarnessError::Mismatch(_))));
    }
}
