//! Critical values for the local and global thresholds.
//!
//! Under the null the weighted local statistic converges to `ρ(t)·Z_i(t)` with
//!
//! ```text
//! Z_i(t) = |W_i(1/β + t) - W_i(1/β + t - 1) - β·W_i(1/β)|,   0 ≤ t ≤ T̃/β
//! ```
//!
//! for independent standard Brownian motions `W_i`. Critical values are upper
//! quantiles of the supremum over `t` of
//!
//! - `ρ(t)·sqrt(Σ_i Z_i(t)²)` (centralized),
//! - `ρ(t)·sqrt(Σ_i Z_i(t)²·1{ρ(t)Z_i(t) > c_local})` (distributed),
//! - `ρ(t)·Z_1(t)` (a single stream),
//!
//! estimated from Monte Carlo replications of the paths on a fine grid.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::detection::{run_monitor, DetectError, MonitorConfig};
use crate::rng::{replication_seed, standard_normal, substream, Domain};
use crate::simgen::{generate, Noise, Scenario};
use crate::stats::WeightFn;

/// Default number of Brownian increments per path.
pub const DEFAULT_INCREMENTS: usize = 10_000;
/// Default number of Monte Carlo replications.
pub const DEFAULT_REPS: usize = 5_000;
/// Smallest replication count accepted for a quantile.
pub const MIN_REPS: usize = 100;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("{key}: {reason}")]
    InvalidArgument { key: &'static str, reason: String },
    #[error("reps·alpha = {product} is below 10; the quantile would be unreliable")]
    InsufficientReps { product: f64 },
    #[error("replication {rep}: {source}")]
    Replication { rep: usize, source: DetectError },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> CalibrationError {
    CalibrationError::InvalidArgument { key, reason: reason.into() }
}

/// Discretisation of `[0, 1/β + T̃/β]` used to simulate the limit process.
///
/// One time unit (a full window) spans `steps_per_unit` increments so that
/// `W(1/β + t - 1)` falls on a grid node; `1/β` is rounded to the nearest node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitGrid {
    pub beta: f64,
    pub t_tilde: f64,
    pub steps_per_unit: usize,
    pub grid_step: f64,
    /// Monitoring grid points `t_g = g·grid_step`, `g = 0..n_points`.
    pub n_points: usize,
    /// Grid index of `1/β`.
    pub burn_in_points: usize,
}

impl LimitGrid {
    /// Grid with about `increments` increments over the full path.
    pub fn new(beta: f64, t_tilde: f64, increments: usize) -> Result<Self, CalibrationError> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid("beta", format!("must lie in (0, 1], got {beta}")));
        }
        if !(t_tilde.is_finite() && t_tilde > 0.0) {
            return Err(invalid("t_tilde", format!("must be finite and positive, got {t_tilde}")));
        }
        if increments < 2 {
            return Err(invalid("increments", "must be at least 2"));
        }
        let span = (1.0 + t_tilde) / beta;
        let steps_per_unit = ((increments as f64 / span).round() as usize).max(1);
        let s = steps_per_unit as f64;
        let burn_in_points = ((s / beta).round() as usize).max(steps_per_unit);
        let n_points = (s * t_tilde / beta).round() as usize + 1;
        Ok(Self { beta, t_tilde, steps_per_unit, grid_step: 1.0 / s, n_points, burn_in_points })
    }

    /// The default 10,000-increment grid.
    pub fn standard(beta: f64, t_tilde: f64) -> Result<Self, CalibrationError> {
        Self::new(beta, t_tilde, DEFAULT_INCREMENTS)
    }

    /// Number of Brownian increments per path.
    pub fn increments(&self) -> usize {
        self.burn_in_points + self.n_points - 1
    }

    pub fn t(&self, g: usize) -> f64 {
        g as f64 * self.grid_step
    }
}

/// Simulates one Brownian path `W(0) = 0, W(j·Δ)` for `j = 1..=increments`.
fn brownian_path(grid: &LimitGrid, seed: u64, rep: usize, stream: usize, path: &mut Vec<f64>) {
    let mut rng = substream(seed, Domain::Brownian, rep as u64, stream as u64);
    let sd = grid.grid_step.sqrt();
    path.clear();
    path.push(0.0);
    let mut w = 0.0;
    for _ in 0..grid.increments() {
        w += sd * standard_normal(&mut rng);
        path.push(w);
    }
}

#[inline]
fn z_at(grid: &LimitGrid, path: &[f64], g: usize) -> f64 {
    let b = grid.burn_in_points;
    (path[b + g] - path[b + g - grid.steps_per_unit] - grid.beta * path[b]).abs()
}

/// `Z_i(t_g)` for streams `0..d` of replication `rep`.
pub fn simulate_z_paths(d: usize, grid: &LimitGrid, seed: u64, rep: usize) -> Vec<Vec<f64>> {
    let mut path = Vec::new();
    (0..d)
        .map(|i| {
            brownian_path(grid, seed, rep, i, &mut path);
            (0..grid.n_points).map(|g| z_at(grid, &path, g)).collect()
        })
        .collect()
}

/// Supremum samples, one entry per replication, computed from shared paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SupSamples {
    pub centralized: Vec<f64>,
    /// Indexed like the `c_locals` passed to [`sup_samples`].
    pub distributed: Vec<Vec<f64>>,
}

struct Scratch {
    path: Vec<f64>,
    acc: Vec<Vec<f64>>,
}

/// Simulates `reps` replications and records the centralized supremum and,
/// on the same paths, the distributed supremum for every `c_local`.
/// Replications run in parallel; the result does not depend on scheduling.
pub fn sup_samples(
    d: usize,
    grid: &LimitGrid,
    wf: &WeightFn,
    c_locals: &[f64],
    reps: usize,
    seed: u64,
) -> SupSamples {
    let rho: Vec<f64> = (0..grid.n_points).map(|g| wf.rho(grid.t(g))).collect();
    let variants = c_locals.len() + 1;
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map_init(
            || Scratch { path: Vec::new(), acc: vec![vec![0.0; grid.n_points]; variants] },
            |scratch, rep| one_replication(d, grid, &rho, c_locals, seed, rep, scratch),
        )
        .collect();
    let mut out = SupSamples { centralized: Vec::with_capacity(reps), distributed: vec![Vec::with_capacity(reps); c_locals.len()] };
    for r in per_rep {
        out.centralized.push(r[0]);
        for (dst, v) in out.distributed.iter_mut().zip(&r[1..]) {
            dst.push(*v);
        }
    }
    out
}

fn one_replication(
    d: usize,
    grid: &LimitGrid,
    rho: &[f64],
    c_locals: &[f64],
    seed: u64,
    rep: usize,
    scratch: &mut Scratch,
) -> Vec<f64> {
    for a in &mut scratch.acc {
        a.fill(0.0);
    }
    let (central, filtered) = scratch.acc.split_first_mut().expect("at least one accumulator");
    for i in 0..d {
        brownian_path(grid, seed, rep, i, &mut scratch.path);
        let path = &scratch.path;
        for g in 0..grid.n_points {
            let z = z_at(grid, path, g);
            let z2 = z * z;
            central[g] += z2;
            let rz = rho[g] * z;
            for (acc, &c) in filtered.iter_mut().zip(c_locals) {
                // a zero threshold does not filter, as in the detector
                if c == 0.0 || rz > c {
                    acc[g] += z2;
                }
            }
        }
    }
    scratch
        .acc
        .iter()
        .map(|acc| acc.iter().zip(rho).map(|(s, r)| r * s.sqrt()).fold(0.0, f64::max))
        .collect()
}

/// Upper empirical quantile: the order statistic at 1-based rank
/// `⌈(1-α)·n⌉`, clamped to `[1, n]`.
pub fn upper_quantile(samples: &[f64], alpha: f64) -> f64 {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (((1.0 - alpha) * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

fn check_common(d: usize, alpha: f64, reps: usize) -> Result<(), CalibrationError> {
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if reps < MIN_REPS {
        return Err(invalid("reps", format!("must be at least {MIN_REPS}, got {reps}")));
    }
    Ok(())
}

/// Global threshold for the centralized regime.
pub fn critical_value_centralized(d: usize, alpha: f64, grid: &LimitGrid, reps: usize, seed: u64) -> Result<f64, CalibrationError> {
    check_common(d, alpha, reps)?;
    let s = sup_samples(d, grid, &WeightFn::LogWeight, &[], reps, seed);
    Ok(upper_quantile(&s.centralized, alpha))
}

/// Global threshold for the distributed regime with local threshold `c_local`.
pub fn critical_value_distributed(
    d: usize,
    alpha: f64,
    c_local: f64,
    grid: &LimitGrid,
    reps: usize,
    seed: u64,
) -> Result<f64, CalibrationError> {
    check_common(d, alpha, reps)?;
    if c_local.is_nan() || c_local < 0.0 {
        return Err(invalid("c_local", format!("must be non-negative, got {c_local}")));
    }
    let s = sup_samples(d, grid, &WeightFn::LogWeight, &[c_local], reps, seed);
    Ok(upper_quantile(&s.distributed[0], alpha))
}

/// Single-stream threshold.
pub fn critical_value_local(alpha: f64, grid: &LimitGrid, reps: usize, seed: u64) -> Result<f64, CalibrationError> {
    critical_value_centralized(1, alpha, grid, reps, seed)
}

/// One row of a critical-value table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalRow {
    pub alpha: f64,
    pub c_local: f64,
    pub c_global: f64,
    pub d: usize,
    pub beta: f64,
    #[serde(rename = "T_tilde")]
    pub t_tilde: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Critical values for every `(alpha, c_local)` pair from one set of paths.
/// `c_local = 0` rows are the centralized values.
pub fn critical_value_table(
    d: usize,
    alphas: &[f64],
    c_locals: &[f64],
    grid: &LimitGrid,
    reps: usize,
    seed: u64,
) -> Result<Vec<CriticalRow>, CalibrationError> {
    for &a in alphas {
        check_common(d, a, reps)?;
    }
    if let Some(&c) = c_locals.iter().find(|c| c.is_nan() || **c < 0.0) {
        return Err(invalid("c_local", format!("must be non-negative, got {c}")));
    }
    let s = sup_samples(d, grid, &WeightFn::LogWeight, c_locals, reps, seed);
    let mut rows = Vec::new();
    for &alpha in alphas {
        for (j, &c_local) in c_locals.iter().enumerate() {
            rows.push(CriticalRow {
                alpha,
                c_local,
                c_global: upper_quantile(&s.distributed[j], alpha),
                d,
                beta: grid.beta,
                t_tilde: grid.t_tilde,
                reps,
                seed,
            });
        }
    }
    Ok(rows)
}

pub fn write_critical_table<W: Write>(out: W, rows: &[CriticalRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Probability that a standard normal exceeds `x` in absolute value.
pub fn two_sided_tail(x: f64) -> f64 {
    libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Expected number of transmitting sensors per step, `d·P(ρ(t)|Z| > c_local)`
/// for standard normal `Z`.
pub fn expected_transmission_fraction(c_local: f64, t: f64, d: usize, wf: &WeightFn) -> f64 {
    expected_transmission_scaled(c_local, t, d, wf, 1.0)
}

/// As [`expected_transmission_fraction`] with `Z ~ N(0, sd²)`.
pub fn expected_transmission_scaled(c_local: f64, t: f64, d: usize, wf: &WeightFn, sd: f64) -> f64 {
    if c_local <= 0.0 {
        return d as f64;
    }
    d as f64 * two_sided_tail(c_local / (wf.rho(t) * sd))
}

/// Variance of `Z_i(t)` before the absolute value: `1 - β + 2βt` for
/// `t < 1` and `1 + β` afterwards.
pub fn limit_variance(t: f64, beta: f64) -> f64 {
    if t < 1.0 {
        1.0 - beta + 2.0 * beta * t
    } else {
        1.0 + beta
    }
}

/// Largest weighted global statistic of each null replication, running the
/// full finite-sample pipeline with the alarm disabled.
pub fn null_maxima(skeleton: &MonitorConfig, noise: Noise, reps: usize, seed: u64) -> Result<Vec<f64>, CalibrationError> {
    let mut cfg = skeleton.clone();
    cfg.c_global = f64::INFINITY;
    cfg.record_trace = false;
    cfg.validate().map_err(|e| CalibrationError::Replication { rep: 0, source: e.into() })?;
    let scenario = Scenario::null(cfg.d, cfg.m, cfg.m + cfg.horizon(), noise);
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let g = generate(&scenario, replication_seed(seed, rep as u64))
                .map_err(|e| invalid("noise", e.0))?;
            run_monitor(&cfg, &g.data)
                .map(|o| o.max_global_weighted)
                .map_err(|source| CalibrationError::Replication { rep, source })
        })
        .collect()
}

/// Smallest `c_global` whose empirical false-alarm fraction over `reps` null
/// runs is at most `alpha`, for the local threshold in `skeleton.regime`.
/// Returns `(c_local, c_global)`.
pub fn empirical_null_thresholds(
    skeleton: &MonitorConfig,
    noise: Noise,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64), CalibrationError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let product = reps as f64 * alpha;
    if product < 10.0 {
        return Err(CalibrationError::InsufficientReps { product });
    }
    let mut maxima = null_maxima(skeleton, noise, reps, seed)?;
    maxima.sort_by(f64::total_cmp);
    let allowed = (product + 1e-9).floor() as usize;
    Ok((skeleton.regime.c_local(), maxima[reps - allowed - 1]))
}
