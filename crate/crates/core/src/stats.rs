//! Numerical kernel: baseline estimation, HAC kernels, long-run variance, the
//! boundary weight function and the incremental local MOSUM window.
//!
//! The local statistic of stream `i` at monitoring time `k` is
//!
//! ```text
//! T_i(m,k,h) = |Σ_{t=m+k-h+1}^{m+k} (X_{i,t} - μ̂_i)| / σ̂_i
//! ```
//!
//! and is compared after scaling by `w(k,h) = ρ(k/h) / √h`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sum::{compensated_sum, CompensatedSum};

/// Pushes between exact recomputations of a window's running sum.
pub const REBUILD_INTERVAL: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("training sample of length {len} is too short (need at least 2)")]
    TooShort { len: usize },
    #[error("training sample contains a non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("training sample has zero variance")]
    DegenerateTraining,
    #[error("kernel long-run variance estimate {value} is not positive")]
    NonPositiveLrv { value: f64 },
    #[error("bandwidth {bandwidth} outside [1, {max}]")]
    InvalidBandwidth { bandwidth: usize, max: usize },
    #[error("scale must be finite and positive, got {0}")]
    NonPositiveScale(f64),
    #[error("window holds {have} of {need} observations")]
    WindowNotFull { have: usize, need: usize },
}

/// Lag-window kernel used to weight sample autocovariances.
///
/// All three variants are evaluated at `x = j / l` and vanish for `x ≥ 1`:
///
/// - `Truncated`: `K(x) = 1` for `|x| < 1`.
/// - `Bartlett`: `K(x) = 1 - |x|` for `|x| < 1`.
/// - `Parzen`: `1 - 6x² + 6|x|³` for `|x| ≤ 1/2`, `2(1 - |x|)³` for `1/2 < |x| ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Truncated,
    Bartlett,
    Parzen,
}

impl Kernel {
    /// `K(x)` for real `x`; symmetric.
    pub fn eval(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Kernel::Truncated => {
                if a < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Bartlett => {
                if a < 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
            Kernel::Parzen => {
                if a <= 0.5 {
                    1.0 - 6.0 * a * a + 6.0 * a * a * a
                } else if a <= 1.0 {
                    2.0 * (1.0 - a).powi(3)
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "truncated" => Ok(Kernel::Truncated),
            "bartlett" => Ok(Kernel::Bartlett),
            "parzen" => Ok(Kernel::Parzen),
            other => Err(format!("unknown kernel {other:?} (expected truncated, bartlett or parzen)")),
        }
    }
}

/// `K(j / l)`.
pub fn kernel_weight(kernel: Kernel, j: usize, l: usize) -> f64 {
    debug_assert!(l >= 1);
    if kernel == Kernel::Bartlett {
        // exact closed form on the integer lattice
        return if j < l { 1.0 - j as f64 / l as f64 } else { 0.0 };
    }
    kernel.eval(j as f64 / l as f64)
}

/// How the scale of a baseline was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScaleKind {
    Plain,
    LongRun { kernel: Kernel, bandwidth: usize },
    /// A long-run estimate was requested but came out non-positive; the plain
    /// variance was used instead.
    LongRunFallback { kernel: Kernel, bandwidth: usize },
}

/// Frozen pre-change mean and noise scale of one stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    mean: f64,
    scale: f64,
    kind: ScaleKind,
}

impl Baseline {
    pub fn new(mean: f64, scale: f64, kind: ScaleKind) -> Result<Self, StatsError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(StatsError::NonPositiveScale(scale));
        }
        Ok(Self { mean, scale, kind })
    }

    /// Known-parameter baseline (e.g. mean 0, scale 1).
    pub fn known(mean: f64, scale: f64) -> Result<Self, StatsError> {
        Self::new(mean, scale, ScaleKind::Plain)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn kind(&self) -> ScaleKind {
        self.kind
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self.kind, ScaleKind::LongRunFallback { .. })
    }
}

fn check_history(history: &[f64]) -> Result<(), StatsError> {
    if history.len() < 2 {
        return Err(StatsError::TooShort { len: history.len() });
    }
    if let Some(index) = history.iter().position(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite { index });
    }
    Ok(())
}

fn mean_and_variance(history: &[f64]) -> (f64, f64) {
    let m = history.len() as f64;
    let mean = compensated_sum(history.iter().copied()) / m;
    let var = compensated_sum(history.iter().map(|x| (x - mean) * (x - mean))) / m;
    (mean, var)
}

/// Sample mean and population-divisor variance of the training sample.
pub fn estimate_baseline(history: &[f64]) -> Result<Baseline, StatsError> {
    check_history(history)?;
    let (mean, var) = mean_and_variance(history);
    if var <= 0.0 {
        return Err(StatsError::DegenerateTraining);
    }
    Baseline::new(mean, var.sqrt(), ScaleKind::Plain)
}

/// Default lag truncation `⌈m^{1/3}⌉`, clamped to `[1, m-1]`.
pub fn default_bandwidth(m: usize) -> usize {
    let l = (m as f64).cbrt().ceil() as usize;
    // guard against cbrt rounding just above an integer cube
    let l = if l > 1 && (l - 1).pow(3) >= m { l - 1 } else { l };
    l.clamp(1, m.saturating_sub(1).max(1))
}

/// Kernel-weighted long-run variance estimate. The returned baseline carries
/// `scale = sqrt(LRV)`.
///
/// Autocovariances use the `1/(m-j)` divisor and the lag-zero term the
/// population divisor `1/m`.
pub fn estimate_lrv(history: &[f64], kernel: Kernel, bandwidth: usize) -> Result<Baseline, StatsError> {
    check_history(history)?;
    let m = history.len();
    if bandwidth == 0 || bandwidth > m - 1 {
        return Err(StatsError::InvalidBandwidth { bandwidth, max: m - 1 });
    }
    let (mean, var) = mean_and_variance(history);
    if var <= 0.0 {
        return Err(StatsError::DegenerateTraining);
    }
    let centered: Vec<f64> = history.iter().map(|x| x - mean).collect();
    let mut lrv = CompensatedSum::default();
    lrv.add(var);
    for j in 1..m {
        let k = kernel_weight(kernel, j, bandwidth);
        if k == 0.0 {
            if j >= bandwidth {
                break;
            }
            continue;
        }
        let gamma = compensated_sum(centered[..m - j].iter().zip(&centered[j..]).map(|(a, b)| a * b))
            / (m - j) as f64;
        lrv.add(2.0 * k * gamma);
    }
    let value = lrv.value();
    if !(value > 0.0) {
        return Err(StatsError::NonPositiveLrv { value });
    }
    Baseline::new(mean, value.sqrt(), ScaleKind::LongRun { kernel, bandwidth })
}

/// What to do when [`estimate_lrv`] yields a non-positive value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrvFallback {
    /// Surface [`StatsError::NonPositiveLrv`].
    #[default]
    Error,
    /// Use the plain variance and mark the baseline as a fallback.
    PlainVariance,
}

pub fn estimate_lrv_with_fallback(
    history: &[f64],
    kernel: Kernel,
    bandwidth: usize,
    policy: LrvFallback,
) -> Result<Baseline, StatsError> {
    match estimate_lrv(history, kernel, bandwidth) {
        Err(StatsError::NonPositiveLrv { .. }) if policy == LrvFallback::PlainVariance => {
            let plain = estimate_baseline(history)?;
            Baseline::new(plain.mean, plain.scale, ScaleKind::LongRunFallback { kernel, bandwidth })
        }
        other => other,
    }
}

/// Boundary function `ρ` of the weight `w(k,h) = ρ(k/h)/√h`.
#[derive(Clone, Default)]
pub enum WeightFn {
    /// `ρ(t) = max(1, log(1+t))^{-1/2}`.
    #[default]
    LogWeight,
    /// User-supplied `ρ`; must be continuous with a positive infimum on the
    /// monitoring range.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl WeightFn {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        WeightFn::Custom(Arc::new(f))
    }

    #[inline]
    pub fn rho(&self, t: f64) -> f64 {
        match self {
            WeightFn::LogWeight => 1.0 / (1.0f64).max((1.0 + t).ln()).sqrt(),
            WeightFn::Custom(f) => f(t),
        }
    }
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFn::LogWeight => f.write_str("LogWeight"),
            WeightFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// `w(k,h) = ρ(k/h)/√h`.
#[inline]
pub fn weight(wf: &WeightFn, k: usize, h: usize) -> f64 {
    wf.rho(k as f64 / h as f64) / (h as f64).sqrt()
}

/// Ring buffer over the last `h` centered observations with an O(1) running
/// sum. The sum is recomputed exactly every [`REBUILD_INTERVAL`] pushes.
#[derive(Debug, Clone)]
pub struct LocalWindow {
    buf: Vec<f64>,
    head: usize,
    len: usize,
    running_sum: f64,
    since_rebuild: usize,
}

impl LocalWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be positive");
        Self { buf: vec![0.0; capacity], head: 0, len: 0, running_sum: 0.0, since_rebuild: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.buf.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.buf.len()
    }

    /// Appends an already-centered value, evicting the oldest when full.
    #[inline]
    pub fn push(&mut self, centered: f64) {
        let h = self.buf.len();
        if self.len == h {
            self.running_sum += centered - self.buf[self.head];
        } else {
            self.running_sum += centered;
            self.len += 1;
        }
        self.buf[self.head] = centered;
        self.head += 1;
        if self.head == h {
            self.head = 0;
        }
        self.since_rebuild += 1;
        if self.since_rebuild >= REBUILD_INTERVAL {
            self.rebuild();
        }
    }

    fn rebuild(&mut self) {
        self.running_sum = compensated_sum(self.contents());
        self.since_rebuild = 0;
    }

    /// Window contents, oldest first.
    pub fn contents(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.buf.len();
        let start = (self.head + h - self.len) % h;
        (0..self.len).map(move |i| self.buf[(start + i) % h])
    }

    pub fn sum(&self) -> f64 {
        self.running_sum
    }
}

/// `|Σ window| / σ̂`; requires a full window.
pub fn local_statistic(win: &LocalWindow, baseline: &Baseline) -> Result<f64, StatsError> {
    if !win.is_full() {
        return Err(StatsError::WindowNotFull { have: win.len(), need: win.capacity() });
    }
    Ok(win.sum().abs() / baseline.scale)
}
