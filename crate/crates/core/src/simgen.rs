//! Synthetic panels for the simulation studies.
//!
//! `X_{i,t} = δ_i·1{t ≥ τ} + ε_{i,t}` for `t = 1..T` (1-based), with iid
//! standard normal or stationary AR(1) errors. The affected streams are the
//! first `p` indices.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::Panel;
use crate::rng::{standard_normal, substream, Domain};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid scenario: {0}")]
pub struct InvalidScenario(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shift {
    None,
    /// Every affected stream shifts by `delta`.
    Fixed(f64),
    /// Each affected stream shifts by `eta·N(0,1)`, drawn once per panel.
    RandomGaussian(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Noise {
    IidNormal,
    /// `ε_t = φ·ε_{t-1} + v_t`, `v_t ~ N(0,1)`, started from the stationary law.
    Ar1(f64),
}

impl Noise {
    /// Stationary standard deviation of `ε`.
    pub fn marginal_sd(&self) -> f64 {
        match *self {
            Noise::IidNormal => 1.0,
            Noise::Ar1(phi) => 1.0 / (1.0 - phi * phi).sqrt(),
        }
    }

    /// Long-run variance `1/(1-φ)²` of the innovations-driven process.
    pub fn long_run_variance(&self) -> f64 {
        match *self {
            Noise::IidNormal => 1.0,
            Noise::Ar1(phi) => 1.0 / ((1.0 - phi) * (1.0 - phi)),
        }
    }
}

/// Data-generating scenario for one panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub d: usize,
    /// Number of affected streams.
    pub p: usize,
    /// Absolute changepoint time (1-based); the shift is active for `t ≥ tau`.
    pub tau: usize,
    pub shift: Shift,
    pub noise: Noise,
    /// Total length `T` including training.
    pub total_length: usize,
    /// Training length; an alternative must change strictly after it.
    pub training_len: usize,
}

impl Scenario {
    pub fn null(d: usize, training_len: usize, total_length: usize, noise: Noise) -> Self {
        Self { d, p: 0, tau: total_length + 1, shift: Shift::None, noise, total_length, training_len }
    }

    /// Dense (`p = d`) alternative.
    pub fn dense(d: usize, training_len: usize, total_length: usize, tau: usize, shift: Shift, noise: Noise) -> Self {
        Self { d, p: d, tau, shift, noise, total_length, training_len }
    }

    pub fn is_null(&self) -> bool {
        matches!(self.shift, Shift::None)
    }

    /// Changepoint, or `None` under the null.
    pub fn changepoint(&self) -> Option<usize> {
        (!self.is_null()).then_some(self.tau)
    }

    pub fn validate(&self) -> Result<(), InvalidScenario> {
        let bad = |s: String| Err(InvalidScenario(s));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.p > self.d {
            return bad(format!("p = {} exceeds d = {}", self.p, self.d));
        }
        if self.total_length == 0 {
            return bad("total_length must be positive".into());
        }
        if let Noise::Ar1(phi) = self.noise {
            if !(phi.abs() < 1.0) {
                return bad(format!("AR(1) coefficient must satisfy |phi| < 1, got {phi}"));
            }
        }
        match self.shift {
            Shift::None => {
                if self.p != 0 {
                    return bad("p must be 0 without a shift".into());
                }
            }
            Shift::Fixed(delta) | Shift::RandomGaussian(delta) => {
                if self.p == 0 {
                    return bad("an alternative needs p ≥ 1".into());
                }
                if !delta.is_finite() {
                    return bad(format!("shift size must be finite, got {delta}"));
                }
                if matches!(self.shift, Shift::RandomGaussian(_)) && delta < 0.0 {
                    return bad(format!("eta must be non-negative, got {delta}"));
                }
                if self.tau <= self.training_len {
                    return bad(format!(
                        "tau = {} must exceed the training length {}",
                        self.tau, self.training_len
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A generated panel and the realized shift vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub data: Panel,
    /// Realized `δ_i`; zero for unaffected streams.
    pub deltas: Vec<f64>,
    pub tau: Option<usize>,
}

/// Generates one panel. Stream `i` draws its noise from its own substream, so
/// the pre-change segment is bit-identical across scenarios sharing `seed`.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<Generated, InvalidScenario> {
    scenario.validate()?;
    let (d, len) = (scenario.d, scenario.total_length);
    let deltas = realized_shifts(scenario, seed);
    let mut data = Panel::zeros(d, len);
    for i in 0..d {
        let mut rng = substream(seed, Domain::Noise, 0, i as u64);
        fill_noise(&mut rng, scenario.noise, |t, e| data.set(t, i, e), len);
    }
    if !scenario.is_null() {
        let start = scenario.tau.saturating_sub(1);
        for t in start..len {
            for (x, &delta) in data.row_mut(t).iter_mut().zip(&deltas).take(scenario.p) {
                *x += delta;
            }
        }
    }
    Ok(Generated { data, deltas, tau: scenario.changepoint() })
}

fn realized_shifts(scenario: &Scenario, seed: u64) -> Vec<f64> {
    let mut deltas = vec![0.0; scenario.d];
    match scenario.shift {
        Shift::None => {}
        Shift::Fixed(delta) => deltas[..scenario.p].fill(delta),
        Shift::RandomGaussian(eta) => {
            let mut rng = substream(seed, Domain::Shift, 0, 0);
            for v in &mut deltas[..scenario.p] {
                *v = eta * standard_normal(&mut rng);
            }
        }
    }
    deltas
}

fn fill_noise<R: Rng, F: FnMut(usize, f64)>(rng: &mut R, noise: Noise, mut put: F, len: usize) {
    match noise {
        Noise::IidNormal => {
            for t in 0..len {
                put(t, standard_normal(rng));
            }
        }
        Noise::Ar1(phi) => {
            // first value from the stationary law N(0, 1/(1-φ²))
            let mut e = standard_normal(rng) / (1.0 - phi * phi).sqrt();
            put(0, e);
            for t in 1..len {
                e = phi * e + standard_normal(rng);
                put(t, e);
            }
        }
    }
}

/// Writes the realized shifts and changepoint as JSON.
pub fn write_sidecar<W: Write>(out: W, generated: &Generated) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Sidecar<'a> {
        tau: Option<usize>,
        deltas: &'a [f64],
    }
    serde_json::to_writer_pretty(out, &Sidecar { tau: generated.tau, deltas: &generated.deltas })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn null_mean_within_clt_bound() {
        for seed in 0..5 {
            let s = Scenario::null(20, 100, 2000, Noise::IidNormal);
            let g = generate(&s, seed).unwrap();
            let all: Vec<f64> = g.data.iter_rows().flatten().copied().collect();
            let bound = 4.0 / ((20 * 2000) as f64).sqrt();
            assert!(mean(&all).abs() < bound);
            assert!(g.deltas.iter().all(|&x| x == 0.0));
            assert_eq!(g.tau, None);
        }
    }

    #[test]
    fn ar1_with_zero_phi_is_iid() {
        let a = generate(&Scenario::null(3, 50, 500, Noise::IidNormal), 9).unwrap();
        let b = generate(&Scenario::null(3, 50, 500, Noise::Ar1(0.0)), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ar1_moments() {
        let g = generate(&Scenario::null(1, 10, 100_000, Noise::Ar1(0.5)), 10).unwrap();
        let x = g.data.column(0);
        let mu = mean(&x);
        let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / x.len() as f64;
        let cov1 = x.windows(2).map(|w| (w[0] - mu) * (w[1] - mu)).sum::<f64>() / (x.len() - 1) as f64;
        assert!((var - 4.0 / 3.0).abs() < 0.05, "{var}");
        assert!((cov1 / var - 0.5).abs() < 0.02, "{}", cov1 / var);
    }

    #[test]
    fn pre_change_segment_matches_null() {
        let null = generate(&Scenario::null(5, 100, 400, Noise::Ar1(0.3)), 4).unwrap();
        let alt = Scenario::dense(5, 100, 400, 250, Shift::RandomGaussian(2.0), Noise::Ar1(0.3));
        let g = generate(&alt, 4).unwrap();
        for t in 0..249 {
            assert_eq!(g.data.row(t), null.data.row(t));
        }
        for t in 249..400 {
            for i in 0..5 {
                assert_eq!(g.data.get(t, i), null.data.get(t, i) + g.deltas[i]);
            }
        }
    }

    #[test]
    fn zero_fixed_shift_equals_null() {
        let null = generate(&Scenario::null(4, 10, 100, Noise::IidNormal), 1).unwrap();
        let g = generate(&Scenario::dense(4, 10, 100, 50, Shift::Fixed(0.0), Noise::IidNormal), 1).unwrap();
        assert_eq!(g.data, null.data);
    }

    #[test]
    fn sparse_shift_hits_first_p_streams() {
        let s = Scenario { p: 2, ..Scenario::dense(5, 10, 40, 20, Shift::Fixed(3.0), Noise::IidNormal) };
        let g = generate(&s, 2).unwrap();
        assert_eq!(g.deltas, vec![3.0, 3.0, 0.0, 0.0, 0.0]);
        let r = Scenario { p: 3, ..Scenario::dense(5, 10, 40, 20, Shift::RandomGaussian(1.0), Noise::IidNormal) };
        let g = generate(&r, 2).unwrap();
        assert!(g.deltas[..3].iter().all(|&x| x != 0.0));
        assert!(g.deltas[3..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn invalid_scenarios() {
        let early = Scenario::dense(2, 100, 400, 100, Shift::Fixed(1.0), Noise::IidNormal);
        assert!(generate(&early, 0).is_err());
        let nonstationary = Scenario::null(2, 100, 400, Noise::Ar1(1.0));
        assert!(generate(&nonstationary, 0).is_err());
        let too_many = Scenario { p: 3, ..Scenario::dense(2, 10, 40, 20, Shift::Fixed(1.0), Noise::IidNormal) };
        assert!(too_many.validate().is_err());
    }

    #[test]
    fn reproducible() {
        let s = Scenario::dense(3, 10, 60, 30, Shift::RandomGaussian(1.0), Noise::Ar1(-0.4));
        assert_eq!(generate(&s, 77).unwrap(), generate(&s, 77).unwrap());
        assert_ne!(generate(&s, 77).unwrap().data, generate(&s, 78).unwrap().data);
    }
}
