use dmosum::calibration::empirical_null_thresholds;
use dmosum::harness::{run_experiment, run_replications, summarize, threshold_sweep, GlobalThresholds, ShiftFamily};
use dmosum::{MonitorConfig, Noise, Regime, Scenario, Shift};

const D: usize = 20;
const M: usize = 100;
const H: usize = 50;
const STEPS: usize = 400;

fn config(c_local: f64, c_global: f64) -> MonitorConfig {
    MonitorConfig::with_steps(D, M, H, STEPS, Regime::Distributed { c_local }, c_global)
}

#[test]
fn delay_non_increasing_in_shift() {
    let base = Scenario::dense(D, M, M + STEPS, 250, Shift::Fixed(0.0), Noise::IidNormal);
    let cfg = config(2.0, 6.0);
    let grid = [0.25, 0.5, 1.0, 2.0];
    let rows = threshold_sweep(&base, ShiftFamily::Fixed, &grid, &[2.0], &GlobalThresholds::Supplied(vec![6.0]), &cfg, 200, 21).unwrap();
    let adds: Vec<f64> = rows.iter().map(|r| r.add).collect();
    assert!(adds.windows(2).all(|w| w[1] <= w[0]), "{adds:?}");
}

#[test]
fn false_alarms_within_binomial_band() {
    let cfg = config(2.0, 0.0);
    let alpha = 0.1;
    let (_, c_global) = empirical_null_thresholds(&cfg, Noise::IidNormal, alpha, 1000, 31).unwrap();
    let cfg = config(2.0, c_global);
    let reps = 600;
    let r = run_experiment(&Scenario::null(D, M, M + STEPS, Noise::IidNormal), &cfg, reps, 32).unwrap();
    let band = 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
    assert!((r.fp_rate - alpha).abs() <= band, "fp {} vs {alpha} ± {band}", r.fp_rate);
}

#[test]
fn max_statistic_grows_with_training_and_window() {
    let mut means = Vec::new();
    for scale in [1, 2, 4] {
        let (m, h) = (50 * scale, 25 * scale);
        let cfg = MonitorConfig::with_steps(D, m, h, 4 * m, Regime::Distributed { c_local: 2.0 }, f64::INFINITY);
        let s = Scenario::dense(D, m, 5 * m, m + m / 2, Shift::Fixed(0.5), Noise::IidNormal);
        means.push(run_experiment(&s, &cfg, 40, 41).unwrap().mean_max_stat);
    }
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let s = Scenario::dense(D, M, M + STEPS, 200, Shift::RandomGaussian(0.7), Noise::Ar1(0.2));
    let cfg = config(1.5, 5.0);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_replications(&s, &cfg, 30, 51).unwrap());
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run_replications(&s, &cfg, 30, 51).unwrap());
    assert_eq!(one, three);
    assert_eq!(format!("{:?}", summarize(&s, &cfg, &one)), format!("{:?}", summarize(&s, &cfg, &three)));
}
