use std::fs::File;
use std::io::BufReader;

use clap::ValueEnum;
use dmosum::calibration::{critical_value_table, write_critical_table, CalibrationError, LimitGrid, DEFAULT_INCREMENTS, DEFAULT_REPS};
use dmosum::detection::{stream_monitor_csv, DetectError};
use dmosum::harness::{
    autocorrelation_study, calibrated_globals, recover_bandwidth, run_experiment, threshold_sweep, training_size_study,
    AdjustMethod, AutocorrelationSpec, BandwidthThresholds, Delta0, GlobalThresholds, HarnessError, ShiftFamily,
};
use dmosum::panel::CsvFormat;
use dmosum::simgen::{generate as generate_panel, write_sidecar, Noise, Scenario, Shift};
use dmosum::stats::{Kernel, LrvFallback};
use dmosum::{MonitorConfig, Regime, ScaleEstimator};

use crate::config::{key, opt_key, single, KernelKind, MethodKind, NoiseKind, ReportFormat, Resolver, ScaleKind, ShiftKind};
use crate::CliError;

const SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Empirical size of the global test under the null
    Size,
    /// Delay and transmission cost across local thresholds and shift sizes
    Sweep,
    /// Window length at which the distributed delay matches the centralized one
    Bandwidth,
    /// Training-length study
    Training,
    /// AR(1) noise with and without adjustment
    Ar1,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::Size => "size",
            Experiment::Sweep => "sweep",
            Experiment::Bandwidth => "bandwidth",
            Experiment::Training => "training",
            Experiment::Ar1 => "ar1",
        }
    }
}

fn calib_err(e: CalibrationError) -> CliError {
    match e {
        CalibrationError::Replication { rep, source } => prefix(rep, detect_err(source)),
        other => CliError::Config(other.to_string()),
    }
}

fn detect_err(e: DetectError) -> CliError {
    match e {
        DetectError::Config(c) => CliError::Config(c.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn harness_err(e: HarnessError) -> CliError {
    match e {
        HarnessError::Detection { rep, source } => prefix(rep, detect_err(source)),
        HarnessError::Calibration(c) => calib_err(c),
        HarnessError::SearchRangeEmpty { .. } => CliError::Config(format!("h0: {e}")),
        other => CliError::Config(other.to_string()),
    }
}

fn prefix(rep: usize, e: CliError) -> CliError {
    match e {
        CliError::Data(s) => CliError::Data(format!("replication {rep}: {s}")),
        other => other,
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Wide or tidy long-format table.
struct Table {
    ids: Vec<&'static str>,
    metrics: Vec<&'static str>,
    rows: Vec<(Vec<String>, Vec<f64>)>,
}

impl Table {
    fn new(ids: &[&'static str], metrics: &[&'static str]) -> Self {
        Self { ids: ids.to_vec(), metrics: metrics.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, ids: Vec<String>, metrics: Vec<f64>) {
        debug_assert_eq!(ids.len(), self.ids.len());
        debug_assert_eq!(metrics.len(), self.metrics.len());
        self.rows.push((ids, metrics));
    }

    fn render(&self, long: bool) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if long {
            let mut header = self.ids.clone();
            header.extend(["metric", "value"]);
            w.write_record(&header).map_err(csv_err)?;
            for (ids, values) in &self.rows {
                for (name, v) in self.metrics.iter().zip(values) {
                    let mut rec = ids.clone();
                    rec.push(name.to_string());
                    rec.push(v.to_string());
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
        } else {
            let mut header = self.ids.clone();
            header.extend(&self.metrics);
            w.write_record(&header).map_err(csv_err)?;
            for (ids, values) in &self.rows {
                let mut rec = ids.clone();
                rec.extend(values.iter().map(|v| v.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn calibrate(r: &mut Resolver) -> Result<Vec<u8>, CliError> {
    let d = key!(r, d, 100usize, "critical-value tables use 100 streams");
    let beta = key!(r, beta, 0.5, "limit process with beta = 1/2");
    let t_tilde = key!(r, t_tilde, 10.0, "limit process with T~ = 10");
    let increments = key!(r, increments, DEFAULT_INCREMENTS, "ten thousand Brownian increments");
    let reps = key!(r, reps, DEFAULT_REPS, "five thousand replications");
    let seed = key!(r, seed, SEED, "fixed seed");
    let alphas = key!(r, alpha, vec![0.10, 0.05, 0.01], "critical-value table levels");
    let c_locals = key!(r, c_local, vec![0.0, 3.15, 3.44, 4.05], "critical-value table local thresholds");
    let grid = LimitGrid::new(beta, t_tilde, increments).map_err(calib_err)?;
    let rows = critical_value_table(d, &alphas, &c_locals, &grid, reps, seed).map_err(calib_err)?;
    let mut buf = Vec::new();
    write_critical_table(&mut buf, &rows).map_err(csv_err)?;
    Ok(buf)
}

fn shift_of(kind: ShiftKind, size: f64) -> Shift {
    match kind {
        ShiftKind::None => Shift::None,
        ShiftKind::Fixed => Shift::Fixed(size),
        ShiftKind::Random => Shift::RandomGaussian(size),
    }
}

fn noise_of(r: &mut Resolver) -> Result<Noise, CliError> {
    Ok(match key!(r, noise, NoiseKind::Iid, "iid standard normal noise") {
        NoiseKind::Iid => Noise::IidNormal,
        NoiseKind::Ar1 => Noise::Ar1(single("phi", &key!(r, phi, vec![0.25], "mild autocorrelation"))?),
    })
}

pub fn generate(r: &mut Resolver) -> Result<Vec<u8>, CliError> {
    let d = key!(r, d, 100usize, "simulation studies use 100 streams");
    let m = key!(r, m, 200usize, "simulation studies train on 200 observations");
    let total_length = key!(r, total_length, 10_000usize, "simulation studies run to T = 10000");
    let shift = key!(r, shift, ShiftKind::None, "no change");
    let noise = noise_of(r)?;
    let seed = key!(r, seed, SEED, "fixed seed");
    let scenario = if shift == ShiftKind::None {
        Scenario::null(d, m, total_length, noise)
    } else {
        let tau = key!(r, tau, 5000usize, "change at t = 5000");
        let size = single("delta", &key!(r, delta, vec![1.0], "unit shift"))?;
        let p = single("p", &key!(r, p, vec![d], "every stream affected"))?;
        Scenario { p, ..Scenario::dense(d, m, total_length, tau, shift_of(shift, size), noise) }
    };
    let g = generate_panel(&scenario, seed).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(path) = opt_key!(r, sidecar) {
        let f = File::create(&path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
        write_sidecar(f, &g).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    }
    let mut buf = Vec::new();
    g.data.write_csv(&mut buf, b',').map_err(|e| CliError::Io(e.to_string()))?;
    Ok(buf)
}

fn kernel_of(k: KernelKind) -> Kernel {
    match k {
        KernelKind::Truncated => Kernel::Truncated,
        KernelKind::Bartlett => Kernel::Bartlett,
        KernelKind::Parzen => Kernel::Parzen,
    }
}

/// Number of fields in the first data row.
fn infer_width(path: &str, header: bool) -> Result<usize, CliError> {
    let f = File::open(path).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(header).flexible(true).from_reader(BufReader::new(f));
    let mut rec = csv::StringRecord::new();
    match rdr.read_record(&mut rec) {
        Ok(true) => Ok(rec.len()),
        Ok(false) => Err(CliError::Data(format!("{path}: no data rows"))),
        Err(e) => Err(CliError::Data(format!("{path}: row 1: {e}"))),
    }
}

fn monitoring_period(r: &mut Resolver, m: usize, default_t_tilde: f64, why: &'static str) -> f64 {
    match opt_key!(r, steps) {
        Some(steps) => steps as f64 / m as f64,
        None => key!(r, t_tilde, default_t_tilde, why),
    }
}

pub fn detect(r: &mut Resolver) -> Result<Vec<u8>, CliError> {
    let path = opt_key!(r, data).ok_or_else(|| CliError::Config("data: path to the CSV panel is required".into()))?;
    let header = key!(r, header, false, "headerless CSV");
    let d = match opt_key!(r, d) {
        Some(d) => d,
        None => {
            let d = infer_width(&path, header)?;
            r.derived("d", &d, "inferred from the first data row");
            d
        }
    };
    let m = key!(r, m, 200usize, "training length of the empirical-size study");
    let h = key!(r, h, 100usize, "window h = m/2");
    let t_tilde = monitoring_period(r, m, 10.0, "monitoring period T~ = 10");
    let c_local = single("c_local", &key!(r, c_local, vec![3.44], "local threshold 3.44"))?;
    let c_global = single("c_global", &key!(r, c_global, vec![7.16], "global threshold at alpha = 0.05 for c_local = 3.44"))?;
    let mut cfg = MonitorConfig::new(d, m, h, t_tilde, Regime::Distributed { c_local }, c_global);
    if key!(r, scale, ScaleKind::Plain, "sample standard deviation") == ScaleKind::Lrv {
        let kernel = kernel_of(key!(r, kernel, KernelKind::Bartlett, "Bartlett kernel"));
        let bandwidth = opt_key!(r, bandwidth);
        cfg.scale = ScaleEstimator::LongRun { kernel, bandwidth, fallback: LrvFallback::Error };
    }
    let format = key!(r, format, ReportFormat::Csv, "key,value CSV");
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let f = File::open(&path).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
    let csv_format = CsvFormat { delimiter: b',', has_header: header, width: Some(d) };
    let outcome = stream_monitor_csv(&cfg, BufReader::new(f), csv_format).map_err(detect_err)?;
    let report = outcome.report();
    Ok(match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => report.to_json() + "\n",
    }
    .into_bytes())
}

pub fn experiment(name: Experiment, r: &mut Resolver) -> Result<Vec<u8>, CliError> {
    let table = match name {
        Experiment::Size => size(r)?,
        Experiment::Sweep => sweep(r)?,
        Experiment::Bandwidth => bandwidth(r)?,
        Experiment::Training => training(r)?,
        Experiment::Ar1 => ar1(r)?,
    };
    let long = key!(r, plot_data, false, "wide table");
    table.render(long)
}

fn given<T>(flag: &Option<T>, file: &Option<T>) -> bool {
    flag.is_some() || file.is_some()
}

struct Calib {
    alpha: f64,
    increments: usize,
    reps: usize,
    seed: u64,
}

fn calibration_keys(r: &mut Resolver, default_reps: usize, seed: u64) -> Result<Calib, CliError> {
    let alpha = single("alpha", &key!(r, alpha, vec![0.05], "type-I error 0.05"))?;
    let increments = key!(r, increments, DEFAULT_INCREMENTS, "ten thousand Brownian increments");
    let reps = key!(r, calibration_reps, default_reps, "calibration replications");
    Ok(Calib { alpha, increments, reps, seed: seed ^ 0xca1b })
}

fn size(r: &mut Resolver) -> Result<Table, CliError> {
    let d = key!(r, d, 100usize, "empirical-size study uses 100 streams");
    let m = key!(r, m, 200usize, "empirical-size study with m = 200");
    let h = key!(r, h, 100usize, "window h = m/2");
    let t_tilde = monitoring_period(r, m, 10.0, "monitoring period T~ = 10");
    let reps = key!(r, reps, 1000usize, "one thousand replications");
    let seed = key!(r, seed, SEED, "fixed seed");
    let local_given = given(&r.flags().c_local, &r.file().c_local);
    let c_locals = key!(r, c_local, vec![3.15, 3.44, 4.05, 0.0], "empirical-size study threshold rows");
    let c_globals = if local_given {
        opt_key!(r, c_global)
    } else {
        Some(key!(r, c_global, vec![7.89, 7.16, 6.02, 14.4], "critical values at alpha = 0.05 for the threshold rows"))
    };
    let c_globals = match c_globals {
        Some(v) if v.len() == c_locals.len() => v,
        Some(v) => return Err(CliError::Config(format!("c_global: {} values for {} c_local values", v.len(), c_locals.len()))),
        None => {
            let c = calibration_keys(r, DEFAULT_REPS, seed)?;
            calibrated_globals(d, h as f64 / m as f64, t_tilde, &c_locals, c.alpha, c.increments, c.reps, c.seed)
                .map_err(harness_err)?
        }
    };
    let mut table = Table::new(&["regime", "c_local", "c_global"], &["fp_count", "fp_rate", "trans_avg"]);
    for (&c_local, &c_global) in c_locals.iter().zip(&c_globals) {
        let cfg = MonitorConfig::new(d, m, h, t_tilde, Regime::Distributed { c_local }, c_global);
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let scenario = Scenario::null(d, m, m + cfg.horizon(), Noise::IidNormal);
        let rep = run_experiment(&scenario, &cfg, reps, seed).map_err(harness_err)?;
        let regime = if c_local == 0.0 { "centralized" } else { "distributed" };
        table.push(
            vec![regime.into(), c_local.to_string(), c_global.to_string()],
            vec![rep.fp_count as f64, rep.fp_rate, rep.trans_avg],
        );
    }
    Ok(table)
}

/// Shared monitoring setup of the alternative-hypothesis studies.
struct Setup {
    d: usize,
    m: usize,
    h: usize,
    total_length: usize,
    tau: usize,
}

impl Setup {
    fn resolve(r: &mut Resolver, total: usize, tau: usize, h: usize) -> Self {
        let d = key!(r, d, 100usize, "simulation studies use 100 streams");
        let m = key!(r, m, 200usize, "simulation studies train on 200 observations");
        let h = key!(r, h, h, "study window length");
        let total_length = key!(r, total_length, total, "study series length");
        let tau = key!(r, tau, tau, "study changepoint");
        Self { d, m, h, total_length, tau }
    }

    fn config(&self, regime: Regime, c_global: f64) -> MonitorConfig {
        MonitorConfig::with_steps(self.d, self.m, self.h, self.total_length.saturating_sub(self.m), regime, c_global)
    }
}

fn sweep(r: &mut Resolver) -> Result<Table, CliError> {
    let s = Setup::resolve(r, 10_000, 5000, 100);
    let family = match key!(r, shift, ShiftKind::Fixed, "same shift on every affected stream") {
        ShiftKind::Fixed => ShiftFamily::Fixed,
        ShiftKind::Random => ShiftFamily::RandomGaussian,
        ShiftKind::None => return Err(CliError::Config("shift: a sweep needs fixed or random".into())),
    };
    let sizes = key!(r, delta, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.5, 2.0], "shift-size grid");
    let p = single("p", &key!(r, p, vec![s.d], "every stream affected"))?;
    let c_locals = key!(r, c_local, vec![0.0, 3.15, 3.44, 4.05, 5.2], "local thresholds from 0 to 5.2");
    let reps = key!(r, reps, 500usize, "five hundred replications");
    let seed = key!(r, seed, SEED, "fixed seed");
    let thresholds = match opt_key!(r, c_global) {
        Some(v) => GlobalThresholds::Supplied(v),
        None => {
            let c = calibration_keys(r, DEFAULT_REPS, seed)?;
            GlobalThresholds::Calibrated { alpha: c.alpha, increments: c.increments, reps: c.reps, seed: c.seed }
        }
    };
    let base = Scenario { p, ..Scenario::dense(s.d, s.m, s.total_length, s.tau, Shift::Fixed(0.0), Noise::IidNormal) };
    let cfg = s.config(Regime::Centralized, 0.0);
    let rows = threshold_sweep(&base, family, &sizes, &c_locals, &thresholds, &cfg, reps, seed).map_err(harness_err)?;
    let mut table = Table::new(
        &["family", "size", "c_local", "c_global"],
        &["add", "add_count", "trans_avg", "detect_rate", "fp_rate"],
    );
    for row in rows {
        let family = match row.family {
            ShiftFamily::Fixed => "fixed",
            ShiftFamily::RandomGaussian => "random",
        };
        table.push(
            vec![family.into(), row.size.to_string(), row.c_local.to_string(), row.c_global.to_string()],
            vec![row.add, row.add_count as f64, row.trans_avg, row.detect_rate, row.fp_rate],
        );
    }
    Ok(table)
}

fn bandwidth(r: &mut Resolver) -> Result<Table, CliError> {
    let s = Setup::resolve(r, 1000, 600, 50);
    let h0 = key!(r, h0, 50usize, "reference window 50");
    let c_local = single("c_local", &key!(r, c_local, vec![3.44], "local threshold 3.44"))?;
    let delta0 = match key!(r, delta0, "auto".to_string(), "midpoint of the delay drop").as_str() {
        "auto" => Delta0::Auto {
            grid: key!(r, delta, (1..=20).map(|i| i as f64 * 0.05).collect::<Vec<_>>(), "shift grid 0.05 to 1"),
        },
        v => Delta0::Value(v.parse().map_err(|_| CliError::Config(format!("delta0: expected a number or \"auto\", got {v:?}")))?),
    };
    let stride = key!(r, stride, 10usize, "every tenth window length");
    let reps = key!(r, reps, 500usize, "five hundred replications");
    let seed = key!(r, seed, SEED, "fixed seed");
    let thresholds = match opt_key!(r, c_global) {
        Some(v) if v.len() == 2 => BandwidthThresholds::Fixed { c_global_centralized: v[0], c_global_distributed: v[1] },
        Some(_) => return Err(CliError::Config("c_global: expected [centralized, distributed]".into())),
        None => {
            let c = calibration_keys(r, 1000, seed)?;
            BandwidthThresholds::Calibrated { alpha: c.alpha, increments: c.increments, reps: c.reps, seed: c.seed }
        }
    };
    let base = Scenario::dense(s.d, s.m, s.total_length, s.tau, Shift::Fixed(0.0), Noise::IidNormal);
    let cfg = s.config(Regime::Centralized, 0.0);
    let res = recover_bandwidth(&base, &delta0, h0, c_local, &thresholds, &cfg, stride, reps, seed).map_err(harness_err)?;
    eprintln!(
        "h_star = {}, delta0 = {}, reference delay = {}, delay at h_star = {}",
        res.h_star, res.delta0, res.add_reference, res.add_at_h_star
    );
    let mut table = Table::new(&["h"], &["c_global", "add", "add_reference", "gap", "selected"]);
    for p in &res.curve {
        let selected = if p.h == res.h_star { 1.0 } else { 0.0 };
        table.push(vec![p.h.to_string()], vec![p.c_global, p.add, res.add_reference, p.gap, selected]);
    }
    Ok(table)
}

fn training(r: &mut Resolver) -> Result<Table, CliError> {
    let sizes_given = given(&r.flags().training_sizes, &r.file().training_sizes);
    let ms = key!(r, training_sizes, vec![80usize, 100, 500, 1000], "training sizes 80 to 1000");
    let h = key!(r, h, 50usize, "window 50");
    let d = key!(r, d, 100usize, "simulation studies use 100 streams");
    let total_length = key!(r, total_length, 6000usize, "series length 6000");
    let c_local = single("c_local", &key!(r, c_local, vec![3.44], "local threshold 3.44"))?;
    let reps = key!(r, reps, 1000usize, "one thousand replications");
    let seed = key!(r, seed, SEED, "fixed seed");
    let c_globals = if sizes_given {
        opt_key!(r, c_global)
    } else {
        Some(key!(r, c_global, vec![9.039, 8.159, 6.014, 5.708], "critical values for the default training sizes"))
    };
    let thresholds = match c_globals {
        Some(v) => GlobalThresholds::Supplied(v),
        None => {
            let c = calibration_keys(r, DEFAULT_REPS, seed)?;
            GlobalThresholds::Calibrated { alpha: c.alpha, increments: c.increments, reps: c.reps, seed: c.seed }
        }
    };
    let rows = training_size_study(&ms, h, d, total_length, c_local, &thresholds, reps, seed).map_err(harness_err)?;
    let mut table = Table::new(&["m"], &["c_global", "empirical_size", "mse_mean", "mse_sd"]);
    for row in rows {
        table.push(vec![row.m.to_string()], vec![row.c_global, row.empirical_size, row.mse_mean, row.mse_sd]);
    }
    Ok(table)
}

fn ar1(r: &mut Resolver) -> Result<Table, CliError> {
    let s = Setup::resolve(r, 10_000, 5000, 100);
    let phis = key!(r, phi, vec![0.0, 0.25, 0.5, 0.75], "AR(1) coefficients 0 to 0.75");
    let methods = key!(r, methods, vec![MethodKind::NoAdjust, MethodKind::Inflate, MethodKind::Lrv], "all three methods");
    let ps = key!(r, p, vec![100usize, 50, 10], "affected streams 100, 50, 10");
    let deltas = key!(r, delta, vec![0.5, 1.0], "shift sizes 0.5 and 1");
    let c_local = single("c_local", &key!(r, c_local, vec![3.44], "local threshold 3.44"))?;
    let alpha = single("alpha", &key!(r, alpha, vec![0.05], "type-I error 0.05"))?;
    let calibration_reps = key!(r, calibration_reps, 1000usize, "null replications per calibration");
    let kernel = kernel_of(key!(r, kernel, KernelKind::Bartlett, "Bartlett kernel"));
    let bandwidth = opt_key!(r, bandwidth);
    let reps = key!(r, reps, 1000usize, "one thousand replications");
    let seed = key!(r, seed, SEED, "fixed seed");
    let spec = AutocorrelationSpec {
        phis,
        methods: methods
            .iter()
            .map(|m| match m {
                MethodKind::NoAdjust => AdjustMethod::NoAdjust,
                MethodKind::Inflate => AdjustMethod::InflateThresholds,
                MethodKind::Lrv => AdjustMethod::Lrv,
            })
            .collect(),
        cells: ps.iter().flat_map(|&p| deltas.iter().map(move |&d| (p, d))).collect(),
        alpha,
        calibration_reps,
        kernel,
        bandwidth,
    };
    let base = Scenario::dense(s.d, s.m, s.total_length, s.tau, Shift::Fixed(0.0), Noise::IidNormal);
    let cfg = s.config(Regime::Distributed { c_local }, 0.0);
    let rows = autocorrelation_study(&base, &cfg, &spec, reps, seed).map_err(harness_err)?;
    let mut table = Table::new(
        &["phi", "method", "p", "delta"],
        &["c_global", "fp_rate", "fp_per_1000", "add", "add_count", "detect_rate", "trans_avg"],
    );
    for row in rows {
        let method = match row.method {
            AdjustMethod::NoAdjust => "no-adjust",
            AdjustMethod::InflateThresholds => "inflate",
            AdjustMethod::Lrv => "lrv",
        };
        table.push(
            vec![row.phi.to_string(), method.into(), row.p.to_string(), row.delta.to_string()],
            vec![row.c_global, row.fp_rate, row.fp_per_1000, row.add, row.add_count as f64, row.detect_rate, row.trans_avg],
        );
    }
    Ok(table)
}
