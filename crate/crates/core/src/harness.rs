//! Monte Carlo experiment engine behind the `wipt` binary.
//!
//! An experiment file is TOML:
//!
//! ```toml
//! scenario = "fig5"        # fig4 | fig5 | fig6 | fig7 | fig8 | custom
//! trials = 500             # per sweep point
//! parallel = 4             # worker threads
//! seed = 1
//! oracle = false           # run the numerical reference solver (M <= 4)
//! delta_d_deg = 1.0        # steering step, overrides config.delta_d
//!
//! [config]                 # any SimConfig field; unset fields keep the preset
//! k_id = 50
//!
//! [sweep]
//! name = "mu"              # mu | k_id | k_eh | b_eh | b_id
//! values = [0.1, 0.3, 0.5, 0.7, 0.9]
//! ```
//!
//! Trial `t` of sweep point `p` draws its channels from
//! `derive_seed(seed, [p, t])`, so results depend only on the experiment file and seed,
//! never on the thread count.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::analysis::{self, AnalysisInputs};
use crate::beamformer::{add_dedicated_eh_beam, joint_from_zf, JointParams, Variant};
use crate::channel::{derive_seed, generate_channels, quantize_all, SimConfig};
use crate::error::{Error, Result};
use crate::metrics::{harvested_energy, nats_to_bits, sinr_all, sum_rate, to_db};
use crate::numerics::{energy, inner, CMat};
use crate::oracle::{oracle_solve_from, OracleConfig};
use crate::scheduler::{sus_select, zf_beamformers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig4 => "fig4",
            Scenario::Fig5 => "fig5",
            Scenario::Fig6 => "fig6",
            Scenario::Fig7 => "fig7",
            Scenario::Fig8 => "fig8",
            Scenario::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Mu,
    KId,
    KEh,
    BEh,
    BId,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Mu => "mu",
            SweepVar::KId => "k_id",
            SweepVar::KEh => "k_eh",
            SweepVar::BEh => "b_eh",
            SweepVar::BId => "b_id",
        }
    }

    /// Copy of `base` with this variable set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut cfg = base.clone();
        let integral = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as u64)
            } else {
                Err(Error::config(format!("sweep.values ({})", self.name()), format!("{value} is not a nonnegative integer")))
            }
        };
        match self {
            SweepVar::Mu => cfg.mu = value,
            SweepVar::KId => cfg.k_id = integral()? as usize,
            SweepVar::KEh => cfg.k_eh = integral()? as usize,
            SweepVar::BEh => cfg.b_eh = integral()? as u32,
            SweepVar::BId => cfg.b_id = integral()? as u32,
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub name: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub base: SimConfig,
    pub sweep: Sweep,
    pub trials: usize,
    pub parallel: usize,
    pub seed: u64,
    pub oracle: bool,
    pub oracle_config: OracleConfig,
    /// Monte Carlo samples for the Wishart eigenvalue mean in analysis rows.
    pub analysis_samples: usize,
}

pub const DEFAULT_TRIALS: usize = 500;

const MU_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

impl ExperimentSpec {
    pub fn preset(scenario: Scenario) -> Self {
        let mut base = SimConfig::default();
        let (sweep, oracle) = match scenario {
            Scenario::Fig4 | Scenario::Fig5 | Scenario::Custom => (SweepVar::Mu.with(&MU_GRID), false),
            Scenario::Fig6 => (SweepVar::BEh.with(&[2.0, 4.0, 6.0, 8.0, 10.0]), false),
            Scenario::Fig7 => (SweepVar::KId.with(&[10.0, 25.0, 50.0, 100.0, 200.0, 400.0]), true),
            Scenario::Fig8 => (SweepVar::KEh.with(&[10.0, 100.0, 1000.0]), true),
        };
        if scenario == Scenario::Fig6 {
            base.k_id = 50;
        }
        Self {
            scenario,
            base,
            sweep,
            trials: DEFAULT_TRIALS,
            parallel: 1,
            seed: 0,
            oracle,
            oracle_config: OracleConfig::default(),
            analysis_samples: 10_000,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::config("spec", e.to_string().trim_end().to_string()))?;
        let mut spec = Self::preset(file.scenario);
        if let Some(table) = file.config {
            let mut merged = toml::Table::try_from(&spec.base).expect("SimConfig serialises to a table");
            merged.extend(table);
            spec.base = merged.try_into().map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        }
        if let Some(deg) = file.delta_d_deg {
            spec.base.delta_d = deg.to_radians();
        }
        if let Some(sweep) = file.sweep {
            spec.sweep = sweep;
        }
        spec.trials = file.trials.unwrap_or(spec.trials);
        spec.parallel = file.parallel.unwrap_or(spec.parallel);
        spec.seed = file.seed.unwrap_or(spec.seed);
        spec.oracle = file.oracle.unwrap_or(spec.oracle);
        if let Some(r) = file.oracle_restarts {
            spec.oracle_config.restarts = r;
        }
        if let Some(n) = file.analysis_samples {
            spec.analysis_samples = n;
        }
        spec.base.seed = spec.seed;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.parallel == 0 {
            return Err(Error::config("parallel", "must be at least 1"));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::config("sweep.values", "must not be empty"));
        }
        if self.analysis_samples == 0 {
            return Err(Error::config("analysis_samples", "must be at least 1"));
        }
        self.oracle_config.validate()?;
        self.base.validate()?;
        for &v in &self.sweep.values {
            let cfg = self.point_config(v)?;
            cfg.validate().map_err(|e| match e {
                Error::Config { field, message } => Error::config(field, format!("{message} (sweep value {v})")),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn point_config(&self, value: f64) -> Result<SimConfig> {
        self.sweep.name.apply(&self.base, value)
    }
}

impl SweepVar {
    pub fn with(self, values: &[f64]) -> Sweep {
        Sweep {
            name: self,
            values: values.to_vec(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    scenario: Scenario,
    trials: Option<usize>,
    parallel: Option<usize>,
    seed: Option<u64>,
    oracle: Option<bool>,
    oracle_restarts: Option<usize>,
    analysis_samples: Option<usize>,
    delta_d_deg: Option<f64>,
    config: Option<toml::Table>,
    sweep: Option<Sweep>,
}

/// Outputs of one channel drop.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub selected: Vec<usize>,
    pub rho: f64,
    pub sinr: Vec<f64>,
    pub sinr_zf: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sum_rate: f64,
    pub sum_rate_zf: f64,
    pub eh_joint: f64,
    pub eh_zf: f64,
    pub eh_reduced: f64,
    /// Falls back to the joint value when `|S| = M`.
    pub eh_dedicated: f64,
    pub eh_oracle: Option<f64>,
    /// `(1/|S|) Σ_i ‖G w_i‖²` without the power factor.
    pub eh_per_beam_norm: f64,
    /// Mean of `|w_iᴴ w_i^ZF|²` over the beams.
    pub cos2_theta_id: f64,
    pub iterations: usize,
}

impl TrialRecord {
    /// Named per-trial samples in CSV order.
    pub fn samples(&self) -> Vec<(&'static str, Option<f64>)> {
        let db_mean = |v: &[f64]| v.iter().map(|&x| to_db(x)).sum::<f64>() / v.len() as f64;
        let gap: Vec<f64> = self.sinr.iter().zip(&self.gamma).map(|(s, g)| s / g).collect();
        vec![
            ("selected_users", Some(self.selected.len() as f64)),
            ("sum_rate_bits", Some(nats_to_bits(self.sum_rate))),
            ("sum_rate_zf_bits", Some(nats_to_bits(self.sum_rate_zf))),
            ("eh_joint", Some(self.eh_joint)),
            ("eh_zf", Some(self.eh_zf)),
            ("eh_reduced", Some(self.eh_reduced)),
            ("eh_dedicated", Some(self.eh_dedicated)),
            ("eh_oracle", self.eh_oracle),
            ("eh_joint_over_oracle", self.eh_oracle.map(|o| self.eh_joint / o)),
            ("eh_per_beam_norm", Some(self.eh_per_beam_norm)),
            ("target_sinr_db", Some(db_mean(&self.gamma))),
            ("received_sinr_db", Some(db_mean(&self.sinr))),
            ("sinr_gap_db", Some(db_mean(&gap))),
            ("cos2_theta_id", Some(self.cos2_theta_id)),
            ("steering_passes", Some(self.iterations as f64)),
        ]
    }
}

/// Runs every algorithm on one channel drop.
///
/// With limited feedback the transmitter designs on the quantized estimates;
/// SINR, rates and harvested energy are scored on the true channels.
pub fn run_trial(cfg: &SimConfig, trial_seed: u64, oracle: Option<&OracleConfig>) -> Result<TrialRecord> {
    let cs = generate_channels(cfg, trial_seed)?;
    let (h_use, g_use) = if cfg.perfect_csit() {
        (cs.h.clone(), cs.g.clone())
    } else {
        let q = quantize_all(&cs, cfg, derive_seed(trial_seed, &[2]))?;
        (q.h_estimate(), q.g_estimate())
    };
    let selection = sus_select(&h_use, cfg.epsilon, cfg.m);
    let s = selection.len();
    let rho = cfg.effective_snr() / s as f64;
    let h_s = selection.rows(&h_use);
    let h_true = selection.rows(&cs.h);
    let zf = zf_beamformers(&h_s, rho)?;

    let params = JointParams {
        rho,
        mu: cfg.mu,
        delta_d: cfg.delta_d,
        variant: Variant::Full,
    };
    let joint = joint_from_zf(&h_s, &g_use, &zf, &params)?;
    let reduced = joint_from_zf(
        &h_s,
        &g_use,
        &zf,
        &JointParams {
            variant: Variant::Reduced,
            ..params
        },
    )?;
    let eh = |w: &CMat, rho: f64| harvested_energy(&cs.g, w, rho, cfg.zeta);
    let eh_joint = eh(&joint.w, rho);
    let eh_dedicated = match add_dedicated_eh_beam(&joint, &h_s, &g_use) {
        Ok(d) => eh(&d.w, d.rho),
        Err(Error::NoSpareDimension { .. }) => eh_joint,
        Err(e) => return Err(e),
    };
    let eh_oracle = match oracle {
        Some(ocfg) if cfg.m <= 4 => {
            let ocfg = OracleConfig {
                seed: derive_seed(trial_seed, &[3]),
                ..ocfg.clone()
            };
            let sol = oracle_solve_from(&h_s, &g_use, rho, cfg.mu, &ocfg, std::slice::from_ref(&joint.w))?;
            Some(eh(&sol.w, rho))
        }
        _ => None,
    };

    let sinr = sinr_all(&h_true, &joint.w, rho);
    let sinr_zf = sinr_all(&h_true, &zf.w, rho);
    let beams = joint.beams();
    let cos2 = (0..beams)
        .map(|i| inner(&joint.beam(i), &zf.w.column(i).into_owned()).norm_sqr())
        .sum::<f64>()
        / beams as f64;
    let per_beam = (0..beams).map(|i| energy(&cs.g, &joint.beam(i))).sum::<f64>() / beams as f64;

    Ok(TrialRecord {
        selected: selection.indices.clone(),
        rho,
        sum_rate: sum_rate(&sinr),
        sum_rate_zf: sum_rate(&sinr_zf),
        sinr,
        sinr_zf,
        gamma: joint.gamma.clone(),
        eh_joint,
        eh_zf: eh(&zf.w, rho),
        eh_reduced: eh(&reduced.w, rho),
        eh_dedicated,
        eh_oracle,
        eh_per_beam_norm: per_beam,
        cos2_theta_id: cos2,
        iterations: joint.iterations_used,
    })
}

/// Seed of trial `trial` at sweep point `point`.
pub fn trial_seed(seed: u64, point: usize, trial: usize) -> u64 {
    derive_seed(seed, &[point as u64, trial as u64])
}

/// All trials of one sweep point, in trial order.
pub fn run_point(cfg: &SimConfig, seed: u64, point: usize, trials: usize, oracle: Option<&OracleConfig>) -> Result<Vec<TrialRecord>> {
    (0..trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, trial_seed(seed, point, t), oracle))
        .collect()
}

/// Sum with pairwise splitting so the rounding pattern is fixed by length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub sweep_name: String,
    pub sweep_value: f64,
    pub trials: usize,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const CSV_COLUMNS: [&str; 7] = ["scenario", "sweep_name", "sweep_value", "trials", "metric", "mean", "stderr"];

/// Nine significant digits.
fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        v.to_string()
    }
}

fn round9(v: f64) -> f64 {
    fmt_value(v).parse().unwrap_or(v)
}

impl ResultTable {
    pub fn get(&self, sweep_value: f64, metric: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.sweep_value == sweep_value && r.metric == metric)
    }

    /// The table as it reads back from CSV.
    pub fn rounded(&self) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| ResultRow {
                    sweep_value: round9(r.sweep_value),
                    mean: round9(r.mean),
                    stderr: round9(r.stderr),
                    ..r.clone()
                })
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.sweep_name.clone(),
                fmt_value(r.sweep_value),
                r.trials.to_string(),
                r.metric.clone(),
                fmt_value(r.mean),
                fmt_value(r.stderr),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn parse_csv(text: &str) -> std::result::Result<Self, csv::Error> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rows = rdr
            .deserialize::<(String, String, f64, usize, String, f64, f64)>()
            .map(|rec| {
                rec.map(|(scenario, sweep_name, sweep_value, trials, metric, mean, stderr)| ResultRow {
                    scenario,
                    sweep_name,
                    sweep_value,
                    trials,
                    metric,
                    mean,
                    stderr,
                })
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { rows })
    }
}

/// Writes the table to `path`, creating parent directories.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let file = std::fs::File::create(path).map_err(io)?;
    table.write_csv(std::io::BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => io(source),
        other => io(std::io::Error::other(format!("{other:?}"))),
    })
}

/// Closed-form predictions for one sweep point, as `(metric, value)`.
pub fn analysis_rows(cfg: &SimConfig, samples: usize, seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let inputs = AnalysisInputs {
        wishart_samples: samples,
        wishart_seed: seed,
        ..AnalysisInputs::from_config(cfg)
    };
    let q = &inputs.quadrature;
    let bounds = analysis::eh_bounds(&inputs)?;
    let s = inputs.selected as f64;
    let rate = analysis::expected_sum_rate(cfg.mu, inputs.rho, cfg.m, cfg.epsilon, cfg.k_id, q)?;
    let loss = analysis::rate_loss(cfg.mu, inputs.rho, cfg.m, cfg.epsilon, cfg.k_id, false, q)?;
    let mut rows = vec![
        ("analysis_selected_users", s),
        ("analysis_sum_rate_bits", nats_to_bits(rate)),
        ("analysis_rate_loss_bits", nats_to_bits(loss)),
        ("analysis_eh_joint_lower", cfg.zeta * bounds.joint_total),
        ("analysis_eh_zf", cfg.zeta * bounds.zf_total),
        ("analysis_delta_eh", cfg.zeta * bounds.delta_eh),
        ("analysis_eh_per_beam_norm", bounds.joint_lower_normalized),
        ("analysis_g_mu", bounds.g_mu),
        ("analysis_lambda_max_mean", bounds.lambda_max_mean),
    ];
    if cfg.b_eh > 0 {
        let fb = analysis::limited_feedback_analysis(cfg.b_eh, cfg.m, cfg.k_eh, inputs.rho, bounds.g_mu, bounds.lambda_max_mean);
        rows.push(("analysis_eh_fb_lower", cfg.zeta * s * fb.fb_lower));
        rows.push(("analysis_delta_q", cfg.zeta * s * fb.delta_q));
    }
    Ok(rows)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("parallel", e.to_string()))
}

fn row(spec: &ExperimentSpec, value: f64, trials: usize, metric: &str, mean: f64, stderr: f64) -> ResultRow {
    ResultRow {
        scenario: spec.scenario.name().to_string(),
        sweep_name: spec.sweep.name.name().to_string(),
        sweep_value: value,
        trials,
        metric: metric.to_string(),
        mean,
        stderr,
    }
}

/// Aggregates per-trial records into one row per metric.
pub fn summarize(spec: &ExperimentSpec, value: f64, records: &[TrialRecord]) -> Vec<ResultRow> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let per_trial: Vec<Vec<(&'static str, Option<f64>)>> = records.iter().map(TrialRecord::samples).collect();
    (0..first.samples().len())
        .filter_map(|j| {
            let name = per_trial[0][j].0;
            let values: Vec<f64> = per_trial.iter().filter_map(|s| s[j].1).collect();
            (!values.is_empty()).then(|| {
                let (mean, stderr) = mean_stderr(&values);
                row(spec, value, values.len(), name, mean, stderr)
            })
        })
        .collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let oracle = spec.oracle.then_some(&spec.oracle_config);
    let mut table = ResultTable::default();
    pool(spec.parallel)?.install(|| -> Result<()> {
        for (p, &value) in spec.sweep.values.iter().enumerate() {
            let cfg = spec.point_config(value)?;
            let records = run_point(&cfg, spec.seed, p, spec.trials, oracle)?;
            table.rows.extend(summarize(spec, value, &records));
            for (metric, v) in analysis_rows(&cfg, spec.analysis_samples, derive_seed(spec.seed, &[p as u64, u64::MAX]))? {
                table.rows.push(row(spec, value, 0, metric, v, 0.0));
            }
        }
        Ok(())
    })?;
    Ok(table)
}

/// Analysis rows only.
pub fn run_analysis(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut table = ResultTable::default();
    for (p, &value) in spec.sweep.values.iter().enumerate() {
        let cfg = spec.point_config(value)?;
        for (metric, v) in analysis_rows(&cfg, spec.analysis_samples, derive_seed(spec.seed, &[p as u64, u64::MAX]))? {
            table.rows.push(row(spec, value, 0, metric, v, 0.0));
        }
    }
    Ok(table)
}

/// Default output file for a spec inside `dir`.
pub fn output_path(spec: &ExperimentSpec, dir: &Path) -> PathBuf {
    dir.join(format!("{}.csv", spec.scenario.name()))
}

impl fmt::Display for ExperimentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.base;
        writeln!(f, "scenario   {}", self.scenario.name())?;
        writeln!(
            f,
            "sweep      {} = {:?}",
            self.sweep.name.name(),
            self.sweep.values
        )?;
        writeln!(f, "trials     {} (parallel {}, seed {})", self.trials, self.parallel, self.seed)?;
        writeln!(f, "oracle     {}", if self.oracle { "on" } else { "off" })?;
        write!(
            f,
            "config     M={} K_ID={} K_EH={} mu={} eps={} dD={:.3}deg B_ID={} B_EH={} snr={:.3}",
            c.m,
            c.k_id,
            c.k_eh,
            c.mu,
            c.epsilon,
            c.delta_d.to_degrees(),
            c.b_id,
            c.b_eh,
            c.effective_snr()
        )
    }
}
