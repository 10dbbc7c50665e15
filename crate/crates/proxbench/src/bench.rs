//! Multi-trial benchmark campaigns: shared-start trials, failure and
//! iteration statistics, and table/trace emission.

use crate::algorithms::{run, AlgorithmSpec, RunOptions, Termination, TracePoint};
use crate::error::{Error, Result};
use crate::problems::{
    self, gen_cdp_with, gen_sparse_dots_with, gen_srcloc, gen_toy_two_lines, load_dataset,
    Instance, MaskAlphabet, SuccessCriteria,
};
use crate::signal::Shape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write as _;

fn default_s_factor() -> f64 {
    1.2
}

/// Which instances a campaign solves.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Cdp1d {
        n: usize,
        m: usize,
        #[serde(default)]
        octanary: bool,
    },
    Cdp2d {
        h: usize,
        w: usize,
        m: usize,
        #[serde(default)]
        octanary: bool,
    },
    SparseDots {
        h: usize,
        w: usize,
        k_dots: usize,
        #[serde(default = "default_s_factor")]
        s_factor: f64,
    },
    Srcloc {
        m: usize,
        #[serde(default)]
        noise: bool,
    },
    File {
        path: String,
    },
    Toy {},
}

impl ProblemConfig {
    pub fn instantiate(&self, seed: u64) -> Result<Instance> {
        let alphabet = |octanary: bool| {
            if octanary {
                MaskAlphabet::Octanary
            } else {
                MaskAlphabet::Uniform
            }
        };
        match self {
            ProblemConfig::Cdp1d { n, m, octanary } => {
                gen_cdp_with(Shape::OneD(*n), *m, seed, alphabet(*octanary))
            }
            ProblemConfig::Cdp2d { h, w, m, octanary } => {
                gen_cdp_with(Shape::TwoD(*h, *w), *m, seed, alphabet(*octanary))
            }
            ProblemConfig::SparseDots {
                h,
                w,
                k_dots,
                s_factor,
            } => gen_sparse_dots_with(*h, *w, *k_dots, seed, *s_factor),
            ProblemConfig::Srcloc { m, noise } => gen_srcloc(*m, *noise, seed),
            ProblemConfig::File { path } => load_dataset(path),
            ProblemConfig::Toy {} => gen_toy_two_lines(seed),
        }
    }
}

/// Algorithm selection with optional per-algorithm parameter overrides;
/// absent fields keep the library defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: String,
    /// Row label in the emitted table; defaults to `name`.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub memory: Option<usize>,
    #[serde(default)]
    pub warm_start_iters: Option<usize>,
    #[serde(default)]
    pub admm1_scaled_dual: Option<bool>,
    #[serde(default)]
    pub cdrl_inner_relax: Option<bool>,
}

impl AlgorithmConfig {
    pub fn to_spec(&self) -> Result<(String, AlgorithmSpec)> {
        let kind = self.name.parse()?;
        let mut spec = AlgorithmSpec::new(kind);
        if let Some(v) = self.lambda {
            spec.lambda = v;
        }
        if let Some(v) = self.eta {
            spec.eta = v;
        }
        if let Some(v) = self.rho {
            spec.rho = v;
        }
        if let Some(v) = self.mu {
            spec.mu = v;
        }
        if let Some(v) = self.c {
            spec.c = v;
        }
        if let Some(v) = self.memory {
            spec.memory = v;
        }
        if let Some(v) = self.warm_start_iters {
            spec.warm_start_iters = v;
        }
        if let Some(v) = self.admm1_scaled_dual {
            spec.admm1_scaled_dual = v;
        }
        if let Some(v) = self.cdrl_inner_relax {
            spec.cdrl_inner_relax = v;
        }
        spec.validate()?;
        let label = self.label.clone().unwrap_or_else(|| self.name.clone());
        Ok((label, spec))
    }
}

fn default_tol() -> f64 {
    5e-5
}

fn default_max_iter() -> usize {
    6000
}

fn default_trials() -> usize {
    1
}

/// Full campaign description, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub problem: ProblemConfig,
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Override of the per-family success threshold.
    #[serde(default)]
    pub success_threshold: Option<f64>,
    /// Sparse dots: judge support only, without amplitude accuracy.
    #[serde(default)]
    pub support_only: bool,
    #[serde(default)]
    pub stats_exclude_failures: bool,
    #[serde(default)]
    pub phase_rotation_termination: bool,
    #[serde(default)]
    pub trace: bool,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "need at least one trial".into(),
            });
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be positive, got {}", self.tol),
            });
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter {
                name: "algorithms",
                reason: "need at least one algorithm".into(),
            });
        }
        for a in &self.algorithms {
            a.to_spec()?;
        }
        Ok(())
    }
}

/// One algorithm on one trial instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: String,
    pub instance_seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub success: bool,
    pub final_gap: f64,
    /// Family-appropriate distance to the truth; NaN without a truth.
    pub truth_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TracePoint>>,
}

/// One table row: failure count plus iteration order statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub trials: usize,
    pub failures: usize,
    pub median: f64,
    pub high: f64,
    pub low: f64,
    /// Statistic is an artifact of runs that hit the iteration budget
    /// without converging; rendered as "*" in tables.
    pub median_star: bool,
    pub high_star: bool,
    pub low_star: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub rows: Vec<AlgorithmSummary>,
    pub trials: usize,
    pub max_iter: usize,
}

pub struct CampaignResult {
    pub summary: BenchmarkSummary,
    pub records: Vec<TrialRecord>,
}

/// Runs every algorithm on `trials` instances. Within a trial all
/// algorithms share one instance and one starting point; trials are
/// seeded independently so the worker count never changes the results.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    config.validate()?;
    let algorithms: Vec<(String, AlgorithmSpec)> = config
        .algorithms
        .iter()
        .map(|a| a.to_spec())
        .collect::<Result<_>>()?;
    let per_trial: Vec<Vec<TrialRecord>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, &algorithms, config.base_seed + t))
        .collect::<Result<_>>()?;
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    let summary = summarize(
        &records,
        config.max_iter,
        config.stats_exclude_failures,
    )?;
    Ok(CampaignResult { summary, records })
}

fn run_trial(
    config: &CampaignConfig,
    algorithms: &[(String, AlgorithmSpec)],
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let instance = config.problem.instantiate(seed)?;
    // the start stream is decoupled from the instance stream so the two
    // never correlate
    let mut start_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let z0 = instance.random_start(&mut start_rng);
    let mut criteria = SuccessCriteria::default_for(&instance);
    if let Some(t) = config.success_threshold {
        criteria.threshold = t;
    }
    criteria.support_only = config.support_only;
    let opts = RunOptions {
        tol: config.tol,
        max_iter: config.max_iter,
        trace: config.trace,
        phase_rotation: config.phase_rotation_termination,
        warm_start_seed: seed,
    };
    algorithms
        .iter()
        .map(|(label, spec)| {
            let outcome = run(&instance.problem, spec, &z0, &opts)?;
            let (success, truth_distance) = match &instance.truth {
                Some(_) => {
                    let d = problems::truth_distance(&instance, &outcome.candidate, &criteria)?;
                    (d <= criteria.threshold, d)
                }
                None => (false, f64::NAN),
            };
            Ok(TrialRecord {
                algorithm: label.clone(),
                instance_seed: seed,
                iterations: outcome.iterations,
                converged: outcome.termination == Termination::Converged,
                success,
                final_gap: outcome.final_gap,
                truth_distance,
                trace: outcome.trace,
            })
        })
        .collect()
}

/// Aggregates per-algorithm failure counts and iteration statistics.
/// Non-converged trials enter at their recorded iteration count (the
/// budget) and flag the affected statistics.
pub fn summarize(
    records: &[TrialRecord],
    max_iter: usize,
    stats_exclude_failures: bool,
) -> Result<BenchmarkSummary> {
    if records.is_empty() {
        return Err(Error::InvalidParameter {
            name: "records",
            reason: "cannot summarize an empty record set".into(),
        });
    }
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.algorithm.as_str()) {
            order.push(&r.algorithm);
        }
    }
    let mut rows = Vec::new();
    let mut trials = 0;
    for name in order {
        let of_alg: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.algorithm == name)
            .collect();
        trials = of_alg.len();
        let failures = of_alg.iter().filter(|r| !r.success).count();
        let pool: Vec<&TrialRecord> = if stats_exclude_failures {
            of_alg.iter().copied().filter(|r| r.success).collect()
        } else {
            of_alg.clone()
        };
        let mut iters: Vec<usize> = pool.iter().map(|r| r.iterations).collect();
        iters.sort_unstable();
        let any_nonconverged = pool.iter().any(|r| !r.converged);
        let (median, high, low) = if iters.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let n = iters.len();
            let median = if n % 2 == 1 {
                iters[n / 2] as f64
            } else {
                (iters[n / 2 - 1] + iters[n / 2]) as f64 / 2.0
            };
            (median, iters[n - 1] as f64, iters[0] as f64)
        };
        let star = |v: f64| v.is_nan() || (any_nonconverged && v >= max_iter as f64);
        rows.push(AlgorithmSummary {
            algorithm: name.to_string(),
            trials,
            failures,
            median,
            high,
            low,
            median_star: star(median),
            high_star: star(high),
            low_star: star(low),
        });
    }
    Ok(BenchmarkSummary {
        rows,
        trials,
        max_iter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

fn fmt_stat(v: f64, star: bool) -> String {
    if star {
        "*".to_string()
    } else if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Renders a summary as CSV or JSON with a stable column order and
/// deterministic bytes.
pub fn emit_table(summary: &BenchmarkSummary, format: TableFormat) -> Result<Vec<u8>> {
    match format {
        TableFormat::Csv => {
            let mut out = Vec::new();
            writeln!(out, "algorithm,failures,median,high,low")?;
            for row in &summary.rows {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.algorithm,
                    row.failures,
                    fmt_stat(row.median, row.median_star),
                    fmt_stat(row.high, row.high_star),
                    fmt_stat(row.low, row.low_star),
                )?;
            }
            Ok(out)
        }
        TableFormat::Json => {
            let mut out = serde_json::to_vec_pretty(summary)
                .map_err(|e| Error::AlgorithmFailure(format!("table encoding failed: {e}")))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

/// Renders one record's convergence trace as plot-ready CSV.
pub fn emit_trace(record: &TrialRecord) -> Result<Vec<u8>> {
    let trace = record.trace.as_ref().ok_or(Error::InvalidParameter {
        name: "trace",
        reason: "record has no trace; enable tracing on the run".into(),
    })?;
    let mut out = Vec::new();
    writeln!(out, "iteration,iterate_change,gap")?;
    for p in trace {
        writeln!(out, "{},{},{}", p.iteration, p.change, p.gap)?;
    }
    Ok(out)
}
