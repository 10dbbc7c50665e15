//! `proxbench`: benchmark campaigns, single traced runs, and dataset
//! file utilities for the feasibility solver library.

use clap::{Parser, Subcommand};
use proxbench::bench::{
    emit_table, emit_trace, run_campaign, AlgorithmConfig, CampaignConfig, ProblemConfig,
    TableFormat,
};
use proxbench::problems::{load_dataset, save_dataset, ProblemFamily};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "proxbench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-trial benchmark campaign from a JSON config.
    Bench {
        /// Campaign config file (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for tables and records.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads (default: available cores); never changes results.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one algorithm on one instance and report final metrics.
    Run {
        /// Problem name, e.g. toy, cdp1d, cdp2d:32:32, sparse:64:64:3,
        /// srcloc:10, srcloc:10:noisy.
        #[arg(long)]
        problem: String,
        /// Algorithm name, e.g. CP, DR, CDRL, AVP, WF, DRAP.
        #[arg(long)]
        algo: String,
        /// Instance seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-iteration trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 5e-5)]
        tol: f64,
        #[arg(long, default_value_t = 6000)]
        max_iter: usize,
    },
    /// Generate or inspect PRB1 dataset files.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Generate a dataset file from a problem spec.
    Gen {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print header information and a content checksum.
    Inspect { file: PathBuf },
}

/// Parses colon-separated problem names into generator configs.
fn parse_problem(name: &str) -> anyhow::Result<ProblemConfig> {
    let parts: Vec<&str> = name.split(':').collect();
    let num = |s: &str| -> anyhow::Result<usize> {
        s.parse()
            .map_err(|_| anyhow::anyhow!("invalid number {s:?} in problem {name:?}"))
    };
    Ok(match parts[0] {
        "toy" => ProblemConfig::Toy {},
        "cdp1d" => ProblemConfig::Cdp1d {
            n: parts.get(1).map(|s| num(s)).transpose()?.unwrap_or(128),
            m: parts.get(2).map(|s| num(s)).transpose()?.unwrap_or(10),
            octanary: false,
        },
        "cdp2d" => ProblemConfig::Cdp2d {
            h: parts.get(1).map(|s| num(s)).transpose()?.unwrap_or(64),
            w: parts.get(2).map(|s| num(s)).transpose()?.unwrap_or(64),
            m: parts.get(3).map(|s| num(s)).transpose()?.unwrap_or(10),
            octanary: false,
        },
        "sparse" => ProblemConfig::SparseDots {
            h: parts.get(1).map(|s| num(s)).transpose()?.unwrap_or(64),
            w: parts.get(2).map(|s| num(s)).transpose()?.unwrap_or(64),
            k_dots: parts.get(3).map(|s| num(s)).transpose()?.unwrap_or(3),
            s_factor: 1.2,
        },
        "srcloc" => ProblemConfig::Srcloc {
            m: parts.get(1).map(|s| num(s)).transpose()?.unwrap_or(10),
            noise: matches!(parts.get(2), Some(&"noisy")),
        },
        "file" => ProblemConfig::File {
            path: parts
                .get(1)
                .ok_or_else(|| anyhow::anyhow!("file problem needs a path: file:<path>"))?
                .to_string(),
        },
        other => anyhow::bail!(
            "unknown problem {other:?}; valid: toy, cdp1d, cdp2d, sparse, srcloc, file"
        ),
    })
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var("PROXBENCH_SEED") {
        Ok(v) => Ok(Some(v.parse().map_err(|_| {
            anyhow::anyhow!("PROXBENCH_SEED must be an unsigned integer, got {v:?}")
        })?)),
        Err(_) => Ok(None),
    }
}

fn cmd_bench(
    config_path: &Path,
    out: &Path,
    workers: Option<usize>,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", config_path.display()))?;
    let mut config: CampaignConfig = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", config_path.display()))?;
    if let Some(s) = seed.or(env_seed()?) {
        config.base_seed = s;
    }
    config
        .validate()
        .map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;

    let result = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Runtime(anyhow::anyhow!("thread pool: {e}")))?
            .install(|| run_campaign(&config)),
        None => run_campaign(&config),
    }
    .map_err(|e| Runtime(anyhow::anyhow!("campaign failed: {e}")))?;

    std::fs::create_dir_all(out).map_err(|e| Runtime(e.into()))?;
    // resolved config: the preset with the seed override applied, losslessly
    let resolved = serde_json::to_vec_pretty(&config).map_err(|e| Runtime(e.into()))?;
    std::fs::write(out.join("config.json"), &resolved).map_err(|e| Runtime(e.into()))?;
    let csv = emit_table(&result.summary, TableFormat::Csv).map_err(|e| Runtime(e.into()))?;
    let json = emit_table(&result.summary, TableFormat::Json).map_err(|e| Runtime(e.into()))?;
    std::fs::write(out.join("summary.csv"), &csv).map_err(|e| Runtime(e.into()))?;
    std::fs::write(out.join("summary.json"), &json).map_err(|e| Runtime(e.into()))?;
    let records = serde_json::to_vec_pretty(&result.records).map_err(|e| Runtime(e.into()))?;
    std::fs::write(out.join("records.json"), records).map_err(|e| Runtime(e.into()))?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

fn cmd_run(
    problem: &str,
    algo: &str,
    seed: u64,
    trace_out: Option<&Path>,
    tol: f64,
    max_iter: usize,
) -> anyhow::Result<()> {
    // verify the algorithm name up front for a config-class error
    algo.parse::<proxbench::algorithms::AlgorithmKind>()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let seed = env_seed()?.unwrap_or(seed);
    let config = CampaignConfig {
        problem: parse_problem(problem)?,
        algorithms: vec![AlgorithmConfig {
            name: algo.to_string(),
            label: None,
            lambda: None,
            eta: None,
            rho: None,
            mu: None,
            c: None,
            memory: None,
            warm_start_iters: None,
            admm1_scaled_dual: None,
            cdrl_inner_relax: None,
        }],
        trials: 1,
        base_seed: seed,
        tol,
        max_iter,
        success_threshold: None,
        support_only: false,
        stats_exclude_failures: false,
        phase_rotation_termination: false,
        trace: trace_out.is_some(),
    };
    let result = run_campaign(&config).map_err(|e| Runtime(anyhow::anyhow!("run failed: {e}")))?;
    let record = &result.records[0];
    if let Some(path) = trace_out {
        let bytes = emit_trace(record).map_err(|e| Runtime(e.into()))?;
        std::fs::write(path, bytes).map_err(|e| Runtime(e.into()))?;
    }
    let metrics = serde_json::json!({
        "problem": problem,
        "algorithm": record.algorithm,
        "seed": record.instance_seed,
        "iterations": record.iterations,
        "converged": record.converged,
        "success": record.success,
        "final_gap": record.final_gap,
        "truth_distance": record.truth_distance,
    });
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn cmd_dataset(command: &DatasetCommand) -> anyhow::Result<()> {
    match command {
        DatasetCommand::Gen { problem, seed, out } => {
            let seed = env_seed()?.unwrap_or(*seed);
            let inst = parse_problem(problem)?
                .instantiate(seed)
                .map_err(|e| Runtime(anyhow::anyhow!("generation failed: {e}")))?;
            save_dataset(&inst, out).map_err(|e| Runtime(e.into()))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        DatasetCommand::Inspect { file } => {
            let inst = load_dataset(file)?;
            let bytes = std::fs::read(file)?;
            println!("family: {}", inst.meta.family.name());
            println!("shape: {}", inst.problem.shape());
            println!("d: {}", inst.meta.d);
            println!("m: {}", inst.meta.m);
            println!("truth: {}", inst.truth.is_some());
            println!("checksum: {:016x}", fnv1a(&bytes));
            if inst.meta.family == ProblemFamily::File {
                println!("maps: default (file carried none)");
            }
            Ok(())
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Marker wrapper separating runtime failures (exit 3) from
/// configuration errors (exit 2).
#[derive(Debug)]
struct Runtime(anyhow::Error);

impl std::fmt::Display for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for Runtime {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bench {
            config,
            out,
            workers,
            seed,
        } => cmd_bench(config, out, *workers, *seed),
        Command::Run {
            problem,
            algo,
            seed,
            trace,
            tol,
            max_iter,
        } => cmd_run(problem, algo, *seed, trace.as_deref(), *tol, *max_iter),
        Command::Dataset { command } => cmd_dataset(command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Runtime>() {
                ExitCode::from(EXIT_RUNTIME)
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
    }
}
