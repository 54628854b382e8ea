//! Experiment runner: `frogsim <experiment> --config file.json`.
//!
//! Exit codes: 0 when every verdict passes, 1 for a failed verdict or a
//! runtime error, 2 for an invalid configuration or missing artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod artifacts;
pub mod config;
pub mod experiments;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;

use artifacts::{git_blob_sha1, read_summary, write_atomic, Summary, SCHEMA_VERSION};
use config::{resolve_radius, ConfigError, Experiment, ExperimentConfig, RadiusSpec};
use experiments::{run_experiment, Ctx};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "frogsim", about = "Brownian frog model experiments", version)]
struct Cli {
    /// Experiment name, or `report`.
    command: String,
    /// Output directory to summarize (report only).
    dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Connection radius, or `critical`.
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    critical_cache: Option<PathBuf>,
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.command == "report" {
        return match cli.dir {
            Some(d) => report(&d),
            None => {
                eprintln!("usage: frogsim report <dir>");
                EXIT_CONFIG
            }
        };
    }
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let run = || execute(cfg, cli.out.clone());
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(anyhow::anyhow!("thread pool: {e}")),
        },
        None => run(),
    };
    match result {
        Ok(summary) => {
            print_summary(&summary);
            if summary.all_pass {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e) if is_config_error(&e) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAIL
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<ConfigError>().is_some()
            || matches!(
                c.downcast_ref::<frogsim_core::Error>(),
                Some(frogsim_core::Error::Config(_) | frogsim_core::Error::Precondition(_))
            )
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let experiment = <Experiment as clap::ValueEnum>::from_str(&cli.command, false)
        .map_err(|_| ConfigError(format!("unknown experiment {:?}", cli.command)))?;
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::from_json(&format!("{{\"experiment\": \"{}\"}}", experiment.name()))?,
    };
    if cfg.experiment != experiment {
        return Err(ConfigError(format!(
            "config is for {} but {} was requested",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    if let Some(r) = &cli.radius {
        cfg.radius = Some(match r.parse::<f64>() {
            Ok(v) => RadiusSpec::Value(v),
            Err(_) => RadiusSpec::Named(r.clone()),
        });
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.replicas {
        cfg.replicas = n;
    }
    if let Some(p) = &cli.critical_cache {
        cfg.critical_cache = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run a validated configuration and write its artifacts.
pub fn execute(cfg: ExperimentConfig, out: Option<PathBuf>) -> anyhow::Result<Summary> {
    let out_dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()));
    std::fs::create_dir_all(&out_dir)?;
    let (radius, critical) = resolve_radius(&cfg, &out_dir)?;
    // Locations are not part of the echoed configuration.
    let mut echo = cfg.clone();
    echo.out_dir = None;
    echo.critical_cache = None;
    let echo_bytes = serde_json::to_vec(&echo)?;
    let start = Instant::now();
    let ctx = Ctx { cfg, radius, critical, out_dir: out_dir.clone() };
    let outcome = run_experiment(&ctx)?;
    let all_pass = outcome.verdicts.iter().all(|v| v.pass);
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        experiment: ctx.cfg.experiment.name().to_string(),
        config: echo,
        config_hash: git_blob_sha1(&echo_bytes),
        radius,
        critical_radius: critical,
        wall_time: start.elapsed().as_secs_f64(),
        verdicts: outcome.verdicts,
        flags: outcome.flags,
        all_pass,
    };
    write_atomic(&out_dir.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}

fn print_summary(s: &Summary) {
    println!("experiment {}  radius {:?}  wall {:.1}s", s.experiment, s.radius, s.wall_time);
    for v in &s.verdicts {
        println!("  {}", v.line());
    }
    println!("all_pass {}", s.all_pass);
}

/// Print the verdicts stored in `dir/summary.json`.
pub fn report(dir: &Path) -> i32 {
    match read_summary(dir) {
        Ok(s) => {
            print_summary(&s);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
    }
}
