//! `rvmb`: compile, simulate and report on the benchmark suite.
//!
//! Exit status: 0 on success, 1 when any cell fails (or a differential
//! diverges), 2 for an invalid configuration or usage error.

use clap::{Parser, Subcommand};
use rvmb_core::harness::{
    differential, load_reports, parse_models, render, run_matrix, write_reports, HarnessError, MetricsReport, ModelKind,
    ReportFormat, RunConfig,
};
use rvmb_core::isa::Fault;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rvmb", version, about = "RV64 ML-inference evaluator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark × model matrix described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one benchmark on one model.
    Bench {
        name: String,
        #[arg(long, default_value = "minor")]
        model: String,
        /// Base config (defaults apply to missing keys).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "markdown")]
        format: String,
    },
    /// Check that several models reach the same final state.
    Diff {
        name: String,
        #[arg(long, default_value = "atomic,minor,o3")]
        models: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corrupt the N-th fused multiply-add of one model, e.g. `o3:10`.
        #[arg(long, value_name = "MODEL:N")]
        inject_fma_fault: Option<String>,
    },
    /// Re-render saved results.
    Report {
        dir: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: String,
    },
}

const EXIT_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;

fn invalid(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INVALID)
}

fn base_config(path: Option<&PathBuf>) -> Result<RunConfig, HarnessError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    Ok(cfg)
}

fn summarize(reports: &[MetricsReport]) -> ExitCode {
    let failed: Vec<&MetricsReport> = reports.iter().filter(|r| !r.ok()).collect();
    for r in &failed {
        eprintln!("FAILED {} on {}: {}", r.benchmark, r.model, r.error.as_ref().unwrap());
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

fn run(config: PathBuf, out: Option<PathBuf>) -> ExitCode {
    let mut cfg = match RunConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return invalid(e),
    };
    if out.is_some() {
        cfg.output_dir = out;
    }
    let reports = match run_matrix(&cfg) {
        Ok(r) => r,
        Err(e) => return invalid(e),
    };
    print!("{}", render(&reports, ReportFormat::Markdown).expect("matrix is non-empty"));
    if let Some(dir) = &cfg.output_dir {
        match write_reports(dir, &reports) {
            Ok(paths) => paths.iter().for_each(|p| eprintln!("wrote {}", p.display())),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_FAILED);
            }
        }
    }
    summarize(&reports)
}

fn bench(name: String, model: &str, config: Option<PathBuf>, seed: Option<u64>, format: &str) -> ExitCode {
    let model: ModelKind = match model.parse() {
        Ok(m) => m,
        Err(e) => return invalid(e),
    };
    let format: ReportFormat = match format.parse() {
        Ok(f) => f,
        Err(e) => return invalid(e),
    };
    let mut cfg = match base_config(config.as_ref()) {
        Ok(c) => c,
        Err(e) => return invalid(e),
    };
    cfg.benchmarks = vec![name];
    cfg.models = vec![model];
    if let Some(s) = seed {
        cfg.seed = s;
    }
    match run_matrix(&cfg) {
        Ok(reports) => {
            print!("{}", render(&reports, format).expect("one cell"));
            summarize(&reports)
        }
        Err(e) => invalid(e),
    }
}

fn parse_fault(spec: &str) -> Result<(ModelKind, Fault), String> {
    let (m, n) = spec.split_once(':').ok_or_else(|| format!("expected MODEL:N, got `{spec}`"))?;
    let nth = n.parse().map_err(|_| format!("bad FMA index `{n}`"))?;
    Ok((m.parse()?, Fault::FlipFmaRounding { nth }))
}

fn diff(name: String, models: &str, config: Option<PathBuf>, fault: Option<String>) -> ExitCode {
    let models = match parse_models(models) {
        Ok(m) => m,
        Err(e) => return invalid(e),
    };
    let fault = match fault.as_deref().map(parse_fault).transpose() {
        Ok(f) => f,
        Err(e) => return invalid(e),
    };
    let cfg = match base_config(config.as_ref()) {
        Ok(c) => c,
        Err(e) => return invalid(e),
    };
    match differential(&name, &models, &cfg, fault) {
        Ok(v) => {
            for (m, d) in &v.digests {
                println!("{m:>6}  {d}");
            }
            match &v.divergence {
                None => {
                    println!("PASS {name}");
                    ExitCode::SUCCESS
                }
                Some(d) => {
                    println!("FAIL {name}: first divergence at byte {} ({})", d.offset, d.location);
                    for (m, b) in &d.values {
                        match b {
                            Some(b) => println!("{m:>6}  {b:#04x}"),
                            None => println!("{m:>6}  <absent>"),
                        }
                    }
                    ExitCode::from(EXIT_FAILED)
                }
            }
        }
        Err(e @ HarnessError::InvalidConfig(_)) => invalid(e),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

fn report(dir: PathBuf, format: &str) -> ExitCode {
    let format: ReportFormat = match format.parse() {
        Ok(f) => f,
        Err(e) => return invalid(e),
    };
    let rendered = load_reports(&dir).and_then(|r| render(&r, format));
    match rendered {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out } => run(config, out),
        Command::Bench { name, model, config, seed, format } => bench(name, &model, config, seed, &format),
        Command::Diff { name, models, config, inject_fma_fault } => diff(name, &models, config, inject_fma_fault),
        Command::Report { dir, format } => report(dir, &format),
    }
}
