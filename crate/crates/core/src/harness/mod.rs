//! Benchmark × model matrix runner, functional differentials and reports.

mod config;
mod report;
mod workload;

pub use config::{parse_models, ModelKind, RunConfig, SEED_ENV};
pub use report::{fmt_sig9, load_reports, parse_csv, render, round_sig9, write_reports, ReportError, ReportFormat, CSV_HEADER};
pub use workload::{resolve, Workload};

use crate::isa::{Fault, FunctionalResult, InstrClass, SimError};
use crate::memhier::{mpki, Level, MemoryHierarchy};
use crate::uarch::{simulate, AtomicModel, MinorModel, O3Model, StallBreakdown, TimingResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{model} run of `{benchmark}` failed: {error}")]
    Cell { benchmark: String, model: ModelKind, error: CellError },
}

/// Why one matrix cell produced no metrics.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellError {
    #[error("compile failure: {message}")]
    CompileFailure { message: String },
    #[error("simulation error{}: {message}", pc.map(|p| format!(" at pc {p:#x}")).unwrap_or_default())]
    SimError { pc: Option<u64>, message: String },
    #[error("no exit within {limit} instructions")]
    LimitExceeded { limit: u64 },
}

impl From<SimError> for CellError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::LimitExceeded(limit) => CellError::LimitExceeded { limit },
            other => CellError::SimError { pc: other.pc(), message: other.to_string() },
        }
    }
}

/// Metrics of one (benchmark, model) cell. Floating-point fields are
/// rounded to 9 significant digits so that every emitted format carries
/// the exact stored value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub benchmark: String,
    pub model: ModelKind,
    pub error: Option<CellError>,
    pub cycles: u64,
    pub instructions: u64,
    pub cpi: f64,
    /// Fractions in [`InstrClass::ALL`] order.
    pub mix: [f64; InstrClass::COUNT],
    pub l1d_mpki: f64,
    pub l2_mpki: f64,
    /// `None` for models without a branch predictor.
    pub branch_acc: Option<f64>,
    pub wall_s: f64,
    pub kips: f64,
    pub digest: String,
    #[serde(default)]
    pub stalls: StallBreakdown,
    #[serde(default)]
    pub exit_code: i64,
}

impl MetricsReport {
    pub fn failed(benchmark: &str, model: ModelKind, error: CellError) -> Self {
        MetricsReport {
            benchmark: benchmark.to_string(),
            model,
            error: Some(error),
            cycles: 0,
            instructions: 0,
            cpi: 0.0,
            mix: [0.0; InstrClass::COUNT],
            l1d_mpki: 0.0,
            l2_mpki: 0.0,
            branch_acc: None,
            wall_s: 0.0,
            kips: 0.0,
            digest: String::new(),
            stalls: StallBreakdown::default(),
            exit_code: 0,
        }
    }

    pub fn from_run(benchmark: &str, model: ModelKind, t: &TimingResult, f: &FunctionalResult, wall_s: f64) -> Self {
        let n = t.committed;
        let wall = wall_s.max(1e-9);
        let mut mix = f.instr_counts.fractions();
        mix.iter_mut().for_each(|v| *v = round_sig9(*v));
        MetricsReport {
            benchmark: benchmark.to_string(),
            model,
            error: None,
            cycles: t.cycles,
            instructions: n,
            cpi: round_sig9(t.cpi),
            mix,
            l1d_mpki: round_sig9(mpki(&t.cache, Level::L1D, n).unwrap_or(0.0)),
            l2_mpki: round_sig9(mpki(&t.cache, Level::L2, n).unwrap_or(0.0)),
            branch_acc: t.branch_accuracy().map(round_sig9),
            wall_s: round_sig9(wall),
            kips: round_sig9(n as f64 / (wall * 1000.0)),
            digest: f.digest(),
            stalls: t.stalls,
            exit_code: f.exit_code,
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn fraction(&self, c: InstrClass) -> f64 {
        self.mix[c.index()]
    }

    /// MemRead + MemWrite share.
    pub fn memory_fraction(&self) -> f64 {
        self.fraction(InstrClass::MemRead) + self.fraction(InstrClass::MemWrite)
    }
}

/// Everything one cell produced.
#[derive(Clone, Debug)]
pub struct CellRun {
    pub timing: TimingResult,
    pub functional: FunctionalResult,
    pub wall_s: f64,
}

/// Runs `workload` on one model with a fresh hierarchy.
pub fn run_model(workload: &Workload, model: ModelKind, config: &RunConfig, fault: Option<Fault>) -> Result<CellRun, CellError> {
    let mem = MemoryHierarchy::new(config.cache).map_err(|e| CellError::SimError { pc: None, message: e.to_string() })?;
    let (image, entry, limit) = (&workload.image, workload.entry, config.limit);
    let start = Instant::now();
    let (timing, functional) = match model {
        ModelKind::Atomic => simulate(image, entry, AtomicModel::new(mem), limit, fault),
        ModelKind::Minor => simulate(image, entry, MinorModel::new(config.minor.clone(), mem), limit, fault),
        ModelKind::O3 => simulate(image, entry, O3Model::new(config.o3.clone(), mem), limit, fault),
    }?;
    Ok(CellRun { timing, functional, wall_s: start.elapsed().as_secs_f64() })
}

/// Runs one cell, folding failures into the report.
pub fn run_cell(workload: &Workload, model: ModelKind, config: &RunConfig) -> MetricsReport {
    match run_model(workload, model, config, None) {
        Ok(r) => MetricsReport::from_run(&workload.name, model, &r.timing, &r.functional, r.wall_s),
        Err(e) => MetricsReport::failed(&workload.name, model, e),
    }
}

/// Runs every (benchmark, model) cell in parallel; the result is ordered by
/// benchmark then model as listed in the config.
pub fn run_matrix(config: &RunConfig) -> Result<Vec<MetricsReport>, HarnessError> {
    config.validate()?;
    let workloads: Vec<Result<Workload, CellError>> =
        config.benchmarks.par_iter().map(|b| resolve(b, config.seed)).collect();
    let cells: Vec<(usize, ModelKind)> =
        (0..workloads.len()).flat_map(|b| config.models.iter().map(move |&m| (b, m))).collect();
    Ok(cells
        .into_par_iter()
        .map(|(b, m)| match &workloads[b] {
            Ok(w) => run_cell(w, m, config),
            Err(e) => MetricsReport::failed(&config.benchmarks[b], m, e.clone()),
        })
        .collect())
}

/// Where two models' final states first disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    /// Byte offset into the digest blob (x regs, f regs, output region).
    pub offset: usize,
    /// Human-readable location, e.g. `f0 byte 1` or `output byte 12`.
    pub location: String,
    pub values: Vec<(ModelKind, Option<u8>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffVerdict {
    pub benchmark: String,
    pub pass: bool,
    pub digests: Vec<(ModelKind, String)>,
    pub divergence: Option<Divergence>,
}

fn locate(offset: usize) -> String {
    match offset {
        o if o < 256 => format!("x{} byte {}", o / 8, o % 8),
        o if o < 512 => format!("f{} byte {}", (o - 256) / 8, o % 8),
        o => format!("output byte {}", o - 512),
    }
}

/// Runs `benchmark` on each model and compares final-state digests.
/// `fault` corrupts one model's execution (for testing the checker itself).
pub fn differential(
    benchmark: &str,
    models: &[ModelKind],
    config: &RunConfig,
    fault: Option<(ModelKind, Fault)>,
) -> Result<DiffVerdict, HarnessError> {
    if models.len() < 2 {
        return Err(HarnessError::InvalidConfig("a differential needs at least two models".into()));
    }
    let cell_err = |model, error| HarnessError::Cell { benchmark: benchmark.to_string(), model, error };
    let workload = resolve(benchmark, config.seed).map_err(|e| cell_err(models[0], e))?;
    let runs: Vec<Result<CellRun, CellError>> = models
        .par_iter()
        .map(|&m| run_model(&workload, m, config, fault.filter(|(fm, _)| *fm == m).map(|(_, f)| f)))
        .collect();
    let mut blobs = Vec::new();
    let mut digests = Vec::new();
    for (&m, r) in models.iter().zip(runs) {
        let r = r.map_err(|e| cell_err(m, e))?;
        digests.push((m, r.functional.digest()));
        blobs.push(r.functional.final_state.blob());
    }
    let longest = blobs.iter().map(Vec::len).max().unwrap_or(0);
    let offset = (0..longest).find(|&i| blobs.iter().any(|b| b.get(i) != blobs[0].get(i)));
    let divergence = offset.map(|offset| Divergence {
        offset,
        location: locate(offset),
        values: models.iter().zip(&blobs).map(|(&m, b)| (m, b.get(offset).copied())).collect(),
    });
    Ok(DiffVerdict { benchmark: benchmark.to_string(), pass: divergence.is_none(), digests, divergence })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig { benchmarks: vec!["matmul16".into()], ..Default::default() }
    }

    #[test]
    fn matmul16_matrix_agrees() {
        let reports = run_matrix(&small()).unwrap();
        assert_eq!(reports.len(), 3);
        assert!(reports.iter().all(|r| r.ok() && r.kips > 0.0));
        assert!(reports.windows(2).all(|w| w[0].digest == w[1].digest));
        assert_eq!(reports.iter().map(|r| r.model).collect::<Vec<_>>(), ModelKind::ALL);
        let sum: f64 = reports[0].mix.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let cfg = RunConfig {
            benchmarks: vec!["matmul16".into(), "no_such_bench".into()],
            models: vec![ModelKind::Atomic],
            ..Default::default()
        };
        let r = run_matrix(&cfg).unwrap();
        assert!(r[0].ok());
        assert!(matches!(r[1].error, Some(CellError::CompileFailure { .. })));

        let tight = RunConfig { limit: 100, models: vec![ModelKind::Minor], ..small() };
        let r = run_matrix(&tight).unwrap();
        assert_eq!(r[0].error, Some(CellError::LimitExceeded { limit: 100 }));
    }

    #[test]
    fn differential_detects_injected_fault() {
        let cfg = small();
        let ok = differential("matmul16", &ModelKind::ALL, &cfg, None).unwrap();
        assert!(ok.pass && ok.divergence.is_none());
        // FMA #15 is the last term of C[0][0]: its flipped bit reaches memory unrounded.
        let bad = differential("matmul16", &ModelKind::ALL, &cfg, Some((ModelKind::O3, Fault::FlipFmaRounding { nth: 15 }))).unwrap();
        assert!(!bad.pass);
        let d = bad.divergence.unwrap();
        assert!(d.offset >= 512, "{}", d.location);
        assert_eq!(d.values[0].1, d.values[1].1);
        assert_ne!(d.values[0].1, d.values[2].1);
        assert!(matches!(differential("matmul16", &[ModelKind::Minor], &cfg, None), Err(HarnessError::InvalidConfig(_))));
    }
}
