use super::{CellError, MetricsReport, ModelKind};
use crate::isa::InstrClass;
use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

pub const CSV_HEADER: &str = "benchmark,model,cycles,instructions,cpi,f_IntAlu,f_IntMult,f_IntDiv,f_MemRead,f_MemWrite,f_FloatAdd,f_FloatMult,f_FloatMultAcc,f_FloatDiv,f_FloatMisc,f_Branch,f_Jump,f_Other,l1d_mpki,l2_mpki,branch_acc,wall_s,kips,digest";

/// Prefix of the digest column for failed cells; the rest is the error as JSON.
const ERROR_PREFIX: &str = "error:";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no reports to render")]
    EmptyInput,
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed report: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            o => Err(format!("unknown format `{o}` (expected csv, json or markdown)")),
        }
    }
}

/// Fixed-point decimal with 9 significant digits.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// The value [`fmt_sig9`] text parses back to.
pub fn round_sig9(x: f64) -> f64 {
    fmt_sig9(x).parse().unwrap_or(x)
}

fn csv_row(r: &MetricsReport) -> Vec<String> {
    let mut row = vec![r.benchmark.clone(), r.model.to_string(), r.cycles.to_string(), r.instructions.to_string(), fmt_sig9(r.cpi)];
    row.extend(r.mix.iter().map(|&v| fmt_sig9(v)));
    row.push(fmt_sig9(r.l1d_mpki));
    row.push(fmt_sig9(r.l2_mpki));
    row.push(r.branch_acc.map(fmt_sig9).unwrap_or_default());
    row.push(fmt_sig9(r.wall_s));
    row.push(fmt_sig9(r.kips));
    row.push(match &r.error {
        Some(e) => format!("{ERROR_PREFIX}{}", serde_json::to_string(e).expect("errors serialize")),
        None => r.digest.clone(),
    });
    row
}

fn to_csv(reports: &[MetricsReport]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for r in reports {
        w.write_record(csv_row(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Inverse of the CSV rendering. Stall breakdowns and exit codes are not
/// part of the CSV schema and come back as defaults.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsReport>, ReportError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers().map_err(|e| ReportError::Parse(e.to_string()))?.iter().map(String::from).collect();
    if header.join(",") != CSV_HEADER {
        return Err(ReportError::Parse(format!("unexpected header `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| ReportError::Parse(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64, ReportError> {
            field(i).parse().map_err(|_| ReportError::Parse(format!("column {} = `{}`", i + 1, field(i))))
        };
        let int = |i: usize| -> Result<u64, ReportError> {
            field(i).parse().map_err(|_| ReportError::Parse(format!("column {} = `{}`", i + 1, field(i))))
        };
        let model: ModelKind = field(1).parse().map_err(ReportError::Parse)?;
        let mut r = MetricsReport::failed(field(0), model, CellError::CompileFailure { message: String::new() });
        r.error = None;
        r.cycles = int(2)?;
        r.instructions = int(3)?;
        r.cpi = num(4)?;
        for k in 0..InstrClass::COUNT {
            r.mix[k] = num(5 + k)?;
        }
        let base = 5 + InstrClass::COUNT;
        r.l1d_mpki = num(base)?;
        r.l2_mpki = num(base + 1)?;
        r.branch_acc = if field(base + 2).is_empty() { None } else { Some(num(base + 2)?) };
        r.wall_s = num(base + 3)?;
        r.kips = num(base + 4)?;
        let digest = field(base + 5);
        match digest.strip_prefix(ERROR_PREFIX) {
            Some(json) => r.error = Some(serde_json::from_str(json).map_err(|e| ReportError::Parse(e.to_string()))?),
            None => r.digest = digest.to_string(),
        }
        out.push(r);
    }
    Ok(out)
}

fn to_markdown(reports: &[MetricsReport]) -> String {
    let mut s = String::from("# Results\n\n## Metrics\n\n");
    s.push_str("| benchmark | model | cycles | instructions | CPI | mem frac | L1D MPKI | L2 MPKI | branch acc | wall s | KIPS | status |\n");
    s.push_str("|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---|\n");
    for r in reports {
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => e.to_string().replace('|', "\\|"),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.benchmark,
            r.model,
            r.cycles,
            r.instructions,
            fmt_sig9(r.cpi),
            fmt_sig9(r.memory_fraction()),
            fmt_sig9(r.l1d_mpki),
            fmt_sig9(r.l2_mpki),
            r.branch_acc.map(fmt_sig9).unwrap_or_else(|| "—".into()),
            fmt_sig9(r.wall_s),
            fmt_sig9(r.kips),
            status
        );
    }

    // Speedup over the in-order model, one row per benchmark.
    let mut order: Vec<&str> = Vec::new();
    let mut cycles: BTreeMap<(&str, ModelKind), u64> = BTreeMap::new();
    let mut models: Vec<ModelKind> = Vec::new();
    for r in reports {
        if !order.contains(&r.benchmark.as_str()) {
            order.push(&r.benchmark);
        }
        if !models.contains(&r.model) {
            models.push(r.model);
        }
        if r.ok() && r.cycles > 0 {
            cycles.insert((&r.benchmark, r.model), r.cycles);
        }
    }
    models.sort();
    s.push_str("\n## Speedup (normalized to minor)\n\n| benchmark |");
    for m in &models {
        let _ = write!(s, " {m} |");
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|".repeat(models.len()));
    s.push('\n');
    for b in &order {
        let _ = write!(s, "| {b} |");
        for &m in &models {
            let cell = match (cycles.get(&(*b, ModelKind::Minor)), cycles.get(&(*b, m))) {
                (Some(&minor), Some(&c)) => fmt_sig9(minor as f64 / c as f64),
                _ => "n/a".into(),
            };
            let _ = write!(s, " {cell} |");
        }
        s.push('\n');
    }

    s.push_str("\n## Instruction mix (fractions)\n\n| benchmark | model |");
    for c in InstrClass::ALL {
        let _ = write!(s, " {} |", c.name());
    }
    s.push_str("\n|---|---|");
    s.push_str(&"---:|".repeat(InstrClass::COUNT));
    s.push('\n');
    for r in reports.iter().filter(|r| r.ok()) {
        let _ = write!(s, "| {} | {} |", r.benchmark, r.model);
        for v in r.mix {
            let _ = write!(s, " {:.4} |", v);
        }
        s.push('\n');
    }
    s
}

pub fn render(reports: &[MetricsReport], format: ReportFormat) -> Result<String, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    Ok(match format {
        ReportFormat::Csv => to_csv(reports),
        ReportFormat::Json => serde_json::to_string_pretty(reports).expect("reports serialize") + "\n",
        ReportFormat::Markdown => to_markdown(reports),
    })
}

/// Writes `results.{csv,json,md}` into `dir`.
pub fn write_reports(dir: &Path, reports: &[MetricsReport]) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for f in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown] {
        let p = dir.join(format!("results.{}", f.extension()));
        std::fs::write(&p, render(reports, f)?)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Reads reports back from `dir`, preferring the JSON file (which also
/// carries stall breakdowns).
pub fn load_reports(dir: &Path) -> Result<Vec<MetricsReport>, ReportError> {
    let json = dir.join("results.json");
    if json.exists() {
        let text = std::fs::read_to_string(json)?;
        return serde_json::from_str(&text).map_err(|e| ReportError::Parse(e.to_string()));
    }
    parse_csv(&std::fs::read_to_string(dir.join("results.csv"))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(model: ModelKind, cycles: u64) -> MetricsReport {
        let mut r = MetricsReport::failed("k", model, CellError::LimitExceeded { limit: 1 });
        r.error = None;
        r.cycles = cycles;
        r.instructions = 1000;
        r.cpi = round_sig9(cycles as f64 / 1000.0);
        r.mix[0] = round_sig9(2.0 / 3.0);
        r.mix[3] = round_sig9(1.0 / 3.0);
        r.digest = "ab".repeat(32);
        r
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456.789123), "123456.789");
        assert_eq!(fmt_sig9(0.000123456789012), "0.000123456789");
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(round_sig9(round_sig9(2.0 / 3.0)), round_sig9(2.0 / 3.0));
    }

    #[test]
    fn csv_header_and_rows() {
        let text = render(&[sample(ModelKind::Minor, 1500)], ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(parse_csv(&text).unwrap(), vec![sample(ModelKind::Minor, 1500)]);
    }

    #[test]
    fn failures_survive_csv() {
        let f = MetricsReport::failed("bad", ModelKind::O3, CellError::SimError { pc: Some(0x10004), message: "x, \"y\"".into() });
        let back = parse_csv(&render(&[f.clone()], ReportFormat::Csv).unwrap()).unwrap();
        assert_eq!(back, vec![f]);
    }

    #[test]
    fn markdown_speedup_is_minor_over_model() {
        let md = render(&[sample(ModelKind::Minor, 3000), sample(ModelKind::O3, 1200)], ReportFormat::Markdown).unwrap();
        let row = md.lines().skip_while(|l| !l.starts_with("## Speedup")).find(|l| l.starts_with("| k |")).unwrap();
        let cells: Vec<&str> = row.split('|').map(str::trim).collect();
        assert_eq!(cells[2], "1.00000000");
        assert_eq!(cells[3].parse::<f64>().unwrap(), 2.5);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(render(&[], ReportFormat::Json), Err(ReportError::EmptyInput)));
    }
}
