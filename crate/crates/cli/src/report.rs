//! On-disk artifacts: `report.json`, `report.csv`, `summary.txt` and the
//! optional per-path traces.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use skewprod_core::scenarios::{planar_bm, rotated_bm, Scenario, ScenarioConfig};
use skewprod_core::sde::{SamplePath, State};
use skewprod_core::stats::Verdict;
use skewprod_core::suite::{simulate_matrix, Expected, SuiteEntry, SuiteOutcome};

use crate::config::RunSpec;
use crate::error::{ConfigError, RunError};

pub const SCHEMA_VERSION: &str = "skewprod-report/1";

/// Estimated bytes above which `--dump-paths` refuses to run.
pub const DUMP_LIMIT_BYTES: u64 = 1 << 30;

#[derive(Debug, Serialize)]
pub struct ReportFile<'a> {
    pub schema_version: &'static str,
    pub suite: String,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub alpha: f64,
    pub all_as_expected: bool,
    pub reports: Vec<ReportRow<'a>>,
}

#[derive(Debug, Serialize)]
pub struct ReportRow<'a> {
    pub name: &'a str,
    pub statistic: f64,
    pub null_scale: f64,
    pub z_score: f64,
    pub p_value: f64,
    pub verdict: Verdict,
    pub expected: Expected,
    pub tolerance: f64,
}

impl<'a> From<&'a SuiteEntry> for ReportRow<'a> {
    fn from(e: &'a SuiteEntry) -> Self {
        let r = &e.report;
        ReportRow {
            name: &r.name,
            statistic: r.statistic,
            null_scale: r.null_scale,
            z_score: r.z_score,
            p_value: r.p_value,
            verdict: r.verdict,
            expected: e.expected,
            tolerance: r.tolerance,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn report_json(spec: &RunSpec, outcome: &SuiteOutcome) -> String {
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        suite: spec.suite.to_string(),
        dt: spec.dt,
        horizon: spec.horizon,
        n_paths: spec.n_paths,
        seed: spec.seed,
        alpha: spec.alpha,
        all_as_expected: outcome.all_as_expected(),
        reports: outcome.entries.iter().map(ReportRow::from).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("report serializes");
    s.push('\n');
    s
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
    }
}

fn expected_str(e: Expected) -> &'static str {
    match e {
        Expected::Pass => "pass",
        Expected::Fail => "fail",
        Expected::Any => "any",
    }
}

pub fn report_csv(outcome: &SuiteOutcome) -> String {
    let mut s = String::from("name,statistic,null_scale,z_score,p_value,verdict,expected,tolerance\n");
    for e in &outcome.entries {
        let r = &e.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.name,
            r.statistic,
            r.null_scale,
            r.z_score,
            r.p_value,
            verdict_str(r.verdict),
            expected_str(e.expected),
            r.tolerance
        );
    }
    s
}

pub fn summary_table(spec: &RunSpec, outcome: &SuiteOutcome) -> String {
    let width = outcome
        .entries
        .iter()
        .map(|e| e.report.name.len())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "suite {}  dt={}  horizon={}  paths={}  seed={}  alpha={}",
        spec.suite, spec.dt, spec.horizon, spec.n_paths, spec.seed, spec.alpha
    );
    let _ = writeln!(
        s,
        "{:width$}  {:>12}  {:>9}  {:>8}  {:>7}  {:>8}",
        "test", "statistic", "z", "p", "verdict", "expected"
    );
    for e in &outcome.entries {
        let r = &e.report;
        let _ = writeln!(
            s,
            "{:width$}  {:>12.5e}  {:>9.3}  {:>8.4}  {:>7}  {:>8}{}",
            r.name,
            r.statistic,
            r.z_score,
            r.p_value,
            verdict_str(r.verdict),
            expected_str(e.expected),
            if e.as_expected() { "" } else { "  UNEXPECTED" }
        );
    }
    let deviations = outcome.entries.iter().filter(|e| !e.as_expected()).count();
    let _ = writeln!(s, "{} tests, {} unexpected", outcome.entries.len(), deviations);
    s
}

/// Writes the reports selected in `spec.formats` plus `summary.txt`, and
/// returns the paths written.
pub fn write_reports(spec: &RunSpec, outcome: &SuiteOutcome) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(&spec.out).map_err(io_err(&spec.out))?;
    let mut written = Vec::new();
    if spec.formats.json {
        let p = spec.out.join("report.json");
        write_file(&p, report_json(spec, outcome).as_bytes())?;
        written.push(p);
    }
    if spec.formats.csv {
        let p = spec.out.join("report.csv");
        write_file(&p, report_csv(outcome).as_bytes())?;
        written.push(p);
    }
    let p = spec.out.join("summary.txt");
    write_file(&p, summary_table(spec, outcome).as_bytes())?;
    written.push(p);
    Ok(written)
}

fn scenarios(spec: &RunSpec) -> Vec<Scenario> {
    spec.scenario.map_or_else(|| spec.suite.scenarios(), |s| vec![s])
}

/// Rough size of the trace files: ~24 bytes per printed number.
pub fn dump_size_estimate(spec: &RunSpec) -> u64 {
    let rows = (spec.grid().len() * spec.n_paths) as u64;
    scenarios(spec)
        .iter()
        .map(|s| {
            let cols = match s {
                Scenario::MatrixDiffusion => 5,
                _ => 3,
            };
            rows * cols * 24
        })
        .sum()
}

pub fn check_dump_size(spec: &RunSpec) -> Result<(), ConfigError> {
    let bytes = dump_size_estimate(spec);
    if spec.dump_paths && bytes > DUMP_LIMIT_BYTES {
        return Err(ConfigError::DumpTooLarge {
            bytes,
            limit: DUMP_LIMIT_BYTES,
        });
    }
    Ok(())
}

fn write_trace<S: State>(path: &Path, header: &str, p: &SamplePath<S>) -> Result<(), RunError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    let mut body = String::with_capacity(64 * p.values.len());
    body.push_str(header);
    body.push('\n');
    for (k, v) in p.values.iter().enumerate() {
        let _ = write!(body, "{}", p.grid.time(k));
        for x in v.flat() {
            let _ = write!(body, ",{x}");
        }
        body.push('\n');
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// One CSV per path under `out/paths/<scenario>/`. Columns are `time` then
/// the state entries in row-major order: `x1,x2` for points and
/// `x11,x12,x21,x22` for matrices. The paths are re-simulated from the same
/// seeds the suite used.
pub fn dump_paths(spec: &RunSpec) -> Result<Vec<PathBuf>, RunError> {
    let mut dirs = Vec::new();
    for s in scenarios(spec) {
        let dir = spec.out.join("paths").join(s.name());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let cfg = ScenarioConfig::new(s, spec.grid(), spec.n_paths, spec.seed);
        let file = |i: usize| dir.join(format!("path_{i:05}.csv"));
        match s {
            Scenario::PlanarBm | Scenario::RotatedBm => {
                let paths = if s == Scenario::PlanarBm {
                    planar_bm(&cfg)?
                } else {
                    rotated_bm(&cfg)?
                };
                for (i, p) in paths.iter().enumerate() {
                    write_trace(&file(i), "time,x1,x2", p)?;
                }
            }
            Scenario::MatrixDiffusion => {
                for (i, p) in simulate_matrix(&cfg)?.paths.iter().enumerate() {
                    write_trace(&file(i), "time,x11,x12,x21,x22", p)?;
                }
            }
        }
        dirs.push(dir);
    }
    Ok(dirs)
}
