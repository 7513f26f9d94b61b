//! Batch runner for the example suites: parse a [`RunSpec`], run the suite,
//! write reports.
//!
//! Exit status: 0 when every verdict matches its expected polarity, 1 when one
//! deviates, 2 for configuration errors, 3 for runtime errors.

pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use skewprod_core::suite::{calibrate, run_suite, Calibration, SuiteOutcome};

pub use config::{parse_config, Cli, Command, RunArgs, RunSpec};
pub use error::{CliError, ConfigError, RunError};

#[derive(Debug)]
pub struct RunOutcome {
    pub outcome: SuiteOutcome,
    pub written: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.outcome.all_as_expected() {
            0
        } else {
            1
        }
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs the suite and writes the artifacts.
pub fn execute(spec: &RunSpec) -> Result<RunOutcome, CliError> {
    report::check_dump_size(spec)?;
    let cfg = spec.suite_config();
    let outcome = in_pool(spec.threads, || run_suite(spec.suite, &cfg))?.map_err(RunError::from)?;
    let mut written = report::write_reports(spec, &outcome)?;
    if spec.dump_paths {
        written.extend(in_pool(spec.threads, || report::dump_paths(spec))??);
    }
    Ok(RunOutcome { outcome, written })
}

/// Seeds `spec.seed .. spec.seed + seeds`; writes `calibration.json`.
pub fn execute_calibration(spec: &RunSpec, seeds: usize) -> Result<Calibration, CliError> {
    let cfg = spec.suite_config();
    let cal = in_pool(spec.threads, || calibrate(spec.suite, &cfg, spec.seed, seeds))?.map_err(RunError::from)?;
    std::fs::create_dir_all(&spec.out).map_err(|source| RunError::Io {
        path: spec.out.clone(),
        source,
    })?;
    let path = spec.out.join("calibration.json");
    let mut json = serde_json::to_string_pretty(&cal).expect("calibration serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(|source| RunError::Io { path, source })?;
    Ok(cal)
}

pub fn calibration_table(cal: &Calibration) -> String {
    let width = cal.rows.iter().map(|r| r.name.len()).max().unwrap_or(4);
    let mut s = format!("{} seeds, alpha={}\n", cal.seeds, cal.alpha);
    for r in &cal.rows {
        s.push_str(&format!(
            "{:width$}  {:>4}/{:<4}  rate={:.4}  {}\n",
            r.name,
            r.rejections,
            cal.seeds,
            r.rate,
            if r.within_tolerance { "ok" } else { "OUT OF RANGE" }
        ));
    }
    s
}

/// Parses nothing; dispatches an already-parsed command and returns the exit
/// status, printing results and errors.
pub fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(args) => parse_config(&args).map_err(CliError::from).and_then(|spec| {
            let run = execute(&spec)?;
            print!("{}", report::summary_table(&spec, &run.outcome));
            Ok(run.exit_code())
        }),
        Command::Calibrate { run, seeds } => parse_config(&run).map_err(CliError::from).and_then(|spec| {
            let cal = execute_calibration(&spec, seeds)?;
            print!("{}", calibration_table(&cal));
            Ok(if cal.rows.iter().all(|r| r.within_tolerance) {
                0
            } else {
                1
            })
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
