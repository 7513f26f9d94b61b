//! Run configuration: command-line flags over an optional `key=value` file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use skewprod_core::scenarios::Scenario;
use skewprod_core::sde::Grid;
use skewprod_core::stats::DEFAULT_ALPHA;
use skewprod_core::suite::{Suite, SuiteConfig};

use crate::error::ConfigError;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_PATHS: usize = 512;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "skewprod",
    version,
    about = "Simulate, decompose and test the skew-product example suites"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a suite and write its reports.
    Run(RunArgs),
    /// Rejection rates of the null-true tests over many seeds.
    Calibrate {
        #[command(flatten)]
        run: RunArgs,
        /// Number of consecutive seeds, starting at --seed.
        #[arg(long, default_value_t = 200)]
        seeds: usize,
    },
}

/// Every value is a string so that malformed numbers are reported with their
/// key, the same way as for the config file.
#[derive(Debug, Default, Clone, Args)]
pub struct RunArgs {
    /// Flat `key=value` file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// example1, example2, example3 or all.
    #[arg(long)]
    pub suite: Option<String>,
    /// planar_bm, rotated_bm or matrix_diffusion; selects the matching suite.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub horizon: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub paths: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Report formats, comma separated: json, csv.
    #[arg(long)]
    pub format: Option<String>,
    /// Write one CSV trace per simulated path.
    #[arg(long)]
    pub dump_paths: bool,
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long, allow_hyphen_values = true)]
    pub threads: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// The single scenario of the suite, or `None` for `all`.
    pub scenario: Option<Scenario>,
    pub suite: Suite,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub alpha: f64,
    pub out: PathBuf,
    pub formats: Formats,
    pub dump_paths: bool,
    /// `None` uses rayon's default pool.
    pub threads: Option<usize>,
}

impl RunSpec {
    pub fn grid(&self) -> Grid {
        Grid::from_horizon(self.dt, self.horizon).expect("validated in parse_config")
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            alpha: self.alpha,
            ..SuiteConfig::new(self.grid(), self.n_paths, self.seed)
        }
    }
}

const KEYS: [&str; 11] = [
    "suite",
    "scenario",
    "dt",
    "horizon",
    "paths",
    "seed",
    "alpha",
    "out",
    "format",
    "dump_paths",
    "threads",
];

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let k = k.trim().replace('-', "_");
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey(k));
        }
        pairs.push((k, v.trim().to_string()));
    }
    Ok(pairs)
}

fn numeric<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidNumeric {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
        }),
    }
}

/// Resolves flags and config file into a validated [`RunSpec`]. Flags take
/// precedence over file values; anything unset falls back to the defaults.
pub fn parse_config(args: &RunArgs) -> Result<RunSpec, ConfigError> {
    let mut pairs = match &args.config {
        Some(path) => read_config_file(path)?,
        None => Vec::new(),
    };
    let flags = [
        ("suite", &args.suite),
        ("scenario", &args.scenario),
        ("dt", &args.dt),
        ("horizon", &args.horizon),
        ("paths", &args.paths),
        ("seed", &args.seed),
        ("alpha", &args.alpha),
        ("out", &args.out),
        ("format", &args.format),
        ("threads", &args.threads),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            pairs.push((k.to_string(), v.clone()));
        }
    }
    if args.dump_paths {
        pairs.push(("dump_paths".into(), "true".into()));
    }
    resolve(&pairs)
}

/// Later pairs override earlier ones.
pub fn resolve(pairs: &[(String, String)]) -> Result<RunSpec, ConfigError> {
    let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());

    let scenario = get("scenario")
        .map(|s| s.parse::<Scenario>().map_err(|e| ConfigError::UnknownScenario(e.0)))
        .transpose()?;
    let suite = get("suite")
        .map(|s| s.parse::<Suite>().map_err(|_| ConfigError::UnknownSuite(s.to_string())))
        .transpose()?;
    let (suite, scenario) = match (suite, scenario) {
        (None, None) => (Suite::All, None),
        (None, Some(sc)) => (Suite::for_scenario(sc), Some(sc)),
        (Some(Suite::All), Some(sc)) => (Suite::for_scenario(sc), Some(sc)),
        (Some(su), None) => (su, su.scenarios().first().copied().filter(|_| su != Suite::All)),
        (Some(su), Some(sc)) => {
            if Suite::for_scenario(sc) != su {
                return Err(ConfigError::Conflict(format!("suite {su} does not run scenario {sc}")));
            }
            (su, Some(sc))
        }
    };

    let dt = get("dt").map_or(Ok(DEFAULT_DT), |v| numeric("dt", v))?;
    let horizon = get("horizon").map_or(Ok(DEFAULT_HORIZON), |v| numeric("horizon", v))?;
    let n_paths = get("paths").map_or(Ok(DEFAULT_PATHS), |v| numeric("paths", v))?;
    let seed = get("seed").map_or(Ok(DEFAULT_SEED), |v| numeric("seed", v))?;
    let alpha = get("alpha").map_or(Ok(DEFAULT_ALPHA), |v| numeric("alpha", v))?;
    let threads = get("threads").map(|v| numeric::<usize>("threads", v)).transpose()?;
    let dump_paths = get("dump_paths").map_or(Ok(false), |v| boolean("dump_paths", v))?;

    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ConfigError::InvalidValue {
            key: "dt".into(),
            value: dt.to_string(),
        });
    }
    if !(horizon >= dt && horizon.is_finite()) {
        return Err(ConfigError::InvalidValue {
            key: "horizon".into(),
            value: horizon.to_string(),
        });
    }
    if n_paths == 0 {
        return Err(ConfigError::InvalidValue {
            key: "paths".into(),
            value: "0".into(),
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConfigError::InvalidValue {
            key: "alpha".into(),
            value: alpha.to_string(),
        });
    }
    if threads == Some(0) {
        return Err(ConfigError::InvalidValue {
            key: "threads".into(),
            value: "0".into(),
        });
    }

    let mut formats = Formats {
        json: false,
        csv: false,
    };
    for f in get("format").unwrap_or("json").split(',').map(str::trim) {
        match f {
            "json" => formats.json = true,
            "csv" => formats.csv = true,
            _ => {
                return Err(ConfigError::InvalidValue {
                    key: "format".into(),
                    value: f.to_string(),
                })
            }
        }
    }

    Ok(RunSpec {
        scenario,
        suite,
        dt,
        horizon,
        n_paths,
        seed,
        alpha,
        out: PathBuf::from(get("out").unwrap_or("skewprod-out")),
        formats,
        dump_paths,
        threads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(flags: &[&str]) -> RunArgs {
        let mut argv = vec!["skewprod", "run"];
        argv.extend_from_slice(flags);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Run(a) => a,
            Command::Calibrate { .. } => unreachable!(),
        }
    }

    #[test]
    fn suite_selects_scenario_with_defaults() {
        let s = parse_config(&args(&["--suite", "example3"])).unwrap();
        assert_eq!(s.scenario, Some(Scenario::MatrixDiffusion));
        assert_eq!(s.suite, Suite::Example3);
        assert_eq!((s.dt, s.horizon, s.n_paths, s.seed), (1e-3, 1.0, 512, 42));
        assert_eq!(s.grid().n_steps(), 1000);
    }

    #[test]
    fn flags_override_defaults() {
        let s = parse_config(&args(&["--suite", "example1", "--dt", "1e-4", "--paths", "2048"])).unwrap();
        assert_eq!(s.scenario, Some(Scenario::PlanarBm));
        assert_eq!(s.dt, 1e-4);
        assert_eq!(s.n_paths, 2048);
        assert_eq!(s.grid().n_steps(), 10_000);
    }

    #[test]
    fn flag_beats_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# test\nseed = 7\nsuite=example2\n\n").unwrap();
        let path = path.to_str().unwrap();
        assert_eq!(parse_config(&args(&["--config", path])).unwrap().seed, 7);
        let s = parse_config(&args(&["--config", path, "--seed", "9"])).unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.suite, Suite::Example2);
    }

    #[test]
    fn errors_name_the_key() {
        assert!(matches!(
            parse_config(&args(&["--scenario", "brownian_sheet"])),
            Err(ConfigError::UnknownScenario(s)) if s == "brownian_sheet"
        ));
        assert!(matches!(
            parse_config(&args(&["--dt", "fast"])),
            Err(ConfigError::InvalidNumeric { key, .. }) if key == "dt"
        ));
        assert!(matches!(
            parse_config(&args(&["--paths", "-3"])),
            Err(ConfigError::InvalidNumeric { key, .. }) if key == "paths"
        ));
        assert!(matches!(
            parse_config(&args(&["--dt", "0"])),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            parse_config(&args(&["--dt", "0.5", "--horizon", "0.1"])),
            Err(ConfigError::InvalidValue { key, .. }) if key == "horizon"
        ));
        assert!(matches!(
            parse_config(&args(&["--suite", "example1", "--scenario", "matrix_diffusion"])),
            Err(ConfigError::Conflict(_))
        ));
        assert!(matches!(
            parse_config(&args(&["--format", "xml"])),
            Err(ConfigError::InvalidValue { .. })
        ));
    }

    #[test]
    fn file_syntax_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        fs::write(&path, "seed 7\n").unwrap();
        assert!(matches!(read_config_file(&path), Err(ConfigError::Syntax { line: 1 })));
        fs::write(&path, "colour=blue\n").unwrap();
        assert!(matches!(read_config_file(&path), Err(ConfigError::UnknownKey(_))));
    }

    #[test]
    fn scenario_alone_and_formats() {
        let s = parse_config(&args(&[
            "--scenario",
            "rotated_bm",
            "--format",
            "json,csv",
            "--threads",
            "1",
        ]))
        .unwrap();
        assert_eq!(s.suite, Suite::Example2);
        assert_eq!(s.formats, Formats { json: true, csv: true });
        assert_eq!(s.threads, Some(1));
        let all = parse_config(&args(&[])).unwrap();
        assert_eq!((all.suite, all.scenario), (Suite::All, None));
    }
}
