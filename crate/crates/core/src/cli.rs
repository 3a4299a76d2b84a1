//! Command-line front end.
//!
//! Exit codes: 0 success, 1 error (or a failing corpus claim), 2 when most
//! verdicts of an analysis are inconclusive.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classifier::{Mode, Outcome, ProbeGrid};
use crate::config::{env_seed, AnalysisConfig};
use crate::error::{contract, Error, Result};
use crate::report::{analyze, glob_regex, run_corpus, AnalysisReport};
use crate::setmodel::corpus::NAMES;
use crate::setmodel::definition::SetDefinition;
use crate::setmodel::{corpus_entry, SetOracle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "conewright", version, about = "Tangent cones, densities and C1-manifold tests for subsets of R^n")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate cones and densities and run the classifiers.
    Analyze(AnalyzeArgs),
    /// Same as `analyze`, with the mode required.
    Classify(ClassifyArgs),
    /// Check every built-in example against its annotations.
    Corpus(CorpusArgs),
    /// List the built-in example sets.
    ListSets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    TwoCones,
    Density,
    Gluck,
    All,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::TwoCones => vec![Mode::TwoCones],
            ModeArg::Density => vec![Mode::Density],
            ModeArg::Gluck => vec![Mode::Gluck],
            ModeArg::All => Mode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Built-in set (`name` or `corpus:name`) or a set definition file.
    #[arg(long)]
    pub set: String,
    /// Analyze this single point, given as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "grid")]
    pub point: Option<String>,
    /// Probes per chart of the probe grid.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    pub mode: ModeArg,
    /// TOML (or `.json`) configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; convergence tables go next to it. Printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long)]
    pub set: String,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "grid")]
    pub point: Option<String>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl From<ClassifyArgs> for AnalyzeArgs {
    fn from(c: ClassifyArgs) -> Self {
        Self { set: c.set, point: c.point, grid: c.grid, mode: c.mode, config: c.config, seed: c.seed, out: c.out }
    }
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Shell-style glob on entry names.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the full corpus report (JSON) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Configuration with the seed taken from the flag, else the file, else
/// the environment, else the default.
pub fn resolve_config(path: Option<&Path>, seed: Option<u64>) -> Result<AnalysisConfig> {
    let (mut cfg, file_seed) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let has_seed = if p.extension().is_some_and(|e| e == "json") {
                serde_json::from_str::<serde_json::Value>(&text)
                    .map_err(|e| Error::Parse(e.to_string()))?
                    .get("seed")
                    .is_some()
            } else {
                text.parse::<toml::Table>().map_err(|e| Error::Parse(e.to_string()))?.contains_key("seed")
            };
            (AnalysisConfig::load(p)?, has_seed)
        }
        None => (AnalysisConfig::default(), false),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    } else if !file_seed {
        if let Some(s) = env_seed()? {
            cfg.seed = s;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A built-in set by name (optionally prefixed `corpus:`), or a definition file.
pub fn load_set(which: &str) -> Result<(SetOracle, String)> {
    let name = which.strip_prefix("corpus:").unwrap_or(which);
    if let Some(e) = corpus_entry(name) {
        return Ok((e.oracle, e.definition.digest()));
    }
    let path = Path::new(which);
    if which.starts_with("corpus:") || !path.exists() {
        return Err(contract(format!("unknown set {which:?}; see list-sets")));
    }
    let def = SetDefinition::load(path)?;
    Ok((def.build()?, def.digest()))
}

pub fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("malformed point {s:?}")))
        })
        .collect()
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<i32> {
    let mut cfg = resolve_config(a.config.as_deref(), a.seed)?;
    let (oracle, digest) = load_set(&a.set)?;
    let grid = match (&a.point, a.grid) {
        (Some(p), _) => ProbeGrid::from_points(&oracle, vec![parse_point(p)?], &cfg.classifier)?,
        (None, Some(n)) => {
            if n == 0 {
                return Err(contract("--grid needs at least one probe per chart"));
            }
            cfg.classifier.probes_per_chart = Some(n);
            ProbeGrid::from_oracle(&oracle, &cfg.classifier)?
        }
        (None, None) => ProbeGrid::from_oracle(&oracle, &cfg.classifier)?,
    };
    let report = analyze(&oracle, &digest, &grid, &cfg, &a.mode.modes())?;
    match &a.out {
        Some(out) => {
            let tables = report.write(out)?;
            print_summary(&report, out, tables.len());
        }
        None => println!("{}", report.to_json()?),
    }
    Ok(if report.inconclusive_dominated() { EXIT_INCONCLUSIVE } else { EXIT_OK })
}

fn print_summary(report: &AnalysisReport, out: &Path, tables: usize) {
    let mut so = std::io::stdout().lock();
    let _ = writeln!(so, "{} ({} probes) -> {} and {tables} tables", report.set.name, report.probes.len(), out.display());
    for v in &report.verdicts {
        let detail = match &v.outcome {
            Outcome::Inconclusive { reason, .. } => format!(": {reason}"),
            Outcome::NotC1 { witness } => format!(" at {:?}", witness.point()),
            Outcome::C1Manifold { .. } => String::new(),
        };
        let _ = writeln!(so, "  {:<10} {}{detail}", v.mode.name(), v.outcome.label());
    }
}

fn cmd_corpus(a: CorpusArgs) -> Result<i32> {
    let cfg = resolve_config(a.config.as_deref(), a.seed)?;
    let filter = a.filter.as_deref().map(glob_regex).transpose()?;
    let report = run_corpus(filter.as_ref(), &cfg)?;
    print!("{}", report.table());
    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(out, text + "\n")?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_list_sets() -> Result<i32> {
    for name in NAMES {
        let e = corpus_entry(name).expect("corpus name");
        println!(
            "{:<14} R^{} dim {}  {}",
            e.name,
            e.oracle.ambient_dim(),
            e.oracle.intrinsic_dim(),
            e.description
        );
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Classify(c) => cmd_analyze(c.into()),
        Command::Corpus(a) => cmd_corpus(a),
        Command::ListSets => cmd_list_sets(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse() {
        assert_eq!(parse_point("0, -1.5,2e-3").unwrap(), vec![0.0, -1.5, 2e-3]);
        assert!(parse_point("1,,2").is_err());
        assert!(parse_point("1,nan").is_err());
    }

    #[test]
    fn set_lookup() {
        assert_eq!(load_set("corpus:circle").unwrap().0.name(), "circle");
        assert_eq!(load_set("line").unwrap().0.ambient_dim(), 2);
        assert!(load_set("corpus:no_such").is_err());
        assert!(load_set("no_such_file.toml").is_err());
    }

    #[test]
    fn seed_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("with.toml");
        std::fs::write(&with, "seed = 5\n").unwrap();
        let without = dir.path().join("without.toml");
        std::fs::write(&without, "[cones]\ntiers = 6\n").unwrap();
        assert_eq!(resolve_config(Some(&with), Some(9)).unwrap().seed, 9);
        assert_eq!(resolve_config(Some(&with), None).unwrap().seed, 5);
        assert_eq!(resolve_config(Some(&without), Some(3)).unwrap().cones.tiers, 6);
    }
}
