//! Analysis reports, convergence tables, and the corpus regression runner.
//!
//! A report carries everything needed to rerun it: the full configuration
//! (seed included), the set's digest, and every per-probe estimate the
//! verdicts rest on. Timing lives in one field, `wall_time_secs`, so two
//! runs can be compared with [`AnalysisReport::numeric_fingerprint`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    assemble_bundle, check_openness, density_from, gluck_from, probe_cones, two_cones_from, BundleReport,
    InjectivityCheck, Mode, Outcome, ProbeGrid, Verdict,
};
use crate::cones::{cones_coincide, persistent_excess, ConeEstimate, ConeKind};
use crate::config::AnalysisConfig;
use crate::density::{estimate_density, DensityEstimate, DensityKind};
use crate::error::{Error, Result};
use crate::grassmann::{grassmann_delta, Subspace};
use crate::rng::derive_seed;
use crate::setmodel::corpus::{Annotation, Claim, ExpectedOutcome, Source};
use crate::setmodel::{corpus, CorpusEntry, SetOracle};
use crate::vecmath::dist;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetHeader {
    pub name: String,
    /// Digest of the set definition; empty when the set has no file form.
    pub digest: String,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    pub scale: f64,
    pub note: String,
}

impl SetHeader {
    pub fn new(oracle: &SetOracle, digest: impl Into<String>) -> Self {
        Self {
            name: oracle.name().to_string(),
            digest: digest.into(),
            ambient_dim: oracle.ambient_dim(),
            intrinsic_dim: oracle.intrinsic_dim(),
            scale: oracle.scale(),
            note: oracle.note().to_string(),
        }
    }
}

/// Bundle statistics without the per-probe estimates, which the report
/// keeps with each probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub converged_fraction: f64,
    pub trivial: bool,
    pub dim: Option<usize>,
    #[serde(with = "crate::nonfinite")]
    pub continuity_modulus: f64,
    pub max_adjacent_delta: f64,
    pub continuous: bool,
    pub dim_semicontinuity_violations: Vec<(usize, usize)>,
    pub non_subspace: Vec<usize>,
    pub off_dimension: Vec<usize>,
}

impl From<&BundleReport> for BundleSummary {
    fn from(b: &BundleReport) -> Self {
        Self {
            converged_fraction: b.converged_fraction,
            trivial: b.trivial,
            dim: b.dim,
            continuity_modulus: b.continuity_modulus,
            max_adjacent_delta: b.max_adjacent_delta,
            continuous: b.continuous,
            dim_semicontinuity_violations: b.dim_semicontinuity_violations.clone(),
            non_subspace: b.non_subspace.clone(),
            off_dimension: b.off_dimension.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub index: usize,
    pub label: Option<String>,
    pub point: Vec<f64>,
    pub tangent: ConeEstimate,
    pub paratangent: Option<ConeEstimate>,
    /// `θ` with `k` the dimension of the fitted tangent space (the declared
    /// dimension when there is none).
    pub density: Option<DensityEstimate>,
    /// `Θ` with `k = dim tg_x X`; computed at labelled probes only.
    pub lower_density: Option<DensityEstimate>,
    pub injectivity: Option<InjectivityCheck>,
    /// Projection onto the tangent space covers a neighbourhood; labelled probes only.
    pub open: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool_version: String,
    pub set: SetHeader,
    pub config: AnalysisConfig,
    pub modes: Vec<Mode>,
    pub eta: f64,
    pub adjacency: Vec<(usize, usize)>,
    pub probes: Vec<ProbeReport>,
    pub bundle: BundleSummary,
    pub verdicts: Vec<Verdict>,
    /// Declared, unverified hypotheses the verdicts depend on.
    pub caveats: Vec<String>,
    pub wall_time_secs: f64,
}

fn caveats(oracle: &SetOracle) -> Vec<String> {
    let a = oracle.assumptions();
    let mut out = vec![format!(
        "declared, not verified: connected = {}, locally closed = {}, definable = {}",
        a.connected, a.locally_closed, a.definable
    )];
    if !a.connected || !a.locally_closed || !a.definable {
        out.push("the manifold criteria assume a connected, locally closed, definable set; verdicts on this set may be wrong".into());
    }
    out.push("verdicts are numerical evidence at the sampled scales, not proofs".into());
    if !oracle.note().is_empty() {
        out.push(oracle.note().to_string());
    }
    out
}

fn fitted_dim(e: &ConeEstimate) -> Option<usize> {
    e.fitted_subspace().map(Subspace::dim)
}

/// Runs the requested modes over `grid`, sharing cone estimates between them.
pub fn analyze(
    oracle: &SetOracle,
    digest: &str,
    grid: &ProbeGrid,
    cfg: &AnalysisConfig,
    modes: &[Mode],
) -> Result<AnalysisReport> {
    let start = Instant::now();
    cfg.validate()?;
    let tg = probe_cones(oracle, grid, cfg, ConeKind::Tangent)?;
    let bundle = assemble_bundle(grid, tg.clone(), cfg)?;
    let mut verdicts = Vec::new();
    let mut ptg = None;
    let mut thetas: Option<Vec<DensityEstimate>> = None;
    let mut checks: Option<Vec<InjectivityCheck>> = None;
    for &mode in modes {
        match mode {
            Mode::TwoCones => {
                let p = probe_cones(oracle, grid, cfg, ConeKind::Paratangent)?;
                verdicts.push(two_cones_from(grid, &tg, &p, cfg)?);
                ptg = Some(p);
            }
            Mode::Density => {
                let (v, t) = density_from(oracle, grid, &bundle, cfg)?;
                verdicts.push(v);
                thetas = Some(t).filter(|t| !t.is_empty());
            }
            Mode::Gluck => {
                let (v, c) = gluck_from(oracle, grid, &bundle, cfg)?;
                verdicts.push(v);
                checks = Some(c).filter(|c| c.len() == grid.len());
            }
        }
    }
    let thetas = match thetas {
        Some(t) => t,
        None => per_probe_density(oracle, grid, &tg, cfg)?,
    };
    let labelled: Vec<usize> = (0..grid.len()).filter(|&i| grid.labels[i].is_some()).collect();
    let extras: Vec<(usize, Option<DensityEstimate>, Option<bool>)> = labelled
        .par_iter()
        .map(|&i| {
            let x = &grid.points[i];
            let k = tg[i].fitted_subspace().map(Subspace::dim).unwrap_or(tg[i].dim_estimate);
            let lower = lower_density(oracle, x, k, cfg)?;
            let open = match tg[i].fitted_subspace() {
                Some(s) if s.dim() > 0 => Some(check_openness(
                    oracle,
                    x,
                    s,
                    cfg.cones.r0 * oracle.scale(),
                    cfg.classifier.openness_grid * cfg.cones.r0 * oracle.scale(),
                    cfg.classifier.openness_samples,
                    derive_seed(cfg.seed, &[0x6f70_656e, i as u64]),
                )?),
                Some(_) => Some(false),
                None => None,
            };
            Ok((i, lower, open))
        })
        .collect::<Result<_>>()?;
    let mut ptg = ptg.map(|v| v.into_iter().map(Some).collect::<Vec<_>>()).unwrap_or_else(|| vec![None; grid.len()]);
    let mut checks = checks.map(|v| v.into_iter().map(Some).collect::<Vec<_>>()).unwrap_or_else(|| vec![None; grid.len()]);
    let mut probes: Vec<ProbeReport> = tg
        .into_iter()
        .zip(thetas)
        .enumerate()
        .map(|(i, (tangent, theta))| ProbeReport {
            index: i,
            label: grid.labels[i].clone(),
            point: grid.points[i].clone(),
            tangent,
            paratangent: ptg[i].take(),
            density: Some(theta),
            lower_density: None,
            injectivity: checks[i].take(),
            open: None,
        })
        .collect();
    for (i, lower, open) in extras {
        probes[i].lower_density = lower;
        probes[i].open = open;
    }
    Ok(AnalysisReport {
        tool_version: TOOL_VERSION.to_string(),
        set: SetHeader::new(oracle, digest),
        config: cfg.clone(),
        modes: modes.to_vec(),
        eta: grid.eta,
        adjacency: grid.adjacency.clone(),
        probes,
        bundle: BundleSummary::from(&bundle),
        verdicts,
        caveats: caveats(oracle),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn per_probe_density(oracle: &SetOracle, grid: &ProbeGrid, tg: &[ConeEstimate], cfg: &AnalysisConfig) -> Result<Vec<DensityEstimate>> {
    let schedule = cfg.density.schedule(oracle);
    grid.points
        .par_iter()
        .zip(tg)
        .map(|(x, e)| {
            let k = fitted_dim(e).unwrap_or(oracle.intrinsic_dim());
            estimate_density(oracle, x, k, DensityKind::Density, &schedule, cfg.density.n_mc, cfg.density_seed())
        })
        .collect()
}

fn lower_density(oracle: &SetOracle, x: &[f64], k: usize, cfg: &AnalysisConfig) -> Result<Option<DensityEstimate>> {
    let schedule = cfg.density.schedule(oracle);
    let seed = derive_seed(cfg.density_seed(), &[0x6c6f_77]);
    match estimate_density(oracle, x, k, DensityKind::LowerDensity, &schedule, cfg.density.n_mc, seed) {
        Ok(d) => Ok(Some(d)),
        Err(Error::Inconclusive(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// The report with its timing zeroed, serialized: equal fingerprints
    /// mean equal numbers everywhere else.
    pub fn numeric_fingerprint(&self) -> Result<String> {
        let mut r = self.clone();
        r.wall_time_secs = 0.0;
        r.to_json()
    }

    pub fn inconclusive_count(&self) -> usize {
        self.verdicts.iter().filter(|v| v.outcome.is_inconclusive()).count()
    }

    /// More than half of the verdicts are inconclusive.
    pub fn inconclusive_dominated(&self) -> bool {
        !self.verdicts.is_empty() && 2 * self.inconclusive_count() > self.verdicts.len()
    }

    pub fn probe(&self, label: &str) -> Option<&ProbeReport> {
        self.probes.iter().find(|p| p.label.as_deref() == Some(label))
    }

    pub fn verdict(&self, mode: Mode) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.mode == mode)
    }

    /// Convergence tables of every probe as `(file suffix, rows)`, rows
    /// being `(radius, ratio or Hausdorff distance, stderr)`.
    pub fn tables(&self) -> Vec<(String, Vec<(f64, f64, Option<f64>)>)> {
        let mut out = Vec::new();
        for p in &self.probes {
            let name = p.label.clone().unwrap_or_else(|| format!("p{}", p.index));
            let mut cone = |kind: &str, e: &ConeEstimate| {
                let rows = e.diagnostics.iter().enumerate().map(|(j, h)| (e.radii[j + 1], *h, None)).collect();
                out.push((format!("{name}.{kind}"), rows));
            };
            cone("tg", &p.tangent);
            if let Some(e) = &p.paratangent {
                cone("ptg", e);
            }
            for (kind, d) in [("density", &p.density), ("lower_density", &p.lower_density)] {
                if let Some(d) = d {
                    let rows = d
                        .per_radius
                        .iter()
                        .map(|r| {
                            let denom = if r.ratio > 0.0 && r.ratio.is_finite() { r.measure / r.ratio } else { f64::NAN };
                            let se = if denom.is_finite() && denom > 0.0 { r.stderr / denom } else { f64::NAN };
                            (r.radius, r.ratio, Some(se).filter(|s| s.is_finite()))
                        })
                        .collect();
                    out.push((format!("{name}.{kind}"), rows));
                }
            }
        }
        out
    }

    /// Writes the report to `out` and each convergence table next to it as
    /// `<out>.<probe>.<kind>.csv`. Returns the table paths.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        std::fs::write(out, self.to_json()? + "\n")?;
        let mut paths = Vec::new();
        for (suffix, rows) in self.tables() {
            let mut name = out.as_os_str().to_os_string();
            name.push(format!(".{suffix}.csv"));
            let path = PathBuf::from(name);
            write_table(&path, &rows)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn write_table(path: &Path, rows: &[(f64, f64, Option<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["radius", "ratio_or_hausdorff", "stderr"]).map_err(csv_err)?;
    for (r, v, se) in rows {
        let se = se.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([r.to_string(), v.to_string(), se]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One annotation of a corpus entry, checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub at: Option<String>,
    pub claim: Claim,
    pub source: Source,
    pub observed: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryResult {
    pub name: String,
    pub checks: Vec<ClaimCheck>,
    pub report: AnalysisReport,
}

impl EntryResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub tool_version: String,
    pub config: AnalysisConfig,
    pub entries: Vec<EntryResult>,
    pub wall_time_secs: f64,
}

impl CorpusReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(EntryResult::passed)
    }

    pub fn entry(&self, name: &str) -> Option<&EntryResult> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Serialized report with every wall time zeroed.
    pub fn numeric_fingerprint(&self) -> Result<String> {
        let mut r = self.clone();
        r.wall_time_secs = 0.0;
        for e in &mut r.entries {
            e.report.wall_time_secs = 0.0;
        }
        serde_json::to_string(&r).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Fixed-width pass/fail table, one row per claim.
    pub fn table(&self) -> String {
        let mut s = format!("{:<14} {:<10} {:<34} {:<6} {}\n", "entry", "at", "claim", "result", "observed");
        for e in &self.entries {
            for c in &e.checks {
                s.push_str(&format!(
                    "{:<14} {:<10} {:<34} {:<6} {}\n",
                    e.name,
                    c.at.as_deref().unwrap_or("-"),
                    claim_name(&c.claim),
                    if c.pass { "PASS" } else { "FAIL" },
                    c.observed
                ));
            }
        }
        let (n, p) = self.entries.iter().flat_map(|e| &e.checks).fold((0, 0), |(n, p), c| (n + 1, p + c.pass as usize));
        s.push_str(&format!("{} entries, {p}/{n} claims pass\n", self.entries.len()));
        s
    }
}

fn claim_name(c: &Claim) -> String {
    match c {
        Claim::TangentSubspace { basis, .. } => format!("tangent space (dim {})", basis.len()),
        Claim::Density { value, tol } => format!("density {value} ± {tol}"),
        Claim::DensityVanishes { max } => format!("density vanishes (<= {max})"),
        Claim::LowerDensityInfinite => "lower density infinite".into(),
        Claim::ParatangentExcess { .. } => "paratangent excess".into(),
        Claim::Verdict { mode, expected } => format!("{} {}", mode.name(), expected_name(expected)),
    }
}

fn expected_name(e: &ExpectedOutcome) -> String {
    match e {
        ExpectedOutcome::C1Manifold { k } => format!("C1Manifold({k})"),
        ExpectedOutcome::NotC1 { witness } => format!("NotC1({witness:?})"),
        ExpectedOutcome::Inconclusive => "Inconclusive".into(),
        ExpectedOutcome::CriterionPassesNotC1 { k } => format!("passes({k}), not C1"),
    }
}

/// Sphere distance between unoriented directions.
fn line_distance(a: &[f64], b: &[f64]) -> f64 {
    let minus: Vec<f64> = b.iter().map(|v| -v).collect();
    dist(a, b).min(dist(a, &minus))
}

fn check_claim(entry: &CorpusEntry, report: &AnalysisReport, a: &Annotation, cfg: &AnalysisConfig) -> Result<ClaimCheck> {
    let oracle = &entry.oracle;
    let probe = match &a.at {
        Some(label) => Some(
            report
                .probe(label)
                .ok_or_else(|| Error::Contract(format!("{}: no probe labelled {label}", entry.name)))?,
        ),
        None => None,
    };
    let theta = |k: usize, kind: DensityKind| -> Result<DensityEstimate> {
        let p = probe.expect("point claims carry a label");
        let reuse = match kind {
            DensityKind::Density => p.density.as_ref(),
            DensityKind::LowerDensity => p.lower_density.as_ref(),
        };
        if let Some(d) = reuse.filter(|d| d.k == k) {
            return Ok(d.clone());
        }
        let seed = match kind {
            DensityKind::Density => cfg.density_seed(),
            DensityKind::LowerDensity => derive_seed(cfg.density_seed(), &[0x6c6f_77]),
        };
        estimate_density(oracle, &p.point, k, kind, &cfg.density.schedule(oracle), cfg.density.n_mc, seed)
    };
    let (observed, pass) = match &a.claim {
        Claim::TangentSubspace { basis, tol } => {
            let p = probe.expect("point claims carry a label");
            match p.tangent.fitted_subspace() {
                Some(s) => {
                    let want = Subspace::span(oracle.ambient_dim(), basis)?;
                    let d = if s.dim() == want.dim() { grassmann_delta(s, &want)? } else { 1.0 };
                    (format!("dim {} delta {d:.4}", s.dim()), s.dim() == want.dim() && d <= *tol)
                }
                None => ("no fitted subspace".into(), false),
            }
        }
        Claim::Density { value, tol } => {
            let d = theta(oracle.intrinsic_dim(), DensityKind::Density)?;
            (format!("{:.4} ± {:.4}", d.value, d.stderr), (d.value - value).abs() <= *tol)
        }
        Claim::DensityVanishes { max } => {
            let d = theta(oracle.intrinsic_dim(), DensityKind::Density)?;
            let tail = d.ratios();
            let decreasing = tail.windows(2).rev().take(3).all(|w| w[1] <= w[0]);
            (format!("{:.4}, tail decreasing {decreasing}", d.value), d.value <= *max && decreasing)
        }
        Claim::LowerDensityInfinite => {
            let p = probe.expect("point claims carry a label");
            let k = p.tangent.fitted_subspace().map(Subspace::dim).unwrap_or(p.tangent.dim_estimate);
            let d = theta(k, DensityKind::LowerDensity)?;
            (format!("k {k}, value {}", d.value), d.is_infinite())
        }
        Claim::ParatangentExcess { direction, tol } => {
            let p = probe.expect("point claims carry a label");
            let ptg = match &p.paratangent {
                Some(e) => e.clone(),
                None => crate::cones::estimate_paratangent_cone(oracle, &p.point, &cfg.cone_config(oracle))?,
            };
            let excess = match cones_coincide(&p.tangent, &ptg, cfg.classifier.coincide_tol) {
                Ok((false, ex)) => ex,
                Ok((true, _)) => Vec::new(),
                Err(Error::Inconclusive(_)) => {
                    persistent_excess(&p.tangent, &ptg, cfg.classifier.coincide_tol, cfg.classifier.excess_tiers)
                        .unwrap_or_default()
                }
                Err(e) => return Err(e),
            };
            let best = excess.iter().map(|d| line_distance(d, direction)).fold(f64::INFINITY, f64::min);
            (format!("{} excess directions, nearest {best:.4}", excess.len()), best <= *tol)
        }
        Claim::Verdict { mode, expected } => {
            let v = report
                .verdict(*mode)
                .ok_or_else(|| Error::Contract(format!("{}: mode {} was not run", entry.name, mode.name())))?;
            let pass = match (expected, &v.outcome) {
                (ExpectedOutcome::C1Manifold { k }, Outcome::C1Manifold { k: got })
                | (ExpectedOutcome::CriterionPassesNotC1 { k }, Outcome::C1Manifold { k: got }) => k == got,
                (ExpectedOutcome::NotC1 { witness }, Outcome::NotC1 { witness: w }) => *witness == w.kind(),
                (ExpectedOutcome::Inconclusive, Outcome::Inconclusive { .. }) => true,
                _ => false,
            };
            (v.outcome.label(), pass)
        }
    };
    Ok(ClaimCheck { at: a.at.clone(), claim: a.claim.clone(), source: a.source, observed, pass })
}

/// Analyzes one corpus entry in all modes and checks its annotations.
pub fn run_entry(entry: &CorpusEntry, cfg: &AnalysisConfig) -> Result<EntryResult> {
    let grid = ProbeGrid::from_oracle(&entry.oracle, &cfg.classifier)?;
    let report = analyze(&entry.oracle, &entry.definition.digest(), &grid, cfg, &Mode::ALL)?;
    let checks = entry
        .ground_truth
        .iter()
        .map(|a| check_claim(entry, &report, a, cfg))
        .collect::<Result<_>>()?;
    Ok(EntryResult { name: entry.name.clone(), checks, report })
}

/// Runs every corpus entry whose name matches `filter` (all when absent).
pub fn run_corpus(filter: Option<&Regex>, cfg: &AnalysisConfig) -> Result<CorpusReport> {
    let start = Instant::now();
    let entries = corpus()
        .iter()
        .filter(|e| filter.is_none_or(|f| f.is_match(&e.name)))
        .map(|e| run_entry(e, cfg))
        .collect::<Result<_>>()?;
    Ok(CorpusReport {
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.clone(),
        entries,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Anchored regex for a shell-style glob (`*`, `?`).
pub fn glob_regex(glob: &str) -> Result<Regex> {
    let mut re = String::from("^");
    for c in glob.chars() {
        match c {
            '*' => re.push_str(".*"),
            '?' => re.push('.'),
            c => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    re.push('$');
    Regex::new(&re).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setmodel::corpus_entry;

    #[test]
    fn globs() {
        let g = glob_regex("c*").unwrap();
        assert!(g.is_match("cusp") && g.is_match("circle") && !g.is_match("sphere"));
        assert!(glob_regex("li?e").unwrap().is_match("line"));
        assert!(!glob_regex("a.b").unwrap().is_match("axb"));
    }

    #[test]
    fn line_entry_passes_and_writes_tables() {
        let e = corpus_entry("line").unwrap();
        let mut cfg = AnalysisConfig::default();
        cfg.classifier.probes_per_chart = Some(6);
        let r = run_entry(&e, &cfg).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("line.json");
        let paths = r.report.write(&out).unwrap();
        let origin = paths.iter().find(|p| p.to_string_lossy().ends_with("line.json.origin.density.csv")).unwrap();
        let mut rd = csv::Reader::from_path(origin).unwrap();
        assert_eq!(rd.headers().unwrap(), vec!["radius", "ratio_or_hausdorff", "stderr"]);
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), cfg.density.count);
        let ratio: f64 = rows[0][1].parse().unwrap();
        assert!((ratio - 1.0).abs() < 0.02);
        let back = AnalysisReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(back.numeric_fingerprint().unwrap(), r.report.numeric_fingerprint().unwrap());
    }
}
