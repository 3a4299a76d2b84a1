//! Three tests of whether a set is a C1 manifold, run over a finite grid of
//! probe points:
//!
//! * two cones: `tg_x X` and `ptg_x X` agree at every probe;
//! * density: the tangent bundle is trivial and continuous and `θ(X, x) < 3/2`;
//! * projection (Gluck): the tangent bundle is trivial and continuous and the
//!   orthogonal projection onto `tg_x X` is injective near `x`.
//!
//! A failure comes with a witness. The density test is only sufficient, so
//! its witness records a failed hypothesis rather than a proof.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{
    cones_coincide, estimate_paratangent_cone, estimate_tangent_cone, persistent_excess, ConeConfig, ConeEstimate, ConeKind,
};
use crate::config::{AnalysisConfig, ClassifierConfig};
use crate::density::{estimate_density, DensityEstimate, DensityKind};
use crate::error::{check_dim, contract, Error, Result};
use crate::grassmann::{grassmann_delta, nearest_distance, Subspace};
use crate::rng::derive_seed;
use crate::setmodel::SetOracle;
use crate::vecmath::{dist, dist_sq, sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    TwoCones,
    Density,
    Gluck,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::TwoCones, Mode::Density, Mode::Gluck];

    pub fn name(self) -> &'static str {
        match self {
            Mode::TwoCones => "two-cones",
            Mode::Density => "density",
            Mode::Gluck => "gluck",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    ParatangentExcess,
    ProjectionCollision,
    NonSubspaceCone,
    DimensionJump,
    DensityAtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `direction` lies in the paratangent estimate at `point` and farther
    /// than the tolerance from the tangent estimate; `excess` lists all such.
    ParatangentExcess { point: Vec<f64>, direction: Vec<f64>, excess: Vec<Vec<f64>> },
    /// Two points near `base` whose projections onto `tg_base X` are
    /// `fiber_gap` apart while the points are `separation` apart.
    ProjectionCollision { base: Vec<f64>, p: Vec<f64>, q: Vec<f64>, fiber_gap: f64, separation: f64, radius: f64 },
    NonSubspaceCone { point: Vec<f64> },
    DimensionJump { p: Vec<f64>, q: Vec<f64>, dim_p: usize, dim_q: usize },
    /// `θ(X, point) >= 3/2` up to the margin: the density hypothesis fails.
    DensityAtLeast {
        point: Vec<f64>,
        #[serde(with = "crate::nonfinite")]
        value: f64,
        #[serde(with = "crate::nonfinite")]
        stderr: f64,
        #[serde(with = "crate::nonfinite")]
        margin: f64,
    },
}

impl Witness {
    pub fn kind(&self) -> WitnessKind {
        match self {
            Witness::ParatangentExcess { .. } => WitnessKind::ParatangentExcess,
            Witness::ProjectionCollision { .. } => WitnessKind::ProjectionCollision,
            Witness::NonSubspaceCone { .. } => WitnessKind::NonSubspaceCone,
            Witness::DimensionJump { .. } => WitnessKind::DimensionJump,
            Witness::DensityAtLeast { .. } => WitnessKind::DensityAtLeast,
        }
    }

    /// The probe point the witness is attached to.
    pub fn point(&self) -> &[f64] {
        match self {
            Witness::ParatangentExcess { point, .. }
            | Witness::NonSubspaceCone { point }
            | Witness::DensityAtLeast { point, .. } => point,
            Witness::ProjectionCollision { base, .. } => base,
            Witness::DimensionJump { p, .. } => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Outcome {
    C1Manifold { k: usize },
    NotC1 { witness: Witness },
    Inconclusive { reason: String, evidence: Option<Witness> },
}

impl Outcome {
    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Outcome::Inconclusive { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Outcome::C1Manifold { k } => format!("C1Manifold({k})"),
            Outcome::NotC1 { witness } => format!("NotC1({:?})", witness.kind()),
            Outcome::Inconclusive { .. } => "Inconclusive".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub mode: Mode,
    pub outcome: Outcome,
    /// Indices of the probes the outcome rests on.
    pub evidence: Vec<usize>,
    pub notes: Vec<String>,
}

impl Verdict {
    fn new(mode: Mode, outcome: Outcome, evidence: Vec<usize>) -> Self {
        Self { mode, outcome, evidence, notes: Vec::new() }
    }

    fn inconclusive(mode: Mode, reason: impl Into<String>, evidence: Option<Witness>, probes: Vec<usize>) -> Self {
        Self::new(mode, Outcome::Inconclusive { reason: reason.into(), evidence }, probes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub points: Vec<Vec<f64>>,
    /// Special-point label of each probe, if any.
    pub labels: Vec<Option<String>>,
    /// Unordered pairs `(i, j)`, `i < j`, of probes within `eta`.
    pub adjacency: Vec<(usize, usize)>,
    pub eta: f64,
}

impl ProbeGrid {
    /// Special points plus the oracle's default probes.
    pub fn from_oracle(oracle: &SetOracle, cfg: &ClassifierConfig) -> Result<Self> {
        Self::from_points(oracle, oracle.probe_points(cfg.probes_per_chart), cfg)
    }

    /// A grid over the given points, each of which must lie on the set.
    pub fn from_points(oracle: &SetOracle, points: Vec<Vec<f64>>, cfg: &ClassifierConfig) -> Result<Self> {
        if points.is_empty() {
            return Err(contract("probe grid is empty"));
        }
        let tau = 1e-6 * oracle.scale();
        for p in &points {
            check_dim(oracle.ambient_dim(), p.len())?;
            if !oracle.membership(p, tau) {
                return Err(contract(format!("probe {p:?} is not on the set {}", oracle.name())));
            }
        }
        let labels = points
            .iter()
            .map(|p| oracle.special_points().iter().find(|s| dist(&s.point, p) <= tau).map(|s| s.label.clone()))
            .collect();
        let mut nn: Vec<f64> = (0..points.len())
            .map(|i| {
                (0..points.len())
                    .filter(|&j| j != i)
                    .map(|j| dist(&points[i], &points[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .filter(|d| d.is_finite())
            .collect();
        nn.sort_by(f64::total_cmp);
        let eta = if nn.is_empty() { 0.0 } else { cfg.eta_factor * nn[nn.len() / 2] };
        let mut adjacency = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if dist(&points[i], &points[j]) <= eta {
                    adjacency.push((i, j));
                }
            }
        }
        Ok(Self { points, labels, adjacency, eta })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.iter().filter_map(move |&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleReport {
    pub kind: ConeKind,
    pub per_probe: Vec<ConeEstimate>,
    pub converged_fraction: f64,
    /// Every probe has a fitted subspace, all of one dimension.
    pub trivial: bool,
    /// The majority fitted dimension.
    pub dim: Option<usize>,
    /// Largest `δ(E_p, E_q) / |p - q|` over adjacent probes with fitted spaces.
    #[serde(with = "crate::nonfinite")]
    pub continuity_modulus: f64,
    /// Largest `δ(E_p, E_q)` over adjacent probes with fitted spaces.
    pub max_adjacent_delta: f64,
    /// The continuity modulus is finite. A finite grid cannot tell a steep
    /// continuous bundle from a jump, so only coincident probes with
    /// different fibers count against continuity.
    pub continuous: bool,
    /// Adjacent `(p, q)` closer than the finest cone radius with `dim q > dim p`.
    pub dim_semicontinuity_violations: Vec<(usize, usize)>,
    /// Probes whose cone is not a fitted subspace.
    pub non_subspace: Vec<usize>,
    /// Probes whose fitted dimension differs from the majority.
    pub off_dimension: Vec<usize>,
}

impl BundleReport {
    /// The fitted space at probe `i`.
    pub fn fiber(&self, i: usize) -> Option<&Subspace> {
        self.per_probe[i].fitted_subspace()
    }
}

fn modal(dims: impl Iterator<Item = usize>) -> Option<usize> {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for d in dims {
        match counts.iter_mut().find(|c| c.0 == d) {
            Some(c) => c.1 += 1,
            None => counts.push((d, 1)),
        }
    }
    // Ties go to the larger dimension.
    counts.into_iter().max_by_key(|&(d, c)| (c, d)).map(|c| c.0)
}

pub fn probe_cones(oracle: &SetOracle, grid: &ProbeGrid, cfg: &AnalysisConfig, kind: ConeKind) -> Result<Vec<ConeEstimate>> {
    let cc = cfg.cone_config(oracle);
    let deep = ConeConfig { tiers: cc.tiers + cfg.classifier.refine_tiers, ..cc };
    grid.points
        .par_iter()
        .map(|x| match kind {
            ConeKind::Tangent => {
                let e = estimate_tangent_cone(oracle, x, &cc)?;
                // A probe close to another branch sees it at every tier; look closer.
                if e.converged || cfg.classifier.refine_tiers == 0 {
                    return Ok(e);
                }
                let d = estimate_tangent_cone(oracle, x, &deep)?;
                Ok(if d.converged { d } else { e })
            }
            ConeKind::Paratangent => estimate_paratangent_cone(oracle, x, &cc),
        })
        .collect()
}

/// Bundle statistics of precomputed per-probe estimates.
pub fn assemble_bundle(grid: &ProbeGrid, per_probe: Vec<ConeEstimate>, cfg: &AnalysisConfig) -> Result<BundleReport> {
    if per_probe.len() != grid.len() || grid.is_empty() {
        return Err(contract("one cone estimate per probe is required"));
    }
    let kind = per_probe[0].kind;
    let converged_fraction = per_probe.iter().filter(|e| e.converged).count() as f64 / per_probe.len() as f64;
    let dims: Vec<Option<usize>> = per_probe.iter().map(|e| e.fitted_subspace().map(Subspace::dim)).collect();
    let dim = modal(dims.iter().flatten().copied());
    let non_subspace: Vec<usize> = (0..dims.len()).filter(|&i| dims[i].is_none()).collect();
    let off_dimension: Vec<usize> = (0..dims.len()).filter(|&i| dims[i].is_some() && dims[i] != dim).collect();
    let trivial = non_subspace.is_empty() && off_dimension.is_empty();
    let finest = cfg.cones.finest_radius();
    let (mut modulus, mut max_delta) = (0.0f64, 0.0f64);
    let mut violations = Vec::new();
    for &(i, j) in &grid.adjacency {
        let d_ij = dist(&grid.points[i], &grid.points[j]);
        if let (Some(a), Some(b)) = (per_probe[i].fitted_subspace(), per_probe[j].fitted_subspace()) {
            if a.dim() == b.dim() && a.dim() > 0 {
                let delta = grassmann_delta(a, b)?;
                max_delta = max_delta.max(delta);
                if d_ij > 0.0 {
                    modulus = modulus.max(delta / d_ij);
                } else if delta > 0.0 {
                    modulus = f64::INFINITY;
                }
            }
        }
        if d_ij < finest {
            let (di, dj) = (per_probe[i].dim_estimate, per_probe[j].dim_estimate);
            if dj > di {
                violations.push((i, j));
            } else if di > dj {
                violations.push((j, i));
            }
        }
    }
    Ok(BundleReport {
        kind,
        per_probe,
        converged_fraction,
        trivial,
        dim,
        continuity_modulus: modulus,
        max_adjacent_delta: max_delta,
        continuous: modulus.is_finite(),
        dim_semicontinuity_violations: violations,
        non_subspace,
        off_dimension,
    })
}

/// Tangent cone estimates at every probe with bundle statistics. Fails
/// with [`Error::Inconclusive`] when too few estimates converge.
pub fn bundle_report(oracle: &SetOracle, grid: &ProbeGrid, cfg: &AnalysisConfig) -> Result<BundleReport> {
    cfg.validate()?;
    let b = assemble_bundle(grid, probe_cones(oracle, grid, cfg, ConeKind::Tangent)?, cfg)?;
    if b.converged_fraction < cfg.classifier.convergence_quorum {
        return Err(Error::Inconclusive(format!(
            "tangent cones converged at {:.0}% of probes",
            100.0 * b.converged_fraction
        )));
    }
    Ok(b)
}

/// Why a bundle cannot be used by the density and projection tests.
fn bundle_obstruction(mode: Mode, grid: &ProbeGrid, b: &BundleReport, cfg: &AnalysisConfig) -> Option<Verdict> {
    if b.converged_fraction < cfg.classifier.convergence_quorum {
        let reason = format!("tangent cones converged at {:.0}% of probes", 100.0 * b.converged_fraction);
        let probes = (0..grid.len()).filter(|&i| !b.per_probe[i].converged).collect();
        return Some(Verdict::inconclusive(mode, reason, None, probes));
    }
    if let Some(&i) = b.non_subspace.first() {
        let w = Witness::NonSubspaceCone { point: grid.points[i].clone() };
        let reason = format!("tangent cone at probe {i} is not a subspace");
        return Some(Verdict::inconclusive(mode, reason, Some(w), b.non_subspace.clone()));
    }
    if let (Some(&i), Some(k)) = (b.off_dimension.first(), b.dim) {
        let j = (0..grid.len())
            .filter(|&j| b.fiber(j).is_some_and(|s| s.dim() == k))
            .min_by(|&a, &c| dist(&grid.points[a], &grid.points[i]).total_cmp(&dist(&grid.points[c], &grid.points[i])))
            .expect("the majority dimension occurs");
        let w = Witness::DimensionJump {
            p: grid.points[i].clone(),
            q: grid.points[j].clone(),
            dim_p: b.fiber(i).map_or(0, Subspace::dim),
            dim_q: k,
        };
        return Some(Verdict::inconclusive(mode, "tangent spaces differ in dimension", Some(w), vec![i, j]));
    }
    if !b.continuous {
        let reason = "coincident probes carry different tangent spaces".to_string();
        return Some(Verdict::inconclusive(mode, reason, None, Vec::new()));
    }
    None
}

/// Two-cones test on precomputed estimates.
pub fn two_cones_from(grid: &ProbeGrid, tg: &[ConeEstimate], ptg: &[ConeEstimate], cfg: &AnalysisConfig) -> Result<Verdict> {
    let mode = Mode::TwoCones;
    let tol = cfg.classifier.coincide_tol;
    let mut unsettled = Vec::new();
    for i in 0..grid.len() {
        let (t, p) = (&tg[i], &ptg[i]);
        let excess = match cones_coincide(t, p, tol) {
            Ok((true, _)) => continue,
            Ok((false, excess)) => Some(excess).filter(|e| !e.is_empty()),
            Err(Error::Inconclusive(_)) => persistent_excess(t, p, tol, cfg.classifier.excess_tiers),
            Err(e) => return Err(e),
        };
        match excess {
            Some(excess) => {
                let direction = most_persistent(&excess, p, tol);
                let w = Witness::ParatangentExcess {
                    point: grid.points[i].clone(),
                    direction,
                    excess: excess.into_iter().map(|d| d.into_inner()).collect(),
                };
                return Ok(Verdict::new(mode, Outcome::NotC1 { witness: w }, vec![i]));
            }
            None => unsettled.push(i),
        }
    }
    if !unsettled.is_empty() {
        let reason = format!("cone estimates unsettled at {} of {} probes", unsettled.len(), grid.len());
        return Ok(Verdict::inconclusive(mode, reason, None, unsettled));
    }
    let dims: Vec<usize> = ptg.iter().filter_map(|e| e.fitted_subspace().map(Subspace::dim)).collect();
    let Some(k) = modal(dims.iter().copied()) else {
        return Ok(Verdict::inconclusive(mode, "no paratangent estimate is a subspace", None, Vec::new()));
    };
    let mut v = Verdict::new(mode, Outcome::C1Manifold { k }, (0..grid.len()).collect());
    if dims.len() < ptg.len() || dims.iter().any(|&d| d != k) {
        v.notes.push("paratangent dimensions vary over the probes; k is the majority".into());
    }
    Ok(v)
}

/// Among `excess`, the direction seen in the most tiers of `ptg`; ties go
/// to the one farther from the final tangent-adjacent set.
fn most_persistent(excess: &[crate::grassmann::UnitDirection], ptg: &ConeEstimate, tol: f64) -> Vec<f64> {
    let score = |d: &crate::grassmann::UnitDirection| {
        ptg.per_tier_directions.iter().filter(|tier| nearest_distance(d, tier) <= tol).count()
    };
    excess
        .iter()
        .max_by_key(|d| score(d))
        .map(|d| d.to_vec())
        .unwrap_or_default()
}

/// Verdict from `tg_x X = ptg_x X` at every probe.
pub fn classify_two_cones(oracle: &SetOracle, grid: &ProbeGrid, cfg: &AnalysisConfig) -> Result<Verdict> {
    cfg.validate()?;
    let tg = probe_cones(oracle, grid, cfg, ConeKind::Tangent)?;
    let ptg = probe_cones(oracle, grid, cfg, ConeKind::Paratangent)?;
    two_cones_from(grid, &tg, &ptg, cfg)
}

/// Density test on a precomputed bundle; also returns the densities.
pub fn density_from(
    oracle: &SetOracle,
    grid: &ProbeGrid,
    bundle: &BundleReport,
    cfg: &AnalysisConfig,
) -> Result<(Verdict, Vec<DensityEstimate>)> {
    let mode = Mode::Density;
    if let Some(v) = bundle_obstruction(mode, grid, bundle, cfg) {
        return Ok((v, Vec::new()));
    }
    let k = bundle.dim.unwrap_or(0);
    let schedule = cfg.density.schedule(oracle);
    let seed = cfg.density_seed();
    let thetas: Vec<DensityEstimate> = grid
        .points
        .par_iter()
        .map(|x| estimate_density(oracle, x, k, DensityKind::Density, &schedule, cfg.density.n_mc, seed))
        .collect::<Result<_>>()?;
    let c = &cfg.classifier;
    for (i, th) in thetas.iter().enumerate() {
        let margin = 2.0 * th.stderr + c.density_margin;
        if th.value >= c.density_threshold - margin {
            let w = Witness::DensityAtLeast { point: grid.points[i].clone(), value: th.value, stderr: th.stderr, margin };
            let mut v = Verdict::new(mode, Outcome::NotC1 { witness: w }, vec![i]);
            v.notes.push("the density hypothesis fails here; this does not by itself prove the set is not C1".into());
            return Ok((v, thetas));
        }
    }
    let mut v = Verdict::new(mode, Outcome::C1Manifold { k }, (0..grid.len()).collect());
    if thetas.iter().any(|t| !t.reliable) {
        v.notes.push("some density extrapolations are flagged unreliable".into());
    }
    Ok((v, thetas))
}

/// Verdict from a continuous trivial tangent bundle with `θ < 3/2`.
pub fn classify_density(oracle: &SetOracle, grid: &ProbeGrid, cfg: &AnalysisConfig) -> Result<Verdict> {
    cfg.validate()?;
    let tg = probe_cones(oracle, grid, cfg, ConeKind::Tangent)?;
    let bundle = assemble_bundle(grid, tg, cfg)?;
    Ok(density_from(oracle, grid, &bundle, cfg)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub fiber_gap: f64,
    pub separation: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityCheck {
    pub base: Vec<f64>,
    pub injective: bool,
    /// Radii checked, largest first, and whether a collision was found at each.
    pub radii: Vec<f64>,
    pub collided: Vec<bool>,
    /// The collision at the smallest radius when the map is not injective.
    pub collision: Option<Collision>,
}

fn coords(tg: &Subspace, x: &[f64], p: &[f64]) -> Vec<f64> {
    let d = sub(p, x);
    tg.basis().iter().map(|b| crate::vecmath::dot(b, &d)).collect()
}

/// Moves `q` along the set, inside `B(x, r)`, toward the fiber through `p`.
#[allow(clippy::too_many_arguments)]
fn refine_partner(
    oracle: &SetOracle,
    x: &[f64],
    tg: &Subspace,
    r: f64,
    p: &[f64],
    q: &[f64],
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<Option<Collision>> {
    let target = coords(tg, x, p);
    let gap_of = |c: &[f64]| dist(&coords(tg, x, c), &target);
    let guard = cfg.separation_factor * cfg.sample_resolution * r;
    let (mut q, mut gap) = (q.to_vec(), gap_of(q));
    let mut s = (2.0 * gap).max(cfg.sample_resolution * r);
    for it in 0..48u64 {
        let sep = dist(p, &q);
        if sep >= guard && gap <= 1e-2 * cfg.collision_ratio * sep {
            break;
        }
        if it >= 12 && gap > cfg.refine_below * sep {
            break;
        }
        let cands = oracle.sample_in_ball(&q, s, 48, derive_seed(seed, &[it]))?;
        let best = cands
            .into_iter()
            .filter(|c| dist_sq(c, x) <= r * r && dist(c, p) >= guard)
            .map(|c| (gap_of(&c), c))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match best {
            Some((g, c)) if g < gap => {
                gap = g;
                q = c;
                s = (2.0 * gap).max(cfg.sample_resolution * r);
            }
            _ => s *= 0.5,
        }
        if s < 1e-3 * cfg.sample_resolution * r {
            break;
        }
    }
    let sep = dist(p, &q);
    Ok((sep >= guard && gap <= cfg.collision_ratio * sep).then(|| Collision {
        p: p.to_vec(),
        q,
        fiber_gap: gap,
        separation: sep,
        radius: r,
    }))
}

fn collision_at(
    oracle: &SetOracle,
    x: &[f64],
    tg: &Subspace,
    r: f64,
    m: usize,
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<Option<Collision>> {
    let pts = oracle.sample_in_ball(x, r, m, seed)?;
    if pts.len() < 16 {
        return Err(Error::Inconclusive(format!("only {} samples within {r:e} of {x:?}", pts.len())));
    }
    let proj: Vec<Vec<f64>> = pts.iter().map(|p| coords(tg, x, p)).collect();
    let guard = cfg.separation_factor * cfg.sample_resolution * r;
    let mut best: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..pts.len() {
        let mut local: Option<(f64, usize)> = None;
        for j in 0..pts.len() {
            let sep = dist(&pts[i], &pts[j]);
            if j == i || sep < guard {
                continue;
            }
            let ratio = dist(&proj[i], &proj[j]) / sep;
            if local.is_none_or(|l| ratio < l.0) {
                local = Some((ratio, j));
            }
        }
        if let Some((ratio, j)) = local {
            best.push((ratio, i, j));
        }
    }
    best.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for &(ratio, i, j) in best.iter().take(12) {
        if ratio > cfg.refine_below || seen.len() >= 4 {
            break;
        }
        if seen.contains(&(j, i)) {
            continue;
        }
        seen.push((i, j));
        let s = derive_seed(seed, &[0x7265_6669, i as u64, j as u64]);
        if let Some(c) = refine_partner(oracle, x, tg, r, &pts[i], &pts[j], s, cfg)? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

/// Samples `X ∩ B(x, ρ)` for `ρ = r, r/2, r/4` and looks for distinct
/// points with (nearly) equal projections onto `tg_x`. The map counts as
/// non-injective when such a pair exists at every radius.
pub fn check_projection_injectivity(
    oracle: &SetOracle,
    x: &[f64],
    tg_x: &Subspace,
    r: f64,
    m: usize,
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<InjectivityCheck> {
    check_dim(oracle.ambient_dim(), x.len())?;
    check_dim(oracle.ambient_dim(), tg_x.ambient_dim())?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(contract("injectivity radius must be positive"));
    }
    let radii = vec![r, r / 2.0, r / 4.0];
    let mut collided = Vec::new();
    let mut collision = None;
    for (j, &rho) in radii.iter().enumerate() {
        let c = collision_at(oracle, x, tg_x, rho, m, derive_seed(seed, &[j as u64]), cfg)?;
        collided.push(c.is_some());
        if c.is_none() {
            break;
        }
        collision = c;
    }
    let injective = collided.len() < radii.len() || !collided.iter().all(|&c| c);
    Ok(InjectivityCheck {
        base: x.to_vec(),
        injective,
        radii,
        collided,
        collision: if injective { None } else { collision },
    })
}

/// Projection test on a precomputed bundle; also returns the per-probe checks.
pub fn gluck_from(
    oracle: &SetOracle,
    grid: &ProbeGrid,
    bundle: &BundleReport,
    cfg: &AnalysisConfig,
) -> Result<(Verdict, Vec<InjectivityCheck>)> {
    let mode = Mode::Gluck;
    if let Some(v) = bundle_obstruction(mode, grid, bundle, cfg) {
        return Ok((v, Vec::new()));
    }
    let k = bundle.dim.unwrap_or(0);
    let r = cfg.cones.r0 * oracle.scale();
    let base = derive_seed(cfg.seed, &[0x676c_7563]);
    let checks: Vec<Result<InjectivityCheck>> = grid
        .points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let tg = bundle.fiber(i).expect("trivial bundle has fibers");
            if tg.dim() == 0 {
                return Ok(InjectivityCheck {
                    base: x.clone(),
                    injective: true,
                    radii: Vec::new(),
                    collided: Vec::new(),
                    collision: None,
                });
            }
            let seed = derive_seed(base, &[i as u64]);
            check_projection_injectivity(oracle, x, tg, r, cfg.classifier.injectivity_samples, seed, &cfg.classifier)
        })
        .collect();
    let mut done = Vec::with_capacity(checks.len());
    let mut short = Vec::new();
    for (i, c) in checks.into_iter().enumerate() {
        match c {
            Ok(c) => done.push(c),
            Err(Error::Inconclusive(_)) => short.push(i),
            Err(e) => return Err(e),
        }
    }
    if let Some((i, c)) = done.iter().enumerate().find(|(_, c)| !c.injective) {
        let col = c.collision.as_ref().expect("non-injective checks carry a collision");
        let w = Witness::ProjectionCollision {
            base: c.base.clone(),
            p: col.p.clone(),
            q: col.q.clone(),
            fiber_gap: col.fiber_gap,
            separation: col.separation,
            radius: col.radius,
        };
        let probe = (0..grid.len()).find(|&j| grid.points[j] == c.base).unwrap_or(i);
        return Ok((Verdict::new(mode, Outcome::NotC1 { witness: w }, vec![probe]), done));
    }
    if !short.is_empty() {
        let reason = format!("too few samples for the injectivity check at {} probes", short.len());
        return Ok((Verdict::inconclusive(mode, reason, None, short), done));
    }
    Ok((Verdict::new(mode, Outcome::C1Manifold { k }, (0..grid.len()).collect()), done))
}

/// Verdict from a continuous trivial tangent bundle with locally injective projections.
pub fn classify_gluck(oracle: &SetOracle, grid: &ProbeGrid, cfg: &AnalysisConfig) -> Result<Verdict> {
    cfg.validate()?;
    let tg = probe_cones(oracle, grid, cfg, ConeKind::Tangent)?;
    let bundle = assemble_bundle(grid, tg, cfg)?;
    Ok(gluck_from(oracle, grid, &bundle, cfg)?.0)
}

pub fn classify(oracle: &SetOracle, grid: &ProbeGrid, cfg: &AnalysisConfig, mode: Mode) -> Result<Verdict> {
    match mode {
        Mode::TwoCones => classify_two_cones(oracle, grid, cfg),
        Mode::Density => classify_density(oracle, grid, cfg),
        Mode::Gluck => classify_gluck(oracle, grid, cfg),
    }
}

/// Whether the projections of `X ∩ B(x, r)` onto `tg_x` meet every cell of
/// side `grid_res` centered in the ball of radius `r/4` about `π(x)`.
pub fn check_openness(oracle: &SetOracle, x: &[f64], tg_x: &Subspace, r: f64, grid_res: f64, samples: usize, seed: u64) -> Result<bool> {
    check_dim(oracle.ambient_dim(), x.len())?;
    check_dim(oracle.ambient_dim(), tg_x.ambient_dim())?;
    if !(r > 0.0 && grid_res > 0.0) {
        return Err(contract("openness check needs positive radius and resolution"));
    }
    let k = tg_x.dim();
    if k == 0 {
        return Ok(false);
    }
    let pts = oracle.sample_in_ball(x, r, samples, seed)?;
    let reach = r / 4.0;
    let cells_per_axis = (2.0 * reach / grid_res).ceil() as i64;
    let cell_of = |c: &[f64]| -> Vec<i64> { c.iter().map(|v| ((v + reach) / grid_res).floor() as i64).collect() };
    let mut hit = std::collections::HashSet::new();
    for p in &pts {
        let c = coords(tg_x, x, p);
        if c.iter().all(|v| v.abs() <= reach) {
            hit.insert(cell_of(&c));
        }
    }
    // Every cell whose center lies in the k-ball must be hit.
    let total = (cells_per_axis as u64).saturating_pow(k as u32);
    if total > 10_000_000 {
        return Err(Error::Resource(format!("openness grid of {total} cells")));
    }
    let mut idx = vec![0i64; k];
    loop {
        let center: Vec<f64> = idx.iter().map(|&i| -reach + (i as f64 + 0.5) * grid_res).collect();
        if crate::vecmath::norm(&center) <= reach && !hit.contains(&idx) {
            return Ok(false);
        }
        let mut a = 0;
        loop {
            if a == k {
                return Ok(true);
            }
            idx[a] += 1;
            if idx[a] < cells_per_axis {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setmodel::corpus_entry;

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    #[test]
    fn grid_adjacency_is_symmetric_and_on_the_set() {
        let o = corpus_entry("circle").unwrap().oracle;
        let g = ProbeGrid::from_oracle(&o, &cfg().classifier).unwrap();
        assert!(g.len() >= 64);
        assert!(g.eta > 0.0);
        assert!(g.adjacency.iter().all(|&(i, j)| i < j && dist(&g.points[i], &g.points[j]) <= g.eta));
        assert!(g.points.iter().all(|p| o.membership(p, 1e-9)));
        assert!(ProbeGrid::from_points(&o, vec![vec![0.0, 0.0]], &cfg().classifier).is_err());
    }

    #[test]
    fn circle_bundle() {
        let o = corpus_entry("circle").unwrap().oracle;
        let g = ProbeGrid::from_oracle(&o, &cfg().classifier).unwrap();
        let b = bundle_report(&o, &g, &cfg()).unwrap();
        assert!(b.trivial);
        assert_eq!(b.dim, Some(1));
        // δ between tangent lines at angle Δφ is sin Δφ; chord ≈ Δφ.
        assert!((b.continuity_modulus - 1.0).abs() < 0.1, "{}", b.continuity_modulus);
        assert!(b.dim_semicontinuity_violations.is_empty());
    }

    #[test]
    fn circle_is_injective_and_open() {
        let o = corpus_entry("circle").unwrap().oracle;
        let e2 = Subspace::coordinate(2, &[1]).unwrap();
        let c = check_projection_injectivity(&o, &[1.0, 0.0], &e2, 0.1, 1000, 3, &ClassifierConfig::default()).unwrap();
        assert!(c.injective && c.collision.is_none());
        assert!(check_openness(&o, &[1.0, 0.0], &e2, 0.1, 0.005, 4000, 1).unwrap());
    }

    #[test]
    fn parabola_line_collision() {
        let o = corpus_entry("parabola_line").unwrap().oracle;
        let e1 = Subspace::coordinate(2, &[0]).unwrap();
        let c = check_projection_injectivity(&o, &[0.0, 0.0], &e1, 0.1, 1000, 3, &ClassifierConfig::default()).unwrap();
        assert!(!c.injective);
        let col = c.collision.unwrap();
        // Direct construction: (t, t^2) and (t, 0) project to the same point.
        let (p, q) = if col.p[1].abs() > col.q[1].abs() { (&col.p, &col.q) } else { (&col.q, &col.p) };
        assert!((p[1] - p[0] * p[0]).abs() < 1e-12);
        assert!(q[1].abs() < 1e-12);
        assert!((p[0] - q[0]).abs() <= 1e-3 * dist(p, q));
    }

    #[test]
    fn point_is_not_open() {
        let o = corpus_entry("point").unwrap().oracle;
        assert!(!check_openness(&o, &[0.0, 0.0], &Subspace::zero(2), 0.1, 0.01, 100, 0).unwrap());
        let line = corpus_entry("line").unwrap().oracle;
        let e1 = Subspace::coordinate(2, &[0]).unwrap();
        assert!(check_openness(&line, &[0.0, 0.0], &e1, 0.1, 0.005, 4000, 0).unwrap());
    }

    #[test]
    fn modal_prefers_majority() {
        assert_eq!(modal([1, 2, 2, 1, 2].into_iter()), Some(2));
        assert_eq!(modal(std::iter::empty()), None);
    }
}
