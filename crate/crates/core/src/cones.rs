//! Multi-scale estimates of the tangent cone `tg_x X` and the paratangent
//! cone `ptg_x X`.
//!
//! Secant directions are collected on a geometric ladder of radii
//! `r_j = r0 * rho^j`, deduplicated on a lattice of cells on the sphere, and
//! compared tier to tier. The last tier is the estimate.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Error, Result};
use crate::grassmann::{fit_subspace, hausdorff_direction_distance, nearest_distance, Subspace, UnitDirection};
use crate::rng::{derive_seed, rng_for, Kronecker};
use crate::setmodel::SetOracle;
use crate::vecmath::{dist, norm, normalized, sub};

/// Points this close to the base (or to each other) are treated as coincident.
pub const COINCIDENT: f64 = 1e-12;
/// Partner radii of close pairs span this many decades below the tier radius.
const PARTNER_DECADES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeConfig {
    pub r0: f64,
    pub rho: f64,
    pub tiers: usize,
    /// Samples (tangent) or pairs (paratangent) per tier.
    pub m: usize,
    pub seed: u64,
    /// Cell size of the direction lattice, in radians.
    pub bin_resolution: f64,
    /// Largest Hausdorff distance between the last two tiers of a converged estimate.
    pub stability_tol: f64,
    /// Every unit vector of a fitted subspace must lie this close to an accepted direction.
    pub fill_tol: f64,
    pub gap_threshold: f64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self {
            r0: 0.1,
            rho: 0.5,
            tiers: 8,
            m: 1200,
            seed: 0,
            bin_resolution: 0.02,
            stability_tol: 0.05,
            fill_tol: 0.25,
            gap_threshold: crate::grassmann::DEFAULT_GAP_THRESHOLD,
        }
    }
}

impl ConeConfig {
    /// Defaults with `r0` set to a tenth of the oracle's scale.
    pub fn for_oracle(oracle: &SetOracle) -> Self {
        Self { r0: 0.1 * oracle.scale(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r0 > 0.0
            && self.r0.is_finite()
            && self.rho > 0.0
            && self.rho < 1.0
            && self.tiers >= 3
            && self.m >= 10
            && self.bin_resolution > 0.0
            && self.stability_tol > 0.0
            && self.fill_tol > 0.0
            && self.gap_threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(contract(format!("invalid cone configuration {self:?}")))
        }
    }

    pub fn radius(&self, tier: usize) -> f64 {
        self.r0 * self.rho.powi(tier as i32)
    }

    pub fn finest_radius(&self) -> f64 {
        self.radius(self.tiers - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Tangent,
    Paratangent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSubspace {
    pub subspace: Subspace,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeEstimate {
    pub kind: ConeKind,
    pub base: Vec<f64>,
    pub radii: Vec<f64>,
    /// Raw (pre-binning) direction counts per tier.
    pub sample_counts: Vec<usize>,
    pub per_tier_directions: Vec<Vec<UnitDirection>>,
    /// Binned directions of the last tier.
    pub directions: Vec<UnitDirection>,
    pub symmetric: bool,
    pub fitted: Option<FittedSubspace>,
    pub tier_fits: Vec<Option<FittedSubspace>>,
    pub dim_estimate: usize,
    pub converged: bool,
    /// Hausdorff distance between tier `j` and tier `j + 1`.
    #[serde(with = "crate::nonfinite::vec")]
    pub diagnostics: Vec<f64>,
}

impl ConeEstimate {
    pub fn fitted_subspace(&self) -> Option<&Subspace> {
        self.fitted.as_ref().map(|f| &f.subspace)
    }

    pub fn final_radius(&self) -> f64 {
        *self.radii.last().unwrap_or(&0.0)
    }
}

fn point_tag(x: &[f64]) -> u64 {
    x.iter().fold(0x9e37_79b9_7f4a_7c15u64, |h, v| (h ^ v.to_bits()).rotate_left(23).wrapping_mul(0x100_0000_01b3))
}

/// Deduplicates directions: lattice cells of size `bin` (nearest lattice
/// point), then cell centroids closer than `bin` to an earlier
/// representative are folded into it. One renormalized centroid per group.
pub fn bin_directions(dirs: &[Vec<f64>], bin: f64) -> Vec<UnitDirection> {
    let mut cells: BTreeMap<Vec<i64>, Vec<f64>> = BTreeMap::new();
    for d in dirs {
        let key: Vec<i64> = d.iter().map(|v| (v / bin).round() as i64).collect();
        let e = cells.entry(key).or_insert_with(|| vec![0.0; d.len()]);
        for (s, v) in e.iter_mut().zip(d) {
            *s += v;
        }
    }
    let mut groups: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for sum in cells.into_values() {
        let Some(c) = normalized(&sum, 0.0) else { continue };
        match groups.iter_mut().find(|(rep, _)| dist(rep, &c) <= bin) {
            Some((_, acc)) => acc.iter_mut().zip(&sum).for_each(|(a, s)| *a += s),
            None => groups.push((c, sum)),
        }
    }
    groups.into_iter().filter_map(|(_, s)| UnitDirection::normalize(&s)).collect()
}

/// Hausdorff distance between two finite point sets; infinite when exactly
/// one is empty. Breaks out of the inner scan as soon as a point cannot
/// raise the running maximum.
fn raw_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let directed = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut worst = 0.0f64;
        for p in a {
            let mut best = f64::INFINITY;
            for q in b {
                let d = crate::vecmath::dist_sq(p, q);
                if d < best {
                    best = d;
                    if best <= worst {
                        break;
                    }
                }
            }
            worst = worst.max(best);
        }
        worst.sqrt()
    };
    directed(a, b).max(directed(b, a))
}

/// Closes a set of unoriented secant directions under negation: one
/// representative per antipodal pair, then both orientations.
fn symmetrize(dirs: Vec<UnitDirection>, bin: f64) -> Vec<UnitDirection> {
    let mut kept: Vec<UnitDirection> = Vec::with_capacity(dirs.len());
    for d in dirs {
        let neg = d.negated();
        if kept.iter().all(|k| dist(k, &neg) > bin) {
            kept.push(d);
        }
    }
    let negs: Vec<UnitDirection> = kept.iter().map(UnitDirection::negated).collect();
    kept.extend(negs);
    kept
}

/// Whether every direction has an antipode within `tol`.
pub fn is_symmetric(dirs: &[UnitDirection], tol: f64) -> bool {
    dirs.iter().all(|d| nearest_distance(&d.negated(), dirs) <= tol)
}

/// Unit vectors spread over the unit sphere of `s`.
fn sphere_probes(s: &Subspace, count: usize) -> Vec<Vec<f64>> {
    let k = s.dim();
    let n = s.ambient_dim();
    if k == 1 {
        let b = s.basis()[0].clone();
        let nb: Vec<f64> = b.iter().map(|v| -v).collect();
        return vec![b, nb];
    }
    let mut seq = Kronecker::new(k, 0x5350_4845);
    let mut u = vec![0.0; k];
    let mut out = Vec::with_capacity(count);
    let mut guard = 0;
    while out.len() < count && guard < 100 * count {
        guard += 1;
        seq.next_into(&mut u);
        let c: Vec<f64> = u.iter().map(|v| 2.0 * v - 1.0).collect();
        let r = norm(&c);
        if r > 1.0 || r < 0.1 {
            continue;
        }
        let mut v = vec![0.0; n];
        for (ci, b) in c.iter().zip(s.basis()) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += ci / r * bi;
            }
        }
        out.push(v);
    }
    out
}

/// The subspace spanned by a direction set, when the set is symmetric,
/// lies close to its fit and fills the fit's unit sphere.
pub fn fit_cone(dirs: &[UnitDirection], n: usize, cfg: &ConeConfig) -> (Option<FittedSubspace>, usize, bool) {
    if dirs.is_empty() {
        return (Some(FittedSubspace { subspace: Subspace::zero(n), residual: 0.0 }), 0, true);
    }
    let symmetric = is_symmetric(dirs, 2.0 * cfg.bin_resolution);
    let (sub, residual) = match fit_subspace(dirs, n, cfg.gap_threshold) {
        Ok(v) => v,
        Err(_) => return (None, 0, symmetric),
    };
    let dim = sub.dim();
    if !symmetric || residual > 2.0 * cfg.bin_resolution {
        return (None, dim, symmetric);
    }
    let filled = sphere_probes(&sub, 256).iter().all(|v| nearest_distance(v, dirs) <= cfg.fill_tol);
    if !filled {
        return (None, dim, symmetric);
    }
    (Some(FittedSubspace { subspace: sub, residual }), dim, symmetric)
}

fn tangent_tier(oracle: &SetOracle, x: &[f64], r: f64, cfg: &ConeConfig, seed: u64) -> Result<Vec<Vec<f64>>> {
    let pts = oracle.sample_in_ball(x, r, cfg.m, seed)?;
    Ok(pts
        .iter()
        .filter_map(|p| {
            let d = sub(p, x);
            (norm(&d) >= COINCIDENT).then(|| normalized(&d, 0.0)).flatten()
        })
        .collect())
}

fn paratangent_tier(
    oracle: &SetOracle,
    x: &[f64],
    r: f64,
    cfg: &ConeConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let pts = oracle.sample_in_ball(x, r, cfg.m, seed)?;
    let half = pts.len() / 2;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..half).map(|i| (pts[i].clone(), pts[i + half].clone())).collect();
    // Close pairs: a partner within eps of each point, eps log-uniform in
    // [r * 1e-4, r], so that pairs separated on the scale of any feature of
    // the set turn up.
    let mut rng = rng_for(seed, &[0x6d61_7463]);
    for (i, p) in pts.iter().take(cfg.m / 2).enumerate() {
        let eps = r * 10f64.powf(-PARTNER_DECADES * rng.gen::<f64>());
        let q = oracle.sample_in_ball(p, eps, 1, derive_seed(seed, &[0x6d61_7463, i as u64]))?;
        if let Some(q) = q.into_iter().next() {
            if dist(&q, x) <= r {
                pairs.push((p.clone(), q));
            }
        }
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (p, q) in pairs {
        let d = sub(&p, &q);
        if norm(&d) < COINCIDENT {
            continue;
        }
        if let Some(u) = normalized(&d, 0.0) {
            out.push(u);
        }
    }
    Ok(out)
}

fn estimate(oracle: &SetOracle, x: &[f64], cfg: &ConeConfig, kind: ConeKind) -> Result<ConeEstimate> {
    cfg.validate()?;
    check_dim(oracle.ambient_dim(), x.len())?;
    let n = x.len();
    let tag = match kind {
        ConeKind::Tangent => 0x7467,
        ConeKind::Paratangent => 0x707467,
    };
    let base_seed = derive_seed(cfg.seed, &[tag, point_tag(x)]);
    let radii: Vec<f64> = (0..cfg.tiers).map(|j| cfg.radius(j)).collect();
    let raw: Vec<Vec<Vec<f64>>> = radii
        .par_iter()
        .enumerate()
        .map(|(j, &r)| {
            let seed = derive_seed(base_seed, &[j as u64]);
            match kind {
                ConeKind::Tangent => tangent_tier(oracle, x, r, cfg, seed),
                ConeKind::Paratangent => paratangent_tier(oracle, x, r, cfg, seed),
            }
        })
        .collect::<Result<_>>()?;
    let sample_counts = raw.iter().map(Vec::len).collect();
    let per_tier: Vec<Vec<UnitDirection>> = raw
        .iter()
        .map(|d| {
            let binned = bin_directions(d, cfg.bin_resolution);
            match kind {
                ConeKind::Tangent => binned,
                ConeKind::Paratangent => symmetrize(binned, cfg.bin_resolution),
            }
        })
        .collect();
    let full: Vec<Vec<Vec<f64>>> = match kind {
        ConeKind::Tangent => raw,
        ConeKind::Paratangent => raw
            .into_iter()
            .map(|d| d.iter().flat_map(|u| [u.clone(), u.iter().map(|v| -v).collect()]).collect())
            .collect(),
    };
    let diagnostics: Vec<f64> = full.windows(2).map(|w| raw_hausdorff(&w[0], &w[1])).collect();
    let converged = diagnostics.last().is_some_and(|d| *d <= cfg.stability_tol);
    let tier_fits = per_tier.iter().map(|d| fit_cone(d, n, cfg).0).collect();
    let directions = per_tier.last().cloned().unwrap_or_default();
    let (fitted, span_dim, symmetric) = fit_cone(&directions, n, cfg);
    let dim_estimate = fitted.as_ref().map_or(span_dim, |f| f.subspace.dim());
    Ok(ConeEstimate {
        kind,
        base: x.to_vec(),
        radii,
        sample_counts,
        per_tier_directions: per_tier,
        directions,
        symmetric,
        fitted,
        tier_fits,
        dim_estimate,
        converged,
        diagnostics,
    })
}

/// Estimates `tg_x X` from secants `(p - x)/|p - x|`, `p` in `X ∩ B(x, r_j)`.
pub fn estimate_tangent_cone(oracle: &SetOracle, x: &[f64], cfg: &ConeConfig) -> Result<ConeEstimate> {
    estimate(oracle, x, cfg, ConeKind::Tangent)
}

/// Estimates `ptg_x X` from secants `+-(p - q)/|p - q|` of pairs in
/// `X ∩ B(x, r_j)`: half drawn independently, half at matched scale.
pub fn estimate_paratangent_cone(oracle: &SetOracle, x: &[f64], cfg: &ConeConfig) -> Result<ConeEstimate> {
    estimate(oracle, x, cfg, ConeKind::Paratangent)
}

/// Whether the two estimates agree within `tol` (Hausdorff distance on the
/// sphere), with the paratangent directions farther than `tol` from every
/// tangent direction. Unconverged input yields [`Error::Inconclusive`].
pub fn cones_coincide(tg: &ConeEstimate, ptg: &ConeEstimate, tol: f64) -> Result<(bool, Vec<UnitDirection>)> {
    if tg.kind != ConeKind::Tangent || ptg.kind != ConeKind::Paratangent {
        return Err(contract("cones_coincide expects a tangent and a paratangent estimate"));
    }
    if dist(&tg.base, &ptg.base) > 0.0 {
        return Err(contract("cone estimates at different base points"));
    }
    if !tg.converged || !ptg.converged {
        return Err(Error::Inconclusive(format!(
            "cone estimates at {:?} did not converge (tangent {}, paratangent {})",
            tg.base, tg.converged, ptg.converged
        )));
    }
    let h = hausdorff_direction_distance(&tg.directions, &ptg.directions)?;
    let excess: Vec<UnitDirection> = ptg
        .directions
        .iter()
        .filter(|d| nearest_distance(d, &tg.directions) > tol)
        .cloned()
        .collect();
    Ok((h <= tol, excess))
}

/// Paratangent directions farther than `tol` from every accepted tangent
/// direction, provided each of the last `tiers` paratangent tiers has such
/// directions; otherwise `None`. Requires a converged tangent estimate but
/// not a converged paratangent one: excess secants that keep appearing as
/// the radius shrinks are evidence on their own, whereas equality of the
/// cones needs the paratangent set to have settled.
pub fn persistent_excess(tg: &ConeEstimate, ptg: &ConeEstimate, tol: f64, tiers: usize) -> Option<Vec<UnitDirection>> {
    if !tg.converged || tg.kind != ConeKind::Tangent || ptg.kind != ConeKind::Paratangent {
        return None;
    }
    let t = ptg.per_tier_directions.len();
    if tiers == 0 || tiers > t {
        return None;
    }
    let off = |tier: &[UnitDirection]| -> Vec<UnitDirection> {
        tier.iter().filter(|d| nearest_distance(d, &tg.directions) > tol).cloned().collect()
    };
    if ptg.per_tier_directions[t - tiers..].iter().any(|tier| off(tier).is_empty()) {
        return None;
    }
    Some(off(&ptg.directions))
}

/// The direction of `set` farthest from `target`, with that distance.
pub fn farthest_from(set: &[UnitDirection], target: &[UnitDirection]) -> Option<(UnitDirection, f64)> {
    set.iter()
        .map(|d| (d.clone(), nearest_distance(d, target)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grassmann::grassmann_delta;
    use crate::setmodel::{corpus_entry, Chart, FinitePoints, ParamBox, Piece, Preimage};

    fn x_axis() -> SetOracle {
        SetOracle::new("x", 2, 1).with_chart(
            Chart::new(2, ParamBox::new(vec![-1.0], vec![1.0]), Arc::new(|t, x| {
                x[0] = t[0];
                x[1] = 0.0;
            }))
            .with_preimage(Preimage::LeftInverse { matrix: vec![vec![1.0, 0.0]], offset: vec![0.0; 2], gain: 1.0 }),
        )
    }

    #[test]
    fn config_validation() {
        assert!(ConeConfig::default().validate().is_ok());
        assert!(ConeConfig { rho: 1.0, ..Default::default() }.validate().is_err());
        assert!(ConeConfig { tiers: 2, ..Default::default() }.validate().is_err());
        assert!(ConeConfig { m: 5, ..Default::default() }.validate().is_err());
        assert!(ConeConfig { r0: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn line_cones() {
        let o = x_axis();
        let cfg = ConeConfig::default();
        let tg = estimate_tangent_cone(&o, &[0.0, 0.0], &cfg).unwrap();
        assert!(tg.converged);
        assert_eq!(tg.dim_estimate, 1);
        let e1 = Subspace::coordinate(2, &[0]).unwrap();
        assert!(grassmann_delta(tg.fitted_subspace().unwrap(), &e1).unwrap() < 1e-9);
        assert_eq!(tg.directions.len(), 2);
        let ptg = estimate_paratangent_cone(&o, &[0.0, 0.0], &cfg).unwrap();
        assert!(grassmann_delta(ptg.fitted_subspace().unwrap(), &e1).unwrap() < 1e-9);
        let (same, excess) = cones_coincide(&tg, &ptg, 0.1).unwrap();
        assert!(same && excess.is_empty());
    }

    #[test]
    fn single_point_has_empty_cones() {
        let o = SetOracle::new("p", 2, 0).with_piece(Piece::Finite(FinitePoints::new(2, vec![vec![0.0, 0.0]])));
        let cfg = ConeConfig::default();
        let ptg = estimate_paratangent_cone(&o, &[0.0, 0.0], &cfg).unwrap();
        assert!(ptg.directions.is_empty());
        assert_eq!(ptg.dim_estimate, 0);
        assert!(ptg.converged);
    }

    #[test]
    fn parabola_line_excess() {
        let e = corpus_entry("parabola_line").unwrap();
        let cfg = ConeConfig::for_oracle(&e.oracle);
        let x = [0.0, 0.0];
        let tg = estimate_tangent_cone(&e.oracle, &x, &cfg).unwrap();
        assert_eq!(tg.dim_estimate, 1);
        assert!(tg.fitted.is_some());
        let ptg = estimate_paratangent_cone(&e.oracle, &x, &cfg).unwrap();
        let target = [std::f64::consts::FRAC_1_SQRT_2; 2];
        assert!(ptg.directions.iter().any(|d| dist(d, &target) <= 0.1));
        assert!(is_symmetric(&ptg.directions, 1e-12));
        let excess = persistent_excess(&tg, &ptg, 0.1, 3).unwrap();
        assert!(excess.iter().any(|d| dist(d, &target) <= 0.1));
    }

    #[test]
    fn half_line_is_not_fitted() {
        let e = corpus_entry("half_line").unwrap();
        let tg = estimate_tangent_cone(&e.oracle, &[0.0], &ConeConfig::for_oracle(&e.oracle)).unwrap();
        assert_eq!(tg.directions.len(), 1);
        assert!(!tg.symmetric);
        assert!(tg.fitted.is_none());
    }

    #[test]
    fn binning_dedups() {
        let d = vec![vec![1.0, 0.0], vec![0.9999, 0.0001], vec![0.0, 1.0]];
        assert_eq!(bin_directions(&d, 0.02).len(), 2);
    }

    #[test]
    fn unconverged_is_inconclusive() {
        let o = x_axis();
        let cfg = ConeConfig::default();
        let mut tg = estimate_tangent_cone(&o, &[0.0, 0.0], &cfg).unwrap();
        let ptg = estimate_paratangent_cone(&o, &[0.0, 0.0], &cfg).unwrap();
        tg.converged = false;
        assert!(matches!(cones_coincide(&tg, &ptg, 0.1), Err(Error::Inconclusive(_))));
        assert!(cones_coincide(&ptg, &tg, 0.1).is_err());
    }
}
