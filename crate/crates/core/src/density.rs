//! Hausdorff measure of `X ∩ B(x, r)` and the density ratios built on it.
//!
//! The density `θ(X, x)` divides by `μ_k r^k` with `k = dim X`; the lower
//! density `Θ(X, x)` uses `k = dim tg_x X`. Callers pick `k` explicitly.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};
use crate::rng::derive_seed;
use crate::setmodel::{Piece, SetOracle};

/// Tail ratios above this, and still growing, are reported as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e3;
pub const FIT_EXPONENTS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
/// Relative RMS residual above which the extrapolation is flagged.
pub const MISFIT_TOL: f64 = 0.05;
pub const DEFAULT_N_MC: usize = 8000;
/// Relative standard error above which a radius is measured again with
/// `RESAMPLE_FACTOR` times the draws.
pub const NOISY_REL_ERR: f64 = 0.05;
pub const RESAMPLE_FACTOR: usize = 16;

/// Volume of the unit ball in R^k, `π^{k/2} / Γ(k/2 + 1)`.
pub fn unit_ball_volume(k: i64) -> Result<f64> {
    if k < 0 {
        return Err(contract(format!("unit ball of negative dimension {k}")));
    }
    Ok(mu(k as usize))
}

pub(crate) fn mu(k: usize) -> f64 {
    // μ_k = 2π/k · μ_{k-2}, starting from μ_0 = 1 and μ_1 = 2.
    let mut v = if k % 2 == 0 { 1.0 } else { 2.0 };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        v *= 2.0 * PI / j as f64;
        j += 2;
    }
    v
}

/// Radii `0.1 * 2^-j * scale`, `j = 0..8`.
pub fn default_schedule(oracle: &SetOracle) -> Vec<f64> {
    (0..8).map(|j| 0.1 * oracle.scale() * 0.5f64.powi(j)).collect()
}

/// `H^k(X ∩ B(x, r))` with its standard error.
///
/// Pieces of dimension `k` are integrated (charts), box-counted (implicit
/// sets) or counted (finite sets, `k = 0`). A piece of dimension above `k`
/// that meets the ball has infinite `H^k` measure; one of dimension below
/// `k` has measure zero.
pub fn estimate_measure(oracle: &SetOracle, x: &[f64], r: f64, k: usize, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    check_dim(oracle.ambient_dim(), x.len())?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(contract(format!("radius must be positive and finite, got {r}")));
    }
    if k > oracle.ambient_dim() {
        return Err(contract(format!("k = {k} exceeds the ambient dimension {}", oracle.ambient_dim())));
    }
    let (mut est, mut var) = (0.0, 0.0);
    for (i, piece) in oracle.pieces().iter().enumerate() {
        let s = derive_seed(seed, &[i as u64]);
        let d = piece.dim();
        if d < k {
            continue;
        }
        if d > k {
            if !piece.sample(x, r, 1, s).is_empty() {
                return Ok((f64::INFINITY, 0.0));
            }
            continue;
        }
        match piece {
            Piece::Chart(c) => {
                let (e, se) = c.measure(x, r, n_mc, s);
                est += e;
                var += se * se;
            }
            Piece::Implicit(imp) => est += imp.box_count(x, r, s)?,
            Piece::Finite(f) => est += f.count(x, r) as f64,
        }
    }
    Ok((est, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Density,
    LowerDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRatio {
    pub radius: f64,
    #[serde(with = "crate::nonfinite")]
    pub measure: f64,
    #[serde(with = "crate::nonfinite")]
    pub stderr: f64,
    #[serde(with = "crate::nonfinite")]
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub base: Vec<f64>,
    pub k: usize,
    pub kind: DensityKind,
    pub per_radius: Vec<RadiusRatio>,
    /// Extrapolated limit, or `inf` when the ratios diverge.
    #[serde(with = "crate::nonfinite")]
    pub value: f64,
    /// `α` of the selected fit `θ + c r^α`; absent when a constant fits as
    /// well as any power law, or for the lower density.
    pub fit_exponent: Option<f64>,
    /// Relative RMS residual of the selected fit.
    #[serde(with = "crate::nonfinite")]
    pub fit_residual: f64,
    /// Standard error of the ratio at the smallest radius.
    #[serde(with = "crate::nonfinite")]
    pub stderr: f64,
    pub misfit: bool,
    /// False when the fit is poor or the tail ratios oscillate beyond their error bars.
    pub reliable: bool,
}

impl DensityEstimate {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.per_radius.iter().map(|r| r.ratio).collect()
    }
}

struct Fit {
    value: f64,
    exponent: Option<f64>,
    residual: f64,
}

/// Least squares of `y ≈ a + c t`.
fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let stt: f64 = t.iter().map(|v| (v - mt) * (v - mt)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let c = if stt > 0.0 { sty / stt } else { 0.0 };
    let a = my - c * mt;
    let rss = t.iter().zip(y).map(|(a0, b)| (b - a - c * a0).powi(2)).sum();
    (a, c, rss)
}

/// Picks the power law with the smallest residual, but keeps the constant
/// model unless the power law explains more than the sampling noise.
fn extrapolate(radii: &[f64], ratios: &[f64], errs: &[f64]) -> Fit {
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let rss_const: f64 = ratios.iter().map(|v| (v - mean).powi(2)).sum();
    let noise: f64 = errs.iter().zip(ratios).map(|(e, v)| if *e > 0.0 { e * e } else { (1e-3 * v).powi(2) }).sum();
    let mut best: Option<(f64, f64, f64)> = None;
    for alpha in FIT_EXPONENTS {
        let t: Vec<f64> = radii.iter().map(|r| r.powf(alpha)).collect();
        let (a, _, rss) = linear_fit(&t, ratios);
        if best.is_none_or(|b| rss < b.2) {
            best = Some((alpha, a, rss));
        }
    }
    let scale = mean.abs().max(1e-12);
    match best {
        Some((alpha, a, rss)) if rss_const - rss > 4.0 * noise => Fit {
            value: a.max(0.0),
            exponent: Some(alpha),
            residual: (rss / n).sqrt() / scale,
        },
        _ => Fit { value: mean.max(0.0), exponent: None, residual: (rss_const / n).sqrt() / scale },
    }
}

/// Extrapolates the tail, dropping its coarsest radii while the fit is
/// poor: another branch leaving the ball at the finest radii shows up as a
/// step no single power law follows. Two radii are kept only when they
/// agree, as any power law passes through two points.
fn extrapolate_tail(radii: &[f64], ratios: &[f64], errs: &[f64]) -> Fit {
    let full = extrapolate(radii, ratios, errs);
    if full.residual <= MISFIT_TOL {
        return full;
    }
    (1..ratios.len().saturating_sub(1))
        .map(|i| extrapolate(&radii[i..], &ratios[i..], &errs[i..]))
        .enumerate()
        .find(|(i, f)| f.residual <= MISFIT_TOL && (ratios.len() - i - 1 >= 3 || f.exponent.is_none()))
        .map_or(full, |(_, f)| f)
}

fn diverging(tail: &[f64]) -> bool {
    if tail.iter().any(|v| v.is_infinite()) {
        return true;
    }
    let last3 = &tail[tail.len().saturating_sub(3)..];
    last3.len() == 3 && last3.iter().all(|v| *v > DIVERGENCE_THRESHOLD) && last3.windows(2).all(|w| w[1] > w[0])
}

/// Ratios `H^k(X ∩ B(x, r_j)) / (μ_k r_j^k)` on a decreasing schedule, and
/// their limit. The density extrapolates over the last `⌈T/2⌉` radii; the
/// lower density takes the smallest tail ratio.
pub fn estimate_density(
    oracle: &SetOracle,
    x: &[f64],
    k: usize,
    kind: DensityKind,
    schedule: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<DensityEstimate> {
    if schedule.len() < 4 {
        return Err(contract(format!("need at least 4 radii, got {}", schedule.len())));
    }
    if !schedule.windows(2).all(|w| w[1] < w[0]) {
        return Err(contract("radius schedule must be strictly decreasing"));
    }
    if n_mc < 2 {
        return Err(contract("n_mc must be at least 2"));
    }
    let muk = mu(k);
    let per_radius: Vec<RadiusRatio> = schedule
        .par_iter()
        .enumerate()
        .map(|(j, &r)| {
            let (mut m, mut se) = estimate_measure(oracle, x, r, k, n_mc, derive_seed(seed, &[j as u64]))?;
            // Steep charts put few draws in the ball; spend more on them.
            if m.is_finite() && se > NOISY_REL_ERR * m {
                (m, se) = estimate_measure(oracle, x, r, k, RESAMPLE_FACTOR * n_mc, derive_seed(seed, &[j as u64, 1]))?;
            }
            let denom = muk * r.powi(k as i32);
            Ok(RadiusRatio { radius: r, measure: m, stderr: se, ratio: m / denom })
        })
        .collect::<Result<_>>()?;
    let t = per_radius.len();
    let tail = &per_radius[t - t.div_ceil(2)..];
    let ratios: Vec<f64> = tail.iter().map(|r| r.ratio).collect();
    let errs: Vec<f64> = tail.iter().map(|r| r.stderr / (muk * r.radius.powi(k as i32))).collect();
    let last = per_radius.last().expect("schedule is nonempty");
    let stderr = last.stderr / (muk * last.radius.powi(k as i32));
    let mut est = DensityEstimate {
        base: x.to_vec(),
        k,
        kind,
        value: 0.0,
        fit_exponent: None,
        fit_residual: 0.0,
        stderr,
        misfit: false,
        reliable: true,
        per_radius: per_radius.clone(),
    };
    if diverging(&ratios) {
        est.value = f64::INFINITY;
        return Ok(est);
    }
    match kind {
        DensityKind::Density => {
            let radii: Vec<f64> = tail.iter().map(|r| r.radius).collect();
            let fit = extrapolate_tail(&radii, &ratios, &errs);
            est.value = fit.value;
            est.fit_exponent = fit.exponent;
            est.fit_residual = fit.residual;
        }
        DensityKind::LowerDensity => {
            est.value = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            est.fit_residual = (ratios.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ratios.len() as f64).sqrt()
                / mean.abs().max(1e-12);
        }
    }
    est.misfit = est.fit_residual > MISFIT_TOL;
    // Direction changes of the tail that exceed the combined error bars.
    let swings = ratios
        .windows(3)
        .zip(errs.windows(3))
        .filter(|(v, e)| {
            let band = 2.0 * (e[0] + e[1] + e[2]) + 1e-3 * v[1].abs();
            let (d0, d1) = (v[1] - v[0], v[2] - v[1]);
            d0.abs() > band && d1.abs() > band && d0.signum() != d1.signum()
        })
        .count();
    est.reliable = !est.misfit && swings == 0;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setmodel::corpus_entry;

    #[test]
    fn ball_volumes() {
        // Closed forms: 1, 2, π, 4π/3, π²/2.
        let want = [1.0, 2.0, PI, 4.0 * PI / 3.0, PI * PI / 2.0];
        for (k, w) in want.iter().enumerate() {
            assert!((unit_ball_volume(k as i64).unwrap() - w).abs() < 1e-12);
        }
        assert!(unit_ball_volume(-1).is_err());
    }

    #[test]
    fn measures() {
        let line = corpus_entry("line").unwrap().oracle;
        let (m, _) = estimate_measure(&line, &[0.0, 0.0], 1.0, 1, 4000, 1).unwrap();
        assert!((m - 2.0).abs() <= 0.02, "{m}");

        let circle = corpus_entry("circle").unwrap().oracle;
        let (m, _) = estimate_measure(&circle, &[1.0, 0.0], 0.1, 1, 4000, 1).unwrap();
        let exact = 4.0 * (0.05f64).asin();
        assert!((m - exact).abs() <= 2e-3, "{m} vs {exact}");

        let cross = corpus_entry("cross").unwrap().oracle;
        let (m, se) = estimate_measure(&cross, &[0.0, 0.0], 1.0, 1, 4000, 1).unwrap();
        assert!((m - 4.0).abs() <= 0.05, "{m}");
        assert_eq!(se, 0.0);

        let point = corpus_entry("point").unwrap().oracle;
        assert_eq!(estimate_measure(&point, &[0.0, 0.0], 0.5, 0, 10, 1).unwrap(), (1.0, 0.0));
        assert_eq!(estimate_measure(&line, &[0.0, 0.0], 0.5, 2, 100, 1).unwrap().0, 0.0);
        assert!(estimate_measure(&line, &[0.0, 0.0], 0.5, 0, 100, 1).unwrap().0.is_infinite());
        assert!(estimate_measure(&line, &[0.0, 0.0], -1.0, 1, 100, 1).is_err());
    }

    #[test]
    fn schedule_contract() {
        let line = corpus_entry("line").unwrap().oracle;
        assert!(estimate_density(&line, &[0.0, 0.0], 1, DensityKind::Density, &[0.1, 0.05, 0.02], 100, 0).is_err());
        assert!(estimate_density(&line, &[0.0, 0.0], 1, DensityKind::Density, &[0.1, 0.2, 0.05, 0.02], 100, 0).is_err());
    }

    #[test]
    fn line_and_half_line() {
        let line = corpus_entry("line").unwrap().oracle;
        let e = estimate_density(&line, &[0.0, 0.0], 1, DensityKind::Density, &default_schedule(&line), 2000, 0).unwrap();
        assert!((e.value - 1.0).abs() <= 0.05, "{e:?}");
        assert!(e.reliable);
        let half = corpus_entry("half_line").unwrap().oracle;
        let e = estimate_density(&half, &[0.0], 1, DensityKind::Density, &default_schedule(&half), 2000, 0).unwrap();
        assert!((e.value - 0.5).abs() <= 0.05, "{e:?}");
    }

    #[test]
    fn cusp_divergence() {
        let cusp = corpus_entry("cusp").unwrap().oracle;
        let sched = default_schedule(&cusp);
        let theta = estimate_density(&cusp, &[0.0; 3], 2, DensityKind::Density, &sched, 4000, 0).unwrap();
        assert!(theta.value <= 0.2, "{theta:?}");
        let r = theta.ratios();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
        let lower = estimate_density(&cusp, &[0.0; 3], 1, DensityKind::LowerDensity, &sched, 4000, 0).unwrap();
        assert!(lower.is_infinite());
        let json = serde_json::to_string(&lower).unwrap();
        let back: DensityEstimate = serde_json::from_str(&json).unwrap();
        assert!(back.value.is_infinite());
    }

    #[test]
    fn extrapolation_recovers_power_laws() {
        let radii: Vec<f64> = (4..8).map(|j| 0.1 * 0.5f64.powi(j)).collect();
        for alpha in FIT_EXPONENTS {
            let c = 0.1 / radii[0].powf(alpha);
            let ratios: Vec<f64> = radii.iter().map(|r| 1.5 + c * r.powf(alpha)).collect();
            let fit = extrapolate(&radii, &ratios, &[0.0; 4]);
            assert!((fit.value - 1.5).abs() < 1e-9, "{alpha}: {}", fit.value);
            assert_eq!(fit.exponent, Some(alpha));
        }
        let flat = extrapolate(&radii, &[1.0, 1.001, 0.999, 1.0], &[0.002; 4]);
        assert_eq!(flat.exponent, None);
        assert!((flat.value - 1.0).abs() < 1e-3);
    }

    #[test]
    fn extrapolation_follows_a_late_step() {
        // A second branch at distance 2e-3 drops out of the two finest balls.
        let radii: Vec<f64> = (4..8).map(|j| 0.1 * 0.5f64.powi(j)).collect();
        let fit = extrapolate_tail(&radii, &[1.95, 1.82, 1.0, 1.0], &[3e-4, 3e-4, 0.0, 0.0]);
        assert_eq!(fit.exponent, None);
        assert!((fit.value - 1.0).abs() < 1e-9, "{}", fit.value);
        assert!(fit.residual <= MISFIT_TOL);
        // A clean power law is left alone.
        let ratios: Vec<f64> = radii.iter().map(|r| 1.0 + 20.0 * r).collect();
        assert!((extrapolate_tail(&radii, &ratios, &[0.0; 4]).value - 1.0).abs() < 1e-9);
    }
}
