//! Computable descriptions of subsets of R^n.
//!
//! A [`SetOracle`] is a union of pieces (parametric charts, zero sets of a
//! function, finite point sets) together with the metadata the estimators
//! and the classifier need: declared dimension, a length scale, marked points
//! and the assumptions the caller vouches for.

pub mod chart;
pub mod corpus;
pub mod definition;
pub mod expr;
pub mod finite;
pub mod implicit;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};
use crate::rng::{derive_seed, rng_for};
use crate::vecmath::{dist, dot, norm};

pub use chart::{Chart, JacobianMode, ParamBox, Preimage};
pub use corpus::{corpus, corpus_entry, CorpusEntry};
pub use finite::FinitePoints;
pub use implicit::ImplicitSet;

#[derive(Debug, Clone)]
pub enum Piece {
    Chart(Chart),
    Implicit(ImplicitSet),
    Finite(FinitePoints),
}

impl Piece {
    pub fn dim(&self) -> usize {
        match self {
            Piece::Chart(c) => c.param_dim(),
            Piece::Implicit(s) => s.dim(),
            Piece::Finite(_) => 0,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Piece::Chart(c) => c.ambient_dim(),
            Piece::Implicit(s) => s.ambient_dim(),
            Piece::Finite(f) => f.ambient_dim(),
        }
    }

    pub fn sample(&self, center: &[f64], r: f64, m: usize, seed: u64) -> Vec<Vec<f64>> {
        match self {
            Piece::Chart(c) => c.sample(center, r, m, seed),
            Piece::Implicit(s) => s.sample(center, r, m, seed),
            Piece::Finite(f) => f.sample(center, r, m, seed),
        }
    }

    /// Distance from `p` to the piece when it is at most `radius`.
    pub fn distance_within(&self, p: &[f64], radius: f64) -> Option<f64> {
        match self {
            Piece::Chart(c) => c.distance_within(p, radius).filter(|d| *d <= radius),
            Piece::Implicit(s) => Some(s.distance_estimate(p)).filter(|d| *d <= radius),
            Piece::Finite(f) => f.distance_within(p, radius),
        }
    }

    pub fn similarity(&self, s: f64, rot: &[Vec<f64>], shift: &[f64]) -> Piece {
        match self {
            Piece::Chart(c) => Piece::Chart(c.similarity(s, rot, shift)),
            Piece::Implicit(i) => Piece::Implicit(i.similarity(s, rot, shift)),
            Piece::Finite(f) => Piece::Finite(f.similarity(s, rot, shift)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialPoint {
    pub label: String,
    pub point: Vec<f64>,
}

/// Properties the classifier relies on but cannot check by sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumptions {
    pub connected: bool,
    pub locally_closed: bool,
    pub definable: bool,
}

impl Default for Assumptions {
    fn default() -> Self {
        Self { connected: true, locally_closed: true, definable: true }
    }
}

#[derive(Debug, Clone)]
pub struct SetOracle {
    name: String,
    ambient_dim: usize,
    intrinsic_dim: usize,
    scale: f64,
    pieces: Vec<Piece>,
    special_points: Vec<SpecialPoint>,
    assumptions: Assumptions,
    note: String,
    probes_per_chart: usize,
}

impl SetOracle {
    pub fn new(name: impl Into<String>, ambient_dim: usize, intrinsic_dim: usize) -> Self {
        Self {
            name: name.into(),
            ambient_dim,
            intrinsic_dim,
            scale: 1.0,
            pieces: Vec::new(),
            special_points: Vec::new(),
            assumptions: Assumptions::default(),
            note: String::new(),
            probes_per_chart: 64,
        }
    }

    pub fn with_piece(mut self, piece: Piece) -> Self {
        assert_eq!(piece.ambient_dim(), self.ambient_dim, "piece lives in another space");
        self.pieces.push(piece);
        self
    }

    pub fn with_chart(self, chart: Chart) -> Self {
        self.with_piece(Piece::Chart(chart))
    }

    pub fn with_special(mut self, label: impl Into<String>, point: Vec<f64>) -> Self {
        self.special_points.push(SpecialPoint { label: label.into(), point });
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_assumptions(mut self, assumptions: Assumptions) -> Self {
        self.assumptions = assumptions;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn with_probes_per_chart(mut self, n: usize) -> Self {
        self.probes_per_chart = n;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    /// Characteristic length of the set; default radii are multiples of it.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn charts(&self) -> impl Iterator<Item = &Chart> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Chart(c) => Some(c),
            _ => None,
        })
    }

    pub fn special_points(&self) -> &[SpecialPoint] {
        &self.special_points
    }

    pub fn special_point(&self, label: &str) -> Option<&[f64]> {
        self.special_points.iter().find(|s| s.label == label).map(|s| s.point.as_slice())
    }

    pub fn assumptions(&self) -> Assumptions {
        self.assumptions
    }

    /// Truncations and approximations made by this representation.
    pub fn note(&self) -> &str {
        &self.note
    }

    pub fn probes_per_chart(&self) -> usize {
        self.probes_per_chart
    }

    /// Whether `dist(p, X) <= tau`, up to the accuracy of the piece searches.
    pub fn membership(&self, p: &[f64], tau: f64) -> bool {
        if p.len() != self.ambient_dim {
            return false;
        }
        self.distance_within(p, tau).is_some()
    }

    /// Distance from `p` to the set when it is at most `radius`.
    pub fn distance_within(&self, p: &[f64], radius: f64) -> Option<f64> {
        self.pieces.iter().filter_map(|piece| piece.distance_within(p, radius)).min_by(f64::total_cmp)
    }

    /// Up to `m` points of the set in the closed ball `B(center, r)`. An
    /// empty result is legitimate (nothing found within the budget).
    pub fn sample_in_ball(&self, center: &[f64], r: f64, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        check_dim(self.ambient_dim, center.len())?;
        if !(r > 0.0) || !r.is_finite() {
            return Err(contract(format!("sampling radius must be positive, got {r}")));
        }
        if m == 0 {
            return Err(contract("sample count must be at least 1"));
        }
        if self.pieces.len() == 1 {
            return Ok(self.pieces[0].sample(center, r, m, derive_seed(seed, &[0])));
        }
        let mut all = Vec::new();
        for (i, piece) in self.pieces.iter().enumerate() {
            all.extend(piece.sample(center, r, m, derive_seed(seed, &[i as u64])));
        }
        if all.len() <= m {
            return Ok(all);
        }
        let mut rng = rng_for(seed, &[0x756e_696f_6e]);
        let mut pick = index::sample(&mut rng, all.len(), m).into_vec();
        pick.sort_unstable();
        Ok(pick.into_iter().map(|i| all[i].clone()).collect())
    }

    /// Default probe locations: marked points first, then a grid per chart,
    /// draws around the first marked point for implicit pieces, and the
    /// leading points of finite pieces.
    pub fn probe_points(&self, per_piece: Option<usize>) -> Vec<Vec<f64>> {
        let per = per_piece.unwrap_or(self.probes_per_chart);
        let mut out: Vec<Vec<f64>> = self.special_points.iter().map(|s| s.point.clone()).collect();
        let anchor = self
            .special_points
            .first()
            .map(|s| s.point.clone())
            .unwrap_or_else(|| vec![0.0; self.ambient_dim]);
        for (i, piece) in self.pieces.iter().enumerate() {
            match piece {
                Piece::Chart(c) => out.extend(c.probe_params(per).iter().map(|t| c.point(t))),
                Piece::Implicit(s) => out.extend(s.sample(&anchor, 0.9 * self.scale, per, derive_seed(0, &[i as u64]))),
                Piece::Finite(f) => out.extend(f.spread(per)),
            }
        }
        let mut uniq: Vec<Vec<f64>> = Vec::with_capacity(out.len());
        for p in out {
            if !uniq.iter().any(|q| dist(q, &p) <= 1e-12 * norm(&p).max(1.0)) {
                uniq.push(p);
            }
        }
        uniq
    }

    /// Image under `x -> s R x + b` with `R` orthogonal and `s > 0`.
    pub fn similarity(&self, s: f64, rot: &[Vec<f64>], shift: &[f64]) -> Result<SetOracle> {
        let n = self.ambient_dim;
        check_dim(n, rot.len())?;
        check_dim(n, shift.len())?;
        if !(s > 0.0) {
            return Err(contract("similarity factor must be positive"));
        }
        let map = |p: &[f64]| -> Vec<f64> { (0..n).map(|i| s * dot(&rot[i], p) + shift[i]).collect() };
        Ok(SetOracle {
            name: self.name.clone(),
            ambient_dim: n,
            intrinsic_dim: self.intrinsic_dim,
            scale: self.scale * s,
            pieces: self.pieces.iter().map(|p| p.similarity(s, rot, shift)).collect(),
            special_points: self
                .special_points
                .iter()
                .map(|sp| SpecialPoint { label: sp.label.clone(), point: map(&sp.point) })
                .collect(),
            assumptions: self.assumptions,
            note: self.note.clone(),
            probes_per_chart: self.probes_per_chart,
        })
    }
}

/// Rotation by `angle` in the coordinate plane `(i, j)` of R^n.
pub fn plane_rotation(n: usize, i: usize, j: usize, angle: f64) -> Vec<Vec<f64>> {
    let mut r: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect();
    let (s, c) = angle.sin_cos();
    r[i][i] = c;
    r[i][j] = -s;
    r[j][i] = s;
    r[j][j] = c;
    r
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    fn segment() -> SetOracle {
        SetOracle::new("segment", 2, 1).with_chart(
            Chart::new(2, ParamBox::new(vec![-1.0], vec![1.0]), Arc::new(|t, x| {
                x[0] = t[0];
                x[1] = 0.0;
            }))
            .with_preimage(Preimage::LeftInverse { matrix: vec![vec![1.0, 0.0]], offset: vec![0.0, 0.0], gain: 1.0 }),
        )
    }

    #[test]
    fn contract_checks() {
        let s = segment();
        assert!(s.sample_in_ball(&[0.0, 0.0], 0.0, 5, 1).is_err());
        assert!(s.sample_in_ball(&[0.0, 0.0], 1.0, 0, 1).is_err());
        assert!(s.sample_in_ball(&[0.0], 1.0, 5, 1).is_err());
    }

    #[test]
    fn union_sampling_is_deterministic() {
        let s = segment().with_piece(Piece::Finite(FinitePoints::new(2, vec![vec![0.0, 0.5], vec![0.1, 0.2]])));
        let a = s.sample_in_ball(&[0.0, 0.0], 0.6, 20, 9).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a, s.sample_in_ball(&[0.0, 0.0], 0.6, 20, 9).unwrap());
        for p in &a {
            assert!(s.membership(p, 1e-9));
        }
    }

    #[test]
    fn similarity_moves_everything() {
        let s = segment().with_special("origin", vec![0.0, 0.0]);
        let rot = plane_rotation(2, 0, 1, std::f64::consts::FRAC_PI_2);
        let t = s.similarity(2.0, &rot, &[1.0, 1.0]).unwrap();
        assert_eq!(t.special_point("origin").unwrap(), &[1.0, 1.0]);
        assert!(t.membership(&[1.0, 2.5], 1e-9));
        assert!(!t.membership(&[2.5, 1.0], 1e-3));
        assert_eq!(t.scale(), 2.0);
        for p in t.sample_in_ball(&[1.0, 1.0], 0.5, 30, 2).unwrap() {
            assert!((p[0] - 1.0).abs() < 1e-12);
        }
    }
}
