//! Linear subspaces of R^n: orthonormal representation, orthogonal
//! projection, the sup-distance between subspaces, and subspace fitting from
//! clouds of unit directions.

use std::cmp::Ordering;
use std::ops::Deref;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};
use crate::vecmath::{axpy, dist, dot, norm, scale};

/// Orthonormality tolerance for stored bases.
pub const ORTHO_TOL: f64 = 1e-10;

/// Default relative eigenvalue threshold for [`fit_subspace`].
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.05;

/// A unit vector of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitDirection(Vec<f64>);

impl UnitDirection {
    /// Normalizes `v`; returns `None` for (near) zero vectors.
    pub fn normalize(v: &[f64]) -> Option<Self> {
        let n = norm(v);
        (n > 1e-300 && n.is_finite()).then(|| Self(scale(v, 1.0 / n)))
    }

    /// Wraps a vector that is already unit length within [`ORTHO_TOL`].
    pub fn from_unit(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if (n - 1.0).abs() > ORTHO_TOL {
            return Err(contract(format!("direction has norm {n}, expected 1")));
        }
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for UnitDirection {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A k-dimensional linear subspace of R^n held by an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Vec<Vec<f64>>,
}

impl Subspace {
    /// The zero subspace `{0}` of R^n.
    pub fn zero(ambient_dim: usize) -> Self {
        Self { ambient_dim, basis: Vec::new() }
    }

    /// Span of the given coordinate axes.
    pub fn coordinate(ambient_dim: usize, axes: &[usize]) -> Result<Self> {
        let vectors: Vec<Vec<f64>> = axes
            .iter()
            .map(|&a| {
                if a >= ambient_dim {
                    return Err(contract(format!("axis {a} out of range for R^{ambient_dim}")));
                }
                let mut e = vec![0.0; ambient_dim];
                e[a] = 1.0;
                Ok(e)
            })
            .collect::<Result<_>>()?;
        Self::span(ambient_dim, &vectors)
    }

    /// Span of arbitrary vectors, orthonormalized by modified Gram-Schmidt
    /// with one re-orthogonalization pass. Vectors that are (numerically)
    /// dependent on earlier ones are dropped.
    pub fn span(ambient_dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(contract("ambient dimension must be positive"));
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in vectors {
            check_dim(ambient_dim, v.len())?;
            let original = norm(v);
            if original == 0.0 {
                continue;
            }
            let mut w = v.clone();
            for _pass in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    axpy(&mut w, -c, b);
                }
            }
            let n = norm(&w);
            if n > ORTHO_TOL * original.max(1.0) {
                basis.push(scale(&w, 1.0 / n));
            }
        }
        Ok(Self { ambient_dim, basis })
    }

    /// Wraps a basis that must already be orthonormal within [`ORTHO_TOL`].
    pub fn from_orthonormal(ambient_dim: usize, basis: Vec<Vec<f64>>) -> Result<Self> {
        if basis.len() > ambient_dim {
            return Err(contract("more basis vectors than ambient dimensions"));
        }
        for (i, b) in basis.iter().enumerate() {
            check_dim(ambient_dim, b.len())?;
            if (norm(b) - 1.0).abs() > ORTHO_TOL {
                return Err(contract(format!("basis vector {i} is not unit length")));
            }
            for c in &basis[..i] {
                if dot(b, c).abs() > ORTHO_TOL {
                    return Err(contract("basis vectors are not orthogonal"));
                }
            }
        }
        Ok(Self { ambient_dim, basis })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Coordinates of the orthogonal projection of `v` in this basis.
    pub fn coordinates(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient_dim, v.len())?;
        Ok(self.basis.iter().map(|b| dot(v, b)).collect())
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let coords = self.coordinates(v)?;
        let mut out = vec![0.0; self.ambient_dim];
        for (c, b) in coords.iter().zip(&self.basis) {
            axpy(&mut out, *c, b);
        }
        Ok(out)
    }

    /// `|v - project(v)|`.
    pub fn residual(&self, v: &[f64]) -> Result<f64> {
        let p = self.project(v)?;
        Ok(dist(v, &p))
    }

    /// Applies a linear map given as a row-major matrix to the basis and
    /// re-orthonormalizes.
    pub fn map_linear(&self, m: &[Vec<f64>]) -> Result<Self> {
        let images: Vec<Vec<f64>> = self.basis.iter().map(|b| crate::vecmath::mat_vec(m, b)).collect();
        Self::span(m.len(), &images)
    }
}

/// Orthogonal projection of `v` onto `q`.
pub fn project(v: &[f64], q: &Subspace) -> Result<Vec<f64>> {
    q.project(v)
}

/// `sup { |v - pi_Q(v)| : v in P, |v| = 1 }`.
///
/// Computed as the largest singular value of `(I - Q Q^T) P` over the
/// orthonormal basis of `P`, which equals `sqrt(1 - sigma_min^2)` of the
/// basis cross-Gram matrix but stays accurate for nearly equal subspaces.
/// With `P = {0}` the supremum is over the empty set and is `0`; with
/// `Q = {0}` and `dim P >= 1` it is `1`.
pub fn grassmann_delta(p: &Subspace, q: &Subspace) -> Result<f64> {
    check_dim(p.ambient_dim, q.ambient_dim)?;
    let k = p.dim();
    if k == 0 {
        return Ok(0.0);
    }
    let residuals: Vec<Vec<f64>> = p
        .basis
        .iter()
        .map(|b| {
            let pr = q.project(b)?;
            Ok(b.iter().zip(&pr).map(|(x, y)| x - y).collect())
        })
        .collect::<Result<_>>()?;
    let gram = DMatrix::from_fn(k, k, |i, j| dot(&residuals[i], &residuals[j]));
    let top = if k == 1 {
        gram[(0, 0)]
    } else {
        SymmetricEigen::new(gram).eigenvalues.iter().cloned().fold(0.0, f64::max)
    };
    Ok(top.max(0.0).sqrt().min(1.0))
}

/// True when `P` and `Q` are orthogonal in the sup-distance sense,
/// i.e. `delta(P, Q) >= 1 - tol`.
pub fn is_orthogonal(p: &Subspace, q: &Subspace, tol: f64) -> Result<bool> {
    Ok(grassmann_delta(p, q)? >= 1.0 - tol)
}

/// Fits a subspace to a cloud of unit directions.
///
/// The cloud is symmetrized (each `d` also contributes `-d`), which leaves
/// the second-moment matrix `sum d d^T` unchanged. Eigenvectors whose
/// eigenvalue exceeds `gap_threshold * lambda_max` span the fit, capped at
/// `max_dim`. The residual is the largest distance from an input direction
/// to the fitted subspace.
pub fn fit_subspace(
    directions: &[UnitDirection],
    max_dim: usize,
    gap_threshold: f64,
) -> Result<(Subspace, f64)> {
    let first = directions
        .first()
        .ok_or_else(|| contract("fit_subspace needs at least one direction"))?;
    let n = first.dim();
    let mut moment = DMatrix::<f64>::zeros(n, n);
    for d in directions {
        check_dim(n, d.dim())?;
        for i in 0..n {
            for j in i..n {
                moment[(i, j)] += d[i] * d[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            moment[(i, j)] = moment[(j, i)];
        }
    }
    let eig = SymmetricEigen::new(moment);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().cloned().collect();
            canonical_sign(&mut v);
            (eig.eigenvalues[i], v)
        })
        .collect();
    let lambda_max = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let tie = 1e-12 * lambda_max.max(1.0);
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tie {
            lexicographic(&a.1, &b.1)
        } else {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal)
        }
    });
    let chosen: Vec<Vec<f64>> = pairs
        .into_iter()
        .filter(|(l, _)| *l > gap_threshold * lambda_max && *l > 0.0)
        .take(max_dim.min(n))
        .map(|(_, v)| v)
        .collect();
    let sub = Subspace::span(n, &chosen)?;
    let mut residual: f64 = 0.0;
    for d in directions {
        residual = residual.max(sub.residual(d)?);
    }
    Ok((sub, residual))
}

/// Makes the first entry of largest magnitude positive.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Symmetric Hausdorff distance between finite subsets of the unit sphere
/// under the Euclidean metric. Empty-vs-empty is `0`; empty-vs-nonempty is
/// `2`, the diameter of the sphere.
pub fn hausdorff_direction_distance(a: &[UnitDirection], b: &[UnitDirection]) -> Result<f64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(2.0),
        _ => {}
    }
    let n = a[0].dim();
    for d in a.iter().chain(b) {
        check_dim(n, d.dim())?;
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// `sup_{x in a} dist(x, b)` for nonempty `b`.
pub(crate) fn directed_hausdorff(a: &[UnitDirection], b: &[UnitDirection]) -> f64 {
    a.iter().map(|x| nearest_distance(x, b)).fold(0.0, f64::max)
}

pub(crate) fn nearest_distance(x: &[f64], set: &[UnitDirection]) -> f64 {
    set.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(v: &[f64]) -> UnitDirection {
        UnitDirection::normalize(v).unwrap()
    }

    #[test]
    fn project_examples() {
        let q = Subspace::coordinate(3, &[0, 1]).unwrap();
        assert_eq!(project(&[1.0, 1.0, 0.0], &q).unwrap(), vec![1.0, 1.0, 0.0]);
        assert_eq!(project(&[0.0, 0.0, 1.0], &q).unwrap(), vec![0.0, 0.0, 0.0]);
        let diag = Subspace::span(2, &[vec![1.0, 1.0]]).unwrap();
        let p = project(&[1.0, 0.0], &diag).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn project_rejects_dimension_mismatch() {
        let q = Subspace::coordinate(3, &[0]).unwrap();
        assert!(project(&[1.0, 0.0], &q).is_err());
    }

    #[test]
    fn delta_examples() {
        let p = Subspace::span(3, &[vec![1.0, 2.0, 0.5], vec![0.0, 1.0, 1.0]]).unwrap();
        assert!(grassmann_delta(&p, &p).unwrap() <= 1e-12);

        let x0 = Subspace::coordinate(3, &[1, 2]).unwrap();
        let y0 = Subspace::coordinate(3, &[0, 2]).unwrap();
        assert_eq!(grassmann_delta(&x0, &y0).unwrap(), 1.0);

        let e1 = Subspace::coordinate(2, &[0]).unwrap();
        let a = 30f64.to_radians();
        let l = Subspace::span(2, &[vec![a.cos(), a.sin()]]).unwrap();
        assert!((grassmann_delta(&e1, &l).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn delta_with_zero_subspace() {
        let z = Subspace::zero(3);
        let l = Subspace::coordinate(3, &[0]).unwrap();
        assert_eq!(grassmann_delta(&l, &z).unwrap(), 1.0);
        assert_eq!(grassmann_delta(&z, &l).unwrap(), 0.0);
    }

    #[test]
    fn delta_unequal_dimensions_evaluates_formula() {
        let line = Subspace::coordinate(3, &[0]).unwrap();
        let plane = Subspace::coordinate(3, &[0, 1]).unwrap();
        assert!(grassmann_delta(&line, &plane).unwrap() < 1e-15);
        assert_eq!(grassmann_delta(&plane, &line).unwrap(), 1.0);
    }

    #[test]
    fn orthogonality_examples() {
        let x0 = Subspace::coordinate(3, &[1, 2]).unwrap();
        let y0 = Subspace::coordinate(3, &[0, 2]).unwrap();
        assert!(is_orthogonal(&x0, &y0, 1e-6).unwrap());
        assert!(!is_orthogonal(&x0, &x0, 1e-6).unwrap());
        let e1 = Subspace::coordinate(2, &[0]).unwrap();
        let d = Subspace::span(2, &[vec![1.0, 1.0]]).unwrap();
        assert!(!is_orthogonal(&e1, &d, 1e-6).unwrap());
        assert!((grassmann_delta(&e1, &d).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fit_jittered_axis() {
        let dirs: Vec<UnitDirection> = (0..40)
            .map(|i| {
                let j = 1e-3 * ((i as f64) * 0.7).sin();
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                dir(&[s, j])
            })
            .collect();
        let (sub, res) = fit_subspace(&dirs, 2, 0.1).unwrap();
        assert_eq!(sub.dim(), 1);
        assert!(res <= 2e-3);
    }

    #[test]
    fn fit_planar_cloud() {
        let h = 0.5f64.sqrt();
        let raw = [[1.0, 0.0], [0.0, 1.0], [h, h]];
        let mut dirs = Vec::new();
        for r in raw {
            dirs.push(dir(&r));
            dirs.push(dir(&[-r[0], -r[1]]));
        }
        let (sub, res) = fit_subspace(&dirs, 2, 0.1).unwrap();
        assert_eq!(sub.dim(), 2);
        assert!(res <= 1e-10);
    }

    #[test]
    fn fit_circle_in_r4() {
        let dirs: Vec<UnitDirection> = (0..100)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 100.0;
                dir(&[t.cos(), t.sin(), 0.0, 0.0])
            })
            .collect();
        let (sub, _) = fit_subspace(&dirs, 4, DEFAULT_GAP_THRESHOLD).unwrap();
        let truth = Subspace::coordinate(4, &[0, 1]).unwrap();
        assert_eq!(sub.dim(), 2);
        assert!(grassmann_delta(&sub, &truth).unwrap() <= 1e-6);
    }

    #[test]
    fn fit_rejects_empty() {
        assert!(fit_subspace(&[], 2, 0.1).is_err());
    }

    #[test]
    fn hausdorff_examples() {
        let a = vec![dir(&[1.0, 0.0]), dir(&[0.0, 1.0])];
        assert_eq!(hausdorff_direction_distance(&a, &a).unwrap(), 0.0);
        let e = vec![dir(&[1.0, 0.0])];
        let m = vec![dir(&[-1.0, 0.0])];
        assert_eq!(hausdorff_direction_distance(&e, &m).unwrap(), 2.0);
        let b = vec![dir(&[1.0, 0.0]), dir(&[1.0, 1.0])];
        let h = 0.5f64.sqrt();
        let expected = ((1.0 - h).powi(2) + h * h).sqrt();
        assert!((hausdorff_direction_distance(&e, &b).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.7654).abs() < 1e-4);
    }

    #[test]
    fn hausdorff_empty_conventions() {
        let e = vec![dir(&[1.0, 0.0])];
        assert_eq!(hausdorff_direction_distance(&[], &[]).unwrap(), 0.0);
        assert_eq!(hausdorff_direction_distance(&[], &e).unwrap(), 2.0);
    }

    #[test]
    fn span_drops_dependent_vectors() {
        let s = Subspace::span(3, &[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(Subspace::from_orthonormal(2, vec![vec![1.0, 0.0], vec![1.0, 0.0]]).is_err());
    }
}
