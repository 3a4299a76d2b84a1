//! Finite point sets, stored flat and sorted on the first coordinate.

use rand::seq::index;

use crate::rng::rng_for;
use crate::vecmath::{dist, dist_sq, dot};

#[derive(Debug, Clone)]
pub struct FinitePoints {
    ambient_dim: usize,
    coords: Vec<f64>,
}

impl FinitePoints {
    pub fn new(ambient_dim: usize, points: Vec<Vec<f64>>) -> Self {
        let flat: Vec<f64> = points.into_iter().flatten().collect();
        Self::from_flat(ambient_dim, flat)
    }

    /// Points given as consecutive runs of `ambient_dim` coordinates.
    pub fn from_flat(ambient_dim: usize, flat: Vec<f64>) -> Self {
        assert!(ambient_dim > 0 && flat.len() % ambient_dim == 0);
        let mut rows: Vec<&[f64]> = flat.chunks_exact(ambient_dim).collect();
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]).then_with(|| a.partial_cmp(b).unwrap()));
        rows.dedup();
        let coords = rows.concat();
        Self { ambient_dim, coords }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.ambient_dim)
    }

    fn window(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let n = self.len();
        let first = |pred: &dyn Fn(f64) -> bool| {
            let (mut a, mut b) = (0, n);
            while a < b {
                let mid = (a + b) / 2;
                if pred(self.point(mid)[0]) {
                    a = mid + 1;
                } else {
                    b = mid;
                }
            }
            a
        };
        first(&|x| x < lo)..first(&|x| x <= hi)
    }

    pub fn in_ball(&self, center: &[f64], r: f64) -> Vec<usize> {
        let r2 = r * r;
        self.window(center[0] - r, center[0] + r)
            .filter(|&i| dist_sq(self.point(i), center) <= r2)
            .collect()
    }

    /// Up to `m` points in the ball; a seeded subset when there are more.
    pub fn sample(&self, center: &[f64], r: f64, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let window = self.window(center[0] - r, center[0] + r);
        let r2 = r * r;
        let mut rng = rng_for(seed, &[0x6669_6e]);
        // Crowded windows: thin out a random subset first instead of scanning.
        if window.len() > 16 * m {
            let mut picked: Vec<usize> = index::sample(&mut rng, window.len(), 8 * m)
                .into_iter()
                .map(|i| window.start + i)
                .filter(|&i| dist_sq(self.point(i), center) <= r2)
                .take(m)
                .collect();
            if picked.len() == m {
                picked.sort_unstable();
                return picked.into_iter().map(|i| self.point(i).to_vec()).collect();
            }
        }
        let hits: Vec<usize> = window.filter(|&i| dist_sq(self.point(i), center) <= r2).collect();
        if hits.len() <= m {
            return hits.into_iter().map(|i| self.point(i).to_vec()).collect();
        }
        let mut pick = index::sample(&mut rng, hits.len(), m).into_vec();
        pick.sort_unstable();
        pick.into_iter().map(|i| self.point(hits[i]).to_vec()).collect()
    }

    pub fn distance_within(&self, p: &[f64], radius: f64) -> Option<f64> {
        self.window(p[0] - radius, p[0] + radius)
            .map(|i| dist(p, self.point(i)))
            .filter(|d| *d <= radius)
            .min_by(f64::total_cmp)
    }

    pub fn count(&self, center: &[f64], r: f64) -> usize {
        self.in_ball(center, r).len()
    }

    /// `count` points spread evenly over the sorted order, ends included.
    pub fn spread(&self, count: usize) -> Vec<Vec<f64>> {
        let n = self.len();
        if n == 0 || count == 0 {
            return Vec::new();
        }
        if count >= n {
            return self.iter().map(<[f64]>::to_vec).collect();
        }
        let mut idx: Vec<usize> = (0..count).map(|i| i * (n - 1) / (count - 1).max(1)).collect();
        idx.dedup();
        idx.into_iter().map(|i| self.point(i).to_vec()).collect()
    }

    pub fn similarity(&self, s: f64, rot: &[Vec<f64>], shift: &[f64]) -> FinitePoints {
        let n = self.ambient_dim;
        let mut flat = Vec::with_capacity(self.coords.len());
        for p in self.iter() {
            flat.extend((0..n).map(|i| s * dot(&rot[i], p) + shift[i]));
        }
        FinitePoints::from_flat(n, flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_sampling() {
        let f = FinitePoints::new(1, (1..=1000).map(|n| vec![1.0 + 1.0 / n as f64]).collect());
        assert_eq!(f.count(&[1.0], 0.0105), 905);
        let s = f.sample(&[1.0], 0.01, 50, 3);
        assert_eq!(s.len(), 50);
        assert_eq!(s, f.sample(&[1.0], 0.01, 50, 3));
        assert!(f.distance_within(&[0.0], 0.5).is_none());
        assert!((f.distance_within(&[2.1], 0.5).unwrap() - 0.1).abs() < 1e-12);
        let sp = f.spread(5);
        assert_eq!(sp.len(), 5);
        assert_eq!(sp[4], vec![2.0]);
    }

    #[test]
    fn single_point() {
        let f = FinitePoints::new(2, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(f.len(), 1);
        assert_eq!(f.sample(&[0.0, 0.0], 0.5, 10, 1), vec![vec![0.0, 0.0]]);
    }
}
