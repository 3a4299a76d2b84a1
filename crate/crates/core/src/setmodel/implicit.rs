//! Sets given as the zero locus of a single function.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_for, uniform_in_ball};
use crate::vecmath::{dist, dot};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Largest vertex grid the box counter will evaluate.
pub const MAX_BOX_VERTICES: usize = 20_000_000;
const PROJECTION_STEPS: usize = 20;

#[derive(Clone)]
pub struct ImplicitSet {
    ambient_dim: usize,
    dim: usize,
    f: ScalarFn,
    grad: Option<GradientFn>,
}

impl fmt::Debug for ImplicitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitSet")
            .field("ambient_dim", &self.ambient_dim)
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

impl ImplicitSet {
    /// `{x : f(x) = 0}`, declared to have dimension `dim`.
    pub fn new(ambient_dim: usize, dim: usize, f: ScalarFn) -> Self {
        Self { ambient_dim, dim, f, grad: None }
    }

    pub fn with_gradient(mut self, grad: GradientFn) -> Self {
        self.grad = Some(grad);
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        if let Some(g) = &self.grad {
            return g(x, out);
        }
        let mut y = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-7 * x[i].abs().max(1.0);
            y[i] = x[i] + h;
            let fp = (self.f)(&y);
            y[i] = x[i] - h;
            let fm = (self.f)(&y);
            y[i] = x[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
    }

    /// First-order distance estimate `|f| / |grad f|`.
    pub fn distance_estimate(&self, x: &[f64]) -> f64 {
        let v = self.value(x);
        if v == 0.0 {
            return 0.0;
        }
        let mut g = vec![0.0; x.len()];
        self.gradient(x, &mut g);
        let gn = dot(&g, &g).sqrt();
        if gn == 0.0 {
            f64::INFINITY
        } else {
            v.abs() / gn
        }
    }

    /// Gauss-Newton steps towards the zero set; halves the step whenever
    /// it would increase `|f|`.
    fn project(&self, x: &mut [f64], g: &mut [f64], trial: &mut [f64]) {
        let mut v = self.value(x);
        for _ in 0..PROJECTION_STEPS {
            if v == 0.0 {
                return;
            }
            self.gradient(x, g);
            let gg = dot(g, g);
            if gg == 0.0 || !gg.is_finite() {
                return;
            }
            let mut step = 1.0;
            loop {
                for i in 0..x.len() {
                    trial[i] = x[i] - step * v * g[i] / gg;
                }
                let vt = self.value(trial);
                if vt.abs() < v.abs() || step < 1e-4 {
                    x.copy_from_slice(trial);
                    v = vt;
                    break;
                }
                step *= 0.5;
            }
        }
    }

    /// Points of the zero set within `B(center, r)`: uniform draws in the
    /// ball pushed onto the set, kept when they land within the tolerance
    /// band and inside the ball.
    pub fn sample(&self, center: &[f64], r: f64, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let n = self.ambient_dim;
        let scale = dot(center, center).sqrt().max(1.0);
        let tol = (1e-7 * r).min(1e-10 * scale);
        let mut rng = rng_for(seed, &[0x696d_706c]);
        let mut x = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let budget = (50 * m).max(2000);
        let mut out = Vec::with_capacity(m);
        for _ in 0..budget {
            uniform_in_ball(&mut rng, center, r, &mut x);
            self.project(&mut x, &mut g, &mut trial);
            if dist(&x, center) <= r && self.distance_estimate(&x) <= tol {
                out.push(x.clone());
                if out.len() == m {
                    break;
                }
            }
        }
        out
    }

    /// Box-counting estimate of the `dim`-measure inside `B(center, r)`:
    /// cells of side `r / 64` whose corner values change sign and whose
    /// center lies in the ball, times the cell side to the power `dim`.
    /// A zero set without sign change (e.g. `f = g^2`) is not detected.
    pub fn box_count(&self, center: &[f64], r: f64, seed: u64) -> Result<f64> {
        let n = self.ambient_dim;
        let delta = r / 64.0;
        let mut rng = rng_for(seed, &[0x626f_78]);
        let offset: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * delta).collect();
        let cells = ((2.0 * r) / delta).ceil() as usize + 1;
        let verts = cells + 1;
        let total = (verts as f64).powi(n as i32);
        if total > MAX_BOX_VERTICES as f64 {
            return Err(Error::Resource(format!(
                "box counting needs {total:.3e} vertices in dimension {n}"
            )));
        }
        let total = total as usize;
        let lo: Vec<f64> = (0..n).map(|i| center[i] - r - offset[i]).collect();
        let mut vals = vec![0.0f64; total];
        let mut x = vec![0.0; n];
        for (idx, v) in vals.iter_mut().enumerate() {
            let mut rem = idx;
            for i in 0..n {
                x[i] = lo[i] + (rem % verts) as f64 * delta;
                rem /= verts;
            }
            *v = self.value(&x);
        }
        let strides: Vec<usize> = (0..n).map(|i| verts.pow(i as u32)).collect();
        let mut count = 0usize;
        let mut cell = vec![0usize; n];
        let r2 = r * r;
        'cells: loop {
            let mut d2 = 0.0;
            for i in 0..n {
                let c = lo[i] + (cell[i] as f64 + 0.5) * delta - center[i];
                d2 += c * c;
            }
            if d2 <= r2 {
                let base: usize = cell.iter().zip(&strides).map(|(c, s)| c * s).sum();
                let (mut pos, mut neg) = (false, false);
                for corner in 0..(1usize << n) {
                    let mut off = 0;
                    for i in 0..n {
                        if corner >> i & 1 == 1 {
                            off += strides[i];
                        }
                    }
                    let v = vals[base + off];
                    pos |= v >= 0.0;
                    neg |= v <= 0.0;
                }
                if pos && neg {
                    count += 1;
                }
            }
            let mut i = 0;
            loop {
                if i == n {
                    break 'cells;
                }
                cell[i] += 1;
                if cell[i] < cells {
                    break;
                }
                cell[i] = 0;
                i += 1;
            }
        }
        Ok(count as f64 * delta.powi(self.dim as i32))
    }

    /// Image under `x -> s R x + b`.
    pub fn similarity(&self, s: f64, rot: &[Vec<f64>], shift: &[f64]) -> ImplicitSet {
        let f = self.f.clone();
        let rot = rot.to_vec();
        let shift = shift.to_vec();
        ImplicitSet {
            ambient_dim: self.ambient_dim,
            dim: self.dim,
            f: Arc::new(move |y| f(&super::chart::inverse_similarity(s, &rot, &shift, y))),
            grad: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross() -> ImplicitSet {
        ImplicitSet::new(2, 1, Arc::new(|x| x[0] * x[1])).with_gradient(Arc::new(|x, g| {
            g[0] = x[1];
            g[1] = x[0];
        }))
    }

    #[test]
    fn samples_lie_on_cross() {
        let c = cross();
        let pts = c.sample(&[0.0, 0.0], 0.5, 200, 4);
        assert_eq!(pts.len(), 200);
        for p in &pts {
            assert!(p[0].abs() <= 1e-9 || p[1].abs() <= 1e-9, "{p:?}");
            assert!(dist(p, &[0.0, 0.0]) <= 0.5);
        }
        assert_eq!(pts, c.sample(&[0.0, 0.0], 0.5, 200, 4));
    }

    #[test]
    fn cross_box_count() {
        let m = cross().box_count(&[0.0, 0.0], 1.0, 1).unwrap();
        assert!((m - 4.0).abs() < 0.05, "{m}");
    }

    #[test]
    fn numeric_gradient_matches() {
        let c = ImplicitSet::new(2, 1, Arc::new(|x| x[0] * x[1]));
        let mut g = [0.0; 2];
        c.gradient(&[0.3, -0.7], &mut g);
        assert!((g[0] + 0.7).abs() < 1e-6 && (g[1] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn box_count_refuses_huge_grids() {
        let s = ImplicitSet::new(5, 4, Arc::new(|x| x[0]));
        assert!(matches!(s.box_count(&[0.0; 5], 1.0, 0), Err(Error::Resource(_))));
    }
}
