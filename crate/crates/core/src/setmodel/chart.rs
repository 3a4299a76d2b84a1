//! Parametric charts: maps from a box of R^k into R^n, with the machinery
//! needed to sample and integrate over the part of the image that falls in
//! a ball.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::rng::rng_for;
use crate::vecmath::{dist, dist_sq, dot, gram_det, mat_vec};

pub type MapFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Writes the `n x k` differential in column-major order.
pub type JacobianFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Returns parameter boxes whose union contains the preimage of a ball.
pub type PreimageFn = Arc<dyn Fn(&[f64], f64) -> Vec<ParamBox> + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l).max(0.0)).product()
    }

    pub fn diameter(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    fn point_at(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = self.lo[i] + u[i] * (self.hi[i] - self.lo[i]);
        }
    }
}

/// How a chart locates the parameters of image points near a given center.
#[derive(Clone)]
pub enum Preimage {
    /// No information: the whole domain is searched.
    Full,
    /// `t = matrix * (x - offset)` holds exactly on the image, and
    /// `|matrix * v| <= gain * |v|`; graphs over coordinates are the main case.
    LeftInverse { matrix: Vec<Vec<f64>>, offset: Vec<f64>, gain: f64 },
    /// `|t - s| <= inverse_lipschitz * |map(t) - map(s)|` on the domain
    /// (distances measured modulo the period on periodic axes).
    Search { inverse_lipschitz: f64 },
    /// Chart-specific bound.
    Custom(PreimageFn),
}

impl fmt::Debug for Preimage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preimage::Full => write!(f, "Full"),
            Preimage::LeftInverse { gain, .. } => write!(f, "LeftInverse(gain={gain})"),
            Preimage::Search { inverse_lipschitz } => write!(f, "Search(L={inverse_lipschitz})"),
            Preimage::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone)]
pub enum JacobianMode {
    Analytic(JacobianFn),
    FiniteDifference { step: f64 },
}

/// A parametrized piece `map: domain -> R^n` of a set.
#[derive(Clone)]
pub struct Chart {
    ambient_dim: usize,
    domain: ParamBox,
    periodic: Vec<bool>,
    map: MapFn,
    jacobian: JacobianMode,
    preimage: Preimage,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("ambient_dim", &self.ambient_dim)
            .field("domain", &self.domain)
            .field("periodic", &self.periodic)
            .field("preimage", &self.preimage)
            .finish()
    }
}

impl Chart {
    /// A chart with finite-difference Jacobian (step `1e-6 * diam(domain)`)
    /// and no preimage information.
    pub fn new(ambient_dim: usize, domain: ParamBox, map: MapFn) -> Self {
        let k = domain.dim();
        let step = 1e-6 * domain.diameter().max(1e-300);
        Self {
            ambient_dim,
            periodic: vec![false; k],
            domain,
            map,
            jacobian: JacobianMode::FiniteDifference { step },
            preimage: Preimage::Full,
        }
    }

    pub fn with_jacobian(mut self, jac: JacobianFn) -> Self {
        self.jacobian = JacobianMode::Analytic(jac);
        self
    }

    pub fn with_preimage(mut self, preimage: Preimage) -> Self {
        self.preimage = preimage;
        self
    }

    pub fn with_periodic(mut self, periodic: Vec<bool>) -> Self {
        assert_eq!(periodic.len(), self.param_dim());
        self.periodic = periodic;
        self
    }

    pub fn param_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn domain(&self) -> &ParamBox {
        &self.domain
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        matches!(self.jacobian, JacobianMode::Analytic(_))
    }

    pub fn eval(&self, t: &[f64], out: &mut [f64]) {
        (self.map)(t, out)
    }

    pub fn point(&self, t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        self.eval(t, &mut out);
        out
    }

    /// Differential at `t`, column-major `n x k`.
    pub fn jacobian(&self, t: &[f64], out: &mut [f64]) {
        match &self.jacobian {
            JacobianMode::Analytic(j) => j(t, out),
            JacobianMode::FiniteDifference { step } => self.fd_jacobian(t, *step, out),
        }
    }

    /// Central finite-difference differential, one-sided at the domain edge.
    pub fn fd_jacobian(&self, t: &[f64], step: f64, out: &mut [f64]) {
        let n = self.ambient_dim;
        let mut tp = t.to_vec();
        let mut tm = t.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..self.param_dim() {
            let mut hp = step;
            let mut hm = step;
            if !self.periodic[j] {
                if t[j] + step > self.domain.hi[j] {
                    hp = 0.0;
                }
                if t[j] - step < self.domain.lo[j] {
                    hm = 0.0;
                }
            }
            tp[j] = t[j] + hp;
            tm[j] = t[j] - hm;
            self.eval(&tp, &mut fp);
            self.eval(&tm, &mut fm);
            let h = (hp + hm).max(1e-300);
            for i in 0..n {
                out[j * n + i] = (fp[i] - fm[i]) / h;
            }
            tp[j] = t[j];
            tm[j] = t[j];
        }
    }

    /// `sqrt(det(J^T J))`, the k-dimensional volume element.
    pub fn volume_element(&self, t: &[f64], scratch: &mut [f64]) -> f64 {
        let n = self.ambient_dim;
        self.jacobian(t, scratch);
        let cols: Vec<&[f64]> = scratch.chunks(n).take(self.param_dim()).collect();
        gram_det(&cols).sqrt()
    }

    fn clip(&self, b: ParamBox) -> Option<ParamBox> {
        let mut lo = b.lo;
        let mut hi = b.hi;
        for i in 0..self.param_dim() {
            let (dl, dh) = (self.domain.lo[i], self.domain.hi[i]);
            if self.periodic[i] {
                if hi[i] - lo[i] >= dh - dl {
                    lo[i] = dl;
                    hi[i] = dh;
                }
            } else {
                lo[i] = lo[i].max(dl);
                hi[i] = hi[i].min(dh);
                if lo[i] > hi[i] {
                    return None;
                }
            }
        }
        Some(ParamBox { lo, hi })
    }

    /// Parameter boxes covering the preimage of the closed ball `B(center, r)`.
    pub fn preimage_boxes(&self, center: &[f64], r: f64) -> Vec<ParamBox> {
        let raw = match &self.preimage {
            Preimage::Full => vec![self.domain.clone()],
            Preimage::LeftInverse { matrix, offset, gain } => {
                let rel: Vec<f64> = center.iter().zip(offset).map(|(c, o)| c - o).collect();
                let t0 = mat_vec(matrix, &rel);
                let h = gain * r;
                vec![ParamBox::new(t0.iter().map(|t| t - h).collect(), t0.iter().map(|t| t + h).collect())]
            }
            Preimage::Search { inverse_lipschitz } => {
                let (d, t) = self.nearest_in(center, &[self.domain.clone()], None);
                if d > r {
                    return Vec::new();
                }
                let h = inverse_lipschitz * (r + d);
                vec![ParamBox::new(t.iter().map(|x| x - h).collect(), t.iter().map(|x| x + h).collect())]
            }
            Preimage::Custom(f) => f(center, r),
        };
        raw.into_iter().filter_map(|b| self.clip(b)).collect()
    }

    /// Nearest image point to `p` over parameters in `boxes`, by grid search
    /// followed by pattern-search refinement. Returns `(distance, param)`.
    fn nearest_in(&self, p: &[f64], boxes: &[ParamBox], hint: Option<Vec<f64>>) -> (f64, Vec<f64>) {
        let k = self.param_dim();
        let g = match k {
            1 => 64,
            2 => 24,
            3 => 10,
            _ => 5,
        };
        let mut x = vec![0.0; self.ambient_dim];
        let mut best = (f64::INFINITY, Vec::new());
        let mut candidates: Vec<(f64, Vec<f64>, usize)> = Vec::new();
        if let Some(h) = hint {
            for (bi, b) in boxes.iter().enumerate() {
                let t: Vec<f64> = h.iter().enumerate().map(|(i, v)| v.clamp(b.lo[i], b.hi[i])).collect();
                self.eval(&t, &mut x);
                candidates.push((dist_sq(&x, p), t, bi));
            }
        }
        let mut idx = vec![0usize; k];
        let mut t = vec![0.0; k];
        for (bi, b) in boxes.iter().enumerate() {
            let mut local: Vec<(f64, Vec<f64>, usize)> = Vec::new();
            idx.iter_mut().for_each(|i| *i = 0);
            loop {
                for i in 0..k {
                    t[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * idx[i] as f64 / (g - 1) as f64;
                }
                self.eval(&t, &mut x);
                local.push((dist_sq(&x, p), t.clone(), bi));
                let mut carry = 0;
                while carry < k {
                    idx[carry] += 1;
                    if idx[carry] < g {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                }
                if carry == k {
                    break;
                }
            }
            local.sort_by(|a, b| a.0.total_cmp(&b.0));
            candidates.extend(local.into_iter().take(3));
        }
        for (d0, t0, bi) in candidates {
            let b = &boxes[bi];
            let step0: Vec<f64> = (0..k).map(|i| (b.hi[i] - b.lo[i]) / (g - 1) as f64).collect();
            let (d, t) = self.refine(p, t0, d0, b, step0);
            if d < best.0 {
                best = (d, t);
            }
        }
        (best.0.sqrt(), best.1)
    }

    fn refine(&self, p: &[f64], mut t: Vec<f64>, mut d: f64, b: &ParamBox, mut step: Vec<f64>) -> (f64, Vec<f64>) {
        let k = t.len();
        let mut x = vec![0.0; self.ambient_dim];
        let mut trial = t.clone();
        for _ in 0..400 {
            let mut improved = false;
            for i in 0..k {
                for s in [1.0, -1.0] {
                    trial.copy_from_slice(&t);
                    trial[i] = (t[i] + s * step[i]).clamp(b.lo[i], b.hi[i]);
                    self.eval(&trial, &mut x);
                    let dt = dist_sq(&x, p);
                    if dt < d {
                        d = dt;
                        t.copy_from_slice(&trial);
                        improved = true;
                    }
                }
            }
            if !improved {
                step.iter_mut().for_each(|s| *s *= 0.5);
                if step.iter().zip(&t).all(|(s, v)| *s <= 1e-16 * (1.0 + v.abs())) {
                    break;
                }
            }
        }
        (d, t)
    }

    /// Distance from `p` to the image, considering only image points within
    /// `radius` of `p`. `None` when no part of the image can be that close.
    pub fn distance_within(&self, p: &[f64], radius: f64) -> Option<f64> {
        let boxes = self.preimage_boxes(p, radius);
        if boxes.is_empty() {
            return None;
        }
        let hint = match &self.preimage {
            Preimage::LeftInverse { matrix, offset, .. } => {
                let rel: Vec<f64> = p.iter().zip(offset).map(|(c, o)| c - o).collect();
                Some(mat_vec(matrix, &rel))
            }
            _ => None,
        };
        let (d, _) = self.nearest_in(p, &boxes, hint);
        Some(d)
    }

    /// Up to `m` image points in `B(center, r)`, drawn uniformly from the
    /// preimage boxes. Deterministic in `seed`.
    pub fn sample(&self, center: &[f64], r: f64, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let boxes = self.preimage_boxes(center, r);
        if boxes.is_empty() || m == 0 {
            return Vec::new();
        }
        let k = self.param_dim();
        let weights: Vec<f64> = boxes.iter().map(|b| b.volume().max(1e-300)).collect();
        let total: f64 = weights.iter().sum();
        // Plain pseudo-random draws: secants from the center to lattice-like
        // quasi-random points bunch up along rational slopes.
        let mut rng = rng_for(seed, &[0x7361_6d70]);
        let mut u = vec![0.0; k + 1];
        let mut t = vec![0.0; k];
        let mut x = vec![0.0; self.ambient_dim];
        let r2 = r * r;
        let budget = (256 * m).clamp(8192, 400_000);
        // Give up early when the preimage bound is loose and nothing lands in the ball.
        let scout = (8 * m).max(2048);
        let mut out = Vec::with_capacity(m);
        for draw in 0..budget {
            if out.is_empty() && (draw == scout || draw == 32 && self.distance_within(center, r).is_none_or(|d| d > r)) {
                break;
            }
            u.iter_mut().for_each(|v| *v = rng.gen::<f64>());
            let mut pick = u[0] * total;
            let mut bi = 0;
            while bi + 1 < boxes.len() && pick > weights[bi] {
                pick -= weights[bi];
                bi += 1;
            }
            boxes[bi].point_at(&u[1..], &mut t);
            self.eval(&t, &mut x);
            if dist_sq(&x, center) <= r2 && x.iter().all(|v| v.is_finite()) {
                out.push(x.clone());
                if out.len() == m {
                    break;
                }
            }
        }
        out
    }

    /// Monte Carlo estimate of the k-dimensional measure of the image inside
    /// `B(center, r)` with its standard error.
    pub fn measure(&self, center: &[f64], r: f64, n: usize, seed: u64) -> (f64, f64) {
        let boxes = self.preimage_boxes(center, r);
        let k = self.param_dim();
        let vols: Vec<f64> = boxes.iter().map(ParamBox::volume).collect();
        let total: f64 = vols.iter().sum();
        if total <= 0.0 || n == 0 {
            return (0.0, 0.0);
        }
        let mut rng = rng_for(seed, &[0x6d65_6173]);
        let mut t = vec![0.0; k];
        let mut x = vec![0.0; self.ambient_dim];
        let mut scratch = vec![0.0; self.ambient_dim * k];
        let r2 = r * r;
        let (mut est, mut var) = (0.0, 0.0);
        for (b, vol) in boxes.iter().zip(&vols) {
            if *vol <= 0.0 {
                continue;
            }
            let nb = ((n as f64 * vol / total).round() as usize).max(2);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..nb {
                for i in 0..k {
                    t[i] = rng.gen_range(b.lo[i]..=b.hi[i]);
                }
                self.eval(&t, &mut x);
                if dist_sq(&x, center) <= r2 {
                    let w = self.volume_element(&t, &mut scratch);
                    s1 += w;
                    s2 += w * w;
                }
            }
            let nf = nb as f64;
            let mean = s1 / nf;
            let sample_var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
            est += vol * mean;
            var += vol * vol * sample_var / nf;
        }
        (est, var.sqrt())
    }

    /// Regular grid of parameters (cell midpoints), inset by 5% of the
    /// domain on non-periodic axes so probes keep away from artificial ends.
    pub fn probe_params(&self, count: usize) -> Vec<Vec<f64>> {
        let k = self.param_dim();
        if count == 0 || k == 0 {
            return Vec::new();
        }
        let per = ((count as f64).powf(1.0 / k as f64).round() as usize).max(1);
        let mut out = Vec::new();
        let mut idx = vec![0usize; k];
        loop {
            let t: Vec<f64> = (0..k)
                .map(|i| {
                    let (lo, hi) = (self.domain.lo[i], self.domain.hi[i]);
                    let inset = if self.periodic[i] { 0.0 } else { 0.05 * (hi - lo) };
                    let (a, b) = (lo + inset, hi - inset);
                    a + (b - a) * (idx[i] as f64 + 0.5) / per as f64
                })
                .collect();
            out.push(t);
            let mut carry = 0;
            while carry < k {
                idx[carry] += 1;
                if idx[carry] < per {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == k {
                break;
            }
        }
        out
    }

    /// Image of the chart under `x -> s * R x + b` with `R` orthogonal.
    pub fn similarity(&self, s: f64, rot: &[Vec<f64>], shift: &[f64]) -> Chart {
        let n = self.ambient_dim;
        let k = self.param_dim();
        let rot: Arc<Vec<Vec<f64>>> = Arc::new(rot.to_vec());
        let shift: Arc<Vec<f64>> = Arc::new(shift.to_vec());

        let inner = self.map.clone();
        let (r1, b1) = (rot.clone(), shift.clone());
        let map: MapFn = Arc::new(move |t, out| {
            let mut x = vec![0.0; n];
            inner(t, &mut x);
            for i in 0..n {
                out[i] = s * dot(&r1[i], &x) + b1[i];
            }
        });
        let jacobian = match &self.jacobian {
            JacobianMode::Analytic(j) => {
                let j = j.clone();
                let r2 = rot.clone();
                JacobianMode::Analytic(Arc::new(move |t, out| {
                    let mut raw = vec![0.0; n * k];
                    j(t, &mut raw);
                    for c in 0..k {
                        let col = &raw[c * n..(c + 1) * n];
                        for i in 0..n {
                            out[c * n + i] = s * dot(&r2[i], col);
                        }
                    }
                }))
            }
            JacobianMode::FiniteDifference { step } => JacobianMode::FiniteDifference { step: *step },
        };
        let preimage = match &self.preimage {
            Preimage::Full => Preimage::Full,
            Preimage::LeftInverse { matrix, offset, gain } => {
                let m2: Vec<Vec<f64>> = matrix
                    .iter()
                    .map(|row| (0..n).map(|j| dot(row, &rot[j]) / s).collect())
                    .collect();
                let o2: Vec<f64> = (0..n).map(|i| s * dot(&rot[i], offset) + shift[i]).collect();
                Preimage::LeftInverse { matrix: m2, offset: o2, gain: gain / s }
            }
            Preimage::Search { inverse_lipschitz } => Preimage::Search { inverse_lipschitz: inverse_lipschitz / s },
            Preimage::Custom(f) => {
                let f = f.clone();
                let (r3, b3) = (rot.clone(), shift.clone());
                Preimage::Custom(Arc::new(move |c, r| {
                    let x = inverse_similarity(s, &r3, &b3, c);
                    f(&x, r / s)
                }))
            }
        };
        Chart {
            ambient_dim: n,
            domain: self.domain.clone(),
            periodic: self.periodic.clone(),
            map,
            jacobian,
            preimage,
        }
    }
}

/// `x = R^T (y - b) / s`.
pub(crate) fn inverse_similarity(s: f64, rot: &[Vec<f64>], shift: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let rel: Vec<f64> = y.iter().zip(shift).map(|(a, b)| a - b).collect();
    (0..n).map(|j| (0..n).map(|i| rot[i][j] * rel[i]).sum::<f64>() / s).collect()
}

/// Bounds the polar angle of points at planar radius `>= rho_min` lying
/// within `r` of the planar point with polar coordinates `(rho_c, angle_c)`.
///
/// Uses `d >= 2 sqrt(rho * rho_c) sin(dtheta / 2)`. Returns
/// `(center, half_width)`, or `None` when every angle is possible.
pub fn angular_window(rho_c: f64, angle_c: f64, rho_min: f64, r: f64) -> Option<(f64, f64)> {
    if rho_c <= 0.0 || rho_min <= 0.0 {
        return None;
    }
    let s = r / (2.0 * (rho_min * rho_c).sqrt());
    (s < 1.0).then(|| (angle_c, 2.0 * s.asin()))
}

/// Intersection of two arcs of the circle given as `(center, half_width)`,
/// `None` standing for the full circle. Returns angle intervals, which may
/// extend outside `[0, 2pi)`.
pub fn intersect_arcs(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> Vec<(f64, f64)> {
    match (a, b) {
        (None, None) => vec![(0.0, TAU)],
        (Some((c, h)), None) | (None, Some((c, h))) => vec![(c - h, c + h)],
        (Some((c1, h1)), Some((c2, h2))) => {
            let mut base = c2 - c1;
            base -= TAU * (base / TAU).round();
            let mut out = Vec::new();
            for shift in [-TAU, 0.0, TAU] {
                let cc = c1 + base + shift;
                let lo = (c1 - h1).max(cc - h2);
                let hi = (c1 + h1).min(cc + h2);
                if lo <= hi {
                    out.push((lo, hi));
                }
            }
            out
        }
    }
}
