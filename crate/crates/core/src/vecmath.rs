//! Small dense-vector helpers over `f64` slices.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b` in place.
#[inline]
pub fn axpy(a: &mut [f64], s: f64, b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

/// Returns `a / |a|`, or `None` when `|a|` is below `eps`.
pub fn normalized(a: &[f64], eps: f64) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > eps).then(|| scale(a, 1.0 / n))
}

/// Dense matrix-vector product with a row-major `rows x cols` matrix.
pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Determinant of a small symmetric positive semi-definite Gram matrix.
pub fn gram_det(cols: &[&[f64]]) -> f64 {
    match cols.len() {
        0 => 1.0,
        1 => dot(cols[0], cols[0]),
        2 => {
            let a = dot(cols[0], cols[0]);
            let b = dot(cols[0], cols[1]);
            let c = dot(cols[1], cols[1]);
            (a * c - b * b).max(0.0)
        }
        k => {
            let g = nalgebra::DMatrix::from_fn(k, k, |i, j| dot(cols[i], cols[j]));
            g.determinant().max(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_det_matches_area() {
        let a = [1.0, 0.0, 0.0];
        let b = [1.0, 2.0, 0.0];
        assert!((gram_det(&[&a, &b]).sqrt() - 2.0).abs() < 1e-12);
        let c = [0.0, 0.0, 3.0];
        assert!((gram_det(&[&a, &b, &c]).sqrt() - 6.0).abs() < 1e-9);
    }
}
