//! Dense factorizations: Householder QR followed by one-sided (Hestenes) Jacobi SVD.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Real;

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// From a row-major 2-d tensor.
    pub fn from_tensor(t: &Tensor<T>) -> Result<Self> {
        let [rows, cols] = t.shape()[..] else {
            return Err(Error::invalid(
                "matrix",
                format!("expected a 2-d tensor, got {:?}", t.shape()),
            ));
        };
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = t.data()[r * cols + c];
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.data[c * rows + r] = f(r, c);
            }
        }
        m
    }

    pub fn to_tensor(&self) -> Tensor<T> {
        Tensor::from_fn(&[self.rows, self.cols], |i| self[(i[0], i[1])])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, c: usize) -> &[T] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Two distinct mutable columns, `a < b`.
    fn col_pair_mut(&mut self, a: usize, b: usize) -> (&mut [T], &mut [T]) {
        debug_assert!(a < b);
        let r = self.rows;
        let (lo, hi) = self.data.split_at_mut(b * r);
        (&mut lo[a * r..(a + 1) * r], &mut hi[..r])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b == T::zero() {
                    continue;
                }
                let src = self.col(k);
                let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + s * b;
                }
            }
        }
        out
    }

    pub fn norm_fro(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[c * self.rows + r]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[c * self.rows + r]
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Thin QR of a tall matrix (`rows ≥ cols`): returns `(Q, R)`, `Q` with orthonormal columns.
pub fn qr_thin<T: Real>(a: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n, "qr_thin needs rows >= cols");
    let mut work = a.clone();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
    for k in 0..n {
        let x = &work.col(k)[k..];
        let norm = dot(x, x).sqrt();
        let mut v = x.to_vec();
        if norm == T::zero() {
            reflectors.push(v);
            continue;
        }
        let alpha = if x[0] >= T::zero() { -norm } else { norm };
        v[0] = v[0] - alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == T::zero() {
            reflectors.push(v);
            continue;
        }
        let two = T::lit(2.0);
        for j in k..n {
            let col = &mut work.col_mut(j)[k..];
            let f = two * dot(&v, col) / vnorm2;
            for (c, &vi) in col.iter_mut().zip(&v) {
                *c = *c - f * vi;
            }
        }
        reflectors.push(v);
    }
    let mut r = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            r[(i, j)] = work[(i, j)];
        }
    }
    let mut q = Matrix::zeros(m, n);
    for i in 0..n {
        q[(i, i)] = T::one();
    }
    for k in (0..n).rev() {
        let v = &reflectors[k];
        let vnorm2 = dot(v, v);
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for j in 0..n {
            let col = &mut q.col_mut(j)[k..];
            let f = two * dot(v, col) / vnorm2;
            if f == T::zero() {
                continue;
            }
            for (c, &vi) in col.iter_mut().zip(v) {
                *c = *c - f * vi;
            }
        }
    }
    (q, r)
}

/// Thin singular value decomposition `A = U · diag(s) · Vᵀ` with `s` non-increasing.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub s: Vec<T>,
    pub v: Matrix<T>,
}

impl<T: Real> Svd<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        let mut us = self.u.clone();
        for (j, &sv) in self.s.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|x| *x = *x * sv);
        }
        us.matmul(&self.v.transpose())
    }
}

const MAX_SWEEPS: usize = 80;

/// SVD of a 2-d tensor; see [`svd_matrix`].
pub fn svd<T: Real>(a: &Tensor<T>) -> Result<Svd<T>> {
    svd_matrix(&Matrix::from_tensor(a)?)
}

/// QR-preconditioned one-sided Jacobi SVD.
///
/// Returns [`Error::SvdNoConvergence`] carrying the largest remaining normalized column
/// inner product if the sweep cap is hit.
pub fn svd_matrix<T: Real>(a: &Matrix<T>) -> Result<Svd<T>> {
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("svd", "non-finite entries"));
    }
    if a.rows < a.cols {
        let t = svd_matrix(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let n = a.cols;
    let (q, r) = qr_thin(a);
    // W = R·V, orthogonalized column pairs; V accumulates the right rotations.
    let mut w = r;
    let mut v = Matrix::identity(n);
    let tol = T::epsilon() * T::from_usize_lossy(n.max(1));
    // columns below this squared norm are numerically zero and left alone
    let negligible = {
        let f = w.norm_fro() * T::epsilon();
        f * f
    };
    let mut converged = n < 2;
    let mut residual = T::zero();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        residual = T::zero();
        for p in 0..n {
            for qi in p + 1..n {
                let (wp, wq) = w.col_pair_mut(p, qi);
                let alpha = dot(wp, wp);
                let beta = dot(wq, wq);
                let gamma = dot(wp, wq);
                if gamma == T::zero() || alpha <= negligible || beta <= negligible {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                let rel = gamma.abs() / scale;
                residual = residual.max(rel);
                if rel <= tol {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vp, vq) = v.col_pair_mut(p, qi);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            sweeps: MAX_SWEEPS,
            residual: residual.to_f64_lossy(),
        });
    }

    let mut order: Vec<(usize, T)> = (0..n).map(|j| (j, dot(w.col(j), w.col(j)).sqrt())).collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let smax = order.first().map(|o| o.1).unwrap_or(T::zero());
    let tiny = (smax * T::from_usize_lossy(n.max(1) * 4) * T::epsilon()).max(negligible.sqrt());

    let mut ur = Matrix::zeros(n, n);
    let mut vs = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut rank = 0;
    for (k, &(j, sv)) in order.iter().enumerate() {
        vs.col_mut(k).copy_from_slice(v.col(j));
        if sv > tiny && sv > T::zero() {
            let inv = T::one() / sv;
            for (d, &x) in ur.col_mut(k).iter_mut().zip(w.col(j)) {
                *d = x * inv;
            }
            s.push(sv);
            rank += 1;
        } else {
            s.push(T::zero());
        }
    }
    complete_orthonormal(&mut ur, rank);
    let u = q.matmul(&ur);
    Ok(Svd { u, s, v: vs })
}

#[inline]
fn rotate<T: Real>(a: &mut [T], b: &mut [T], c: T, s: T) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}

/// Fills columns `from..` with unit vectors orthogonal to all earlier columns
/// (modified Gram–Schmidt over the standard basis, re-orthogonalized twice).
fn complete_orthonormal<T: Real>(m: &mut Matrix<T>, from: usize) {
    let n = m.rows;
    let mut next_basis = 0;
    for k in from..m.cols {
        loop {
            assert!(next_basis < n, "cannot complete an orthonormal basis");
            let mut cand = vec![T::zero(); n];
            cand[next_basis] = T::one();
            next_basis += 1;
            for _ in 0..2 {
                for j in 0..k {
                    let col = m.col(j);
                    let f = dot(col, &cand);
                    for (c, &x) in cand.iter_mut().zip(col) {
                        *c = *c - f * x;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > T::lit(1e-3) {
                for (d, c) in m.col_mut(k).iter_mut().zip(cand) {
                    *d = c / norm;
                }
                break;
            }
        }
    }
}

/// Largest singular value by power iteration on `AᵀA` (used for step-size initialization).
pub fn spectral_norm<T: Real>(a: &Matrix<T>, iters: usize) -> T {
    if a.cols == 0 || a.rows == 0 {
        return T::zero();
    }
    let mut x = vec![T::one(); a.cols];
    let mut sigma = T::zero();
    for _ in 0..iters {
        let xn = dot(&x, &x).sqrt();
        if xn == T::zero() {
            return T::zero();
        }
        x.iter_mut().for_each(|v| *v = *v / xn);
        let mut ax = vec![T::zero(); a.rows];
        for (c, &xc) in x.iter().enumerate() {
            for (d, &m) in ax.iter_mut().zip(a.col(c)) {
                *d = *d + m * xc;
            }
        }
        let next: Vec<T> = (0..a.cols).map(|c| dot(a.col(c), &ax)).collect();
        let s_new = dot(&ax, &ax).sqrt();
        let done = (s_new - sigma).abs() <= T::lit(1e-12) * s_new;
        sigma = s_new;
        x = next;
        if done {
            break;
        }
    }
    sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthogonality_residual(m: &Matrix<f64>) -> f64 {
        m.transpose()
            .matmul(m)
            .sub(&Matrix::identity(m.cols()))
            .norm_fro()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_fn(rows, cols, |r, c| vals[r * cols + c])
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let svd = svd_matrix(&Matrix::<f64>::identity(5)).unwrap();
        assert!(svd.s.iter().all(|&s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn diagonal_is_sorted() {
        let a = Matrix::from_fn(3, 3, |r, c| if r == c { [1.0f64, 3.0, 2.0][r] } else { 0.0 });
        let svd = svd_matrix(&a).unwrap();
        for (got, want) in svd.s.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn random_residuals() {
        for (rows, cols, seed) in [(20, 12, 1), (12, 20, 2), (30, 30, 3), (7, 1, 4)] {
            let a = random_matrix(rows, cols, seed);
            let svd = svd_matrix(&a).unwrap();
            let rel = a.sub(&svd.reconstruct()).norm_fro() / a.norm_fro();
            assert!(rel <= 1e-10, "reconstruction {rel:e}");
            assert!(orthogonality_residual(&svd.u) <= 1e-10);
            assert!(orthogonality_residual(&svd.v) <= 1e-10);
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            assert!(svd.s.iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn rank_deficient_keeps_orthonormal_factors() {
        let u: Vec<f64> = (0..15).map(|i| 1.0 + i as f64).collect();
        let v: Vec<f64> = (0..9).map(|i| (i as f64 * 0.3).cos()).collect();
        let a = Matrix::from_fn(15, 9, |r, c| u[r] * v[c]);
        let svd = svd_matrix(&a).unwrap();
        assert!(svd.s[1..].iter().all(|&s| s <= 1e-12 * svd.s[0]));
        assert!(orthogonality_residual(&svd.u) <= 1e-10);
        assert!(a.sub(&svd.reconstruct()).norm_fro() / a.norm_fro() <= 1e-10);
    }

    #[test]
    fn qr_reconstructs() {
        let a = random_matrix(9, 4, 8);
        let (q, r) = qr_thin(&a);
        assert!(a.sub(&q.matmul(&r)).norm_fro() <= 1e-12);
        assert!(orthogonality_residual(&q) <= 1e-12);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let a = random_matrix(10, 6, 5);
        let s = svd_matrix(&a).unwrap().s[0];
        assert!((spectral_norm(&a, 500) - s).abs() <= 1e-8 * s);
    }

    #[test]
    fn non_finite_rejected() {
        let a = Matrix::from_fn(2, 2, |r, _| if r == 0 { f64::NAN } else { 1.0 });
        assert!(svd_matrix(&a).is_err());
    }
}
