//! Thin dense linear-algebra helpers. Matrices are `nalgebra` types; the
//! SVD itself runs on `faer`.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Relative tolerance used when a matrix is meant to be exactly low rank.
pub const EXACT_RANK_TOL: f64 = 1e-8;

/// A thin SVD with singular values sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// q × r, orthonormal columns.
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// p × r, orthonormal columns (stored un-transposed).
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let (q, p) = m.shape();
        let r = q.min(p);
        if r == 0 {
            return Svd {
                u: DMatrix::zeros(q, 0),
                singular_values: DVector::zeros(0),
                v: DMatrix::zeros(p, 0),
            };
        }
        let svd = to_faer(m).thin_svd().expect("svd did not converge");
        let s = svd.S().column_vector();
        let (fu, fv) = (svd.U(), svd.V());
        let u = DMatrix::from_fn(q, r, |i, j| fu[(i, j)]);
        let v = DMatrix::from_fn(p, r, |i, j| fv[(i, j)]);
        let s: Vec<f64> = (0..r).map(|i| s[i]).collect();

        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let mut su = DMatrix::zeros(q, r);
        let mut sv = DMatrix::zeros(p, r);
        let mut ss = DVector::zeros(r);
        for (dst, &src) in order.iter().enumerate() {
            su.set_column(dst, &u.column(src));
            sv.set_column(dst, &v.column(src));
            ss[dst] = s[src].max(0.0);
        }
        Svd {
            u: su,
            singular_values: ss,
            v: sv,
        }
    }

    /// Rank-`k` reconstruction `Σ_{ℓ<k} sₗ uₗ vₗᵀ`.
    pub fn truncated(&self, k: usize) -> DMatrix<f64> {
        let k = k.min(self.singular_values.len());
        let mut us = self.u.columns(0, k).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.singular_values[j];
        }
        us * self.v.columns(0, k).transpose()
    }
}

/// Singular values only, non-increasing.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let sv = to_faer(m).singular_values().expect("svd did not converge");
    let mut s: Vec<f64> = sv.into_iter().map(|x| x.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol · σ₁`.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rel_tol * top).count(),
        _ => 0,
    }
}

/// Minimum-norm least-squares solution of `a · x ≈ b` through the pseudo-inverse.
///
/// Singular values below `max(q, p) · ε · σ₁` are treated as zero.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = Svd::new(a);
    let top = svd.singular_values.get(0).copied().unwrap_or(0.0);
    let cutoff = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * top;
    let utb = svd.u.transpose() * b;
    let mut coef = DVector::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            coef[i] = utb[i] / s;
        }
    }
    &svd.v * coef
}

/// Squared Frobenius norm.
pub fn frob2(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute norm when `b` is zero.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = frob2(&(a - b)).sqrt();
    let base = frob2(b).sqrt();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}
