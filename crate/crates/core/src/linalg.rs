//! Small dense helpers: sorted SVD, null spaces, pseudo-inverse solves.

use nalgebra::{DMatrix, DVector};

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// SVD with singular values sorted descending: `(U, sigma, V)` with `U`
/// of size `rows x cols`, `sigma` of length `cols` (zero-padded for wide
/// inputs) and `V` square with right singular vectors as columns.
///
/// The decomposition comes from faer; nalgebra's dynamic SVD returns
/// inaccurate factors on some rank-deficient inputs.
pub fn svd_sorted(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (DMatrix::zeros(rows, cols), vec![0.0; cols], DMatrix::identity(cols, cols));
    }
    let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = fm.svd().expect("SVD converges");
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let k = rows.min(cols);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let mut sigma: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    sigma.resize(cols, 0.0);
    let u_sorted = DMatrix::from_fn(rows, cols, |r, c| if c < k { u[(r, order[c])] } else { 0.0 });
    let v_sorted = DMatrix::from_fn(cols, cols, |r, c| if c < k { v[(r, order[c])] } else { v[(r, c)] });
    (u_sorted, sigma, v_sorted)
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let mut s = fm.singular_values().expect("SVD converges");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value (spectral norm).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Number of singular values at or below `rank_tol * scale`.
pub fn nullity_of(sigma: &[f64], cols: usize, rank_tol: f64, scale: f64) -> usize {
    let thresh = rank_tol * scale;
    let small = sigma.iter().filter(|&&s| s <= thresh).count();
    small + cols.saturating_sub(sigma.len())
}

/// Orthonormal basis of the null space, using `rank_tol * sigma_max` as the
/// threshold.
pub fn null_space(m: &DMatrix<f64>, rank_tol: f64) -> Vec<DVector<f64>> {
    let (_, sigma, v) = svd_sorted(m);
    let scale = sigma.first().copied().unwrap_or(0.0);
    let k = nullity_of(&sigma, m.ncols(), rank_tol, scale);
    (m.ncols() - k..m.ncols())
        .map(|c| v.column(c).into_owned())
        .collect()
}

/// Minimum-norm least-squares solution with singular values below
/// `rank_tol * sigma_max` truncated.
pub fn pinv_solve(m: &DMatrix<f64>, b: &DVector<f64>, rank_tol: f64) -> DVector<f64> {
    let (u, sigma, v) = svd_sorted(m);
    let scale = sigma.first().copied().unwrap_or(0.0);
    let mut x = DVector::zeros(m.ncols());
    for (k, &s) in sigma.iter().enumerate() {
        if s > rank_tol * scale && s > 0.0 {
            let coef = u.column(k).dot(b) / s;
            x += v.column(k) * coef;
        }
    }
    x
}

/// Flips `v` so that its first entry larger than `1e-12 * |v|_inf` is
/// positive.
pub fn sign_normalize(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}
