//! Internal dense factorization backend.
//!
//! All rank decisions and subspace extractions go through the full singular
//! value decomposition provided by `faer`; matrices stay in `nalgebra`
//! containers at the interfaces.

use nalgebra::{DMatrix, DVector};

/// Full singular value decomposition `m = u * diag(sigma) * vt` with square
/// orthogonal factors and singular values sorted descending.
pub(crate) struct FullSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub vt: DMatrix<f64>,
}

impl FullSvd {
    pub fn sigma_max(&self) -> f64 {
        if self.sigma.is_empty() {
            0.0
        } else {
            self.sigma[0]
        }
    }

    /// Number of singular values above `rtol * sigma_max`.
    pub fn rank(&self, rtol: f64) -> usize {
        let cutoff = rtol * self.sigma_max();
        self.sigma.iter().filter(|&&s| s > cutoff).count()
    }

    /// Minimum-norm least-squares solution of `m x = b` with the given
    /// relative rank cutoff.
    pub fn pseudo_solve(&self, b: &DVector<f64>, rtol: f64) -> DVector<f64> {
        let cutoff = rtol * self.sigma_max();
        let mut x = DVector::zeros(self.vt.ncols());
        for k in 0..self.sigma.len() {
            if self.sigma[k] > cutoff {
                let coef = self.u.column(k).dot(b) / self.sigma[k];
                x += self.vt.row(k).transpose() * coef;
            }
        }
        x
    }
}

pub(crate) fn full_svd(m: &DMatrix<f64>) -> FullSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return FullSvd {
            u: DMatrix::identity(rows, rows),
            sigma: DVector::zeros(rows.min(cols)),
            vt: DMatrix::identity(cols, cols),
        };
    }
    let mat = faer::Mat::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = mat.svd().expect("singular value decomposition converged");
    let k = rows.min(cols);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.S()[b].partial_cmp(&svd.S()[a]).unwrap());
    let mut u = DMatrix::zeros(rows, rows);
    let mut vt = DMatrix::zeros(cols, cols);
    let mut sigma = DVector::zeros(k);
    // permute the leading columns by descending singular value, keep the
    // remaining orthogonal columns in place
    for (new, &old) in order.iter().enumerate() {
        sigma[new] = svd.S()[old];
        for i in 0..rows {
            u[(i, new)] = svd.U()[(i, old)];
        }
        for i in 0..cols {
            vt[(new, i)] = svd.V()[(i, old)];
        }
    }
    for extra in k..rows {
        for i in 0..rows {
            u[(i, extra)] = svd.U()[(i, extra)];
        }
    }
    for extra in k..cols {
        for i in 0..cols {
            vt[(extra, i)] = svd.V()[(i, extra)];
        }
    }
    FullSvd { u, sigma, vt }
}

/// Largest singular value.
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    full_svd(m).sigma_max()
}

/// Smallest singular value of a square matrix (zero when empty).
pub(crate) fn sigma_min(m: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(m.nrows(), m.ncols());
    if m.nrows() == 0 {
        return 0.0;
    }
    let svd = full_svd(m);
    svd.sigma[svd.sigma.len() - 1]
}
