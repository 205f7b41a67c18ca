//! Subspace linear algebra in weighted coefficient spaces: orthonormal
//! bases, ranges, nullspaces, orthogonal complements, and projector-based
//! subspace comparison.
//!
//! All computations transform to coordinates in which the weighted inner
//! product is Euclidean (through a factor `F` with `F^T F = W`), so
//! "orthogonal" always means the weighted L2 inner product. Ranks,
//! complements and nullspaces are read off full singular value
//! decompositions.

use crate::linalg::{full_svd, spectral_norm};
use crate::operators::{OperatorMatrix, Weight};
use nalgebra::DMatrix;
#[cfg(test)]
use nalgebra::DVector;

/// Relative singular value threshold for rank decisions.
pub const RANK_RTOL: f64 = 1e-9;

/// An orthonormal basis (columns) of a subspace of a weighted space.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub ambient_dim: usize,
    pub weight: Weight,
    /// Basis matrix B with `B^T W B = I`.
    pub basis: DMatrix<f64>,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn empty(ambient_dim: usize, weight: Weight) -> Self {
        SubspaceBasis {
            ambient_dim,
            weight,
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn whole(ambient_dim: usize, weight: Weight) -> Self {
        orthonormalize(ambient_dim, &weight, &DMatrix::identity(ambient_dim, ambient_dim))
    }

    /// Max-norm departure of `B^T W B` from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let q = self.q();
        let gram = q.transpose() * &q;
        let mut worst: f64 = 0.0;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - expect).abs());
            }
        }
        worst
    }

    /// The basis in factor coordinates (Euclidean-orthonormal columns).
    fn q(&self) -> DMatrix<f64> {
        self.weight.sqrt_mul(&self.basis)
    }
}

/// W-orthonormal basis of the column span of `span`.
pub fn orthonormalize(ambient_dim: usize, weight: &Weight, span: &DMatrix<f64>) -> SubspaceBasis {
    assert_eq!(span.nrows(), ambient_dim);
    if span.ncols() == 0 || ambient_dim == 0 {
        return SubspaceBasis::empty(ambient_dim, weight.clone());
    }
    let svd = full_svd(&weight.sqrt_mul(span));
    let rank = svd.rank(RANK_RTOL);
    let picked = svd.u.columns(0, rank).into_owned();
    SubspaceBasis {
        ambient_dim,
        weight: weight.clone(),
        basis: weight.invsqrt_mul(&picked),
    }
}

/// Orthonormal basis of the range of an operator, in its codomain weight.
pub fn range(op: &OperatorMatrix) -> SubspaceBasis {
    orthonormalize(op.codomain.dim, &op.codomain.weight, &op.matrix)
}

/// Orthonormal basis of the range of the operator restricted to a subspace
/// of its domain.
pub fn range_restricted(op: &OperatorMatrix, restriction: &SubspaceBasis) -> SubspaceBasis {
    assert_eq!(op.domain.dim, restriction.ambient_dim);
    let composed = &op.matrix * &restriction.basis;
    orthonormalize(op.codomain.dim, &op.codomain.weight, &composed)
}

/// Orthonormal basis (in the domain weight) of the nullspace of an operator.
///
/// Works on `F_cod A F_dom^{-1}`; the trailing right singular vectors give
/// the nullspace after mapping back to coefficients.
pub fn nullspace(op: &OperatorMatrix) -> SubspaceBasis {
    let n = op.domain.dim;
    if n == 0 {
        return SubspaceBasis::empty(0, op.domain.weight.clone());
    }
    if op.codomain.dim == 0 {
        return SubspaceBasis::whole(n, op.domain.weight.clone());
    }
    // A F_dom^{-1} = (F_dom^{-T} A^T)^T
    let a_scaled = op
        .domain
        .weight
        .invsqrt_t_mul(&op.matrix.transpose())
        .transpose();
    let b = op.codomain.weight.sqrt_mul(&a_scaled);
    let svd = full_svd(&b);
    let rank = svd.rank(RANK_RTOL);
    let null_cols = svd.vt.rows(rank, n - rank).transpose();
    SubspaceBasis {
        ambient_dim: n,
        weight: op.domain.weight.clone(),
        basis: op.domain.weight.invsqrt_mul(&null_cols),
    }
}

/// W-orthogonal complement of a subspace.
pub fn complement(u: &SubspaceBasis) -> SubspaceBasis {
    let n = u.ambient_dim;
    if n == 0 {
        return SubspaceBasis::empty(0, u.weight.clone());
    }
    if u.dim() == 0 {
        return SubspaceBasis::whole(n, u.weight.clone());
    }
    // the trailing left singular vectors of the (orthonormal) basis span the
    // complement in factor coordinates
    let svd = full_svd(&u.q());
    let rank = svd.rank(RANK_RTOL);
    let picked = svd.u.columns(rank, n - rank).into_owned();
    SubspaceBasis {
        ambient_dim: n,
        weight: u.weight.clone(),
        basis: u.weight.invsqrt_mul(&picked),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Equal,
    LeftInRight,
    RightInLeft,
    Incomparable,
}

/// Outcome of a projector comparison of two subspaces of one ambient space.
#[derive(Debug, Clone)]
pub struct SubspaceRelation {
    pub containment: Containment,
    /// Operator norm of the difference of the orthogonal projectors.
    pub distance: f64,
    /// `max ||(I - P_V) u||` over the left basis (0 when empty).
    pub left_residual: f64,
    pub right_residual: f64,
}

/// Compares two subspaces by their weighted orthogonal projectors.
pub fn compare(u: &SubspaceBasis, v: &SubspaceBasis, tol: f64) -> SubspaceRelation {
    assert_eq!(u.ambient_dim, v.ambient_dim);
    let n = u.ambient_dim;
    let qu = u.q();
    let qv = v.q();
    let mut diff = DMatrix::zeros(n, n);
    if qu.ncols() > 0 {
        diff += &qu * qu.transpose();
    }
    if qv.ncols() > 0 {
        diff -= &qv * qv.transpose();
    }
    let distance = spectral_norm(&diff);
    let left_residual = containment_residual(&qu, &qv);
    let right_residual = containment_residual(&qv, &qu);
    let containment = match (left_residual <= tol, right_residual <= tol) {
        (true, true) => Containment::Equal,
        (true, false) => Containment::LeftInRight,
        (false, true) => Containment::RightInLeft,
        (false, false) => Containment::Incomparable,
    };
    SubspaceRelation {
        containment,
        distance,
        left_residual,
        right_residual,
    }
}

/// `||(I - Q_v Q_v^T) Q_u||_2`, the containment residual of u in v.
fn containment_residual(qu: &DMatrix<f64>, qv: &DMatrix<f64>) -> f64 {
    if qu.ncols() == 0 {
        return 0.0;
    }
    let mut rest = qu.clone();
    if qv.ncols() > 0 {
        rest -= qv * (qv.transpose() * qu);
    }
    spectral_norm(&rest)
}

/// Cosines of the principal angles between two subspaces (descending).
pub fn principal_angle_cosines(u: &SubspaceBasis, v: &SubspaceBasis) -> Vec<f64> {
    let qu = u.q();
    let qv = v.q();
    if qu.ncols() == 0 || qv.ncols() == 0 {
        return Vec::new();
    }
    let svd = full_svd(&(qu.transpose() * qv));
    svd.sigma.iter().copied().collect()
}

/// Smallest eigenvalue of the sum of the two orthogonal projectors.
pub fn projector_sum_min_eigenvalue(u: &SubspaceBasis, v: &SubspaceBasis) -> f64 {
    let n = u.ambient_dim;
    let qu = u.q();
    let qv = v.q();
    let mut sum = DMatrix::zeros(n, n);
    if qu.ncols() > 0 {
        sum += &qu * qu.transpose();
    }
    if qv.ncols() > 0 {
        sum += &qv * qv.transpose();
    }
    // positive semidefinite, so eigenvalues coincide with singular values
    crate::linalg::sigma_min(&((&sum + sum.transpose()) * 0.5))
}
