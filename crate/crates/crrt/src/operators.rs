//! Discrete differential and projection operators as explicit matrices
//! between coefficient spaces, weighted L2 inner products on elementwise
//! constants, and a minimum-norm divergence preimage solver.
//!
//! Orthogonality always refers to the L2 inner product: coefficient spaces
//! carry explicit weights (element volumes for elementwise-constant spaces,
//! mass matrices for the CR/RT coefficient spaces).

use crate::mesh::{vdot, Triangulation};
use crate::spaces::{CrFunction, CrSpace, QuadratureRule, RtField, RtSpace, SpaceError};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use thiserror::Error;

/// Relative residual above which a divergence preimage is rejected.
pub const DIV_SOLVE_RTOL: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("right-hand side is not in the range of the divergence (residual {residual:.3e})")]
    Incompatible { residual: f64 },
    #[error(transparent)]
    Quadrature(#[from] SpaceError),
}

/// An elementwise constant scalar or vector field with the volume-weighted
/// L2 inner product. Vector values are stored element-major.
#[derive(Debug, Clone)]
pub struct PwConst {
    pub mesh: Arc<Triangulation>,
    pub comps: usize,
    pub values: DVector<f64>,
}

impl PwConst {
    pub fn zeros(mesh: Arc<Triangulation>, comps: usize) -> Self {
        let n = mesh.n_elements() * comps;
        PwConst {
            mesh,
            comps,
            values: DVector::zeros(n),
        }
    }

    pub fn from_values(mesh: Arc<Triangulation>, comps: usize, values: DVector<f64>) -> Self {
        assert_eq!(values.len(), mesh.n_elements() * comps);
        PwConst {
            mesh,
            comps,
            values,
        }
    }

    pub fn from_fn(
        mesh: Arc<Triangulation>,
        comps: usize,
        mut f: impl FnMut(usize) -> Vec<f64>,
    ) -> Self {
        let mut values = DVector::zeros(mesh.n_elements() * comps);
        for t in 0..mesh.n_elements() {
            let v = f(t);
            assert_eq!(v.len(), comps);
            for i in 0..comps {
                values[t * comps + i] = v[i];
            }
        }
        PwConst {
            mesh,
            comps,
            values,
        }
    }

    /// L2 projection of an element-aware function handle, computed by
    /// quadrature of the requested exactness degree.
    pub fn project(
        mesh: Arc<Triangulation>,
        comps: usize,
        f: impl Fn(usize, &[f64]) -> Vec<f64>,
        degree: usize,
    ) -> Result<Self, SpaceError> {
        let rule = QuadratureRule::simplex(mesh.dim, degree)?;
        let mut values = DVector::zeros(mesh.n_elements() * comps);
        for t in 0..mesh.n_elements() {
            for i in 0..comps {
                let mean =
                    rule.integrate_element(&mesh, t, |x| f(t, x)[i]) / mesh.elements[t].volume;
                values[t * comps + i] = mean;
            }
        }
        Ok(PwConst {
            mesh,
            comps,
            values,
        })
    }

    pub fn value(&self, element: usize) -> &[f64] {
        &self.values.as_slice()[element * self.comps..(element + 1) * self.comps]
    }

    /// Volume-weighted inner product `sum_T |T| v_T . w_T`.
    pub fn inner(&self, other: &PwConst) -> f64 {
        assert_eq!(self.comps, other.comps);
        let mut sum = 0.0;
        for t in 0..self.mesh.n_elements() {
            sum += self.mesh.elements[t].volume * vdot(self.value(t), other.value(t));
        }
        sum
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

/// Inner-product weight of a coefficient space.
#[derive(Debug, Clone)]
pub enum Weight {
    Identity,
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Weight {
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Weight::Identity => a.dot(b),
            Weight::Diagonal(w) => a.iter().zip(b.iter()).zip(w.iter()).map(|((x, y), w)| x * y * w).sum(),
            Weight::Dense(m) => a.dot(&(m * b)),
        }
    }

    pub fn norm(&self, a: &DVector<f64>) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// `F m` for a factor with `F^T F = W`. The factor is the Cholesky
    /// transpose for dense weights; it maps coefficients to coordinates in
    /// which the weighted inner product is Euclidean.
    pub fn sqrt_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Identity => m.clone(),
            Weight::Diagonal(w) => scale_rows(m, &w.map(|x| x.sqrt())),
            Weight::Dense(mat) => cholesky_of(mat).l().transpose() * m,
        }
    }

    /// `F^{-1} m`, the inverse of [`Weight::sqrt_mul`].
    pub fn invsqrt_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Identity => m.clone(),
            Weight::Diagonal(w) => scale_rows(m, &w.map(|x| 1.0 / x.sqrt())),
            Weight::Dense(mat) => cholesky_of(mat)
                .l()
                .transpose()
                .solve_upper_triangular(m)
                .expect("Cholesky factor is invertible"),
        }
    }

    /// `F^{-T} m`, needed when the factor acts from the right.
    pub fn invsqrt_t_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Identity => m.clone(),
            Weight::Diagonal(w) => scale_rows(m, &w.map(|x| 1.0 / x.sqrt())),
            Weight::Dense(mat) => cholesky_of(mat)
                .l()
                .solve_lower_triangular(m)
                .expect("Cholesky factor is invertible"),
        }
    }
}

fn cholesky_of(m: &DMatrix<f64>) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
    nalgebra::Cholesky::new((m + m.transpose()) * 0.5).expect("weight matrix is positive definite")
}

fn scale_rows(m: &DMatrix<f64>, factors: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            out[(i, j)] *= factors[i];
        }
    }
    out
}

/// Named coefficient space with its inner-product weight.
#[derive(Debug, Clone)]
pub struct SpaceDescriptor {
    pub name: String,
    pub dim: usize,
    pub weight: Weight,
}

/// A dense matrix between two weighted coefficient spaces.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<f64>,
    pub domain: SpaceDescriptor,
    pub codomain: SpaceDescriptor,
}

impl OperatorMatrix {
    /// Triplet text rendering, one `row col value` line per nonzero entry.
    pub fn to_triplets(&self) -> String {
        let mut out = String::new();
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    out.push_str(&format!("{i} {j} {v:.17e}\n"));
                }
            }
        }
        out
    }
}

/// Diagonal volume weight of the elementwise-constant space with `comps`
/// components.
pub fn l0_weight(mesh: &Triangulation, comps: usize) -> Weight {
    let mut w = DVector::zeros(mesh.n_elements() * comps);
    for t in 0..mesh.n_elements() {
        for i in 0..comps {
            w[t * comps + i] = mesh.elements[t].volume;
        }
    }
    Weight::Diagonal(w)
}

fn l0_descriptor(mesh: &Triangulation, comps: usize) -> SpaceDescriptor {
    SpaceDescriptor {
        name: if comps == 1 { "L0".into() } else { format!("L0^{comps}") },
        dim: mesh.n_elements() * comps,
        weight: l0_weight(mesh, comps),
    }
}

/// CR mass matrix, assembled with degree-2 quadrature.
pub fn cr_mass(space: &CrSpace) -> DMatrix<f64> {
    let mesh = &space.mesh;
    let d = mesh.dim as f64;
    let rule = QuadratureRule::simplex(mesh.dim, 2).expect("degree 2 is available");
    let n = space.n_dofs();
    let mut m = DMatrix::zeros(n, n);
    for t in 0..mesh.n_elements() {
        let local: Vec<(usize, usize)> = mesh.element_sides[t]
            .iter()
            .filter_map(|&(s, _)| space.dof_of_side(s).map(|j| (s, j)))
            .collect();
        // basis values at quadrature points
        let el = &mesh.elements[t];
        for (lambda, &w) in rule.points.iter().zip(&rule.weights) {
            let mut vals = Vec::with_capacity(local.len());
            for &(s, _) in &local {
                let z = mesh.sides[s].opposite_vertex(t);
                let lz = lambda[mesh.local_vertex_index(t, z)];
                vals.push(1.0 - d * lz);
            }
            for (a, &(_, ja)) in local.iter().enumerate() {
                for (b, &(_, jb)) in local.iter().enumerate() {
                    m[(ja, jb)] += el.volume * w * vals[a] * vals[b];
                }
            }
        }
    }
    m
}

/// RT mass matrix, assembled with degree-2 quadrature.
pub fn rt_mass(space: &RtSpace) -> DMatrix<f64> {
    let mesh = &space.mesh;
    let d = mesh.dim as f64;
    let rule = QuadratureRule::simplex(mesh.dim, 2).expect("degree 2 is available");
    let n = space.n_dofs();
    let mut m = DMatrix::zeros(n, n);
    for t in 0..mesh.n_elements() {
        let el = &mesh.elements[t];
        let local: Vec<(usize, usize, f64)> = mesh.element_sides[t]
            .iter()
            .filter_map(|&(s, sign)| space.dof_of_side(s).map(|j| (s, j, sign)))
            .collect();
        for (lambda, &w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.from_barycentric(t, lambda);
            let mut vals: Vec<Vec<f64>> = Vec::with_capacity(local.len());
            for &(s, _, sign) in &local {
                let side = &mesh.sides[s];
                let c = sign * side.area / el.volume;
                let psi: Vec<f64> = (0..mesh.dim)
                    .map(|i| {
                        c * ((x[i] - el.barycenter[i]) / d
                            + (side.midpoint[i] - el.barycenter[i]))
                    })
                    .collect();
                vals.push(psi);
            }
            for (a, &(_, ja, _)) in local.iter().enumerate() {
                for (b, &(_, jb, _)) in local.iter().enumerate() {
                    m[(ja, jb)] += el.volume * w * vdot(&vals[a], &vals[b]);
                }
            }
        }
    }
    m
}

/// Elementwise gradient as a matrix from CR coefficients to `L0^d`.
pub fn grad_matrix(space: &CrSpace) -> OperatorMatrix {
    let mesh = &space.mesh;
    let d = mesh.dim;
    let mut m = DMatrix::zeros(d * mesh.n_elements(), space.n_dofs());
    for t in 0..mesh.n_elements() {
        let vol = mesh.elements[t].volume;
        for &(s, sign) in &mesh.element_sides[t] {
            if let Some(j) = space.dof_of_side(s) {
                let side = &mesh.sides[s];
                let c = sign * side.area / vol;
                for i in 0..d {
                    m[(t * d + i, j)] += c * side.normal[i];
                }
            }
        }
    }
    OperatorMatrix {
        matrix: m,
        domain: SpaceDescriptor {
            name: "CR_D".into(),
            dim: space.n_dofs(),
            weight: Weight::Dense(cr_mass(space)),
        },
        codomain: l0_descriptor(mesh, d),
    }
}

/// Elementwise divergence as a matrix from RT coefficients to `L0`.
pub fn div_matrix(space: &RtSpace) -> OperatorMatrix {
    let mesh = &space.mesh;
    let mut m = DMatrix::zeros(mesh.n_elements(), space.n_dofs());
    for t in 0..mesh.n_elements() {
        let vol = mesh.elements[t].volume;
        for &(s, sign) in &mesh.element_sides[t] {
            if let Some(j) = space.dof_of_side(s) {
                m[(t, j)] += sign * mesh.sides[s].area / vol;
            }
        }
    }
    OperatorMatrix {
        matrix: m,
        domain: SpaceDescriptor {
            name: "RT_N".into(),
            dim: space.n_dofs(),
            weight: Weight::Dense(rt_mass(space)),
        },
        codomain: l0_descriptor(mesh, 1),
    }
}

/// Elementwise average (barycenter evaluation) of CR functions as a matrix
/// into `L0`.
pub fn proj_cr(space: &CrSpace) -> OperatorMatrix {
    let mesh = &space.mesh;
    let value = 1.0 / (mesh.dim + 1) as f64;
    let mut m = DMatrix::zeros(mesh.n_elements(), space.n_dofs());
    for t in 0..mesh.n_elements() {
        for &(s, _) in &mesh.element_sides[t] {
            if let Some(j) = space.dof_of_side(s) {
                m[(t, j)] += value;
            }
        }
    }
    OperatorMatrix {
        matrix: m,
        domain: SpaceDescriptor {
            name: "CR_D".into(),
            dim: space.n_dofs(),
            weight: Weight::Dense(cr_mass(space)),
        },
        codomain: l0_descriptor(mesh, 1),
    }
}

/// Elementwise average of RT fields as a matrix into `L0^d`.
pub fn proj_rt(space: &RtSpace) -> OperatorMatrix {
    let mesh = &space.mesh;
    let d = mesh.dim;
    let mut m = DMatrix::zeros(d * mesh.n_elements(), space.n_dofs());
    for t in 0..mesh.n_elements() {
        let el = &mesh.elements[t];
        for &(s, sign) in &mesh.element_sides[t] {
            if let Some(j) = space.dof_of_side(s) {
                let side = &mesh.sides[s];
                let c = sign * side.area / el.volume;
                for i in 0..d {
                    m[(t * d + i, j)] += c * (side.midpoint[i] - el.barycenter[i]);
                }
            }
        }
    }
    OperatorMatrix {
        matrix: m,
        domain: SpaceDescriptor {
            name: "RT_N".into(),
            dim: space.n_dofs(),
            weight: Weight::Dense(rt_mass(space)),
        },
        codomain: l0_descriptor(mesh, d),
    }
}

/// Elementwise gradient of a CR function.
pub fn cr_gradient(v: &CrFunction) -> PwConst {
    let mesh = v.space.mesh.clone();
    PwConst::from_fn(mesh, v.space.mesh.dim, |t| v.gradient_on(t))
}

/// Elementwise average of a CR function.
pub fn cr_average(v: &CrFunction) -> PwConst {
    let mesh = v.space.mesh.clone();
    PwConst::from_fn(mesh, 1, |t| vec![v.value_at_barycenter(t)])
}

/// Elementwise divergence of an RT field.
pub fn rt_divergence(y: &RtField) -> PwConst {
    let mesh = y.space.mesh.clone();
    PwConst::from_fn(mesh, 1, |t| vec![y.divergence_on(t)])
}

/// Elementwise average of an RT field.
pub fn rt_average(y: &RtField) -> PwConst {
    let mesh = y.space.mesh.clone();
    PwConst::from_fn(mesh, y.space.mesh.dim, |t| y.element_data(t).0)
}

/// Residual `|(avg v, w) - (v, avg w)|` of the self-adjointness of the
/// elementwise averaging, for element-aware scalar handles.
pub fn self_adjointness_residual(
    mesh: &Triangulation,
    v: impl Fn(usize, &[f64]) -> f64,
    w: impl Fn(usize, &[f64]) -> f64,
    degree: usize,
) -> Result<f64, SpaceError> {
    let rule = QuadratureRule::simplex(mesh.dim, degree)?;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for t in 0..mesh.n_elements() {
        let vol = mesh.elements[t].volume;
        let int_v = rule.integrate_element(mesh, t, |x| v(t, x));
        let int_w = rule.integrate_element(mesh, t, |x| w(t, x));
        lhs += (int_v / vol) * int_w;
        rhs += int_v * (int_w / vol);
    }
    Ok((lhs - rhs).abs())
}

/// Residual of the elementwise integration-by-parts formula
/// `(grad_h v, y) + (v, div y) - boundary term`, with the boundary term
/// assembled from side traces. Vanishes for constrained pairs.
pub fn integration_by_parts_residual(v: &CrFunction, y: &RtField) -> f64 {
    let mesh = &v.space.mesh;
    debug_assert!(Arc::ptr_eq(mesh, &y.space.mesh));
    let mut total = 0.0;
    for t in 0..mesh.n_elements() {
        let vol = mesh.elements[t].volume;
        let grad = v.gradient_on(t);
        let (a, _) = y.element_data(t);
        // grad v is constant and the element average of y is a_T
        total += vol * vdot(&grad, &a);
        total += vol * v.value_at_barycenter(t) * y.divergence_on(t);
    }
    let mut boundary = 0.0;
    for (s, side) in mesh.sides.iter().enumerate() {
        if side.is_boundary() {
            // the trace of v is affine along S, so its side integral is
            // |S| times the midpoint value; y.n is the stored flux
            boundary += y.flux(s) * side.area * v.side_value(s);
        }
    }
    (total - boundary).abs()
}

/// Minimum-norm solve of `div z = f` in the constrained RT space, with the
/// norm induced by the RT mass matrix. Fails with `Incompatible` when `f` is
/// not in the range (only possible without Dirichlet boundary, where the
/// volume-weighted mean must vanish).
pub fn div_solve(space: &RtSpace, f: &PwConst) -> Result<RtField, OperatorError> {
    assert_eq!(f.comps, 1);
    let div = div_matrix(space);
    let w0 = l0_weight(&space.mesh, 1);
    let f_norm = w0.norm(&f.values);
    if space.n_dofs() == 0 {
        if f_norm > 0.0 {
            return Err(OperatorError::Incompatible { residual: f_norm });
        }
        return Ok(RtField::zero(space));
    }
    // weighted pseudoinverse: minimize z' M z subject to D z = f, working in
    // coordinates zeta = F z with F^T F = M
    let wd = w0.sqrt_mul(&div.matrix);
    let b = div
        .domain
        .weight
        .invsqrt_t_mul(&wd.transpose())
        .transpose();
    let rhs_mat =
        w0.sqrt_mul(&DMatrix::from_column_slice(f.values.len(), 1, f.values.as_slice()));
    let rhs = DVector::from_column_slice(rhs_mat.column(0).as_slice());
    let svd = crate::linalg::full_svd(&b);
    let zeta = svd.pseudo_solve(&rhs, crate::subspace::RANK_RTOL);
    let z_mat = div
        .domain
        .weight
        .invsqrt_mul(&DMatrix::from_column_slice(zeta.len(), 1, zeta.as_slice()));
    let z = DVector::from_column_slice(z_mat.column(0).as_slice());
    let residual = w0.norm(&(&div.matrix * &z - &f.values));
    if residual > DIV_SOLVE_RTOL * f_norm.max(f64::MIN_POSITIVE) && f_norm > 0.0 {
        return Err(OperatorError::Incompatible { residual });
    }
    if f_norm == 0.0 && residual > 0.0 {
        return Err(OperatorError::Incompatible { residual });
    }
    Ok(RtField::from_coeffs(space, z))
}
