//! Certification of the orthogonality identities between projected RT fields
//! and CR gradients, the splitting of elementwise-constant vector fields, and
//! the surjectivity of the CR average, together with the constructive lifting
//! operations behind them.
//!
//! Identity A: the orthogonal complement of the averaged RT space equals the
//! gradients of the average-free CR functions. Identity B: the divergences of
//! average-free RT fields form the orthogonal complement of the averaged CR
//! space. Both are certified by explicit subspace computation.

use crate::mesh::{vdot, SideMarker, Triangulation};
use crate::operators::{
    div_matrix, div_solve, grad_matrix, l0_weight, proj_cr, proj_rt, OperatorError, PwConst,
};
use crate::spaces::{CrSpace, RtField, RtSpace};
use crate::subspace::{
    compare, complement, nullspace, projector_sum_min_eigenvalue, principal_angle_cosines, range,
    range_restricted, Containment,
};
use nalgebra::DVector;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

/// Default projector-distance tolerance for identity certification.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OrthoError {
    #[error("input violates the orthogonality precondition (defect {defect:.3e})")]
    PreconditionViolated { defect: f64 },
    #[error("internal construction failed: {detail} (residual {residual:.3e})")]
    AssertionFailed { detail: String, residual: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Verdict of one subspace identity.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub lhs_dim: usize,
    pub rhs_dim: usize,
    pub projector_distance: f64,
    pub pass: bool,
}

/// Verdict of the direct-sum splitting of `L0^d`.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionCheck {
    pub kernel_dim: usize,
    pub gradient_dim: usize,
    pub ambient_dim: usize,
    /// Largest cosine of a principal angle between the two summands.
    pub max_angle_cosine: f64,
    pub projector_sum_min_eigenvalue: f64,
    /// Worst normal-trace defect of averaged divergence-free fields.
    pub trace_residual: f64,
    pub pass: bool,
}

/// Codimension of the averaged CR space inside the elementwise constants.
#[derive(Debug, Clone, Serialize)]
pub struct SurjectivityCheck {
    pub n_elements: usize,
    pub rank: usize,
    pub codim: usize,
    /// Volume-orthonormal witness spanning the complement when codim is 1.
    pub witness: Option<Vec<f64>>,
    pub pass: bool,
}

/// Dimension bookkeeping for one mesh and boundary configuration.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionLedger {
    pub n_elements: usize,
    pub n_sides: usize,
    pub n_dirichlet: usize,
    pub n_neumann: usize,
    pub dim_cr: usize,
    pub dim_rt: usize,
}

impl DimensionLedger {
    pub fn new(mesh: &Triangulation) -> Self {
        let n_d = mesh.n_dirichlet_sides();
        let n_n = mesh.n_neumann_sides();
        DimensionLedger {
            n_elements: mesh.n_elements(),
            n_sides: mesh.n_sides(),
            n_dirichlet: n_d,
            n_neumann: n_n,
            dim_cr: mesh.n_sides() - n_d,
            dim_rt: mesh.n_sides() - n_n,
        }
    }
}

/// Full report for one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct OrthoReport {
    pub mesh: String,
    pub boundary: String,
    pub identity_a: IdentityCheck,
    pub identity_b: IdentityCheck,
    pub decomposition: DecompositionCheck,
    pub surjectivity: SurjectivityCheck,
    pub dims: DimensionLedger,
    pub notes: Vec<String>,
}

impl OrthoReport {
    pub fn all_pass(&self) -> bool {
        self.identity_a.pass
            && self.identity_b.pass
            && self.decomposition.pass
            && self.surjectivity.pass
    }
}

/// Runs all four checks on one mesh.
pub fn verify_all(
    mesh: &Arc<Triangulation>,
    mesh_label: &str,
    boundary_label: &str,
    tol: f64,
) -> OrthoReport {
    OrthoReport {
        mesh: mesh_label.to_string(),
        boundary: boundary_label.to_string(),
        identity_a: verify_identity_a(mesh, tol),
        identity_b: verify_identity_b(mesh, tol),
        decomposition: verify_decomposition(mesh, tol),
        surjectivity: surjectivity_report(mesh),
        dims: DimensionLedger::new(mesh),
        notes: vec![
            "lifting solves the average-matching system on all of CR_D by least squares; \
             no inner product on the complement of the average-free part is selected"
                .to_string(),
        ],
    }
}

/// Identity A: complement of the averaged RT space versus gradients of
/// average-free CR functions, inside `L0^d` with volume weights.
pub fn verify_identity_a(mesh: &Arc<Triangulation>, tol: f64) -> IdentityCheck {
    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let lhs = complement(&range(&proj_rt(&rt)));
    let kernel = nullspace(&proj_cr(&cr));
    let rhs = range_restricted(&grad_matrix(&cr), &kernel);
    let rel = compare(&lhs, &rhs, tol);
    IdentityCheck {
        lhs_dim: lhs.dim(),
        rhs_dim: rhs.dim(),
        projector_distance: rel.distance,
        pass: rel.containment == Containment::Equal && lhs.dim() == rhs.dim(),
    }
}

/// Identity B: divergences of average-free RT fields versus the complement of
/// the averaged CR space, inside `L0` with volume weights.
pub fn verify_identity_b(mesh: &Arc<Triangulation>, tol: f64) -> IdentityCheck {
    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let kernel = nullspace(&proj_rt(&rt));
    let lhs = range_restricted(&div_matrix(&rt), &kernel);
    let rhs = complement(&range(&proj_cr(&cr)));
    let rel = compare(&lhs, &rhs, tol);
    IdentityCheck {
        lhs_dim: lhs.dim(),
        rhs_dim: rhs.dim(),
        projector_distance: rel.distance,
        pass: rel.containment == Containment::Equal && lhs.dim() == rhs.dim(),
    }
}

/// Splitting of `L0^d` into divergence-free RT fields (which are elementwise
/// constant) and CR gradients: dimensions add up and the summands intersect
/// trivially.
pub fn verify_decomposition(mesh: &Arc<Triangulation>, tol: f64) -> DecompositionCheck {
    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let div = div_matrix(&rt);
    let kernel_coeffs = nullspace(&div);
    let kernel = range_restricted(&proj_rt(&rt), &kernel_coeffs);
    let grads = range(&grad_matrix(&cr));
    let ambient_dim = mesh.dim * mesh.n_elements();

    // averaged divergence-free fields reproduce their own normal fluxes
    let mut trace_residual: f64 = 0.0;
    for k in 0..kernel_coeffs.dim() {
        let coeffs = DVector::from_column_slice(kernel_coeffs.basis.column(k).as_slice());
        let field = RtField::from_coeffs(&rt, coeffs);
        let scale = 1.0 + field.coeffs.amax();
        for (s, side) in mesh.sides.iter().enumerate() {
            let (a_minus, _) = field.element_data(side.minus);
            let from_minus = vdot(&a_minus, &side.normal);
            let expect = field.flux(s);
            trace_residual = trace_residual.max((from_minus - expect).abs() / scale);
            if let Some(plus) = side.plus {
                let (a_plus, _) = field.element_data(plus);
                let from_plus = vdot(&a_plus, &side.normal);
                trace_residual = trace_residual.max((from_plus - expect).abs() / scale);
            }
        }
    }

    let cosines = principal_angle_cosines(&kernel, &grads);
    let max_angle_cosine = cosines.first().copied().unwrap_or(0.0);
    let min_eig = projector_sum_min_eigenvalue(&kernel, &grads);
    let dims_ok = kernel.dim() + grads.dim() == ambient_dim;
    let disjoint = max_angle_cosine < 1.0 - 1e-8;
    let covers = min_eig > 1e-8;
    DecompositionCheck {
        kernel_dim: kernel.dim(),
        gradient_dim: grads.dim(),
        ambient_dim,
        max_angle_cosine,
        projector_sum_min_eigenvalue: min_eig,
        trace_residual,
        pass: dims_ok && disjoint && covers && trace_residual <= tol,
    }
}

/// Codimension of the averaged CR space in `L0`: zero whenever some boundary
/// side is not Dirichlet, and at most one in general.
pub fn surjectivity_report(mesh: &Arc<Triangulation>) -> SurjectivityCheck {
    let cr = CrSpace::new(mesh.clone());
    let image = range(&proj_cr(&cr));
    let rank = image.dim();
    let n = mesh.n_elements();
    let codim = n - rank;
    let witness = if codim == 1 {
        let comp = complement(&image);
        Some(comp.basis.column(0).iter().copied().collect())
    } else {
        None
    };
    let gamma_d_full = mesh.dirichlet_is_whole_boundary();
    let pass = codim <= 1 && (gamma_d_full || codim == 0);
    SurjectivityCheck {
        n_elements: n,
        rank,
        codim,
        witness,
        pass,
    }
}

/// Result of lifting an elementwise-constant vector field into the RT space.
///
/// `constant_part` stores the elementwise averages of the lift and equals the
/// input bitwise; the affine part is `divergence[t]/d * (x - x_T)`.
#[derive(Debug)]
pub struct Lift {
    pub field: RtField,
    pub constant_part: PwConst,
    /// Elementwise divergence of the lift (inherited from the auxiliary
    /// preimage, so the difference of the two is elementwise constant).
    pub divergence: Vec<f64>,
    /// Worst normal-trace jump of the lifted field, relative to its size.
    pub membership_residual: f64,
}

/// Lifts `y in L0^d`, orthogonal to gradients of average-free CR functions,
/// to an RT field with elementwise average exactly `y`.
///
/// Follows the constructive argument: solve for a CR function whose average
/// matches the action of `y` on gradients, take a divergence preimage of the
/// negated average, and correct `y` by the affine part of that preimage.
pub fn lift_to_rt(y: &PwConst) -> Result<Lift, OrthoError> {
    let mesh = y.mesh.clone();
    let d = mesh.dim;
    assert_eq!(y.comps, d);
    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let grad = grad_matrix(&cr);
    let pcr = proj_cr(&cr);

    // precondition: y orthogonal to gradients of the average-free kernel
    let kernel = nullspace(&pcr);
    let w0d = l0_weight(&mesh, d);
    let scale = y.norm().max(f64::MIN_POSITIVE);
    let mut defect: f64 = 0.0;
    for k in 0..kernel.dim() {
        let gk = &grad.matrix * kernel.basis.column(k);
        defect = defect.max(w0d.inner(&y.values, &gk).abs());
    }
    if defect > DEFAULT_TOL * scale {
        return Err(OrthoError::PreconditionViolated { defect });
    }

    // least-squares solve of (avg r, avg v) = (y, grad v) over all of CR_D
    let w0 = l0_weight(&mesh, 1);
    let n = cr.n_dofs();
    let avg_r = if n > 0 {
        let pw = w0.sqrt_mul(&pcr.matrix);
        let normal = pw.transpose() * &pw;
        let mut rhs = DVector::zeros(n);
        for j in 0..n {
            let gj = grad.matrix.column(j).into_owned();
            rhs[j] = w0d.inner(&y.values, &gj);
        }
        let svd = crate::linalg::full_svd(&normal);
        let r = svd.pseudo_solve(&rhs, crate::subspace::RANK_RTOL);
        &pcr.matrix * r
    } else {
        DVector::zeros(mesh.n_elements())
    };

    // divergence preimage of the negated average
    let f = PwConst::from_values(mesh.clone(), 1, -avg_r);
    let z = div_solve(&rt, &f)?;
    let div_z: Vec<f64> = (0..mesh.n_elements()).map(|t| z.divergence_on(t)).collect();

    assemble_from_parts(&rt, y.clone(), div_z, DEFAULT_TOL).map(
        |(field, constant_part, divergence, membership_residual)| Lift {
            field,
            constant_part,
            divergence,
            membership_residual,
        },
    )
}

/// Builds an RT field from elementwise data `a_T + (div_T/d)(x - x_T)`,
/// checking normal-trace continuity and Neumann traces.
fn assemble_from_parts(
    rt: &RtSpace,
    constant_part: PwConst,
    divergence: Vec<f64>,
    tol: f64,
) -> Result<(RtField, PwConst, Vec<f64>, f64), OrthoError> {
    let mesh = &rt.mesh;
    let d = mesh.dim as f64;
    let trace = |t: usize, side_id: usize| -> f64 {
        let side = &mesh.sides[side_id];
        let el = &mesh.elements[t];
        let a = constant_part.value(t);
        let b = divergence[t] / d;
        let val: Vec<f64> = (0..mesh.dim)
            .map(|i| a[i] + b * (side.midpoint[i] - el.barycenter[i]))
            .collect();
        vdot(&val, &side.normal)
    };
    let scale = 1.0 + constant_part.values.amax() + divergence.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let mut coeffs = DVector::zeros(rt.n_dofs());
    let mut residual: f64 = 0.0;
    for (s, side) in mesh.sides.iter().enumerate() {
        let from_minus = trace(side.minus, s);
        let value = match side.plus {
            Some(plus) => {
                let from_plus = trace(plus, s);
                residual = residual.max((from_minus - from_plus).abs() / scale);
                0.5 * (from_minus + from_plus)
            }
            None => from_minus,
        };
        match rt.dof_of_side(s) {
            Some(j) => coeffs[j] = value,
            None => {
                debug_assert_eq!(side.marker, SideMarker::Neumann);
                residual = residual.max(value.abs() / scale);
            }
        }
    }
    if residual > tol {
        return Err(OrthoError::AssertionFailed {
            detail: "lifted field is not H(div)-conforming".into(),
            residual,
        });
    }
    Ok((
        RtField::from_coeffs(rt, coeffs),
        constant_part,
        divergence,
        residual,
    ))
}

/// Result of the divergence preimage with vanishing elementwise average.
#[derive(Debug)]
pub struct DivfreePreimage {
    pub field: RtField,
    /// Identically zero by construction.
    pub constant_part: PwConst,
    pub divergence: Vec<f64>,
    pub membership_residual: f64,
    /// Volume-weighted norm of `div y - w` measured on the coefficients.
    pub div_residual: f64,
}

/// For `w in L0` orthogonal to the averaged CR space, produces an RT field
/// with vanishing elementwise average and divergence `w`.
pub fn divfree_preimage(w: &PwConst) -> Result<DivfreePreimage, OrthoError> {
    let mesh = w.mesh.clone();
    assert_eq!(w.comps, 1);
    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let pcr = proj_cr(&cr);
    let w0 = l0_weight(&mesh, 1);

    let scale = w.norm().max(f64::MIN_POSITIVE);
    let mut defect: f64 = 0.0;
    for j in 0..cr.n_dofs() {
        let col = pcr.matrix.column(j).into_owned();
        defect = defect.max(w0.inner(&w.values, &col).abs());
    }
    if defect > DEFAULT_TOL * scale {
        return Err(OrthoError::PreconditionViolated { defect });
    }

    let z = div_solve(&rt, w)?;
    let div_z: Vec<f64> = (0..mesh.n_elements()).map(|t| z.divergence_on(t)).collect();

    // the elementwise average of the preimage must itself be an RT field;
    // its normal traces define the constant correction
    let avg: Vec<Vec<f64>> = (0..mesh.n_elements()).map(|t| z.element_data(t).0).collect();
    let avg_scale = 1.0
        + avg
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()));
    let mut correction = DVector::zeros(rt.n_dofs());
    let mut residual: f64 = 0.0;
    for (s, side) in mesh.sides.iter().enumerate() {
        let from_minus = vdot(&avg[side.minus], &side.normal);
        let value = match side.plus {
            Some(plus) => {
                let from_plus = vdot(&avg[plus], &side.normal);
                residual = residual.max((from_minus - from_plus).abs() / avg_scale);
                0.5 * (from_minus + from_plus)
            }
            None => from_minus,
        };
        match rt.dof_of_side(s) {
            Some(j) => correction[j] = value,
            None => residual = residual.max(value.abs() / avg_scale),
        }
    }
    if residual > DEFAULT_TOL {
        return Err(OrthoError::AssertionFailed {
            detail: "average of the divergence preimage is not H(div)-conforming".into(),
            residual,
        });
    }

    let field = RtField::from_coeffs(&rt, &z.coeffs - &correction);
    let mut div_residual = 0.0;
    for t in 0..mesh.n_elements() {
        let dv = field.divergence_on(t) - w.value(t)[0];
        div_residual += mesh.elements[t].volume * dv * dv;
    }
    Ok(DivfreePreimage {
        field,
        constant_part: PwConst::zeros(mesh.clone(), mesh.dim),
        divergence: div_z,
        membership_residual: residual,
        div_residual: div_residual.sqrt(),
    })
}

/// Convenience: the averaged values of an RT field as a `PwConst`, produced
/// through the projection matrix.
pub fn project_rt_field(field: &RtField) -> PwConst {
    let mesh = field.space.mesh.clone();
    let p = proj_rt(&field.space);
    PwConst::from_values(mesh, field.space.mesh.dim, &p.matrix * &field.coeffs)
}
