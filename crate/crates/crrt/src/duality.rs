//! Discrete convex duality: the primal problem over the constrained CR space,
//! the dual problem over the constrained RT space, a damped Newton solver for
//! the primal, dual recovery by elementwise postprocessing, and duality-gap
//! certification.
//!
//! The primal energy is `I_h(u) = sum_T |T| [phi(grad u|_T) + psi_T(avg u|_T)]`,
//! the dual energy is `D_h(z) = -sum_T |T| [phi*(avg z|_T) + psi_T*(div z|_T)]`.
//! For differentiable `phi` the dual maximizer is recovered from the primal
//! minimizer as `z|_T = phi'(grad u) + psi_T'(avg u)/d * (x - x_T)`.

use crate::mesh::{vdot, Triangulation};
use crate::operators::{cr_mass, grad_matrix, proj_cr};
use crate::spaces::{CrFunction, CrSpace, RtField, RtSpace};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

/// Feasibility tolerance at the boundary of the conjugate domain.
pub const DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DualityError {
    #[error("Newton iteration did not converge (residual {residual:.3e} after {iterations} steps)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("optimality system is singular: {0}")]
    SingularSystem(String),
    #[error("postprocessed field is not H(div)-conforming (residual {residual:.3e})")]
    AssertionFailed { residual: f64 },
}

/// Convex integrand acting on gradient vectors, with conjugate pair.
#[derive(Debug, Clone, Serialize)]
pub enum Phi {
    /// `phi(s) = |s|^2 / 2`, self-conjugate.
    Quadratic,
    /// Huber regularization of the Euclidean norm:
    /// `phi(s) = |s|^2/(2 eps)` for `|s| <= eps`, else `|s| - eps/2`;
    /// conjugate `eps |y|^2 / 2` on the closed unit ball, infinite outside.
    Huber { eps: f64 },
}

impl Phi {
    pub fn value(&self, s: &[f64]) -> f64 {
        let n = vdot(s, s).sqrt();
        match self {
            Phi::Quadratic => 0.5 * n * n,
            Phi::Huber { eps } => {
                if n <= *eps {
                    n * n / (2.0 * eps)
                } else {
                    n - eps / 2.0
                }
            }
        }
    }

    pub fn grad(&self, s: &[f64]) -> Vec<f64> {
        match self {
            Phi::Quadratic => s.to_vec(),
            Phi::Huber { eps } => {
                let n = vdot(s, s).sqrt();
                if n <= *eps {
                    s.iter().map(|x| x / eps).collect()
                } else {
                    s.iter().map(|x| x / n).collect()
                }
            }
        }
    }

    /// At the kink the quadratic-branch Hessian is used; damping keeps the
    /// iteration a descent method.
    pub fn hessian(&self, s: &[f64]) -> DMatrix<f64> {
        let d = s.len();
        match self {
            Phi::Quadratic => DMatrix::identity(d, d),
            Phi::Huber { eps } => {
                let n = vdot(s, s).sqrt();
                if n <= *eps {
                    DMatrix::identity(d, d) / *eps
                } else {
                    let mut h = DMatrix::identity(d, d);
                    for i in 0..d {
                        for j in 0..d {
                            h[(i, j)] -= s[i] * s[j] / (n * n);
                        }
                    }
                    h / n
                }
            }
        }
    }

    /// Conjugate value; `None` outside the effective domain.
    pub fn conjugate(&self, y: &[f64]) -> Option<f64> {
        let n = vdot(y, y).sqrt();
        match self {
            Phi::Quadratic => Some(0.5 * n * n),
            Phi::Huber { eps } => {
                if n <= 1.0 + DOMAIN_TOL {
                    Some(eps * n * n / 2.0)
                } else {
                    None
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Phi::Quadratic => "quadratic".into(),
            Phi::Huber { eps } => format!("huber(eps={eps})"),
        }
    }
}

/// Elementwise zero-order term with conjugate pair.
#[derive(Debug, Clone, Serialize)]
pub enum Psi {
    /// `psi_T(v) = alpha/2 (v - g_T)^2` with elementwise data `g`;
    /// conjugate `w^2/(2 alpha) + g_T w`.
    Quadratic { alpha: f64, g: Vec<f64> },
    /// No zero-order term; the conjugate is the indicator of zero.
    None,
}

impl Psi {
    pub fn value(&self, element: usize, v: f64) -> f64 {
        match self {
            Psi::Quadratic { alpha, g } => 0.5 * alpha * (v - g[element]) * (v - g[element]),
            Psi::None => 0.0,
        }
    }

    pub fn deriv(&self, element: usize, v: f64) -> f64 {
        match self {
            Psi::Quadratic { alpha, g } => alpha * (v - g[element]),
            Psi::None => 0.0,
        }
    }

    pub fn second(&self) -> f64 {
        match self {
            Psi::Quadratic { alpha, .. } => *alpha,
            Psi::None => 0.0,
        }
    }

    pub fn conjugate(&self, element: usize, w: f64) -> Option<f64> {
        match self {
            Psi::Quadratic { alpha, g } => Some(w * w / (2.0 * alpha) + g[element] * w),
            Psi::None => {
                if w.abs() <= DOMAIN_TOL {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Psi::Quadratic { .. } => "quadratic",
            Psi::None => "none",
        }
    }
}

/// Primal energy, evaluated exactly (all integrands are elementwise constant
/// after averaging and differentiation).
pub fn primal_energy(u: &CrFunction, phi: &Phi, psi: &Psi) -> f64 {
    let mesh = &u.space.mesh;
    let mut total = 0.0;
    for t in 0..mesh.n_elements() {
        let vol = mesh.elements[t].volume;
        total += vol * phi.value(&u.gradient_on(t));
        total += vol * psi.value(t, u.value_at_barycenter(t));
    }
    total
}

/// Dual energy; negative infinity when an averaged value leaves the domain
/// of a conjugate.
pub fn dual_energy(z: &RtField, phi: &Phi, psi: &Psi) -> f64 {
    let mesh = &z.space.mesh;
    let mut total = 0.0;
    for t in 0..mesh.n_elements() {
        let vol = mesh.elements[t].volume;
        let (a, _) = z.element_data(t);
        match (phi.conjugate(&a), psi.conjugate(t, z.divergence_on(t))) {
            (Some(p), Some(q)) => total -= vol * (p + q),
            _ => return f64::NEG_INFINITY,
        }
    }
    total
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonParams {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo_slope: f64,
    pub backtrack: f64,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams {
            tol: 1e-11,
            max_iter: 100,
            armijo_slope: 1e-4,
            backtrack: 0.5,
        }
    }
}

#[derive(Debug)]
pub struct PrimalSolution {
    pub u: CrFunction,
    pub iterations: usize,
    /// Residual of the optimality system in the mass-weighted dual norm.
    pub residual: f64,
}

struct EnergyModel<'a> {
    mesh: &'a Arc<Triangulation>,
    grad: DMatrix<f64>,
    proj: DMatrix<f64>,
    phi: &'a Phi,
    psi: &'a Psi,
}

impl EnergyModel<'_> {
    fn energy(&self, u: &DVector<f64>) -> f64 {
        let g = &self.grad * u;
        let m = &self.proj * u;
        let d = self.mesh.dim;
        let mut total = 0.0;
        for t in 0..self.mesh.n_elements() {
            let vol = self.mesh.elements[t].volume;
            let s = &g.as_slice()[t * d..(t + 1) * d];
            total += vol * (self.phi.value(s) + self.psi.value(t, m[t]));
        }
        total
    }

    fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let g = &self.grad * u;
        let m = &self.proj * u;
        let d = self.mesh.dim;
        let nt = self.mesh.n_elements();
        let mut dphi = DVector::zeros(nt * d);
        let mut dpsi = DVector::zeros(nt);
        for t in 0..nt {
            let vol = self.mesh.elements[t].volume;
            let s = &g.as_slice()[t * d..(t + 1) * d];
            for (i, gi) in self.phi.grad(s).iter().enumerate() {
                dphi[t * d + i] = vol * gi;
            }
            dpsi[t] = vol * self.psi.deriv(t, m[t]);
        }
        self.grad.transpose() * dphi + self.proj.transpose() * dpsi
    }

    fn hessian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let g = &self.grad * u;
        let d = self.mesh.dim;
        let nt = self.mesh.n_elements();
        let n = u.len();
        let mut block = DMatrix::zeros(nt * d, nt * d);
        let mut diag = DVector::zeros(nt);
        for t in 0..nt {
            let vol = self.mesh.elements[t].volume;
            let s = &g.as_slice()[t * d..(t + 1) * d];
            let h = self.phi.hessian(s);
            for i in 0..d {
                for j in 0..d {
                    block[(t * d + i, t * d + j)] = vol * h[(i, j)];
                }
            }
            diag[t] = vol * self.psi.second();
        }
        let mut hess = self.grad.transpose() * block * &self.grad;
        let pt = self.proj.transpose();
        for t in 0..nt {
            if diag[t] != 0.0 {
                for i in 0..n {
                    for j in 0..n {
                        hess[(i, j)] += pt[(i, t)] * diag[t] * self.proj[(t, j)];
                    }
                }
            }
        }
        hess
    }
}

/// Minimizes the primal energy by damped Newton iteration with Armijo
/// backtracking. Quadratic problems converge in one step.
pub fn solve_primal(
    space: &CrSpace,
    phi: &Phi,
    psi: &Psi,
    params: &NewtonParams,
) -> Result<PrimalSolution, DualityError> {
    let n = space.n_dofs();
    if n == 0 {
        return Ok(PrimalSolution {
            u: CrFunction::zero(space),
            iterations: 0,
            residual: 0.0,
        });
    }
    let model = EnergyModel {
        mesh: &space.mesh,
        grad: grad_matrix(space).matrix,
        proj: proj_cr(space).matrix,
        phi,
        psi,
    };
    let mass = cr_mass(space);
    let mass_chol = nalgebra::Cholesky::new(mass)
        .ok_or_else(|| DualityError::SingularSystem("mass matrix not positive definite".into()))?;
    let dual_norm = |r: &DVector<f64>| (r.dot(&mass_chol.solve(r))).sqrt();

    let mut u = DVector::zeros(n);

    // the minimizer is unique iff the optimality system at the origin is
    // nonsingular; report a singular system instead of picking a minimizer
    let h0 = model.hessian(&u);
    let svd = crate::linalg::full_svd(&((&h0 + h0.transpose()) * 0.5));
    let max_sv = svd.sigma_max();
    let min_sv = svd.sigma[svd.sigma.len() - 1];
    if min_sv <= crate::subspace::RANK_RTOL * max_sv {
        return Err(DualityError::SingularSystem(
            "optimality system has a nontrivial kernel".into(),
        ));
    }

    let mut energy = model.energy(&u);
    for it in 0..params.max_iter {
        let grad = model.gradient(&u);
        let residual = dual_norm(&grad);
        if residual <= params.tol {
            return Ok(PrimalSolution {
                u: CrFunction::from_coeffs(space, u),
                iterations: it,
                residual,
            });
        }
        let hess = model.hessian(&u);
        let step = match nalgebra::Cholesky::new(hess) {
            Some(chol) => -chol.solve(&grad),
            None => {
                if matches!(phi, Phi::Quadratic) {
                    return Err(DualityError::SingularSystem(
                        "constant functions lie in the kernel of the optimality system".into(),
                    ));
                }
                // fall back to a mass-preconditioned descent direction
                -mass_chol.solve(&grad)
            }
        };
        let slope = grad.dot(&step);
        if slope >= 0.0 {
            return Err(DualityError::NoConvergence {
                residual,
                iterations: it,
            });
        }
        let mut t_step = 1.0;
        loop {
            let candidate = &u + &step * t_step;
            let e_new = model.energy(&candidate);
            if e_new <= energy + params.armijo_slope * t_step * slope {
                u = candidate;
                energy = e_new;
                break;
            }
            t_step *= params.backtrack;
            if t_step < 1e-14 {
                return Err(DualityError::NoConvergence {
                    residual,
                    iterations: it,
                });
            }
        }
    }
    let residual = dual_norm(&model.gradient(&u));
    if residual <= params.tol {
        Ok(PrimalSolution {
            u: CrFunction::from_coeffs(space, u),
            iterations: params.max_iter,
            residual,
        })
    } else {
        Err(DualityError::NoConvergence {
            residual,
            iterations: params.max_iter,
        })
    }
}

/// The recovered dual field together with its exact elementwise parts:
/// `averages[t] = phi'(grad u|_t)` and `divergences[t] = psi_t'(avg u|_t)`.
#[derive(Debug)]
pub struct DualRecovery {
    pub field: RtField,
    pub averages: Vec<Vec<f64>>,
    pub divergences: Vec<f64>,
    pub membership_residual: f64,
}

/// Postprocesses a primal minimizer into the dual maximizer
/// `z|_T = phi'(grad u) + psi'(avg u)/d (x - x_T)`. Fails when the assembled
/// field has discontinuous normal traces, which signals that `u` is not
/// optimal to sufficient accuracy.
pub fn postprocess_dual(
    u: &CrFunction,
    phi: &Phi,
    psi: &Psi,
    rt: &RtSpace,
) -> Result<DualRecovery, DualityError> {
    let mesh = &u.space.mesh;
    debug_assert!(Arc::ptr_eq(mesh, &rt.mesh));
    let d = mesh.dim as f64;
    let nt = mesh.n_elements();
    let averages: Vec<Vec<f64>> = (0..nt).map(|t| phi.grad(&u.gradient_on(t))).collect();
    let divergences: Vec<f64> = (0..nt)
        .map(|t| psi.deriv(t, u.value_at_barycenter(t)))
        .collect();

    let trace = |t: usize, s: usize| -> f64 {
        let side = &mesh.sides[s];
        let el = &mesh.elements[t];
        let b = divergences[t] / d;
        let val: Vec<f64> = (0..mesh.dim)
            .map(|i| averages[t][i] + b * (side.midpoint[i] - el.barycenter[i]))
            .collect();
        vdot(&val, &side.normal)
    };
    let scale = 1.0
        + averages
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()));
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
            None => residual = residual.max(value.abs() / scale),
        }
    }
    if residual > DOMAIN_TOL {
        return Err(DualityError::AssertionFailed { residual });
    }
    Ok(DualRecovery {
        field: RtField::from_coeffs(rt, coeffs),
        averages,
        divergences,
        membership_residual: residual,
    })
}

/// Primal value, dual value, gap and elementwise Fenchel residuals of one
/// solved configuration.
#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub fenchel_residual_phi: f64,
    pub fenchel_residual_psi: f64,
    pub membership_residual: f64,
    pub newton_iterations: usize,
    pub newton_residual: f64,
}

/// Solves the primal problem, recovers the dual field, and certifies the
/// duality gap together with the elementwise Fenchel identities.
pub fn duality_report(
    cr: &CrSpace,
    rt: &RtSpace,
    phi: &Phi,
    psi: &Psi,
    params: &NewtonParams,
) -> Result<DualityReport, DualityError> {
    let solution = solve_primal(cr, phi, psi, params)?;
    let recovery = postprocess_dual(&solution.u, phi, psi, rt)?;
    let mesh = &cr.mesh;
    let primal = primal_energy(&solution.u, phi, psi);
    let dual = dual_energy(&recovery.field, phi, psi);
    let gap = primal - dual;
    let relative_gap = gap.abs() / (1.0 + primal.abs());

    // Fenchel equalities at the solution, per element, evaluated on the
    // coefficient-form dual field
    let mut res_phi: f64 = 0.0;
    let mut res_psi: f64 = 0.0;
    for t in 0..mesh.n_elements() {
        let s = solution.u.gradient_on(t);
        let (a, _) = recovery.field.element_data(t);
        let w = recovery.field.divergence_on(t);
        let m = solution.u.value_at_barycenter(t);
        let conj_phi = phi.conjugate(&a).unwrap_or(f64::INFINITY);
        res_phi = res_phi.max((vdot(&s, &a) - phi.value(&s) - conj_phi).abs());
        let conj_psi = psi.conjugate(t, w).unwrap_or(f64::INFINITY);
        res_psi = res_psi.max((m * w - psi.value(t, m) - conj_psi).abs());
    }

    Ok(DualityReport {
        primal,
        dual,
        gap,
        relative_gap,
        fenchel_residual_phi: res_phi,
        fenchel_residual_psi: res_psi,
        membership_residual: recovery.membership_residual,
        newton_iterations: solution.iterations,
        newton_residual: solution.residual,
    })
}
