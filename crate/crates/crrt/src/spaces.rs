//! Lowest-order Crouzeix-Raviart and Raviart-Thomas finite element spaces.
//!
//! The CR basis function of a side S is `phi_S = 1 - d*lambda_z` on the
//! adjacent elements, where `lambda_z` is the barycentric coordinate of the
//! vertex opposite S. It satisfies `phi_S(x_{S'}) = delta_{S,S'}`.
//!
//! The RT basis field of a side S is supported on the adjacent elements and
//! normalized so that its normal trace along n_S is exactly 1:
//! `psi_S = sigma * |S| / (d*|T|) * [(x - x_T) + d*(x_S - x_T)]` on an
//! adjacent element T, where sigma is +1 on T_- and -1 on T_+. Degrees of
//! freedom are side midpoint values (CR, excluding Dirichlet sides) and
//! normal fluxes in direction n_S (RT, excluding Neumann sides).

use crate::mesh::{vdot, SideMarker, Triangulation};
use nalgebra::DVector;
use std::sync::Arc;
use thiserror::Error;

const INSIDE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("no quadrature rule of degree {degree} on a {topo_dim}-simplex")]
    QuadratureUnavailable { topo_dim: usize, degree: usize },
    #[error("point lies outside element {element}")]
    PointOutsideElement { element: usize },
}

/// Quadrature on a reference simplex, stored as barycentric points with
/// weights summing to one.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Largest polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    /// Rule on a simplex of topological dimension 1, 2 or 3 that is exact at
    /// least to the requested degree.
    pub fn simplex(topo_dim: usize, degree: usize) -> Result<Self, SpaceError> {
        match (topo_dim, degree) {
            (1..=3, 0 | 1) => {
                let n = topo_dim + 1;
                Ok(QuadratureRule {
                    points: vec![vec![1.0 / n as f64; n]],
                    weights: vec![1.0],
                    degree: 1,
                })
            }
            (1, 2 | 3) => {
                let off = 0.5 / 3f64.sqrt();
                Ok(QuadratureRule {
                    points: vec![vec![0.5 + off, 0.5 - off], vec![0.5 - off, 0.5 + off]],
                    weights: vec![0.5, 0.5],
                    degree: 3,
                })
            }
            (2, 2) => Ok(QuadratureRule {
                points: vec![
                    vec![0.5, 0.5, 0.0],
                    vec![0.0, 0.5, 0.5],
                    vec![0.5, 0.0, 0.5],
                ],
                weights: vec![1.0 / 3.0; 3],
                degree: 2,
            }),
            (3, 2) => {
                let a = (5.0 - 5f64.sqrt()) / 20.0;
                let b = (5.0 + 3.0 * 5f64.sqrt()) / 20.0;
                let mut points = Vec::with_capacity(4);
                for i in 0..4 {
                    let mut p = vec![a; 4];
                    p[i] = b;
                    points.push(p);
                }
                Ok(QuadratureRule {
                    points,
                    weights: vec![0.25; 4],
                    degree: 2,
                })
            }
            _ => Err(SpaceError::QuadratureUnavailable { topo_dim, degree }),
        }
    }

    /// Rule on a side of a d-dimensional mesh (a (d-1)-simplex).
    pub fn side(mesh_dim: usize, degree: usize) -> Result<Self, SpaceError> {
        Self::simplex(mesh_dim - 1, degree)
    }

    /// Integrates `f` over the simplex with the given vertex coordinates and
    /// measure.
    pub fn integrate(
        &self,
        verts: &[&[f64]],
        measure: f64,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> f64 {
        let dim = verts[0].len();
        let mut sum = 0.0;
        let mut x = vec![0.0; dim];
        for (lambda, &w) in self.points.iter().zip(&self.weights) {
            x.iter_mut().for_each(|c| *c = 0.0);
            for (l, v) in lambda.iter().zip(verts) {
                for i in 0..dim {
                    x[i] += l * v[i];
                }
            }
            sum += w * f(&x);
        }
        measure * sum
    }

    /// Integrates `f` over an element of the mesh.
    pub fn integrate_element(
        &self,
        mesh: &Triangulation,
        element: usize,
        f: impl FnMut(&[f64]) -> f64,
    ) -> f64 {
        let el = &mesh.elements[element];
        let verts: Vec<&[f64]> = el.vertices.iter().map(|&v| mesh.vertices[v].as_slice()).collect();
        self.integrate(&verts, el.volume, f)
    }

    /// Integrates `f` over a side of the mesh.
    pub fn integrate_side(
        &self,
        mesh: &Triangulation,
        side: usize,
        f: impl FnMut(&[f64]) -> f64,
    ) -> f64 {
        let s = &mesh.sides[side];
        let verts: Vec<&[f64]> = s.vertices.iter().map(|&v| mesh.vertices[v].as_slice()).collect();
        self.integrate(&verts, s.area, f)
    }
}

/// Degree-of-freedom map for the Crouzeix-Raviart space with homogeneous
/// Dirichlet constraints: one value per side not contained in Gamma_D.
#[derive(Debug, Clone)]
pub struct CrSpace {
    pub mesh: Arc<Triangulation>,
    /// Global side index of each degree of freedom, ascending.
    pub dofs: Vec<usize>,
    side_to_dof: Vec<Option<usize>>,
}

impl CrSpace {
    pub fn new(mesh: Arc<Triangulation>) -> Self {
        let mut dofs = Vec::new();
        let mut side_to_dof = vec![None; mesh.n_sides()];
        for (s, side) in mesh.sides.iter().enumerate() {
            if side.marker != SideMarker::Dirichlet {
                side_to_dof[s] = Some(dofs.len());
                dofs.push(s);
            }
        }
        CrSpace {
            mesh,
            dofs,
            side_to_dof,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn dof_of_side(&self, side: usize) -> Option<usize> {
        self.side_to_dof[side]
    }
}

/// A member of the constrained CR space, stored as midpoint values on
/// non-Dirichlet sides.
#[derive(Debug, Clone)]
pub struct CrFunction {
    pub space: CrSpace,
    pub coeffs: DVector<f64>,
}

impl CrFunction {
    pub fn zero(space: &CrSpace) -> Self {
        CrFunction {
            space: space.clone(),
            coeffs: DVector::zeros(space.n_dofs()),
        }
    }

    pub fn from_coeffs(space: &CrSpace, coeffs: DVector<f64>) -> Self {
        assert_eq!(coeffs.len(), space.n_dofs());
        CrFunction {
            space: space.clone(),
            coeffs,
        }
    }

    /// Basis function of a single degree of freedom.
    pub fn basis(space: &CrSpace, dof: usize) -> Self {
        let mut coeffs = DVector::zeros(space.n_dofs());
        coeffs[dof] = 1.0;
        Self::from_coeffs(space, coeffs)
    }

    /// Midpoint value at a side (zero on Dirichlet sides).
    pub fn side_value(&self, side: usize) -> f64 {
        match self.space.dof_of_side(side) {
            Some(j) => self.coeffs[j],
            None => 0.0,
        }
    }

    /// Evaluates the elementwise affine representative on `element`.
    pub fn eval(&self, element: usize, x: &[f64]) -> Result<f64, SpaceError> {
        let mesh = &self.space.mesh;
        let lambda = mesh.barycentric(element, x);
        if lambda.iter().any(|&l| !(-INSIDE_TOL..=1.0 + INSIDE_TOL).contains(&l)) {
            return Err(SpaceError::PointOutsideElement { element });
        }
        let d = mesh.dim as f64;
        let mut value = 0.0;
        for &(s, _) in &mesh.element_sides[element] {
            let z = mesh.sides[s].opposite_vertex(element);
            let lz = lambda[mesh.local_vertex_index(element, z)];
            value += self.side_value(s) * (1.0 - d * lz);
        }
        Ok(value)
    }

    /// Value at the element barycenter, i.e. the elementwise average.
    pub fn value_at_barycenter(&self, element: usize) -> f64 {
        let mesh = &self.space.mesh;
        let d = mesh.dim as f64;
        mesh.element_sides[element]
            .iter()
            .map(|&(s, _)| self.side_value(s) * (1.0 - d / (d + 1.0)))
            .sum()
    }

    /// Elementwise gradient (constant per element).
    pub fn gradient_on(&self, element: usize) -> Vec<f64> {
        let mesh = &self.space.mesh;
        let mut g = vec![0.0; mesh.dim];
        for &(s, sign) in &mesh.element_sides[element] {
            let side = &mesh.sides[s];
            let factor = self.side_value(s) * sign * side.area / mesh.elements[element].volume;
            for i in 0..mesh.dim {
                g[i] += factor * side.normal[i];
            }
        }
        g
    }
}

/// Degree-of-freedom map for the Raviart-Thomas space with vanishing normal
/// trace on Gamma_N: one flux per side not contained in Gamma_N.
#[derive(Debug, Clone)]
pub struct RtSpace {
    pub mesh: Arc<Triangulation>,
    pub dofs: Vec<usize>,
    side_to_dof: Vec<Option<usize>>,
}

impl RtSpace {
    pub fn new(mesh: Arc<Triangulation>) -> Self {
        let mut dofs = Vec::new();
        let mut side_to_dof = vec![None; mesh.n_sides()];
        for (s, side) in mesh.sides.iter().enumerate() {
            if side.marker != SideMarker::Neumann {
                side_to_dof[s] = Some(dofs.len());
                dofs.push(s);
            }
        }
        RtSpace {
            mesh,
            dofs,
            side_to_dof,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn dof_of_side(&self, side: usize) -> Option<usize> {
        self.side_to_dof[side]
    }
}

/// A member of the constrained RT space, stored as normal fluxes across
/// non-Neumann sides in direction n_S.
#[derive(Debug, Clone)]
pub struct RtField {
    pub space: RtSpace,
    pub coeffs: DVector<f64>,
}

impl RtField {
    pub fn zero(space: &RtSpace) -> Self {
        RtField {
            space: space.clone(),
            coeffs: DVector::zeros(space.n_dofs()),
        }
    }

    pub fn from_coeffs(space: &RtSpace, coeffs: DVector<f64>) -> Self {
        assert_eq!(coeffs.len(), space.n_dofs());
        RtField {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn basis(space: &RtSpace, dof: usize) -> Self {
        let mut coeffs = DVector::zeros(space.n_dofs());
        coeffs[dof] = 1.0;
        Self::from_coeffs(space, coeffs)
    }

    pub fn flux(&self, side: usize) -> f64 {
        match self.space.dof_of_side(side) {
            Some(j) => self.coeffs[j],
            None => 0.0,
        }
    }

    /// The representation `y|_T = a_T + b_T (x - x_T)` on one element.
    pub fn element_data(&self, element: usize) -> (Vec<f64>, f64) {
        let mesh = &self.space.mesh;
        let d = mesh.dim as f64;
        let el = &mesh.elements[element];
        let mut a = vec![0.0; mesh.dim];
        let mut b = 0.0;
        for &(s, sign) in &mesh.element_sides[element] {
            let side = &mesh.sides[s];
            let c = self.flux(s) * sign * side.area / el.volume;
            for i in 0..mesh.dim {
                a[i] += c * (side.midpoint[i] - el.barycenter[i]);
            }
            b += c / d;
        }
        (a, b)
    }

    pub fn eval(&self, element: usize, x: &[f64]) -> Result<Vec<f64>, SpaceError> {
        let mesh = &self.space.mesh;
        let lambda = mesh.barycentric(element, x);
        if lambda.iter().any(|&l| !(-INSIDE_TOL..=1.0 + INSIDE_TOL).contains(&l)) {
            return Err(SpaceError::PointOutsideElement { element });
        }
        let (a, b) = self.element_data(element);
        let xt = &mesh.elements[element].barycenter;
        Ok((0..mesh.dim).map(|i| a[i] + b * (x[i] - xt[i])).collect())
    }

    /// Normal trace on a side, evaluated from the adjacent element `T_-`.
    pub fn normal_trace(&self, side: usize) -> f64 {
        let s = &self.space.mesh.sides[side];
        let (a, b) = self.element_data(s.minus);
        let xt = &self.space.mesh.elements[s.minus].barycenter;
        let val: Vec<f64> = (0..a.len()).map(|i| a[i] + b * (s.midpoint[i] - xt[i])).collect();
        vdot(&val, &s.normal)
    }

    /// Elementwise divergence (constant per element).
    pub fn divergence_on(&self, element: usize) -> f64 {
        let mesh = &self.space.mesh;
        let el = &mesh.elements[element];
        mesh.element_sides[element]
            .iter()
            .map(|&(s, sign)| self.flux(s) * sign * mesh.sides[s].area / el.volume)
            .sum()
    }
}

/// Quasi-interpolation into the constrained CR space: each coefficient is the
/// side average of `f`; Dirichlet sides are dropped.
pub fn interpolate_cr(
    space: &CrSpace,
    f: impl Fn(&[f64]) -> f64,
) -> Result<CrFunction, SpaceError> {
    let mesh = &space.mesh;
    let rule = QuadratureRule::side(mesh.dim, 2)?;
    let mut coeffs = DVector::zeros(space.n_dofs());
    for (j, &s) in space.dofs.iter().enumerate() {
        coeffs[j] = rule.integrate_side(mesh, s, &f) / mesh.sides[s].area;
    }
    Ok(CrFunction::from_coeffs(space, coeffs))
}

/// Result of RT quasi-interpolation. A nonzero `max_neumann_flux` records
/// that the input had nonvanishing normal components on Gamma_N; those
/// coefficients are constrained to zero.
#[derive(Debug)]
pub struct RtInterpolation {
    pub field: RtField,
    pub max_neumann_flux: f64,
}

/// Quasi-interpolation into the constrained RT space: each coefficient is the
/// side average of the normal component `g . n_S`.
pub fn interpolate_rt(
    space: &RtSpace,
    g: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<RtInterpolation, SpaceError> {
    let mesh = &space.mesh;
    let rule = QuadratureRule::side(mesh.dim, 2)?;
    let mut coeffs = DVector::zeros(space.n_dofs());
    let mut max_neumann_flux: f64 = 0.0;
    for (s, side) in mesh.sides.iter().enumerate() {
        let avg = rule.integrate_side(mesh, s, |x| vdot(&g(x), &side.normal)) / side.area;
        match space.dof_of_side(s) {
            Some(j) => coeffs[j] = avg,
            None => max_neumann_flux = max_neumann_flux.max(avg.abs()),
        }
    }
    Ok(RtInterpolation {
        field: RtField::from_coeffs(space, coeffs),
        max_neumann_flux,
    })
}
