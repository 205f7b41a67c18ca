//! Divergence-free cycle fields on closed element chains, reconstruction of a
//! CR potential from an elementwise-constant field by path integration over
//! side midpoints, and the resulting alternative certification of the
//! orthogonality identity for projected RT fields.
//!
//! Reconstruction requires an empty Dirichlet boundary, or dimension two with
//! a connected Dirichlet boundary (checked combinatorially on the boundary
//! side graph).

use crate::mesh::{element_adjacency, vdot, vsub, SideMarker, Triangulation};
use crate::operators::{cr_gradient, div_matrix, proj_rt, PwConst};
use crate::spaces::{CrFunction, CrSpace, RtField, RtSpace};
use crate::subspace::{complement, nullspace, range, SubspaceBasis};
use nalgebra::DVector;
use serde::Serialize;
use std::collections::VecDeque;
use std::sync::Arc;
use thiserror::Error;

/// Residual tolerance for cycle closure and round trips.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PoincareError {
    #[error("invalid element chain: {0}")]
    InvalidChain(String),
    #[error("field is not orthogonal to the divergence-free fields (defect {defect:.3e})")]
    PreconditionViolated { defect: f64 },
    #[error("path integration is inconsistent: {detail} (residual {residual:.3e})")]
    CycleInconsistent { detail: String, residual: f64 },
    #[error("unsupported boundary: {0}")]
    UnsupportedBoundary(String),
    #[error("mesh is not edge-connected; path integration cannot reach every side")]
    DisconnectedMesh,
}

/// An ordered chain of elements `T_1..T_J` with sides `S_0..S_J`, where `S_j`
/// is shared by `T_j` and `T_{j+1}`. The chain is closed when the first and
/// last sides coincide.
#[derive(Debug, Clone)]
pub struct ElementChain {
    pub elements: Vec<usize>,
    pub sides: Vec<usize>,
}

impl ElementChain {
    pub fn empty() -> Self {
        ElementChain {
            elements: Vec::new(),
            sides: Vec::new(),
        }
    }

    /// Builds a closed chain from a cycle walk `[(element, side to next)]`.
    pub fn from_cycle(walk: &[(usize, usize)]) -> Self {
        if walk.is_empty() {
            return Self::empty();
        }
        let elements: Vec<usize> = walk.iter().map(|&(t, _)| t).collect();
        let mut sides = Vec::with_capacity(walk.len() + 1);
        sides.push(walk.last().unwrap().1);
        sides.extend(walk.iter().map(|&(_, s)| s));
        ElementChain { elements, sides }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.is_empty() || self.sides.first() == self.sides.last()
    }

    fn validate(&self, mesh: &Triangulation) -> Result<(), PoincareError> {
        if self.is_empty() {
            if !self.sides.is_empty() {
                return Err(PoincareError::InvalidChain(
                    "empty chain must not carry sides".into(),
                ));
            }
            return Ok(());
        }
        if self.sides.len() != self.elements.len() + 1 {
            return Err(PoincareError::InvalidChain(format!(
                "{} elements need {} sides, found {}",
                self.elements.len(),
                self.elements.len() + 1,
                self.sides.len()
            )));
        }
        for j in 0..self.elements.len() {
            let t = self.elements[j];
            let next = self.elements[(j + 1) % self.elements.len()];
            let s = self.sides[j + 1];
            let side = &mesh.sides[s];
            let pair_ok = if j + 1 < self.elements.len() || self.is_closed() {
                (side.minus == t && side.plus == Some(next))
                    || (side.minus == next && side.plus == Some(t))
            } else {
                side.minus == t || side.plus == Some(t)
            };
            if !pair_ok {
                return Err(PoincareError::InvalidChain(format!(
                    "side {s} does not join elements {t} and {next}"
                )));
            }
        }
        Ok(())
    }
}

/// Closed chains generating the cycle space of the element adjacency graph.
pub fn cycle_basis(mesh: &Triangulation) -> Vec<ElementChain> {
    element_adjacency(mesh)
        .cycle_basis()
        .iter()
        .map(|walk| ElementChain::from_cycle(walk))
        .collect()
}

/// The divergence-free RT field carried by a closed chain: each shared side
/// contributes its basis field scaled by the reciprocal side area, oriented
/// along the chain.
pub fn cycle_field(space: &RtSpace, chain: &ElementChain) -> Result<RtField, PoincareError> {
    let mesh = &space.mesh;
    chain.validate(mesh)?;
    if !chain.is_closed() {
        return Err(PoincareError::InvalidChain("chain is not closed".into()));
    }
    let mut coeffs = DVector::zeros(space.n_dofs());
    for j in 0..chain.len() {
        let from = chain.elements[j];
        let s = chain.sides[j + 1];
        let side = &mesh.sides[s];
        let j_dof = space.dof_of_side(s).ok_or_else(|| {
            PoincareError::InvalidChain(format!("chain side {s} is Neumann-constrained"))
        })?;
        let orientation = if side.minus == from { 1.0 } else { -1.0 };
        coeffs[j_dof] += orientation / side.area;
    }
    Ok(RtField::from_coeffs(space, coeffs))
}

/// True when the Dirichlet boundary sides form a single connected component
/// of the boundary side graph (sides adjacent when sharing a vertex).
pub fn dirichlet_boundary_connected(mesh: &Triangulation) -> bool {
    let dirichlet: Vec<usize> = (0..mesh.n_sides())
        .filter(|&s| mesh.sides[s].marker == SideMarker::Dirichlet)
        .collect();
    if dirichlet.len() <= 1 {
        return true;
    }
    let mut seen = vec![false; dirichlet.len()];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for k in 0..dirichlet.len() {
            if !seen[k] {
                let a = &mesh.sides[dirichlet[i]].vertices;
                let b = &mesh.sides[dirichlet[k]].vertices;
                if a.iter().any(|v| b.contains(v)) {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Rotated conforming nodal basis fields `(grad phi_z)^perp` in dimension
/// two, one per interior vertex and per vertex interior to the Dirichlet
/// boundary. They are divergence-free members of the constrained RT space.
pub fn rotated_hats(space: &RtSpace) -> Vec<RtField> {
    let mesh = &space.mesh;
    assert_eq!(mesh.dim, 2, "rotated nodal fields exist in dimension two");
    let mut boundary_markers: Vec<Vec<SideMarker>> = vec![Vec::new(); mesh.vertices.len()];
    for side in &mesh.sides {
        if side.is_boundary() {
            for &v in &side.vertices {
                boundary_markers[v].push(side.marker);
            }
        }
    }
    let mut fields = Vec::new();
    for z in 0..mesh.vertices.len() {
        let on_boundary = !boundary_markers[z].is_empty();
        let interior_dirichlet = boundary_markers[z].len() == 2
            && boundary_markers[z]
                .iter()
                .all(|&m| m == SideMarker::Dirichlet);
        if on_boundary && !interior_dirichlet {
            continue;
        }
        // the flux of (grad phi_z)^perp across a side is the tangential
        // derivative of phi_z along it; compute from the minus element
        let mut coeffs = DVector::zeros(space.n_dofs());
        let mut feasible = true;
        for (s, side) in mesh.sides.iter().enumerate() {
            let t = side.minus;
            if !mesh.elements[t].vertices.contains(&z) {
                continue;
            }
            // grad of the nodal function on t: lambda_z has gradient
            // -|S_z|/(d |T|) n_out with S_z the side opposite z
            let opp = mesh.element_sides[t]
                .iter()
                .map(|&(sid, _)| sid)
                .find(|&sid| mesh.sides[sid].opposite_vertex(t) == z)
                .expect("every vertex has an opposite side");
            let opp_side = &mesh.sides[opp];
            let sign = if opp_side.minus == t { 1.0 } else { -1.0 };
            let factor = -sign * opp_side.area / (2.0 * mesh.elements[t].volume);
            let grad = [factor * opp_side.normal[0], factor * opp_side.normal[1]];
            let perp = [-grad[1], grad[0]];
            let flux = vdot(&perp, &side.normal);
            match space.dof_of_side(s) {
                Some(j) => coeffs[j] = flux,
                None => {
                    if flux.abs() > 1e-13 {
                        feasible = false;
                    }
                }
            }
        }
        if feasible {
            fields.push(RtField::from_coeffs(space, coeffs));
        }
    }
    fields
}

/// Reconstructs a CR potential with elementwise gradient `w` by integrating
/// `w` along paths of side midpoints, provided `w` is orthogonal to all
/// divergence-free fields of the constrained RT space.
pub fn reconstruct(space: &CrSpace, w: &PwConst) -> Result<CrFunction, PoincareError> {
    let mesh = &space.mesh;
    assert_eq!(w.comps, mesh.dim);
    let has_dirichlet = mesh.n_dirichlet_sides() > 0;
    if has_dirichlet {
        if mesh.dim != 2 {
            return Err(PoincareError::UnsupportedBoundary(
                "nonempty Dirichlet boundary requires dimension two".into(),
            ));
        }
        if !dirichlet_boundary_connected(mesh) {
            return Err(PoincareError::UnsupportedBoundary(
                "Dirichlet boundary is not connected".into(),
            ));
        }
    }

    // orthogonality to the divergence-free fields: test against a basis of
    // the nullspace of the divergence
    let rt = RtSpace::new(mesh.clone());
    let div = div_matrix(&rt);
    let kernel = nullspace(&div);
    let prt = proj_rt(&rt);
    let w_norm = w.norm().max(f64::MIN_POSITIVE);
    let mut defect: f64 = 0.0;
    for k in 0..kernel.dim() {
        let averaged = &prt.matrix * kernel.basis.column(k);
        let field = PwConst::from_values(mesh.clone(), mesh.dim, averaged);
        defect = defect.max(w.inner(&field).abs());
    }
    if defect > DEFAULT_TOL * w_norm {
        return Err(PoincareError::PreconditionViolated { defect });
    }

    // breadth-first integration over the side graph
    let root = if has_dirichlet {
        (0..mesh.n_sides())
            .find(|&s| mesh.sides[s].marker == SideMarker::Dirichlet)
            .unwrap()
    } else {
        0
    };
    let mut values: Vec<Option<f64>> = vec![None; mesh.n_sides()];
    values[root] = Some(0.0);
    let mut queue = VecDeque::from([root]);
    while let Some(s) = queue.pop_front() {
        let v_s = values[s].unwrap();
        let side = &mesh.sides[s];
        for (t, _) in side.adjacent() {
            let wt = w.value(t);
            for &(s2, _) in &mesh.element_sides[t] {
                if values[s2].is_none() {
                    let step = vdot(wt, &vsub(&mesh.sides[s2].midpoint, &side.midpoint));
                    values[s2] = Some(v_s + step);
                    queue.push_back(s2);
                }
            }
        }
    }
    if values.iter().any(|v| v.is_none()) {
        return Err(PoincareError::DisconnectedMesh);
    }
    let values: Vec<f64> = values.into_iter().map(|v| v.unwrap()).collect();
    let scale = 1.0 + values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    // every remaining side pair within an element must close consistently
    let mut worst: f64 = 0.0;
    for t in 0..mesh.n_elements() {
        let wt = w.value(t);
        let local = &mesh.element_sides[t];
        for i in 0..local.len() {
            for j in (i + 1)..local.len() {
                let (si, sj) = (local[i].0, local[j].0);
                let step = vdot(wt, &vsub(&mesh.sides[sj].midpoint, &mesh.sides[si].midpoint));
                worst = worst.max((values[sj] - values[si] - step).abs() / scale);
            }
        }
    }
    if worst > DEFAULT_TOL {
        return Err(PoincareError::CycleInconsistent {
            detail: "a non-tree side pair does not close".into(),
            residual: worst,
        });
    }

    // with a connected Dirichlet boundary the potential is constant there;
    // subtract that constant so the constrained values vanish
    let mut values = values;
    if has_dirichlet {
        let dirichlet: Vec<usize> = (0..mesh.n_sides())
            .filter(|&s| mesh.sides[s].marker == SideMarker::Dirichlet)
            .collect();
        let mean: f64 = dirichlet.iter().map(|&s| values[s]).sum::<f64>() / dirichlet.len() as f64;
        let spread = dirichlet
            .iter()
            .map(|&s| (values[s] - mean).abs())
            .fold(0.0f64, f64::max);
        if spread > DEFAULT_TOL * scale {
            return Err(PoincareError::CycleInconsistent {
                detail: "potential is not constant on the Dirichlet boundary".into(),
                residual: spread,
            });
        }
        for v in &mut values {
            *v -= mean;
        }
    }

    let coeffs = DVector::from_fn(space.n_dofs(), |j, _| values[space.dofs[j]]);
    let v = CrFunction::from_coeffs(space, coeffs);

    // the reconstructed potential must reproduce w elementwise
    let grad = cr_gradient(&v);
    let mut grad_defect: f64 = 0.0;
    for t in 0..mesh.n_elements() {
        for i in 0..mesh.dim {
            grad_defect = grad_defect.max((grad.value(t)[i] - w.value(t)[i]).abs());
        }
    }
    if grad_defect > DEFAULT_TOL * (1.0 + w_norm) {
        return Err(PoincareError::CycleInconsistent {
            detail: "reconstructed gradient does not match the input".into(),
            residual: grad_defect,
        });
    }
    Ok(v)
}

/// Outcome of certifying the projected-RT orthogonality identity through
/// potential reconstruction instead of subspace comparison.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareIdentityReport {
    /// Dimension of the orthogonal complement of the averaged RT space.
    pub complement_dim: usize,
    /// Worst midpoint-value jump of the reconstructed potentials across
    /// interior sides.
    pub max_midpoint_jump: f64,
    /// Worst elementwise average of the certified kernel potentials.
    pub max_kernel_average: f64,
    /// Agreement with the subspace-based identity check.
    pub agrees_with_subspace_route: bool,
    pub pass: bool,
}

/// For every basis vector of the complement of the averaged RT space,
/// reconstructs a potential, certifies that its elementwise averages are
/// constant (and vanish when the Dirichlet boundary is nonempty), and
/// cross-checks the verdict against the subspace computation.
pub fn derive_identity_a_via_poincare(
    mesh: &Arc<Triangulation>,
    tol: f64,
) -> Result<PoincareIdentityReport, PoincareError> {
    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let lhs = complement(&range(&proj_rt(&rt)));
    let has_dirichlet = mesh.n_dirichlet_sides() > 0;

    let mut max_jump: f64 = 0.0;
    let mut max_avg: f64 = 0.0;
    for k in 0..lhs.dim() {
        let w = PwConst::from_values(
            mesh.clone(),
            mesh.dim,
            DVector::from_column_slice(lhs.basis.column(k).as_slice()),
        );
        let v = reconstruct(&cr, &w)?;
        // the pairing argument: equal potential averages across every
        // interior side, hence a globally constant elementwise average
        for side in &mesh.sides {
            if let Some(plus) = side.plus {
                let jump =
                    (v.value_at_barycenter(side.minus) - v.value_at_barycenter(plus)).abs();
                max_jump = max_jump.max(jump);
            }
        }
        let averages: Vec<f64> = (0..mesh.n_elements())
            .map(|t| v.value_at_barycenter(t))
            .collect();
        if has_dirichlet {
            // elements adjacent to the Dirichlet boundary force the constant
            // to vanish
            max_avg = max_avg.max(averages.iter().fold(0.0f64, |m, &a| m.max(a.abs())));
        } else {
            let mean = averages.iter().sum::<f64>() / averages.len() as f64;
            max_avg = max_avg.max(
                averages
                    .iter()
                    .fold(0.0f64, |m, &a| m.max((a - mean).abs())),
            );
        }
    }

    let subspace_check = crate::ortho::verify_identity_a(mesh, tol);
    let agrees = subspace_check.pass && subspace_check.lhs_dim == lhs.dim();
    let pass = max_jump <= tol && max_avg <= tol && agrees;
    Ok(PoincareIdentityReport {
        complement_dim: lhs.dim(),
        max_midpoint_jump: max_jump,
        max_kernel_average: max_avg,
        agrees_with_subspace_route: agrees,
        pass,
    })
}

/// The subspace spanned by the cycle fields of a dual-graph cycle basis,
/// augmented in dimension two by the rotated nodal fields, inside the RT
/// coefficient space.
pub fn divfree_span(space: &RtSpace) -> SubspaceBasis {
    let mesh = &space.mesh;
    let mut columns: Vec<DVector<f64>> = Vec::new();
    for chain in cycle_basis(mesh) {
        let field = cycle_field(space, &chain).expect("cycle basis chains are valid");
        columns.push(field.coeffs);
    }
    if mesh.dim == 2 {
        for field in rotated_hats(space) {
            columns.push(field.coeffs);
        }
    }
    let n = space.n_dofs();
    let mut span = nalgebra::DMatrix::zeros(n, columns.len());
    for (j, c) in columns.iter().enumerate() {
        span.set_column(j, c);
    }
    let weight = div_matrix(space).domain.weight;
    crate::subspace::orthonormalize(n, &weight, &span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, BoundaryConfig, Diagonal, MeshKind};
    use crate::operators::rt_divergence;
    use crate::subspace::{compare, Containment};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arc(kind: MeshKind, bc: BoundaryConfig) -> Arc<Triangulation> {
        Arc::new(generate(kind, bc).unwrap())
    }

    #[test]
    fn bary3_cycle_field_divergence_free() {
        let mesh = arc(MeshKind::Bary3, BoundaryConfig::AllDirichlet);
        let rt = RtSpace::new(mesh.clone());
        let chains = cycle_basis(&mesh);
        assert_eq!(chains.len(), 1);
        let field = cycle_field(&rt, &chains[0]).unwrap();
        assert!(field.coeffs.amax() > 0.0);
        let div = rt_divergence(&field);
        assert!(div.values.amax() < 1e-12);
    }

    #[test]
    fn empty_chain_gives_zero_field() {
        let mesh = arc(MeshKind::Bary3, BoundaryConfig::AllDirichlet);
        let rt = RtSpace::new(mesh.clone());
        let field = cycle_field(&rt, &ElementChain::empty()).unwrap();
        assert_eq!(field.coeffs.amax(), 0.0);
    }

    #[test]
    fn invalid_chain_rejected() {
        let mesh = arc(MeshKind::Bary3, BoundaryConfig::AllDirichlet);
        let rt = RtSpace::new(mesh.clone());
        let bogus = ElementChain {
            elements: vec![0, 1],
            sides: vec![0, 0, 0],
        };
        assert!(matches!(
            cycle_field(&rt, &bogus),
            Err(PoincareError::InvalidChain(_))
        ));
    }

    #[test]
    fn crisscross_cycles_divergence_free() {
        let mesh = arc(
            MeshKind::SquareDiag {
                n: 2,
                diagonal: Diagonal::Crisscross,
            },
            BoundaryConfig::AllNeumann,
        );
        let rt = RtSpace::new(mesh.clone());
        for chain in cycle_basis(&mesh) {
            let field = cycle_field(&rt, &chain).unwrap();
            let div = rt_divergence(&field);
            assert!(div.values.amax() < 1e-12);
        }
    }

    #[test]
    fn chain_pairing_identity() {
        // integral of w . y over a chain element equals w . (x_{S_j} - x_{S_{j-1}})
        let mesh = arc(MeshKind::Bary3, BoundaryConfig::AllDirichlet);
        let rt = RtSpace::new(mesh.clone());
        let chains = cycle_basis(&mesh);
        let chain = &chains[0];
        let field = cycle_field(&rt, chain).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = PwConst::from_fn(mesh.clone(), 2, |_| {
            vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
        });
        for j in 0..chain.len() {
            let t = chain.elements[j];
            let (a, _) = field.element_data(t);
            let integral = mesh.elements[t].volume * vdot(w.value(t), &a);
            let expected = vdot(
                w.value(t),
                &vsub(
                    &mesh.sides[chain.sides[j + 1]].midpoint,
                    &mesh.sides[chain.sides[j]].midpoint,
                ),
            );
            assert!((integral - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruct_round_trip_connected_dirichlet() {
        let mesh = arc(
            MeshKind::SquareDiag {
                n: 2,
                diagonal: Diagonal::Right,
            },
            BoundaryConfig::BottomDirichlet,
        );
        let cr = CrSpace::new(mesh.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let coeffs = DVector::from_fn(cr.n_dofs(), |_, _| rng.gen_range(-1.0..1.0));
            let v0 = CrFunction::from_coeffs(&cr, coeffs);
            let w = cr_gradient(&v0);
            let v = reconstruct(&cr, &w).unwrap();
            let err = (&v.coeffs - &v0.coeffs).amax();
            assert!(err < 1e-10, "round trip error {err}");
        }
    }

    #[test]
    fn reconstruct_round_trip_no_dirichlet() {
        let mesh = arc(
            MeshKind::SquareDiag {
                n: 2,
                diagonal: Diagonal::Left,
            },
            BoundaryConfig::AllNeumann,
        );
        let cr = CrSpace::new(mesh.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let coeffs = DVector::from_fn(cr.n_dofs(), |_, _| rng.gen_range(-1.0..1.0));
        let mut v0 = CrFunction::from_coeffs(&cr, coeffs);
        // normalize the gauge: zero value at the root side used by the tree
        let offset = v0.coeffs[cr.dof_of_side(0).unwrap()];
        v0.coeffs.add_scalar_mut(-offset);
        let w = cr_gradient(&v0);
        let v = reconstruct(&cr, &w).unwrap();
        assert!((&v.coeffs - &v0.coeffs).amax() < 1e-10);
    }

    #[test]
    fn reconstruct_zero() {
        let mesh = arc(MeshKind::Bary3, BoundaryConfig::AllDirichlet);
        let cr = CrSpace::new(mesh.clone());
        let v = reconstruct(&cr, &PwConst::zeros(mesh.clone(), 2)).unwrap();
        assert_eq!(v.coeffs.amax(), 0.0);
    }

    #[test]
    fn disconnected_dirichlet_unsupported() {
        let mesh = arc(
            MeshKind::SquareDiag {
                n: 2,
                diagonal: Diagonal::Right,
            },
            BoundaryConfig::TopBottomDirichlet,
        );
        let cr = CrSpace::new(mesh.clone());
        let w = PwConst::zeros(mesh.clone(), 2);
        assert!(matches!(
            reconstruct(&cr, &w),
            Err(PoincareError::UnsupportedBoundary(_))
        ));
        // dimension three with Dirichlet sides is outside the hypotheses
        let mesh = arc(MeshKind::Cube6, BoundaryConfig::BottomDirichlet);
        let cr = CrSpace::new(mesh.clone());
        let w = PwConst::zeros(mesh.clone(), 3);
        assert!(matches!(
            reconstruct(&cr, &w),
            Err(PoincareError::UnsupportedBoundary(_))
        ));
    }

    #[test]
    fn reconstruct_rejects_nonorthogonal_fields() {
        let mesh = arc(
            MeshKind::SquareDiag {
                n: 2,
                diagonal: Diagonal::Crisscross,
            },
            BoundaryConfig::AllNeumann,
        );
        let cr = CrSpace::new(mesh.clone());
        let rt = RtSpace::new(mesh.clone());
        // a cycle field itself is divergence-free, so its averages are not
        // orthogonal to the divergence-free fields
        let chains = cycle_basis(&mesh);
        let field = cycle_field(&rt, &chains[0]).unwrap();
        let w = crate::ortho::project_rt_field(&field);
        assert!(w.norm() > 1e-12);
        assert!(matches!(
            reconstruct(&cr, &w),
            Err(PoincareError::PreconditionViolated { .. })
        ));
    }

    #[test]
    fn two_coloring_function_on_crisscross() {
        // midpoint values +2 on grid sides and -1 on diagonals average to
        // zero on every element
        let mesh = arc(
            MeshKind::SquareDiag {
                n: 2,
                diagonal: Diagonal::Crisscross,
            },
            BoundaryConfig::AllNeumann,
        );
        let cr = CrSpace::new(mesh.clone());
        let mut coeffs = DVector::zeros(cr.n_dofs());
        for (j, &s) in cr.dofs.iter().enumerate() {
            let n = &mesh.sides[s].normal;
            let axis_aligned = n[0].abs() < 1e-12 || n[1].abs() < 1e-12;
            coeffs[j] = if axis_aligned { 2.0 } else { -1.0 };
        }
        let v = CrFunction::from_coeffs(&cr, coeffs);
        for t in 0..mesh.n_elements() {
            assert!(v.value_at_barycenter(t).abs() < 1e-13);
        }
        // its gradient is reproduced by path integration and certified as a
        // kernel gradient
        let w = cr_gradient(&v);
        assert!(w.norm() > 0.1);
        let back = reconstruct(&cr, &w).unwrap();
        let grad_back = cr_gradient(&back);
        for t in 0..mesh.n_elements() {
            for i in 0..2 {
                assert!((grad_back.value(t)[i] - w.value(t)[i]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn poincare_identity_agreement() {
        let configs = [
            (MeshKind::SingleSimplex, BoundaryConfig::AllDirichlet),
            (MeshKind::Bary3, BoundaryConfig::AllDirichlet),
            (
                MeshKind::SquareDiag {
                    n: 1,
                    diagonal: Diagonal::Right,
                },
                BoundaryConfig::AllDirichlet,
            ),
            (
                MeshKind::SquareDiag {
                    n: 2,
                    diagonal: Diagonal::Crisscross,
                },
                BoundaryConfig::AllNeumann,
            ),
            (
                MeshKind::SquareDiag {
                    n: 2,
                    diagonal: Diagonal::Right,
                },
                BoundaryConfig::BottomDirichlet,
            ),
            (MeshKind::Cube6, BoundaryConfig::AllNeumann),
        ];
        for (kind, bc) in configs {
            let mesh = arc(kind, bc);
            let report = derive_identity_a_via_poincare(&mesh, DEFAULT_TOL).unwrap();
            assert!(report.pass, "{kind:?} {bc:?}: {report:?}");
        }
    }

    #[test]
    fn cycle_span_matches_divergence_nullspace() {
        let configs = [
            (
                MeshKind::SquareDiag {
                    n: 2,
                    diagonal: Diagonal::Right,
                },
                BoundaryConfig::AllNeumann,
            ),
            (
                MeshKind::SquareDiag {
                    n: 2,
                    diagonal: Diagonal::Crisscross,
                },
                BoundaryConfig::AllNeumann,
            ),
            (
                MeshKind::SquareDiag {
                    n: 2,
                    diagonal: Diagonal::Right,
                },
                BoundaryConfig::BottomDirichlet,
            ),
            (MeshKind::Bary3, BoundaryConfig::AllDirichlet),
            (MeshKind::Cube6, BoundaryConfig::AllNeumann),
        ];
        for (kind, bc) in configs {
            let mesh = arc(kind, bc);
            let rt = RtSpace::new(mesh.clone());
            let span = divfree_span(&rt);
            let kernel = nullspace(&div_matrix(&rt));
            let rel = compare(&span, &kernel, 1e-9);
            assert_eq!(
                rel.containment,
                Containment::Equal,
                "{kind:?} {bc:?}: span {} vs kernel {}",
                span.dim(),
                kernel.dim()
            );
        }
    }
}
