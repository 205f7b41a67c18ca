//! Lowest-order Crouzeix-Raviart and Raviart-Thomas finite elements on
//! simplicial meshes in two and three dimensions.

mod linalg;

pub mod duality;
pub mod mesh;
pub mod operators;
pub mod ortho;
pub mod poincare;
pub mod spaces;
pub mod subspace;
