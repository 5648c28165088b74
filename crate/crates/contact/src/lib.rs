//! Quasistatic viscoelastic-viscoplastic frictional contact with damped normal
//! response, a unilateral velocity bound and a memory term, discretized by P1
//! triangles and posed as a history-dependent inequality in the velocity.

pub mod data;
pub mod export;
pub mod history;
pub mod material;
pub mod mesh;
pub mod model;
pub mod post;
pub mod sigma;

pub use data::{ContactData, DofVariant, MemoryKernel};
pub use material::Material;
pub use mesh::{build_mesh, BoundaryTag, Mesh, Tagging};
pub use model::{assemble_problem, Assembly, ContactProblem};
pub use post::{build_solution, contact_residuals, ContactSolution};
