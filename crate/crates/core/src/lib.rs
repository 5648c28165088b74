//! Variational-hemivariational inequalities with history-dependent operators
//! on finite-dimensional Hilbert spaces.
//!
//! The crate provides the building blocks (spaces, constraint sets, monotone
//! operators, bifunctions, locally Lipschitz functionals, history operators),
//! the smallness gate, a static solver with a lattice oracle, and a time
//! stepper with marching and global fixed-point modes.

pub mod bifunction;
pub mod compact;
pub mod constraint;
pub mod error;
pub mod functional;
pub mod history;
pub mod instances;
pub mod linalg;
pub mod operator;
pub mod problem;
pub mod qp;
pub mod smallness;
pub mod space;
pub mod static_solver;
pub mod stepper;

pub use error::{Result, VhiError};
pub use problem::{Components, ComponentsBuilder, StaticInstance, VhiProblem};
pub use space::{InnerProductSpace, TimeGrid, Trajectory};
