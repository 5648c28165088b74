//! Bifunctions `phi(z, u, v)` convex in `v`, with `z` in `V*` carrying history.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VhiError};
use crate::linalg;
use crate::space::InnerProductSpace;

pub trait ConvexBifunction: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, z: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64;

    /// A subgradient in the third slot.
    fn subgradient(&self, z: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// Constant of the four-point estimate
    /// `phi(z1,u1,v2) - phi(z1,u1,v1) + phi(z2,u2,v1) - phi(z2,u2,v2)
    ///   <= alpha (||z1-z2||_* + ||u1-u2||) ||v1-v2||`.
    fn alpha(&self) -> Option<f64>;

    /// `c` such that `phi(z, u, v) = <c, v> + const(z, u)`, if `phi` is affine in `v`.
    fn linear_coefficient(&self, _z: &DVector<f64>, _u: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Lipschitz bound of `v -> subgradient(z, u, v)` for the iterative inner solver.
    fn slot_lipschitz(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct ZeroBifunction {
    dim: usize,
}

impl ZeroBifunction {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ConvexBifunction for ZeroBifunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &DVector<f64>, _: &DVector<f64>, _: &DVector<f64>) -> f64 {
        0.0
    }
    fn subgradient(&self, _: &DVector<f64>, _: &DVector<f64>, _: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn alpha(&self) -> Option<f64> {
        Some(0.0)
    }
    fn linear_coefficient(&self, _: &DVector<f64>, _: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::zeros(self.dim))
    }
}

/// `phi(z, u, v) = <kappa z + B u, v>`.
#[derive(Clone, Debug)]
pub struct LinearCoupling {
    kappa: f64,
    coupling: DMatrix<f64>,
    alpha: f64,
}

impl LinearCoupling {
    pub fn new(kappa: f64, coupling: DMatrix<f64>, space: &InnerProductSpace) -> Result<Self> {
        if coupling.nrows() != space.dim() || coupling.ncols() != space.dim() {
            return Err(VhiError::Dimension("coupling matrix".into()));
        }
        if !(kappa >= 0.0) {
            return Err(VhiError::Invalid("history weight must be non-negative".into()));
        }
        let b_norm = linalg::dual_operator_norm(&coupling, space);
        Ok(Self { kappa, coupling, alpha: kappa.max(b_norm) })
    }

    pub fn history_only(kappa: f64, space: &InnerProductSpace) -> Result<Self> {
        Self::new(kappa, DMatrix::zeros(space.dim(), space.dim()), space)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }
}

impl ConvexBifunction for LinearCoupling {
    fn dim(&self) -> usize {
        self.coupling.nrows()
    }

    fn value(&self, z: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.subgradient(z, u, v).dot(v)
    }

    fn subgradient(&self, z: &DVector<f64>, u: &DVector<f64>, _: &DVector<f64>) -> DVector<f64> {
        z * self.kappa + &self.coupling * u
    }

    fn alpha(&self) -> Option<f64> {
        Some(self.alpha)
    }

    fn linear_coefficient(&self, z: &DVector<f64>, u: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.subgradient(z, u, u))
    }
}

pub type BiValueFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>;
pub type BiGradFn =
    Arc<dyn Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Closure-backed bifunction, assumed differentiable in `v` with a
/// `slot_lipschitz` gradient.
#[derive(Clone)]
pub struct FnBifunction {
    pub dim: usize,
    pub value: BiValueFn,
    pub subgradient: BiGradFn,
    pub alpha: Option<f64>,
    pub slot_lipschitz: f64,
}

impl ConvexBifunction for FnBifunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, z: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (self.value)(z, u, v)
    }
    fn subgradient(&self, z: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (self.subgradient)(z, u, v)
    }
    fn alpha(&self) -> Option<f64> {
        self.alpha
    }
    fn slot_lipschitz(&self) -> f64 {
        self.slot_lipschitz
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space() -> InnerProductSpace {
        InnerProductSpace::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0])).unwrap()
    }

    fn vec2(a: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(a)
    }

    proptest! {
        #[test]
        fn linear_coupling_is_convex_and_satisfies_four_point_estimate(
            z in prop::collection::vec(-3.0f64..3.0, 8),
            u in prop::collection::vec(-3.0f64..3.0, 8),
            kappa in 0.0f64..2.0,
        ) {
            let sp = space();
            let b = DMatrix::from_row_slice(2, 2, &[0.3, -0.1, 0.2, 0.5]);
            let phi = LinearCoupling::new(kappa, b, &sp).unwrap();
            let (z1, z2) = (vec2(&z[0..2]), vec2(&z[2..4]));
            let (u1, u2) = (vec2(&u[0..2]), vec2(&u[2..4]));
            let (v1, v2) = (vec2(&z[4..6]), vec2(&u[4..6]));
            let lhs = phi.value(&z1, &u1, &v2) - phi.value(&z1, &u1, &v1)
                + phi.value(&z2, &u2, &v1) - phi.value(&z2, &u2, &v2);
            let rhs = phi.alpha().unwrap()
                * (sp.dual_norm(&(&z1 - &z2)) + sp.distance(&u1, &u2))
                * sp.distance(&v1, &v2);
            prop_assert!(lhs <= rhs + 1e-10);
            let mid = (&v1 + &v2) * 0.5;
            prop_assert!(phi.value(&z1, &u1, &mid)
                <= 0.5 * (phi.value(&z1, &u1, &v1) + phi.value(&z1, &u1, &v2)) + 1e-10);
        }
    }
}
