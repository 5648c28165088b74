//! Locally Lipschitz functionals `J(t, .): X -> R` with Clarke generalized
//! directional derivatives and subgradient selections.
//!
//! Solvers split `J = J_c + J_s` where `J_c = sum_b w_b ||T_b x||` is convex and
//! positively homogeneous (handled implicitly through its dual ball
//! representation) and `J_s` is the remainder, whose subgradient is frozen
//! during outer iterations. Every built-in here is regular in the sense of
//! Clarke; user functionals are trusted to be.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, VhiError};
use crate::qp::{BlockQp, DualSet, NormTerm};

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct FunctionalConstants {
    /// Growth `||dJ(t, x)|| <= c0 + c1 ||x||`.
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    /// Relaxed monotonicity constant.
    pub m_j: Option<f64>,
}

pub trait NonsmoothFunctional: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, t: f64, x: &DVector<f64>) -> f64;

    /// Generalized directional derivative `J^0(t, x; d)`.
    fn dir_deriv(&self, t: f64, x: &DVector<f64>, d: &DVector<f64>) -> f64;

    /// Minimal-norm element of the Clarke subdifferential.
    fn subgradient(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;

    fn constants(&self) -> FunctionalConstants;

    /// Convex positively homogeneous part `J_c`.
    fn norm_terms(&self) -> &[NormTerm] {
        &[]
    }

    /// Subgradient of `J - J_c`, frozen by the outer iteration.
    fn explicit_subgradient(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.subgradient(t, x)
    }
}

/// `J^0(t, x; d)` with a finiteness check on the oracle output.
pub fn clarke_dd(
    j: &dyn NonsmoothFunctional,
    t: f64,
    x: &DVector<f64>,
    d: &DVector<f64>,
) -> Result<f64> {
    let v = j.dir_deriv(t, x, d);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(VhiError::NonFinite("generalized directional derivative"))
    }
}

pub fn select_subgrad(j: &dyn NonsmoothFunctional, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    let g = j.subgradient(t, x);
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(VhiError::NonFinite("subgradient selection"))
    }
}

#[derive(Clone, Debug)]
pub struct ZeroFunctional {
    dim: usize,
}

impl ZeroFunctional {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl NonsmoothFunctional for ZeroFunctional {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: f64, _: &DVector<f64>) -> f64 {
        0.0
    }
    fn dir_deriv(&self, _: f64, _: &DVector<f64>, _: &DVector<f64>) -> f64 {
        0.0
    }
    fn subgradient(&self, _: f64, _: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn constants(&self) -> FunctionalConstants {
        FunctionalConstants { c0: Some(0.0), c1: Some(0.0), m_j: Some(0.0) }
    }
    fn explicit_subgradient(&self, _: f64, _: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
}

/// `J(x) = sum_b w_b ||T_b x||_2`. With a single identity block this is the
/// friction potential `j(xi) = ||xi||`.
#[derive(Clone, Debug)]
pub struct NormSum {
    dim: usize,
    terms: Vec<NormTerm>,
}

impl NormSum {
    pub fn new(dim: usize, terms: Vec<NormTerm>) -> Result<Self> {
        for t in &terms {
            if t.map.ncols() != dim || t.map.nrows() == 0 {
                return Err(VhiError::Dimension("norm term map".into()));
            }
            if !(t.weight >= 0.0) {
                return Err(VhiError::Invalid("norm weights must be non-negative".into()));
            }
        }
        Ok(Self { dim, terms })
    }

    /// `j(xi) = weight * ||xi||` on `R^dim`.
    pub fn euclidean(dim: usize, weight: f64) -> Self {
        Self {
            dim,
            terms: vec![NormTerm { weight, map: DMatrix::identity(dim, dim) }],
        }
    }

    pub fn terms(&self) -> &[NormTerm] {
        &self.terms
    }

    /// Minimal-norm element of `shift + dJ(x)`.
    fn min_norm_element(&self, x: &DVector<f64>, shift: DVector<f64>) -> DVector<f64> {
        let mut base = shift;
        let mut free = Vec::new();
        for term in &self.terms {
            let tx = &term.map * x;
            let n = tx.norm();
            if n > 0.0 {
                base += term.map.transpose() * (tx * (term.weight / n));
            } else if term.weight > 0.0 {
                free.push(term);
            }
        }
        if free.is_empty() {
            return base;
        }
        // min || base + sum_b w_b T_b^T y_b ||  over  ||y_b|| <= 1
        let cols: usize = free.iter().map(|t| t.map.nrows()).sum();
        let mut d = DMatrix::zeros(self.dim, cols);
        let mut sets = Vec::with_capacity(free.len());
        let mut c = 0;
        for t in &free {
            let k = t.map.nrows();
            d.view_mut((0, c), (self.dim, k)).copy_from(&(t.map.transpose() * t.weight));
            sets.push((k, DualSet::Ball { weight: 1.0 }));
            c += k;
        }
        let q = d.transpose() * &d;
        let rhs = -(d.transpose() * &base);
        let scale = 1.0 + base.amax() + q.amax();
        let qp = BlockQp::new(q, sets).expect("consistent blocks");
        match qp.solve(&rhs, 1.0, None, 1e-15 * scale, 100_000) {
            Ok(sol) => base + d * sol.mu,
            Err(_) => base,
        }
    }
}

impl NonsmoothFunctional for NormSum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _: f64, x: &DVector<f64>) -> f64 {
        self.terms.iter().map(|t| t.weight * (&t.map * x).norm()).sum()
    }

    fn dir_deriv(&self, _: f64, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let tx = &t.map * x;
                let td = &t.map * d;
                let n = tx.norm();
                t.weight * if n > 0.0 { tx.dot(&td) / n } else { td.norm() }
            })
            .sum()
    }

    fn subgradient(&self, _: f64, x: &DVector<f64>) -> DVector<f64> {
        self.min_norm_element(x, DVector::zeros(self.dim))
    }

    fn constants(&self) -> FunctionalConstants {
        let c0 = self
            .terms
            .iter()
            .map(|t| t.weight * t.map.clone().svd(false, false).singular_values.max())
            .sum();
        FunctionalConstants { c0: Some(c0), c1: Some(0.0), m_j: Some(0.0) }
    }

    fn norm_terms(&self) -> &[NormTerm] {
        &self.terms
    }

    fn explicit_subgradient(&self, _: f64, _: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
}

/// `J(x) = -(m/2) x^T G_X x`: smooth, with relaxed monotonicity constant
/// exactly `m` in the norm induced by `G_X`.
#[derive(Clone, Debug)]
pub struct ConcaveQuadratic {
    modulus: f64,
    gram: DMatrix<f64>,
}

impl ConcaveQuadratic {
    pub fn new(modulus: f64, gram: DMatrix<f64>) -> Self {
        Self { modulus, gram }
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }
}

impl NonsmoothFunctional for ConcaveQuadratic {
    fn dim(&self) -> usize {
        self.gram.nrows()
    }

    fn value(&self, _: f64, x: &DVector<f64>) -> f64 {
        -0.5 * self.modulus * x.dot(&(&self.gram * x))
    }

    fn dir_deriv(&self, t: f64, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        self.subgradient(t, x).dot(d)
    }

    fn subgradient(&self, _: f64, x: &DVector<f64>) -> DVector<f64> {
        &self.gram * x * (-self.modulus)
    }

    fn constants(&self) -> FunctionalConstants {
        FunctionalConstants { c0: Some(0.0), c1: Some(self.modulus), m_j: Some(self.modulus) }
    }
}

/// `J = J_c + J_s` with a convex norm part and a concave quadratic part.
#[derive(Clone, Debug)]
pub struct SplitFunctional {
    convex: NormSum,
    smooth: ConcaveQuadratic,
}

impl SplitFunctional {
    pub fn new(convex: NormSum, smooth: ConcaveQuadratic) -> Result<Self> {
        if convex.dim() != smooth.dim() {
            return Err(VhiError::Dimension("split functional parts".into()));
        }
        Ok(Self { convex, smooth })
    }
}

impl NonsmoothFunctional for SplitFunctional {
    fn dim(&self) -> usize {
        self.convex.dim()
    }

    fn value(&self, t: f64, x: &DVector<f64>) -> f64 {
        self.convex.value(t, x) + self.smooth.value(t, x)
    }

    // The smooth part is C^1, so the generalized derivatives add.
    fn dir_deriv(&self, t: f64, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        self.convex.dir_deriv(t, x, d) + self.smooth.dir_deriv(t, x, d)
    }

    fn subgradient(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.convex.min_norm_element(x, self.smooth.subgradient(t, x))
    }

    fn constants(&self) -> FunctionalConstants {
        let a = self.convex.constants();
        let b = self.smooth.constants();
        FunctionalConstants {
            c0: Some(a.c0.unwrap_or(0.0) + b.c0.unwrap_or(0.0)),
            c1: Some(a.c1.unwrap_or(0.0) + b.c1.unwrap_or(0.0)),
            m_j: b.m_j,
        }
    }

    fn norm_terms(&self) -> &[NormTerm] {
        self.convex.terms()
    }

    fn explicit_subgradient(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.smooth.subgradient(t, x)
    }
}

pub type ScalarFn = Arc<dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync>;
pub type DirDerivFn = Arc<dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Oracle-backed functional; the whole of `J` is treated explicitly.
#[derive(Clone)]
pub struct FnFunctional {
    pub dim: usize,
    pub value: ScalarFn,
    pub dir_deriv: DirDerivFn,
    pub subgradient: VectorFn,
    pub constants: FunctionalConstants,
}

impl NonsmoothFunctional for FnFunctional {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, t: f64, x: &DVector<f64>) -> f64 {
        (self.value)(t, x)
    }
    fn dir_deriv(&self, t: f64, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        (self.dir_deriv)(t, x, d)
    }
    fn subgradient(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.subgradient)(t, x)
    }
    fn constants(&self) -> FunctionalConstants {
        self.constants
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn friction_norm_at_origin_selects_zero_and_ball_derivative() {
        let j = NormSum::euclidean(2, 1.0);
        let zero = v(&[0.0, 0.0]);
        assert_eq!(select_subgrad(&j, 0.0, &zero).unwrap(), zero);
        assert!((clarke_dd(&j, 0.0, &zero, &v(&[3.0, 4.0])).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(clarke_dd(&j, 0.0, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn nan_oracle_is_reported() {
        let j = FnFunctional {
            dim: 1,
            value: Arc::new(|_, _| 0.0),
            dir_deriv: Arc::new(|_, _, _| f64::NAN),
            subgradient: Arc::new(|_, _| DVector::from_element(1, f64::NAN)),
            constants: FunctionalConstants::default(),
        };
        assert!(matches!(clarke_dd(&j, 0.0, &v(&[0.0]), &v(&[1.0])), Err(VhiError::NonFinite(_))));
        assert!(select_subgrad(&j, 0.0, &v(&[0.0])).is_err());
    }

    #[test]
    fn split_min_norm_cancels_smooth_gradient_inside_ball() {
        // At x = 0 the smooth gradient is zero, so the selection is zero.
        let j = SplitFunctional::new(
            NormSum::euclidean(2, 1.0),
            ConcaveQuadratic::new(0.5, DMatrix::identity(2, 2)),
        )
        .unwrap();
        assert!(j.subgradient(0.0, &v(&[0.0, 0.0])).amax() < 1e-14);
    }

    fn builtins() -> Vec<Box<dyn NonsmoothFunctional>> {
        let gram = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.8]);
        let blocks = NormSum::new(
            2,
            vec![
                NormTerm { weight: 0.7, map: DMatrix::from_row_slice(1, 2, &[1.0, -1.0]) },
                NormTerm { weight: 1.3, map: DMatrix::identity(2, 2) },
            ],
        )
        .unwrap();
        vec![
            Box::new(NormSum::euclidean(2, 1.0)),
            Box::new(blocks.clone()),
            Box::new(ConcaveQuadratic::new(0.4, gram.clone())),
            Box::new(SplitFunctional::new(blocks, ConcaveQuadratic::new(0.4, gram)).unwrap()),
        ]
    }

    fn x_norm_sq(d: &DVector<f64>) -> f64 {
        let gram = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.8]);
        d.dot(&(gram * d))
    }

    proptest! {
        #[test]
        fn clarke_derivative_properties(
            x in prop::collection::vec(-2.0f64..2.0, 2),
            y in prop::collection::vec(-2.0f64..2.0, 2),
            d in prop::collection::vec(-2.0f64..2.0, 2),
            lam in 0.1f64..5.0,
            zero_x in any::<bool>(),
        ) {
            let x = if zero_x { v(&[0.0, 0.0]) } else { v(&x) };
            let y = v(&y);
            let d = v(&d);
            for j in builtins() {
                let dd = j.dir_deriv(0.0, &x, &d);
                // subgradient is minorized by J^0
                let z = j.subgradient(0.0, &x);
                prop_assert!(dd >= z.dot(&d) - 1e-9);
                // positive homogeneity in the direction
                prop_assert!((j.dir_deriv(0.0, &x, &(&d * lam)) - lam * dd).abs() <= 1e-9 * (1.0 + dd.abs() * lam));
                // upper bound on small difference quotients; the curvature of the
                // norm blocks is at most 1/||T x||, so skip near-kink samples
                let kink = x.norm().min((x[0] - x[1]).abs() / 2f64.sqrt());
                if kink == 0.0 || kink >= 1e-3 {
                    for h in [1e-6, 1e-8] {
                        let q = (j.value(0.0, &(&x + &d * h)) - j.value(0.0, &x)) / h;
                        prop_assert!(dd >= q - 5e3 * h * (1.0 + d.norm_squared()));
                    }
                }
                // relaxed monotonicity
                let m = j.constants().m_j.unwrap();
                let lhs = j.dir_deriv(0.0, &x, &(&y - &x)) + j.dir_deriv(0.0, &y, &(&x - &y));
                let bound = if m == 0.0 { 1e-10 } else { m * x_norm_sq(&(&x - &y)) + 1e-10 };
                prop_assert!(lhs <= bound);
            }
        }
    }
}
