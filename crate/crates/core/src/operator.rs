//! Strongly monotone operators `A(t, .): V -> V*`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, VhiError};
use crate::linalg;
use crate::space::InnerProductSpace;

/// Structural constants of `A`. `beta` and `beta1` describe coercivity and are
/// carried for completeness; no solver reads them.
#[derive(Clone, Debug, Default, Serialize)]
pub struct OperatorConstants {
    pub m_a: Option<f64>,
    pub alpha_a: Option<f64>,
    pub a1: Option<f64>,
    /// Growth offset `a0(t)` sampled at grid nodes (or a single constant).
    pub a0: Vec<f64>,
    pub beta: Option<f64>,
    pub beta1: Vec<f64>,
}

pub trait MonotoneOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, t: f64, u: &DVector<f64>) -> DVector<f64>;

    fn constants(&self) -> &OperatorConstants;

    /// Time-independent matrix `L` when `A(t, u) = L u + A(t, 0)`.
    fn linear_part(&self) -> Option<&DMatrix<f64>> {
        None
    }
}

/// `A(t, u) = L u + b(t)` with `b` a piecewise-constant table over the grid.
#[derive(Clone, Debug)]
pub struct AffineOperator {
    matrix: DMatrix<f64>,
    offsets: Vec<(f64, DVector<f64>)>,
    constants: OperatorConstants,
}

impl AffineOperator {
    /// Constants are computed from the matrix in the norms of `space`.
    pub fn new(matrix: DMatrix<f64>, space: &InnerProductSpace) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(VhiError::Dimension("operator matrix".into()));
        }
        let m_a = linalg::monotonicity_modulus(&matrix, space);
        if m_a <= 0.0 {
            return Err(VhiError::Invalid(format!(
                "operator is not strongly monotone (modulus {m_a:.3e})"
            )));
        }
        let a1 = linalg::dual_operator_norm(&matrix, space);
        let constants = OperatorConstants {
            m_a: Some(m_a),
            alpha_a: Some(m_a),
            a1: Some(a1),
            a0: vec![0.0],
            beta: Some(0.0),
            beta1: vec![0.0],
        };
        Ok(Self { matrix, offsets: Vec::new(), constants })
    }

    /// Replaces the computed moduli by a smaller declared value, e.g. a
    /// material constant that bounds the discrete modulus from below.
    pub fn with_declared_modulus(mut self, modulus: f64) -> Result<Self> {
        let computed = self.constants.m_a.unwrap_or(0.0);
        if !(modulus > 0.0) || modulus > computed * (1.0 + 1e-9) {
            return Err(VhiError::Invalid(format!(
                "declared modulus {modulus:.6e} exceeds the computed modulus {computed:.6e}"
            )));
        }
        self.constants.m_a = Some(modulus);
        self.constants.alpha_a = Some(modulus);
        Ok(self)
    }

    /// Adds a constant offset `b`.
    pub fn with_offset(mut self, offset: DVector<f64>, space: &InnerProductSpace) -> Self {
        let a0 = space.dual_norm(&offset);
        self.constants.a0 = vec![a0];
        self.constants.beta = Some(a0);
        self.offsets = vec![(0.0, offset)];
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn offset(&self, t: f64) -> Option<&DVector<f64>> {
        self.offsets.iter().rev().find(|(s, _)| *s <= t).map(|(_, b)| b)
    }
}

impl MonotoneOperator for AffineOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.matrix * u;
        if let Some(b) = self.offset(t) {
            out += b;
        }
        out
    }

    fn constants(&self) -> &OperatorConstants {
        &self.constants
    }

    fn linear_part(&self) -> Option<&DMatrix<f64>> {
        Some(&self.matrix)
    }
}

pub type OperatorFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Nonlinear operator given by a closure and caller-declared constants.
#[derive(Clone)]
pub struct FnOperator {
    dim: usize,
    f: OperatorFn,
    constants: OperatorConstants,
}

impl FnOperator {
    pub fn new(dim: usize, f: OperatorFn, constants: OperatorConstants) -> Self {
        Self { dim, f, constants }
    }
}

impl MonotoneOperator for FnOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        (self.f)(t, u)
    }

    fn constants(&self) -> &OperatorConstants {
        &self.constants
    }
}
