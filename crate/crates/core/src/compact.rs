//! Linear maps `M: V -> X` and their operator norms in Gram-induced norms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VhiError};
use crate::linalg;
use crate::space::InnerProductSpace;

#[derive(Clone, Debug)]
pub struct CompactMap {
    matrix: DMatrix<f64>,
}

impl CompactMap {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    /// `M^T xi`, the adjoint acting on dual coefficient vectors.
    pub fn adjoint(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(xi)
    }
}

#[derive(Clone, Debug)]
pub struct OperatorNorm {
    pub value: f64,
    /// Unit vector in `V` attaining the norm.
    pub maximizer: DVector<f64>,
}

const POWER_ITERATIONS: usize = 10_000;

/// `||M||_{L(V, X)}`, the largest generalized singular value.
pub fn operator_norm(
    m: &CompactMap,
    space_v: &InnerProductSpace,
    space_x: &InnerProductSpace,
) -> Result<OperatorNorm> {
    let mat = m.matrix();
    if mat.ncols() != space_v.dim() || mat.nrows() != space_x.dim() {
        return Err(VhiError::Dimension(format!(
            "map is {}x{}, spaces are V={} X={}",
            mat.nrows(),
            mat.ncols(),
            space_v.dim(),
            space_x.dim()
        )));
    }
    // ||M v||_X^2 = v^T (M^T G_X M) v
    let h = mat.transpose() * space_x.gram() * mat;
    let h = (&h + h.transpose()) * 0.5;
    if h.amax() == 0.0 {
        let mut e = DVector::zeros(space_v.dim());
        e[0] = 1.0;
        let n = space_v.norm(&e);
        return Ok(OperatorNorm { value: 0.0, maximizer: e / n });
    }
    power_iteration(&h, space_v).or_else(|_| dense(&h, space_v))
}

fn power_iteration(h: &DMatrix<f64>, space: &InnerProductSpace) -> Result<OperatorNorm> {
    let n = space.dim();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sqrt());
    v /= space.norm(&v);
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = space.cholesky().solve(&(h * &v));
        let nw = space.norm(&w);
        if !(nw > 0.0) || !nw.is_finite() {
            return Err(VhiError::OperatorNorm("power iteration collapsed".into()));
        }
        let next = w / nw;
        let rayleigh = next.dot(&(h * &next));
        let converged = (rayleigh - lambda).abs() <= 1e-15 * rayleigh
            && space.distance(&next, &v) <= 1e-9;
        lambda = rayleigh;
        v = next;
        if converged {
            return Ok(OperatorNorm { value: lambda.max(0.0).sqrt(), maximizer: v });
        }
    }
    Err(VhiError::OperatorNorm("power iteration did not converge".into()))
}

fn dense(h: &DMatrix<f64>, space: &InnerProductSpace) -> Result<OperatorNorm> {
    let (vals, vecs) = linalg::generalized_symmetric_eigen(h, space);
    let k = vals.imax();
    let v = vecs.column(k).into_owned();
    let nv = space.norm(&v);
    if !vals[k].is_finite() || !(nv > 0.0) {
        return Err(VhiError::OperatorNorm("dense eigensolve failed".into()));
    }
    Ok(OperatorNorm { value: vals[k].max(0.0).sqrt(), maximizer: v / nv })
}
