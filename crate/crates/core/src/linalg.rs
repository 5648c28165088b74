use nalgebra::{DMatrix, DVector};

use crate::space::InnerProductSpace;

/// Eigenpairs of the pencil `(a, G)` for symmetric `a`, with eigenvectors
/// returned in the original coordinates and `G`-orthonormal.
pub fn generalized_symmetric_eigen(
    a: &DMatrix<f64>,
    space: &InnerProductSpace,
) -> (DVector<f64>, DMatrix<f64>) {
    let l = space.cholesky().l();
    let l_inv = l
        .clone()
        .try_inverse()
        .expect("Cholesky factor of an SPD matrix is invertible");
    let c = &l_inv * a * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let vecs = l_inv.transpose() * eig.eigenvectors;
    (eig.eigenvalues, vecs)
}

/// Smallest `<a v, v> / ||v||_V^2` over `v != 0`, i.e. the strong monotonicity
/// modulus of the linear map `a: V -> V*`.
pub fn monotonicity_modulus(a: &DMatrix<f64>, space: &InnerProductSpace) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    generalized_symmetric_eigen(&sym, space).0.min()
}

/// `||a||_{L(V, V*)}`.
pub fn dual_operator_norm(a: &DMatrix<f64>, space: &InnerProductSpace) -> f64 {
    // ||a v||_{V*}^2 = v^T a^T G^{-1} a v
    let ginv_a = space.cholesky().solve(a);
    let b = a.transpose() * ginv_a;
    let b = (&b + b.transpose()) * 0.5;
    generalized_symmetric_eigen(&b, space).0.max().max(0.0).sqrt()
}

pub fn is_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> bool {
    a.is_square() && (a - a.transpose()).amax() <= rel_tol * a.amax().max(f64::MIN_POSITIVE)
}
