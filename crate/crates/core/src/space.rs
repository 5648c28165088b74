//! Finite-dimensional Hilbert spaces, time grids and trajectories.
//!
//! A space is described by its SPD Gram matrix `G`: `<u, v>_V = u^T G v`.
//! Dual elements are plain coefficient vectors paired by `g^T v`, so the
//! Riesz map sends `g` to `G^{-1} g` and `||g||_{V*}^2 = g^T G^{-1} g`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{Result, VhiError};

/// Relative asymmetry tolerated in a Gram matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct InnerProductSpace {
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl InnerProductSpace {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() == 0 || gram.nrows() != gram.ncols() {
            return Err(VhiError::Dimension(format!(
                "gram must be square and non-empty, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let scale = gram.amax();
        if !scale.is_finite() || scale == 0.0 {
            return Err(VhiError::NotSpd("gram is zero or non-finite".into()));
        }
        let asym = (&gram - gram.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(VhiError::NotSpd(format!(
                "relative asymmetry {:.3e} exceeds {SYMMETRY_TOL:e}",
                asym / scale
            )));
        }
        let gram = (&gram + gram.transpose()) * 0.5;
        let chol = Cholesky::new(gram.clone())
            .ok_or_else(|| VhiError::NotSpd("Cholesky factorization failed".into()))?;
        Ok(Self { gram, chol })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.gram * v))
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    pub fn distance(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.norm(&(u - v))
    }

    /// Riesz map `V* -> V`.
    pub fn riesz(&self, g: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(g)
    }

    /// Inverse Riesz map `V -> V*`.
    pub fn to_dual(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.gram * v
    }

    pub fn dual_norm(&self, g: &DVector<f64>) -> f64 {
        g.dot(&self.riesz(g)).max(0.0).sqrt()
    }
}

/// Uniform grid `t_n = n T / N`, `n = 0..=N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(VhiError::Invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(VhiError::Invalid("grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|n| self.node(n))
    }
}

/// Grid-indexed sequence of vectors (in `V` or `V*`).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub values: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(VhiError::Dimension(format!(
                "trajectory has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(VhiError::NonFinite("trajectory"));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: DVector<f64>) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> DVector<f64>) -> Self {
        Self { grid, values: grid.nodes().map(f).collect() }
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// `max_n norm(a_n - b_n)`.
    pub fn sup_distance(&self, other: &Trajectory, norm: impl Fn(&DVector<f64>) -> f64) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| norm(&(a - b)))
            .fold(0.0, f64::max)
    }

    /// Trapezoid approximation of `(int_0^T norm(a - b)^2 dt)^{1/2}`.
    pub fn l2_distance(&self, other: &Trajectory, norm: impl Fn(&DVector<f64>) -> f64) -> f64 {
        let dt = self.grid.dt();
        let last = self.values.len().saturating_sub(1);
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(n, (a, b))| {
                let w = if n == 0 || n == last { 0.5 } else { 1.0 };
                w * norm(&(a - b)).powi(2)
            })
            .sum();
        (sum * dt).sqrt()
    }
}
