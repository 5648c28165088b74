//! Causal history operators `(S u)(t) = int_0^t k(t, s, u(s)) ds` and sums thereof.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VhiError};
use crate::space::{TimeGrid, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Uses `u(t_0..t_{n-1})`; strictly causal.
    LeftRectangle,
    /// Uses `u(t_0..t_n)`.
    Trapezoid,
}

impl Quadrature {
    /// Weight of node `m` in the integral over `(0, t_n)`.
    pub fn weight(self, dt: f64, m: usize, n: usize) -> f64 {
        match self {
            Quadrature::LeftRectangle => {
                if m < n {
                    dt
                } else {
                    0.0
                }
            }
            Quadrature::Trapezoid => {
                if n == 0 || m > n {
                    0.0
                } else if m == 0 || m == n {
                    0.5 * dt
                } else {
                    dt
                }
            }
        }
    }

    /// Number of leading trajectory values read at step `n`.
    pub fn reads(self, n: usize) -> usize {
        match self {
            Quadrature::LeftRectangle => n,
            Quadrature::Trapezoid => n + 1,
        }
    }
}

pub type Kernel = Arc<dyn Fn(f64, f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// User-supplied history map. `values` holds at least `rule.reads(n)` entries.
pub trait HistoryMap: Send + Sync {
    fn apply(&self, grid: &TimeGrid, rule: Quadrature, values: &[DVector<f64>], n: usize) -> DVector<f64>;

    fn apply_all(&self, grid: &TimeGrid, rule: Quadrature, values: &[DVector<f64>]) -> Vec<DVector<f64>> {
        (0..grid.len()).map(|n| self.apply(grid, rule, values, n)).collect()
    }
}

#[derive(Clone)]
pub enum HistoryKind {
    Zero,
    Volterra(Kernel),
    Sum(Vec<HistoryOperator>),
    Custom(Arc<dyn HistoryMap>),
}

impl fmt::Debug for HistoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryKind::Zero => f.write_str("Zero"),
            HistoryKind::Volterra(_) => f.write_str("Volterra(..)"),
            HistoryKind::Sum(parts) => f.debug_tuple("Sum").field(parts).finish(),
            HistoryKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HistoryOperator {
    kind: HistoryKind,
    lipschitz: f64,
    rule: Quadrature,
    /// Grid the operator was built for, if it is grid-specific.
    grid: Option<TimeGrid>,
    dim: usize,
}

impl HistoryOperator {
    pub fn zero(dim: usize) -> Self {
        Self { kind: HistoryKind::Zero, lipschitz: 0.0, rule: Quadrature::Trapezoid, grid: None, dim }
    }

    pub fn volterra(dim: usize, kernel: Kernel, lipschitz: f64) -> Self {
        Self {
            kind: HistoryKind::Volterra(kernel),
            lipschitz,
            rule: Quadrature::Trapezoid,
            grid: None,
            dim,
        }
    }

    pub fn custom(dim: usize, map: Arc<dyn HistoryMap>, lipschitz: f64, grid: Option<TimeGrid>) -> Self {
        Self { kind: HistoryKind::Custom(map), lipschitz, rule: Quadrature::Trapezoid, grid, dim }
    }

    pub fn with_rule(mut self, rule: Quadrature) -> Self {
        self.set_rule(rule);
        self
    }

    fn set_rule(&mut self, rule: Quadrature) {
        self.rule = rule;
        if let HistoryKind::Sum(parts) = &mut self.kind {
            for p in parts {
                p.set_rule(rule);
            }
        }
    }

    pub fn kind(&self) -> &HistoryKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn rule(&self) -> Quadrature {
        self.rule
    }

    pub fn grid(&self) -> Option<&TimeGrid> {
        self.grid.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            HistoryKind::Zero => true,
            HistoryKind::Sum(parts) => parts.iter().all(|p| p.is_zero()),
            _ => false,
        }
    }

    /// `(S u)(t_n)` from the leading values of a trajectory, using the stored rule.
    pub fn apply_values(&self, grid: &TimeGrid, values: &[DVector<f64>], n: usize) -> DVector<f64> {
        self.apply_with(grid, self.rule, values, n)
    }

    pub fn apply_with(&self, grid: &TimeGrid, rule: Quadrature, values: &[DVector<f64>], n: usize) -> DVector<f64> {
        match &self.kind {
            HistoryKind::Zero => DVector::zeros(self.dim),
            HistoryKind::Volterra(k) => {
                let t = grid.node(n);
                let dt = grid.dt();
                let mut acc = DVector::zeros(self.dim);
                for (m, u) in values.iter().enumerate().take(rule.reads(n)) {
                    let w = rule.weight(dt, m, n);
                    if w != 0.0 {
                        acc += k(t, grid.node(m), u) * w;
                    }
                }
                acc
            }
            HistoryKind::Sum(parts) => {
                let mut acc = DVector::zeros(self.dim);
                for p in parts {
                    acc += p.apply_with(grid, rule, values, n);
                }
                acc
            }
            HistoryKind::Custom(map) => map.apply(grid, rule, values, n),
        }
    }

    /// `S u` at every node with the stored rule.
    pub fn apply_all(&self, grid: &TimeGrid, values: &[DVector<f64>]) -> Vec<DVector<f64>> {
        match &self.kind {
            HistoryKind::Custom(map) => map.apply_all(grid, self.rule, values),
            HistoryKind::Sum(parts) => {
                let mut acc = vec![DVector::zeros(self.dim); grid.len()];
                for p in parts {
                    for (a, b) in acc.iter_mut().zip(p.apply_all(grid, values)) {
                        *a += b;
                    }
                }
                acc
            }
            _ => (0..grid.len()).map(|n| self.apply_values(grid, values, n)).collect(),
        }
    }
}

/// `S1 + S2` with `L_S = L_S1 + L_S2`.
pub fn history_sum(s1: HistoryOperator, s2: HistoryOperator) -> Result<HistoryOperator> {
    if s1.dim != s2.dim {
        return Err(VhiError::Dimension("history operators act on different spaces".into()));
    }
    let grid = match (s1.grid, s2.grid) {
        (Some(a), Some(b)) if a != b => return Err(VhiError::GridMismatch),
        (a, b) => a.or(b),
    };
    let rule = s1.rule;
    let lipschitz = s1.lipschitz + s2.lipschitz;
    let dim = s1.dim;
    let mut parts = Vec::new();
    for s in [s1, s2] {
        match s.kind {
            HistoryKind::Sum(inner) => parts.extend(inner),
            _ => parts.push(s),
        }
    }
    Ok(HistoryOperator { kind: HistoryKind::Sum(parts), lipschitz, rule, grid, dim }.with_rule(rule))
}

/// `(S u)(t_n)` for a full trajectory using the operator's stored rule.
pub fn volterra_apply(s: &HistoryOperator, u: &Trajectory, n: usize) -> DVector<f64> {
    s.apply_values(&u.grid, &u.values, n)
}
