//! Table-driven linear instances and the scalar memory model.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bifunction::LinearCoupling;
use crate::compact::CompactMap;
use crate::constraint::ConstraintSet;
use crate::error::{Result, VhiError};
use crate::functional::{ConcaveQuadratic, NonsmoothFunctional, NormSum, SplitFunctional, ZeroFunctional};
use crate::history::{HistoryOperator, Kernel, Quadrature};
use crate::operator::AffineOperator;
use crate::problem::{Components, ComponentsBuilder, VhiProblem};
use crate::space::{InnerProductSpace, TimeGrid, Trajectory};

/// `k(t, s, u) = scale * exp(-decay (t - s)) * G u`, so that `L_S = scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySpec {
    pub scale: f64,
    #[serde(default)]
    pub decay: f64,
}

/// `f(t) = constant + slope * t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub constant: Vec<f64>,
    #[serde(default)]
    pub slope: Option<Vec<f64>>,
}

/// Linear instance: `A u = L u`, `phi(z, u, v) = <kappa z + B u, v>`,
/// `J(x) = friction ||x|| - (concave/2) ||x||_X^2`, box or whole-space `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearInstanceSpec {
    #[serde(default)]
    pub gram: Option<Vec<Vec<f64>>>,
    pub operator: Vec<Vec<f64>>,
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub coupling: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub friction: f64,
    #[serde(default)]
    pub concave: f64,
    #[serde(default)]
    pub compact: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub gram_x: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub history: Option<HistorySpec>,
    pub load: LoadSpec,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(VhiError::Dimension(format!("{what} must be a non-empty rectangular table")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl LinearInstanceSpec {
    pub fn dim(&self) -> usize {
        self.operator.len()
    }

    pub fn components(&self) -> Result<Components> {
        let l = matrix(&self.operator, "operator")?;
        let n = l.nrows();
        let space = match &self.gram {
            Some(g) => InnerProductSpace::new(matrix(g, "gram")?)?,
            None => InnerProductSpace::euclidean(n),
        };
        let m = match &self.compact {
            Some(m) => matrix(m, "compact")?,
            None => DMatrix::identity(n, n),
        };
        let space_x = match &self.gram_x {
            Some(g) => InnerProductSpace::new(matrix(g, "gram_x")?)?,
            None => InnerProductSpace::euclidean(m.nrows()),
        };
        let constraint = match (&self.lower, &self.upper) {
            (None, None) => ConstraintSet::whole_space(n),
            (lo, hi) => {
                let lo = lo.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; n]);
                let hi = hi.clone().unwrap_or_else(|| vec![f64::INFINITY; n]);
                ConstraintSet::boxed(DVector::from_vec(lo), DVector::from_vec(hi))?
            }
        };
        let b = match &self.coupling {
            Some(b) => matrix(b, "coupling")?,
            None => DMatrix::zeros(n, n),
        };
        let bifunction = LinearCoupling::new(self.kappa, b, &space)?;
        let dx = m.nrows();
        if self.friction < 0.0 || self.concave < 0.0 {
            return Err(VhiError::Invalid("friction and concave moduli must be non-negative".into()));
        }
        let functional: Arc<dyn NonsmoothFunctional> = match (self.friction > 0.0, self.concave > 0.0) {
            (false, false) => Arc::new(ZeroFunctional::new(dx)),
            (true, false) => Arc::new(NormSum::euclidean(dx, self.friction)),
            (false, true) => Arc::new(ConcaveQuadratic::new(self.concave, space_x.gram().clone())),
            (true, true) => Arc::new(SplitFunctional::new(
                NormSum::euclidean(dx, self.friction),
                ConcaveQuadratic::new(self.concave, space_x.gram().clone()),
            )?),
        };
        let operator = AffineOperator::new(l, &space)?;
        ComponentsBuilder {
            space,
            space_x,
            constraint,
            operator: Arc::new(operator),
            bifunction: Arc::new(bifunction),
            functional,
            compact: CompactMap::new(m),
        }
        .build()
    }

    pub fn problem(&self, grid: TimeGrid) -> Result<VhiProblem> {
        let components = self.components()?;
        let n = components.dim();
        let history = match &self.history {
            None => HistoryOperator::zero(n),
            Some(h) => {
                let gram = components.space.gram().clone();
                let (scale, decay) = (h.scale, h.decay);
                if !(scale >= 0.0) || !(decay >= 0.0) {
                    return Err(VhiError::Invalid("history scale and decay must be non-negative".into()));
                }
                let kernel: Kernel = Arc::new(move |t, s, u| &gram * u * (scale * (-decay * (t - s)).exp()));
                HistoryOperator::volterra(n, kernel, scale)
            }
        };
        let c0 = DVector::from_vec(self.load.constant.clone());
        let slope = DVector::from_vec(self.load.slope.clone().unwrap_or_else(|| vec![0.0; n]));
        if c0.len() != n || slope.len() != n {
            return Err(VhiError::Dimension("load tables".into()));
        }
        let load = Trajectory::from_fn(grid, |t| &c0 + &slope * t);
        VhiProblem::new(Arc::new(components), history.with_rule(Quadrature::Trapezoid), load)
    }
}

/// `w(t) + int_0^t w(s) ds = t`, written with `phi(eta, u, v) = eta v / 2` and
/// `S w = 2 int_0^t w` so that the history weight stays below `m_A = 1`.
pub fn ode_memory_spec() -> LinearInstanceSpec {
    LinearInstanceSpec {
        gram: None,
        operator: vec![vec![1.0]],
        lower: None,
        upper: None,
        kappa: 0.5,
        coupling: None,
        friction: 0.0,
        concave: 0.0,
        compact: None,
        gram_x: None,
        history: Some(HistorySpec { scale: 2.0, decay: 0.0 }),
        load: LoadSpec { constant: vec![0.0], slope: Some(vec![1.0]) },
    }
}

pub fn ode_memory_problem(horizon: f64, steps: usize) -> Result<VhiProblem> {
    ode_memory_spec().problem(TimeGrid::new(horizon, steps)?)
}

pub fn ode_memory_exact(t: f64) -> f64 {
    1.0 - (-t).exp()
}
