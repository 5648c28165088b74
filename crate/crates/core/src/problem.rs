//! Problem bundles: the time-dependent inequality and its frozen static instances.

use std::sync::Arc;

use nalgebra::DVector;

use crate::bifunction::ConvexBifunction;
use crate::compact::{operator_norm, CompactMap, OperatorNorm};
use crate::constraint::{ConstraintSet, FEASIBILITY_TOL};
use crate::error::{Result, VhiError};
use crate::functional::NonsmoothFunctional;
use crate::history::HistoryOperator;
use crate::operator::MonotoneOperator;
use crate::space::{InnerProductSpace, TimeGrid, Trajectory};

/// Time-independent ingredients shared by every static solve.
#[derive(Clone)]
pub struct Components {
    pub space: InnerProductSpace,
    pub space_x: InnerProductSpace,
    pub constraint: ConstraintSet,
    pub operator: Arc<dyn MonotoneOperator>,
    pub bifunction: Arc<dyn ConvexBifunction>,
    pub functional: Arc<dyn NonsmoothFunctional>,
    pub compact: CompactMap,
    pub m_norm: OperatorNorm,
}

pub struct ComponentsBuilder {
    pub space: InnerProductSpace,
    pub space_x: InnerProductSpace,
    pub constraint: ConstraintSet,
    pub operator: Arc<dyn MonotoneOperator>,
    pub bifunction: Arc<dyn ConvexBifunction>,
    pub functional: Arc<dyn NonsmoothFunctional>,
    pub compact: CompactMap,
}

impl ComponentsBuilder {
    pub fn build(self) -> Result<Components> {
        let n = self.space.dim();
        let checks = [
            ("constraint set", self.constraint.dim()),
            ("operator", self.operator.dim()),
            ("bifunction", self.bifunction.dim()),
            ("compact map columns", self.compact.matrix().ncols()),
        ];
        for (what, d) in checks {
            if d != n {
                return Err(VhiError::Dimension(format!("{what} has dimension {d}, V has {n}")));
            }
        }
        if self.functional.dim() != self.space_x.dim() || self.compact.matrix().nrows() != self.space_x.dim() {
            return Err(VhiError::Dimension("functional, compact map and X disagree".into()));
        }
        let m_norm = operator_norm(&self.compact, &self.space, &self.space_x)?;
        Ok(Components {
            space: self.space,
            space_x: self.space_x,
            constraint: self.constraint,
            operator: self.operator,
            bifunction: self.bifunction,
            functional: self.functional,
            compact: self.compact,
            m_norm,
        })
    }
}

impl Components {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

/// Find `u(t) in K` with
/// `<A(t,u), v-u> + phi((S u)(t), u, v) - phi((S u)(t), u, u) + J^0(t, Mu; Mv - Mu) >= <f(t), v-u>`.
#[derive(Clone)]
pub struct VhiProblem {
    pub components: Arc<Components>,
    pub grid: TimeGrid,
    pub history: HistoryOperator,
    /// Right-hand side `f` at grid nodes, as dual coefficient vectors.
    pub load: Trajectory,
}

impl VhiProblem {
    pub fn new(components: Arc<Components>, history: HistoryOperator, load: Trajectory) -> Result<Self> {
        let grid = load.grid;
        if load.dim() != components.dim() || history.dim() != components.dim() {
            return Err(VhiError::Dimension("load or history operator".into()));
        }
        if let Some(g) = history.grid() {
            if *g != grid {
                return Err(VhiError::GridMismatch);
            }
        }
        Ok(Self { components, grid, history, load })
    }

    pub fn static_instance(&self, n: usize, history_value: DVector<f64>) -> StaticInstance {
        StaticInstance {
            components: self.components.clone(),
            time: self.grid.node(n),
            history_value,
            load: self.load.values[n].clone(),
        }
    }
}

/// The inequality at a fixed time with the history slot of `phi` bound to `z`.
#[derive(Clone)]
pub struct StaticInstance {
    pub components: Arc<Components>,
    pub time: f64,
    pub history_value: DVector<f64>,
    pub load: DVector<f64>,
}

impl StaticInstance {
    pub fn new(components: Arc<Components>, time: f64, load: DVector<f64>) -> Self {
        let z = DVector::zeros(components.dim());
        Self { components, time, history_value: z, load }
    }

    pub fn with_history(mut self, z: DVector<f64>) -> Self {
        self.history_value = z;
        self
    }

    pub fn with_load(&self, load: DVector<f64>) -> Self {
        Self { load, ..self.clone() }
    }

    /// `<f - A u, v - u> - phi(z,u,v) + phi(z,u,u) - J^0(Mu; M(v-u))`; positive
    /// values witness a violation of the inequality at `v`.
    pub fn violation_at(&self, u: &DVector<f64>, au: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let c = &self.components;
        let d = v - u;
        let z = &self.history_value;
        (&self.load - au).dot(&d) - c.bifunction.value(z, u, v) + c.bifunction.value(z, u, u)
            - c.functional.dir_deriv(self.time, &c.compact.apply(u), &c.compact.apply(&d))
    }

    pub fn in_k(&self, u: &DVector<f64>) -> bool {
        self.components.constraint.contains(u, FEASIBILITY_TOL)
    }
}
