//! Closed convex constraint sets and their metric projections.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VhiError};
use crate::qp::MetricProx;
use crate::space::InnerProductSpace;

/// Tolerance used when checking membership of points that came out of a
/// projection.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// User-supplied projection onto a closed convex set.
pub trait ProjectionOracle: Send + Sync {
    /// Projection of `v` in the norm of `space`.
    fn project(&self, space: &InnerProductSpace, v: &DVector<f64>) -> Result<DVector<f64>>;
    fn contains(&self, v: &DVector<f64>, tol: f64) -> bool;
}

#[derive(Clone)]
pub enum ConstraintKind {
    WholeSpace,
    /// Coordinate bounds; infinite entries are allowed.
    Box { lower: DVector<f64>, upper: DVector<f64> },
    /// `rows * v <= rhs`.
    Linear { rows: DMatrix<f64>, rhs: DVector<f64> },
    Custom(Arc<dyn ProjectionOracle>),
}

impl fmt::Debug for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WholeSpace => write!(f, "WholeSpace"),
            Self::Box { lower, upper } => f
                .debug_struct("Box")
                .field("lower", &lower.as_slice())
                .field("upper", &upper.as_slice())
                .finish(),
            Self::Linear { rows, .. } => write!(f, "Linear({} rows)", rows.nrows()),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Nonempty closed convex `K`, stored together with a feasible point.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    kind: ConstraintKind,
    feasible: DVector<f64>,
}

impl ConstraintSet {
    pub fn new(kind: ConstraintKind, feasible: DVector<f64>) -> Result<Self> {
        let set = Self { kind, feasible };
        set.validate()?;
        if !set.contains(&set.feasible, FEASIBILITY_TOL) {
            return Err(VhiError::Invalid("designated feasible point violates the constraints".into()));
        }
        Ok(set)
    }

    pub fn whole_space(dim: usize) -> Self {
        Self { kind: ConstraintKind::WholeSpace, feasible: DVector::zeros(dim) }
    }

    /// Box with the feasible point chosen as the projection of the origin.
    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let feasible = lower.zip_map(&upper, |l, u| 0.0f64.clamp(l, u));
        Self::new(ConstraintKind::Box { lower, upper }, feasible)
    }

    pub fn linear(rows: DMatrix<f64>, rhs: DVector<f64>, feasible: DVector<f64>) -> Result<Self> {
        Self::new(ConstraintKind::Linear { rows, rhs }, feasible)
    }

    pub fn custom(oracle: Arc<dyn ProjectionOracle>, feasible: DVector<f64>) -> Result<Self> {
        Self::new(ConstraintKind::Custom(oracle), feasible)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.feasible.len();
        match &self.kind {
            ConstraintKind::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(VhiError::Dimension("box bounds".into()));
                }
                if lower.iter().zip(upper.iter()).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
                    return Err(VhiError::Invalid("box has lower > upper".into()));
                }
            }
            ConstraintKind::Linear { rows, rhs } => {
                if rows.ncols() != dim || rows.nrows() != rhs.len() {
                    return Err(VhiError::Dimension("linear constraint rows".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn kind(&self) -> &ConstraintKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.feasible.len()
    }

    pub fn feasible_point(&self) -> &DVector<f64> {
        &self.feasible
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        if v.len() != self.dim() {
            return false;
        }
        match &self.kind {
            ConstraintKind::WholeSpace => true,
            ConstraintKind::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol),
            ConstraintKind::Linear { rows, rhs } => {
                (rows * v - rhs).iter().all(|r| *r <= tol)
            }
            ConstraintKind::Custom(o) => o.contains(v, tol),
        }
    }

    /// Largest constraint violation (zero inside `K`); `None` for custom sets.
    pub fn violation(&self, v: &DVector<f64>) -> Option<f64> {
        match &self.kind {
            ConstraintKind::WholeSpace => Some(0.0),
            ConstraintKind::Box { lower, upper } => Some(
                v.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(x, (l, u))| (l - x).max(x - u).max(0.0))
                    .fold(0.0, f64::max),
            ),
            ConstraintKind::Linear { rows, rhs } => {
                Some((rows * v - rhs).iter().fold(0.0f64, |m, r| m.max(*r)))
            }
            ConstraintKind::Custom(_) => None,
        }
    }

    /// `K` as `C v <= g` when it is polyhedral. Infinite box bounds are dropped.
    pub fn polyhedral_rows(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let dim = self.dim();
        match &self.kind {
            ConstraintKind::WholeSpace => Some((DMatrix::zeros(0, dim), DVector::zeros(0))),
            ConstraintKind::Box { lower, upper } => {
                let mut rows = Vec::new();
                let mut rhs = Vec::new();
                for i in 0..dim {
                    if upper[i].is_finite() {
                        let mut r = vec![0.0; dim];
                        r[i] = 1.0;
                        rows.push(r);
                        rhs.push(upper[i]);
                    }
                    if lower[i].is_finite() {
                        let mut r = vec![0.0; dim];
                        r[i] = -1.0;
                        rows.push(r);
                        rhs.push(-lower[i]);
                    }
                }
                let c = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
                Some((c, DVector::from_vec(rhs)))
            }
            ConstraintKind::Linear { rows, rhs } => Some((rows.clone(), rhs.clone())),
            ConstraintKind::Custom(_) => None,
        }
    }

    /// Finite bounding box, available only for bounded boxes.
    pub fn bounds(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        match &self.kind {
            ConstraintKind::Box { lower, upper }
                if lower.iter().chain(upper.iter()).all(|x| x.is_finite()) =>
            {
                Some((lower.clone(), upper.clone()))
            }
            _ => None,
        }
    }

    /// Prepared projector for repeated projections in the norm of `space`.
    pub fn projector(&self, space: &InnerProductSpace) -> Result<Projector> {
        if space.dim() != self.dim() {
            return Err(VhiError::Dimension(format!(
                "constraint set has dimension {}, space {}",
                self.dim(),
                space.dim()
            )));
        }
        let gram = space.gram();
        let diagonal = (0..gram.nrows())
            .all(|i| (0..gram.ncols()).all(|j| i == j || gram[(i, j)] == 0.0));
        let inner = match &self.kind {
            ConstraintKind::WholeSpace => ProjectorKind::Identity,
            ConstraintKind::Box { lower, upper } if diagonal => {
                ProjectorKind::Clip { lower: lower.clone(), upper: upper.clone() }
            }
            ConstraintKind::Custom(o) => ProjectorKind::Oracle(o.clone(), space.clone()),
            _ => {
                let (c, g) = self.polyhedral_rows().expect("polyhedral");
                let prox = MetricProx::with_factor(space.cholesky().clone(), &[], Some((&c, &g)))?;
                ProjectorKind::Dual(Box::new(prox))
            }
        };
        Ok(Projector { inner })
    }
}

#[derive(Clone)]
enum ProjectorKind {
    Identity,
    Clip { lower: DVector<f64>, upper: DVector<f64> },
    Dual(Box<MetricProx>),
    Oracle(Arc<dyn ProjectionOracle>, InnerProductSpace),
}

#[derive(Clone)]
pub struct Projector {
    inner: ProjectorKind,
}

impl Projector {
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.inner {
            ProjectorKind::Identity => Ok(v.clone()),
            ProjectorKind::Clip { lower, upper } => {
                Ok(DVector::from_fn(v.len(), |i, _| v[i].clamp(lower[i], upper[i])))
            }
            ProjectorKind::Dual(prox) => {
                let scale = 1.0 + v.amax();
                prox.apply(v, 1.0, None, 1e-15 * scale).map(|(p, _)| p)
            }
            ProjectorKind::Oracle(o, space) => {
                let p = o.project(space, v)?;
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(VhiError::NonFinite("projection oracle"));
                }
                Ok(p)
            }
        }
    }
}

/// Projection of `v` onto `K` in the norm of `space`.
pub fn project(k: &ConstraintSet, v: &DVector<f64>, space: &InnerProductSpace) -> Result<DVector<f64>> {
    k.projector(space)?.project(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spd2(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        // L L^T with L lower-triangular and positive diagonal
        let l = DMatrix::from_row_slice(2, 2, &[a, 0.0, b, c]);
        &l * l.transpose()
    }

    #[test]
    fn box_clip_in_one_dimension() {
        let k = ConstraintSet::boxed(DVector::from_element(1, 0.0), DVector::from_element(1, 1.0)).unwrap();
        let s = InnerProductSpace::euclidean(1);
        assert_eq!(project(&k, &DVector::from_element(1, 1.5), &s).unwrap()[0], 1.0);
        assert_eq!(project(&k, &DVector::from_element(1, 0.25), &s).unwrap()[0], 0.25);
    }

    #[test]
    fn halfspace_projection_matches_kkt_oracle() {
        // Oracle: if c^T v > g, the projection solves the equality-constrained
        // QP  [G c; c^T 0] [p; mu] = [G v; g].
        let g_mat = spd2(1.5, 0.7, 0.9);
        let space = InnerProductSpace::new(g_mat.clone()).unwrap();
        let c = DVector::from_vec(vec![1.0, -2.0]);
        let rhs = 0.5;
        let k = ConstraintSet::linear(
            DMatrix::from_row_slice(1, 2, c.as_slice()),
            DVector::from_element(1, rhs),
            DVector::zeros(2),
        )
        .unwrap();
        let v = DVector::from_vec(vec![2.0, -1.0]);
        assert!(c.dot(&v) > rhs);
        let mut kkt = DMatrix::zeros(3, 3);
        kkt.view_mut((0, 0), (2, 2)).copy_from(&g_mat);
        for i in 0..2 {
            kkt[(i, 2)] = c[i];
            kkt[(2, i)] = c[i];
        }
        let gv = &g_mat * &v;
        let b = DVector::from_vec(vec![gv[0], gv[1], rhs]);
        let sol = kkt.lu().solve(&b).unwrap();
        let p = project(&k, &v, &space).unwrap();
        assert!((p[0] - sol[0]).abs() < 1e-10 && (p[1] - sol[1]).abs() < 1e-10);
    }

    #[test]
    fn infeasible_designated_point_is_rejected() {
        let r = ConstraintSet::linear(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::from_element(1, -1.0),
            DVector::zeros(1),
        );
        assert!(r.is_err());
    }

    fn boxed_set() -> ConstraintSet {
        ConstraintSet::boxed(
            DVector::from_vec(vec![-1.0, 0.0, f64::NEG_INFINITY]),
            DVector::from_vec(vec![0.5, 2.0, 1.0]),
        )
        .unwrap()
    }

    fn space3() -> InnerProductSpace {
        InnerProductSpace::new(DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.5, 0.1, 0.5, 1.5, -0.3, 0.1, -0.3, 1.0],
        ))
        .unwrap()
    }

    proptest! {
        #[test]
        fn projection_is_nonexpansive_and_idempotent(
            a in prop::collection::vec(-4.0f64..4.0, 3),
            b in prop::collection::vec(-4.0f64..4.0, 3),
            w in prop::collection::vec(-4.0f64..4.0, 3),
        ) {
            let k = boxed_set();
            let s = space3();
            let proj = k.projector(&s).unwrap();
            let a = DVector::from_vec(a);
            let b = DVector::from_vec(b);
            let pa = proj.project(&a).unwrap();
            let pb = proj.project(&b).unwrap();
            prop_assert!(k.contains(&pa, FEASIBILITY_TOL));
            prop_assert!(s.distance(&pa, &pb) <= s.distance(&a, &b) + 1e-10);
            let ppa = proj.project(&pa).unwrap();
            prop_assert!(s.distance(&ppa, &pa) <= 1e-10);
            // variational characterization against a feasible sample
            let wk = proj.project(&DVector::from_vec(w)).unwrap();
            prop_assert!(s.inner(&(&a - &pa), &(&wk - &pa)) <= 1e-9);
        }
    }
}
