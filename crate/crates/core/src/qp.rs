//! Small dense quadratic programs over products of simple sets.
//!
//! The workhorse is [`MetricProx`], which evaluates
//!
//! ```text
//! argmin_v  1/2 ||v - y||_H^2 + s * sum_b w_b ||T_b v||_2   s.t.  C v <= g
//! ```
//!
//! through its dual: a QP over `mu = (y_b, lambda)` with `||y_b|| <= s w_b` and
//! `lambda >= 0`. The dual is solved by block projected Gauss-Seidel followed
//! by an active-set polish, and the primal point is `v = y - H^{-1} D mu`.
//! Projections onto polyhedra in a Gram metric and the inner convex
//! variational inequalities of the static solver both reduce to this form.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Result, VhiError};

/// Feasible set of one block of dual variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DualSet {
    /// Scalar multiplier of an inequality row, `lambda >= 0`.
    NonNegative,
    /// `||y|| <= weight * scale` where `scale` is supplied per solve.
    Ball { weight: f64 },
}

#[derive(Clone, Debug)]
struct Block {
    range: Range<usize>,
    set: DualSet,
    /// Largest eigenvalue of the diagonal block of Q.
    lipschitz: f64,
}

/// `min 1/2 mu^T Q mu - c^T mu` over a product of [`DualSet`]s.
#[derive(Clone, Debug)]
pub struct BlockQp {
    q: DMatrix<f64>,
    blocks: Vec<Block>,
}

#[derive(Clone, Debug)]
pub struct BlockQpSolution {
    pub mu: DVector<f64>,
    pub sweeps: usize,
}

impl BlockQp {
    pub fn new(q: DMatrix<f64>, sets: Vec<(usize, DualSet)>) -> Result<Self> {
        let mut blocks = Vec::with_capacity(sets.len());
        let mut start = 0;
        for (size, set) in sets {
            if size == 0 {
                return Err(VhiError::Invalid("empty dual block".into()));
            }
            if matches!(set, DualSet::NonNegative) && size != 1 {
                return Err(VhiError::Invalid("non-negative blocks are scalar".into()));
            }
            let range = start..start + size;
            let sub = q.view((start, start), (size, size)).clone_owned();
            let lipschitz = if size == 1 {
                sub[(0, 0)]
            } else {
                SymmetricEigen::new(sub).eigenvalues.max()
            };
            blocks.push(Block { range, set, lipschitz });
            start += size;
        }
        if start != q.nrows() || q.nrows() != q.ncols() {
            return Err(VhiError::Dimension(format!(
                "dual blocks cover {start} variables, Q is {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        Ok(Self { q, blocks })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn project_block(set: DualSet, scale: f64, y: &mut [f64]) {
        match set {
            DualSet::NonNegative => y[0] = y[0].max(0.0),
            DualSet::Ball { weight } => {
                let r = (weight * scale).max(0.0);
                let n = y.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > r {
                    let f = if n > 0.0 { r / n } else { 0.0 };
                    y.iter_mut().for_each(|x| *x *= f);
                }
            }
        }
    }

    /// `tol` bounds the `Q`-weighted size of the last sweep's update.
    pub fn solve(
        &self,
        c: &DVector<f64>,
        ball_scale: f64,
        warm: Option<&DVector<f64>>,
        tol: f64,
        max_sweeps: usize,
    ) -> Result<BlockQpSolution> {
        let n = self.dim();
        if n == 0 {
            return Ok(BlockQpSolution { mu: DVector::zeros(0), sweeps: 0 });
        }
        let mut mu = match warm {
            Some(w) if w.len() == n => w.clone(),
            _ => DVector::zeros(n),
        };
        for b in &self.blocks {
            Self::project_block(b.set, ball_scale, &mut mu.as_mut_slice()[b.range.clone()]);
        }
        let mut grad = &self.q * &mu - c;
        let mut scratch = Vec::new();
        for sweep in 1..=max_sweeps {
            let mut moved = 0.0;
            for b in &self.blocks {
                if b.lipschitz <= f64::EPSILON * self.q.amax().max(1.0) {
                    continue;
                }
                let r = b.range.clone();
                let inner_steps = if r.len() == 1 { 1 } else { 25 };
                for _ in 0..inner_steps {
                    scratch.clear();
                    scratch.extend(r.clone().map(|i| mu[i] - grad[i] / b.lipschitz));
                    Self::project_block(b.set, ball_scale, &mut scratch);
                    let mut step_sq = 0.0;
                    for (k, i) in r.clone().enumerate() {
                        let delta = scratch[k] - mu[i];
                        if delta != 0.0 {
                            mu[i] = scratch[k];
                            grad.axpy(delta, &self.q.column(i), 1.0);
                            step_sq += delta * delta;
                        }
                    }
                    let step = b.lipschitz * step_sq;
                    moved += step;
                    if step <= (tol * tol) * 1e-4 {
                        break;
                    }
                }
            }
            if moved.sqrt() <= tol {
                let mu = self.polish(c, ball_scale, mu);
                return Ok(BlockQpSolution { mu, sweeps: sweep });
            }
            if sweep % 25 == 0 {
                let cand = self.polish(c, ball_scale, mu.clone());
                let floor = 1e-14 * (1.0 + c.amax() + self.q.amax() * cand.amax());
                if self.kkt_residual(c, ball_scale, &cand) <= tol.max(floor) {
                    return Ok(BlockQpSolution { mu: cand, sweeps: sweep });
                }
            }
        }
        Err(VhiError::ProjectionLimit(max_sweeps))
    }

    /// `Q`-weighted size of one projected gradient step from `mu`.
    fn kkt_residual(&self, c: &DVector<f64>, ball_scale: f64, mu: &DVector<f64>) -> f64 {
        let grad = &self.q * mu - c;
        let mut total = 0.0;
        let mut scratch = Vec::new();
        for b in &self.blocks {
            if b.lipschitz <= f64::EPSILON * self.q.amax().max(1.0) {
                continue;
            }
            let r = b.range.clone();
            scratch.clear();
            scratch.extend(r.clone().map(|i| mu[i] - grad[i] / b.lipschitz));
            Self::project_block(b.set, ball_scale, &mut scratch);
            let sq: f64 = r.clone().enumerate().map(|(k, i)| (scratch[k] - mu[i]).powi(2)).sum();
            total += b.lipschitz * sq;
        }
        total.sqrt()
    }

    /// Solve the equality-constrained QP implied by the current active pattern
    /// and keep it when it is feasible, optimal and no worse.
    fn polish(&self, c: &DVector<f64>, ball_scale: f64, mu: DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut free = Vec::new();
        let mut fixed = DVector::zeros(n);
        for b in &self.blocks {
            let r = b.range.clone();
            match b.set {
                DualSet::NonNegative => {
                    let i = r.start;
                    if mu[i] > 0.0 {
                        free.push(i);
                    }
                }
                DualSet::Ball { weight } => {
                    let rad = weight * ball_scale;
                    let norm = r.clone().map(|i| mu[i] * mu[i]).sum::<f64>().sqrt();
                    if norm < rad * (1.0 - 1e-9) {
                        free.extend(r);
                    } else if r.len() == 1 {
                        fixed[r.start] = mu[r.start];
                    } else {
                        // Curved boundary: the linear polish does not apply.
                        return mu;
                    }
                }
            }
        }
        if free.is_empty() {
            return self.accept_if_better(c, ball_scale, mu, fixed);
        }
        let k = free.len();
        let mut qff = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        let qfixed = &self.q * &fixed;
        for (a, &i) in free.iter().enumerate() {
            rhs[a] = c[i] - qfixed[i];
            for (b, &j) in free.iter().enumerate() {
                qff[(a, b)] = self.q[(i, j)];
            }
        }
        let Some(ch) = Cholesky::new(qff) else {
            return mu;
        };
        let sol = ch.solve(&rhs);
        let mut cand = fixed;
        for (a, &i) in free.iter().enumerate() {
            cand[i] = sol[a];
        }
        self.accept_if_better(c, ball_scale, mu, cand)
    }

    fn accept_if_better(
        &self,
        c: &DVector<f64>,
        ball_scale: f64,
        mu: DVector<f64>,
        cand: DVector<f64>,
    ) -> DVector<f64> {
        let slack = 1e-12 * (1.0 + cand.amax());
        for b in &self.blocks {
            let r = b.range.clone();
            match b.set {
                DualSet::NonNegative => {
                    if cand[r.start] < -slack {
                        return mu;
                    }
                }
                DualSet::Ball { weight } => {
                    let norm = r.clone().map(|i| cand[i] * cand[i]).sum::<f64>().sqrt();
                    if norm > weight * ball_scale + slack {
                        return mu;
                    }
                }
            }
        }
        let mut cand = cand;
        for b in &self.blocks {
            Self::project_block(b.set, ball_scale, &mut cand.as_mut_slice()[b.range.clone()]);
        }
        let obj = |m: &DVector<f64>| 0.5 * m.dot(&(&self.q * m)) - c.dot(m);
        if obj(&cand) <= obj(&mu) + 1e-14 * (1.0 + obj(&mu).abs()) {
            cand
        } else {
            mu
        }
    }
}

/// Precomputed proximal map of `s * sum_b w_b ||T_b v|| + indicator{C v <= g}`
/// in the metric of an SPD matrix `H`.
#[derive(Clone, Debug)]
pub struct MetricProx {
    chol: Cholesky<f64, Dyn>,
    /// `H^{-1} D`
    z: DMatrix<f64>,
    /// `D = [T_1^T .. T_B^T  C^T]`
    d: DMatrix<f64>,
    /// Right-hand sides `g` of the inequality rows (zero for ball entries).
    offsets: DVector<f64>,
    qp: BlockQp,
    dim: usize,
}

/// Weighted block `w ||T v||_2`.
#[derive(Clone, Debug)]
pub struct NormTerm {
    pub weight: f64,
    pub map: DMatrix<f64>,
}

impl MetricProx {
    pub fn new(
        metric: &DMatrix<f64>,
        norms: &[NormTerm],
        rows: Option<(&DMatrix<f64>, &DVector<f64>)>,
    ) -> Result<Self> {
        let chol = Cholesky::new(metric.clone())
            .ok_or_else(|| VhiError::NotSpd("prox metric".into()))?;
        Self::with_factor(chol, norms, rows)
    }

    pub fn with_factor(
        chol: Cholesky<f64, Dyn>,
        norms: &[NormTerm],
        rows: Option<(&DMatrix<f64>, &DVector<f64>)>,
    ) -> Result<Self> {
        let dim = chol.l_dirty().nrows();
        let norm_cols: usize = norms.iter().map(|t| t.map.nrows()).sum();
        let row_count = rows.map_or(0, |(c, _)| c.nrows());
        let total = norm_cols + row_count;
        let mut d = DMatrix::zeros(dim, total);
        let mut offsets = DVector::zeros(total);
        let mut sets = Vec::with_capacity(norms.len() + row_count);
        let mut col = 0;
        for t in norms {
            if t.map.ncols() != dim {
                return Err(VhiError::Dimension(format!(
                    "norm block maps from {} coordinates, space has {dim}",
                    t.map.ncols()
                )));
            }
            let k = t.map.nrows();
            d.view_mut((0, col), (dim, k)).copy_from(&t.map.transpose());
            sets.push((k, DualSet::Ball { weight: t.weight }));
            col += k;
        }
        if let Some((c, g)) = rows {
            if c.ncols() != dim || g.len() != c.nrows() {
                return Err(VhiError::Dimension("inequality rows".into()));
            }
            for i in 0..c.nrows() {
                d.column_mut(col).copy_from(&c.row(i).transpose());
                offsets[col] = g[i];
                sets.push((1, DualSet::NonNegative));
                col += 1;
            }
        }
        let z = chol.solve(&d);
        let q = d.transpose() * &z;
        let q = (&q + q.transpose()) * 0.5;
        let qp = BlockQp::new(q, sets)?;
        Ok(Self { chol, z, d, offsets, qp, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dual_dim(&self) -> usize {
        self.qp.dim()
    }

    pub fn factor(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// Returns the primal point and the dual multipliers.
    pub fn apply(
        &self,
        y: &DVector<f64>,
        ball_scale: f64,
        warm: Option<&DVector<f64>>,
        tol: f64,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        if self.qp.dim() == 0 {
            return Ok((y.clone(), DVector::zeros(0)));
        }
        let c = self.d.transpose() * y - &self.offsets;
        let sol = self.qp.solve(&c, ball_scale, warm, tol, 200_000)?;
        let v = y - &self.z * &sol.mu;
        Ok((v, sol.mu))
    }
}
