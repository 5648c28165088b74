//! Static inequality at a fixed time: successive approximation over convex
//! subproblems, a lattice oracle, and residual evaluation on probe sets.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constraint::{ConstraintKind, Projector};
use crate::error::{Result, VhiError};
use crate::linalg;
use crate::problem::{Components, StaticInstance};
use crate::qp::{MetricProx, NormTerm};
use crate::smallness::{check_components, WellPosednessReport};

const MAX_INNER_ITERATIONS: usize = 1_000_000;
const LIPSCHITZ_SAMPLES: usize = 1000;

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub solution: DVector<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Last outer update `||u^{k+1} - u^k||_V`.
    pub final_residual: f64,
    /// `||u^{k+1} - u^k|| / ||u^k - u^{k-1}||` per outer iteration.
    pub contraction_ratios: Vec<f64>,
}

enum InnerPlan {
    /// One metric prox in the metric of the symmetric linear part of `A`.
    Direct(MetricProx),
    /// Forward-backward iteration in the Gram metric.
    Iterative { rho: f64, rate: f64, step: BackwardStep },
}

enum BackwardStep {
    Prox(MetricProx),
    Project(Projector),
}

/// Solver of the convex subproblem obtained by freezing the second slot of
/// `phi` and the explicit part of `dJ`.
pub struct InnerSolver {
    components: Arc<Components>,
    plan: InnerPlan,
    implicit_norms: bool,
}

impl InnerSolver {
    pub fn new(components: Arc<Components>) -> Result<Self> {
        let c = &components;
        let n = c.dim();
        let rows = c.constraint.polyhedral_rows();
        let norms: Vec<NormTerm> = c
            .functional
            .norm_terms()
            .iter()
            .map(|t| NormTerm { weight: t.weight, map: &t.map * c.compact.matrix() })
            .collect();
        let linear_phi = c
            .bifunction
            .linear_coefficient(&DVector::zeros(n), &DVector::zeros(n))
            .is_some();
        let symmetric = c
            .operator
            .linear_part()
            .filter(|l| linalg::is_symmetric(l, 1e-12))
            .cloned();
        let rows_ref = rows.as_ref().map(|(a, b)| (a, b));

        if let (Some(l), true, Some(r)) = (symmetric, linear_phi, rows_ref) {
            let prox = MetricProx::new(&l, &norms, Some(r))?;
            return Ok(Self { components, plan: InnerPlan::Direct(prox), implicit_norms: true });
        }

        let m_a = c.operator.constants().m_a.ok_or(VhiError::MissingConstant("m_A"))?;
        let lipschitz = operator_lipschitz(c)? + c.bifunction.slot_lipschitz();
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(VhiError::DegenerateStep(lipschitz));
        }
        let rho = m_a / (lipschitz * lipschitz);
        let rate = (1.0 - (m_a / lipschitz).powi(2)).max(0.0).sqrt();
        let (step, implicit_norms) = match rows_ref {
            Some(r) => (
                BackwardStep::Prox(MetricProx::with_factor(c.space.cholesky().clone(), &norms, Some(r))?),
                true,
            ),
            None => (BackwardStep::Project(c.constraint.projector(&c.space)?), false),
        };
        Ok(Self { components, plan: InnerPlan::Iterative { rho, rate, step }, implicit_norms })
    }

    pub fn components(&self) -> &Arc<Components> {
        &self.components
    }

    /// Part of `dJ(t, Mu)` frozen by the outer iteration.
    pub fn frozen_subgradient(&self, t: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
        let c = &self.components;
        let x = c.compact.apply(u);
        let g = if self.implicit_norms {
            c.functional.explicit_subgradient(t, &x)
        } else {
            c.functional.subgradient(t, &x)
        };
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(VhiError::NonFinite("subgradient selection"))
        }
    }

    /// Solves the convex inequality with `phi(z, frozen, .)` and frozen `zeta`.
    /// Returns the solution and the number of inner iterations.
    pub fn solve(
        &self,
        inst: &StaticInstance,
        frozen: &DVector<f64>,
        zeta: &DVector<f64>,
        start: &DVector<f64>,
        tol: f64,
    ) -> Result<(DVector<f64>, usize)> {
        let c = &self.components;
        let t = inst.time;
        let z = &inst.history_value;
        let mt_zeta = c.compact.adjoint(zeta);
        match &self.plan {
            InnerPlan::Direct(prox) => {
                let n = c.dim();
                let coef = c
                    .bifunction
                    .linear_coefficient(z, frozen)
                    .ok_or_else(|| VhiError::Invalid("bifunction stopped being affine".into()))?;
                let r = c.operator.apply(t, &DVector::zeros(n)) + coef + mt_zeta - &inst.load;
                let y = -prox.factor().solve(&r);
                let scale = 1.0 + y.amax();
                let (u, _) = prox.apply(&y, 1.0, None, tol.min(1e-10) * 1e-3 * scale)?;
                Ok((u, 1))
            }
            InnerPlan::Iterative { rho, rate, step } => {
                let mut u = start.clone();
                let stop = tol * 1e-2 * (1.0 - rate).max(1e-12);
                for it in 1..=MAX_INNER_ITERATIONS {
                    let g = c.operator.apply(t, &u) + c.bifunction.subgradient(z, frozen, &u) + &mt_zeta
                        - &inst.load;
                    let y = &u - c.space.riesz(&g) * *rho;
                    let next = match step {
                        BackwardStep::Prox(p) => {
                            let scale = 1.0 + y.amax();
                            p.apply(&y, *rho, None, stop.min(1e-12) * scale)?.0
                        }
                        BackwardStep::Project(p) => p.project(&y)?,
                    };
                    let delta = c.space.distance(&next, &u);
                    if !delta.is_finite() {
                        return Err(VhiError::NonFinite("inner iterate"));
                    }
                    u = next;
                    if delta <= stop {
                        return Ok((u, it));
                    }
                }
                Err(VhiError::NoConvergence {
                    iterations: MAX_INNER_ITERATIONS,
                    last_update: f64::NAN,
                    iterates: vec![u],
                })
            }
        }
    }
}

/// `a1` for affine operators, otherwise 1.5 times the largest sampled
/// difference quotient over 1000 seeded pairs.
fn operator_lipschitz(c: &Components) -> Result<f64> {
    let a = &c.operator;
    if a.linear_part().is_some() {
        return a.constants().a1.ok_or(VhiError::MissingConstant("a1"));
    }
    let n = c.dim();
    let center = c.constraint.feasible_point();
    let radius = 1.0 + center.amax();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best = 0.0f64;
    for _ in 0..LIPSCHITZ_SAMPLES {
        let v1 = DVector::from_fn(n, |i, _| center[i] + rng.random_range(-radius..radius));
        let v2 = DVector::from_fn(n, |i, _| center[i] + rng.random_range(-radius..radius));
        let d = c.space.distance(&v1, &v2);
        if d > 0.0 {
            let q = c.space.dual_norm(&(a.apply(0.0, &v1) - a.apply(0.0, &v2))) / d;
            best = best.max(q);
        }
    }
    Ok(1.5 * best)
}

/// Successive approximation for the static inequality. Construction fails
/// with [`VhiError::IllPosed`] when the smallness gate does not pass.
pub struct StaticSolver {
    inner: InnerSolver,
    report: WellPosednessReport,
}

impl StaticSolver {
    pub fn new(components: Arc<Components>) -> Result<Self> {
        let report = check_components(&components)?;
        if !report.pass {
            return Err(VhiError::IllPosed(Box::new(report)));
        }
        Ok(Self { inner: InnerSolver::new(components)?, report })
    }

    pub fn report(&self) -> &WellPosednessReport {
        &self.report
    }

    pub fn components(&self) -> &Arc<Components> {
        self.inner.components()
    }

    /// Default outer cap `max(10, 10 * ceil(log(tol) / log(q)))`.
    pub fn iteration_cap(&self, tol: f64) -> usize {
        let q = self.report.q;
        if q <= 0.0 || q >= 1.0 || tol >= 1.0 {
            return 10;
        }
        let k = (tol.ln() / q.ln()).ceil().max(1.0) as usize;
        (10 * k).max(10)
    }

    pub fn solve(&self, inst: &StaticInstance, guess: Option<&DVector<f64>>, tol: f64) -> Result<SolveReport> {
        let c = self.inner.components();
        if inst.load.len() != c.dim() || inst.history_value.len() != c.dim() {
            return Err(VhiError::Dimension("static instance data".into()));
        }
        if !(tol > 0.0) {
            return Err(VhiError::Invalid("tolerance must be positive".into()));
        }
        let projector = c.constraint.projector(&c.space)?;
        let mut u = match guess {
            Some(g) => projector.project(g)?,
            None => c.constraint.feasible_point().clone(),
        };
        let cap = self.iteration_cap(tol);
        let mut inner_total = 0;
        let mut ratios = Vec::new();
        let mut last = f64::NAN;
        let mut iterates = Vec::new();
        for k in 1..=cap {
            let zeta = self.inner.frozen_subgradient(inst.time, &u)?;
            let (next, inner) = self.inner.solve(inst, &u, &zeta, &u, tol)?;
            inner_total += inner;
            let delta = c.space.distance(&next, &u);
            if last.is_finite() && last > 0.0 {
                ratios.push(delta / last);
            }
            last = delta;
            iterates.push(next.clone());
            u = next;
            if delta <= tol {
                return Ok(SolveReport {
                    solution: u,
                    outer_iterations: k,
                    inner_iterations: inner_total,
                    final_residual: delta,
                    contraction_ratios: ratios,
                });
            }
        }
        Err(VhiError::NoConvergence { iterations: cap, last_update: last, iterates })
    }
}

/// One-shot solve of a static instance.
pub fn solve_static(inst: &StaticInstance, guess: Option<&DVector<f64>>, tol: f64) -> Result<SolveReport> {
    StaticSolver::new(inst.components.clone())?.solve(inst, guess, tol)
}

/// Convex inequality with `phi(z, frozen, .)` and `zeta` fixed.
pub fn solve_convex_vi(
    inst: &StaticInstance,
    frozen: &DVector<f64>,
    zeta: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let solver = InnerSolver::new(inst.components.clone())?;
    let start = inst.components.constraint.feasible_point().clone();
    solver.solve(inst, frozen, zeta, &start, tol).map(|(u, _)| u)
}

/// `min_v [<A u, v-u> + phi(z,u,v) - phi(z,u,u) + J^0(Mu; M(v-u)) - <f, v-u>]`
/// over the probes. Non-negative values certify `u` on the probe set.
pub fn residual_static(inst: &StaticInstance, u: &DVector<f64>, probes: &[DVector<f64>]) -> Result<f64> {
    let c = &inst.components;
    let au = c.operator.apply(inst.time, u);
    let mut worst = f64::INFINITY;
    for (i, v) in probes.iter().enumerate() {
        if !c.constraint.contains(v, 1e-9 * (1.0 + v.amax())) {
            return Err(VhiError::ProbeOutsideK(i));
        }
        let r = -inst.violation_at(u, &au, v);
        if r.is_nan() {
            return Err(VhiError::NonFinite("residual"));
        }
        worst = worst.min(r);
    }
    Ok(worst)
}

fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

fn primes(count: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    let mut k = 2;
    while out.len() < count {
        if out.iter().all(|p| k % p != 0) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// 1000 Halton points in a box around `u` plus `u +- s e_i`, all projected onto `K`.
pub fn default_probes(inst: &StaticInstance, u: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let c = &inst.components;
    let n = c.dim();
    let (lo, hi) = c.constraint.bounds().unwrap_or_else(|| {
        let r = 1.0 + u.amax();
        (u.map(|x| x - r), u.map(|x| x + r))
    });
    let projector = c.constraint.projector(&c.space)?;
    let bases = primes(n);
    let mut probes = Vec::with_capacity(1000 + 4 * n);
    for k in 1..=1000 {
        let p = DVector::from_fn(n, |i, _| lo[i] + (hi[i] - lo[i]) * halton(k, bases[i]));
        probes.push(projector.project(&p)?);
    }
    for i in 0..n {
        let width = (hi[i] - lo[i]).max(1e-6);
        for s in [width, -width, 1e-3 * width, -1e-3 * width] {
            let mut p = u.clone();
            p[i] += s;
            probes.push(projector.project(&p)?);
        }
    }
    Ok(probes)
}

#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub point: DVector<f64>,
    /// Worst violation at `point`.
    pub violation: f64,
    /// Actual lattice spacing per axis (at most the requested step).
    pub spacing: Vec<f64>,
}

struct Lattice {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
}

impl Lattice {
    fn point(&self, idx: &[usize]) -> DVector<f64> {
        DVector::from_fn(self.lower.len(), |i, _| {
            if idx[i] == self.cells[i] {
                self.upper[i]
            } else {
                self.lower[i] + (self.upper[i] - self.lower[i]) * idx[i] as f64 / self.cells[i].max(1) as f64
            }
        })
    }
}

fn directions(dim: usize, u: &DVector<f64>, lat: &Lattice) -> Vec<DVector<f64>> {
    let snap = |x: f64| if x.abs() < 1e-14 { 0.0 } else { x };
    let mut dirs = Vec::new();
    match dim {
        1 => {}
        2 => {
            for k in 0..720 {
                let a = std::f64::consts::TAU * k as f64 / 720.0;
                dirs.push(DVector::from_vec(vec![snap(a.cos()), snap(a.sin())]));
            }
        }
        _ => {
            let count = 400;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for k in 0..count {
                let y = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                let r = (1.0 - y * y).sqrt();
                let th = golden * k as f64;
                dirs.push(DVector::from_vec(vec![r * th.cos(), y, r * th.sin()]));
            }
        }
    }
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = DVector::zeros(dim);
            e[i] = s;
            dirs.push(e);
        }
    }
    for mask in 0..(1usize << dim) {
        let corner = DVector::from_fn(dim, |i, _| if mask >> i & 1 == 1 { lat.upper[i] } else { lat.lower[i] });
        let d = corner - u;
        let n = d.norm();
        if n > 0.0 {
            dirs.push(d / n);
        }
    }
    dirs
}

/// Largest `s >= 0` with `u + s d` inside the box.
fn ray_length(u: &DVector<f64>, d: &DVector<f64>, lat: &Lattice) -> f64 {
    let mut s = f64::INFINITY;
    for i in 0..u.len() {
        if d[i] > 0.0 {
            s = s.min((lat.upper[i] - u[i]) / d[i]);
        } else if d[i] < 0.0 {
            s = s.min((lat.lower[i] - u[i]) / d[i]);
        }
    }
    s.max(0.0)
}

fn worst_violation(inst: &StaticInstance, u: &DVector<f64>, lat: &Lattice) -> f64 {
    let c = &inst.components;
    let au = c.operator.apply(inst.time, u);
    let mu = c.compact.apply(u);
    let linear = c.bifunction.linear_coefficient(&inst.history_value, u);
    let base = linear.as_ref().map(|coef| &inst.load - &au - coef);
    let mut worst = 0.0f64;
    for d in directions(u.len(), u, lat) {
        let len = ray_length(u, &d, lat);
        if len <= 0.0 {
            continue;
        }
        let v = match &base {
            Some(b) => {
                let slope = b.dot(&d) - c.functional.dir_deriv(inst.time, &mu, &c.compact.apply(&d));
                len * slope.max(0.0)
            }
            None => (1..=16)
                .map(|k| inst.violation_at(u, &au, &(u + &d * (len * k as f64 / 16.0))))
                .fold(0.0, f64::max),
        };
        worst = worst.max(if v.is_nan() { f64::INFINITY } else { v });
    }
    worst
}

fn rank(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

/// Lattice search over a bounded box `K` (dimension at most 3) for the point
/// with the smallest worst violation. The violation at `u` is the maximum over
/// rays `u + s d` inside `K`; ties go to the lexicographically smallest point.
/// The search runs coarse to fine on nested sublattices.
pub fn brute_force_static(inst: &StaticInstance, grid_step: f64) -> Result<BruteForceResult> {
    let c = &inst.components;
    let dim = c.dim();
    if dim > 3 {
        return Err(VhiError::DimensionTooLarge(dim));
    }
    if !(grid_step > 0.0) {
        return Err(VhiError::Invalid("grid step must be positive".into()));
    }
    let (lo, hi) = match c.constraint.kind() {
        ConstraintKind::Box { .. } => c.constraint.bounds().ok_or(VhiError::Unbounded)?,
        _ => return Err(VhiError::Unbounded),
    };
    let cells: Vec<usize> = (0..dim)
        .map(|i| ((hi[i] - lo[i]) / grid_step).ceil() as usize)
        .collect();
    let lat = Lattice { lower: lo.iter().copied().collect(), upper: hi.iter().copied().collect(), cells };
    let spacing = (0..dim)
        .map(|i| if lat.cells[i] == 0 { 0.0 } else { (hi[i] - lo[i]) / lat.cells[i] as f64 })
        .collect();

    let widest = lat.cells.iter().copied().max().unwrap_or(0);
    let mut stride = 1usize;
    while widest / stride > 40 {
        stride *= 5;
    }
    let (keep, half_width) = if dim <= 2 { (8, 2) } else { (4, 1) };

    let axis = |i: usize, center: Option<usize>, s: usize, coarse: usize| -> Vec<usize> {
        let n = lat.cells[i];
        let mut set = BTreeSet::new();
        match center {
            None => {
                set.extend((0..=n).step_by(s));
            }
            Some(c0) => {
                let r = half_width * coarse;
                let from = c0.saturating_sub(r);
                let to = (c0 + r).min(n);
                let first = from.div_ceil(s) * s;
                set.extend((first..=to).step_by(s));
                if c0 + r >= n {
                    set.insert(n);
                }
                set.insert(c0);
            }
        }
        if center.is_none() {
            set.insert(n);
        }
        set.into_iter().collect()
    };

    let product = |axes: &[Vec<usize>]| -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for a in axes {
            let mut next = Vec::with_capacity(out.len() * a.len());
            for prefix in &out {
                for &x in a {
                    let mut p = prefix.clone();
                    p.push(x);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    };

    let evaluate = |points: BTreeSet<Vec<usize>>| -> Vec<(f64, Vec<usize>)> {
        let pts: Vec<Vec<usize>> = points.into_iter().collect();
        let mut scored: Vec<(f64, Vec<usize>)> = pts
            .into_par_iter()
            .map(|idx| (worst_violation(inst, &lat.point(&idx), &lat), idx))
            .collect();
        scored.sort_by(rank);
        scored
    };

    let start: BTreeSet<Vec<usize>> = product(&(0..dim).map(|i| axis(i, None, stride, stride)).collect::<Vec<_>>())
        .into_iter()
        .collect();
    let mut scored = evaluate(start);
    while stride > 1 {
        let coarse = stride;
        stride /= 5;
        let mut next = BTreeSet::new();
        for (_, idx) in scored.iter().take(keep) {
            let axes: Vec<Vec<usize>> = (0..dim).map(|i| axis(i, Some(idx[i]), stride, coarse)).collect();
            next.extend(product(&axes));
        }
        scored = evaluate(next);
    }
    let (violation, idx) = scored.into_iter().next().expect("lattice is non-empty");
    Ok(BruteForceResult { point: lat.point(&idx), violation, spacing })
}
