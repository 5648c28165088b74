//! Time-dependent problems: causal marching and the global fixed-point
//! iteration `eta -> S u_eta` over history trajectories.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VhiError};
use crate::history::Quadrature;
use crate::problem::VhiProblem;
use crate::smallness::check_smallness;
use crate::space::Trajectory;
use crate::static_solver::{SolveReport, StaticSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteppingMode {
    Marching,
    FixedPoint,
}

#[derive(Clone, Debug)]
pub struct StepOptions {
    /// Sweep tolerance on `sup_n ||eta^{k+1}_n - eta^k_n||_{V*}`.
    pub tol: f64,
    /// Tolerance of each static solve; defaults to `min(tol * 1e-2, 1e-10)`.
    pub static_tol: Option<f64>,
    pub sweep_cap: usize,
    /// Starting history trajectory for the fixed-point mode.
    pub initial_history: Option<Vec<DVector<f64>>>,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { tol: 1e-6, static_tol: None, sweep_cap: 200, initial_history: None }
    }
}

impl StepOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn static_tol(&self) -> f64 {
        self.static_tol.unwrap_or((self.tol * 1e-2).min(1e-10))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SteppingReport {
    pub mode: SteppingMode,
    pub steps: Vec<SolveReport>,
    /// Sup-in-time distances between consecutive history iterates.
    pub sweep_distances: Vec<f64>,
    /// The same distances in the discrete `L^2(0, T; V*)` norm.
    pub sweep_l2: Vec<f64>,
    pub fitted_rate: Option<f64>,
}

/// Returns the velocity-like unknown `u` at every grid node.
pub fn solve_trajectory(
    problem: &VhiProblem,
    mode: SteppingMode,
    opts: &StepOptions,
) -> Result<(Trajectory, SteppingReport)> {
    if !(opts.tol > 0.0) {
        return Err(VhiError::Invalid("tolerance must be positive".into()));
    }
    let solver = StaticSolver::new(problem.components.clone())?;
    match mode {
        SteppingMode::Marching => march(problem, &solver, opts),
        SteppingMode::FixedPoint => fixed_point(problem, &solver, opts),
    }
}

fn march(problem: &VhiProblem, solver: &StaticSolver, opts: &StepOptions) -> Result<(Trajectory, SteppingReport)> {
    let grid = problem.grid;
    let history = problem.history.clone().with_rule(Quadrature::LeftRectangle);
    let tol = opts.static_tol();
    let mut values: Vec<DVector<f64>> = Vec::with_capacity(grid.len());
    let mut steps = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let eta = history.apply_values(&grid, &values, n);
        let inst = problem.static_instance(n, eta);
        match solver.solve(&inst, values.last(), tol) {
            Ok(rep) => {
                values.push(rep.solution.clone());
                steps.push(rep);
            }
            Err(e) => {
                return Err(VhiError::StepFailed {
                    step: n,
                    partial: Box::new(Trajectory { grid, values }),
                    source: Box::new(e),
                })
            }
        }
    }
    let report = SteppingReport {
        mode: SteppingMode::Marching,
        steps,
        sweep_distances: Vec::new(),
        sweep_l2: Vec::new(),
        fitted_rate: None,
    };
    Ok((Trajectory::new(grid, values)?, report))
}

fn solve_all(
    problem: &VhiProblem,
    solver: &StaticSolver,
    eta: &[DVector<f64>],
    guesses: Option<&[DVector<f64>]>,
    tol: f64,
) -> Result<Vec<SolveReport>> {
    let results: Vec<Result<SolveReport>> = (0..problem.grid.len())
        .into_par_iter()
        .map(|n| {
            let inst = problem.static_instance(n, eta[n].clone());
            solver.solve(&inst, guesses.map(|g| &g[n]), tol)
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for (n, r) in results.into_iter().enumerate() {
        match r {
            Ok(rep) => out.push(rep),
            Err(e) => {
                let values = out.iter().map(|r: &SolveReport| r.solution.clone()).collect();
                return Err(VhiError::StepFailed {
                    step: n,
                    partial: Box::new(Trajectory { grid: problem.grid, values }),
                    source: Box::new(e),
                });
            }
        }
    }
    Ok(out)
}

fn fixed_point(
    problem: &VhiProblem,
    solver: &StaticSolver,
    opts: &StepOptions,
) -> Result<(Trajectory, SteppingReport)> {
    let grid = problem.grid;
    let c = &problem.components;
    let history = &problem.history;
    let tol = opts.static_tol();
    let mut eta = match &opts.initial_history {
        Some(h) => {
            if h.len() != grid.len() || h.iter().any(|v| v.len() != c.dim()) {
                return Err(VhiError::Dimension("initial history trajectory".into()));
            }
            h.clone()
        }
        None => {
            let u0 = vec![c.constraint.feasible_point().clone(); grid.len()];
            history.apply_all(&grid, &u0)
        }
    };
    let mut distances = Vec::new();
    let mut l2 = Vec::new();
    let mut guesses: Option<Vec<DVector<f64>>> = None;
    loop {
        if distances.len() >= opts.sweep_cap {
            return Err(VhiError::SweepCap {
                cap: opts.sweep_cap,
                last_distance: distances.last().copied().unwrap_or(f64::NAN),
            });
        }
        let steps = solve_all(problem, solver, &eta, guesses.as_deref(), tol)?;
        let w: Vec<DVector<f64>> = steps.iter().map(|r| r.solution.clone()).collect();
        let next = history.apply_all(&grid, &w);
        let gaps: Vec<f64> = next.iter().zip(&eta).map(|(a, b)| c.space.dual_norm(&(a - b))).collect();
        let sup = gaps.iter().copied().fold(0.0, f64::max);
        let dt = grid.dt();
        let last = gaps.len() - 1;
        let sq: f64 = gaps
            .iter()
            .enumerate()
            .map(|(n, g)| if n == 0 || n == last { 0.5 * g * g } else { g * g })
            .sum();
        distances.push(sup);
        l2.push((sq * dt).sqrt());
        eta = next;
        if sup <= opts.tol {
            let steps = solve_all(problem, solver, &eta, Some(&w), tol)?;
            let values = steps.iter().map(|r| r.solution.clone()).collect();
            let mut report = SteppingReport {
                mode: SteppingMode::FixedPoint,
                steps,
                sweep_distances: distances,
                sweep_l2: l2,
                fitted_rate: None,
            };
            report.fitted_rate = contraction_diagnostics(&report).ok().map(|d| d.rate);
            return Ok((Trajectory::new(grid, values)?, report));
        }
        guesses = Some(w);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionDiagnostics {
    /// Least-squares geometric rate of the sweep distances.
    pub rate: f64,
    /// False when the log-distances deviate from the fitted line by more than
    /// a factor of two, or a distance grows by more than 5% after the first sweep.
    pub geometric: bool,
    /// `(sweep, distance, ratio to the previous distance)`.
    pub table: Vec<(usize, f64, Option<f64>)>,
}

pub fn contraction_diagnostics(report: &SteppingReport) -> Result<ContractionDiagnostics> {
    let d = &report.sweep_distances;
    let table = d
        .iter()
        .enumerate()
        .map(|(k, &x)| (k + 1, x, (k > 0 && d[k - 1] > 0.0).then(|| x / d[k - 1])))
        .collect();
    if d.contains(&0.0) {
        return Ok(ContractionDiagnostics { rate: 0.0, geometric: true, table });
    }
    if d.len() < 3 {
        return Err(VhiError::TooFewSweeps(d.len()));
    }
    let n = d.len() as f64;
    let xs: Vec<f64> = (0..d.len()).map(|k| k as f64).collect();
    let ys: Vec<f64> = d.iter().map(|x| x.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let max_dev = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (my + slope * (x - mx))).abs())
        .fold(0.0, f64::max);
    let monotone = d.windows(2).skip(1).all(|w| w[1] <= 1.05 * w[0]);
    Ok(ContractionDiagnostics { rate: slope.exp(), geometric: max_dev <= 2f64.ln() && monotone, table })
}

#[derive(Clone, Debug, Serialize)]
pub struct GronwallReport {
    pub runs: usize,
    pub max_pairwise: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Runs the fixed-point mode from the default and four seeded random history
/// initializations and compares the trajectories pairwise in `sup_n ||.||_V`.
pub fn gronwall_uniqueness_check(problem: &VhiProblem, tol: f64) -> Result<GronwallReport> {
    let gate = check_smallness(problem)?;
    if !gate.pass {
        return Err(VhiError::IllPosed(Box::new(gate)));
    }
    let c = &problem.components;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e0);
    let scale = 1.0 + problem.load.values.iter().map(|v| v.amax()).fold(0.0, f64::max);
    let mut inits = vec![None];
    for _ in 0..4 {
        let h = (0..problem.grid.len())
            .map(|_| DVector::from_fn(c.dim(), |_, _| rng.random_range(-scale..scale)))
            .collect();
        inits.push(Some(h));
    }
    let mut runs = Vec::new();
    for init in inits {
        let opts = StepOptions { tol, initial_history: init, ..StepOptions::default() };
        runs.push(solve_trajectory(problem, SteppingMode::FixedPoint, &opts)?.0);
    }
    let mut max_pairwise = 0.0f64;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            max_pairwise = max_pairwise.max(runs[i].sup_distance(&runs[j], |v| c.space.norm(v)));
        }
    }
    let threshold = 10.0 * tol;
    Ok(GronwallReport { runs: runs.len(), max_pairwise, threshold, pass: max_pairwise <= threshold })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(d: Vec<f64>) -> SteppingReport {
        SteppingReport {
            mode: SteppingMode::FixedPoint,
            steps: Vec::new(),
            sweep_distances: d,
            sweep_l2: Vec::new(),
            fitted_rate: None,
        }
    }

    #[test]
    fn halving_sequence_has_rate_one_half() {
        let d = contraction_diagnostics(&report(vec![1.0, 0.5, 0.25, 0.125])).unwrap();
        assert!((d.rate - 0.5).abs() < 1e-12);
        assert!(d.geometric);
    }

    #[test]
    fn exact_convergence_reports_zero_rate() {
        assert_eq!(contraction_diagnostics(&report(vec![0.0])).unwrap().rate, 0.0);
    }

    #[test]
    fn too_few_sweeps() {
        assert!(matches!(contraction_diagnostics(&report(vec![1.0, 0.5])), Err(VhiError::TooFewSweeps(2))));
    }

    #[test]
    fn growth_is_flagged() {
        let d = contraction_diagnostics(&report(vec![1.0, 0.5, 0.8, 0.1, 0.01])).unwrap();
        assert!(!d.geometric);
    }
}
