//! The `solve`, `check` and `oracle` commands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vhi_contact::export::{self, num};
use vhi_contact::model::ModelConstants;
use vhi_contact::post::{build_solution, divergence_residual, rule_for, summarize, ResidualSummary};
use vhi_contact::{assemble_problem, build_mesh, ContactData, ContactProblem, Material};
use vhi_core::smallness::{check_smallness, WellPosednessReport};
use vhi_core::static_solver::{brute_force_static, solve_static};
use vhi_core::stepper::{
    contraction_diagnostics, solve_trajectory, ContractionDiagnostics, StepOptions, SteppingMode, SteppingReport,
};
use vhi_core::{TimeGrid, Trajectory, VhiError, VhiProblem};

use crate::config::{ProblemKind, ScenarioConfig};
use crate::error::CliError;

pub const WELLPOSEDNESS_FILE: &str = "wellposedness.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const ORACLE_FILE: &str = "oracle.json";
pub const DEFAULT_OUT: &str = "vhi-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Check,
    Oracle,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub steps: Option<usize>,
    pub mode: Option<SteppingMode>,
    pub quiet: bool,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }
}

#[derive(Serialize)]
struct WellPosednessFile<'a> {
    #[serde(flatten)]
    report: &'a WellPosednessReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    constants: Option<&'a ModelConstants>,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct StepSummary {
    step: usize,
    t: f64,
    outer_iterations: usize,
    inner_iterations: usize,
    final_residual: f64,
}

#[derive(Serialize)]
struct ContactDiagnostics {
    residuals: ResidualSummary,
    max_interior_residual: f64,
    max_contact_reaction: f64,
}

#[derive(Serialize)]
struct Diagnostics {
    problem: ProblemKind,
    mode: SteppingMode,
    horizon: f64,
    steps: usize,
    tol: f64,
    static_solves: Vec<StepSummary>,
    sweep_distances: Vec<f64>,
    contraction: Option<ContractionDiagnostics>,
    contact: Option<ContactDiagnostics>,
}

fn diagnostics(cfg: &ScenarioConfig, grid: &TimeGrid, mode: SteppingMode, rep: Option<&SteppingReport>) -> Diagnostics {
    let static_solves = rep
        .map(|r| {
            r.steps
                .iter()
                .enumerate()
                .map(|(n, s)| StepSummary {
                    step: n,
                    t: grid.node(n),
                    outer_iterations: s.outer_iterations,
                    inner_iterations: s.inner_iterations,
                    final_residual: s.final_residual,
                })
                .collect()
        })
        .unwrap_or_default();
    Diagnostics {
        problem: cfg.problem,
        mode,
        horizon: grid.horizon(),
        steps: rep.map_or(0, |_| grid.steps()),
        tol: cfg.solver.tol,
        static_solves,
        sweep_distances: rep.map(|r| r.sweep_distances.clone()).unwrap_or_default(),
        contraction: rep
            .filter(|r| r.mode == SteppingMode::FixedPoint)
            .and_then(|r| contraction_diagnostics(r).ok()),
        contact: None,
    }
}

fn step_options(cfg: &ScenarioConfig) -> StepOptions {
    StepOptions {
        tol: cfg.solver.tol,
        static_tol: cfg.solver.static_tol,
        sweep_cap: cfg.solver.sweep_cap,
        initial_history: None,
    }
}

fn abstract_trajectory_csv(w: Option<&Trajectory>, dim: usize) -> String {
    let mut s = String::from("t");
    for i in 0..dim {
        s.push_str(&format!(",w_{i}"));
    }
    s.push('\n');
    if let Some(w) = w {
        for (t, v) in w.grid.nodes().zip(&w.values) {
            s.push_str(&num(t));
            for x in v.iter() {
                s.push(',');
                s.push_str(&num(*x));
            }
            s.push('\n');
        }
    }
    s
}

const CONTACT_TRAJECTORY_HEADER: &str = "t,node_id,w_x,w_y,u_x,u_y\n";

pub fn run(command: Command, config_path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let mut cfg = ScenarioConfig::load(config_path)?;
    if let Some(n) = opts.steps {
        cfg.grid.steps = n;
    }
    if let Some(m) = opts.mode {
        cfg.solver.mode = m;
    }
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut writer = Writer::new(out_dir.clone())?;
    let mut lines = Vec::new();
    let result = match cfg.problem {
        ProblemKind::Abstract => run_abstract(command, &cfg, &mut writer, &mut lines),
        ProblemKind::Contact => run_contact(command, &cfg, &mut writer, &mut lines),
    };
    result.map(|()| RunSummary { out_dir, files: writer.files, lines })
}

/// The grid used for the gate when no steps are requested.
fn effective_grid(cfg: &ScenarioConfig) -> Result<TimeGrid, CliError> {
    Ok(TimeGrid::new(cfg.grid.horizon, cfg.grid.steps.max(1))?)
}

fn gate(report: &WellPosednessReport, lines: &mut Vec<String>) -> Result<(), CliError> {
    lines.push(format!(
        "well-posedness: {} (q = {:.6}, c = {})",
        if report.pass { "pass" } else { "FAIL" },
        report.q,
        report.c.map_or("none".to_string(), |c| format!("{c:.6}"))
    ));
    if report.pass {
        Ok(())
    } else {
        Err(VhiError::IllPosed(Box::new(report.clone())).into())
    }
}

fn run_abstract(
    command: Command,
    cfg: &ScenarioConfig,
    writer: &mut Writer,
    lines: &mut Vec<String>,
) -> Result<(), CliError> {
    let spec = cfg.abstract_problem.as_ref().expect("validated");
    let grid = effective_grid(cfg)?;
    let problem: VhiProblem = spec.problem(grid)?;
    let report = check_smallness(&problem)?;
    writer.json(WELLPOSEDNESS_FILE, &WellPosednessFile { report: &report, constants: None, warnings: &[] })?;
    gate(&report, lines)?;
    match command {
        Command::Check => Ok(()),
        Command::Oracle => run_oracle(cfg, &problem, writer, lines),
        Command::Solve => {
            let dim = problem.components.dim();
            if cfg.grid.steps == 0 {
                writer.text(TRAJECTORY_FILE, &abstract_trajectory_csv(None, dim))?;
                writer.json(DIAGNOSTICS_FILE, &diagnostics(cfg, &grid, cfg.solver.mode, None))?;
                lines.push("zero-step run: nothing to solve".into());
                return Ok(());
            }
            let (w, rep) = solve_trajectory(&problem, cfg.solver.mode, &step_options(cfg))?;
            if cfg.output.trajectory {
                writer.text(TRAJECTORY_FILE, &abstract_trajectory_csv(Some(&w), dim))?;
            }
            writer.json(DIAGNOSTICS_FILE, &diagnostics(cfg, &grid, cfg.solver.mode, Some(&rep)))?;
            lines.push(format!("solved {} steps in {:?} mode", grid.steps(), cfg.solver.mode));
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct OracleFile {
    step: usize,
    t: f64,
    solver: Vec<f64>,
    brute_force: Vec<f64>,
    brute_force_violation: f64,
    spacing: Vec<f64>,
    distance: f64,
}

fn run_oracle(
    cfg: &ScenarioConfig,
    problem: &VhiProblem,
    writer: &mut Writer,
    lines: &mut Vec<String>,
) -> Result<(), CliError> {
    let oc = cfg.oracle.clone().unwrap_or_default();
    let grid = problem.grid;
    let step = ((oc.time / grid.dt()).round().max(0.0) as usize).min(grid.steps());
    let dim = problem.components.dim();
    let z = match &oc.history {
        Some(h) if h.len() == dim => nalgebra::DVector::from_vec(h.clone()),
        Some(_) => return Err(CliError::Config(format!("`oracle.history` needs {dim} entries"))),
        None => nalgebra::DVector::zeros(dim),
    };
    let inst = problem.static_instance(step, z);
    let solved = solve_static(&inst, None, 1e-12)?;
    let brute = brute_force_static(&inst, oc.spacing)?;
    let distance = problem.components.space.distance(&solved.solution, &brute.point);
    lines.push(format!("oracle distance {distance:.3e} at lattice spacing {:.3e}", oc.spacing));
    writer.json(
        ORACLE_FILE,
        &OracleFile {
            step,
            t: grid.node(step),
            solver: solved.solution.iter().copied().collect(),
            brute_force: brute.point.iter().copied().collect(),
            brute_force_violation: brute.violation,
            spacing: brute.spacing,
            distance,
        },
    )
}

fn assemble(cfg: &ScenarioConfig, grid: TimeGrid) -> Result<ContactProblem, CliError> {
    let m = cfg.mesh.as_ref().expect("validated");
    let mesh = build_mesh(m.width, m.height, m.nx, m.ny, m.tagging)?;
    let material = cfg.material.clone().unwrap_or_else(Material::default);
    let data = cfg.contact.clone().unwrap_or_else(ContactData::default);
    Ok(assemble_problem(mesh, material, data, grid)?)
}

fn run_contact(
    command: Command,
    cfg: &ScenarioConfig,
    writer: &mut Writer,
    lines: &mut Vec<String>,
) -> Result<(), CliError> {
    if command == Command::Oracle {
        return Err(CliError::Config(
            "`oracle` needs an abstract problem of dimension at most 3".into(),
        ));
    }
    let grid = effective_grid(cfg)?;
    let cp = assemble(cfg, grid)?;
    let asm = &cp.assembly;
    writer.json(
        WELLPOSEDNESS_FILE,
        &WellPosednessFile { report: &cp.report, constants: Some(&asm.constants), warnings: &cp.warnings },
    )?;
    lines.extend(cp.warnings.iter().map(|w| format!("warning: {w}")));
    gate(&cp.report, lines)?;
    if command == Command::Check {
        return Ok(());
    }
    let mode = cfg.solver.mode;
    if cfg.grid.steps == 0 {
        writer.text(TRAJECTORY_FILE, CONTACT_TRAJECTORY_HEADER)?;
        writer.text(export::TRACE_FILE, &export::trace_header())?;
        writer.json(DIAGNOSTICS_FILE, &diagnostics(cfg, &grid, mode, None))?;
        lines.push("zero-step run: nothing to solve".into());
        return Ok(());
    }
    let (w, rep) = solve_trajectory(&cp.problem, mode, &step_options(cfg))?;
    let solution = build_solution(asm, w, rule_for(mode, &cp.problem))?;
    if cfg.output.vtk {
        for n in 0..grid.len() {
            writer.text(&export::vtk_file_name(n), &export::vtk_snapshot(asm, &solution, n))?;
        }
    }
    writer.text(export::TRACE_FILE, &export::trace_csv(asm, &solution)?)?;
    if cfg.output.trajectory {
        let mut s = String::from(CONTACT_TRAJECTORY_HEADER);
        for n in 0..grid.len() {
            let w = asm.full(&solution.velocity.values[n]);
            let u = asm.full(&solution.displacement.values[n]);
            let t = num(grid.node(n));
            for k in 0..asm.mesh.node_count() {
                let row = [num(w[2 * k]), num(w[2 * k + 1]), num(u[2 * k]), num(u[2 * k + 1])];
                s.push_str(&format!("{t},{k},{}\n", row.join(",")));
            }
        }
        writer.text(TRAJECTORY_FILE, &s)?;
    }
    let residuals = summarize(asm, &solution)?;
    let (mut interior, mut reaction) = (0.0f64, 0.0f64);
    for n in 0..grid.len() {
        let d = divergence_residual(asm, &solution.stress[n], grid.node(n));
        interior = interior.max(d.interior);
        reaction = reaction.max(d.contact);
    }
    lines.push(format!(
        "solved {} steps in {:?} mode; max violation {:.2e}, complementarity {:.2e}, |sigma_tau| {:.6}",
        grid.steps(),
        mode,
        residuals.max_violation,
        residuals.max_complementarity,
        residuals.max_sigma_tau
    ));
    let mut diag = diagnostics(cfg, &grid, mode, Some(&rep));
    diag.contact = Some(ContactDiagnostics { residuals, max_interior_residual: interior, max_contact_reaction: reaction });
    writer.json(DIAGNOSTICS_FILE, &diag)
}
