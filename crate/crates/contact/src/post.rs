//! Stress and traction recovery and the contact law residuals.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use vhi_core::history::Quadrature;
use vhi_core::stepper::SteppingMode;
use vhi_core::{Result, Trajectory, VhiError, VhiProblem};

use crate::history::memory_values;
use crate::material::{add, Material, Sym};
use crate::model::Assembly;
use crate::sigma::{sigma_i_history, SigmaScheme};

/// Velocities below this norm count as sticking.
pub const SLIP_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeTraction {
    pub sigma_nu: f64,
    pub sigma_tau: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct ContactSolution {
    /// Quadrature used by the history terms of the solve.
    pub rule: Quadrature,
    pub velocity: Trajectory,
    pub displacement: Trajectory,
    pub internal: Vec<Vec<Sym>>,
    pub stress: Vec<Vec<Sym>>,
    /// Memory integral per contact node.
    pub memory: Vec<DVector<f64>>,
    pub tractions: Vec<Vec<NodeTraction>>,
}

/// The rule the stepper applies to the history in the given mode.
pub fn rule_for(mode: SteppingMode, problem: &VhiProblem) -> Quadrature {
    match mode {
        SteppingMode::Marching => Quadrature::LeftRectangle,
        SteppingMode::FixedPoint => problem.history.rule(),
    }
}

/// `sigma = A(eps(w)) + B(eps(u)) + sigma^I` per element.
pub fn recover_stress(material: &Material, strain_w: &[Sym], strain_u: &[Sym], internal: &[Sym]) -> Vec<Sym> {
    strain_w
        .iter()
        .zip(strain_u)
        .zip(internal)
        .map(|((ew, eu), si)| add(&add(&material.viscosity(ew), &material.elasticity(eu)), si))
        .collect()
}

/// Weak-form residual `(sigma, eps(.)) - <f, .>` over the full nodal dofs.
pub fn equilibrium_residual(assembly: &Assembly, stress: &[Sym], t: f64) -> DVector<f64> {
    assembly.stress_functional(stress) - assembly.load_full(t)
}

/// Nodal tractions on the contact nodes from the discrete reactions.
pub fn recover_tractions(assembly: &Assembly, stress: &[Sym], t: f64) -> Vec<NodeTraction> {
    let r = equilibrium_residual(assembly, stress, t);
    assembly
        .contact
        .iter()
        .map(|c| {
            let f = [r[2 * c.node] / c.weight, r[2 * c.node + 1] / c.weight];
            let sigma_nu = f[0] * c.normal[0] + f[1] * c.normal[1];
            NodeTraction { sigma_nu, sigma_tau: [f[0] - sigma_nu * c.normal[0], f[1] - sigma_nu * c.normal[1]] }
        })
        .collect()
}

/// Post-processes a velocity trajectory with the quadrature used to compute it.
pub fn build_solution(assembly: &Assembly, velocity: Trajectory, rule: Quadrature) -> Result<ContactSolution> {
    if velocity.grid != assembly.grid || velocity.dim() != assembly.dim() {
        return Err(VhiError::Dimension("velocity trajectory does not match the assembly".into()));
    }
    let len = velocity.grid.len();
    let displacement = crate::sigma::reconstruct_displacement_with(&velocity, &assembly.u0, rule);
    let strain_u: Vec<Vec<Sym>> = displacement.values.par_iter().map(|u| assembly.strains(u)).collect();
    let internal = if assembly.material.relaxation == 0.0 {
        vec![vec![[0.0; 3]; assembly.mesh.triangles.len()]; len]
    } else {
        sigma_i_history(&assembly.material, &strain_u, assembly.grid.dt(), SigmaScheme::Explicit)
    };
    let stress: Vec<Vec<Sym>> = (0..len)
        .into_par_iter()
        .map(|n| {
            let ew = assembly.strains(&velocity.values[n]);
            recover_stress(&assembly.material, &ew, &strain_u[n], &internal[n])
        })
        .collect();
    let memory = (0..len).map(|n| memory_values(assembly, rule, &velocity.values, n)).collect();
    let tractions = (0..len)
        .into_par_iter()
        .map(|n| recover_tractions(assembly, &stress[n], velocity.grid.node(n)))
        .collect();
    Ok(ContactSolution { rule, velocity, displacement, internal, stress, memory, tractions })
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeResidual {
    pub node: usize,
    pub w_nu: f64,
    pub g: f64,
    pub sigma_nu: f64,
    pub p_term: f64,
    pub memory_term: f64,
    /// `max(0, w_nu - g)`.
    pub violation: f64,
    /// `sigma_nu + p(w_nu) + memory`, which must be non-positive.
    pub sign: f64,
    pub complementarity: f64,
    pub sigma_tau_norm: f64,
    pub slip: f64,
    /// `|sigma_tau . w_tau / |w_tau| + friction|` on sliding nodes.
    pub alignment: Option<f64>,
}

pub fn contact_residuals(assembly: &Assembly, solution: &ContactSolution, n: usize) -> Result<Vec<NodeResidual>> {
    let tractions = solution
        .tractions
        .get(n)
        .ok_or_else(|| VhiError::Invalid(format!("no traction recovery at step {n}")))?;
    let w = assembly.full(&solution.velocity.values[n]);
    let g = assembly.data.gap_value();
    let mu = assembly.data.friction;
    Ok(assembly
        .contact
        .iter()
        .zip(tractions)
        .enumerate()
        .map(|(i, (c, tr))| {
            let wv = [w[2 * c.node], w[2 * c.node + 1]];
            let w_nu = wv[0] * c.normal[0] + wv[1] * c.normal[1];
            let w_tau = [wv[0] - w_nu * c.normal[0], wv[1] - w_nu * c.normal[1]];
            let slip = w_tau[0].hypot(w_tau[1]);
            let p_term = assembly.data.p(w_nu);
            let memory_term = solution.memory[n][i];
            let sign = tr.sigma_nu + p_term + memory_term;
            let complementarity = if g.is_finite() { ((w_nu - g) * sign).abs() } else { 0.0 };
            let alignment = (slip > SLIP_TOL)
                .then(|| ((tr.sigma_tau[0] * w_tau[0] + tr.sigma_tau[1] * w_tau[1]) / slip + mu).abs());
            NodeResidual {
                node: c.node,
                w_nu,
                g,
                sigma_nu: tr.sigma_nu,
                p_term,
                memory_term,
                violation: (w_nu - g).max(0.0),
                sign,
                complementarity,
                sigma_tau_norm: tr.sigma_tau[0].hypot(tr.sigma_tau[1]),
                slip,
                alignment,
            }
        })
        .collect())
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ResidualSummary {
    pub max_violation: f64,
    pub max_sign: f64,
    pub max_complementarity: f64,
    pub max_sigma_tau: f64,
    pub max_alignment: f64,
    pub sliding_nodes: usize,
    pub active_nodes: usize,
    /// Largest traction magnitude, the reference for complementarity.
    pub traction_scale: f64,
}

pub fn summarize(assembly: &Assembly, solution: &ContactSolution) -> Result<ResidualSummary> {
    let mut s = ResidualSummary::default();
    for n in 0..solution.velocity.values.len() {
        for r in contact_residuals(assembly, solution, n)? {
            s.max_violation = s.max_violation.max(r.violation);
            s.max_sign = s.max_sign.max(r.sign);
            s.max_complementarity = s.max_complementarity.max(r.complementarity);
            s.max_sigma_tau = s.max_sigma_tau.max(r.sigma_tau_norm);
            if let Some(a) = r.alignment {
                s.max_alignment = s.max_alignment.max(a);
                s.sliding_nodes += 1;
            }
            if r.g.is_finite() && (r.w_nu - r.g).abs() <= 1e-8 {
                s.active_nodes += 1;
            }
            s.traction_scale = s.traction_scale.max(r.sigma_nu.abs()).max(r.sigma_tau_norm);
        }
    }
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceResidual {
    /// Euclidean norm over free dofs away from the contact boundary.
    pub interior: f64,
    /// Euclidean norm over contact node dofs (the reaction).
    pub contact: f64,
}

pub fn divergence_residual(assembly: &Assembly, stress: &[Sym], t: f64) -> DivergenceResidual {
    let r = equilibrium_residual(assembly, stress, t);
    let mut interior = 0.0;
    let mut contact = 0.0;
    let clamped = assembly.mesh.tagged_nodes(crate::mesh::BoundaryTag::Gamma1);
    for node in (0..assembly.mesh.node_count()).filter(|n| clamped.binary_search(n).is_err()) {
        let e = r[2 * node].powi(2) + r[2 * node + 1].powi(2);
        if assembly.contact.iter().any(|c| c.node == node) {
            contact += e;
        } else {
            interior += e;
        }
    }
    DivergenceResidual { interior: interior.sqrt(), contact: contact.sqrt() }
}
