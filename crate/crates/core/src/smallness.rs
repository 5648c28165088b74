//! Smallness conditions guaranteeing uniqueness and contraction.

use serde::Serialize;

use crate::error::{Result, VhiError};
use crate::problem::{Components, VhiProblem};

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct SmallnessInputs {
    pub m_a: Option<f64>,
    pub alpha_a: Option<f64>,
    pub alpha_phi: Option<f64>,
    pub m_j: Option<f64>,
    pub m_norm: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; positive when the strict inequality holds.
    pub margin: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn strict(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.to_string(), lhs, rhs, margin: lhs - rhs, holds: lhs > rhs }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WellPosednessReport {
    pub checks: Vec<InequalityCheck>,
    /// Contraction rate `(alpha_phi + m_J ||M||^2) / m_A`.
    pub q: f64,
    /// Continuous-dependence constant `1 / (m_A - alpha_phi - m_J ||M||^2)`, when positive.
    pub c: Option<f64>,
    pub pass: bool,
    pub inputs: SmallnessInputs,
}

impl WellPosednessReport {
    pub fn failing(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.holds).map(|c| c.name.clone()).collect()
    }
}

pub const CONTRACTION_CHECK: &str = "m_A > alpha_phi + m_J*||M||^2";
pub const COERCIVITY_CHECK: &str = "alpha_A > 2*m_J*||M||^2";

pub fn check_smallness_constants(inputs: SmallnessInputs) -> Result<WellPosednessReport> {
    let get = |v: Option<f64>, name: &'static str| -> Result<f64> {
        match v {
            Some(x) if x.is_finite() => Ok(x),
            Some(_) => Err(VhiError::NonFinite(name)),
            None => Err(VhiError::MissingConstant(name)),
        }
    };
    let m_a = get(inputs.m_a, "m_A")?;
    let alpha_a = get(inputs.alpha_a, "alpha_A")?;
    let alpha_phi = get(inputs.alpha_phi, "alpha_phi")?;
    let m_j = get(inputs.m_j, "m_J")?;
    let m_norm = get(inputs.m_norm, "||M||")?;
    let nonsmooth = m_j * m_norm * m_norm;
    let checks = vec![
        InequalityCheck::strict(CONTRACTION_CHECK, m_a, alpha_phi + nonsmooth),
        InequalityCheck::strict(COERCIVITY_CHECK, alpha_a, 2.0 * nonsmooth),
    ];
    let gap = m_a - alpha_phi - nonsmooth;
    let pass = m_a > 0.0 && checks.iter().all(|c| c.holds);
    Ok(WellPosednessReport {
        checks,
        q: (alpha_phi + nonsmooth) / m_a,
        c: (gap > 0.0).then(|| 1.0 / gap),
        pass,
        inputs,
    })
}

pub fn smallness_inputs(c: &Components) -> SmallnessInputs {
    let a = c.operator.constants();
    SmallnessInputs {
        m_a: a.m_a,
        alpha_a: a.alpha_a,
        alpha_phi: c.bifunction.alpha(),
        m_j: c.functional.constants().m_j,
        m_norm: Some(c.m_norm.value),
    }
}

pub fn check_components(c: &Components) -> Result<WellPosednessReport> {
    check_smallness_constants(smallness_inputs(c))
}

pub fn check_smallness(problem: &VhiProblem) -> Result<WellPosednessReport> {
    check_components(&problem.components)
}
