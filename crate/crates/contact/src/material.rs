//! Isotropic constitutive laws on symmetric 2x2 tensors stored as `[xx, yy, xy]`.

use serde::{Deserialize, Serialize};
use vhi_core::{Result, VhiError};

/// Symmetric tensor `[xx, yy, xy]` (tensor, not engineering, shear component).
pub type Sym = [f64; 3];

/// `a : b` for symmetric tensors.
pub fn contract(a: &Sym, b: &Sym) -> f64 {
    a[0] * b[0] + a[1] * b[1] + 2.0 * a[2] * b[2]
}

pub fn norm(a: &Sym) -> f64 {
    contract(a, a).sqrt()
}

pub fn add(a: &Sym, b: &Sym) -> Sym {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: &Sym, s: f64) -> Sym {
    [s * a[0], s * a[1], s * a[2]]
}

/// Viscosity `A(e) = 2 theta e + zeta tr(e) I`, elasticity `B(e) = 2 mu e + lambda tr(e) I`
/// and relaxation `G(sigma, e) = -k (sigma - r B(e))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub theta: f64,
    #[serde(default)]
    pub zeta: f64,
    pub mu: f64,
    #[serde(default)]
    pub lambda: f64,
    /// Relaxation rate `k`.
    #[serde(default)]
    pub relaxation: f64,
    /// Fraction `r` of the elastic stress the internal stress relaxes toward.
    #[serde(default = "default_target")]
    pub relaxation_target: f64,
}

fn default_target() -> f64 {
    0.5
}

impl Default for Material {
    fn default() -> Self {
        Self { theta: 1.0, zeta: 0.5, mu: 1.0, lambda: 1.0, relaxation: 1.0, relaxation_target: default_target() }
    }
}

fn isotropic(two_shear: f64, bulk: f64, e: &Sym) -> Sym {
    let tr = e[0] + e[1];
    [two_shear * e[0] + bulk * tr, two_shear * e[1] + bulk * tr, two_shear * e[2]]
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta, self.zeta, self.mu, self.lambda, self.relaxation, self.relaxation_target]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(VhiError::Invalid("material constants must be finite".into()));
        }
        if !(self.theta > 0.0) {
            return Err(VhiError::Invalid("material.theta must be positive".into()));
        }
        for (name, v) in [
            ("material.zeta", self.zeta),
            ("material.mu", self.mu),
            ("material.lambda", self.lambda),
            ("material.relaxation", self.relaxation),
            ("material.relaxation_target", self.relaxation_target),
        ] {
            if v < 0.0 {
                return Err(VhiError::Invalid(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn viscosity(&self, e: &Sym) -> Sym {
        isotropic(2.0 * self.theta, self.zeta, e)
    }

    pub fn elasticity(&self, e: &Sym) -> Sym {
        isotropic(2.0 * self.mu, self.lambda, e)
    }

    pub fn relaxation_rate(&self, sigma: &Sym, e: &Sym) -> Sym {
        let target = scale(&self.elasticity(e), self.relaxation_target);
        [
            -self.relaxation * (sigma[0] - target[0]),
            -self.relaxation * (sigma[1] - target[1]),
            -self.relaxation * (sigma[2] - target[2]),
        ]
    }

    /// Strong monotonicity modulus of the viscosity law.
    pub fn m_a(&self) -> f64 {
        2.0 * self.theta
    }

    /// Lipschitz constant of the viscosity law (`|tr(e) I| <= 2 |e|` in 2D).
    pub fn l_a(&self) -> f64 {
        2.0 * self.theta + 2.0 * self.zeta
    }

    pub fn l_b(&self) -> f64 {
        2.0 * self.mu + 2.0 * self.lambda
    }

    /// Lipschitz constant of `G` for the norm `|sigma| + |e|`.
    pub fn l_g(&self) -> f64 {
        self.relaxation * 1f64.max(self.relaxation_target * self.l_b())
    }

    /// Constant `c` with `|sigma^I(u1)(t) - sigma^I(u2)(t)| <= c int_0^t |u1 - u2|`
    /// (Gronwall applied to the internal stress recursion).
    pub fn sigma_constant(&self, horizon: f64) -> f64 {
        let l_g = self.l_g();
        l_g * (1.0 + self.l_b()) * (l_g * horizon).exp()
    }
}
