//! Contact conditions, loads and initial state.

use serde::{Deserialize, Serialize};
use vhi_core::{Result, VhiError};

/// `b(t) = amplitude * exp(-decay t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryKernel {
    pub amplitude: f64,
    #[serde(default)]
    pub decay: f64,
}

impl MemoryKernel {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-self.decay * t).exp()
    }

    /// `sup |b|` on `[0, T]`.
    pub fn sup(&self) -> f64 {
        self.amplitude.abs()
    }
}

/// Which velocity components survive on contact nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofVariant {
    /// Only the clamped part is removed.
    #[default]
    ClampedOnly,
    /// Normal velocity on the contact part is removed as well.
    NormalClamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactData {
    /// `p(r) = normal_compliance * max(0, r)`.
    #[serde(default)]
    pub normal_compliance: f64,
    /// Bound `g` on the normal velocity; absent means unconstrained.
    #[serde(default)]
    pub gap: Option<f64>,
    #[serde(default)]
    pub memory: MemoryKernel,
    /// `j_tau(xi) = friction * |xi_tau|`.
    #[serde(default = "default_friction")]
    pub friction: f64,
    #[serde(default)]
    pub body_force: [f64; 2],
    /// Traction on the top edge when it belongs to the loaded part.
    #[serde(default)]
    pub top_traction: [f64; 2],
    /// Traction on the right edge when it belongs to the loaded part.
    #[serde(default)]
    pub right_traction: [f64; 2],
    /// Piecewise-linear `(t, factor)` table multiplying all loads.
    #[serde(default)]
    pub load_schedule: Vec<[f64; 2]>,
    /// `u0(x, y) = x * initial_shear`, which vanishes on the left edge.
    #[serde(default)]
    pub initial_shear: [f64; 2],
    #[serde(default)]
    pub variant: DofVariant,
}

fn default_friction() -> f64 {
    1.0
}

impl Default for ContactData {
    fn default() -> Self {
        Self {
            normal_compliance: 0.0,
            gap: None,
            memory: MemoryKernel::default(),
            friction: default_friction(),
            body_force: [0.0; 2],
            top_traction: [0.0; 2],
            right_traction: [0.0; 2],
            load_schedule: Vec::new(),
            initial_shear: [0.0; 2],
            variant: DofVariant::ClampedOnly,
        }
    }
}

impl ContactData {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(VhiError::Invalid(msg.to_string()));
        if !(self.normal_compliance >= 0.0) || !self.normal_compliance.is_finite() {
            return bad("contact.normal_compliance must be finite and non-negative");
        }
        if let Some(g) = self.gap {
            if !(g > 0.0) {
                return bad("contact.gap must be positive");
            }
        }
        if !(self.friction >= 0.0) || !self.friction.is_finite() {
            return bad("contact.friction must be finite and non-negative");
        }
        if !self.memory.amplitude.is_finite() || !(self.memory.decay >= 0.0) || !self.memory.decay.is_finite() {
            return bad("contact.memory needs a finite amplitude and a non-negative decay");
        }
        let vectors = [self.body_force, self.top_traction, self.right_traction, self.initial_shear];
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return bad("contact loads must be finite");
        }
        if self.load_schedule.iter().flatten().any(|x| !x.is_finite())
            || self.load_schedule.windows(2).any(|w| w[1][0] <= w[0][0])
        {
            return bad("contact.load_schedule must have strictly increasing finite times");
        }
        Ok(())
    }

    pub fn p(&self, r: f64) -> f64 {
        self.normal_compliance * r.max(0.0)
    }

    /// Load factor at time `t`; constant extrapolation outside the table.
    pub fn load_factor(&self, t: f64) -> f64 {
        let s = &self.load_schedule;
        match s.len() {
            0 => 1.0,
            1 => s[0][1],
            _ => {
                if t <= s[0][0] {
                    return s[0][1];
                }
                for w in s.windows(2) {
                    if t <= w[1][0] {
                        let a = (t - w[0][0]) / (w[1][0] - w[0][0]);
                        return w[0][1] + a * (w[1][1] - w[0][1]);
                    }
                }
                s[s.len() - 1][1]
            }
        }
    }

    pub fn gap_value(&self) -> f64 {
        self.gap.unwrap_or(f64::INFINITY)
    }
}
