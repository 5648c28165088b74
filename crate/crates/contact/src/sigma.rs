//! Internal stress `sigma^I` and the displacement reconstruction.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use vhi_core::history::Quadrature;
use vhi_core::Trajectory;

use crate::material::{add, norm, scale, Material, Sym};
use crate::model::cumulative;

/// `sigma^I` and the strain of the displacement at one node of the time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InternalState {
    pub sigma: Vec<Sym>,
    pub strain: Vec<Sym>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaScheme {
    /// Uses the state at `t_{n-1}` only.
    #[default]
    Explicit,
    /// Solves `s = s_prev + dt G(B e_n + s, e_n)` by fixed-point iteration.
    Implicit,
}

fn rate(material: &Material, sigma: &Sym, strain: &Sym) -> Sym {
    material.relaxation_rate(&add(&material.elasticity(strain), sigma), strain)
}

/// `sigma^I_n = sigma^I_{n-1} + dt G(B eps(u_{n-1}) + sigma^I_{n-1}, eps(u_{n-1}))`.
pub fn sigma_i_step(state: &InternalState, material: &Material, dt: f64) -> Vec<Sym> {
    state
        .sigma
        .iter()
        .zip(&state.strain)
        .map(|(s, e)| add(s, &scale(&rate(material, s, e), dt)))
        .collect()
}

/// Backward step with the strain at `t_n`. Contracts when `dt L_G < 1`.
pub fn sigma_i_step_implicit(previous: &[Sym], strain: &[Sym], material: &Material, dt: f64) -> Vec<Sym> {
    previous
        .iter()
        .zip(strain)
        .map(|(prev, e)| {
            let mut s = *prev;
            for _ in 0..500 {
                let next = add(prev, &scale(&rate(material, &s, e), dt));
                let diff = norm(&add(&next, &scale(&s, -1.0)));
                s = next;
                if diff <= 1e-15 * (1.0 + norm(&s)) {
                    break;
                }
            }
            s
        })
        .collect()
}

/// `sigma^I` at every node given per-node element strains of the displacement.
pub fn sigma_i_history(material: &Material, strains: &[Vec<Sym>], dt: f64, scheme: SigmaScheme) -> Vec<Vec<Sym>> {
    let Some(first) = strains.first() else {
        return Vec::new();
    };
    let mut out = vec![vec![[0.0; 3]; first.len()]];
    for n in 1..strains.len() {
        let prev = &out[n - 1];
        let next = match scheme {
            SigmaScheme::Explicit => {
                let state = InternalState { sigma: prev.clone(), strain: strains[n - 1].clone() };
                sigma_i_step(&state, material, dt)
            }
            SigmaScheme::Implicit => sigma_i_step_implicit(prev, &strains[n], material, dt),
        };
        out.push(next);
    }
    out
}

/// `u(t_n) = u0 + int_0^{t_n} w` by the cumulative trapezoid rule.
pub fn reconstruct_displacement(w: &Trajectory, u0: &DVector<f64>) -> Trajectory {
    reconstruct_displacement_with(w, u0, Quadrature::Trapezoid)
}

pub fn reconstruct_displacement_with(w: &Trajectory, u0: &DVector<f64>, rule: Quadrature) -> Trajectory {
    let values = cumulative(rule, w.grid.dt(), u0, &w.values, w.grid.len());
    Trajectory { grid: w.grid, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vhi_core::TimeGrid;

    #[test]
    fn zero_relaxation_keeps_internal_stress_zero() {
        let m = Material { relaxation: 0.0, ..Material::default() };
        let strains = vec![vec![[0.3, -0.1, 0.2]; 4]; 11];
        let h = sigma_i_history(&m, &strains, 0.1, SigmaScheme::Explicit);
        assert!(h.iter().flatten().all(|s| *s == [0.0; 3]));
    }

    #[test]
    fn forced_elastic_stress_relaxes_exponentially() {
        // G = -k sigma, B e = E0: sigma^I(t) = -E0 (1 - exp(-k t))
        let m = Material { relaxation: 2.0, relaxation_target: 0.0, mu: 0.5, lambda: 0.0, ..Material::default() };
        let e = [0.4, -0.2, 0.1];
        let e0 = m.elasticity(&e);
        let steps = 4000;
        let dt = 1.0 / steps as f64;
        let h = sigma_i_history(&m, &vec![vec![e]; steps + 1], dt, SigmaScheme::Explicit);
        for (n, s) in h.iter().enumerate().step_by(400) {
            let t = n as f64 * dt;
            let exact = scale(&e0, -(1.0 - (-2.0 * t).exp()));
            assert!(norm(&add(&s[0], &scale(&exact, -1.0))) < 2.0 * dt, "t={t}");
        }
        let hi = sigma_i_history(&m, &vec![vec![e]; steps + 1], dt, SigmaScheme::Implicit);
        let exact = scale(&e0, -(1.0 - (-2.0f64).exp()));
        assert!(norm(&add(&hi[steps][0], &scale(&exact, -1.0))) < 2.0 * dt);
    }

    #[test]
    fn reconstruction_is_exact_for_affine_velocity() {
        let grid = TimeGrid::new(2.0, 7).unwrap();
        let u0 = DVector::from_vec(vec![0.5, -1.0]);
        let zero = reconstruct_displacement(&Trajectory::constant(grid, DVector::zeros(2)), &u0);
        assert!(zero.values.iter().all(|u| *u == u0));
        let c = DVector::from_vec(vec![2.0, 3.0]);
        let u = reconstruct_displacement(&Trajectory::constant(grid, c.clone()), &u0);
        for (n, t) in grid.nodes().enumerate() {
            assert!((&u.values[n] - (&u0 + &c * t)).amax() < 1e-12);
        }
        let w = Trajectory::from_fn(grid, |t| DVector::from_vec(vec![t, 0.0]));
        let u = reconstruct_displacement(&w, &u0);
        assert_eq!(u.values[0], u0);
        for (n, t) in grid.nodes().enumerate() {
            assert!((u.values[n][0] - (0.5 + t * t / 2.0)).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn discrete_internal_stress_is_history_lipschitz(
            seed in 0u64..1000,
            k in 0.1f64..3.0,
            r in 0.0f64..1.0,
        ) {
            use rand::{Rng, SeedableRng};
            let m = Material { relaxation: k, relaxation_target: r, ..Material::default() };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let steps = 30;
            let dt = 1.0 / steps as f64;
            let mut sample = || -> Vec<Vec<Sym>> {
                (0..=steps)
                    .map(|_| vec![[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]])
                    .collect()
            };
            let (e1, e2) = (sample(), sample());
            let s1 = sigma_i_history(&m, &e1, dt, SigmaScheme::Explicit);
            let s2 = sigma_i_history(&m, &e2, dt, SigmaScheme::Explicit);
            let c = m.sigma_constant(1.0);
            let mut integral = 0.0;
            for n in 1..=steps {
                integral += dt * norm(&add(&e1[n - 1][0], &scale(&e2[n - 1][0], -1.0)));
                let diff = norm(&add(&s1[n][0], &scale(&s2[n][0], -1.0)));
                proptest::prop_assert!(diff <= c * integral * (1.0 + 1e-12));
            }
        }
    }
}
