//! The three history contributions acting on the velocity.

use std::sync::Arc;

use nalgebra::DVector;
use vhi_core::history::{HistoryMap, Quadrature};
use vhi_core::TimeGrid;

use crate::model::Assembly;
use crate::sigma::{sigma_i_history, SigmaScheme};

/// `<S1 w, v> = (B eps(R w), eps(v))`.
pub struct ElasticHistory {
    assembly: Arc<Assembly>,
}

impl ElasticHistory {
    pub fn new(assembly: Arc<Assembly>) -> Self {
        Self { assembly }
    }
}

impl HistoryMap for ElasticHistory {
    fn apply(&self, _: &TimeGrid, rule: Quadrature, values: &[DVector<f64>], n: usize) -> DVector<f64> {
        let u = self.assembly.displacements(rule, values, n + 1);
        &self.assembly.elasticity * &u[n]
    }

    fn apply_all(&self, grid: &TimeGrid, rule: Quadrature, values: &[DVector<f64>]) -> Vec<DVector<f64>> {
        self.assembly
            .displacements(rule, values, grid.len())
            .iter()
            .map(|u| &self.assembly.elasticity * u)
            .collect()
    }
}

/// `<S2 w, v> = (sigma^I(R w), eps(v))` with the explicit internal stress recursion.
pub struct InternalHistory {
    assembly: Arc<Assembly>,
}

impl InternalHistory {
    pub fn new(assembly: Arc<Assembly>) -> Self {
        Self { assembly }
    }

    /// `sigma^I_0..sigma^I_{count-1}` as `V*` elements. `sigma^I_n` reads the
    /// displacement up to `t_{n-1}`, so the last strain is padded.
    fn internal_stress(&self, rule: Quadrature, values: &[DVector<f64>], count: usize) -> Vec<DVector<f64>> {
        let a = &self.assembly;
        if a.material.relaxation == 0.0 || count == 0 {
            return vec![DVector::zeros(a.dim()); count];
        }
        let mut strains: Vec<_> = a.displacements(rule, values, count - 1).iter().map(|u| a.strains(u)).collect();
        strains.push(strains.last().cloned().unwrap_or_else(|| a.strains(&a.u0)));
        sigma_i_history(&a.material, &strains, a.grid.dt(), SigmaScheme::Explicit)
            .iter()
            .map(|s| a.restrict(&a.stress_functional(s)))
            .collect()
    }
}

impl HistoryMap for InternalHistory {
    fn apply(&self, _: &TimeGrid, rule: Quadrature, values: &[DVector<f64>], n: usize) -> DVector<f64> {
        self.internal_stress(rule, values, n + 1).swap_remove(n)
    }

    fn apply_all(&self, grid: &TimeGrid, rule: Quadrature, values: &[DVector<f64>]) -> Vec<DVector<f64>> {
        self.internal_stress(rule, values, grid.len())
    }
}

/// `<S3 w, v> = sum_i w_i (int_0^t b(t - s) w_nu,i^+(s) ds) v_nu,i`.
pub struct MemoryHistory {
    assembly: Arc<Assembly>,
}

impl MemoryHistory {
    pub fn new(assembly: Arc<Assembly>) -> Self {
        Self { assembly }
    }
}

/// Memory integral at each contact node, at time node `n`.
pub fn memory_values(assembly: &Assembly, rule: Quadrature, values: &[DVector<f64>], n: usize) -> DVector<f64> {
    let nc = assembly.contact.len();
    let mut acc = DVector::zeros(nc);
    let kernel = assembly.data.memory;
    if kernel.amplitude == 0.0 || nc == 0 {
        return acc;
    }
    let grid = &assembly.grid;
    let t = grid.node(n);
    for (m, w) in values.iter().enumerate().take(rule.reads(n)) {
        let weight = rule.weight(grid.dt(), m, n);
        if weight == 0.0 {
            continue;
        }
        let b = kernel.eval(t - grid.node(m));
        let wn = assembly.normal_velocity(w);
        for i in 0..nc {
            acc[i] += weight * b * wn[i].max(0.0);
        }
    }
    acc
}

impl HistoryMap for MemoryHistory {
    fn apply(&self, _: &TimeGrid, rule: Quadrature, values: &[DVector<f64>], n: usize) -> DVector<f64> {
        let a = &self.assembly;
        let mem = memory_values(a, rule, values, n);
        let q = DVector::from_fn(a.contact.len(), |i, _| a.contact[i].weight * mem[i]);
        a.normal_dual(&q)
    }
}
