//! P1 assembly of the contact problem in the velocity unknown.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SMatrix};
use rayon::prelude::*;
use serde::Serialize;
use vhi_core::bifunction::ConvexBifunction;
use vhi_core::compact::CompactMap;
use vhi_core::constraint::ConstraintSet;
use vhi_core::functional::{NonsmoothFunctional, NormSum, ZeroFunctional};
use vhi_core::history::{history_sum, HistoryOperator, Quadrature};
use vhi_core::operator::AffineOperator;
use vhi_core::qp::NormTerm;
use vhi_core::smallness::{check_smallness_constants, InequalityCheck, SmallnessInputs, WellPosednessReport};
use vhi_core::{ComponentsBuilder, InnerProductSpace, Result, TimeGrid, Trajectory, VhiError, VhiProblem};

use crate::data::{ContactData, DofVariant};
use crate::history::{ElasticHistory, InternalHistory, MemoryHistory};
use crate::material::{Material, Sym};
use crate::mesh::{BoundaryTag, Mesh};

/// Maps the six element dofs to the strain `[xx, yy, xy]`.
pub type StrainMatrix = SMatrix<f64, 3, 6>;

pub const CONTRACTION_LABEL: &str = "m_A > max{1, L_P} + alpha_j*||gamma||^2";
pub const COERCIVITY_LABEL: &str = "alpha_A > 2*alpha_j*||gamma||^2";

#[derive(Clone, Debug, Serialize)]
pub struct ContactNode {
    pub node: usize,
    /// Lumped boundary weight.
    pub weight: f64,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelConstants {
    pub m_a: f64,
    pub l_b: f64,
    pub l_g: f64,
    /// Gronwall constant of the internal stress map.
    pub sigma_c: f64,
    pub gamma_norm: f64,
    pub l_p: f64,
    pub alpha_phi: f64,
    /// Relaxed monotonicity constant of `j_tau`; zero for the norm.
    pub alpha_j: f64,
    pub l_s1: f64,
    pub l_s2: f64,
    pub l_s3: f64,
    pub l_s: f64,
}

/// Discrete operators shared by the history maps and post-processing.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub mesh: Mesh,
    pub material: Material,
    pub data: ContactData,
    pub grid: TimeGrid,
    /// Full nodal dofs (`2 node + component`) from `V` coordinates.
    pub prolong: DMatrix<f64>,
    pub strain: Vec<StrainMatrix>,
    pub areas: Vec<f64>,
    pub gram: DMatrix<f64>,
    pub viscosity: DMatrix<f64>,
    pub elasticity: DMatrix<f64>,
    pub contact: Vec<ContactNode>,
    /// Trace onto the contact node dofs, `2 n_c x dim V`.
    pub trace: DMatrix<f64>,
    /// Normal trace `v -> (nu_i . v(x_i))_i`, `n_c x dim V`.
    pub normal_trace: DMatrix<f64>,
    pub u0: DVector<f64>,
    pub constants: ModelConstants,
}

pub struct ContactProblem {
    pub problem: VhiProblem,
    pub assembly: Arc<Assembly>,
    pub report: WellPosednessReport,
    pub warnings: Vec<String>,
}

fn element_strain_matrix(grads: &[[f64; 2]; 3]) -> StrainMatrix {
    let mut b = StrainMatrix::zeros();
    for (k, g) in grads.iter().enumerate() {
        b[(0, 2 * k)] = g[0];
        b[(1, 2 * k + 1)] = g[1];
        b[(2, 2 * k)] = 0.5 * g[1];
        b[(2, 2 * k + 1)] = 0.5 * g[0];
    }
    b
}

fn local_dofs(tri: &[usize; 3]) -> [usize; 6] {
    [2 * tri[0], 2 * tri[0] + 1, 2 * tri[1], 2 * tri[1] + 1, 2 * tri[2], 2 * tri[2] + 1]
}

/// Global `(eps, eps)` and `(tr eps, tr eps)` matrices over all nodal dofs.
pub fn assemble_full(mesh: &Mesh) -> (Vec<StrainMatrix>, Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let w = SMatrix::<f64, 3, 3>::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, 2.0));
    let local: Vec<(StrainMatrix, f64, SMatrix<f64, 6, 6>, SMatrix<f64, 6, 6>)> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let b = element_strain_matrix(&mesh.shape_gradients(t));
            let area = mesh.area(t);
            let g = b.transpose() * w * b * area;
            let tr = b.row(0) + b.row(1);
            let d = tr.transpose() * tr * area;
            (b, area, g, d)
        })
        .collect();
    let n = 2 * mesh.node_count();
    let mut gram = DMatrix::zeros(n, n);
    let mut trace = DMatrix::zeros(n, n);
    for (t, (_, _, g, d)) in local.iter().enumerate() {
        let dofs = local_dofs(&mesh.triangles[t]);
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                gram[(i, j)] += g[(a, b)];
                trace[(i, j)] += d[(a, b)];
            }
        }
    }
    let strain = local.iter().map(|l| l.0).collect();
    let areas = local.iter().map(|l| l.1).collect();
    (strain, areas, gram, trace)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl Assembly {
    pub fn dim(&self) -> usize {
        self.prolong.ncols()
    }

    pub fn full(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.prolong * v
    }

    pub fn restrict(&self, full: &DVector<f64>) -> DVector<f64> {
        self.prolong.tr_mul(full)
    }

    /// Per-element strain of a field given in `V` coordinates.
    pub fn strains(&self, v: &DVector<f64>) -> Vec<Sym> {
        let full = self.full(v);
        self.strains_full(&full)
    }

    pub fn strains_full(&self, full: &DVector<f64>) -> Vec<Sym> {
        self.mesh
            .triangles
            .iter()
            .zip(&self.strain)
            .map(|(tri, b)| {
                let dofs = local_dofs(tri);
                let loc = SMatrix::<f64, 6, 1>::from_fn(|i, _| full[dofs[i]]);
                let e = b * loc;
                [e[0], e[1], e[2]]
            })
            .collect()
    }

    /// `v -> sum_e |e| sigma_e : eps_e(v)` as a vector over the full nodal dofs.
    pub fn stress_functional(&self, sigma: &[Sym]) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.mesh.node_count());
        for ((tri, b), (s, area)) in self.mesh.triangles.iter().zip(&self.strain).zip(sigma.iter().zip(&self.areas)) {
            let weighted = nalgebra::Vector3::new(s[0], s[1], 2.0 * s[2]) * *area;
            let loc = b.transpose() * weighted;
            for (k, &i) in local_dofs(tri).iter().enumerate() {
                out[i] += loc[k];
            }
        }
        out
    }

    /// Load over the full nodal dofs: body force by one-point quadrature,
    /// edge tractions exactly for P1 test functions.
    pub fn load_full(&self, t: f64) -> DVector<f64> {
        let d = &self.data;
        let factor = d.load_factor(t);
        let mut f = DVector::zeros(2 * self.mesh.node_count());
        if factor == 0.0 {
            return f;
        }
        for (tri, area) in self.mesh.triangles.iter().zip(&self.areas) {
            for &n in tri {
                f[2 * n] += factor * d.body_force[0] * area / 3.0;
                f[2 * n + 1] += factor * d.body_force[1] * area / 3.0;
            }
        }
        for e in self.mesh.edges.iter().filter(|e| e.tag == BoundaryTag::Gamma2) {
            let traction = match e.side {
                crate::mesh::Side::Top => d.top_traction,
                crate::mesh::Side::Right => d.right_traction,
                _ => [0.0, 0.0],
            };
            for n in e.nodes {
                f[2 * n] += factor * traction[0] * e.length / 2.0;
                f[2 * n + 1] += factor * traction[1] * e.length / 2.0;
            }
        }
        f
    }

    pub fn load(&self, t: f64) -> DVector<f64> {
        self.restrict(&self.load_full(t))
    }

    pub fn normal_velocity(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.normal_trace * v
    }

    /// `V*` element `v -> sum_i q_i nu_i . v(x_i)`.
    pub fn normal_dual(&self, q: &DVector<f64>) -> DVector<f64> {
        self.normal_trace.tr_mul(q)
    }

    /// Damped response `<P(u), v> = sum_i w_i p(u_nu,i) v_nu,i`.
    pub fn damping(&self, u: &DVector<f64>) -> DVector<f64> {
        let un = self.normal_velocity(u);
        let q = DVector::from_fn(self.contact.len(), |i, _| self.contact[i].weight * self.data.p(un[i]));
        self.normal_dual(&q)
    }

    /// Displacements `u_0..u_{count-1}` from velocities by the cumulative rule.
    pub fn displacements(&self, rule: Quadrature, values: &[DVector<f64>], count: usize) -> Vec<DVector<f64>> {
        cumulative(rule, self.grid.dt(), &self.u0, values, count)
    }
}

/// `u_m = u0 + sum_k rule.weight(dt, k, m) w_k` for `m < count`.
pub fn cumulative(
    rule: Quadrature,
    dt: f64,
    u0: &DVector<f64>,
    values: &[DVector<f64>],
    count: usize,
) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(u0.clone());
    for m in 1..count {
        let step = match rule {
            Quadrature::LeftRectangle => &values[m - 1] * dt,
            Quadrature::Trapezoid => (&values[m - 1] + &values[m]) * (0.5 * dt),
        };
        let next = &out[m - 1] + step;
        out.push(next);
    }
    out
}

/// `phi(z, u, v) = <z + P(u), v>` with `alpha = max(1, L_P)`.
pub struct ContactBifunction {
    assembly: Arc<Assembly>,
    alpha: f64,
}

impl ConvexBifunction for ContactBifunction {
    fn dim(&self) -> usize {
        self.assembly.dim()
    }

    fn value(&self, z: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (z + self.assembly.damping(u)).dot(v)
    }

    fn subgradient(&self, z: &DVector<f64>, u: &DVector<f64>, _: &DVector<f64>) -> DVector<f64> {
        z + self.assembly.damping(u)
    }

    fn alpha(&self) -> Option<f64> {
        Some(self.alpha)
    }

    fn linear_coefficient(&self, z: &DVector<f64>, u: &DVector<f64>) -> Option<DVector<f64>> {
        Some(z + self.assembly.damping(u))
    }
}

/// Assembles the velocity formulation on `grid`.
pub fn assemble_problem(mesh: Mesh, material: Material, data: ContactData, grid: TimeGrid) -> Result<ContactProblem> {
    material.validate()?;
    data.validate()?;
    if mesh.measure(BoundaryTag::Gamma1) <= 0.0 {
        return Err(VhiError::Invalid("the clamped boundary part has zero measure".into()));
    }
    let mut warnings = Vec::new();
    let (strain, areas, gram_full, trace_full) = assemble_full(&mesh);

    let clamped = mesh.tagged_nodes(BoundaryTag::Gamma1);
    let weights = mesh.lumped_weights(BoundaryTag::Gamma3);
    let contact: Vec<ContactNode> = mesh
        .tagged_nodes(BoundaryTag::Gamma3)
        .into_iter()
        .filter(|n| clamped.binary_search(n).is_err())
        .map(|node| {
            let normal = mesh.nodal_normal(node, BoundaryTag::Gamma3).expect("tagged node has a normal");
            ContactNode { node, weight: weights[node], normal, tangent: [-normal[1], normal[0]] }
        })
        .collect();
    if contact.is_empty() {
        warnings.push("no contact boundary: the model reduces to unconstrained viscoelasticity".to_string());
    }

    let mut columns: Vec<(usize, [f64; 2])> = Vec::new();
    for node in 0..mesh.node_count() {
        if clamped.binary_search(&node).is_ok() {
            continue;
        }
        match contact.iter().find(|c| c.node == node) {
            Some(c) if data.variant == DofVariant::NormalClamp => columns.push((node, c.tangent)),
            _ => {
                columns.push((node, [1.0, 0.0]));
                columns.push((node, [0.0, 1.0]));
            }
        }
    }
    let n_full = 2 * mesh.node_count();
    let mut prolong = DMatrix::zeros(n_full, columns.len());
    for (j, (node, dir)) in columns.iter().enumerate() {
        prolong[(2 * node, j)] = dir[0];
        prolong[(2 * node + 1, j)] = dir[1];
    }

    let gram = symmetrize(prolong.transpose() * &gram_full * &prolong);
    let trace_v = prolong.transpose() * &trace_full * &prolong;
    let viscosity = symmetrize(&gram * (2.0 * material.theta) + &trace_v * material.zeta);
    let elasticity = symmetrize(&gram * (2.0 * material.mu) + &trace_v * material.lambda);

    let n = columns.len();
    let nc = contact.len();
    let mut trace = DMatrix::zeros(2 * nc, n);
    let mut normal_trace = DMatrix::zeros(nc, n);
    for (i, c) in contact.iter().enumerate() {
        for j in 0..n {
            let (a, b) = (prolong[(2 * c.node, j)], prolong[(2 * c.node + 1, j)]);
            trace[(2 * i, j)] = a;
            trace[(2 * i + 1, j)] = b;
            normal_trace[(i, j)] = c.normal[0] * a + c.normal[1] * b;
        }
    }

    let u0_full = DVector::from_fn(n_full, |k, _| mesh.nodes[k / 2][0] * data.initial_shear[k % 2]);
    let pinv = prolong.transpose() * &prolong;
    let u0 = pinv
        .cholesky()
        .ok_or_else(|| VhiError::Invalid("empty velocity space".into()))?
        .solve(&prolong.tr_mul(&u0_full));
    if (&prolong * &u0 - &u0_full).amax() > 1e-12 * (1.0 + u0_full.amax()) {
        return Err(VhiError::Invalid("initial displacement violates the kinematic constraints".into()));
    }

    let space = InnerProductSpace::new(gram.clone())?;
    let (space_x, compact) = if nc == 0 {
        (InnerProductSpace::euclidean(1), CompactMap::new(DMatrix::zeros(1, n)))
    } else {
        let diag = DVector::from_fn(2 * nc, |k, _| contact[k / 2].weight);
        (InnerProductSpace::new(DMatrix::from_diagonal(&diag))?, CompactMap::new(trace.clone()))
    };
    let dim_x = space_x.dim();
    let functional: Arc<dyn NonsmoothFunctional> = if nc > 0 && data.friction > 0.0 {
        let terms = contact
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut map = DMatrix::zeros(1, dim_x);
                map[(0, 2 * i)] = c.tangent[0];
                map[(0, 2 * i + 1)] = c.tangent[1];
                NormTerm { weight: c.weight * data.friction, map }
            })
            .collect();
        Arc::new(NormSum::new(dim_x, terms)?)
    } else {
        Arc::new(ZeroFunctional::new(dim_x))
    };
    let constraint = match data.gap {
        Some(g) if nc > 0 && data.variant == DofVariant::ClampedOnly => {
            ConstraintSet::linear(normal_trace.clone(), DVector::from_element(nc, g), DVector::zeros(n))?
        }
        _ => ConstraintSet::whole_space(n),
    };
    let operator = AffineOperator::new(viscosity.clone(), &space)?.with_declared_modulus(material.m_a())?;
    let horizon = grid.horizon();

    let gamma_norm = if nc == 0 {
        0.0
    } else {
        vhi_core::compact::operator_norm(&compact, &space, &space_x)?.value
    };
    let l_p = data.normal_compliance * gamma_norm * gamma_norm;
    let sigma_c = material.sigma_constant(horizon);
    let l_s1 = material.l_b();
    let l_s2 = sigma_c * horizon;
    let l_s3 = gamma_norm * gamma_norm * data.memory.sup();
    let constants = ModelConstants {
        m_a: material.m_a(),
        l_b: material.l_b(),
        l_g: material.l_g(),
        sigma_c,
        gamma_norm,
        l_p,
        alpha_phi: 1f64.max(l_p),
        alpha_j: 0.0,
        l_s1,
        l_s2,
        l_s3,
        l_s: l_s1 + l_s2 + l_s3,
    };
    let assembly = Arc::new(Assembly {
        mesh,
        material,
        data,
        grid,
        prolong,
        strain,
        areas,
        gram,
        viscosity,
        elasticity,
        contact,
        trace,
        normal_trace,
        u0,
        constants,
    });

    let bifunction = ContactBifunction { assembly: assembly.clone(), alpha: assembly.constants.alpha_phi };
    let components = ComponentsBuilder {
        space,
        space_x,
        constraint,
        operator: Arc::new(operator),
        bifunction: Arc::new(bifunction),
        functional,
        compact,
    }
    .build()?;

    let c = &assembly.constants;
    let s1 = HistoryOperator::custom(n, Arc::new(ElasticHistory::new(assembly.clone())), c.l_s1, Some(grid));
    let s2 = HistoryOperator::custom(n, Arc::new(InternalHistory::new(assembly.clone())), c.l_s2, Some(grid));
    let s3 = HistoryOperator::custom(n, Arc::new(MemoryHistory::new(assembly.clone())), c.l_s3, Some(grid));
    let history = history_sum(history_sum(s1, s2)?, s3)?.with_rule(Quadrature::Trapezoid);
    let load = Trajectory::from_fn(grid, |t| assembly.load(t));
    let problem = VhiProblem::new(Arc::new(components), history, load)?;
    let report = contact_report(&assembly.constants)?;
    Ok(ContactProblem { problem, assembly, report, warnings })
}

/// The smallness gate written in the contact constants.
pub fn contact_report(c: &ModelConstants) -> Result<WellPosednessReport> {
    let inputs = SmallnessInputs {
        m_a: Some(c.m_a),
        alpha_a: Some(c.m_a),
        alpha_phi: Some(c.alpha_phi),
        m_j: Some(c.alpha_j),
        m_norm: Some(c.gamma_norm),
    };
    let mut report = check_smallness_constants(inputs)?;
    let nonsmooth = c.alpha_j * c.gamma_norm * c.gamma_norm;
    report.checks = vec![
        InequalityCheck {
            name: CONTRACTION_LABEL.to_string(),
            lhs: c.m_a,
            rhs: c.alpha_phi + nonsmooth,
            margin: c.m_a - c.alpha_phi - nonsmooth,
            holds: c.m_a > c.alpha_phi + nonsmooth,
        },
        InequalityCheck {
            name: COERCIVITY_LABEL.to_string(),
            lhs: c.m_a,
            rhs: 2.0 * nonsmooth,
            margin: c.m_a - 2.0 * nonsmooth,
            holds: c.m_a > 2.0 * nonsmooth,
        },
    ];
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Tagging};

    fn default_problem(data: ContactData) -> ContactProblem {
        let mesh = build_mesh(2.0, 1.0, 8, 4, Tagging::default()).unwrap();
        assemble_problem(mesh, Material::default(), data, TimeGrid::new(1.0, 4).unwrap()).unwrap()
    }

    #[test]
    fn hand_integrated_plane_strain_element() {
        // right triangle (0,0), (1,0), (0,1): B is constant, K = |T| B^T C B
        let (lam, mu) = (1.7, 0.6);
        let tri = Mesh {
            width: 1.0,
            height: 1.0,
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            edges: Vec::new(),
        };
        let (_, _, g, d) = assemble_full(&tri);
        let k = &g * (2.0 * mu) + &d * lam;
        // engineering-shear B rows: [u1x..], with dN1 = (-1,-1), dN2 = (1,0), dN3 = (0,1)
        let b = DMatrix::from_row_slice(
            3,
            6,
            &[-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, -1.0, -1.0, 0.0, 1.0, 1.0, 0.0],
        );
        let c = DMatrix::from_row_slice(3, 3, &[lam + 2.0 * mu, lam, 0.0, lam, lam + 2.0 * mu, 0.0, 0.0, 0.0, mu]);
        let oracle = b.transpose() * c * b * 0.5;
        assert!((k - oracle).amax() < 1e-14);
    }

    #[test]
    fn gram_is_spd_and_clamped_dofs_are_removed() {
        let p = default_problem(ContactData::default());
        let a = &p.assembly;
        // 9 x 5 grid nodes + 32 centers, minus 5 clamped nodes
        assert_eq!(a.dim(), 2 * (45 + 32 - 5));
        assert!(a.gram.clone().cholesky().is_some());
        assert_eq!(a.contact.len(), 8);
    }

    #[test]
    fn trace_norm_matches_dense_generalized_eigenvalue() {
        let p = default_problem(ContactData::default());
        let a = &p.assembly;
        let wx = DMatrix::from_diagonal(&DVector::from_fn(2 * a.contact.len(), |k, _| a.contact[k / 2].weight));
        let h = a.trace.transpose() * wx * &a.trace;
        let l = a.gram.clone().cholesky().unwrap().l();
        let linv = l.clone().try_inverse().unwrap();
        let sym = &linv * h * linv.transpose();
        let lmax = sym.symmetric_eigenvalues().max();
        assert!((a.constants.gamma_norm - lmax.sqrt()).abs() < 1e-8 * lmax.sqrt());
    }

    #[test]
    fn zero_loads_give_zero_right_hand_side() {
        let p = default_problem(ContactData::default());
        assert!(p.problem.load.values.iter().all(|f| f.amax() == 0.0));
        assert!(p.report.pass);
    }

    #[test]
    fn gate_uses_damping_lipschitz_constant() {
        let p = default_problem(ContactData { normal_compliance: 1e3, ..ContactData::default() });
        assert!(!p.report.pass);
        assert_eq!(p.report.failing(), vec![CONTRACTION_LABEL.to_string()]);
        let c = &p.assembly.constants;
        assert!((c.alpha_phi - 1e3 * c.gamma_norm.powi(2)).abs() < 1e-9 * c.alpha_phi);
    }

    #[test]
    fn damping_operator_lipschitz_bound() {
        use rand::{Rng, SeedableRng};
        let p = default_problem(ContactData { normal_compliance: 0.7, ..ContactData::default() });
        let a = &p.assembly;
        let space = &p.problem.components.space;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let u = DVector::from_fn(a.dim(), |_, _| rng.random_range(-1.0..1.0));
            let v = DVector::from_fn(a.dim(), |_, _| rng.random_range(-1.0..1.0));
            let lhs = space.dual_norm(&(a.damping(&u) - a.damping(&v)));
            assert!(lhs <= a.constants.l_p * space.norm(&(&u - &v)) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn normal_clamp_variant_removes_normal_dofs() {
        let p = default_problem(ContactData { variant: DofVariant::NormalClamp, gap: Some(0.1), ..ContactData::default() });
        assert_eq!(p.assembly.dim(), 2 * (45 + 32 - 5) - 8);
        assert!(p.assembly.normal_trace.amax() < 1e-15);
    }

    #[test]
    fn empty_contact_boundary_warns() {
        let t = Tagging { bottom: BoundaryTag::Gamma2, ..Tagging::default() };
        let mesh = build_mesh(2.0, 1.0, 4, 2, t).unwrap();
        let p = assemble_problem(mesh, Material::default(), ContactData::default(), TimeGrid::new(1.0, 2).unwrap())
            .unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert!(p.report.pass);
    }
}
