//! Structured crossed-triangle meshes of a rectangle with tagged boundary edges.

use serde::{Deserialize, Serialize};
use vhi_core::{Result, VhiError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Clamped.
    Gamma1,
    /// Prescribed traction.
    Gamma2,
    /// Contact.
    Gamma3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tagging {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub top: BoundaryTag,
    pub bottom: BoundaryTag,
}

impl Default for Tagging {
    fn default() -> Self {
        Self {
            left: BoundaryTag::Gamma1,
            right: BoundaryTag::Gamma2,
            top: BoundaryTag::Gamma2,
            bottom: BoundaryTag::Gamma3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Clone, Debug)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    pub side: Side,
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub width: f64,
    pub height: f64,
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<BoundaryEdge>,
}

/// `nx x ny` cells, each split into four triangles through its center.
/// Grid node `(i, j)` has index `j (nx + 1) + i`; cell centers follow.
pub fn build_mesh(width: f64, height: f64, nx: usize, ny: usize, tagging: Tagging) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) || nx == 0 || ny == 0 {
        return Err(VhiError::Invalid(format!(
            "degenerate mesh: {width} x {height} with {nx} x {ny} cells"
        )));
    }
    let hx = width / nx as f64;
    let hy = height / ny as f64;
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { width } else { i as f64 * hx };
            let y = if j == ny { height } else { j as f64 * hy };
            nodes.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let c = nodes.len();
            nodes.push([(i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy]);
            let (a, b, d, e) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([b, d, c]);
            triangles.push([d, e, c]);
            triangles.push([e, a, c]);
        }
    }
    let mut edges = Vec::with_capacity(2 * (nx + ny));
    let mut push = |n0: usize, n1: usize, side: Side, tag: BoundaryTag, normal: [f64; 2], length: f64| {
        edges.push(BoundaryEdge { nodes: [n0, n1], tag, side, normal, length });
    };
    for i in 0..nx {
        push(grid(i, 0), grid(i + 1, 0), Side::Bottom, tagging.bottom, [0.0, -1.0], hx);
    }
    for j in 0..ny {
        push(grid(nx, j), grid(nx, j + 1), Side::Right, tagging.right, [1.0, 0.0], hy);
    }
    for i in (0..nx).rev() {
        push(grid(i + 1, ny), grid(i, ny), Side::Top, tagging.top, [0.0, 1.0], hx);
    }
    for j in (0..ny).rev() {
        push(grid(0, j + 1), grid(0, j), Side::Left, tagging.left, [-1.0, 0.0], hy);
    }
    let mesh = Mesh { width, height, nodes, triangles, edges };
    if mesh.measure(BoundaryTag::Gamma1) <= 0.0 {
        return Err(VhiError::Invalid("the clamped boundary part has zero measure".into()));
    }
    Ok(mesh)
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    /// Gradients of the three barycentric shape functions.
    pub fn shape_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let two_area = 2.0 * self.area(t);
        [
            [(q[1] - r[1]) / two_area, (r[0] - q[0]) / two_area],
            [(r[1] - p[1]) / two_area, (p[0] - r[0]) / two_area],
            [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area],
        ]
    }

    pub fn measure(&self, tag: BoundaryTag) -> f64 {
        self.edges.iter().filter(|e| e.tag == tag).map(|e| e.length).sum()
    }

    /// Nodes touching an edge with the given tag, in ascending order.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.nodes)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Lumped boundary weight (half the adjacent tagged edge lengths) per node.
    pub fn lumped_weights(&self, tag: BoundaryTag) -> Vec<f64> {
        let mut w = vec![0.0; self.node_count()];
        for e in self.edges.iter().filter(|e| e.tag == tag) {
            for n in e.nodes {
                w[n] += 0.5 * e.length;
            }
        }
        w
    }

    /// Length-weighted average of adjacent tagged edge normals, normalized.
    pub fn nodal_normal(&self, node: usize, tag: BoundaryTag) -> Option<[f64; 2]> {
        let mut n = [0.0, 0.0];
        for e in self.edges.iter().filter(|e| e.tag == tag && e.nodes.contains(&node)) {
            n[0] += e.length * e.normal[0];
            n[1] += e.length * e.normal[1];
        }
        let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
        (len > 0.0).then(|| [n[0] / len, n[1] / len])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_has_four_triangles_of_total_unit_area() {
        let m = build_mesh(1.0, 1.0, 1, 1, Tagging::default()).unwrap();
        assert_eq!(m.triangles.len(), 4);
        let total: f64 = (0..4).map(|t| m.area(t)).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn areas_positive_and_sum_to_rectangle() {
        for (w, h, nx, ny) in [(2.0, 1.0, 8, 4), (0.3, 1.7, 3, 5), (1.0, 1.0, 1, 7)] {
            let m = build_mesh(w, h, nx, ny, Tagging::default()).unwrap();
            assert!((0..m.triangles.len()).all(|t| m.area(t) > 0.0));
            let total: f64 = (0..m.triangles.len()).map(|t| m.area(t)).sum();
            assert!((total - w * h).abs() < 1e-12);
            assert_eq!(m.edges.len(), 2 * (nx + ny));
            let perimeter: f64 = m.edges.iter().map(|e| e.length).sum();
            assert!((perimeter - 2.0 * (w + h)).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_gradients_reproduce_linear_fields() {
        let m = build_mesh(2.0, 1.0, 3, 2, Tagging::default()).unwrap();
        for t in 0..m.triangles.len() {
            let g = m.shape_gradients(t);
            let mut grad = [0.0, 0.0];
            for (k, &n) in m.triangles[t].iter().enumerate() {
                let val = 3.0 * m.nodes[n][0] - 2.0 * m.nodes[n][1];
                grad[0] += val * g[k][0];
                grad[1] += val * g[k][1];
            }
            assert!((grad[0] - 3.0).abs() < 1e-12 && (grad[1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_clamp_measure_and_degenerate_sizes_are_rejected() {
        let t = Tagging { left: BoundaryTag::Gamma2, ..Tagging::default() };
        assert!(build_mesh(1.0, 1.0, 2, 2, t).is_err());
        assert!(build_mesh(0.0, 1.0, 2, 2, Tagging::default()).is_err());
        assert!(build_mesh(1.0, 1.0, 0, 2, Tagging::default()).is_err());
    }

    #[test]
    fn contact_normals_point_down() {
        let m = build_mesh(2.0, 1.0, 4, 2, Tagging::default()).unwrap();
        for n in m.tagged_nodes(BoundaryTag::Gamma3) {
            let nu = m.nodal_normal(n, BoundaryTag::Gamma3).unwrap();
            assert_eq!(nu, [0.0, -1.0]);
        }
    }
}
