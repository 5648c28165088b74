//! Legacy ASCII VTK snapshots and the contact boundary trace table.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::model::Assembly;
use crate::post::{contact_residuals, ContactSolution};

pub const TRACE_COLUMNS: [&str; 9] = [
    "t",
    "node_id",
    "w_nu",
    "g",
    "sigma_nu",
    "p_term",
    "memory_term",
    "complementarity",
    "sigma_tau_norm",
];

pub const TRACE_FILE: &str = "gamma3_trace.csv";

/// Seventeen significant digits; negative zero prints as zero.
pub fn num(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

pub fn vtk_file_name(n: usize) -> String {
    format!("step_{n:05}.vtk")
}

pub fn trace_header() -> String {
    let mut s = TRACE_COLUMNS.join(",");
    s.push('\n');
    s
}

/// Snapshot at step `n`: point vectors `velocity`, `displacement`; cell tensor `stress`
/// (in-plane components, zero out-of-plane row and column).
pub fn vtk_snapshot(assembly: &Assembly, solution: &ContactSolution, n: usize) -> String {
    let mesh = &assembly.mesh;
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "contact step {n} t={}", num(solution.velocity.grid.node(n)));
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.node_count());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} {}", num(p[0]), num(p[1]), num(0.0));
    }
    let nt = mesh.triangles.len();
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "5");
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.node_count());
    for (name, field) in [("velocity", &solution.velocity.values[n]), ("displacement", &solution.displacement.values[n])] {
        let full = assembly.full(field);
        let _ = writeln!(s, "VECTORS {name} double");
        for k in 0..mesh.node_count() {
            let _ = writeln!(s, "{} {} {}", num(full[2 * k]), num(full[2 * k + 1]), num(0.0));
        }
    }
    let _ = writeln!(s, "CELL_DATA {nt}");
    let _ = writeln!(s, "TENSORS stress double");
    let z = num(0.0);
    for sig in &solution.stress[n] {
        let (xx, yy, xy) = (num(sig[0]), num(sig[1]), num(sig[2]));
        let _ = writeln!(s, "{xx} {xy} {z}\n{xy} {yy} {z}\n{z} {z} {z}");
    }
    s
}

/// One row per step and contact node.
pub fn trace_csv(assembly: &Assembly, solution: &ContactSolution) -> vhi_core::Result<String> {
    let mut s = trace_header();
    for n in 0..solution.velocity.values.len() {
        let t = solution.velocity.grid.node(n);
        for r in contact_residuals(assembly, solution, n)? {
            let row = [
                num(t),
                r.node.to_string(),
                num(r.w_nu),
                num(r.g),
                num(r.sigma_nu),
                num(r.p_term),
                num(r.memory_term),
                num(r.complementarity),
                num(r.sigma_tau_norm),
            ];
            s.push_str(&row.join(","));
            s.push('\n');
        }
    }
    Ok(s)
}

/// Writes `step_{n:05}.vtk` for every step and the trace table into `dir`.
pub fn export_fields(assembly: &Assembly, solution: &ContactSolution, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for n in 0..solution.velocity.values.len() {
        let path = dir.join(vtk_file_name(n));
        fs::write(&path, vtk_snapshot(assembly, solution, n))?;
        written.push(path);
    }
    let csv = trace_csv(assembly, solution).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    let path = dir.join(TRACE_FILE);
    fs::write(&path, csv)?;
    written.push(path);
    Ok(written)
}
