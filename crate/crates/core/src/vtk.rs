//! Legacy ASCII VTK (version 3.0) output of P1-sampled fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Error;
use crate::mesh::{DofMap, Mesh};

/// Values of a Lagrange field at the mesh vertices.
pub fn sample_at_vertices(mesh: &Mesh, dofs: &DofMap, coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        for (i, &v) in tri.iter().enumerate() {
            out[v] = coeffs[dofs.cell_dofs(k)[i]];
        }
    }
    out
}

/// Point data attached to a VTK file.
pub enum PointData<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [f64], &'a [f64]),
}

/// Renders the mesh (type 5 triangles) and point data as a VTK legacy file.
pub fn render(mesh: &Mesh, title: &str, data: &[PointData<'_>]) -> String {
    let mut s = String::new();
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "5");
    }
    if !data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
    }
    for d in data {
        match d {
            PointData::Scalar(name, v) => {
                let _ = writeln!(s, "SCALARS {name} double 1");
                let _ = writeln!(s, "LOOKUP_TABLE default");
                for x in v.iter() {
                    let _ = writeln!(s, "{x}");
                }
            }
            PointData::Vector(name, a, b) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for (x, y) in a.iter().zip(b.iter()) {
                    let _ = writeln!(s, "{x} {y} 0");
                }
            }
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, title: &str, data: &[PointData<'_>]) -> Result<(), Error> {
    std::fs::write(path, render(mesh, title, data)).map_err(|e| Error::io(path, e))
}
