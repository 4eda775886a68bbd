//! Structured triangulations of the unit square and Lagrange DOF numbering.
//!
//! Vertex `(i, j)` of an `n x n` grid sits at `(i/n, j/n)` and has index
//! `j (n + 1) + i`. Every grid cell is split along its bottom-left to
//! top-right diagonal into two counterclockwise triangles.
//!
//! P2 nodes live on the refined `(2n + 1) x (2n + 1)` lattice, so a P2 DOF
//! index is simply the lattice index of its node. Vertex `(i, j)` becomes
//! lattice node `(2i, 2j)` and an edge midpoint is the lattice node halfway
//! between its endpoints.

use std::collections::HashMap;

use crate::error::MeshError;
use crate::Point;

/// A mesh edge with the P2 node sitting at its midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub midpoint: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    /// Per triangle: edge indices for (v0,v1), (v1,v2), (v2,v0).
    triangle_edges: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
    h: f64,
}

impl Mesh {
    /// Uniform right-triangle mesh of `(0,1)^2` with `n` subdivisions per side.
    pub fn structured(n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroSubdivisions);
        }
        let np = n + 1;
        let vid = |i: usize, j: usize| j * np + i;

        let mut vertices = Vec::with_capacity(np * np);
        let mut boundary_vertex = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
                boundary_vertex.push(i == 0 || j == 0 || i == n || j == n);
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = vid(i, j);
                let b = vid(i + 1, j);
                let c = vid(i + 1, j + 1);
                let d = vid(i, j + 1);
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }

        let lattice = 2 * n + 1;
        let node_of = |v: usize| {
            let (i, j) = (v % np, v / np);
            (2 * i, 2 * j)
        };

        let mut edge_lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut boundary_edge = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut local = [0usize; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *slot = *edge_lookup.entry(key).or_insert_with(|| {
                    let (ia, ja) = node_of(a);
                    let (ib, jb) = node_of(b);
                    let midpoint = (ja + jb) / 2 * lattice + (ia + ib) / 2;
                    let pa = vertices[a];
                    let pb = vertices[b];
                    let on_boundary = (pa[0] == pb[0] && (pa[0] == 0.0 || pa[0] == 1.0))
                        || (pa[1] == pb[1] && (pa[1] == 0.0 || pa[1] == 1.0));
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        midpoint,
                    });
                    boundary_edge.push(on_boundary);
                    edges.len() - 1
                });
            }
            triangle_edges.push(local);
        }

        Ok(Self {
            n,
            vertices,
            triangles,
            triangle_edges,
            edges,
            boundary_vertex,
            boundary_edge,
            h: std::f64::consts::SQRT_2 / n as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn boundary_vertex_flags(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn boundary_edge_flags(&self) -> &[bool] {
        &self.boundary_edge
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_vertices(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Signed area of triangle `k` (positive for counterclockwise order).
    pub fn signed_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(k);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Diameter (longest edge) of triangle `k`.
    pub fn diameter(&self, k: usize) -> f64 {
        let p = self.triangle_vertices(k);
        (0..3)
            .map(|i| {
                let (a, b) = (p[i], p[(i + 1) % 3]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.triangle_vertices(k);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }
}

/// Lagrange polynomial degree of a DOF map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Degree {
    P1,
    P2,
}

impl Degree {
    pub fn from_int(degree: usize) -> Result<Self, MeshError> {
        match degree {
            1 => Ok(Degree::P1),
            2 => Ok(Degree::P2),
            d => Err(MeshError::UnsupportedDegree(d)),
        }
    }

    pub fn as_int(self) -> usize {
        match self {
            Degree::P1 => 1,
            Degree::P2 => 2,
        }
    }

    pub fn nodes_per_cell(self) -> usize {
        match self {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }
}

/// Global numbering of the continuous Lagrange space of one degree.
///
/// Local order per cell is vertices first, then the midpoints of edges
/// (v0,v1), (v1,v2), (v2,v0).
#[derive(Debug, Clone)]
pub struct DofMap {
    degree: Degree,
    n_mesh: usize,
    cell_dofs: Vec<usize>,
    n_dofs: usize,
    coordinates: Vec<Point>,
    dirichlet: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, degree: Degree) -> Self {
        let n = mesh.n();
        let per = degree.nodes_per_cell();
        let mut cell_dofs = Vec::with_capacity(per * mesh.n_triangles());
        let (n_dofs, coordinates) = match degree {
            Degree::P1 => {
                for tri in mesh.triangles() {
                    cell_dofs.extend_from_slice(tri);
                }
                (mesh.n_vertices(), mesh.vertices().to_vec())
            }
            Degree::P2 => {
                let lattice = 2 * n + 1;
                let np = n + 1;
                let vertex_node = |v: usize| 2 * (v / np) * lattice + 2 * (v % np);
                for (tri, tri_edges) in mesh.triangles().iter().zip(mesh.triangle_edges()) {
                    cell_dofs.extend(tri.iter().map(|&v| vertex_node(v)));
                    cell_dofs.extend(tri_edges.iter().map(|&e| mesh.edges()[e].midpoint));
                }
                let coords = (0..lattice * lattice)
                    .map(|idx| {
                        let (i, j) = (idx % lattice, idx / lattice);
                        [i as f64 / (2 * n) as f64, j as f64 / (2 * n) as f64]
                    })
                    .collect();
                (lattice * lattice, coords)
            }
        };
        let dirichlet = coordinates
            .iter()
            .enumerate()
            .filter(|(_, p)| p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0)
            .map(|(i, _)| i)
            .collect();
        Self {
            degree,
            n_mesh: n,
            cell_dofs,
            n_dofs,
            coordinates,
            dirichlet,
        }
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_cells(&self) -> usize {
        self.cell_dofs.len() / self.degree.nodes_per_cell()
    }

    /// Subdivision count of the mesh this map was built on.
    pub fn mesh_n(&self) -> usize {
        self.n_mesh
    }

    pub fn cell_dofs(&self, k: usize) -> &[usize] {
        let per = self.degree.nodes_per_cell();
        &self.cell_dofs[k * per..(k + 1) * per]
    }

    /// Physical coordinates of every DOF node.
    pub fn coordinates(&self) -> &[Point] {
        &self.coordinates
    }

    /// Sorted indices of DOFs lying on the boundary of the square.
    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_dofs];
        for &d in &self.dirichlet {
            mask[d] = true;
        }
        mask
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.coordinates.iter().map(|&p| f(p)).collect()
    }

    /// Checks that this map was built on `mesh`.
    pub fn check_mesh(&self, mesh: &Mesh) -> Result<(), MeshError> {
        if self.n_mesh != mesh.n() || self.n_cells() != mesh.n_triangles() {
            return Err(MeshError::Mismatch {
                expected: mesh.n(),
                found: self.n_mesh,
            });
        }
        Ok(())
    }
}

/// Convenience wrapper taking the degree as an integer.
pub fn build_dof_map(mesh: &Mesh, degree: usize) -> Result<DofMap, MeshError> {
    Ok(DofMap::new(mesh, Degree::from_int(degree)?))
}
