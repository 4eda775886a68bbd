//! Manufactured solutions and discretization error norms.
//!
//! All cases share one exact solution on the unit square:
//!
//! ```text
//! psi = sin^2(pi x) sin^2(pi y),   u = (d psi/dy, -d psi/dx)
//! p   = sin(2 pi x) sin(2 pi y)
//! c   = sin(pi x) sin(pi y)
//! ```
//!
//! `u` is divergence free with zero trace, `p` has zero mean and `c`
//! vanishes on the boundary. Cases differ only in their coefficients; the
//! forcings `f` and `g` are obtained by applying the strong operators to
//! the exact fields analytically.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::adr::TransportProblem;
use crate::error::ProblemError;
use crate::fe::{ReferenceTable, DEFAULT_QUADRATURE_DEGREE};
use crate::fields::{AxialQuadratic, ScalarField};
use crate::flow::FlowProblem;
use crate::mesh::{Degree, DofMap, Mesh};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub mu: f64,
    pub sigma: f64,
    pub d1: AxialQuadratic,
    pub d2: AxialQuadratic,
    pub alpha: f64,
}

/// Smooth reference case with unit coefficients.
pub const SMOOTH: ManufacturedCase = ManufacturedCase {
    name: "smooth",
    mu: 1.0,
    sigma: 1.0,
    d1: AxialQuadratic { scale: 1.0, slope: 0.0, axis: 0 },
    d2: AxialQuadratic { scale: 1.0, slope: 0.0, axis: 1 },
    alpha: 1.0,
};

/// Advection-dominated regime: tiny variable diffusion, strong reaction.
pub const SMALL_DIFFUSION: ManufacturedCase = ManufacturedCase {
    name: "small-diffusion",
    mu: 1.0,
    sigma: 1.0,
    d1: AxialQuadratic { scale: 1e-7, slope: 0.02, axis: 0 },
    d2: AxialQuadratic { scale: 1e-8, slope: 0.02, axis: 1 },
    alpha: 10.0,
};

/// Diffusion dominates both advection and reaction.
pub const DIFFUSION_DOMINATED: ManufacturedCase = ManufacturedCase {
    name: "diffusion-dominated",
    mu: 1.0,
    sigma: 1.0,
    d1: AxialQuadratic { scale: 1.0, slope: 0.02, axis: 0 },
    d2: AxialQuadratic { scale: 0.1, slope: 0.02, axis: 1 },
    alpha: 0.001,
};

pub fn default_cases() -> Vec<ManufacturedCase> {
    vec![SMOOTH, SMALL_DIFFUSION, DIFFUSION_DOMINATED]
}

/// Looks a case up by name; `a`, `b`, `c` are accepted as aliases.
pub fn case_by_name(name: &str) -> Option<ManufacturedCase> {
    match name {
        "smooth" | "a" => Some(SMOOTH),
        "small-diffusion" | "b" => Some(SMALL_DIFFUSION),
        "diffusion-dominated" | "c" => Some(DIFFUSION_DOMINATED),
        _ => None,
    }
}

// sin^2(pi t) and its first three derivatives
fn s0(t: f64) -> f64 {
    (PI * t).sin().powi(2)
}
fn s1(t: f64) -> f64 {
    PI * (2.0 * PI * t).sin()
}
fn s2(t: f64) -> f64 {
    2.0 * PI * PI * (2.0 * PI * t).cos()
}
fn s3(t: f64) -> f64 {
    -4.0 * PI.powi(3) * (2.0 * PI * t).sin()
}

pub fn velocity(x: Point) -> [f64; 2] {
    let (a, b) = (x[0], x[1]);
    [s0(a) * s1(b), -s1(a) * s0(b)]
}

/// Rows are components, columns are derivative directions.
pub fn velocity_gradient(x: Point) -> [[f64; 2]; 2] {
    let (a, b) = (x[0], x[1]);
    [
        [s1(a) * s1(b), s0(a) * s2(b)],
        [-s2(a) * s0(b), -s1(a) * s1(b)],
    ]
}

pub fn velocity_laplacian(x: Point) -> [f64; 2] {
    let (a, b) = (x[0], x[1]);
    [
        s2(a) * s1(b) + s0(a) * s3(b),
        -s3(a) * s0(b) - s1(a) * s2(b),
    ]
}

pub fn pressure(x: Point) -> f64 {
    (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
}

pub fn pressure_gradient(x: Point) -> [f64; 2] {
    let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
    let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
    [2.0 * PI * cx * sy, 2.0 * PI * sx * cy]
}

pub fn concentration(x: Point) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

pub fn concentration_gradient(x: Point) -> [f64; 2] {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    [PI * cx * sy, PI * sx * cy]
}

pub fn concentration_hessian(x: Point) -> [[f64; 2]; 2] {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    let pp = PI * PI;
    [[-pp * sx * sy, pp * cx * cy], [pp * cx * cy, -pp * sx * sy]]
}

/// Exact solution components as [`ScalarField`]s for error integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exact {
    U1,
    U2,
    P,
    C,
}

impl ScalarField for Exact {
    fn value(&self, x: Point) -> f64 {
        match self {
            Exact::U1 => velocity(x)[0],
            Exact::U2 => velocity(x)[1],
            Exact::P => pressure(x),
            Exact::C => concentration(x),
        }
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        match self {
            Exact::U1 => velocity_gradient(x)[0],
            Exact::U2 => velocity_gradient(x)[1],
            Exact::P => pressure_gradient(x),
            Exact::C => concentration_gradient(x),
        }
    }
}

impl ManufacturedCase {
    /// `f = -mu lap u + sigma u + grad p`.
    pub fn force(&self, x: Point) -> [f64; 2] {
        let u = velocity(x);
        let lap = velocity_laplacian(x);
        let gp = pressure_gradient(x);
        [
            -self.mu * lap[0] + self.sigma * u[0] + gp[0],
            -self.mu * lap[1] + self.sigma * u[1] + gp[1],
        ]
    }

    /// `g = L c` with the exact velocity.
    pub fn source(&self, x: Point) -> f64 {
        let g = concentration_gradient(x);
        let h = concentration_hessian(x);
        let u = velocity(x);
        let d1 = self.d1.value(x);
        let d1x = self.d1.gradient(x)[0];
        let d2 = self.d2.value(x);
        let d2y = self.d2.gradient(x)[1];
        -(d1x * g[0] + d1 * h[0][0] + d2y * g[1] + d2 * h[1][1])
            + u[0] * g[0]
            + u[1] * g[1]
            + self.alpha * concentration(x)
    }

    pub fn flow_problem(&self) -> FlowProblem {
        let case = *self;
        FlowProblem::with_force(self.mu, self.sigma, move |x| case.force(x))
            .expect("built-in cases have positive coefficients")
    }

    pub fn transport_problem(&self) -> TransportProblem {
        let case = *self;
        TransportProblem::new(
            Arc::new(self.d1),
            Arc::new(self.d2),
            self.alpha,
            Arc::new(move |x| case.source(x)),
        )
        .expect("built-in cases have non-negative reaction")
    }
}

/// Squared L2 error and squared H1 seminorm error of a discrete field.
fn squared_errors(mesh: &Mesh, dofs: &DofMap, coeffs: &[f64], exact: &dyn ScalarField) -> (f64, f64) {
    let table = ReferenceTable::with_degree(DEFAULT_QUADRATURE_DEGREE).expect("default rule exists");
    let mut l2 = 0.0;
    let mut semi = 0.0;
    let mut local = [0.0; 6];
    for k in 0..mesh.n_triangles() {
        for (i, &d) in dofs.cell_dofs(k).iter().enumerate() {
            local[i] = coeffs[d];
        }
        let qps = table.element(mesh.triangle_vertices(k)).expect("structured meshes are nondegenerate");
        for qp in qps {
            let basis = match dofs.degree() {
                Degree::P1 => &qp.p1,
                Degree::P2 => &qp.p2,
            };
            let (v, g, _) = basis.combine(&local[..basis.len()]);
            let ev = exact.value(qp.x);
            let eg = exact.gradient(qp.x);
            l2 += qp.weight * (v - ev).powi(2);
            semi += qp.weight * ((g[0] - eg[0]).powi(2) + (g[1] - eg[1]).powi(2));
        }
    }
    (l2, semi)
}

/// `||u_h - u||_L2` by elementwise degree-6 quadrature.
pub fn l2_error(mesh: &Mesh, dofs: &DofMap, coeffs: &[f64], exact: &dyn ScalarField) -> f64 {
    squared_errors(mesh, dofs, coeffs, exact).0.sqrt()
}

/// Full H1 norm of the error, `(||e||_L2^2 + |e|_H1^2)^(1/2)`.
pub fn h1_error(mesh: &Mesh, dofs: &DofMap, coeffs: &[f64], exact: &dyn ScalarField) -> f64 {
    let (a, b) = squared_errors(mesh, dofs, coeffs, exact);
    (a + b).sqrt()
}

/// `log2(e_coarse / e_fine)` for a mesh halving.
pub fn observed_order(e_coarse: f64, e_fine: f64) -> Result<f64, ProblemError> {
    if !(e_coarse > 0.0) {
        return Err(ProblemError::NonPositive { name: "e_coarse", value: e_coarse });
    }
    if !(e_fine > 0.0) {
        return Err(ProblemError::NonPositive { name: "e_fine", value: e_fine });
    }
    Ok((e_coarse / e_fine).log2())
}

/// All error norms of one coupled solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub u1_l2: f64,
    pub u1_h1: f64,
    pub u2_l2: f64,
    pub u2_h1: f64,
    pub p_l2: f64,
    pub c_l2: f64,
    pub c_h1: f64,
}
