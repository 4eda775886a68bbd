//! Steady advection-diffusion-reaction transport with diagonal, spatially
//! variable diffusion `(D1 d/dx, D2 d/dy)` on P2 elements.
//!
//! With `Ldiff c = d/dx (D1 dc/dx) + d/dy (D2 dc/dy)` the strong operator and
//! its adjoint are
//!
//! ```text
//! L c  = -Ldiff c + u . grad c + alpha c
//! L* d = -Ldiff d - u . grad d + alpha d
//! ```
//!
//! and the stabilized form adds `tau3 * (-L* d, L c - g)` on every element
//! interior. `Ldiff` is expanded by the product rule using the analytic
//! coefficient gradients and exact P2 second derivatives.

use crate::assembly::{apply_homogeneous_dirichlet, assemble, LocalSystem};
use crate::error::{Error, ProblemError};
use crate::fe::{eval_basis, Mat2, ReferenceTable, DEFAULT_QUADRATURE_DEGREE};
use crate::fields::{SharedScalar, SourceFn};
use crate::flow::FlowSolution;
use crate::mesh::{Degree, DofMap, Mesh};
use crate::sparse::{BlockLabel, LinearSolver, SparseSystem};
use crate::{Method, Point};

#[derive(Clone)]
pub struct TransportProblem {
    d1: SharedScalar,
    d2: SharedScalar,
    alpha: f64,
    source: SourceFn,
}

impl TransportProblem {
    pub fn new(d1: SharedScalar, d2: SharedScalar, alpha: f64, source: SourceFn) -> Result<Self, ProblemError> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(ProblemError::Negative { name: "alpha", value: alpha });
        }
        Ok(Self { d1, d2, alpha, source })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn source(&self, x: Point) -> f64 {
        (self.source)(x)
    }

    /// `(D1, dD1/dx, D2, dD2/dy)` at `x`.
    pub fn diffusion(&self, x: Point) -> (f64, f64, f64, f64) {
        (
            self.d1.value(x),
            self.d1.gradient(x)[0],
            self.d2.value(x),
            self.d2.gradient(x)[1],
        )
    }

    /// Same coefficients, different source.
    pub fn with_source(&self, source: SourceFn) -> Self {
        Self {
            source,
            ..self.clone()
        }
    }
}

impl std::fmt::Debug for TransportProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransportProblem")
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

/// `tau3 = (9 D / (4 h^2) + 3 U / (2 h) + alpha)^-1`.
pub fn compute_tau3(d: f64, u: f64, alpha: f64, h: f64) -> Result<f64, ProblemError> {
    for (name, value) in [("D", d), ("U", u), ("alpha", alpha)] {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(ProblemError::Negative { name, value });
        }
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(ProblemError::NonPositive { name: "h", value: h });
    }
    let denom = 9.0 * d / (4.0 * h * h) + 3.0 * u / (2.0 * h) + alpha;
    if denom == 0.0 {
        return Err(ProblemError::VanishingDenominator);
    }
    Ok(1.0 / denom)
}

/// Advection velocity seen by the transport equation.
#[derive(Clone, Copy)]
pub enum VelocityField<'a> {
    Analytic(&'a (dyn Fn(Point) -> [f64; 2] + Send + Sync)),
    /// P2 velocity evaluated by basis expansion.
    Discrete {
        dofs: &'a DofMap,
        u1: &'a [f64],
        u2: &'a [f64],
    },
}

impl<'a> VelocityField<'a> {
    pub fn from_flow(sol: &'a FlowSolution) -> Self {
        VelocityField::Discrete {
            dofs: &sol.spaces.velocity,
            u1: &sol.u1,
            u2: &sol.u2,
        }
    }

    fn check(&self, mesh: &Mesh) -> Result<(), Error> {
        if let VelocityField::Discrete { dofs, u1, u2 } = self {
            if dofs.degree() != Degree::P2 {
                return Err(ProblemError::VelocityMismatch("velocity must be P2".into()).into());
            }
            dofs.check_mesh(mesh)
                .map_err(|e| ProblemError::VelocityMismatch(e.to_string()))?;
            if u1.len() != dofs.n_dofs() || u2.len() != dofs.n_dofs() {
                return Err(ProblemError::VelocityMismatch(format!(
                    "expected {} coefficients per component, got {} and {}",
                    dofs.n_dofs(),
                    u1.len(),
                    u2.len()
                ))
                .into());
            }
        }
        Ok(())
    }

    /// Velocity at physical point `x` of element `k`, given the P2 basis
    /// values there.
    fn at(&self, k: usize, x: Point, phi: &[f64; 6]) -> [f64; 2] {
        match *self {
            VelocityField::Analytic(f) => f(x),
            VelocityField::Discrete { dofs, u1, u2 } => {
                let mut u = [0.0; 2];
                for (i, &d) in dofs.cell_dofs(k).iter().enumerate() {
                    u[0] += phi[i] * u1[d];
                    u[1] += phi[i] * u2[d];
                }
                u
            }
        }
    }

    /// Velocity at the centroid of element `k`.
    pub fn at_centroid(&self, mesh: &Mesh, k: usize) -> [f64; 2] {
        let phi = eval_basis(Degree::P2, [1.0 / 3.0, 1.0 / 3.0]).values;
        self.at(k, mesh.centroid(k), &phi)
    }
}

/// Element-representative diffusion and speed: `max(D1, D2)` and `|u|`,
/// both at the centroid.
pub fn elementwise_du(prob: &TransportProblem, vel: &VelocityField<'_>, mesh: &Mesh, k: usize) -> (f64, f64) {
    let c = mesh.centroid(k);
    let d = prob.d1.value(c).max(prob.d2.value(c));
    let u = vel.at_centroid(mesh, k);
    (d, u[0].hypot(u[1]))
}

/// `Ldiff c` from value derivatives of `c` and the coefficient data.
fn diffusion_term(coef: (f64, f64, f64, f64), grad: [f64; 2], hess: &Mat2) -> f64 {
    let (d1, d1x, d2, d2y) = coef;
    d1x * grad[0] + d1 * hess[0][0] + d2y * grad[1] + d2 * hess[1][1]
}

/// Strong operator `L c` at one point.
pub fn strong_transport_operator(
    prob: &TransportProblem,
    x: Point,
    u: [f64; 2],
    c: f64,
    grad: [f64; 2],
    hess: &Mat2,
) -> f64 {
    -diffusion_term(prob.diffusion(x), grad, hess) + u[0] * grad[0] + u[1] * grad[1] + prob.alpha * c
}

/// Adjoint operator `L* d` at one point.
pub fn adjoint_transport_operator(
    prob: &TransportProblem,
    x: Point,
    u: [f64; 2],
    d: f64,
    grad: [f64; 2],
    hess: &Mat2,
) -> f64 {
    -diffusion_term(prob.diffusion(x), grad, hess) - u[0] * grad[0] - u[1] * grad[1] + prob.alpha * d
}

/// How the stabilization parameter is chosen per element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau3 {
    /// Formula with centroid `D_k`, `U_k` and element diameter.
    Elementwise,
    Fixed(f64),
}

fn adr_element(
    k: usize,
    mesh: &Mesh,
    table: &ReferenceTable,
    dofs: &DofMap,
    prob: &TransportProblem,
    vel: &VelocityField<'_>,
    tau: Option<Tau3>,
) -> Result<LocalSystem, Error> {
    let mut local = LocalSystem::zeros(dofs.cell_dofs(k).to_vec());
    let tau = match tau {
        None => None,
        Some(Tau3::Fixed(t)) => Some(t),
        Some(Tau3::Elementwise) => {
            let (d, u) = elementwise_du(prob, vel, mesh, k);
            Some(compute_tau3(d, u, prob.alpha, mesh.diameter(k))?)
        }
    };
    let alpha = prob.alpha;
    for qp in table.element(mesh.triangle_vertices(k))? {
        let w = qp.weight;
        let (phi, dphi, hess) = (&qp.p2.values, &qp.p2.gradients, &qp.p2.hessians);
        let coef = prob.diffusion(qp.x);
        let (d1, _, d2, _) = coef;
        let u = vel.at(k, qp.x, phi);
        let g = prob.source(qp.x);
        let adv: [f64; 6] = std::array::from_fn(|a| u[0] * dphi[a][0] + u[1] * dphi[a][1]);

        for a in 0..6 {
            for b in 0..6 {
                local.add(
                    a,
                    b,
                    w * (d1 * dphi[a][0] * dphi[b][0] + d2 * dphi[a][1] * dphi[b][1] + phi[a] * adv[b] + alpha * phi[a] * phi[b]),
                );
            }
            local.rhs[a] += w * g * phi[a];
        }

        let Some(tau) = tau else { continue };
        let diff: [f64; 6] = std::array::from_fn(|a| diffusion_term(coef, dphi[a], &hess[a]));
        for a in 0..6 {
            let test = diff[a] + adv[a] - alpha * phi[a];
            for b in 0..6 {
                let trial = -diff[b] + adv[b] + alpha * phi[b];
                local.add(a, b, w * tau * test * trial);
            }
            local.rhs[a] += w * tau * test * g;
        }
    }
    Ok(local)
}

/// Transport system without boundary conditions. Galerkin and stabilized
/// variants share one sparsity pattern.
pub fn assemble_adr_with(
    mesh: &Mesh,
    dofs: &DofMap,
    prob: &TransportProblem,
    vel: &VelocityField<'_>,
    tau: Option<Tau3>,
) -> Result<SparseSystem, Error> {
    if dofs.degree() != Degree::P2 {
        return Err(Error::Config("transport needs a P2 space".into()));
    }
    dofs.check_mesh(mesh)?;
    vel.check(mesh)?;
    let table = ReferenceTable::with_degree(DEFAULT_QUADRATURE_DEGREE)?;
    let (matrix, rhs) = assemble(mesh.n_triangles(), dofs.n_dofs(), |k| {
        adr_element(k, mesh, &table, dofs, prob, vel, tau)
    })?;
    Ok(SparseSystem::new(matrix, rhs, vec![(BlockLabel::Concentration, dofs.n_dofs())])?)
}

pub fn assemble_adr(
    mesh: &Mesh,
    dofs: &DofMap,
    prob: &TransportProblem,
    vel: &VelocityField<'_>,
    method: Method,
) -> Result<SparseSystem, Error> {
    let tau = match method {
        Method::Galerkin => None,
        Method::Sgs => Some(Tau3::Elementwise),
    };
    assemble_adr_with(mesh, dofs, prob, vel, tau)
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub dofs: DofMap,
    pub c: Vec<f64>,
    pub iterations: usize,
}

/// Solves with `c = 0` on the boundary.
pub fn solve_adr(
    mesh: &Mesh,
    prob: &TransportProblem,
    vel: &VelocityField<'_>,
    method: Method,
    solver: &LinearSolver,
) -> Result<TransportSolution, Error> {
    let dofs = DofMap::new(mesh, Degree::P2);
    let sys = assemble_adr(mesh, &dofs, prob, vel, method)?;
    let sys = apply_homogeneous_dirichlet(&sys, &dofs.boundary_mask())?;
    let (mut c, iterations) = solver.solve(&sys)?;
    for &d in dofs.dirichlet_dofs() {
        c[d] = 0.0;
    }
    Ok(TransportSolution { dofs, c, iterations })
}
