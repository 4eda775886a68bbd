//! Brinkman (Stokes-Darcy) flow on P2-P2-P1 elements, plain Galerkin and
//! with algebraic subgrid-scale stabilization.
//!
//! Unknowns are ordered `[u1 | u2 | p]`, followed after [`fix_pressure`] by
//! one Lagrange multiplier enforcing a zero-mean pressure.
//!
//! The stabilized form adds, on every element interior,
//!
//! ```text
//!   tau1 * sum_i (mu lap v_i - sigma v_i + d_i q) (-mu lap u_i + sigma u_i + d_i p - f_i)
//! + tau2 * div v * div u
//! ```
//!
//! i.e. `(-L* V)^T diag(tau1, tau1, tau2) (L U - F)` with exact P2
//! Laplacians and P1 pressure gradients.

use std::sync::Arc;

use crate::assembly::{apply_homogeneous_dirichlet, assemble, LocalSystem};
use crate::error::{Error, ProblemError};
use crate::fe::{ReferenceTable, DEFAULT_QUADRATURE_DEGREE};
use crate::fields::VectorFn;
use crate::mesh::{Degree, DofMap, Mesh};
use crate::sparse::{solve_sign_symmetric, BlockLabel, LinearSolver, SparseSystem};
use crate::{Method, Point};

#[derive(Clone)]
pub struct FlowProblem {
    mu: f64,
    sigma: f64,
    force: VectorFn,
}

impl FlowProblem {
    pub fn new(mu: f64, sigma: f64, force: VectorFn) -> Result<Self, ProblemError> {
        positive("mu", mu)?;
        positive("sigma", sigma)?;
        Ok(Self { mu, sigma, force })
    }

    pub fn with_force(mu: f64, sigma: f64, force: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Result<Self, ProblemError> {
        Self::new(mu, sigma, Arc::new(force))
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn force(&self, x: Point) -> [f64; 2] {
        (self.force)(x)
    }
}

impl std::fmt::Debug for FlowProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowProblem")
            .field("mu", &self.mu)
            .field("sigma", &self.sigma)
            .finish_non_exhaustive()
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ProblemError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ProblemError::NonPositive { name, value })
    }
}

/// Default algebraic constants of the flow stabilization.
///
/// On this mesh family the P2 inverse estimate gives
/// `h_K^2 ||lap v||_K^2 <= 96 ||grad v||_K^2` (h_K the element diameter),
/// and the stabilized velocity form stops being coercive once `c1` drops
/// below that constant. 192 keeps a factor-two margin.
pub const DEFAULT_C1: f64 = 192.0;
pub const DEFAULT_C2: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowStabilization {
    pub c1: f64,
    pub c2: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl FlowStabilization {
    /// Explicit parameters, bypassing the formulas. Zero switches the
    /// corresponding term off.
    pub fn fixed(tau1: f64, tau2: f64) -> Self {
        Self {
            c1: f64::NAN,
            c2: f64::NAN,
            tau1,
            tau2,
        }
    }
}

/// `tau1 = (c1 mu / h^2 + sigma)^-1`, `tau2 = c2 mu`.
pub fn compute_flow_taus(mu: f64, sigma: f64, h: f64, c1: f64, c2: f64) -> Result<FlowStabilization, ProblemError> {
    positive("mu", mu)?;
    positive("sigma", sigma)?;
    positive("h", h)?;
    positive("c1", c1)?;
    positive("c2", c2)?;
    Ok(FlowStabilization {
        c1,
        c2,
        tau1: 1.0 / (c1 * mu / (h * h) + sigma),
        tau2: c2 * mu,
    })
}

/// Velocity (P2) and pressure (P1) numbering on one mesh.
#[derive(Debug, Clone)]
pub struct FlowSpaces {
    pub velocity: DofMap,
    pub pressure: DofMap,
}

impl FlowSpaces {
    pub fn new(mesh: &Mesh) -> Self {
        Self {
            velocity: DofMap::new(mesh, Degree::P2),
            pressure: DofMap::new(mesh, Degree::P1),
        }
    }

    pub fn check(&self, mesh: &Mesh) -> Result<(), Error> {
        if self.velocity.degree() != Degree::P2 || self.pressure.degree() != Degree::P1 {
            return Err(Error::Config("flow needs a P2 velocity and a P1 pressure space".into()));
        }
        self.velocity.check_mesh(mesh)?;
        self.pressure.check_mesh(mesh)?;
        Ok(())
    }

    /// Size of the `[u1 | u2 | p]` system before the mean constraint.
    pub fn dim(&self) -> usize {
        2 * self.velocity.n_dofs() + self.pressure.n_dofs()
    }

    fn blocks(&self) -> Vec<(BlockLabel, usize)> {
        let nv = self.velocity.n_dofs();
        vec![
            (BlockLabel::Velocity1, nv),
            (BlockLabel::Velocity2, nv),
            (BlockLabel::Pressure, self.pressure.n_dofs()),
        ]
    }
}

/// Strong momentum and continuity residual rows of `L U` for one point:
/// `(-mu lap u1 + sigma u1 + dp/dx, -mu lap u2 + sigma u2 + dp/dy, div u)`.
pub fn strong_flow_operator(
    mu: f64,
    sigma: f64,
    u: [f64; 2],
    grad_u: [[f64; 2]; 2],
    lap_u: [f64; 2],
    grad_p: [f64; 2],
) -> [f64; 3] {
    [
        -mu * lap_u[0] + sigma * u[0] + grad_p[0],
        -mu * lap_u[1] + sigma * u[1] + grad_p[1],
        grad_u[0][0] + grad_u[1][1],
    ]
}

fn flow_element(
    k: usize,
    mesh: &Mesh,
    table: &ReferenceTable,
    spaces: &FlowSpaces,
    prob: &FlowProblem,
    taus: Option<(f64, f64)>,
) -> Result<LocalSystem, Error> {
    let nv = spaces.velocity.n_dofs();
    let vd = spaces.velocity.cell_dofs(k);
    let pd = spaces.pressure.cell_dofs(k);
    let mut dofs = Vec::with_capacity(15);
    dofs.extend_from_slice(vd);
    dofs.extend(vd.iter().map(|d| d + nv));
    dofs.extend(pd.iter().map(|d| d + 2 * nv));
    let mut local = LocalSystem::zeros(dofs);

    let (mu, sigma) = (prob.mu, prob.sigma);
    for qp in table.element(mesh.triangle_vertices(k))? {
        let w = qp.weight;
        let f = prob.force(qp.x);
        let (phi, dphi, lap) = (&qp.p2.values, &qp.p2.gradients, &qp.p2.laplacians);
        let (psi, dpsi) = (&qp.p1.values, &qp.p1.gradients);

        for a in 0..6 {
            for b in 0..6 {
                let stiff = w * (mu * (dphi[a][0] * dphi[b][0] + dphi[a][1] * dphi[b][1]) + sigma * phi[a] * phi[b]);
                local.add(a, b, stiff);
                local.add(6 + a, 6 + b, stiff);
            }
            for m in 0..3 {
                // -b(v, p) and +b(u, q)
                local.add(a, 12 + m, -w * dphi[a][0] * psi[m]);
                local.add(6 + a, 12 + m, -w * dphi[a][1] * psi[m]);
                local.add(12 + m, a, w * psi[m] * dphi[a][0]);
                local.add(12 + m, 6 + a, w * psi[m] * dphi[a][1]);
            }
            local.rhs[a] += w * f[0] * phi[a];
            local.rhs[6 + a] += w * f[1] * phi[a];
        }

        let Some((tau1, tau2)) = taus else { continue };
        for a in 0..6 {
            // momentum rows of -L* applied to the test function
            let test = mu * lap[a] - sigma * phi[a];
            for b in 0..6 {
                let trial = -mu * lap[b] + sigma * phi[b];
                let res = w * tau1 * test * trial;
                local.add(a, b, res + w * tau2 * dphi[a][0] * dphi[b][0]);
                local.add(6 + a, 6 + b, res + w * tau2 * dphi[a][1] * dphi[b][1]);
                local.add(a, 6 + b, w * tau2 * dphi[a][0] * dphi[b][1]);
                local.add(6 + a, b, w * tau2 * dphi[a][1] * dphi[b][0]);
            }
            for m in 0..3 {
                local.add(a, 12 + m, w * tau1 * test * dpsi[m][0]);
                local.add(6 + a, 12 + m, w * tau1 * test * dpsi[m][1]);
                let trial = -mu * lap[a] + sigma * phi[a];
                local.add(12 + m, a, w * tau1 * dpsi[m][0] * trial);
                local.add(12 + m, 6 + a, w * tau1 * dpsi[m][1] * trial);
            }
            local.rhs[a] += w * tau1 * test * f[0];
            local.rhs[6 + a] += w * tau1 * test * f[1];
        }
        for m in 0..3 {
            for l in 0..3 {
                local.add(12 + m, 12 + l, w * tau1 * (dpsi[m][0] * dpsi[l][0] + dpsi[m][1] * dpsi[l][1]));
            }
            local.rhs[12 + m] += w * tau1 * (dpsi[m][0] * f[0] + dpsi[m][1] * f[1]);
        }
    }
    Ok(local)
}

fn assemble_flow(
    mesh: &Mesh,
    spaces: &FlowSpaces,
    prob: &FlowProblem,
    taus: Option<(f64, f64)>,
) -> Result<SparseSystem, Error> {
    spaces.check(mesh)?;
    let table = ReferenceTable::with_degree(DEFAULT_QUADRATURE_DEGREE)?;
    let (matrix, rhs) = assemble(mesh.n_triangles(), spaces.dim(), |k| {
        flow_element(k, mesh, &table, spaces, prob, taus)
    })?;
    Ok(SparseSystem::new(matrix, rhs, spaces.blocks())?)
}

/// Galerkin system `[A 0 -B1^T; 0 A -B2^T; B1 B2 0]`, no boundary conditions.
pub fn assemble_flow_galerkin(mesh: &Mesh, spaces: &FlowSpaces, prob: &FlowProblem) -> Result<SparseSystem, Error> {
    assemble_flow(mesh, spaces, prob, None)
}

/// Galerkin system plus the element-interior residual terms. The sparsity
/// pattern matches [`assemble_flow_galerkin`] exactly.
pub fn assemble_flow_sgs(
    mesh: &Mesh,
    spaces: &FlowSpaces,
    prob: &FlowProblem,
    stab: &FlowStabilization,
) -> Result<SparseSystem, Error> {
    assemble_flow(mesh, spaces, prob, Some((stab.tau1, stab.tau2)))
}

/// Zero velocity on the boundary for both components.
pub fn apply_velocity_dirichlet(sys: &SparseSystem, spaces: &FlowSpaces) -> Result<SparseSystem, Error> {
    let mut mask = vec![false; sys.dim()];
    let nv = spaces.velocity.n_dofs();
    for &d in spaces.velocity.dirichlet_dofs() {
        mask[d] = true;
        mask[nv + d] = true;
    }
    Ok(apply_homogeneous_dirichlet(sys, &mask)?)
}

/// `int_Omega psi_k` for every P1 basis function.
pub fn pressure_mean_weights(mesh: &Mesh, pressure: &DofMap) -> Vec<f64> {
    let mut w = vec![0.0; pressure.n_dofs()];
    for k in 0..mesh.n_triangles() {
        let third = mesh.signed_area(k) / 3.0;
        for &d in pressure.cell_dofs(k) {
            w[d] += third;
        }
    }
    w
}

/// Appends a Lagrange multiplier enforcing `int p_h = 0` (exact P1
/// integration) as a bordered row and column.
pub fn fix_pressure(sys: &SparseSystem, weights: &[f64]) -> Result<SparseSystem, Error> {
    let offset = sys
        .block_offset(BlockLabel::Pressure)
        .ok_or_else(|| Error::Config("system has no pressure block".into()))?;
    let n = sys.dim();
    let extra = weights
        .iter()
        .enumerate()
        .flat_map(|(k, &w)| [(offset + k, n, w), (n, offset + k, w)]);
    let matrix = sys.matrix.filtered(n + 1, |_, _| true, extra);
    let mut rhs = sys.rhs.clone();
    rhs.push(0.0);
    let mut blocks = sys.blocks.clone();
    blocks.push((BlockLabel::Multiplier, 1));
    Ok(SparseSystem::new(matrix, rhs, blocks)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub c1: f64,
    pub c2: f64,
    pub solver: LinearSolver,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            c1: DEFAULT_C1,
            c2: DEFAULT_C2,
            solver: LinearSolver::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub spaces: FlowSpaces,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub p: Vec<f64>,
    /// `||div u_h||_L2`.
    pub divergence_l2: f64,
    pub iterations: usize,
}

/// Boundary-constrained, mean-fixed system ready for a solver.
pub fn build_flow_system(
    mesh: &Mesh,
    spaces: &FlowSpaces,
    prob: &FlowProblem,
    method: Method,
    c1: f64,
    c2: f64,
) -> Result<SparseSystem, Error> {
    let sys = match method {
        Method::Galerkin => assemble_flow_galerkin(mesh, spaces, prob)?,
        Method::Sgs => {
            let stab = compute_flow_taus(prob.mu, prob.sigma, mesh.h(), c1, c2)?;
            assemble_flow_sgs(mesh, spaces, prob, &stab)?
        }
    };
    let sys = apply_velocity_dirichlet(&sys, spaces)?;
    fix_pressure(&sys, &pressure_mean_weights(mesh, &spaces.pressure))
}

pub fn solve_flow(mesh: &Mesh, prob: &FlowProblem, method: Method, opts: &FlowOptions) -> Result<FlowSolution, Error> {
    let spaces = FlowSpaces::new(mesh);
    let sys = build_flow_system(mesh, &spaces, prob, method, opts.c1, opts.c2)?;
    let (x, iterations) = match opts.solver {
        LinearSolver::Lu => (solve_flow_direct(&sys)?, 0),
        iterative => iterative.solve(&sys)?,
    };
    let nv = spaces.velocity.n_dofs();
    let np = spaces.pressure.n_dofs();
    let u1 = x[..nv].to_vec();
    let u2 = x[nv..2 * nv].to_vec();
    let p = x[2 * nv..2 * nv + np].to_vec();
    let divergence_l2 = divergence_l2(mesh, &spaces.velocity, &u1, &u2)?;
    Ok(FlowSolution {
        spaces,
        u1,
        u2,
        p,
        divergence_l2,
        iterations,
    })
}

/// Negating the continuity and multiplier rows makes both the Galerkin and
/// the stabilized flow matrices symmetric, so the direct solve goes through
/// an LDL^T factorization. Pivots are positive for velocity, negative for
/// pressure, and positive again for the multiplier once pressure has been
/// eliminated.
pub fn solve_flow_direct(sys: &SparseSystem) -> Result<Vec<f64>, Error> {
    let n = sys.dim();
    let p0 = sys.block_offset(BlockLabel::Pressure).unwrap_or(n);
    let lm = sys.block_offset(BlockLabel::Multiplier).unwrap_or(n);
    let negate: Vec<bool> = (0..n).map(|i| i >= p0).collect();
    let signs: Vec<i8> = (0..n).map(|i| if i >= p0 && i < lm { -1 } else { 1 }).collect();
    Ok(solve_sign_symmetric(sys, &negate, &signs)?)
}

/// `||d u1/dx + d u2/dy||_L2` of a discrete P2 velocity.
pub fn divergence_l2(mesh: &Mesh, velocity: &DofMap, u1: &[f64], u2: &[f64]) -> Result<f64, Error> {
    let table = ReferenceTable::with_degree(DEFAULT_QUADRATURE_DEGREE)?;
    let mut total = 0.0;
    let mut c1 = [0.0; 6];
    let mut c2 = [0.0; 6];
    for k in 0..mesh.n_triangles() {
        for (i, &d) in velocity.cell_dofs(k).iter().enumerate() {
            c1[i] = u1[d];
            c2[i] = u2[d];
        }
        for qp in table.element(mesh.triangle_vertices(k))? {
            let (_, g1, _) = qp.p2.combine(&c1);
            let (_, g2, _) = qp.p2.combine(&c2);
            let div = g1[0] + g2[1];
            total += qp.weight * div * div;
        }
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_force() -> FlowProblem {
        FlowProblem::with_force(1.0, 1.0, |_| [0.0, 0.0]).unwrap()
    }

    #[test]
    fn tau_formulas() {
        let s = compute_flow_taus(1.0, 1.0, 0.5, 4.0, 1.0).unwrap();
        assert!((s.tau1 - 1.0 / 17.0).abs() < 1e-15);
        assert_eq!(s.tau2, 1.0);
        let s = compute_flow_taus(1.0, 1e12, 0.1, 4.0, 1.0).unwrap();
        assert!(s.tau1 <= 1e-12);
    }

    #[test]
    fn tau_rejects_nonpositive() {
        assert!(matches!(
            compute_flow_taus(0.0, 1.0, 0.5, 4.0, 1.0),
            Err(ProblemError::NonPositive { name: "mu", .. })
        ));
        assert!(compute_flow_taus(1.0, -1.0, 0.5, 4.0, 1.0).is_err());
        assert!(compute_flow_taus(1.0, 1.0, 0.0, 4.0, 1.0).is_err());
        assert!(compute_flow_taus(1.0, 1.0, 0.5, 0.0, 1.0).is_err());
        assert!(compute_flow_taus(1.0, 1.0, 0.5, 4.0, 0.0).is_err());
        assert!(FlowProblem::with_force(0.0, 1.0, |_| [0.0; 2]).is_err());
    }

    #[test]
    fn operator_on_x_squared() {
        // u = (x^2, 0), p = 0, mu = 1, sigma = 2
        for x in [0.0, 0.3, 0.9] {
            let r = strong_flow_operator(1.0, 2.0, [x * x, 0.0], [[2.0 * x, 0.0], [0.0, 0.0]], [2.0, 0.0], [0.0, 0.0]);
            assert!((r[0] - (-2.0 + 2.0 * x * x)).abs() < 1e-15);
            assert_eq!(r[1], 0.0);
            assert!((r[2] - 2.0 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn velocity_block_is_symmetric() {
        let mesh = Mesh::structured(3).unwrap();
        let spaces = FlowSpaces::new(&mesh);
        let sys = assemble_flow_galerkin(&mesh, &spaces, &zero_force()).unwrap();
        let nv = spaces.velocity.n_dofs();
        let mut worst: f64 = 0.0;
        for r in 0..2 * nv {
            for (c, v) in sys.matrix.row(r) {
                if c < 2 * nv {
                    worst = worst.max((v - sys.matrix.get(c, r)).abs());
                }
            }
        }
        assert!(worst <= 1e-12);
    }

    #[test]
    fn zero_tau_recovers_galerkin() {
        let mesh = Mesh::structured(3).unwrap();
        let spaces = FlowSpaces::new(&mesh);
        let prob = FlowProblem::with_force(1.3, 0.7, |x| [x[0].sin(), x[1] * x[0]]).unwrap();
        let g = assemble_flow_galerkin(&mesh, &spaces, &prob).unwrap();
        let s = assemble_flow_sgs(&mesh, &spaces, &prob, &FlowStabilization::fixed(0.0, 0.0)).unwrap();
        assert!(g.matrix.same_pattern(&s.matrix));
        assert!(g.matrix.max_abs_diff(&s.matrix) <= 1e-14);
        let rhs_diff = g.rhs.iter().zip(&s.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(rhs_diff <= 1e-14);
    }

    #[test]
    fn zero_force_gives_zero_solution() {
        let mesh = Mesh::structured(4).unwrap();
        for method in [Method::Galerkin, Method::Sgs] {
            let sol = solve_flow(&mesh, &zero_force(), method, &FlowOptions::default()).unwrap();
            assert!(sol.u1.iter().chain(&sol.u2).chain(&sol.p).all(|&v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn dirichlet_dof_count() {
        let mesh = Mesh::structured(3).unwrap();
        let spaces = FlowSpaces::new(&mesh);
        let sys = assemble_flow_galerkin(&mesh, &spaces, &zero_force()).unwrap();
        let bc = apply_velocity_dirichlet(&sys, &spaces).unwrap();
        let unit_rows = (0..bc.dim())
            .filter(|&r| {
                let row: Vec<_> = bc.matrix.row(r).collect();
                row == vec![(r, 1.0)]
            })
            .count();
        assert_eq!(unit_rows, 2 * spaces.velocity.dirichlet_dofs().len());
    }

    #[test]
    fn dirichlet_keeps_interior_residual() {
        let mesh = Mesh::structured(4).unwrap();
        let spaces = FlowSpaces::new(&mesh);
        let prob = FlowProblem::with_force(1.0, 1.0, |x| [x[1], -x[0]]).unwrap();
        let sys = assemble_flow_sgs(&mesh, &spaces, &prob, &compute_flow_taus(1.0, 1.0, mesh.h(), 4.0, 1.0).unwrap()).unwrap();
        let bc = apply_velocity_dirichlet(&sys, &spaces).unwrap();
        // Any vector vanishing on boundary velocity DOFs.
        let mask = {
            let mut m = vec![false; sys.dim()];
            let nv = spaces.velocity.n_dofs();
            for &d in spaces.velocity.dirichlet_dofs() {
                m[d] = true;
                m[nv + d] = true;
            }
            m
        };
        let x: Vec<f64> = (0..sys.dim()).map(|i| if mask[i] { 0.0 } else { (i as f64 * 0.37).sin() }).collect();
        let r0 = sys.matrix.matvec(&x);
        let r1 = bc.matrix.matvec(&x);
        for i in (0..sys.dim()).filter(|&i| !mask[i]) {
            assert!((r0[i] - sys.rhs[i] - (r1[i] - bc.rhs[i])).abs() < 1e-13);
        }
    }

    #[test]
    fn mean_constraint_removes_nullspace() {
        let mesh = Mesh::structured(3).unwrap();
        let spaces = FlowSpaces::new(&mesh);
        let prob = FlowProblem::with_force(1.0, 1.0, |x| [x[0] * x[1], 1.0 - x[0]]).unwrap();
        let sys = build_flow_system(&mesh, &spaces, &prob, Method::Galerkin, 4.0, 1.0).unwrap();
        let x = crate::sparse::solve_sparse_lu(&sys).unwrap();
        let w = pressure_mean_weights(&mesh, &spaces.pressure);
        let off = 2 * spaces.velocity.n_dofs();
        let mean: f64 = w.iter().enumerate().map(|(k, wk)| wk * x[off + k]).sum();
        assert!(mean.abs() <= 1e-10);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
