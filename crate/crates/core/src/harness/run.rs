use std::time::Instant;

use super::config::RunConfig;
use super::report::{ConvergenceReport, ReportRow};
use crate::adr::{solve_adr, TransportSolution, VelocityField};
use crate::error::Error;
use crate::flow::{solve_flow, FlowOptions, FlowSolution};
use crate::mesh::Mesh;
use crate::mms::{case_by_name, h1_error, l2_error, ErrorReport, Exact, ManufacturedCase};
use crate::sparse::LinearSolver;
use crate::Method;

/// One coupled solve of a manufactured case and its errors.
#[derive(Debug, Clone)]
pub struct CaseSolution {
    pub mesh: Mesh,
    pub flow: FlowSolution,
    pub transport: TransportSolution,
    pub errors: ErrorReport,
    pub seconds: f64,
}

/// Solves the flow, advects the concentration with the discrete velocity
/// and measures every error norm.
pub fn solve_case(
    case: &ManufacturedCase,
    n: usize,
    method: Method,
    c1: f64,
    c2: f64,
    solver: &LinearSolver,
) -> Result<CaseSolution, Error> {
    let mesh = Mesh::structured(n)?;
    let start = Instant::now();
    let flow = solve_flow(
        &mesh,
        &case.flow_problem(),
        method,
        &FlowOptions {
            c1,
            c2,
            solver: *solver,
        },
    )?;
    let transport = solve_adr(
        &mesh,
        &case.transport_problem(),
        &VelocityField::from_flow(&flow),
        method,
        solver,
    )?;
    let seconds = start.elapsed().as_secs_f64();

    let (vd, pd, cd) = (&flow.spaces.velocity, &flow.spaces.pressure, &transport.dofs);
    let errors = ErrorReport {
        u1_l2: l2_error(&mesh, vd, &flow.u1, &Exact::U1),
        u1_h1: h1_error(&mesh, vd, &flow.u1, &Exact::U1),
        u2_l2: l2_error(&mesh, vd, &flow.u2, &Exact::U2),
        u2_h1: h1_error(&mesh, vd, &flow.u2, &Exact::U2),
        p_l2: l2_error(&mesh, pd, &flow.p, &Exact::P),
        c_l2: l2_error(&mesh, cd, &transport.c, &Exact::C),
        c_h1: h1_error(&mesh, cd, &transport.c, &Exact::C),
    };
    Ok(CaseSolution {
        mesh,
        flow,
        transport,
        errors,
        seconds,
    })
}

/// A ladder that stopped early: the reports hold every completed mesh.
#[derive(Debug)]
pub struct RunFailure {
    pub reports: Vec<ConvergenceReport>,
    pub error: Error,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure {
            reports: Vec::new(),
            error,
        }
    }
}

/// Runs the mesh ladder once per selected method. Meshes run sequentially.
pub fn run_convergence(config: &RunConfig) -> Result<Vec<ConvergenceReport>, RunFailure> {
    config.validate()?;
    let case = case_by_name(&config.case).expect("validated");
    let solver = config.linear_solver();
    let mut reports: Vec<ConvergenceReport> = config
        .method
        .methods()
        .into_iter()
        .map(|method| ConvergenceReport {
            case: case.name.to_string(),
            method,
            solver: config.solver.as_str().to_string(),
            c1: config.c1,
            c2: config.c2,
            rows: Vec::new(),
        })
        .collect();

    for &n in &config.meshes {
        for report in reports.iter_mut() {
            let sol = match solve_case(&case, n, report.method, config.c1, config.c2, &solver) {
                Ok(s) => s,
                Err(error) => return Err(RunFailure { reports, error }),
            };
            report.rows.push(ReportRow {
                n,
                h: sol.mesh.h(),
                err_u1_h1: sol.errors.u1_h1,
                err_u2_h1: sol.errors.u2_h1,
                err_p_l2: sol.errors.p_l2,
                err_c_l2: sol.errors.c_l2,
                err_c_h1: sol.errors.c_h1,
                div_u_l2: sol.flow.divergence_l2,
                solve_seconds: sol.seconds,
                iterations: sol.flow.iterations + sol.transport.iterations,
            });
        }
    }
    Ok(reports)
}
