//! Convergence studies and their CSV/Markdown reports.

mod config;
mod report;
mod run;

pub use config::{MethodSelection, RunConfig, SolverKind, ENV_PREFIX};
pub use report::{ConvergenceReport, ReportRow, CSV_HEADER};
pub use run::{run_convergence, solve_case, CaseSolution, RunFailure};
