use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stabfem::adr::compute_tau3;
use stabfem::flow::compute_flow_taus;
use stabfem::harness::{run_convergence, solve_case, ConvergenceReport, MethodSelection, RunConfig};
use stabfem::mms::case_by_name;
use stabfem::vtk::{sample_at_vertices, write_vtk, PointData};
use stabfem::{Error, Method};

#[derive(Parser)]
#[command(name = "stabfem", version, about = "Stabilized P2/P1 finite elements for coupled Brinkman flow and transport")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one manufactured case on a single mesh.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Subdivisions per side (defaults to the first entry of --meshes).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run a mesh ladder and report errors and observed orders.
    Converge {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print stabilization parameters for the given coefficients.
    Taus(TauArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// smooth | small-diffusion | diffusion-dominated (or a | b | c)
    #[arg(long)]
    case: Option<String>,
    /// galerkin | sgs | both
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated subdivisions, e.g. 10,20,40
    #[arg(long)]
    meshes: Option<String>,
    /// lu | bicgstab
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    /// CSV output path; with --method both the method name is appended.
    #[arg(long)]
    out: Option<PathBuf>,
    /// VTK output path.
    #[arg(long)]
    vtk: Option<PathBuf>,
    /// Markdown output path.
    #[arg(long)]
    markdown: Option<PathBuf>,
}

#[derive(Args)]
struct TauArgs {
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = stabfem::flow::DEFAULT_C1)]
    c1: f64,
    #[arg(long, default_value_t = stabfem::flow::DEFAULT_C2)]
    c2: f64,
    /// Representative diffusion for tau3.
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    /// Representative speed for tau3.
    #[arg(long, default_value_t = 0.0)]
    u: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

/// Defaults, then config file, then environment, then flags.
fn build_config(file: Option<&Path>, args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = file {
        cfg.apply_file(path)?;
    }
    cfg.apply_env()?;
    let flags: [(&str, Option<String>); 10] = [
        ("case", args.case.clone()),
        ("method", args.method.clone()),
        ("meshes", args.meshes.clone()),
        ("solver", args.solver.clone()),
        ("tol", args.tol.map(|v| v.to_string())),
        ("c1", args.c1.map(|v| v.to_string())),
        ("c2", args.c2.map(|v| v.to_string())),
        ("out", args.out.as_ref().map(|p| p.display().to_string())),
        ("vtk", args.vtk.as_ref().map(|p| p.display().to_string())),
        ("markdown", args.markdown.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_suffix(path: &Path, method: Method) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{method}.{ext}"),
        None => format!("{stem}_{method}"),
    };
    path.with_file_name(name)
}

fn output_path(base: &Path, method: Method, cfg: &RunConfig) -> PathBuf {
    if cfg.method == MethodSelection::Both {
        with_suffix(base, method)
    } else {
        base.to_path_buf()
    }
}

fn write_reports(cfg: &RunConfig, reports: &[ConvergenceReport]) -> Result<(), Error> {
    for r in reports {
        println!("{}", r.to_markdown());
        if let Some(out) = &cfg.out {
            r.emit_csv(&output_path(out, r.method, cfg))?;
        }
    }
    let comparison = match reports {
        [g, s] => Some(ConvergenceReport::comparison_markdown(g, s)),
        _ => None,
    };
    if let Some(c) = &comparison {
        println!("{c}");
    }
    if let Some(md) = &cfg.markdown {
        let mut text: String = reports.iter().map(|r| r.to_markdown() + "\n").collect();
        if let Some(c) = comparison {
            text.push_str(&c);
        }
        std::fs::write(md, text).map_err(|e| Error::io(md, e))?;
    }
    Ok(())
}

fn converge(cfg: &RunConfig) -> Result<(), Error> {
    match run_convergence(cfg) {
        Ok(reports) => write_reports(cfg, &reports),
        Err(failure) => {
            if failure.reports.iter().any(|r| !r.rows.is_empty()) {
                eprintln!("partial results before failure:");
                let _ = write_reports(cfg, &failure.reports);
            }
            Err(failure.error)
        }
    }
}

fn solve(cfg: &RunConfig, n: Option<usize>) -> Result<(), Error> {
    let case = case_by_name(&cfg.case).expect("validated");
    let n = n.unwrap_or(cfg.meshes[0]);
    let solver = cfg.linear_solver();
    for method in cfg.method.methods() {
        let sol = solve_case(&case, n, method, cfg.c1, cfg.c2, &solver)?;
        let e = &sol.errors;
        println!("case {} method {method} n {n} h {:.6e}", case.name, sol.mesh.h());
        println!("  u1: L2 {:.6e}  H1 {:.6e}", e.u1_l2, e.u1_h1);
        println!("  u2: L2 {:.6e}  H1 {:.6e}", e.u2_l2, e.u2_h1);
        println!("  p:  L2 {:.6e}", e.p_l2);
        println!("  c:  L2 {:.6e}  H1 {:.6e}", e.c_l2, e.c_h1);
        println!("  div u L2 {:.6e}  solve {:.3}s", sol.flow.divergence_l2, sol.seconds);
        if let Some(path) = &cfg.vtk {
            let path = output_path(path, method, cfg);
            let mesh = &sol.mesh;
            let u1 = sample_at_vertices(mesh, &sol.flow.spaces.velocity, &sol.flow.u1);
            let u2 = sample_at_vertices(mesh, &sol.flow.spaces.velocity, &sol.flow.u2);
            let p = sample_at_vertices(mesh, &sol.flow.spaces.pressure, &sol.flow.p);
            let c = sample_at_vertices(mesh, &sol.transport.dofs, &sol.transport.c);
            write_vtk(
                &path,
                mesh,
                &format!("{} {method} n={n}", case.name),
                &[
                    PointData::Vector("velocity", &u1, &u2),
                    PointData::Scalar("pressure", &p),
                    PointData::Scalar("concentration", &c),
                ],
            )?;
            println!("  wrote {}", path.display());
        }
    }
    Ok(())
}

fn taus(args: &TauArgs) -> Result<(), Error> {
    let flow = compute_flow_taus(args.mu, args.sigma, args.h, args.c1, args.c2)?;
    let tau3 = compute_tau3(args.d, args.u, args.alpha, args.h)?;
    println!("tau1 = {:.12e}", flow.tau1);
    println!("tau2 = {:.12e}", flow.tau2);
    println!("tau3 = {:.12e}", tau3);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { run, n } => build_config(cli.config.as_deref(), run).and_then(|cfg| solve(&cfg, *n)),
        Command::Converge { run } => build_config(cli.config.as_deref(), run).and_then(|cfg| converge(&cfg)),
        Command::Taus(args) => taus(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Problem(_) | Error::Mesh(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
