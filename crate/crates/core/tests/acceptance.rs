//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use stabfem::adr::{assemble_adr_with, compute_tau3, Tau3, VelocityField};
use stabfem::fe::{eval_basis, physical_gradients_and_laplacians, quadrature_rule, ElementGeometry};
use stabfem::flow::{
    assemble_flow_galerkin, assemble_flow_sgs, compute_flow_taus, solve_flow, FlowOptions, FlowProblem,
    FlowSpaces, FlowStabilization,
};
use stabfem::harness::{run_convergence, ConvergenceReport, MethodSelection, RunConfig};
use stabfem::mesh::{Degree, DofMap, Mesh};
use stabfem::mms;
use stabfem::sparse::{solve_bicgstab, solve_sparse_lu, to_csr, Preconditioner};
use stabfem::Method;

type Outcome = Result<String, String>;

fn ladder(case: &str, method: MethodSelection) -> Result<Vec<ConvergenceReport>, String> {
    let cfg = RunConfig {
        case: case.into(),
        method,
        ..RunConfig::default()
    };
    run_convergence(&cfg).map_err(|f| format!("run failed: {}", f.error))
}

fn fmt_orders(o: &[f64]) -> String {
    let s: Vec<String> = o.iter().map(|v| format!("{v:.3}")).collect();
    format!("[{}]", s.join(", "))
}

fn last_two(o: &[f64]) -> &[f64] {
    &o[o.len().saturating_sub(2)..]
}

fn within(o: &[f64], lo: f64, hi: f64) -> bool {
    o.len() == 2 && o.iter().all(|&v| (lo..=hi).contains(&v))
}

fn report(reports: &[ConvergenceReport], method: Method) -> &ConvergenceReport {
    reports.iter().find(|r| r.method == method).expect("method was run")
}

fn criterion2(b: &[ConvergenceReport]) -> Outcome {
    let o = report(b, Method::Sgs).c_h1_orders();
    let msg = format!("SGS c H1 orders {}", fmt_orders(&o));
    if within(last_two(&o), 1.75, 2.25) {
        Ok(msg)
    } else {
        Err(msg + ", last two not in [1.75, 2.25]")
    }
}

fn criterion3(b: &[ConvergenceReport]) -> Outcome {
    let o = report(b, Method::Galerkin).c_h1_orders();
    let msg = format!("Galerkin c H1 orders {}", fmt_orders(&o));
    let low = o.iter().any(|&v| v < 1.6);
    let monotone = o.windows(2).all(|w| w[1] >= w[0]) || o.windows(2).all(|w| w[1] <= w[0]);
    let spread = o.iter().cloned().fold(f64::MIN, f64::max) - o.iter().cloned().fold(f64::MAX, f64::min);
    if low || (!monotone && spread > 0.4) {
        Ok(msg)
    } else {
        Err(msg + ", no degradation")
    }
}

fn criterion4(c: &[ConvergenceReport]) -> Outcome {
    let (g, s) = (report(c, Method::Galerkin), report(c, Method::Sgs));
    let (og, os) = (g.c_h1_orders(), s.c_h1_orders());
    let worst = g
        .rows
        .iter()
        .zip(&s.rows)
        .map(|(a, b)| (a.err_c_h1 - b.err_c_h1).abs() / a.err_c_h1)
        .fold(0.0, f64::max);
    let msg = format!(
        "Galerkin orders {}, SGS orders {}, max relative gap {:.2}%",
        fmt_orders(&og),
        fmt_orders(&os),
        100.0 * worst
    );
    if within(last_two(&og), 1.8, 2.2) && within(last_two(&os), 1.8, 2.2) && worst <= 0.05 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion5(a: &[ConvergenceReport]) -> Outcome {
    let r = report(a, Method::Sgs);
    let orders = r.orders();
    let col = |j: usize| -> Vec<f64> { orders.iter().filter_map(|o| o[j]).collect() };
    let (u1, u2, p) = (col(0), col(1), col(2));
    let msg = format!("u1 H1 {}, u2 H1 {}, p L2 {}", fmt_orders(&u1), fmt_orders(&u2), fmt_orders(&p));
    let ok = within(last_two(&u1), 1.8, 2.2) && within(last_two(&u2), 1.8, 2.2) && within(last_two(&p), 1.6, 2.4);
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion6() -> Outcome {
    let mesh = Mesh::structured(10).map_err(|e| e.to_string())?;
    let prob = FlowProblem::with_force(1.0, 1.0, |_| [1.0, 1.0]).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for method in [Method::Galerkin, Method::Sgs] {
        let sol = solve_flow(&mesh, &prob, method, &FlowOptions::default()).map_err(|e| e.to_string())?;
        let p_exact = sol.spaces.pressure.interpolate(|x| x[0] + x[1] - 1.0);
        worst = worst.max(max_abs(&sol.u1)).max(max_abs(&sol.u2)).max(max_diff(&sol.p, &p_exact));
    }
    let msg = format!("max DOF error {worst:.2e}");
    if worst <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion7() -> Outcome {
    let mesh = Mesh::structured(4).map_err(|e| e.to_string())?;
    let spaces = FlowSpaces::new(&mesh);
    let prob = mms::SMOOTH.flow_problem();
    let g = assemble_flow_galerkin(&mesh, &spaces, &prob).map_err(|e| e.to_string())?;
    let s = assemble_flow_sgs(&mesh, &spaces, &prob, &FlowStabilization::fixed(0.0, 0.0)).map_err(|e| e.to_string())?;
    let flow = g.matrix.max_abs_diff(&s.matrix).max(max_diff(&g.rhs, &s.rhs));

    let dofs = DofMap::new(&mesh, Degree::P2);
    let tprob = mms::SMALL_DIFFUSION.transport_problem();
    let vel = VelocityField::Analytic(&mms::velocity);
    let g = assemble_adr_with(&mesh, &dofs, &tprob, &vel, None).map_err(|e| e.to_string())?;
    let s = assemble_adr_with(&mesh, &dofs, &tprob, &vel, Some(Tau3::Fixed(0.0))).map_err(|e| e.to_string())?;
    let adr = g.matrix.max_abs_diff(&s.matrix).max(max_diff(&g.rhs, &s.rhs));
    let msg = format!("flow diff {flow:.1e}, transport diff {adr:.1e}");
    if flow <= 1e-14 && adr <= 1e-14 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion8() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * b.abs().max(1.0);
    let mut bad = Vec::new();
    let t = compute_flow_taus(1.0, 1.0, 0.1, 4.0, 1.0).map_err(|e| e.to_string())?;
    if !close(t.tau1, 1.0 / 401.0) || !close(t.tau2, 1.0) {
        bad.push("flow taus at mu=sigma=1, h=0.1, c1=4");
    }
    let t = compute_flow_taus(2.0, 0.5, 0.5, 192.0, 3.0).map_err(|e| e.to_string())?;
    if !close(t.tau1, 1.0 / 1536.5) || !close(t.tau2, 6.0) {
        bad.push("flow taus at mu=2, sigma=0.5, h=0.5, c1=192, c2=3");
    }
    let hand = [
        ((1.0, 1.0, 10.0, 0.1), 1.0 / 250.0),
        ((0.0, 0.0, 10.0, 0.1), 0.1),
        ((0.0, 2.0, 1.0, 0.5), 1.0 / 7.0),
        ((4.0, 0.0, 0.0, 1.5), 0.25),
    ];
    for ((d, u, a, h), want) in hand {
        if !close(compute_tau3(d, u, a, h).map_err(|e| e.to_string())?, want) {
            bad.push("tau3 hand value");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pos = |rng: &mut ChaCha8Rng| 10f64.powf(rng.gen_range(-3.0..2.0));
    let mut violations = 0;
    for _ in 0..1000 {
        let (mu, sigma, h, c1, c2) = (pos(&mut rng), pos(&mut rng), pos(&mut rng), pos(&mut rng), pos(&mut rng));
        let (d, u, a) = (pos(&mut rng), pos(&mut rng), pos(&mut rng));
        let f = 1.0 + rng.gen_range(0.01..1.0);
        let t1 = |mu, sigma, h, c1, c2| compute_flow_taus(mu, sigma, h, c1, c2).unwrap();
        let base = t1(mu, sigma, h, c1, c2);
        let t3 = |d, u, a, h| compute_tau3(d, u, a, h).unwrap();
        let b3 = t3(d, u, a, h);
        let ok = t1(f * mu, sigma, h, c1, c2).tau1 <= base.tau1
            && t1(mu, f * sigma, h, c1, c2).tau1 <= base.tau1
            && t1(mu, sigma, h, f * c1, c2).tau1 <= base.tau1
            && t1(mu, sigma, f * h, c1, c2).tau1 >= base.tau1
            && t1(f * mu, sigma, h, c1, c2).tau2 >= base.tau2
            && t1(mu, sigma, h, c1, f * c2).tau2 >= base.tau2
            && base.tau1 <= 1.0 / sigma
            && t3(f * d, u, a, h) <= b3
            && t3(d, f * u, a, h) <= b3
            && t3(d, u, f * a, h) <= b3
            && t3(d, u, a, f * h) > b3
            && b3 <= 1.0 / a;
        if !ok {
            violations += 1;
        }
    }
    let msg = format!("{} hand-value mismatches, {violations}/1000 monotonicity violations", bad.len());
    if bad.is_empty() && violations == 0 {
        Ok(msg)
    } else {
        Err(format!("{msg} {bad:?}"))
    }
}

fn criterion9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut mv, mut lu, mut it) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..30 {
        let n = rng.gen_range(1..=64);
        let (buf, dense) = random_triplets(&mut rng, n, 3 * n);
        let a = to_csr(&buf, n).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        mv = mv.max(max_diff(&a.matvec(&x), &dense_matvec(&dense, &x)));

        let (a, dense) = if trial % 2 == 0 { random_dominant(&mut rng, n) } else { random_spd(&mut rng, n) };
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let oracle = dense_lu_solve(&dense, &b);
        let scale = max_abs(&oracle).max(1.0);
        let sys = system(a, b);
        let x = solve_sparse_lu(&sys).map_err(|e| e.to_string())?;
        lu = lu.max(max_diff(&x, &oracle) / scale);
        let pc = [Preconditioner::None, Preconditioner::Jacobi, Preconditioner::Ilu0][trial % 3];
        let (x, _) = solve_bicgstab(&sys, 1e-13, 10_000, pc).map_err(|e| e.to_string())?;
        it = it.max(max_diff(&x, &oracle) / scale);
    }
    let msg = format!("matvec {mv:.1e}, LU {lu:.1e}, BiCGSTAB {it:.1e}");
    if mv <= 1e-9 && lu <= 1e-9 && it <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion10() -> Outcome {
    let start = Instant::now();
    let mut worst_quad = 0.0f64;
    for degree in [2, 4, 6] {
        let rule = quadrature_rule(degree).map_err(|e| e.to_string())?;
        let wsum: f64 = rule.weights().iter().sum();
        worst_quad = worst_quad.max((wsum - 0.5).abs());
        for a in 0..=degree as i32 {
            for b in 0..=(degree as i32 - a) {
                // int_T x^a y^b = a! b! / (a + b + 2)!
                let fact = |n: i32| (1..=n).map(f64::from).product::<f64>();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let got = rule.integrate(|x| x[0].powi(a) * x[1].powi(b));
                worst_quad = worst_quad.max((got - exact).abs());
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_basis = 0.0f64;
    let nodes: [[f64; 2]; 6] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
    for degree in [Degree::P1, Degree::P2] {
        let m = degree.nodes_per_cell();
        for i in 0..m {
            let bv = eval_basis(degree, nodes[i]);
            for j in 0..m {
                let delta = if i == j { 1.0 } else { 0.0 };
                worst_basis = worst_basis.max((bv.values[j] - delta).abs());
            }
        }
        for _ in 0..200 {
            let (s, t) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let xi = if s + t > 1.0 { [1.0 - s, 1.0 - t] } else { [s, t] };
            let bv = eval_basis(degree, xi);
            let sum: f64 = bv.values[..m].iter().sum();
            let gx: f64 = bv.gradients[..m].iter().map(|g| g[0]).sum();
            let gy: f64 = bv.gradients[..m].iter().map(|g| g[1]).sum();
            worst_basis = worst_basis.max((sum - 1.0).abs()).max(gx.abs()).max(gy.abs());
        }
    }

    // Interpolate a random quadratic on a random triangle; the P2 Laplacian
    // must reproduce it exactly.
    let mut worst_lap = 0.0f64;
    for _ in 0..200 {
        let v: [[f64; 2]; 3] = std::array::from_fn(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let Ok(geom) = ElementGeometry::new(v) else { continue };
        if geom.det < 1e-2 {
            continue;
        }
        let c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let q = |x: [f64; 2]| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1];
        let exact_lap = 2.0 * (c[3] + c[5]);
        let coeffs: Vec<f64> = nodes.iter().map(|&xi| q(geom.map(xi))).collect();
        let xi = [rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5)];
        let pb = physical_gradients_and_laplacians(&geom, &eval_basis(Degree::P2, xi)).map_err(|e| e.to_string())?;
        let lap: f64 = (0..6).map(|i| coeffs[i] * pb.laplacians[i]).sum();
        worst_lap = worst_lap.max((lap - exact_lap).abs() / exact_lap.abs().max(1.0));
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("quadrature {worst_quad:.1e}, basis {worst_basis:.1e}, P2 Laplacian {worst_lap:.1e}, {secs:.2}s");
    if worst_quad <= 1e-13 && worst_basis <= 1e-13 && worst_lap <= 1e-10 && secs <= 5.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    let (tag, detail, ok) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{tag} criterion {id:>2} ({name}): {detail}");
    ok
}

fn main() {
    let start = Instant::now();
    let mut ok = true;
    ok &= run(6, "patch test", criterion6);
    ok &= run(7, "Galerkin recovery at tau = 0", criterion7);
    ok &= run(8, "tau formulas", criterion8);
    ok &= run(9, "linear algebra oracles", criterion9);
    ok &= run(10, "quadrature and basis", criterion10);

    let b = ladder("small-diffusion", MethodSelection::Both);
    ok &= run(2, "small-diffusion SGS order", || criterion2(b.as_ref()?));
    ok &= run(3, "small-diffusion Galerkin degradation", || criterion3(b.as_ref()?));
    let c = ladder("diffusion-dominated", MethodSelection::Both);
    ok &= run(4, "diffusion-dominated agreement", || criterion4(c.as_ref()?));
    let a = ladder("smooth", MethodSelection::Sgs);
    ok &= run(5, "smooth flow order", || criterion5(a.as_ref()?));

    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if !ok {
        std::process::exit(1);
    }
}
