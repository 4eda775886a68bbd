use std::path::Path;
use std::process::{Command, Output};

use stabfem::harness::CSV_HEADER;

fn stabfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stabfem"))
        .args(args)
        .env_remove("STABFEM_CASE")
        .env_remove("STABFEM_METHOD")
        .output()
        .expect("binary runs")
}

fn untimed(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn unknown_case_is_a_config_error() {
    let out = stabfem(&["converge", "--case", "nope", "--meshes", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn bad_mesh_ladder_is_a_config_error() {
    let out = stabfem(&["converge", "--meshes", "10,15"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn taus_prints_formula_values() {
    let out = stabfem(&["taus", "--h", "0.1", "--d", "1", "--u", "1", "--alpha", "10", "--c1", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("tau1 = 2.493765586035e-3"), "{text}");
    assert!(text.contains("tau2 = 1.000000000000e0"), "{text}");
    assert!(text.contains("tau3 = 4.000000000000e-3"), "{text}");
}

#[test]
fn converge_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for k in 0..2 {
        let base = dir.path().join(format!("run{k}.csv"));
        let out = stabfem(&["converge", "--case", "b", "--method", "both", "--meshes", "4,8", "--out", base.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        runs.push(base);
    }
    for method in ["galerkin", "sgs"] {
        let a = dir.path().join(format!("run0_{method}.csv"));
        let b = dir.path().join(format!("run1_{method}.csv"));
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(untimed(&a), untimed(&b));
    }
}

#[test]
fn precedence_flags_over_env_over_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# test\ncase = diffusion-dominated\nmethod = galerkin\nmeshes = 4\n").unwrap();
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_stabfem"));
        cmd.args(["--config", cfg.to_str().unwrap(), "solve"]).args(extra);
        cmd.env_remove("STABFEM_METHOD").env_remove("STABFEM_CASE");
        if let Some(m) = env {
            cmd.env("STABFEM_METHOD", m);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let from_file = run(None, &[]);
    assert!(from_file.contains("case diffusion-dominated method galerkin n 4"), "{from_file}");
    let from_env = run(Some("sgs"), &[]);
    assert!(from_env.contains("method sgs"), "{from_env}");
    let from_flag = run(Some("sgs"), &["--method", "galerkin"]);
    assert!(from_flag.contains("method galerkin") && !from_flag.contains("method sgs"), "{from_flag}");
}

#[test]
fn solve_writes_vtk_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let vtk = dir.path().join("field.vtk");
    let out = stabfem(&["solve", "--case", "a", "--method", "sgs", "--n", "3", "--vtk", vtk.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&vtk).unwrap();
    assert!(text.starts_with("# vtk DataFile Version 3.0"));
    assert!(text.contains("POINTS 16"));
    assert!(text.contains("concentration"));

    let md = dir.path().join("table.md");
    let out = stabfem(&["converge", "--case", "a", "--method", "sgs", "--meshes", "4,8", "--markdown", md.to_str().unwrap()]);
    assert!(out.status.success());
    let table = std::fs::read_to_string(&md).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with("| 4 ") || l.starts_with("| 8 ")).count(), 2);
}
