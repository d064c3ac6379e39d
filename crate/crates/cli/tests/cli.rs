use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bpfem::analysis::eoc;

fn bpfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpfem")).args(args).output().expect("binary runs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let last = text.lines().last().expect("an error line");
    serde_json::from_str(last).expect("machine-readable stderr")
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn col(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].clone()).collect()
}

fn floats(xs: &[String]) -> Vec<f64> {
    xs.iter().map(|x| x.parse().unwrap()).collect()
}

fn vtk_scalars(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let tail = text.split("LOOKUP_TABLE default\n").nth(1).unwrap();
    tail.lines().map(|l| l.parse().unwrap()).collect()
}

#[test]
fn convergence_table_is_deterministic_and_uses_the_eoc_helper() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = bpfem(&["convergence", "--levels", "2-4", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = fs::read(a.join("convergence.csv")).unwrap();
    assert_eq!(bytes, fs::read(b.join("convergence.csv")).unwrap());
    assert_eq!(fs::read(a.join("meta.txt")).unwrap(), fs::read(b.join("meta.txt")).unwrap());

    let (header, rows) = csv(&a.join("convergence.csv"));
    assert_eq!(header.join(","), "level,h,ndof,err_l2,err_energy,eoc_l2,eoc_energy,iters,converged");
    assert_eq!(col(&header, &rows, "level"), ["2", "3", "4"]);
    let h = floats(&col(&header, &rows, "h"));
    let e = floats(&col(&header, &rows, "err_l2"));
    let expected = eoc(&h.iter().copied().zip(e).collect::<Vec<_>>());
    let written = col(&header, &rows, "eoc_l2");
    assert_eq!(written[0], "");
    for (w, x) in written[1..].iter().zip(expected) {
        assert_eq!(w.parse::<f64>().unwrap(), x.unwrap());
    }
    for level in 2..=4 {
        let u = vtk_scalars(&a.join(format!("vtk/u_plus_level{level}.vtk")));
        assert!(u.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
    assert!(a.join("plot.py").exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "[experiment]\nid = smooth-k2\nlevels = 1-2\n[solver]\nomega = 0.5\nalpha = 2\n[output]\ndir = from-file\n").unwrap();
    let o = bpfem(&["convergence", "--config", cfg.to_str().unwrap(), "--omega", "0.25"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = fs::read_to_string(dir.path().join("from-file/meta.txt")).unwrap();
    assert!(meta.contains("experiment = smooth-k2\n"));
    assert!(meta.contains("degree = 1\n") || meta.contains("degree = 2\n"));
    assert!(meta.contains("omega = 2.5e-1\n"), "{meta}");
    assert!(meta.contains("alpha = 2e0\n"));
    assert!(meta.contains("levels = 1, 2\n"));
}

#[test]
fn config_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[solver]\nomega = 1\n\ntolerance = 3\n").unwrap();
    let o = bpfem(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert_eq!(err["error"]["kind"], "config");
    assert_eq!(err["error"]["line"], 4);
}

#[test]
fn out_of_range_parameters_are_config_errors() {
    let o = bpfem(&["sweep", "--omega", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "config");
    let o = bpfem(&["compare", "--experiment", "anisotropic-nl", "--config", "/nonexistent/x.cfg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_mesh_fixture_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "[experiment]\nid = custom\n[mesh]\npath = nowhere.mesh\n").unwrap();
    let o = bpfem(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["error"]["message"].as_str().unwrap().contains("does not exist"));
}

#[test]
fn unsupported_and_usage_errors_are_json() {
    let o = bpfem(&["convergence", "--experiment", "layers"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "unsupported");
    let o = bpfem(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");
    let o = bpfem(&["convergence", "--levels", "6-3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(bpfem(&["--help"]).status.success());
}

#[test]
fn sweep_writes_one_row_and_field_per_diffusion_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "[experiment]\nid = layers\n[mesh]\nn = 16\n[problem]\neps_values = 1e-2, 1e-3\n").unwrap();
    let out = dir.path().join("out");
    let o = bpfem(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&out.join("sweep.csv"));
    assert_eq!(header.join(","), "eps,omega,omega_used,iters,converged,min_nodal,max_nodal,admissible");
    assert_eq!(col(&header, &rows, "eps"), ["1e-2", "1e-3"]);
    assert!(col(&header, &rows, "admissible").iter().all(|a| a == "true"));
    for eps in ["1e-2", "1e-3"] {
        let u = vtk_scalars(&out.join(format!("vtk/u_plus_eps{eps}.vtk")));
        assert!(u.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
    let meta = fs::read_to_string(out.join("meta.txt")).unwrap();
    assert!(meta.contains("n = 16\n"));
}

#[test]
fn compare_exports_both_solutions_and_a_cross_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "[experiment]\nid = interior-layer\n[mesh]\nn = 16\n[problem]\neps_values = 1e-7\n").unwrap();
    let out = dir.path().join("out");
    let o = bpfem(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&out.join("compare.csv"));
    assert_eq!(col(&header, &rows, "bp_undershoot"), ["0e0"]);
    assert_eq!(col(&header, &rows, "bp_overshoot"), ["0e0"]);
    let fem_osc: f64 = col(&header, &rows, "fem_undershoot")[0].parse::<f64>().unwrap()
        + col(&header, &rows, "fem_overshoot")[0].parse::<f64>().unwrap();
    assert!(fem_osc > 0.0);
    let (xh, xs) = csv(&out.join("cross_section_eps1e-7.csv"));
    assert_eq!(xh.join(","), "s,x,y,u_fem,u_plus");
    assert!(xs.len() > 100);
    assert!(floats(&col(&xh, &xs, "u_plus")).iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
    assert!(out.join("vtk/u_fem_eps1e-7.vtk").exists());
    assert!(out.join("vtk/u_plus_eps1e-7.vtk").exists());
}

#[test]
fn solve_runs_a_custom_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "[experiment]\nid = custom\ndegree = 2\n[mesh]\nn = 8\n[problem]\neps = 1e-6\nsource = 1\nmarker_values = 1:0\n[bounds]\nlower = 0\nupper = inf\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = bpfem(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--no-auto-damp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&out.join("solve.csv"));
    assert_eq!(col(&header, &rows, "admissible"), ["true"]);
    let text = fs::read_to_string(out.join("vtk/u_plus.vtk")).unwrap();
    assert!(text.contains("\nCELL_TYPES 256\n22\n"));
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bpfem(&["oracle-check", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&dir.path().join("oracle_check.csv"));
    assert_eq!(rows.len(), 9);
    assert!(col(&header, &rows, "passed").iter().all(|p| p == "true"));
}
