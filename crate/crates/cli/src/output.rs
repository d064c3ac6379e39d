//! CSV tables, VTK legacy files and the generated plotting script.
//!
//! Floats are written with `{:e}`, the shortest representation that
//! round-trips, so identical runs give identical bytes.

use std::fmt::Write as _;

use bpfem::experiments::{CompareStudy, ConvergenceStudy, FieldExport, OracleCheckRow, SweepRow};

pub const CONVERGENCE_HEADER: &str = "level,h,ndof,err_l2,err_energy,eoc_l2,eoc_energy,iters,converged";
pub const SWEEP_HEADER: &str = "eps,omega,omega_used,iters,converged,min_nodal,max_nodal,admissible";
pub const COMPARE_HEADER: &str =
    "eps,iters,converged,omega_used,fem_min,fem_max,fem_undershoot,fem_overshoot,bp_min,bp_max,bp_undershoot,bp_overshoot";
pub const CROSS_SECTION_HEADER: &str = "s,x,y,u_fem,u_plus";
pub const ORACLE_HEADER: &str = "case,degree,eps,ndof,iters,converged,active,max_gap,tolerance,passed";

pub const VTK_TRIANGLE: u8 = 5;
pub const VTK_QUADRATIC_TRIANGLE: u8 = 22;

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |x| format!("{x:e}"))
}

pub fn convergence_csv(study: &ConvergenceStudy) -> String {
    let mut out = format!("{CONVERGENCE_HEADER}\n");
    for (i, r) in study.records.iter().enumerate() {
        // the first level has no rate
        let (l2, en) = if i == 0 { (None, None) } else { (study.eoc_l2[i - 1], study.eoc_energy[i - 1]) };
        let _ = writeln!(
            out,
            "{},{:e},{},{:e},{:e},{},{},{},{}",
            r.level,
            r.h,
            r.ndof,
            r.err_l2,
            r.err_energy,
            opt(l2),
            opt(en),
            r.iterations,
            r.converged
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{},{},{:e},{:e},{}",
            r.eps, r.omega, r.omega_used, r.iterations, r.converged, r.min_nodal, r.max_nodal, r.admissible
        );
    }
    out
}

pub fn compare_csv(study: &CompareStudy) -> String {
    let mut out = format!("{COMPARE_HEADER}\n");
    for r in &study.rows {
        let (g, b) = (&r.galerkin, &r.bound_preserving);
        let _ = writeln!(
            out,
            "{:e},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.eps,
            r.iterations,
            r.converged,
            r.omega_used,
            g.min_nodal,
            g.max_nodal,
            g.undershoot,
            g.overshoot,
            b.min_nodal,
            b.max_nodal,
            b.undershoot,
            b.overshoot
        );
    }
    out
}

/// Samples along the diagonal `x = y`, parametrised by `s = x`.
pub fn cross_section_csv(samples: &[(f64, f64, f64)]) -> String {
    let mut out = format!("{CROSS_SECTION_HEADER}\n");
    for &(s, fem, bp) in samples {
        let _ = writeln!(out, "{s:e},{s:e},{s:e},{fem:e},{bp:e}");
    }
    out
}

pub fn oracle_csv(rows: &[OracleCheckRow]) -> String {
    let mut out = format!("{ORACLE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:e},{},{},{},{},{:e},{:e},{}",
            r.case,
            r.degree,
            r.eps,
            r.ndof,
            r.iterations,
            r.converged,
            r.active,
            r.max_gap,
            r.tolerance,
            r.passed()
        );
    }
    out
}

/// VTK legacy ASCII unstructured grid with one point-data scalar.
pub fn vtk(field: &FieldExport) -> String {
    let cell_type = if field.degree == 2 { VTK_QUADRATIC_TRIANGLE } else { VTK_TRIANGLE };
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", field.name);
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", field.nodes.len());
    for p in &field.nodes {
        let _ = writeln!(out, "{:e} {:e} 0e0", p[0], p[1]);
    }
    let size: usize = field.cells.iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {size}", field.cells.len());
    for c in &field.cells {
        let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{} {}", c.len(), ids.join(" "));
    }
    let _ = writeln!(out, "CELL_TYPES {}", field.cells.len());
    for _ in &field.cells {
        let _ = writeln!(out, "{cell_type}");
    }
    let _ = writeln!(out, "POINT_DATA {}", field.values.len());
    let _ = writeln!(out, "SCALARS {} double 1", field.name);
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for v in &field.values {
        let _ = writeln!(out, "{v:e}");
    }
    out
}

/// matplotlib script for the CSV files written next to it.
pub fn plot_script(kind: &str) -> String {
    let body = match kind {
        "convergence" => {
            r#"rows = read("convergence.csv")
h = [float(r["h"]) for r in rows]
fig, ax = plt.subplots()
ax.loglog(h, [float(r["err_l2"]) for r in rows], "o-", label="L2")
ax.loglog(h, [float(r["err_energy"]) for r in rows], "s-", label="energy")
ax.set_xlabel("h")
ax.set_ylabel("error")
ax.legend()
fig.savefig("convergence.png", dpi=150)
"#
        }
        "sweep" => {
            r#"rows = read("sweep.csv")
fig, ax = plt.subplots()
ax.semilogx([float(r["eps"]) for r in rows], [int(r["iters"]) for r in rows], "o-")
ax.set_xlabel("eps")
ax.set_ylabel("iterations")
fig.savefig("sweep.png", dpi=150)
"#
        }
        "compare" => {
            r#"for path in sorted(glob.glob("cross_section_*.csv")):
    rows = read(path)
    s = [float(r["s"]) for r in rows]
    fig, ax = plt.subplots()
    ax.plot(s, [float(r["u_fem"]) for r in rows], label="Galerkin")
    ax.plot(s, [float(r["u_plus"]) for r in rows], label="bound-preserving")
    ax.set_xlabel("x = y")
    ax.legend()
    fig.savefig(path.replace(".csv", ".png"), dpi=150)
"#
        }
        _ => "",
    };
    format!(
        r#"#!/usr/bin/env python3
# Generated by bpfem. Run from this directory.
import csv
import glob

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


{body}"#
    )
}
