//! Scenarios shared by the integration suites and the acceptance report.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use bpfem::forms::{assemble_system, scalar_power_bounds_check, ProblemSpec, Tensor2};
use bpfem::mesh::{generate_criss_cross, generate_obtuse_layer, Mesh, Rect, DEFAULT_APEX_SHIFT};
use bpfem::oracle::{projected_gauss_seidel, projected_nonlinear_gauss_seidel, FormReaction, ViProblem};
use bpfem::projection::{is_admissible, split, split_interior, BoundsBox};
use bpfem::solver::{galerkin_solve, nonlinear_richardson_solve, richardson_solve, SolverConfig};
use bpfem::space::FeSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn criss_cross(n: usize) -> Arc<Mesh> {
    Arc::new(generate_criss_cross(n, n, Rect::UNIT_SQUARE).unwrap())
}

pub fn obtuse(level: usize) -> Arc<Mesh> {
    Arc::new(generate_obtuse_layer(level, Rect::new(-1.0, 1.0, 0.0, 1.0), DEFAULT_APEX_SHIFT).unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_box() -> BoundsBox {
    BoundsBox::new(0.0, 1.0).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Linear problem whose unconstrained solution leaves `[0, 1]` on both sides.
pub fn two_sided_spec(eps: f64) -> ProblemSpec {
    let scale = 1.0 + 5.0 * PI * PI * eps;
    ProblemSpec::linear(eps, 1.0).with_source_fn(move |p| scale * 2.0 * (2.0 * PI * p[0]).sin() * (PI * p[1]).sin() + 0.5)
}

/// `max |u+ - u_PGS|` for the linear method.
pub fn linear_oracle_gap(mesh: Arc<Mesh>, k: usize, eps: f64) -> f64 {
    let space = FeSpace::build(mesh, k).unwrap();
    let spec = two_sided_spec(eps);
    let system = assemble_system(&space, &spec, 1.0).unwrap();
    let bounds = unit_box();
    let cfg = SolverConfig { tol: 1e-14, max_iter: 20_000, ..Default::default() }.with_auto_damp(true);
    let report = richardson_solve(&system, &bounds, &cfg).unwrap();
    assert!(report.converged, "richardson did not converge (k = {k}, eps = {eps})");
    assert!(report.u_minus.values().iter().any(|&v| v != 0.0), "the box should be active");
    let problem = ViProblem::from_system(&system, &bounds).unwrap();
    let oracle = projected_gauss_seidel(&problem, 1e-15, 200_000).unwrap();
    max_abs_diff(&report.u_plus.interior_values(), &oracle.u)
}

/// `max |u+ - u_PNGS|` for `p = 4` on criss-cross(6,6).
pub fn nonlinear_oracle_gap() -> f64 {
    let space = FeSpace::build(criss_cross(6), 1).unwrap();
    let spec = ProblemSpec::semilinear(Tensor2::isotropic(1e-2), 4.0)
        .with_source_fn(|p| 3.0 * (2.0 * PI * p[0]).sin() * (PI * p[1]).sin() + 0.5);
    let system = assemble_system(&space, &spec, 1.0).unwrap();
    let bounds = unit_box();
    let cfg = SolverConfig { tol: 1e-14, max_iter: 20_000, ..Default::default() }.with_auto_damp(true);
    let report = nonlinear_richardson_solve(&system, &bounds, &cfg).unwrap();
    assert!(report.converged, "nonlinear richardson did not converge");
    assert!(report.u_minus.values().iter().any(|&v| v != 0.0), "the box should be active");
    let reaction = FormReaction::new(&system, 4.0).unwrap();
    let problem = ViProblem::from_system(&system, &bounds).unwrap().with_reaction(reaction);
    let oracle = projected_nonlinear_gauss_seidel(&problem, 1e-14, 100_000).unwrap();
    max_abs_diff(&report.u_plus.interior_values(), &oracle.u)
}

pub struct Consistency {
    pub galerkin_admissible: bool,
    pub iterations: usize,
    pub minus_is_zero: bool,
    pub gap_to_galerkin: f64,
}

/// Diffusion-dominated problem on a right-angled criss-cross mesh whose
/// Galerkin solution stays inside the box.
pub fn consistency_case() -> Consistency {
    let space = FeSpace::build(criss_cross(16), 1).unwrap();
    let f = 0.5 * (2.0 * PI * PI + 1.0);
    let spec = ProblemSpec::linear(1.0, 1.0).with_source_fn(move |p| f * (PI * p[0]).sin() * (PI * p[1]).sin());
    let system = assemble_system(&space, &spec, 1.0).unwrap();
    let bounds = unit_box();
    let galerkin = galerkin_solve(&system).unwrap();
    let report = richardson_solve(&system, &bounds, &SolverConfig::default()).unwrap();
    Consistency {
        galerkin_admissible: is_admissible(&galerkin, &bounds),
        iterations: report.iterations,
        minus_is_zero: report.u_minus.values().iter().all(|&v| v == 0.0),
        gap_to_galerkin: max_abs_diff(report.u_plus.values(), galerkin.values()),
    }
}

/// Number of violations of idempotence, complementarity and nodewise
/// Lipschitz continuity over random fields.
pub fn projection_violations(samples: usize) -> usize {
    let space = FeSpace::build(criss_cross(4), 2).unwrap();
    let bounds = BoundsBox::new(-0.5, 1.5).unwrap();
    let mut r = rng(11);
    let mut bad = 0;
    for _ in 0..samples {
        let v = space.interpolate(|_| r.gen_range(-3.0..3.0));
        let w = space.interpolate(|_| r.gen_range(-3.0..3.0));
        let (vp, vm) = split(&v, &bounds).unwrap();
        let (wp, _) = split(&w, &bounds).unwrap();
        let (vpp, vpm) = split(&vp, &bounds).unwrap();
        if vpp.values() != vp.values() || vpm.values().iter().any(|&x| x != 0.0) {
            bad += 1;
        }
        for &i in space.interior_dofs() {
            let (m, p) = (vm.values()[i], vp.values()[i]);
            if m != 0.0 && p != -0.5 && p != 1.5 {
                bad += 1;
            }
            if (p - wp.values()[i]).abs() > (v.values()[i] - w.values()[i]).abs() {
                bad += 1;
            }
        }
    }
    bad
}

/// Violations of `s(v- - w-, v+ - w+) >= 0` and of `s(v-, w - v+) <= 0`
/// for admissible `w`, with exact signs.
pub fn s_monotone_violations(samples: usize) -> usize {
    let space = FeSpace::build(obtuse(3), 1).unwrap();
    let system = assemble_system(&space, &ProblemSpec::linear(1e-3, 1.0), 1.0).unwrap();
    let s = system.s_diag();
    let bounds = unit_box();
    let n = space.n_interior();
    let mut r = rng(12);
    let mut bad = 0;
    for _ in 0..samples {
        let v: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..3.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..3.0)).collect();
        let adm: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..=1.0)).collect();
        let (vp, vm) = split_interior(&space, &v, &bounds);
        let (wp, wm) = split_interior(&space, &w, &bounds);
        let two: f64 = (0..n).map(|i| s[i] * (vm[i] - wm[i]) * (vp[i] - wp[i])).sum();
        let one: f64 = (0..n).map(|i| s[i] * vm[i] * (adm[i] - vp[i])).sum();
        bad += usize::from(two < 0.0) + usize::from(one > 0.0);
    }
    bad
}

pub struct ScalarBounds {
    pub sign_violations: usize,
    /// smallest `monotone_lhs / monotone_rhs`
    pub c2: f64,
    /// largest `lipschitz_lhs / lipschitz_rhs`
    pub c1: f64,
    /// samples whose ratio exceeded `p - 1`
    pub above_mean_value_bound: usize,
}

pub fn scalar_bounds(samples: usize) -> ScalarBounds {
    let mut r = rng(13);
    let mut out = ScalarBounds { sign_violations: 0, c2: f64::INFINITY, c1: 0.0, above_mean_value_bound: 0 };
    for _ in 0..samples {
        let x: f64 = r.gen_range(-10.0..10.0);
        let y: f64 = r.gen_range(-10.0..10.0);
        let p: f64 = r.gen_range(2.0..6.0);
        let t = scalar_power_bounds_check(x, y, p);
        if t.monotone_lhs < 0.0 || t.monotone_rhs < 0.0 || t.lipschitz_lhs < 0.0 {
            out.sign_violations += 1;
        }
        if t.monotone_rhs > 0.0 {
            out.c2 = out.c2.min(t.monotone_lhs / t.monotone_rhs);
        }
        if t.lipschitz_rhs > 0.0 {
            let c = t.lipschitz_lhs / t.lipschitz_rhs;
            out.c1 = out.c1.max(c);
            if c > (p - 1.0) * (1.0 + 1e-12) {
                out.above_mean_value_bound += 1;
            }
        }
    }
    out
}

/// Worst `(a(u+, v - u+) - <F, v - u+>) / |F|_inf` over random admissible `v`.
pub fn best_approximation_margin(samples: usize) -> f64 {
    let space = FeSpace::build(criss_cross(8), 1).unwrap();
    let system = assemble_system(&space, &two_sided_spec(1e-3), 1.0).unwrap();
    let bounds = unit_box();
    let cfg = SolverConfig { tol: 1e-14, max_iter: 20_000, ..Default::default() }.with_auto_damp(true);
    let report = richardson_solve(&system, &bounds, &cfg).unwrap();
    let up = report.u_plus.interior_values();
    let f = system.load();
    let f_inf = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let au = system.matrix().mul_vec(&up);
    let mut r = rng(14);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let v: Vec<f64> = (0..up.len()).map(|_| r.gen_range(0.0..=1.0)).collect();
        let margin: f64 = (0..up.len()).map(|i| (au[i] - f[i]) * (v[i] - up[i])).sum();
        worst = worst.min(margin / f_inf);
    }
    worst
}

/// `|u-|_s / |u_FEM - u+|_a` on successive criss-cross levels.
pub fn complementary_ratios(levels: &[usize]) -> Vec<f64> {
    let f = 1e-5 * 2.0 * PI * PI + 1.0;
    let spec = ProblemSpec::linear(1e-5, 1.0).with_source_fn(move |p| f * (PI * p[0]).sin() * (PI * p[1]).sin());
    let bounds = unit_box();
    levels
        .iter()
        .map(|&level| {
            let space = FeSpace::build(criss_cross(1 << level), 1).unwrap();
            let system = assemble_system(&space, &spec, 1.0).unwrap();
            let galerkin = galerkin_solve(&system).unwrap().interior_values();
            let cfg = SolverConfig::default().with_auto_damp(true);
            let report = richardson_solve(&system, &bounds, &cfg).unwrap();
            assert!(report.converged);
            let up = report.u_plus.interior_values();
            let um = report.u_minus.interior_values();
            let stab: f64 = um.iter().zip(system.s_diag()).map(|(v, s)| s * v * v).sum();
            let e: Vec<f64> = galerkin.iter().zip(&up).map(|(g, u)| g - u).collect();
            stab.sqrt() / system.matrix().bilinear(&e, &e).sqrt()
        })
        .collect()
}

/// Violations of the strict quasinorm equivalence at `p = 4` and of the
/// `p = 2` reduction to the L2 norm, over random P1 fields.
pub fn quasinorm_violations(samples: usize) -> usize {
    use bpfem::analysis::{lp_norm_pow, quasinorm_with};
    let space = FeSpace::build(criss_cross(4), 1).unwrap();
    let mut r = rng(21);
    let mut bad = 0;
    for _ in 0..samples {
        let v = space.interpolate(|_| r.gen_range(-2.0..2.0));
        let w = space.interpolate(|_| r.gen_range(-2.0..2.0));
        let ev = |t: usize, l: [f64; 3], _| v.evaluate_in(t, l);
        let ew = |t: usize, l: [f64; 3], _| w.evaluate_in(t, l);
        let p = 4.0;
        let q2 = quasinorm_with(&space, ev, ew, p).unwrap().powi(2);
        let vp = lp_norm_pow(&space, ev, p);
        let sum = lp_norm_pow(&space, |t, l, x| ev(t, l, x).abs() + ew(t, l, x).abs(), p);
        bad += usize::from(!(vp < q2)) + usize::from(!(q2 < sum.powf((p - 2.0) / p) * vp.powf(2.0 / p)));
        let l2 = lp_norm_pow(&space, ev, 2.0).sqrt();
        let q = quasinorm_with(&space, ev, ew, 2.0).unwrap();
        bad += usize::from((q - l2).abs() > 1e-12 * l2);
    }
    bad
}
