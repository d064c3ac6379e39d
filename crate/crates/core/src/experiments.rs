//! Experiment definitions and drivers: convergence studies with a
//! manufactured solution, fixed-mesh sweeps over the diffusion coefficient,
//! and Galerkin versus bound-preserving comparisons.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use crate::analysis::{eoc, error_norms, nodal_extrema, ErrorRecord};
use crate::forms::{assemble_system, Coefficient, Dirichlet, ProblemSpec, SemilinearForm, Source, Tensor2};
use crate::linalg::SparseCholesky;
use crate::mesh::{generate_criss_cross, generate_obtuse_layer, Mesh, MeshError, Point, Rect, DEFAULT_APEX_SHIFT};
use crate::projection::{is_admissible, BoundsBox};
use crate::solver::{galerkin_solve, nonlinear_richardson_solve, richardson_solve, SolveReport, SolverConfig};
use crate::space::{Degree, FeSpace, NodalField};
use crate::{FeError, SolveError};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("experiment `{id}` does not support `{operation}`")]
    Unsupported { id: ExperimentId, operation: &'static str },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    SmoothK1,
    SmoothK2,
    Obtuse,
    Layers,
    Discbc,
    InteriorLayer,
    AnisotropicNl,
    Custom,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::SmoothK1,
        ExperimentId::SmoothK2,
        ExperimentId::Obtuse,
        ExperimentId::Layers,
        ExperimentId::Discbc,
        ExperimentId::InteriorLayer,
        ExperimentId::AnisotropicNl,
        ExperimentId::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::SmoothK1 => "smooth-k1",
            ExperimentId::SmoothK2 => "smooth-k2",
            ExperimentId::Obtuse => "obtuse",
            ExperimentId::Layers => "layers",
            ExperimentId::Discbc => "discbc",
            ExperimentId::InteriorLayer => "interior-layer",
            ExperimentId::AnisotropicNl => "anisotropic-nl",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Mesh used by sweeps, comparisons and custom solves.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// criss-cross with `n x n` cells on the unit square
    CrissCross { n: usize },
    ObtuseLayer { level: usize },
    File(PathBuf),
}

/// How a nonlinear problem is treated in a custom run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReactionModel {
    Linear { mu: f64 },
    Power { p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub degree: usize,
    /// refinement levels of a convergence study
    pub levels: Vec<usize>,
    pub mesh: MeshSource,
    pub eps: f64,
    /// diffusion values of a sweep or comparison
    pub eps_values: Vec<f64>,
    pub reaction: ReactionModel,
    /// eigenvalues of the anisotropy matrix before scaling by `eps`
    pub anisotropy: (f64, f64),
    pub theta: f64,
    /// constant source for layers, anisotropic-nl and custom runs
    pub source: f64,
    /// Dirichlet value per boundary marker for anisotropic-nl and custom runs
    pub marker_values: Vec<(i32, f64)>,
    /// discontinuous boundary data: endpoints of the unit segments get 1
    pub discbc_closed_ones: bool,
    pub apex_shift: f64,
    pub solver: SolverConfig,
    /// damping used for `eps <= small_eps_threshold` in sweeps
    pub small_eps_omega: f64,
    pub small_eps_threshold: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ExperimentConfig {
    /// Defaults matching the published setup of each experiment.
    pub fn preset(id: ExperimentId) -> ExperimentConfig {
        let base = ExperimentConfig {
            id,
            degree: 1,
            levels: vec![],
            mesh: MeshSource::CrissCross { n: FIXED_H_CELLS },
            eps: 1e-5,
            eps_values: vec![],
            reaction: ReactionModel::Linear { mu: 1.0 },
            anisotropy: (100.0, 1.0),
            theta: -PI / 6.0,
            source: 1.0,
            marker_values: vec![],
            discbc_closed_ones: true,
            apex_shift: DEFAULT_APEX_SHIFT,
            solver: SolverConfig::default(),
            small_eps_omega: 0.5,
            small_eps_threshold: 1e-5,
            lower: 0.0,
            upper: 1.0,
        };
        let sweep_eps = vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];
        // omega = 1 cycles between two active sets on coarse levels of the
        // smooth and obtuse studies, so those start at 1 and damp on stall
        let damped = SolverConfig::default().with_auto_damp(true);
        match id {
            ExperimentId::SmoothK1 => ExperimentConfig { levels: (3..=8).collect(), solver: damped, ..base },
            ExperimentId::SmoothK2 => ExperimentConfig { degree: 2, levels: (2..=7).collect(), solver: damped, ..base },
            ExperimentId::Obtuse => ExperimentConfig { levels: (3..=8).collect(), solver: damped, ..base },
            ExperimentId::Layers | ExperimentId::Discbc => ExperimentConfig { eps_values: sweep_eps, ..base },
            ExperimentId::InteriorLayer => ExperimentConfig { eps_values: vec![1e-4, 1e-7], solver: damped, ..base },
            ExperimentId::AnisotropicNl => ExperimentConfig {
                mesh: MeshSource::File(PathBuf::from("data/meshes/square_hole.mesh")),
                eps_values: vec![1e-5],
                reaction: ReactionModel::Power { p: 4.0 },
                source: 0.0,
                marker_values: vec![(1, 0.0), (2, 2.0)],
                upper: 2.0,
                solver: damped,
                ..base
            },
            ExperimentId::Custom => ExperimentConfig { eps_values: vec![1e-5], source: 1.0, upper: f64::INFINITY, ..base },
        }
    }

    pub fn bounds(&self) -> Result<BoundsBox, FeError> {
        BoundsBox::new(self.lower, self.upper)
    }

    /// Damping for a given diffusion value in a sweep.
    pub fn omega_for(&self, eps: f64) -> f64 {
        if eps <= self.small_eps_threshold * (1.0 + 1e-9) {
            self.small_eps_omega
        } else {
            self.solver.omega
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        Degree::new(self.degree)?;
        self.bounds()?;
        self.solver.validate()?;
        if !(self.small_eps_omega > 0.0 && self.small_eps_omega <= 1.0) {
            return Err(ExperimentError::Config(format!("small_eps_omega must be in (0, 1], got {}", self.small_eps_omega)));
        }
        if !(self.eps > 0.0) || self.eps_values.iter().any(|&e| !(e > 0.0)) {
            return Err(ExperimentError::Config("diffusion values must be positive".into()));
        }
        if let MeshSource::File(path) = &self.mesh {
            if matches!(self.id, ExperimentId::AnisotropicNl | ExperimentId::Custom) && !path.exists() {
                return Err(ExperimentError::Config(format!("mesh fixture {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}

/// Cells per side of the criss-cross mesh with `h_max` closest to 0.02.
pub const FIXED_H_CELLS: usize = 50;

/// Smallest `n` with `1/n` inside `[lo, hi]`.
pub fn cells_for_h(lo: f64, hi: f64) -> Option<usize> {
    (1..10_000).find(|&n| {
        let h = 1.0 / n as f64;
        h >= lo && h <= hi
    })
}

/// A nodal field with enough mesh data to be written as VTK or CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExport {
    pub name: String,
    pub nodes: Vec<Point>,
    /// 3 vertices, or 3 vertices and 3 edge midpoints
    pub cells: Vec<Vec<usize>>,
    pub degree: usize,
    pub values: Vec<f64>,
}

impl FieldExport {
    pub fn from_field(name: impl Into<String>, field: &NodalField<'_>) -> FieldExport {
        let space = field.space();
        FieldExport {
            name: name.into(),
            nodes: space.nodes().to_vec(),
            cells: (0..space.mesh().num_triangles()).map(|t| space.cell_dofs(t).to_vec()).collect(),
            degree: space.degree().order(),
            values: field.values().to_vec(),
        }
    }
}

/// One convergence level with its solution.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub records: Vec<ErrorRecord>,
    pub eoc_l2: Vec<Option<f64>>,
    pub eoc_energy: Vec<Option<f64>>,
    pub fields: Vec<FieldExport>,
    /// every `u+` passed the exact admissibility check
    pub all_admissible: bool,
}

struct Manufactured {
    rect: Rect,
    u: fn(Point) -> f64,
    grad: fn(Point) -> [f64; 2],
    /// `-eps lap u + mu u = source_factor(eps, mu) * u`
    lap_factor: f64,
}

fn manufactured(id: ExperimentId) -> Option<Manufactured> {
    match id {
        ExperimentId::SmoothK1 | ExperimentId::SmoothK2 => Some(Manufactured {
            rect: Rect::UNIT_SQUARE,
            u: |p| (PI * p[0]).sin() * (PI * p[1]).sin(),
            grad: |p| [PI * (PI * p[0]).cos() * (PI * p[1]).sin(), PI * (PI * p[0]).sin() * (PI * p[1]).cos()],
            lap_factor: 2.0 * PI * PI,
        }),
        ExperimentId::Obtuse => Some(Manufactured {
            rect: Rect::new(-1.0, 1.0, 0.0, 1.0),
            u: |p| (PI * (p[0] + 1.0) / 2.0).sin() * (PI * p[1]).sin(),
            grad: |p| {
                let (a, b) = (PI * (p[0] + 1.0) / 2.0, PI * p[1]);
                [0.5 * PI * a.cos() * b.sin(), PI * a.sin() * b.cos()]
            },
            lap_factor: PI * PI / 4.0 + PI * PI,
        }),
        _ => None,
    }
}

fn convergence_mesh(cfg: &ExperimentConfig, level: usize, rect: Rect) -> Result<Mesh, ExperimentError> {
    Ok(match cfg.id {
        ExperimentId::Obtuse => generate_obtuse_layer(level, rect, cfg.apex_shift)?,
        _ => {
            let n = 1usize
                .checked_shl(level as u32)
                .filter(|&n| n <= 1 << 12)
                .ok_or_else(|| ExperimentError::Config(format!("level {level} too fine")))?;
            generate_criss_cross(n, n, rect)?
        }
    })
}

/// Runs one level per entry of `cfg.levels` and reports errors of `u+`.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceStudy, ExperimentError> {
    cfg.validate()?;
    let m = manufactured(cfg.id).ok_or(ExperimentError::Unsupported { id: cfg.id, operation: "convergence" })?;
    let mu = match cfg.reaction {
        ReactionModel::Linear { mu } => mu,
        ReactionModel::Power { .. } => return Err(ExperimentError::Unsupported { id: cfg.id, operation: "convergence" }),
    };
    let bounds = cfg.bounds()?;
    let eps = cfg.eps;
    let factor = eps * m.lap_factor + mu;
    let u = m.u;
    let spec = ProblemSpec::linear(eps, mu).with_source_fn(move |p| factor * u(p));
    let mut records = Vec::new();
    let mut fields = Vec::new();
    let mut all_admissible = true;
    for &level in &cfg.levels {
        let mesh = Arc::new(convergence_mesh(cfg, level, m.rect)?);
        let h = mesh.quality().h_max;
        let space = FeSpace::build(mesh, cfg.degree)?;
        let system = assemble_system(&space, &spec, cfg.solver.alpha)?;
        let report = richardson_solve(&system, &bounds, &cfg.solver)?;
        let e = error_norms(&report.u_plus, m.u, m.grad, &spec);
        let (lo, hi) = nodal_extrema(&report.u_plus).unwrap_or((f64::NAN, f64::NAN));
        all_admissible &= is_admissible(&report.u_plus, &bounds);
        records.push(ErrorRecord {
            level,
            h,
            ndof: space.n_interior(),
            err_l2: e.l2,
            err_h1semi: e.h1_semi,
            err_energy: e.energy,
            err_quasinorm: None,
            iterations: report.iterations,
            converged: report.converged,
            min_nodal: lo,
            max_nodal: hi,
        });
        fields.push(FieldExport::from_field(format!("u_plus_level{level}"), &report.u_plus));
    }
    let eoc_l2 = eoc(&records.iter().map(|r| (r.h, r.err_l2)).collect::<Vec<_>>());
    let eoc_energy = eoc(&records.iter().map(|r| (r.h, r.err_energy)).collect::<Vec<_>>());
    Ok(ConvergenceStudy { records, eoc_l2, eoc_energy, fields, all_admissible })
}

/// Boundary data that is 1 on the first half of every side when walking
/// the unit square counter-clockwise, and 0 on the second half.
pub fn discbc_value(p: Point, closed_ones: bool) -> f64 {
    let tol = 1e-12;
    let on = |a: f64, b: f64| a.abs() < tol && b > -tol && b < 1.0 + tol;
    // parameter along each side in the counter-clockwise direction
    let mut params = Vec::new();
    if on(p[1], p[0]) {
        params.push(p[0]);
    }
    if on(p[0] - 1.0, p[1]) {
        params.push(p[1]);
    }
    if on(p[1] - 1.0, p[0]) {
        params.push(1.0 - p[0]);
    }
    if on(p[0], p[1]) {
        params.push(1.0 - p[1]);
    }
    let one = |s: f64| {
        if closed_ones {
            s >= -tol && s <= 0.5 + tol
        } else {
            s > tol && s < 0.5 - tol
        }
    };
    if params.iter().any(|&s| one(s)) {
        1.0
    } else {
        0.0
    }
}

fn fixed_mesh(cfg: &ExperimentConfig) -> Result<Mesh, ExperimentError> {
    Ok(match &cfg.mesh {
        MeshSource::CrissCross { n } => generate_criss_cross(*n, *n, Rect::UNIT_SQUARE)?,
        MeshSource::ObtuseLayer { level } => generate_obtuse_layer(*level, Rect::new(-1.0, 1.0, 0.0, 1.0), cfg.apex_shift)?,
        MeshSource::File(path) => Mesh::read(path)?,
    })
}

/// Linear or semilinear problem of a sweep/compare experiment at one `eps`.
fn problem_for(cfg: &ExperimentConfig, eps: f64) -> Result<ProblemSpec, ExperimentError> {
    let mu = match cfg.reaction {
        ReactionModel::Linear { mu } => mu,
        ReactionModel::Power { .. } => 0.0,
    };
    let spec = match cfg.id {
        ExperimentId::Layers => ProblemSpec::linear(eps, mu).with_source(Source::Constant(cfg.source)),
        ExperimentId::Discbc => {
            let closed = cfg.discbc_closed_ones;
            ProblemSpec::linear(eps, mu)
                .with_source(Source::Constant(0.0))
                .with_dirichlet(Dirichlet::Function(Arc::new(move |p, _| discbc_value(p, closed))))
        }
        ExperimentId::InteriorLayer => ProblemSpec::linear(eps, mu).with_source_fn(interior_layer_source),
        ExperimentId::AnisotropicNl | ExperimentId::Custom => {
            let d = Tensor2::rotated(cfg.anisotropy.0, cfg.anisotropy.1, cfg.theta).scaled(eps);
            let dirichlet = Dirichlet::PerMarker(cfg.marker_values.iter().copied().collect());
            let mut spec = match cfg.reaction {
                ReactionModel::Linear { mu } => ProblemSpec::linear(1.0, mu),
                ReactionModel::Power { p } => ProblemSpec::semilinear(d, p),
            };
            spec.diffusion = Coefficient::Constant(d);
            spec.with_source(Source::Constant(cfg.source)).with_dirichlet(dirichlet)
        }
        _ => return Err(ExperimentError::Unsupported { id: cfg.id, operation: "fixed-mesh run" }),
    };
    Ok(spec.with_bounds(cfg.bounds()?))
}

/// Source with an interior minimum: 1/2 on `[1/4, 3/4]^2`, 1 elsewhere.
pub fn interior_layer_source(p: Point) -> f64 {
    if (0.25..=0.75).contains(&p[0]) && (0.25..=0.75).contains(&p[1]) {
        0.5
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub omega: f64,
    pub omega_used: f64,
    pub iterations: usize,
    pub converged: bool,
    pub min_nodal: f64,
    pub max_nodal: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone)]
pub struct SweepStudy {
    pub n: Option<usize>,
    pub h: f64,
    pub rows: Vec<SweepRow>,
    pub fields: Vec<FieldExport>,
}

/// Solves the layers or discbc problem on one mesh for every `eps`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepStudy, ExperimentError> {
    if !matches!(cfg.id, ExperimentId::Layers | ExperimentId::Discbc) {
        return Err(ExperimentError::Unsupported { id: cfg.id, operation: "sweep" });
    }
    cfg.validate()?;
    let mesh = Arc::new(fixed_mesh(cfg)?);
    let h = mesh.quality().h_max;
    let space = FeSpace::build(mesh, cfg.degree)?;
    let bounds = cfg.bounds()?;
    let mut rows = Vec::new();
    let mut fields = Vec::new();
    for &eps in &cfg.eps_values {
        let spec = problem_for(cfg, eps)?;
        let system = assemble_system(&space, &spec, cfg.solver.alpha)?;
        let omega = cfg.omega_for(eps);
        let solver = SolverConfig { omega, ..cfg.solver.clone() };
        let report = richardson_solve(&system, &bounds, &solver)?;
        rows.push(sweep_row(eps, omega, &report, &bounds));
        fields.push(FieldExport::from_field(format!("u_plus_eps{eps:e}"), &report.u_plus));
    }
    let n = match cfg.mesh {
        MeshSource::CrissCross { n } => Some(n),
        _ => None,
    };
    Ok(SweepStudy { n, h, rows, fields })
}

fn sweep_row(eps: f64, omega: f64, report: &SolveReport<'_>, bounds: &BoundsBox) -> SweepRow {
    let (lo, hi) = nodal_extrema(&report.u_plus).unwrap_or((f64::NAN, f64::NAN));
    SweepRow {
        eps,
        omega,
        omega_used: report.omega_used,
        iterations: report.iterations,
        converged: report.converged,
        min_nodal: lo,
        max_nodal: hi,
        admissible: is_admissible(&report.u_plus, bounds),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Oscillation {
    pub min_nodal: f64,
    pub max_nodal: f64,
    /// `max(0, lower - min)`
    pub undershoot: f64,
    /// `max(0, max - upper)`
    pub overshoot: f64,
}

impl Oscillation {
    fn of(field: &NodalField<'_>, lower: f64, upper: f64) -> Oscillation {
        let (lo, hi) = nodal_extrema(field).unwrap_or((f64::NAN, f64::NAN));
        Oscillation { min_nodal: lo, max_nodal: hi, undershoot: (lower - lo).max(0.0), overshoot: (hi - upper).max(0.0) }
    }
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub eps: f64,
    pub galerkin: Oscillation,
    pub bound_preserving: Oscillation,
    pub iterations: usize,
    pub converged: bool,
    pub omega_used: f64,
    pub admissible: bool,
    /// `(s, galerkin, bound-preserving)` at `(s, s)` on the diagonal
    pub cross_section: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct CompareStudy {
    pub h: f64,
    pub rows: Vec<CompareRow>,
    pub fields: Vec<FieldExport>,
}

/// Samples on the diagonal `x = y`; points outside the mesh are skipped.
pub const CROSS_SECTION_SAMPLES: usize = 201;

/// Barycentric coordinates of `x` in triangle `t`, if inside.
fn locate(mesh: &Mesh, x: Point) -> Option<(usize, [f64; 3])> {
    (0..mesh.num_triangles()).find_map(|t| {
        let [a, b, c] = mesh.triangle_points(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (x[1] - a[1]) * (c[0] - a[0])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
        let l0 = 1.0 - l1 - l2;
        let tol = -1e-12;
        (l0 >= tol && l1 >= tol && l2 >= tol).then_some((t, [l0, l1, l2]))
    })
}

fn cross_section(galerkin: &NodalField<'_>, bp: &NodalField<'_>) -> Vec<(f64, f64, f64)> {
    let mesh = galerkin.space().mesh();
    (0..CROSS_SECTION_SAMPLES)
        .filter_map(|k| {
            let s = k as f64 / (CROSS_SECTION_SAMPLES - 1) as f64;
            let (t, l) = locate(mesh, [s, s])?;
            Some((s, galerkin.evaluate_in(t, l), bp.evaluate_in(t, l)))
        })
        .collect()
}

/// Galerkin solution of the semilinear problem (no bounds), by Newton's
/// method with residual backtracking. Reference output only.
pub fn nonlinear_galerkin<'s>(
    system: &crate::forms::AssembledSystem<'s>,
    tol: f64,
    max_iter: usize,
) -> Result<NodalField<'s>, ExperimentError> {
    let space = system.space();
    let p = system
        .spec()
        .exponent()
        .ok_or(ExperimentError::Config("nonlinear Galerkin needs a power-law reaction".into()))?;
    let form = SemilinearForm::new(space, p)?;
    let full = |u: &[f64]| {
        let mut v = system.boundary_values().to_vec();
        for (&d, &x) in space.interior_dofs().iter().zip(u) {
            v[d] = x;
        }
        v
    };
    let residual = |u: &[f64]| -> Vec<f64> {
        let w = full(u);
        let b = form.residual(space, &w, &w);
        let au = system.matrix().mul_vec(u);
        system.load().iter().zip(au).zip(b).map(|((f, a), b)| f - a - b).collect()
    };
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut u = system.factor().map_err(SolveError::from)?.solve(system.load());
    let mut r = residual(&u);
    let scale = norm(system.load()).max(1e-300);
    for _ in 0..max_iter {
        let rn = norm(&r);
        if rn <= tol * scale {
            return Ok(system.field(&u));
        }
        let jac = system.matrix().add_scaled(1.0, &form.jacobian(space, &full(&u)));
        let du = SparseCholesky::new(&jac).map_err(SolveError::from)?.solve(&r);
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + step * b).collect();
            let rt = residual(&trial);
            if norm(&rt) < rn || step < 1e-6 {
                u = trial;
                r = rt;
                break;
            }
            step *= 0.5;
        }
    }
    Err(SolveError::NotConverged { iterations: max_iter, last_update: norm(&r) / scale }.into())
}

/// Galerkin and bound-preserving solutions side by side.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<CompareStudy, ExperimentError> {
    if !matches!(cfg.id, ExperimentId::InteriorLayer | ExperimentId::AnisotropicNl) {
        return Err(ExperimentError::Unsupported { id: cfg.id, operation: "compare" });
    }
    cfg.validate()?;
    let mesh = Arc::new(fixed_mesh(cfg)?);
    let h = mesh.quality().h_max;
    let space = FeSpace::build(mesh, cfg.degree)?;
    let bounds = cfg.bounds()?;
    let mut rows = Vec::new();
    let mut fields = Vec::new();
    for &eps in &cfg.eps_values {
        let spec = problem_for(cfg, eps)?;
        let system = assemble_system(&space, &spec, cfg.solver.alpha)?;
        let (galerkin, report) = if spec.exponent().is_some() {
            let g = nonlinear_galerkin(&system, 1e-12, 100)?;
            (g, nonlinear_richardson_solve(&system, &bounds, &cfg.solver)?)
        } else {
            (galerkin_solve(&system)?, richardson_solve(&system, &bounds, &cfg.solver)?)
        };
        let lower = cfg.lower;
        let upper = cfg.upper;
        rows.push(CompareRow {
            eps,
            galerkin: Oscillation::of(&galerkin, lower, upper),
            bound_preserving: Oscillation::of(&report.u_plus, lower, upper),
            iterations: report.iterations,
            converged: report.converged,
            omega_used: report.omega_used,
            admissible: is_admissible(&report.u_plus, &bounds),
            cross_section: cross_section(&galerkin, &report.u_plus),
        });
        fields.push(FieldExport::from_field(format!("u_fem_eps{eps:e}"), &galerkin));
        fields.push(FieldExport::from_field(format!("u_plus_eps{eps:e}"), &report.u_plus));
    }
    Ok(CompareStudy { h, rows, fields })
}

/// Result of a single custom solve.
#[derive(Debug, Clone)]
pub struct CustomRun {
    pub h: f64,
    pub row: SweepRow,
    pub field: FieldExport,
}

/// One bound-preserving solve of a user-described problem.
pub fn run_custom(cfg: &ExperimentConfig) -> Result<CustomRun, ExperimentError> {
    cfg.validate()?;
    let mesh = Arc::new(fixed_mesh(cfg)?);
    let h = mesh.quality().h_max;
    let space = FeSpace::build(mesh, cfg.degree)?;
    let bounds = cfg.bounds()?;
    let custom = ExperimentConfig { id: ExperimentId::Custom, ..cfg.clone() };
    let spec = problem_for(&custom, cfg.eps)?;
    let system = assemble_system(&space, &spec, cfg.solver.alpha)?;
    let report = if spec.exponent().is_some() {
        nonlinear_richardson_solve(&system, &bounds, &cfg.solver)?
    } else {
        richardson_solve(&system, &bounds, &cfg.solver)?
    };
    Ok(CustomRun {
        h,
        row: sweep_row(cfg.eps, cfg.solver.omega, &report, &bounds),
        field: FieldExport::from_field("u_plus", &report.u_plus),
    })
}

/// Agreement between the Richardson solution and the projected Gauss-Seidel
/// oracle on one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheckRow {
    pub case: String,
    pub degree: usize,
    pub eps: f64,
    pub ndof: usize,
    pub iterations: usize,
    pub converged: bool,
    /// number of interior dofs with `u- != 0`
    pub active: usize,
    pub max_gap: f64,
    pub tolerance: f64,
}

impl OracleCheckRow {
    pub fn passed(&self) -> bool {
        self.converged && self.active > 0 && self.max_gap <= self.tolerance
    }
}

pub const LINEAR_ORACLE_TOL: f64 = 1e-8;
pub const NONLINEAR_ORACLE_TOL: f64 = 1e-6;

/// Source whose unconstrained solution leaves `[0, 1]` on both sides.
fn two_sided_source(eps: f64) -> impl Fn(Point) -> f64 + Send + Sync + 'static {
    let scale = 1.0 + 5.0 * PI * PI * eps;
    move |p: Point| scale * 2.0 * (2.0 * PI * p[0]).sin() * (PI * p[1]).sin() + 0.5
}

fn oracle_row(case: &str, eps: f64, report: &SolveReport<'_>, oracle: &[f64], tolerance: f64) -> OracleCheckRow {
    let u = report.u_plus.interior_values();
    let space = report.u_plus.space();
    OracleCheckRow {
        case: case.into(),
        degree: space.degree().order(),
        eps,
        ndof: space.ndofs(),
        iterations: report.iterations,
        converged: report.converged,
        active: space.interior_dofs().iter().filter(|&&i| report.u_minus.values()[i] != 0.0).count(),
        max_gap: u.iter().zip(oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        tolerance,
    }
}

/// Compares the bound-preserving solution with the obstacle-problem oracle
/// on criss-cross and obtuse meshes, both degrees, and one `p = 4` problem.
pub fn run_oracle_check() -> Result<Vec<OracleCheckRow>, ExperimentError> {
    use crate::oracle::{projected_gauss_seidel, projected_nonlinear_gauss_seidel, FormReaction, ViProblem};
    let bounds = BoundsBox::new(0.0, 1.0)?;
    let cfg = SolverConfig { tol: 1e-14, max_iter: 20_000, ..Default::default() }.with_auto_damp(true);
    let meshes = [
        ("criss-cross 8x8", Arc::new(generate_criss_cross(8, 8, Rect::UNIT_SQUARE)?)),
        ("obtuse level 2", Arc::new(generate_obtuse_layer(2, Rect::new(-1.0, 1.0, 0.0, 1.0), DEFAULT_APEX_SHIFT)?)),
    ];
    let mut rows = Vec::new();
    for (name, mesh) in &meshes {
        for k in [1, 2] {
            let space = FeSpace::build(mesh.clone(), k)?;
            for eps in [1.0, 1e-3] {
                let spec = ProblemSpec::linear(eps, 1.0).with_source_fn(two_sided_source(eps));
                let system = assemble_system(&space, &spec, 1.0)?;
                let report = richardson_solve(&system, &bounds, &cfg)?;
                let problem = ViProblem::from_system(&system, &bounds)?;
                let oracle = projected_gauss_seidel(&problem, 1e-15, 200_000)?;
                rows.push(oracle_row(name, eps, &report, &oracle.u, LINEAR_ORACLE_TOL));
            }
        }
    }
    let space = FeSpace::build(Arc::new(generate_criss_cross(6, 6, Rect::UNIT_SQUARE)?), 1)?;
    let eps = 1e-2;
    let spec = ProblemSpec::semilinear(Tensor2::isotropic(eps), 4.0)
        .with_source_fn(|p| 3.0 * (2.0 * PI * p[0]).sin() * (PI * p[1]).sin() + 0.5);
    let system = assemble_system(&space, &spec, 1.0)?;
    let report = nonlinear_richardson_solve(&system, &bounds, &cfg)?;
    let reaction = FormReaction::new(&system, 4.0)?;
    let problem = ViProblem::from_system(&system, &bounds)?.with_reaction(reaction);
    let oracle = projected_nonlinear_gauss_seidel(&problem, 1e-14, 100_000)?;
    rows.push(oracle_row("criss-cross 6x6 p=4", eps, &report, &oracle.u, NONLINEAR_ORACLE_TOL));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("nope".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn fixed_h_cells() {
        assert_eq!(cells_for_h(0.018, 0.022), Some(46));
        let h = 1.0 / FIXED_H_CELLS as f64;
        assert!((0.018..=0.022).contains(&h));
    }

    #[test]
    fn discbc_ties_go_to_one() {
        for p in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]] {
            assert_eq!(discbc_value(p, true), 1.0, "{p:?}");
        }
        assert_eq!(discbc_value([0.25, 0.0], true), 1.0);
        assert_eq!(discbc_value([0.75, 0.0], true), 0.0);
        assert_eq!(discbc_value([1.0, 0.25], true), 1.0);
        assert_eq!(discbc_value([1.0, 0.75], true), 0.0);
        assert_eq!(discbc_value([0.75, 1.0], true), 1.0);
        assert_eq!(discbc_value([0.25, 1.0], true), 0.0);
        assert_eq!(discbc_value([0.0, 0.75], true), 1.0);
        assert_eq!(discbc_value([0.0, 0.25], true), 0.0);
        assert_eq!(discbc_value([0.5, 0.0], false), 0.0);
        assert_eq!(discbc_value([0.25, 0.0], false), 1.0);
    }

    #[test]
    fn interior_source() {
        assert_eq!(interior_layer_source([0.5, 0.5]), 0.5);
        assert_eq!(interior_layer_source([0.25, 0.75]), 0.5);
        assert_eq!(interior_layer_source([0.1, 0.5]), 1.0);
    }

    #[test]
    fn small_convergence_run() {
        let cfg = ExperimentConfig { levels: vec![2, 3, 4], ..ExperimentConfig::preset(ExperimentId::SmoothK1) };
        let s = run_convergence(&cfg).unwrap();
        assert_eq!(s.records.len(), 3);
        assert_eq!(s.eoc_l2.len(), 2);
        assert!(s.all_admissible);
        assert!(s.records.windows(2).all(|w| w[1].h < w[0].h));
    }

    #[test]
    fn unsupported_operations() {
        let cfg = ExperimentConfig::preset(ExperimentId::Layers);
        assert!(matches!(run_convergence(&cfg), Err(ExperimentError::Unsupported { .. })));
        assert!(matches!(run_compare(&cfg), Err(ExperimentError::Unsupported { .. })));
        let cfg = ExperimentConfig::preset(ExperimentId::SmoothK1);
        assert!(matches!(run_sweep(&cfg), Err(ExperimentError::Unsupported { .. })));
    }
}
