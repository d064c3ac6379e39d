//! Galerkin solve and the damped Richardson iteration for the linear and
//! semilinear bound-preserving methods.

use crate::forms::{AssembledSystem, SemilinearForm};
use crate::projection::{split_interior, BoundsBox};
use crate::space::NodalField;
use crate::SolveError;

/// Consecutive non-contracting updates that trigger halving of `omega`.
pub const GROWTH_WINDOW: usize = 5;

/// An update counts as non-contracting when it shrinks by less than this
/// relative amount. A period-two cycle between two active sets repeats the
/// same update norm forever, so strict growth alone never fires on it.
pub const STALL_RTOL: f64 = 1e-8;

/// Iterations without a new smallest update after which `omega` is halved.
/// Catches bounded wandering between active sets. A new smallest update
/// must undercut the previous one by the relative margin `PROGRESS_RTOL`.
pub const STALL_WINDOW: usize = 25;
pub const PROGRESS_RTOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub auto_damp: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { alpha: 1.0, omega: 1.0, tol: 1e-12, max_iter: 10_000, auto_damp: false }
    }
}

impl SolverConfig {
    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_auto_damp(mut self, on: bool) -> Self {
        self.auto_damp = on;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(SolveError::InvalidConfig(format!("omega must be in (0, 1], got {}", self.omega)));
        }
        if !(self.tol > 0.0) {
            return Err(SolveError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(SolveError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(SolveError::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport<'s> {
    pub u: NodalField<'s>,
    /// the numerical solution
    pub u_plus: NodalField<'s>,
    pub u_minus: NodalField<'s>,
    pub iterations: usize,
    /// `||u^(n+1) - u^n||_0` per iteration
    pub update_history: Vec<f64>,
    /// damping used at each iteration
    pub omega_history: Vec<f64>,
    pub omega_used: f64,
    pub converged: bool,
    /// `F - A u+ - S u- (- B(u+))` over interior dofs at the returned `u`
    pub residual: Vec<f64>,
}

/// One iterate as seen by an observer.
#[derive(Debug)]
pub struct Iterate<'a> {
    pub iteration: usize,
    pub u: &'a [f64],
    pub plus: &'a [f64],
    pub minus: &'a [f64],
}

/// Solves `A u = F` on interior dofs and lifts with the Dirichlet values.
pub fn galerkin_solve<'s>(system: &AssembledSystem<'s>) -> Result<NodalField<'s>, SolveError> {
    let u = system.factor()?.solve(system.load());
    Ok(system.field(&u))
}

pub fn richardson_solve<'s>(
    system: &AssembledSystem<'s>,
    bounds: &BoundsBox,
    config: &SolverConfig,
) -> Result<SolveReport<'s>, SolveError> {
    iterate(system, bounds, config, None, |_| {})
}

/// As [`richardson_solve`], calling `observer` after every update.
pub fn richardson_solve_observed<'s>(
    system: &AssembledSystem<'s>,
    bounds: &BoundsBox,
    config: &SolverConfig,
    observer: impl FnMut(&Iterate<'_>),
) -> Result<SolveReport<'s>, SolveError> {
    iterate(system, bounds, config, None, observer)
}

/// Richardson iteration for the semilinear problem: the power reaction of
/// the constrained part is added to the explicit residual while the linear
/// diffusion operator stays the preconditioner.
pub fn nonlinear_richardson_solve<'s>(
    system: &AssembledSystem<'s>,
    bounds: &BoundsBox,
    config: &SolverConfig,
) -> Result<SolveReport<'s>, SolveError> {
    let p = system
        .spec()
        .exponent()
        .ok_or_else(|| SolveError::InvalidConfig("nonlinear solve needs a power-law reaction".into()))?;
    let form = SemilinearForm::new(system.space(), p)?;
    iterate(system, bounds, config, Some(&form), |_| {})
}

fn full_vector(system: &AssembledSystem<'_>, interior: &[f64]) -> Vec<f64> {
    let mut full = system.boundary_values().to_vec();
    for (&d, &v) in system.space().interior_dofs().iter().zip(interior) {
        full[d] = v;
    }
    full
}

fn residual(system: &AssembledSystem<'_>, form: Option<&SemilinearForm>, plus: &[f64], minus: &[f64]) -> Vec<f64> {
    let ap = system.matrix().mul_vec(plus);
    let mut r: Vec<f64> = system
        .load()
        .iter()
        .zip(&ap)
        .zip(minus.iter().zip(system.s_diag()))
        .map(|((f, a), (m, s))| f - a - s * m)
        .collect();
    if let Some(form) = form {
        let full = full_vector(system, plus);
        let b = form.residual(system.space(), &full, &full);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
    }
    r
}

fn iterate<'s>(
    system: &AssembledSystem<'s>,
    bounds: &BoundsBox,
    config: &SolverConfig,
    form: Option<&SemilinearForm>,
    mut observer: impl FnMut(&Iterate<'_>),
) -> Result<SolveReport<'s>, SolveError> {
    config.validate()?;
    if config.alpha != system.alpha() {
        return Err(SolveError::InvalidConfig(format!(
            "system assembled with alpha = {} but config has alpha = {}",
            system.alpha(),
            config.alpha
        )));
    }
    let space = system.space();
    bounds.validate(Some(space.ndofs()))?;
    let factor = system.factor()?;
    let u0 = factor.solve(system.load());

    let mut omega = config.omega;
    let mut u = u0.clone();
    let mut update_history = Vec::new();
    let mut omega_history = Vec::new();
    let mut growing = 0usize;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut converged = false;

    while update_history.len() < config.max_iter {
        let (plus, minus) = split_interior(space, &u, bounds);
        let r = residual(system, form, &plus, &minus);
        let mut delta = factor.solve(&r);
        for d in delta.iter_mut() {
            *d *= omega;
        }
        for (ui, di) in u.iter_mut().zip(&delta) {
            *ui += di;
        }
        let norm = system.l2_norm_interior(&delta);
        let prev = update_history.last().copied();
        update_history.push(norm);
        omega_history.push(omega);
        {
            let (plus, minus) = split_interior(space, &u, bounds);
            observer(&Iterate { iteration: update_history.len(), u: &u, plus: &plus, minus: &minus });
        }
        if norm <= config.tol {
            converged = true;
            break;
        }
        let diverging = !norm.is_finite() || prev.is_some_and(|p| norm >= p * (1.0 - STALL_RTOL));
        growing = if diverging { growing + 1 } else { 0 };
        if norm < best * (1.0 - PROGRESS_RTOL) {
            best = norm;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if !norm.is_finite() && !config.auto_damp {
            break;
        }
        let stalled = growing >= GROWTH_WINDOW || since_best >= STALL_WINDOW;
        if config.auto_damp && (stalled || !norm.is_finite()) {
            omega *= 0.5;
            growing = 0;
            best = f64::INFINITY;
            since_best = 0;
            u.clone_from(&u0);
        }
    }

    let (plus, minus) = split_interior(space, &u, bounds);
    let residual = residual(system, form, &plus, &minus);
    let u_plus = system.field(&plus);
    let u_minus = NodalField::from_interior(space, &minus, &vec![0.0; space.ndofs()]);
    Ok(SolveReport {
        u: system.field(&u),
        u_plus,
        u_minus,
        iterations: update_history.len(),
        update_history,
        omega_history,
        omega_used: omega,
        converged,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{assemble_system, Dirichlet, ProblemSpec, Tensor2};
    use crate::linalg::dense_cholesky_solve;
    use crate::mesh::{generate_criss_cross, BoundaryEdge, Mesh, Rect};
    use crate::projection::is_admissible;
    use crate::space::FeSpace;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn cc(n: usize, k: usize) -> FeSpace {
        FeSpace::build(Arc::new(generate_criss_cross(n, n, Rect::UNIT_SQUARE).unwrap()), k).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig::default().with_omega(0.0).validate().is_err());
        assert!(SolverConfig::default().with_omega(1.5).validate().is_err());
        assert!(SolverConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_iter: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_data_gives_zero() {
        let space = cc(3, 1);
        let sys = assemble_system(&space, &ProblemSpec::linear(1.0, 1.0), 1.0).unwrap();
        let u = galerkin_solve(&sys).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn galerkin_matches_dense_oracle() {
        let space = cc(8, 1);
        let spec = ProblemSpec::linear(1.0, 1.0).with_source_fn(|p| (2.0 * PI * PI + 1.0) * (PI * p[0]).sin() * (PI * p[1]).sin());
        let sys = assemble_system(&space, &spec, 1.0).unwrap();
        let u = galerkin_solve(&sys).unwrap();
        let dense = dense_cholesky_solve(&sys.matrix().to_dense(), sys.load()).unwrap();
        for (k, &d) in space.interior_dofs().iter().enumerate() {
            assert!((u.values()[d] - dense[k]).abs() < 1e-10);
        }
    }

    /// One interior node: the single interior vertex of criss-cross(1,1).
    fn single_dof_mesh() -> FeSpace {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
            vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
            (0..4).map(|i| BoundaryEdge { vertices: [i, (i + 1) % 4], marker: 1 }).collect(),
        )
        .unwrap();
        FeSpace::build(Arc::new(m), 1).unwrap()
    }

    #[test]
    fn scalar_recurrence_by_hand() {
        // scale the source so that u0 = F / A = 2 with box [0, 1] and s = A
        let space = single_dof_mesh();
        let base = assemble_system(&space, &ProblemSpec::linear(1.0, 0.0), 1.0).unwrap();
        let a = base.matrix().get(0, 0);
        let s = base.s_diag()[0];
        assert!((a - 4.0).abs() < 1e-14 && (s - 1.0).abs() < 1e-14);
        // F = 2a; then u1 = u0 + (F - a*1 - s*1)/a
        let area_int = 1.0 / 3.0; // integral of the hat over the 4 triangles of area 1/4
        let f = 2.0 * a / area_int;
        let sys = assemble_system(&space, &ProblemSpec::linear(1.0, 0.0).with_source(crate::forms::Source::Constant(f)), 1.0).unwrap();
        let mut first = None;
        let rep = richardson_solve_observed(&sys, &BoundsBox::new(0.0, 1.0).unwrap(), &SolverConfig::default(), |it| {
            first.get_or_insert(it.u[0]);
        })
        .unwrap();
        let u1 = 2.0 + (2.0 * a - a - s) / a;
        assert!((first.unwrap() - u1).abs() < 1e-12);
        assert!(rep.converged);
        assert_eq!(rep.u_plus.values()[4], 1.0);
        // fixed point: a*1 + s*(u - 1) = 2a
        assert!((a + s * (rep.u.values()[4] - 1.0) - 2.0 * a).abs() < 1e-10);
    }

    #[test]
    fn admissible_galerkin_converges_in_one_iteration() {
        let space = cc(6, 1);
        let spec = ProblemSpec::linear(1.0, 1.0).with_source_fn(|p| (2.0 * PI * PI + 1.0) * (PI * p[0]).sin() * (PI * p[1]).sin());
        let sys = assemble_system(&space, &spec, 1.0).unwrap();
        let gal = galerkin_solve(&sys).unwrap();
        let bounds = BoundsBox::nonnegative();
        assert!(is_admissible(&gal, &bounds));
        let rep = richardson_solve(&sys, &bounds, &SolverConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.u_minus.values().iter().all(|&v| v == 0.0));
        for (a, b) in rep.u_plus.values().iter().zip(gal.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn report_invariants_on_every_iterate() {
        let space = cc(8, 2);
        let spec = ProblemSpec::linear(1e-3, 1.0).with_source(crate::forms::Source::Constant(1.0));
        let sys = assemble_system(&space, &spec, 1.0).unwrap();
        let bounds = BoundsBox::new(0.0, 1.0).unwrap();
        let mut seen = 0;
        let rep = richardson_solve_observed(&sys, &bounds, &SolverConfig::default(), |it| {
            seen += 1;
            for k in 0..it.u.len() {
                assert_eq!(it.plus[k] + it.minus[k], it.u[k]);
                assert!(it.plus[k] >= 0.0 && it.plus[k] <= 1.0);
            }
        })
        .unwrap();
        assert!(rep.converged);
        assert_eq!(seen, rep.iterations);
        assert!(is_admissible(&rep.u_plus, &bounds));
        for i in 0..space.ndofs() {
            assert_eq!(rep.u_plus.values()[i] + rep.u_minus.values()[i], rep.u.values()[i]);
        }
    }

    #[test]
    fn auto_damp_halves_omega() {
        // a tiny stabilisation weight makes the undamped iteration oscillate
        let space = cc(6, 1);
        let spec = ProblemSpec::linear(1e-6, 1.0).with_source(crate::forms::Source::Constant(1.0));
        let sys = assemble_system(&space, &spec, 1.0).unwrap();
        let bounds = BoundsBox::new(0.0, 0.5).unwrap();
        let cfg = SolverConfig { auto_damp: true, max_iter: 2000, ..Default::default() };
        let rep = richardson_solve(&sys, &bounds, &cfg).unwrap();
        assert!(rep.omega_used <= 1.0);
        let ratio = 1.0 / rep.omega_used;
        assert_eq!(ratio, ratio.round());
        assert!((ratio as u64).is_power_of_two());
        assert!(rep.omega_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn alpha_mismatch_is_rejected() {
        let space = cc(2, 1);
        let sys = assemble_system(&space, &ProblemSpec::linear(1.0, 1.0), 2.0).unwrap();
        let r = richardson_solve(&sys, &BoundsBox::nonnegative(), &SolverConfig::default());
        assert!(matches!(r, Err(SolveError::InvalidConfig(_))));
    }

    #[test]
    fn nonlinear_zero_data() {
        let space = cc(4, 1);
        let sys = assemble_system(&space, &ProblemSpec::semilinear(Tensor2::isotropic(1.0), 4.0), 1.0).unwrap();
        let rep = nonlinear_richardson_solve(&sys, &BoundsBox::nonnegative(), &SolverConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.u.values().iter().all(|&v| v == 0.0));
        let lin = assemble_system(&space, &ProblemSpec::linear(1.0, 1.0), 1.0).unwrap();
        assert!(nonlinear_richardson_solve(&lin, &BoundsBox::nonnegative(), &SolverConfig::default()).is_err());
    }

    #[test]
    fn nonlinear_p2_matches_linear() {
        let space = cc(6, 1);
        let f = |p: [f64; 2]| (2.0 * PI * PI + 1.0) * (PI * p[0]).sin() * (PI * p[1]).sin();
        let g = Dirichlet::Function(Arc::new(|p, _| 0.1 * (1.0 + p[0])));
        let lin_spec = ProblemSpec::linear(1.0, 1.0).with_source_fn(f).with_dirichlet(g.clone());
        let nl_spec = ProblemSpec::semilinear(Tensor2::isotropic(1.0), 2.0).with_source_fn(f).with_dirichlet(g);
        let lin = assemble_system(&space, &lin_spec, 1.0).unwrap();
        let nl = assemble_system(&space, &nl_spec, 1.0).unwrap();
        let bounds = BoundsBox::nonnegative();
        let a = richardson_solve(&lin, &bounds, &SolverConfig::default()).unwrap();
        let b = nonlinear_richardson_solve(&nl, &bounds, &SolverConfig::default()).unwrap();
        assert!(b.converged);
        assert!(a.u_minus.values().iter().all(|&v| v == 0.0));
        assert!(b.u_minus.values().iter().all(|&v| v == 0.0));
        for (x, y) in a.u_plus.values().iter().zip(b.u_plus.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}
