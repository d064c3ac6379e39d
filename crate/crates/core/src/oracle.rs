//! Reference solvers for the discrete obstacle problem: projected
//! Gauss-Seidel for the linear case and a projected nonlinear Gauss-Seidel
//! with scalar bisection for the power-law reaction.

use crate::forms::{AssembledSystem, SemilinearForm};
use crate::linalg::CsrMatrix;
use crate::projection::BoundsBox;
use crate::space::FeSpace;
use crate::SolveError;

/// Bisection stops once the bracket is this narrow (relative to `max(1, |t|)`).
pub const BISECTION_TOL: f64 = 1e-14;

/// Nodal contribution `B_i` of a monotone reaction term.
pub trait NodalReaction {
    /// `B_i(u)` with `u[i]` replaced by `t`; `u` is indexed like the problem.
    fn entry(&self, i: usize, u: &[f64], t: f64) -> f64;
}

/// The semilinear form of an assembled system, seen over its interior dofs
/// with the Dirichlet values fixed.
pub struct FormReaction<'a> {
    space: &'a FeSpace,
    form: SemilinearForm,
    boundary_values: &'a [f64],
}

impl<'a> FormReaction<'a> {
    pub fn new(system: &'a AssembledSystem<'a>, p: f64) -> Result<Self, SolveError> {
        Ok(FormReaction {
            space: system.space(),
            form: SemilinearForm::new(system.space(), p)?,
            boundary_values: system.boundary_values(),
        })
    }
}

impl NodalReaction for FormReaction<'_> {
    fn entry(&self, i: usize, u: &[f64], t: f64) -> f64 {
        let dof = self.space.interior_dofs()[i];
        self.form.entry_with(self.space, dof, |d| {
            if d == dof {
                t
            } else {
                match self.space.interior_index(d) {
                    Some(k) => u[k],
                    None => self.boundary_values[d],
                }
            }
        })
    }
}

/// Any closure `(i, u, t) -> B_i`.
impl<F: Fn(usize, &[f64], f64) -> f64> NodalReaction for F {
    fn entry(&self, i: usize, u: &[f64], t: f64) -> f64 {
        self(i, u, t)
    }
}

/// Find `u` in `[lower, upper]` with
/// `(A u + B(u) - F, v - u) >= 0` for all admissible `v`.
pub struct ViProblem<'r> {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub reaction: Option<Box<dyn NodalReaction + 'r>>,
}

impl<'r> ViProblem<'r> {
    pub fn new(matrix: CsrMatrix, load: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SolveError> {
        let n = matrix.dim();
        if load.len() != n || lower.len() != n || upper.len() != n {
            return Err(SolveError::InvalidConfig("matrix, load and bounds differ in size".into()));
        }
        if let Some(i) = (0..n).find(|&i| !(lower[i] <= upper[i])) {
            return Err(SolveError::InvalidConfig(format!("empty box at dof {i}")));
        }
        if let Some(i) = (0..n).find(|&i| !(matrix.get(i, i) > 0.0)) {
            return Err(SolveError::InvalidConfig(format!("non-positive diagonal at dof {i}")));
        }
        Ok(ViProblem { matrix, load, lower, upper, reaction: None })
    }

    /// The obstacle problem solved by `u+` of the stabilised method on
    /// `system` with `bounds`.
    pub fn from_system(system: &AssembledSystem<'_>, bounds: &BoundsBox) -> Result<Self, SolveError> {
        let space = system.space();
        bounds.validate(Some(space.ndofs()))?;
        let lower = space.interior_dofs().iter().map(|&d| bounds.lower_at(d)).collect();
        let upper = space.interior_dofs().iter().map(|&d| bounds.upper_at(d)).collect();
        ViProblem::new(system.matrix().clone(), system.load().to_vec(), lower, upper)
    }

    pub fn with_reaction(mut self, reaction: impl NodalReaction + 'r) -> Self {
        self.reaction = Some(Box::new(reaction));
        self
    }

    pub fn dim(&self) -> usize {
        self.load.len()
    }

    /// `F_i - (A u)_i - B_i(u)`
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let au = self.matrix.mul_vec(u);
        (0..self.dim())
            .map(|i| {
                let b = self.reaction.as_ref().map_or(0.0, |r| r.entry(i, u, u[i]));
                self.load[i] - au[i] - b
            })
            .collect()
    }

    /// Largest violation of the complementarity conditions, relative to
    /// `max(1, |F|_inf)`: zero residual at free dofs, non-positive at the
    /// lower bound, non-negative at the upper bound.
    pub fn complementarity_violation(&self, u: &[f64]) -> f64 {
        let scale = self.load.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let r = self.residual(u);
        (0..self.dim())
            .map(|i| {
                let at_lower = u[i] == self.lower[i];
                let at_upper = u[i] == self.upper[i];
                match (at_lower, at_upper) {
                    (true, _) => r[i].max(0.0),
                    (_, true) => (-r[i]).max(0.0),
                    _ => r[i].abs(),
                }
            })
            .fold(0.0, f64::max)
            / scale
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub u: Vec<f64>,
    pub sweeps: usize,
    pub last_update: f64,
}

/// Ascending-order projected Gauss-Seidel; stops when the largest update
/// in a sweep is at most `tol`.
pub fn projected_gauss_seidel(problem: &ViProblem<'_>, tol: f64, max_iter: usize) -> Result<OracleSolution, SolveError> {
    if problem.reaction.is_some() {
        return Err(SolveError::InvalidConfig("projected Gauss-Seidel needs a linear problem".into()));
    }
    let n = problem.dim();
    let a = &problem.matrix;
    let mut u: Vec<f64> = (0..n).map(|i| 0.0f64.clamp(problem.lower[i], problem.upper[i])).collect();
    let mut last = f64::INFINITY;
    for sweep in 1..=max_iter {
        last = 0.0;
        for i in 0..n {
            let mut off = 0.0;
            let mut diag = 0.0;
            for (j, v) in a.row(i) {
                if j == i {
                    diag = v;
                } else {
                    off += v * u[j];
                }
            }
            let new = ((problem.load[i] - off) / diag).max(problem.lower[i]).min(problem.upper[i]);
            last = last.max((new - u[i]).abs());
            u[i] = new;
        }
        if last <= tol {
            return Ok(OracleSolution { u, sweeps: sweep, last_update: last });
        }
    }
    Err(SolveError::NotConverged { iterations: max_iter, last_update: last })
}

/// Projected nonlinear Gauss-Seidel: each dof solves its monotone scalar
/// equation by safeguarded bisection, then clips to the box.
pub fn projected_nonlinear_gauss_seidel(
    problem: &ViProblem<'_>,
    tol: f64,
    max_iter: usize,
) -> Result<OracleSolution, SolveError> {
    let reaction = problem
        .reaction
        .as_ref()
        .ok_or_else(|| SolveError::InvalidConfig("nonlinear Gauss-Seidel needs a reaction term".into()))?;
    let n = problem.dim();
    let a = &problem.matrix;
    let mut u: Vec<f64> = (0..n).map(|i| 0.0f64.clamp(problem.lower[i], problem.upper[i])).collect();
    let mut last = f64::INFINITY;
    for sweep in 1..=max_iter {
        last = 0.0;
        for i in 0..n {
            let mut off = 0.0;
            let mut diag = 0.0;
            for (j, v) in a.row(i) {
                if j == i {
                    diag = v;
                } else {
                    off += v * u[j];
                }
            }
            let g = |t: f64| diag * t + off + reaction.entry(i, &u, t) - problem.load[i];
            let root = bisect(g, u[i]).ok_or(SolveError::BracketFailure { dof: i })?;
            let new = root.max(problem.lower[i]).min(problem.upper[i]);
            last = last.max((new - u[i]).abs());
            u[i] = new;
        }
        if last <= tol {
            return Ok(OracleSolution { u, sweeps: sweep, last_update: last });
        }
    }
    Err(SolveError::NotConverged { iterations: max_iter, last_update: last })
}

/// Root of a non-decreasing `g`, starting the bracket search at `start`.
/// Returns `None` if no sign change is found.
pub fn bisect(g: impl Fn(f64) -> f64, start: f64) -> Option<f64> {
    let g0 = g(start);
    if g0 == 0.0 {
        return Some(start);
    }
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let mut step = 1.0f64.max(start.abs());
    let (mut lo, mut hi) = (start, start);
    let mut found = false;
    for _ in 0..200 {
        let t = start + dir * step;
        let gt = g(t);
        if !gt.is_finite() {
            return None;
        }
        if (gt > 0.0) == (dir > 0.0) || gt == 0.0 {
            if dir > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            found = true;
            break;
        }
        if dir > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        step *= 2.0;
    }
    if !found {
        return None;
    }
    // g(lo) < 0 <= g(hi)
    while hi - lo > BISECTION_TOL * 1.0f64.max(lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm.is_nan() {
            return None;
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
