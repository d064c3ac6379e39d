//! Error norms, discrete norms, nodal extrema and convergence rates.

use crate::forms::{AssembledSystem, ProblemSpec};
use crate::mesh::Point;
use crate::quadrature::TriangleRule;
use crate::space::{FeSpace, NodalField};
use crate::FeError;

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub level: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_l2: f64,
    pub err_h1semi: f64,
    pub err_energy: f64,
    pub err_quasinorm: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub min_nodal: f64,
    pub max_nodal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
    pub energy: f64,
}

/// Quadrature degree for error integrals and the quasinorm.
fn error_degree(space: &FeSpace) -> usize {
    let k = space.degree().order();
    (2 * k + 2).max(4 * k).max(8)
}

/// `sum_K |K| sum_q w_q g(t, l_q, x_q)`
fn integrate(space: &FeSpace, rule: &TriangleRule, mut g: impl FnMut(usize, [f64; 3], Point) -> f64) -> f64 {
    let mut total = 0.0;
    for t in 0..space.mesh().num_triangles() {
        let el = space.element(t);
        let mut local = 0.0;
        for (w, &l) in rule.weights.iter().zip(&rule.points) {
            local += w * g(t, l, el.map(l));
        }
        total += el.area * local;
    }
    total
}

/// L2, H1-seminorm and energy errors of `u_h - u` with
/// energy `sqrt((D grad e, grad e) + (mu e, e))`.
pub fn error_norms(
    u_h: &NodalField<'_>,
    exact: impl Fn(Point) -> f64,
    exact_gradient: impl Fn(Point) -> [f64; 2],
    spec: &ProblemSpec,
) -> ErrorNorms {
    let space = u_h.space();
    let rule = TriangleRule::with_degree(error_degree(space));
    let (mut l2, mut h1, mut en) = (0.0, 0.0, 0.0);
    for t in 0..space.mesh().num_triangles() {
        let el = space.element(t);
        let d = spec.diffusion_at(t);
        let mu = spec.mu_at(t);
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for (w, &l) in rule.weights.iter().zip(&rule.points) {
            let x = el.map(l);
            let e = u_h.evaluate_in(t, l) - exact(x);
            let gh = u_h.gradient_in(t, l);
            let gu = exact_gradient(x);
            let ge = [gh[0] - gu[0], gh[1] - gu[1]];
            let dge = d.apply(ge);
            a += w * e * e;
            b += w * (ge[0] * ge[0] + ge[1] * ge[1]);
            c += w * (dge[0] * ge[0] + dge[1] * ge[1] + mu * e * e);
        }
        l2 += el.area * a;
        h1 += el.area * b;
        en += el.area * c;
    }
    ErrorNorms { l2: l2.max(0.0).sqrt(), h1_semi: h1.max(0.0).sqrt(), energy: en.max(0.0).sqrt() }
}

/// `sqrt( integral |v|^2 (|w| + |v|)^(p-2) )` for `v` given per quadrature
/// point as `v(t, l, x)`.
pub fn quasinorm_with(
    space: &FeSpace,
    v: impl Fn(usize, [f64; 3], Point) -> f64,
    w: impl Fn(usize, [f64; 3], Point) -> f64,
    p: f64,
) -> Result<f64, FeError> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(FeError::InvalidExponent(p));
    }
    let rule = TriangleRule::with_degree(error_degree(space));
    let s = integrate(space, &rule, |t, l, x| {
        let vv = v(t, l, x);
        let ww = w(t, l, x);
        let weight = if p == 2.0 { 1.0 } else { (ww.abs() + vv.abs()).powf(p - 2.0) };
        vv * vv * weight
    });
    Ok(s.max(0.0).sqrt())
}

/// Quasinorm of a finite element field against a reference function.
pub fn quasinorm(v: &NodalField<'_>, w: impl Fn(Point) -> f64, p: f64) -> Result<f64, FeError> {
    quasinorm_with(v.space(), |t, l, _| v.evaluate_in(t, l), |_, _, x| w(x), p)
}

/// Quasinorm of the error `u_h - u` with `u` itself as the reference.
pub fn quasinorm_error(u_h: &NodalField<'_>, exact: impl Fn(Point) -> f64, p: f64) -> Result<f64, FeError> {
    quasinorm_with(u_h.space(), |t, l, x| u_h.evaluate_in(t, l) - exact(x), |_, _, x| exact(x), p)
}

/// `||v||_{0,p}^p` of a per-quadrature-point function, same rule as the
/// quasinorm.
pub fn lp_norm_pow(space: &FeSpace, v: impl Fn(usize, [f64; 3], Point) -> f64, p: f64) -> f64 {
    let rule = TriangleRule::with_degree(error_degree(space));
    integrate(space, &rule, |t, l, x| v(t, l, x).abs().powf(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteNorms {
    /// `sqrt(sum_i s_i v_i^2)`
    pub stab: f64,
    /// `sqrt` of the lumped product
    pub lumped: f64,
    /// `sqrt(v^T A v)` over interior values
    pub energy: f64,
    /// `sqrt(energy^2 + stab^2)`
    pub mesh: f64,
}

/// Stabilisation, lumped, energy and mesh-dependent norms of the interior
/// part of `v`.
pub fn stab_and_mesh_norms(system: &AssembledSystem<'_>, v: &NodalField<'_>) -> Result<DiscreteNorms, FeError> {
    let space = system.space();
    if !v.space().same_as(space) {
        return Err(FeError::SpaceMismatch);
    }
    let vi = v.interior_values();
    let stab2: f64 = vi.iter().zip(system.s_diag()).map(|(x, s)| s * x * x).sum();
    let lumped2 = crate::forms::lumped_product(space, v, v)?;
    let energy2 = system.matrix().bilinear(&vi, &vi).max(0.0);
    Ok(DiscreteNorms {
        stab: stab2.sqrt(),
        lumped: lumped2.sqrt(),
        energy: energy2.sqrt(),
        mesh: (energy2 + stab2).sqrt(),
    })
}

/// Rates between consecutive `(h, err)` pairs; `None` where the rate is
/// undefined (non-positive or non-finite error, or `h` not decreasing).
pub fn eoc(data: &[(f64, f64)]) -> Vec<Option<f64>> {
    data.windows(2)
        .map(|w| {
            let ((h0, e0), (h1, e1)) = (w[0], w[1]);
            let ok = e0 > 0.0 && e1 > 0.0 && e0.is_finite() && e1.is_finite() && h1 > 0.0 && h1 < h0;
            ok.then(|| (e0 / e1).ln() / (h0 / h1).ln())
        })
        .collect()
}

/// Min and max over interior nodal values; `None` without interior nodes.
pub fn nodal_extrema(v: &NodalField<'_>) -> Option<(f64, f64)> {
    let space = v.space();
    let mut it = space.interior_dofs().iter().map(|&i| v.values()[i]);
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x))))
}
