//! Problem data and assembly of the diffusion-reaction form, the mass
//! matrix, the load with Dirichlet lifting, the diagonal stabilisation and
//! the semilinear power reaction.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::linalg::{CsrMatrix, FactorError, SparseCholesky};
use crate::mesh::{Mesh, Point};
use crate::projection::BoundsBox;
use crate::quadrature::TriangleRule;
use crate::space::{FeSpace, NodalField};
use crate::FeError;

/// Spatial dimension. The stabilisation weights scale with `h^(DIM-2)` and
/// `h^DIM`.
pub const DIM: i32 = 2;

/// Symmetric 2x2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    pub fn isotropic(eps: f64) -> Tensor2 {
        Tensor2 { xx: eps, xy: 0.0, yy: eps }
    }

    /// `R diag(l1, l2) R^T` with `R = [[cos t, sin t], [-sin t, cos t]]`.
    pub fn rotated(l1: f64, l2: f64, theta: f64) -> Tensor2 {
        let (s, c) = theta.sin_cos();
        Tensor2 { xx: l1 * c * c + l2 * s * s, xy: (l2 - l1) * c * s, yy: l1 * s * s + l2 * c * c }
    }

    pub fn scaled(self, a: f64) -> Tensor2 {
        Tensor2 { xx: a * self.xx, xy: a * self.xy, yy: a * self.yy }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        [m - r, m + r]
    }

    /// Operator 2-norm.
    pub fn spectral_norm(&self) -> f64 {
        let [a, b] = self.eigenvalues();
        a.abs().max(b.abs())
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }
}

/// Either one value for the whole mesh or one per triangle.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient<T> {
    Constant(T),
    PerTriangle(Vec<T>),
}

impl<T: Copy> Coefficient<T> {
    pub fn at(&self, t: usize) -> T {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::PerTriangle(v) => v[t],
        }
    }

    fn check_len(&self, nt: usize) -> Result<(), FeError> {
        match self {
            Coefficient::PerTriangle(v) if v.len() != nt => {
                Err(FeError::LengthMismatch { expected: nt, found: v.len() })
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reaction {
    /// `mu u` with `mu >= 0`
    Linear(Coefficient<f64>),
    /// `|u|^(p-2) u` with `p >= 2`
    Power { exponent: f64 },
}

pub type PointFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// Dirichlet data as a function of position and boundary marker.
pub type BoundaryFn = Arc<dyn Fn(Point, i32) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Source {
    Constant(f64),
    PerTriangle(Vec<f64>),
    /// sampled at quadrature points
    Function(PointFn),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Constant(v) => write!(f, "Constant({v})"),
            Source::PerTriangle(v) => write!(f, "PerTriangle(len {})", v.len()),
            Source::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Clone)]
pub enum Dirichlet {
    Zero,
    PerMarker(BTreeMap<i32, f64>),
    Function(BoundaryFn),
}

impl fmt::Debug for Dirichlet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dirichlet::Zero => write!(f, "Zero"),
            Dirichlet::PerMarker(m) => write!(f, "PerMarker({m:?})"),
            Dirichlet::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Dirichlet {
    pub fn value(&self, p: Point, marker: i32) -> f64 {
        match self {
            Dirichlet::Zero => 0.0,
            Dirichlet::PerMarker(m) => m.get(&marker).copied().unwrap_or(0.0),
            Dirichlet::Function(g) => g(p, marker),
        }
    }
}

/// Coefficients, data and bounds of a (semi)linear diffusion-reaction
/// problem `-div(D grad u) + r(u) = f`, `u = g_D` on the boundary.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub diffusion: Coefficient<Tensor2>,
    pub reaction: Reaction,
    pub source: Source,
    pub dirichlet: Dirichlet,
    pub bounds: BoundsBox,
}

impl ProblemSpec {
    /// `D = eps I`, `mu` constant, zero data, bounds `[0, +inf)`.
    pub fn linear(eps: f64, mu: f64) -> ProblemSpec {
        ProblemSpec {
            diffusion: Coefficient::Constant(Tensor2::isotropic(eps)),
            reaction: Reaction::Linear(Coefficient::Constant(mu)),
            source: Source::Constant(0.0),
            dirichlet: Dirichlet::Zero,
            bounds: BoundsBox::nonnegative(),
        }
    }

    pub fn semilinear(diffusion: Tensor2, p: f64) -> ProblemSpec {
        ProblemSpec {
            diffusion: Coefficient::Constant(diffusion),
            reaction: Reaction::Power { exponent: p },
            source: Source::Constant(0.0),
            dirichlet: Dirichlet::Zero,
            bounds: BoundsBox::nonnegative(),
        }
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn with_source_fn(self, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.with_source(Source::Function(Arc::new(f)))
    }

    pub fn with_dirichlet(mut self, dirichlet: Dirichlet) -> Self {
        self.dirichlet = dirichlet;
        self
    }

    pub fn with_bounds(mut self, bounds: BoundsBox) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn exponent(&self) -> Option<f64> {
        match self.reaction {
            Reaction::Power { exponent } => Some(exponent),
            Reaction::Linear(_) => None,
        }
    }

    pub fn diffusion_at(&self, t: usize) -> Tensor2 {
        self.diffusion.at(t)
    }

    /// Linear reaction coefficient on triangle `t` (zero for the power law).
    pub fn mu_at(&self, t: usize) -> f64 {
        match &self.reaction {
            Reaction::Linear(c) => c.at(t),
            Reaction::Power { .. } => 0.0,
        }
    }

    /// Checks ellipticity, reaction sign, exponent and coefficient lengths.
    pub fn validate(&self, mesh: &Mesh) -> Result<(), FeError> {
        let nt = mesh.num_triangles();
        self.diffusion.check_len(nt)?;
        for t in 0..nt {
            let d = self.diffusion.at(t);
            let lmin = d.eigenvalues()[0];
            if !(lmin > 0.0) || !lmin.is_finite() {
                return Err(FeError::NotElliptic { triangle: t, min_eigenvalue: lmin });
            }
        }
        match &self.reaction {
            Reaction::Linear(mu) => {
                mu.check_len(nt)?;
                for t in 0..nt {
                    let m = mu.at(t);
                    if !(m >= 0.0) || !m.is_finite() {
                        return Err(FeError::NegativeReaction { triangle: t, value: m });
                    }
                }
            }
            Reaction::Power { exponent } => {
                if !(*exponent >= 2.0) || !exponent.is_finite() {
                    return Err(FeError::InvalidExponent(*exponent));
                }
            }
        }
        if let Source::PerTriangle(v) = &self.source {
            if v.len() != nt {
                return Err(FeError::LengthMismatch { expected: nt, found: v.len() });
            }
        }
        self.bounds.validate(None)
    }
}

/// Interior-dof system of the stabilised method.
#[derive(Debug)]
pub struct AssembledSystem<'s> {
    space: &'s FeSpace,
    spec: ProblemSpec,
    alpha: f64,
    matrix: CsrMatrix,
    mass: CsrMatrix,
    s_diag: Vec<f64>,
    load: Vec<f64>,
    boundary_values: Vec<f64>,
    factor: OnceLock<SparseCholesky>,
}

impl<'s> AssembledSystem<'s> {
    pub fn space(&self) -> &'s FeSpace {
        self.space
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `a(phi_j, phi_i)` over interior dofs.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// `(phi_j, phi_i)` over interior dofs.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Stabilisation weight per interior dof.
    pub fn s_diag(&self) -> &[f64] {
        &self.s_diag
    }

    /// Load vector with the Dirichlet lifting already subtracted.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    /// Full-length vector: Dirichlet values on boundary dofs, zero inside.
    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    pub fn n(&self) -> usize {
        self.load.len()
    }

    /// Sparse Cholesky factor of the interior matrix, computed on first use.
    pub fn factor(&self) -> Result<&SparseCholesky, FactorError> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let f = SparseCholesky::new(&self.matrix)?;
        Ok(self.factor.get_or_init(|| f))
    }

    /// Lifts interior values to a full field with the Dirichlet values.
    pub fn field(&self, interior: &[f64]) -> NodalField<'s> {
        NodalField::from_interior(self.space, interior, &self.boundary_values)
    }

    /// Quadrature L2 norm of an interior-supported function.
    pub fn l2_norm_interior(&self, v: &[f64]) -> f64 {
        self.mass.bilinear(v, v).max(0.0).sqrt()
    }
}

/// Precomputed reference data for one quadrature rule on one space degree.
struct RefQuad {
    weights: Vec<f64>,
    bary: Vec<[f64; 3]>,
}

impl RefQuad {
    fn new(degree: usize) -> RefQuad {
        let r = TriangleRule::with_degree(degree);
        RefQuad { weights: r.weights, bary: r.points }
    }
}

/// Assembles the interior system for `spec` on `space` with stabilisation
/// parameter `alpha`.
pub fn assemble_system<'s>(
    space: &'s FeSpace,
    spec: &ProblemSpec,
    alpha: f64,
) -> Result<AssembledSystem<'s>, FeError> {
    let mesh = space.mesh();
    spec.validate(mesh)?;
    spec.bounds.validate(Some(space.ndofs()))?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(FeError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let degree = space.degree();
    let k = degree.order();
    let nl = degree.local_dofs();
    let bilinear_q = RefQuad::new(2 * k);
    let load_q = RefQuad::new(2 * k + 2);

    let ndofs = space.ndofs();
    let mut boundary_values = vec![0.0; ndofs];
    for &d in space.boundary_dofs() {
        let marker = space.boundary_marker(d).expect("boundary dof has a marker");
        boundary_values[d] = spec.dirichlet.value(space.nodes()[d], marker);
    }

    let mut a_trip: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.num_triangles() * nl * nl);
    let mut m_trip: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.num_triangles() * nl * nl);
    let mut rhs_full = vec![0.0; ndofs];

    for t in 0..mesh.num_triangles() {
        let el = space.element(t);
        let dofs = space.cell_dofs(t);
        let d = spec.diffusion_at(t);
        let mu = spec.mu_at(t);
        let mut ke = [[0.0; 6]; 6];
        let mut me = [[0.0; 6]; 6];
        for (w, &l) in bilinear_q.weights.iter().zip(&bilinear_q.bary) {
            let wa = w * el.area;
            let phi = el.shape_values(degree, l);
            let grad = el.shape_gradients(degree, l);
            for i in 0..nl {
                for j in 0..nl {
                    let dg = d.apply(grad[j]);
                    ke[i][j] += wa * (dg[0] * grad[i][0] + dg[1] * grad[i][1]);
                    me[i][j] += wa * phi[i] * phi[j];
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                a_trip.push((dofs[i], dofs[j], ke[i][j] + mu * me[i][j]));
                m_trip.push((dofs[i], dofs[j], me[i][j]));
            }
        }
        match &spec.source {
            Source::Constant(_) | Source::PerTriangle(_) => {
                let f = match &spec.source {
                    Source::Constant(c) => *c,
                    Source::PerTriangle(v) => v[t],
                    Source::Function(_) => unreachable!(),
                };
                if f != 0.0 {
                    for (w, &l) in load_q.weights.iter().zip(&load_q.bary) {
                        let phi = el.shape_values(degree, l);
                        for i in 0..nl {
                            rhs_full[dofs[i]] += w * el.area * f * phi[i];
                        }
                    }
                }
            }
            Source::Function(f) => {
                for (w, &l) in load_q.weights.iter().zip(&load_q.bary) {
                    let fx = f(el.map(l));
                    let phi = el.shape_values(degree, l);
                    for i in 0..nl {
                        rhs_full[dofs[i]] += w * el.area * fx * phi[i];
                    }
                }
            }
        }
    }

    let full_a = CsrMatrix::from_triplets(ndofs, &a_trip);
    let full_m = CsrMatrix::from_triplets(ndofs, &m_trip);
    let n = space.n_interior();
    let restrict = |full: &CsrMatrix| {
        let mut t = Vec::with_capacity(full.nnz());
        for (ii, &i) in space.interior_dofs().iter().enumerate() {
            for (j, v) in full.row(i) {
                if let Some(jj) = space.interior_index(j) {
                    t.push((ii, jj, v));
                }
            }
        }
        CsrMatrix::from_triplets(n, &t)
    };
    let matrix = restrict(&full_a);
    let mass = restrict(&full_m);

    let mut load = Vec::with_capacity(n);
    for &i in space.interior_dofs() {
        let lift: f64 = full_a.row(i).filter(|&(j, _)| space.is_boundary(j)).map(|(j, v)| v * boundary_values[j]).sum();
        load.push(rhs_full[i] - lift);
    }

    let s_diag = stabilisation_weights(space, spec, alpha)?;

    Ok(AssembledSystem {
        space,
        spec: spec.clone(),
        alpha,
        matrix,
        mass,
        s_diag,
        load,
        boundary_values,
        factor: OnceLock::new(),
    })
}

/// Per-interior-dof weight
/// `alpha (|D|_{inf, w_i} h_i^(d-2) + |mu|_{inf, w_i} h_i^d)`, where `w_i`
/// is the extended patch and `|D|` the spectral norm. The reaction part is
/// dropped for the power-law reaction.
pub fn stabilisation_weights(space: &FeSpace, spec: &ProblemSpec, alpha: f64) -> Result<Vec<f64>, FeError> {
    let h = space.mesh_function_values();
    let include_reaction = matches!(spec.reaction, Reaction::Linear(_));
    space
        .interior_dofs()
        .iter()
        .map(|&i| {
            let patch = space.extended_patch(i)?;
            let dnorm = patch.iter().map(|&t| spec.diffusion_at(t).spectral_norm()).fold(0.0, f64::max);
            let mut w = dnorm * h[i].powi(DIM - 2);
            if include_reaction {
                let mnorm = patch.iter().map(|&t| spec.mu_at(t).abs()).fold(0.0, f64::max);
                w += mnorm * h[i].powi(DIM);
            }
            Ok(alpha * w)
        })
        .collect()
}

/// Lumped inner product `sum_i h(x_i)^d v(x_i) w(x_i)` over interior nodes.
pub fn lumped_product(space: &FeSpace, v: &NodalField<'_>, w: &NodalField<'_>) -> Result<f64, FeError> {
    if !v.space().same_as(space) {
        return Err(FeError::SpaceMismatch);
    }
    v.check_same_space(w)?;
    let h = space.mesh_function_values();
    Ok(space.interior_dofs().iter().map(|&i| h[i].powi(DIM) * v.values()[i] * w.values()[i]).sum())
}

/// `s(v, w) = sum_i s_i v(x_i) w(x_i)` over interior nodes.
pub fn apply_stabilisation(system: &AssembledSystem<'_>, v: &NodalField<'_>, w: &NodalField<'_>) -> Result<f64, FeError> {
    if !v.space().same_as(system.space()) {
        return Err(FeError::SpaceMismatch);
    }
    v.check_same_space(w)?;
    Ok(system
        .space()
        .interior_dofs()
        .iter()
        .zip(system.s_diag())
        .map(|(&i, s)| s * v.values()[i] * w.values()[i])
        .sum())
}

/// The semilinear form `b(w; u, phi_i) = (|w|^(p-2) u, phi_i)` evaluated with
/// a fixed quadrature of degree `max(4k, 8)`.
#[derive(Debug, Clone)]
pub struct SemilinearForm {
    p: f64,
    weights: Vec<f64>,
    /// basis values at each quadrature point
    phi: Vec<[f64; 6]>,
    nl: usize,
}

impl SemilinearForm {
    pub fn new(space: &FeSpace, p: f64) -> Result<SemilinearForm, FeError> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(FeError::InvalidExponent(p));
        }
        let degree = space.degree();
        let rule = TriangleRule::with_degree((4 * degree.order()).max(8));
        // basis values on the reference triangle do not depend on geometry
        let el = space.element(0);
        let phi = rule.points.iter().map(|&l| el.shape_values(degree, l)).collect();
        Ok(SemilinearForm { p, weights: rule.weights, phi, nl: degree.local_dofs() })
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    fn power(&self, w: f64) -> f64 {
        if self.p == 2.0 {
            1.0
        } else {
            w.abs().powf(self.p - 2.0)
        }
    }

    fn triangle_contrib(&self, space: &FeSpace, t: usize, w: &[f64], u: &[f64], mut add: impl FnMut(usize, f64)) {
        let dofs = space.cell_dofs(t);
        let area = space.mesh().area(t);
        for (q, wq) in self.weights.iter().enumerate() {
            let phi = &self.phi[q];
            let (mut wv, mut uv) = (0.0, 0.0);
            for i in 0..self.nl {
                wv += w[dofs[i]] * phi[i];
                uv += u[dofs[i]] * phi[i];
            }
            let c = wq * area * self.power(wv) * uv;
            for i in 0..self.nl {
                add(i, c * phi[i]);
            }
        }
    }

    /// Entries for all interior dofs; `w` and `u` are full-length.
    pub fn residual(&self, space: &FeSpace, w: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; space.n_interior()];
        for t in 0..space.mesh().num_triangles() {
            let dofs = space.cell_dofs(t);
            self.triangle_contrib(space, t, w, u, |i, v| {
                if let Some(ii) = space.interior_index(dofs[i]) {
                    out[ii] += v;
                }
            });
        }
        out
    }

    /// The single entry for `dof`, integrating only over its node patch.
    pub fn entry(&self, space: &FeSpace, dof: usize, w: &[f64], u: &[f64]) -> f64 {
        let mut out = 0.0;
        for &t in space.node_patch(dof).expect("dof in range") {
            let dofs = space.cell_dofs(t);
            let local = dofs.iter().position(|&d| d == dof).expect("dof in its patch");
            self.triangle_contrib(space, t, w, u, |i, v| {
                if i == local {
                    out += v;
                }
            });
        }
        out
    }

    /// `(p-1) (|w|^(p-2) phi_j, phi_i)` over interior dofs; the derivative of
    /// `u -> B(u)` at `w` (full-length).
    pub fn jacobian(&self, space: &FeSpace, w: &[f64]) -> CsrMatrix {
        let mut trip = Vec::with_capacity(space.mesh().num_triangles() * self.nl * self.nl);
        for t in 0..space.mesh().num_triangles() {
            let dofs = space.cell_dofs(t);
            let area = space.mesh().area(t);
            let mut local = [[0.0; 6]; 6];
            for (q, wq) in self.weights.iter().enumerate() {
                let phi = &self.phi[q];
                let wv: f64 = (0..self.nl).map(|i| w[dofs[i]] * phi[i]).sum();
                let c = wq * area * (self.p - 1.0) * self.power(wv);
                for i in 0..self.nl {
                    for j in 0..self.nl {
                        local[i][j] += c * phi[i] * phi[j];
                    }
                }
            }
            for i in 0..self.nl {
                let Some(ii) = space.interior_index(dofs[i]) else { continue };
                for j in 0..self.nl {
                    if let Some(jj) = space.interior_index(dofs[j]) {
                        trip.push((ii, jj, local[i][j]));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(space.n_interior(), &trip)
    }

    /// `(|v|^(p-2) v, phi_dof)` where `value(d)` gives the nodal values of `v`
    /// on the patch of `dof`.
    pub fn entry_with(&self, space: &FeSpace, dof: usize, value: impl Fn(usize) -> f64) -> f64 {
        let mut out = 0.0;
        for &t in space.node_patch(dof).expect("dof in range") {
            let dofs = space.cell_dofs(t);
            let local = dofs.iter().position(|&d| d == dof).expect("dof in its patch");
            let vals: Vec<f64> = dofs.iter().map(|&d| value(d)).collect();
            let area = space.mesh().area(t);
            for (q, wq) in self.weights.iter().enumerate() {
                let phi = &self.phi[q];
                let v: f64 = (0..self.nl).map(|i| vals[i] * phi[i]).sum();
                out += wq * area * self.power(v) * v * phi[local];
            }
        }
        out
    }
}

/// `(|w|^(p-2) u, phi_i)` for every interior dof `i`.
pub fn semilinear_residual(space: &FeSpace, p: f64, w: &NodalField<'_>, u: &NodalField<'_>) -> Result<Vec<f64>, FeError> {
    w.check_same_space(u)?;
    if !w.space().same_as(space) {
        return Err(FeError::SpaceMismatch);
    }
    Ok(SemilinearForm::new(space, p)?.residual(space, w.values(), u.values()))
}

/// The quantities entering the two scalar power-law inequalities
/// `monotone_lhs >= C2 * monotone_rhs` and `lipschitz_lhs <= C1 * lipschitz_rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBoundTerms {
    /// `(|x|^(p-2) x - |y|^(p-2) y) (x - y)`
    pub monotone_lhs: f64,
    /// `(|x| + |y|)^(p-2) |x - y|^2`
    pub monotone_rhs: f64,
    /// `| |x|^(p-2) x - |y|^(p-2) y |`
    pub lipschitz_lhs: f64,
    /// `(|x| + |y|)^(p-2) |x - y|`
    pub lipschitz_rhs: f64,
}

pub fn scalar_power_bounds_check(x: f64, y: f64, p: f64) -> PowerBoundTerms {
    let phi = |s: f64| s.abs().powf(p - 2.0) * s;
    let diff = phi(x) - phi(y);
    let weight = (x.abs() + y.abs()).powf(p - 2.0);
    PowerBoundTerms {
        monotone_lhs: diff * (x - y),
        monotone_rhs: weight * (x - y).powi(2),
        lipschitz_lhs: diff.abs(),
        lipschitz_rhs: weight * (x - y).abs(),
    }
}
