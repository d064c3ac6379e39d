//! Lagrange P1/P2 spaces over a [`Mesh`]: dof numbering, interior/boundary
//! classification, node patches and the averaged mesh-size function.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::mesh::{boundary_vertex_markers, edge_key, vertex_triangles, Mesh, Point};
use crate::FeError;

/// Polynomial degree of the Lagrange space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Degree {
    P1,
    P2,
}

impl Degree {
    pub fn new(k: usize) -> Result<Degree, FeError> {
        match k {
            1 => Ok(Degree::P1),
            2 => Ok(Degree::P2),
            k => Err(FeError::UnsupportedDegree(k)),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Degree::P1 => 1,
            Degree::P2 => 2,
        }
    }

    /// Local dofs per triangle.
    pub fn local_dofs(self) -> usize {
        match self {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }
}

/// Where a dof lives: on a mesh vertex or at the midpoint of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofLocation {
    Vertex(usize),
    Edge(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    degree: Degree,
    nodes: Vec<Point>,
    locations: Vec<DofLocation>,
    /// flat, `degree.local_dofs()` entries per triangle
    cell_dofs: Vec<usize>,
    boundary_marker: Vec<Option<i32>>,
    interior_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
    interior_index: Vec<Option<usize>>,
    dof_tri_offsets: Vec<usize>,
    dof_tri_list: Vec<usize>,
    vert_tri_offsets: Vec<usize>,
    vert_tri_list: Vec<usize>,
    mesh_fn: Vec<f64>,
}

impl FeSpace {
    /// Vertices are numbered first (mesh order), then edges in sorted
    /// `(min, max)` vertex-pair order.
    pub fn new(mesh: Arc<Mesh>, degree: Degree) -> FeSpace {
        let nv = mesh.num_vertices();
        let nt = mesh.num_triangles();
        let mut nodes: Vec<Point> = mesh.vertices().to_vec();
        let mut locations: Vec<DofLocation> = (0..nv).map(DofLocation::Vertex).collect();
        let vmarkers = boundary_vertex_markers(&mesh);
        let mut boundary_marker: Vec<Option<i32>> = (0..nv).map(|v| vmarkers.get(&v).copied()).collect();

        let ldofs = degree.local_dofs();
        let mut cell_dofs = Vec::with_capacity(ldofs * nt);
        match degree {
            Degree::P1 => {
                for tri in mesh.triangles() {
                    cell_dofs.extend_from_slice(tri);
                }
            }
            Degree::P2 => {
                let edges = mesh.edges();
                let edge_marker: HashMap<(usize, usize), i32> = mesh
                    .boundary_edges()
                    .iter()
                    .map(|e| (edge_key(e.vertices[0], e.vertices[1]), e.marker))
                    .collect();
                let mut edge_dof = HashMap::with_capacity(edges.len());
                for (k, &(a, b)) in edges.iter().enumerate() {
                    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    locations.push(DofLocation::Edge(a, b));
                    boundary_marker.push(edge_marker.get(&(a, b)).copied());
                    edge_dof.insert((a, b), nv + k);
                }
                for &[a, b, c] in mesh.triangles() {
                    cell_dofs.extend_from_slice(&[
                        a,
                        b,
                        c,
                        edge_dof[&edge_key(a, b)],
                        edge_dof[&edge_key(b, c)],
                        edge_dof[&edge_key(c, a)],
                    ]);
                }
            }
        }

        let ndofs = nodes.len();
        let mut interior_dofs = Vec::new();
        let mut boundary_dofs = Vec::new();
        let mut interior_index = vec![None; ndofs];
        for (d, m) in boundary_marker.iter().enumerate() {
            if m.is_some() {
                boundary_dofs.push(d);
            } else {
                interior_index[d] = Some(interior_dofs.len());
                interior_dofs.push(d);
            }
        }

        let mut count = vec![0usize; ndofs + 1];
        for t in 0..nt {
            for &d in &cell_dofs[t * ldofs..(t + 1) * ldofs] {
                count[d + 1] += 1;
            }
        }
        for i in 0..ndofs {
            count[i + 1] += count[i];
        }
        let dof_tri_offsets = count.clone();
        let mut fill = count;
        let mut dof_tri_list = vec![0; dof_tri_offsets[ndofs]];
        for t in 0..nt {
            for &d in &cell_dofs[t * ldofs..(t + 1) * ldofs] {
                dof_tri_list[fill[d]] = t;
                fill[d] += 1;
            }
        }
        let (vert_tri_offsets, vert_tri_list) = vertex_triangles(&mesh);

        let mut space = FeSpace {
            mesh,
            degree,
            nodes,
            locations,
            cell_dofs,
            boundary_marker,
            interior_dofs,
            boundary_dofs,
            interior_index,
            dof_tri_offsets,
            dof_tri_list,
            vert_tri_offsets,
            vert_tri_list,
            mesh_fn: Vec::new(),
        };
        space.mesh_fn = space.compute_mesh_function();
        space
    }

    pub fn build(mesh: Arc<Mesh>, k: usize) -> Result<FeSpace, FeError> {
        Ok(FeSpace::new(mesh, Degree::new(k)?))
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn ndofs(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn location(&self, dof: usize) -> DofLocation {
        self.locations[dof]
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior_dofs
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn n_interior(&self) -> usize {
        self.interior_dofs.len()
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.boundary_marker[dof].is_some()
    }

    pub fn boundary_marker(&self, dof: usize) -> Option<i32> {
        self.boundary_marker[dof]
    }

    /// Position of `dof` in [`FeSpace::interior_dofs`], if interior.
    pub fn interior_index(&self, dof: usize) -> Option<usize> {
        self.interior_index[dof]
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let n = self.degree.local_dofs();
        &self.cell_dofs[t * n..(t + 1) * n]
    }

    /// Triangles whose closure contains the node of `dof`.
    pub fn node_patch(&self, dof: usize) -> Result<&[usize], FeError> {
        if dof >= self.ndofs() {
            return Err(FeError::DofOutOfRange { dof, ndofs: self.ndofs() });
        }
        Ok(&self.dof_tri_list[self.dof_tri_offsets[dof]..self.dof_tri_offsets[dof + 1]])
    }

    /// All triangles sharing at least a vertex with a triangle of the node
    /// patch, in ascending order.
    pub fn extended_patch(&self, dof: usize) -> Result<Vec<usize>, FeError> {
        let patch = self.node_patch(dof)?;
        let mut out = BTreeSet::new();
        for &t in patch {
            for &v in &self.mesh.triangles()[t] {
                out.extend(&self.vert_tri_list[self.vert_tri_offsets[v]..self.vert_tri_offsets[v + 1]]);
            }
        }
        Ok(out.into_iter().collect())
    }

    fn compute_mesh_function(&self) -> Vec<f64> {
        let nv = self.mesh.num_vertices();
        let diam: Vec<f64> = (0..self.mesh.num_triangles()).map(|t| self.mesh.diameter(t)).collect();
        let vertex_value: Vec<f64> = (0..nv)
            .map(|v| {
                let tris = &self.vert_tri_list[self.vert_tri_offsets[v]..self.vert_tri_offsets[v + 1]];
                tris.iter().map(|&t| diam[t]).sum::<f64>() / tris.len() as f64
            })
            .collect();
        self.locations
            .iter()
            .map(|loc| match *loc {
                DofLocation::Vertex(v) => vertex_value[v],
                // the P1 function evaluated at the midpoint
                DofLocation::Edge(a, b) => 0.5 * (vertex_value[a] + vertex_value[b]),
            })
            .collect()
    }

    /// Nodal values of the averaged mesh-size function at every dof.
    pub fn mesh_function_values(&self) -> &[f64] {
        &self.mesh_fn
    }

    pub fn mesh_function(&self) -> NodalField<'_> {
        NodalField { space: self, values: self.mesh_fn.clone() }
    }

    pub fn interpolate(&self, mut g: impl FnMut(Point) -> f64) -> NodalField<'_> {
        NodalField { space: self, values: self.nodes.iter().map(|&p| g(p)).collect() }
    }

    pub fn zeros(&self) -> NodalField<'_> {
        NodalField { space: self, values: vec![0.0; self.ndofs()] }
    }

    /// Geometry of triangle `t` needed to evaluate basis functions.
    pub fn element(&self, t: usize) -> Element {
        Element::new(self.mesh.triangle_points(t))
    }

    pub(crate) fn same_as(&self, other: &FeSpace) -> bool {
        std::ptr::eq(self, other)
            || (self.degree == other.degree && self.nodes == other.nodes && self.cell_dofs == other.cell_dofs)
    }
}

/// Affine triangle: area and constant barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub points: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl Element {
    pub fn new(points: [Point; 3]) -> Element {
        let [p0, p1, p2] = points;
        let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let grad_lambda = [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ];
        Element { points, area: 0.5 * two_a, grad_lambda }
    }

    pub fn map(&self, bary: [f64; 3]) -> Point {
        let [p0, p1, p2] = self.points;
        [
            bary[0] * p0[0] + bary[1] * p1[0] + bary[2] * p2[0],
            bary[0] * p0[1] + bary[1] * p1[1] + bary[2] * p2[1],
        ]
    }

    /// Basis values at a barycentric point; only the first
    /// `degree.local_dofs()` entries are meaningful.
    pub fn shape_values(&self, degree: Degree, l: [f64; 3]) -> [f64; 6] {
        match degree {
            Degree::P1 => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
            Degree::P2 => [
                l[0] * (2.0 * l[0] - 1.0),
                l[1] * (2.0 * l[1] - 1.0),
                l[2] * (2.0 * l[2] - 1.0),
                4.0 * l[0] * l[1],
                4.0 * l[1] * l[2],
                4.0 * l[2] * l[0],
            ],
        }
    }

    pub fn shape_gradients(&self, degree: Degree, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        match degree {
            Degree::P1 => {
                out[..3].copy_from_slice(g);
            }
            Degree::P2 => {
                for i in 0..3 {
                    let c = 4.0 * l[i] - 1.0;
                    out[i] = [c * g[i][0], c * g[i][1]];
                }
                for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                    out[3 + k] = [
                        4.0 * (l[j] * g[i][0] + l[i] * g[j][0]),
                        4.0 * (l[j] * g[i][1] + l[i] * g[j][1]),
                    ];
                }
            }
        }
        out
    }
}

/// Coefficient vector over all dofs of a space.
#[derive(Debug, Clone)]
pub struct NodalField<'s> {
    space: &'s FeSpace,
    values: Vec<f64>,
}

impl PartialEq for NodalField<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.space.same_as(other.space) && self.values == other.values
    }
}

impl<'s> NodalField<'s> {
    pub fn new(space: &'s FeSpace, values: Vec<f64>) -> Result<Self, FeError> {
        if values.len() != space.ndofs() {
            return Err(FeError::LengthMismatch { expected: space.ndofs(), found: values.len() });
        }
        Ok(NodalField { space, values })
    }

    /// Interior values from `interior`, boundary values copied from
    /// `boundary`.
    pub fn from_interior(space: &'s FeSpace, interior: &[f64], boundary: &[f64]) -> Self {
        assert_eq!(interior.len(), space.n_interior());
        assert_eq!(boundary.len(), space.ndofs());
        let mut values = boundary.to_vec();
        for (k, &d) in space.interior_dofs().iter().enumerate() {
            values[d] = interior[k];
        }
        NodalField { space, values }
    }

    pub fn space(&self) -> &'s FeSpace {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.space.interior_dofs().iter().map(|&d| self.values[d]).collect()
    }

    pub fn check_same_space(&self, other: &NodalField<'_>) -> Result<(), FeError> {
        if self.space.same_as(other.space) {
            Ok(())
        } else {
            Err(FeError::SpaceMismatch)
        }
    }

    /// Value inside triangle `t` at barycentric coordinates `l`.
    pub fn evaluate_in(&self, t: usize, l: [f64; 3]) -> f64 {
        let el = self.space.element(t);
        let phi = el.shape_values(self.space.degree(), l);
        self.space.cell_dofs(t).iter().zip(phi).map(|(&d, p)| self.values[d] * p).sum()
    }

    pub fn gradient_in(&self, t: usize, l: [f64; 3]) -> [f64; 2] {
        let el = self.space.element(t);
        let g = el.shape_gradients(self.space.degree(), l);
        let mut out = [0.0; 2];
        for (&d, gi) in self.space.cell_dofs(t).iter().zip(g) {
            out[0] += self.values[d] * gi[0];
            out[1] += self.values[d] * gi[1];
        }
        out
    }

    pub fn axpy(&self, a: f64, other: &NodalField<'_>) -> Result<NodalField<'s>, FeError> {
        self.check_same_space(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Ok(NodalField { space: self.space, values })
    }
}
