//! Conforming 2D triangulations: construction, uniform refinement, quality
//! metrics and a small text file format.
//!
//! File format (whitespace separated, `#` starts a comment):
//!
//! ```text
//! nv nt nbe
//! x y            # nv lines
//! v0 v1 v2       # nt lines, counter-clockwise
//! v0 v1 marker   # nbe lines
//! ```
//!
//! All indices are 0-based.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("grid must have at least one cell in each direction (got {nx}x{ny})")]
    EmptyGrid { nx: usize, ny: usize },
    #[error("degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]")]
    DegenerateRectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vertex index {index} out of range ({count} vertices)")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("triangle {triangle} has non-positive signed area {area:e}")]
    InvertedTriangle { triangle: usize, area: f64 },
    #[error("non-conforming connectivity: {0}")]
    NonConforming(String),
    #[error("boundary description inconsistent with connectivity: {0}")]
    BoundaryMismatch(String),
    #[error("malformed mesh file at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT_SQUARE: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    fn validate(&self) -> Result<(), MeshError> {
        let ok = self.x0.is_finite()
            && self.x1.is_finite()
            && self.y0.is_finite()
            && self.y1.is_finite()
            && self.x1 > self.x0
            && self.y1 > self.y0;
        if ok {
            Ok(())
        } else {
            Err(MeshError::DegenerateRectangle { x0: self.x0, x1: self.x1, y0: self.y0, y1: self.y1 })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub marker: i32,
}

/// A validated conforming triangulation.
///
/// Triangles are stored counter-clockwise with strictly positive area, every
/// interior edge is shared by exactly two triangles and every boundary edge
/// appears exactly once in `boundary_edges`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub h_max: f64,
    pub h_min: f64,
    pub min_angle: f64,
    pub max_angle: f64,
    /// max over triangles of diameter / inradius
    pub shape_regularity_ratio: f64,
}

/// Undirected edge key with sorted endpoints.
pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a mesh after checking orientation, conformity and the boundary
    /// description.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for &[a, b, c] in &triangles {
            for v in [a, b, c] {
                if v >= nv {
                    return Err(MeshError::IndexOutOfRange { index: v, count: nv });
                }
            }
        }
        for e in &boundary_edges {
            for v in e.vertices {
                if v >= nv {
                    return Err(MeshError::IndexOutOfRange { index: v, count: nv });
                }
            }
        }
        for (t, &[a, b, c]) in triangles.iter().enumerate() {
            if a == b || b == c || a == c {
                return Err(MeshError::NonConforming(format!("triangle {t} repeats a vertex")));
            }
            let area = signed_area(vertices[a], vertices[b], vertices[c]);
            if !(area > 0.0) {
                return Err(MeshError::InvertedTriangle { triangle: t, area });
            }
        }

        let mut seen_tris: HashMap<[usize; 3], usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            let mut key = *tri;
            key.sort_unstable();
            if let Some(prev) = seen_tris.insert(key, t) {
                return Err(MeshError::NonConforming(format!("triangles {prev} and {t} coincide")));
            }
        }

        let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
        for &[a, b, c] in &triangles {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                *edge_use.entry(edge_key(p, q)).or_default() += 1;
            }
        }
        if let Some((e, n)) = edge_use.iter().find(|(_, &n)| n > 2) {
            return Err(MeshError::NonConforming(format!(
                "edge ({}, {}) is shared by {n} triangles",
                e.0, e.1
            )));
        }

        let mut listed: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &boundary_edges {
            let key = edge_key(e.vertices[0], e.vertices[1]);
            match edge_use.get(&key) {
                Some(1) => {}
                Some(_) => {
                    return Err(MeshError::BoundaryMismatch(format!(
                        "edge ({}, {}) is interior",
                        key.0, key.1
                    )))
                }
                None => {
                    return Err(MeshError::BoundaryMismatch(format!(
                        "edge ({}, {}) is not an edge of any triangle",
                        key.0, key.1
                    )))
                }
            }
            *listed.entry(key).or_default() += 1;
        }
        if let Some((e, _)) = listed.iter().find(|(_, &n)| n > 1) {
            return Err(MeshError::BoundaryMismatch(format!("edge ({}, {}) listed twice", e.0, e.1)));
        }
        let n_boundary = edge_use.values().filter(|&&n| n == 1).count();
        if n_boundary != listed.len() {
            return Err(MeshError::BoundaryMismatch(format!(
                "{} boundary edges in connectivity but {} listed",
                n_boundary,
                listed.len()
            )));
        }

        Ok(Mesh { vertices, triangles, boundary_edges })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    /// Triangle diameter, i.e. its longest edge.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    /// Interior angles at the three vertices, in radians.
    pub fn angles(&self, t: usize) -> [f64; 3] {
        let p = self.triangle_points(t);
        let mut out = [0.0; 3];
        for i in 0..3 {
            let o = p[i];
            let u = [p[(i + 1) % 3][0] - o[0], p[(i + 1) % 3][1] - o[1]];
            let v = [p[(i + 2) % 3][0] - o[0], p[(i + 2) % 3][1] - o[1]];
            let cross = u[0] * v[1] - u[1] * v[0];
            let dot = u[0] * v[0] + u[1] * v[1];
            out[i] = cross.abs().atan2(dot);
        }
        out
    }

    /// Sorted list of all distinct edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [edge_key(a, b), edge_key(b, c), edge_key(c, a)])
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Distinct boundary markers in ascending order.
    pub fn markers(&self) -> Vec<i32> {
        let mut m: Vec<i32> = self.boundary_edges.iter().map(|e| e.marker).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    pub fn quality(&self) -> MeshQuality {
        mesh_quality(self)
    }

    /// Uniform red refinement: each triangle is split into four congruent
    /// children through its edge midpoints.
    pub fn refine_uniform(&self) -> Mesh {
        let edges = self.edges();
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
        for (k, &(a, b)) in edges.iter().enumerate() {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            midpoint.insert((a, b), nv + k);
        }
        let mid = |a: usize, b: usize| midpoint[&edge_key(a, b)];

        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }

        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for e in &self.boundary_edges {
            let [a, b] = e.vertices;
            let m = mid(a, b);
            boundary_edges.push(BoundaryEdge { vertices: [a, m], marker: e.marker });
            boundary_edges.push(BoundaryEdge { vertices: [m, b], marker: e.marker });
        }

        Mesh { vertices, triangles, boundary_edges }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
        let text = std::fs::read_to_string(path)?;
        Mesh::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Serialises to the text format. `f64` values use the shortest
    /// representation that parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.vertices.len(), self.triangles.len(), self.boundary_edges.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.marker);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Mesh, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        fn fields<const N: usize>(line: usize, s: &str) -> Result<[&str; N], MeshError> {
            let parts: Vec<&str> = s.split_whitespace().collect();
            parts.try_into().map_err(|p: Vec<&str>| MeshError::Parse {
                line,
                message: format!("expected {N} fields, found {}", p.len()),
            })
        }
        fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, MeshError> {
            s.parse().map_err(|_| MeshError::Parse { line, message: format!("cannot parse '{s}'") })
        }
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| MeshError::Parse {
                line: 0,
                message: format!("unexpected end of file while reading {what}"),
            })
        };

        let (l, header) = next("header")?;
        let [a, b, c] = fields::<3>(l, header)?;
        let (nv, nt, nbe): (usize, usize, usize) = (num(l, a)?, num(l, b)?, num(l, c)?);

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (l, s) = next("vertices")?;
            let [x, y] = fields::<2>(l, s)?;
            let p: Point = [num(l, x)?, num(l, y)?];
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(MeshError::Parse { line: l, message: "non-finite coordinate".into() });
            }
            vertices.push(p);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (l, s) = next("triangles")?;
            let [a, b, c] = fields::<3>(l, s)?;
            triangles.push([num(l, a)?, num(l, b)?, num(l, c)?]);
        }
        let mut boundary_edges = Vec::with_capacity(nbe);
        for _ in 0..nbe {
            let (l, s) = next("boundary edges")?;
            let [a, b, m] = fields::<3>(l, s)?;
            boundary_edges.push(BoundaryEdge { vertices: [num(l, a)?, num(l, b)?], marker: num(l, m)? });
        }
        if let Some((l, _)) = lines.next() {
            return Err(MeshError::Parse { line: l, message: "trailing data after boundary edges".into() });
        }
        Mesh::new(vertices, triangles, boundary_edges)
    }
}

/// Structured mesh where each of the `nx * ny` cells is cut into four
/// triangles by both diagonals. All boundary edges get marker 1.
pub fn generate_criss_cross(nx: usize, ny: usize, rect: Rect) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::EmptyGrid { nx, ny });
    }
    rect.validate()?;
    let dx = (rect.x1 - rect.x0) / nx as f64;
    let dy = (rect.y1 - rect.y0) / ny as f64;
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let center = |i: usize, j: usize| (nx + 1) * (ny + 1) + j * nx + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
    for j in 0..=ny {
        for i in 0..=nx {
            // pin the far edges so they do not drift by rounding
            let x = if i == nx { rect.x1 } else { rect.x0 + i as f64 * dx };
            let y = if j == ny { rect.y1 } else { rect.y0 + j as f64 * dy };
            vertices.push([x, y]);
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([rect.x0 + (i as f64 + 0.5) * dx, rect.y0 + (j as f64 + 0.5) * dy]);
        }
    }

    let mut triangles = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (bl, br, tr, tl) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
            let c = center(i, j);
            triangles.push([bl, br, c]);
            triangles.push([br, tr, c]);
            triangles.push([tr, tl, c]);
            triangles.push([tl, bl, c]);
        }
    }

    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    let mut push = |a: usize, b: usize| boundary_edges.push(BoundaryEdge { vertices: [a, b], marker: 1 });
    for i in 0..nx {
        push(grid(i, 0), grid(i + 1, 0));
    }
    for j in 0..ny {
        push(grid(nx, j), grid(nx, j + 1));
    }
    for i in (0..nx).rev() {
        push(grid(i + 1, ny), grid(i, ny));
    }
    for j in (0..ny).rev() {
        push(grid(0, j + 1), grid(0, j));
    }

    Mesh::new(vertices, triangles, boundary_edges)
}

/// Default `apex_shift`, giving an obtuse angle of 100 degrees.
pub const DEFAULT_APEX_SHIFT: f64 = 0.176_326_980_708_464_97; // tan(10 deg)

/// Obtuse-layer family on `rect` (canonically `(-1, 1) x (0, 1)`).
///
/// The coarse mesh has a bottom midpoint `E`, the four corners and a top
/// vertex `M` shifted right of the vertical midline by `apex_shift` times the
/// half width. This gives two right triangles, one acute triangle and a
/// single obtuse triangle `E C M` whose angle at `M` is
/// `pi/2 + atan(apex_shift * half_width / height)`. Level `L` applies `L - 1`
/// red refinements; all descendants of the obtuse triangle are similar to it,
/// so the band of obtuse triangles persists at every level.
pub fn generate_obtuse_layer(level: usize, rect: Rect, apex_shift: f64) -> Result<Mesh, MeshError> {
    if level == 0 {
        return Err(MeshError::InvalidParameter("obtuse-layer level must be >= 1".into()));
    }
    rect.validate()?;
    if !(apex_shift > 0.0 && apex_shift < 1.0) {
        return Err(MeshError::InvalidParameter(format!(
            "apex_shift must lie in (0, 1), got {apex_shift}"
        )));
    }
    let xm = 0.5 * (rect.x0 + rect.x1);
    let half = 0.5 * (rect.x1 - rect.x0);
    let apex_x = xm + apex_shift * half;
    let vertices = vec![
        [rect.x0, rect.y0], // A
        [xm, rect.y0],      // E
        [rect.x1, rect.y0], // B
        [rect.x1, rect.y1], // C
        [apex_x, rect.y1],  // M
        [rect.x0, rect.y1], // D
    ];
    let (a, e, b, c, m, d) = (0, 1, 2, 3, 4, 5);
    let triangles = vec![[a, e, d], [e, m, d], [e, b, c], [e, c, m]];
    let boundary_edges = [(a, e), (e, b), (b, c), (c, m), (m, d), (d, a)]
        .into_iter()
        .map(|(p, q)| BoundaryEdge { vertices: [p, q], marker: 1 })
        .collect();
    let mut mesh = Mesh::new(vertices, triangles, boundary_edges)?;
    for t in 0..mesh.num_triangles() {
        if mesh.area(t) <= 1e-12 * (rect.x1 - rect.x0) * (rect.y1 - rect.y0) {
            return Err(MeshError::InvalidParameter(format!(
                "apex_shift {apex_shift} gives a degenerate initial triangle"
            )));
        }
    }
    for _ in 1..level {
        mesh = mesh.refine_uniform();
    }
    Ok(mesh)
}

pub fn mesh_quality(mesh: &Mesh) -> MeshQuality {
    let mut q = MeshQuality {
        h_max: 0.0,
        h_min: f64::INFINITY,
        min_angle: f64::INFINITY,
        max_angle: 0.0,
        shape_regularity_ratio: 0.0,
    };
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.triangle_points(t);
        let h = mesh.diameter(t);
        let perimeter = dist(a, b) + dist(b, c) + dist(c, a);
        let inradius = 2.0 * mesh.area(t) / perimeter;
        q.h_max = q.h_max.max(h);
        q.h_min = q.h_min.min(h);
        q.shape_regularity_ratio = q.shape_regularity_ratio.max(h / inradius);
        for ang in mesh.angles(t) {
            q.min_angle = q.min_angle.min(ang);
            q.max_angle = q.max_angle.max(ang);
        }
    }
    q
}

/// Vertex -> incident triangles, as offsets into a flat list.
pub(crate) fn vertex_triangles(mesh: &Mesh) -> (Vec<usize>, Vec<usize>) {
    let nv = mesh.num_vertices();
    let mut count = vec![0usize; nv + 1];
    for tri in mesh.triangles() {
        for &v in tri {
            count[v + 1] += 1;
        }
    }
    for i in 0..nv {
        count[i + 1] += count[i];
    }
    let offsets = count.clone();
    let mut fill = count;
    let mut list = vec![0usize; offsets[nv]];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            list[fill[v]] = t;
            fill[v] += 1;
        }
    }
    (offsets, list)
}

/// Marker for every vertex on the boundary (smallest marker among its
/// boundary edges).
pub(crate) fn boundary_vertex_markers(mesh: &Mesh) -> BTreeMap<usize, i32> {
    let mut out: BTreeMap<usize, i32> = BTreeMap::new();
    for e in mesh.boundary_edges() {
        for v in e.vertices {
            out.entry(v).and_modify(|m| *m = (*m).min(e.marker)).or_insert(e.marker);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, SQRT_2};

    fn edge_use_counts(mesh: &Mesh) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::new();
        for &[a, b, c] in mesh.triangles() {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                *m.entry(edge_key(p, q)).or_insert(0) += 1;
            }
        }
        m
    }

    fn check_edge_uses(mesh: &Mesh) {
        let uses = edge_use_counts(mesh);
        let boundary: Vec<(usize, usize)> =
            mesh.boundary_edges().iter().map(|e| edge_key(e.vertices[0], e.vertices[1])).collect();
        for (e, n) in &uses {
            if boundary.contains(e) {
                assert_eq!(*n, 1);
            } else {
                assert_eq!(*n, 2, "interior edge {e:?}");
            }
        }
        for t in 0..mesh.num_triangles() {
            assert!(mesh.area(t) > 0.0);
        }
    }

    #[test]
    fn criss_cross_counts() {
        let m = generate_criss_cross(1, 1, Rect::UNIT_SQUARE).unwrap();
        assert_eq!(m.num_triangles(), 4);
        assert_eq!(m.num_vertices(), 5);
        let boundary = boundary_vertex_markers(&m);
        assert_eq!(m.num_vertices() - boundary.len(), 1);
        assert!(!boundary.contains_key(&4));

        let m = generate_criss_cross(2, 2, Rect::UNIT_SQUARE).unwrap();
        assert_eq!(m.num_triangles(), 16);
        assert_eq!(m.num_vertices(), 13);
        check_edge_uses(&m);
        assert_eq!(m.markers(), vec![1]);
    }

    #[test]
    fn criss_cross_h_max_by_edge_enumeration() {
        for n in [1usize, 3, 8] {
            let m = generate_criss_cross(n, n, Rect::UNIT_SQUARE).unwrap();
            let mut brute: f64 = 0.0;
            for &[a, b, c] in m.triangles() {
                for (p, q) in [(a, b), (b, c), (c, a)] {
                    brute = brute.max(dist(m.vertices()[p], m.vertices()[q]));
                }
            }
            let q = m.quality();
            assert_eq!(q.h_max, brute);
            // cell side is the longest edge of every criss-cross triangle
            assert!((brute - 1.0 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn criss_cross_rejects_bad_input() {
        assert!(matches!(generate_criss_cross(0, 3, Rect::UNIT_SQUARE), Err(MeshError::EmptyGrid { .. })));
        assert!(matches!(
            generate_criss_cross(2, 2, Rect::new(0.0, 0.0, 0.0, 1.0)),
            Err(MeshError::DegenerateRectangle { .. })
        ));
    }

    #[test]
    fn refinement_quadruples_and_halves() {
        let m0 = generate_criss_cross(1, 1, Rect::UNIT_SQUARE).unwrap();
        let m1 = m0.refine_uniform();
        let m2 = m1.refine_uniform();
        assert_eq!(m1.num_triangles(), 16);
        assert_eq!(m2.num_triangles(), 64);
        check_edge_uses(&m1);
        check_edge_uses(&m2);
        let (q0, q1) = (m0.quality(), m1.quality());
        assert_eq!(q1.h_max, q0.h_max / 2.0);
        assert!((q1.shape_regularity_ratio - q0.shape_regularity_ratio).abs() < 1e-12);
        // marker inheritance and re-validation
        assert!(Mesh::new(m2.vertices.clone(), m2.triangles.clone(), m2.boundary_edges.clone()).is_ok());
        assert_eq!(m2.boundary_edges().len(), 16);
    }

    #[test]
    fn quality_of_simple_triangles() {
        let right = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![
                BoundaryEdge { vertices: [0, 1], marker: 1 },
                BoundaryEdge { vertices: [1, 2], marker: 1 },
                BoundaryEdge { vertices: [2, 0], marker: 1 },
            ],
        )
        .unwrap();
        assert!((right.diameter(0) - SQRT_2).abs() < 1e-15);
        assert!((right.quality().max_angle - FRAC_PI_2).abs() < 1e-14);

        let s = 3f64.sqrt() / 2.0;
        let eq = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, s], [1.5, s]],
            vec![[0, 1, 2], [1, 3, 2]],
            vec![
                BoundaryEdge { vertices: [0, 1], marker: 1 },
                BoundaryEdge { vertices: [1, 3], marker: 1 },
                BoundaryEdge { vertices: [3, 2], marker: 1 },
                BoundaryEdge { vertices: [2, 0], marker: 1 },
            ],
        )
        .unwrap();
        let q = eq.quality();
        assert!((q.min_angle - FRAC_PI_3).abs() < 1e-12);
        assert!((q.max_angle - FRAC_PI_3).abs() < 1e-12);
    }

    #[test]
    fn obtuse_layer_properties() {
        let base = Rect::new(-1.0, 1.0, 0.0, 1.0);
        let meshes: Vec<Mesh> =
            (1..=4).map(|l| generate_obtuse_layer(l, base, DEFAULT_APEX_SHIFT).unwrap()).collect();
        let max0 = meshes[0].quality().max_angle;
        assert!((max0.to_degrees() - 100.0).abs() < 1e-9);
        for (l, m) in meshes.iter().enumerate() {
            check_edge_uses(m);
            let q = m.quality();
            assert!((q.max_angle - max0).abs() < 1e-12, "level {}", l + 1);
            assert!(q.max_angle > FRAC_PI_2);
            assert_eq!(m.num_triangles(), 4 * 4usize.pow(l as u32));
            let obtuse = (0..m.num_triangles()).filter(|&t| m.angles(t)[2].max(m.angles(t)[1]).max(m.angles(t)[0]) > FRAC_PI_2 + 1e-9).count();
            assert_eq!(obtuse, 4usize.pow(l as u32));
        }
        assert!(generate_obtuse_layer(2, base, 0.0).is_err());
        assert!(generate_obtuse_layer(2, base, 1.0).is_err());
        assert!(generate_obtuse_layer(0, base, 0.5).is_err());
    }

    #[test]
    fn round_trip_text() {
        let m = generate_criss_cross(3, 2, Rect::new(-0.3, 1.7, 0.1, 0.9)).unwrap().refine_uniform();
        let back = Mesh::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn parse_errors_are_distinct() {
        let good = generate_criss_cross(1, 1, Rect::UNIT_SQUARE).unwrap().to_text();

        let dup = good.replacen("5 4 4", "5 5 4", 1).replacen("0 1 4\n", "0 1 4\n0 1 4\n", 1);
        assert!(matches!(Mesh::parse(&dup), Err(MeshError::NonConforming(_))), "{dup}");

        let inverted = good.replacen("0 1 4\n", "1 0 4\n", 1);
        assert!(matches!(Mesh::parse(&inverted), Err(MeshError::InvertedTriangle { .. })));

        let garbage = good.replacen("0 1 4\n", "0 one 4\n", 1);
        assert!(matches!(Mesh::parse(&garbage), Err(MeshError::Parse { .. })));

        let short = good.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(matches!(Mesh::parse(&short), Err(MeshError::Parse { .. })));

        let commented = format!("# criss-cross\n{}", good.replacen("\n", " # header\n", 1));
        assert!(Mesh::parse(&commented).is_ok());
    }

    #[test]
    fn missing_boundary_edge_is_rejected() {
        let m = generate_criss_cross(1, 1, Rect::UNIT_SQUARE).unwrap();
        let mut be = m.boundary_edges().to_vec();
        be.pop();
        assert!(matches!(
            Mesh::new(m.vertices().to_vec(), m.triangles().to_vec(), be),
            Err(MeshError::BoundaryMismatch(_))
        ));
    }
}
