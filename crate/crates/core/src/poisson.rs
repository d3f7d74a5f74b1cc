//! Triangulation of polygons and a Lagrange finite element solver for
//! Δu = source with (possibly edge-wise discontinuous) Dirichlet data.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, RefinementParameters, Triangulation};
use thiserror::Error;

use crate::geometry::{Point2, Polygon};
use crate::polyfam::{inner_poly, HullFrame, PolyKind, Trace1D};
use crate::quadrature::{triangle_rule, QuadRule2D};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum PoissonError {
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("point ({0}, {1}) lies outside the mesh")]
    OutsideDomain(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeTag {
    Interior,
    /// On polygon edge `edge` at arc parameter `s`, strictly between its vertices.
    Edge { edge: usize, s: f64 },
    /// At polygon vertex `vertex`, shared by edges `vertex - 1` and `vertex`.
    Corner(usize),
}

/// Triangulation with quadratic midside nodes.
#[derive(Debug, Clone)]
pub struct TriMesh {
    /// Vertex nodes first, then one midside node per mesh edge.
    pub nodes: Vec<Point2>,
    pub n_vertices: usize,
    /// CCW vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Midside nodes of edges (v0,v1), (v1,v2), (v2,v0).
    pub midsides: Vec<[usize; 3]>,
    pub tags: Vec<NodeTag>,
    pub h: f64,
    /// Copy of the meshed polygon, used for tagging and refinement.
    pub polygon: Polygon,
    locator: Locator,
}

#[derive(Debug, Clone)]
struct Locator {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl Locator {
    fn new(nodes: &[Point2], triangles: &[[usize; 3]], h: f64) -> Self {
        let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
        for p in nodes {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-300);
        let cell = h.max(span / 512.0);
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        for (t, tri) in triangles.iter().enumerate() {
            let ps = tri.map(|i| nodes[i]);
            let x0 = ps.iter().map(|p| p.x).fold(f64::MAX, f64::min);
            let x1 = ps.iter().map(|p| p.x).fold(f64::MIN, f64::max);
            let y0 = ps.iter().map(|p| p.y).fold(f64::MAX, f64::min);
            let y1 = ps.iter().map(|p| p.y).fold(f64::MIN, f64::max);
            let (i0, i1) = (((x0 - lo.x) / cell) as usize, (((x1 - lo.x) / cell) as usize).min(nx - 1));
            let (j0, j1) = (((y0 - lo.y) / cell) as usize, (((y1 - lo.y) / cell) as usize).min(ny - 1));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    cells[j * nx + i].push(t as u32);
                }
            }
        }
        Locator { origin: lo, cell, nx, ny, cells }
    }

    fn candidates(&self, p: Point2) -> &[u32] {
        let fx = (p.x - self.origin.x) / self.cell;
        let fy = (p.y - self.origin.y) / self.cell;
        if fx < -1e-9 || fy < -1e-9 {
            return &[];
        }
        let (i, j) = ((fx.max(0.0) as usize).min(self.nx - 1), (fy.max(0.0) as usize).min(self.ny - 1));
        if fx > self.nx as f64 + 1e-9 || fy > self.ny as f64 + 1e-9 {
            return &[];
        }
        &self.cells[j * self.nx + i]
    }
}

fn barycentric(a: Point2, b: Point2, c: Point2, p: Point2) -> [f64; 3] {
    let det = (b - a).cross(c - a);
    let l1 = (p - a).cross(c - a) / det;
    let l2 = (b - a).cross(p - a) / det;
    [1.0 - l1 - l2, l1, l2]
}

impl TriMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn vertex(&self, t: usize, k: usize) -> Point2 {
        self.nodes[self.triangles[t][k]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * (b - a).cross(c - a)
    }

    pub fn max_edge(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.nodes[i]);
                a.dist(b).max(b.dist(c)).max(c.dist(a))
            })
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle(&self) -> f64 {
        let mut m = 180.0f64;
        for t in &self.triangles {
            let p = t.map(|i| self.nodes[i]);
            for k in 0..3 {
                let u = p[(k + 1) % 3] - p[k];
                let v = p[(k + 2) % 3] - p[k];
                let ang = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos().to_degrees();
                m = m.min(ang);
            }
        }
        m
    }

    /// Locates `p`, returning the triangle and barycentric coordinates.
    pub fn locate(&self, p: Point2) -> Result<(usize, [f64; 3]), PoissonError> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in self.locator.candidates(p) {
            let t = t as usize;
            let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
            let l = barycentric(a, b, c, p);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= 0.0 {
                return Ok((t, l));
            }
            if best.map_or(true, |(_, _, w)| worst > w) {
                best = Some((t, l, worst));
            }
        }
        match best {
            Some((t, l, w)) if w > -1e-9 => Ok((t, l)),
            _ => Err(PoissonError::OutsideDomain(p.x, p.y)),
        }
    }

    /// Dumps nodes and triangles as plain text.
    pub fn dump(&self) -> String {
        let mut s = format!("{} nodes\n", self.nodes.len());
        for (p, t) in self.nodes.iter().zip(&self.tags) {
            s += &format!("{} {} {:?}\n", p.x, p.y, t);
        }
        s += &format!("{} triangles\n", self.triangles.len());
        for (t, m) in self.triangles.iter().zip(&self.midsides) {
            s += &format!("{} {} {} {} {} {}\n", t[0], t[1], t[2], m[0], m[1], m[2]);
        }
        s
    }

    /// Builds tags and midside nodes from a vertex triangulation of `polygon`.
    pub fn from_parts(polygon: &Polygon, verts: Vec<Point2>, triangles: Vec<[usize; 3]>, h: f64) -> Result<Self, PoissonError> {
        let eps = 1e-9 * polygon.diameter;
        let n = polygon.n();
        let tag_of = |p: Point2| -> NodeTag {
            if let Some(v) = polygon.vertices.iter().position(|q| q.dist(p) < eps) {
                return NodeTag::Corner(v);
            }
            for (i, e) in polygon.edges.iter().enumerate() {
                if e.distance(p) < eps {
                    return NodeTag::Edge { edge: i, s: e.project(p) };
                }
            }
            NodeTag::Interior
        };
        let mut tags: Vec<NodeTag> = verts.iter().map(|&p| tag_of(p)).collect();
        let mut nodes = verts;
        let n_vertices = nodes.len();
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| nodes[i]);
            if (b - a).cross(c - a) <= 0.0 {
                return Err(PoissonError::MeshFailure(format!("triangle {t} is not positively oriented")));
            }
        }
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        // Which polygon edges a boundary vertex can belong to.
        let incident = |tag: NodeTag| -> Vec<usize> {
            match tag {
                NodeTag::Edge { edge, .. } => vec![edge],
                NodeTag::Corner(v) => vec![(v + n - 1) % n, v],
                NodeTag::Interior => vec![],
            }
        };
        let mut mid_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midsides = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut m = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let idx = *mid_index.entry(key).or_insert_with(|| {
                    let p = (nodes[a] + nodes[b]) * 0.5;
                    let mut tag = NodeTag::Interior;
                    if edge_count[&key] == 1 {
                        let ea = incident(tags[a]);
                        let eb = incident(tags[b]);
                        if let Some(&e) = ea.iter().find(|e| eb.contains(e)) {
                            tag = NodeTag::Edge { edge: e, s: polygon.edges[e].project(p) };
                        }
                    }
                    nodes.push(p);
                    tags.push(tag);
                    nodes.len() - 1
                });
                m[k] = idx;
            }
            midsides.push(m);
        }
        // Every mesh boundary edge must lie on a polygon edge.
        for (key, &count) in &edge_count {
            if count == 1 {
                let ea = incident(tags[key.0]);
                let eb = incident(tags[key.1]);
                if !ea.iter().any(|e| eb.contains(e)) {
                    return Err(PoissonError::MeshFailure("mesh boundary does not follow the polygon".into()));
                }
            }
        }
        let locator = Locator::new(&nodes, &triangles, h);
        Ok(TriMesh { nodes, n_vertices, triangles, midsides, tags, h, polygon: polygon.clone(), locator })
    }

    /// Splits every triangle into four through its edge midpoints.
    pub fn refine_uniform(&self) -> Result<TriMesh, PoissonError> {
        let verts: Vec<Point2> = self.nodes.clone();
        let mut tris = Vec::with_capacity(4 * self.triangles.len());
        for (t, m) in self.triangles.iter().zip(&self.midsides) {
            tris.push([t[0], m[0], m[2]]);
            tris.push([m[0], t[1], m[1]]);
            tris.push([m[2], m[1], t[2]]);
            tris.push([m[0], m[1], m[2]]);
        }
        TriMesh::from_parts(&self.polygon, verts, tris, self.h * 0.5)
    }
}

/// Minimum-angle target handed to the refiner, in degrees.
pub const QUALITY_FLOOR_DEG: f64 = 20.0;

/// Constrained Delaunay triangulation refined until every mesh edge is at most `h`.
pub fn triangulate(p: &Polygon, h: f64) -> Result<TriMesh, PoissonError> {
    if !(h > 0.0) {
        return Err(PoissonError::MeshFailure("mesh size must be positive".into()));
    }
    let mut max_area = 0.4 * h * h;
    for _ in 0..40 {
        let mut cdt = ConstrainedDelaunayTriangulation::<spade::Point2<f64>>::new();
        let mut handles = Vec::with_capacity(p.n());
        for v in &p.vertices {
            handles.push(cdt.insert(spade::Point2::new(v.x, v.y)).map_err(|e| PoissonError::MeshFailure(format!("{e:?}")))?);
        }
        for i in 0..p.n() {
            cdt.add_constraint(handles[i], handles[(i + 1) % p.n()]);
        }
        let budget = ((p.area / max_area) as usize * 8 + 1000).max(10 * p.n());
        let result = cdt.refine(
            RefinementParameters::<f64>::new()
                .with_angle_limit(AngleLimit::from_deg(QUALITY_FLOOR_DEG))
                .with_max_allowed_area(max_area)
                .exclude_outer_faces(true)
                .with_max_additional_vertices(budget),
        );
        if !result.refinement_complete {
            return Err(PoissonError::MeshFailure("refinement ran out of vertices".into()));
        }
        let excluded: HashSet<usize> = result.excluded_faces.iter().map(|f| f.index()).collect();
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for face in cdt.inner_faces() {
            if excluded.contains(&face.fix().index()) {
                continue;
            }
            let vs = face.vertices();
            let pos = vs.map(|v| Point2::new(v.position().x, v.position().y));
            let c = (pos[0] + pos[1] + pos[2]) * (1.0 / 3.0);
            if !p.contains(c) {
                continue;
            }
            let mut tri = [0usize; 3];
            for k in 0..3 {
                let key = vs[k].fix().index();
                tri[k] = *index.entry(key).or_insert_with(|| {
                    verts.push(pos[k]);
                    verts.len() - 1
                });
            }
            tris.push(tri);
        }
        let mesh = TriMesh::from_parts(p, verts, tris, h)?;
        let covered: f64 = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).sum();
        if (covered - p.area).abs() > 1e-9 * p.area {
            return Err(PoissonError::MeshFailure(format!("mesh area {covered} differs from polygon area {}", p.area)));
        }
        if mesh.max_edge() <= h {
            return Ok(mesh);
        }
        max_area *= 0.5;
    }
    Err(PoissonError::MeshFailure("could not reach the requested mesh size".into()))
}

/// Default mesh size: 1/64 of the polygon diameter, overridable by POLYDIV_MESH_H.
pub fn default_h(p: &Polygon) -> f64 {
    if let Some(h) = std::env::var("POLYDIV_MESH_H").ok().and_then(|s| s.parse::<f64>().ok()) {
        if h > 0.0 {
            return h;
        }
    }
    p.diameter / 64.0
}

#[derive(Clone)]
pub enum EdgeData {
    Zero,
    Constant(f64),
    Trace(Trace1D),
    /// Arbitrary function of the arc parameter.
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for EdgeData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeData::Zero => write!(f, "Zero"),
            EdgeData::Constant(c) => write!(f, "Constant({c})"),
            EdgeData::Trace(t) => write!(f, "Trace({t:?})"),
            EdgeData::Function(_) => write!(f, "Function"),
        }
    }
}

impl EdgeData {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            EdgeData::Zero => 0.0,
            EdgeData::Constant(c) => *c,
            EdgeData::Trace(t) => t.eval(s),
            EdgeData::Function(f) => f(s),
        }
    }
    pub fn is_zero(&self) -> bool {
        matches!(self, EdgeData::Zero)
    }
}

/// How a corner node picks its value when the two adjacent traces disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CornerRule {
    #[default]
    Average,
    Zero,
    /// The value of the edge that starts at the corner.
    FirstEdge,
}

#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub edges: Vec<EdgeData>,
}

impl BoundaryData {
    pub fn zero(n: usize) -> Self {
        BoundaryData { edges: vec![EdgeData::Zero; n] }
    }
    pub fn uniform(n: usize, c: f64) -> Self {
        BoundaryData { edges: vec![EdgeData::Constant(c); n] }
    }
    /// `data` on edge `i`, zero elsewhere.
    pub fn on_edge(n: usize, i: usize, data: EdgeData) -> Self {
        let mut b = Self::zero(n);
        b.edges[i] = data;
        b
    }
    /// Restriction of a function of position to every edge.
    pub fn from_fn(p: &Polygon, f: Arc<dyn Fn(Point2) -> f64 + Send + Sync>) -> Self {
        let edges = p
            .edges
            .iter()
            .map(|&e| {
                let f = f.clone();
                EdgeData::Function(Arc::new(move |s| f(e.at(s))))
            })
            .collect();
        BoundaryData { edges }
    }

    pub fn corner_value(&self, p: &Polygon, v: usize, rule: CornerRule) -> f64 {
        let n = self.edges.len();
        let prev = (v + n - 1) % n;
        let before = self.edges[prev].eval(p.edges[prev].length);
        let after = self.edges[v].eval(0.0);
        match rule {
            CornerRule::Average => 0.5 * (before + after),
            CornerRule::Zero => 0.0,
            CornerRule::FirstEdge => after,
        }
    }

    pub fn node_value(&self, p: &Polygon, tag: NodeTag, rule: CornerRule) -> f64 {
        match tag {
            NodeTag::Edge { edge, s } => self.edges[edge].eval(s),
            NodeTag::Corner(v) => self.corner_value(p, v, rule),
            NodeTag::Interior => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.edges.iter().all(EdgeData::is_zero)
    }
}

#[derive(Clone)]
pub enum Source {
    Zero,
    Constant(f64),
    /// An inner polynomial q_{i,j} of the given family.
    Inner { kind: PolyKind, i: usize, j: usize, hull: HullFrame },
    Function(Arc<dyn Fn(Point2) -> f64 + Send + Sync>),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Zero => write!(f, "Zero"),
            Source::Constant(c) => write!(f, "Constant({c})"),
            Source::Inner { kind, i, j, .. } => write!(f, "Inner({kind:?}, {i}, {j})"),
            Source::Function(_) => write!(f, "Function"),
        }
    }
}

impl Source {
    pub fn eval(&self, p: Point2) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::Constant(c) => *c,
            Source::Inner { kind, i, j, hull } => inner_poly(*kind, *i, *j, p, *hull),
            Source::Function(f) => f(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeDegree {
    Linear,
    #[default]
    Quadratic,
}

impl FeDegree {
    pub fn local_dofs(self) -> usize {
        match self {
            FeDegree::Linear => 3,
            FeDegree::Quadratic => 6,
        }
    }
}

/// Shape values at barycentric coordinates `l`, in local dof order.
pub fn shape_values(deg: FeDegree, l: [f64; 3], out: &mut [f64; 6]) {
    match deg {
        FeDegree::Linear => {
            out[..3].copy_from_slice(&l);
        }
        FeDegree::Quadratic => {
            for k in 0..3 {
                out[k] = l[k] * (2.0 * l[k] - 1.0);
            }
            out[3] = 4.0 * l[0] * l[1];
            out[4] = 4.0 * l[1] * l[2];
            out[5] = 4.0 * l[2] * l[0];
        }
    }
}

/// Shape gradients given the barycentric gradients `g` of the triangle.
fn shape_gradients(deg: FeDegree, l: [f64; 3], g: [Point2; 3], out: &mut [Point2; 6]) {
    match deg {
        FeDegree::Linear => out[..3].copy_from_slice(&g),
        FeDegree::Quadratic => {
            for k in 0..3 {
                out[k] = g[k] * (4.0 * l[k] - 1.0);
            }
            out[3] = (g[0] * l[1] + g[1] * l[0]) * 4.0;
            out[4] = (g[1] * l[2] + g[2] * l[1]) * 4.0;
            out[5] = (g[2] * l[0] + g[0] * l[2]) * 4.0;
        }
    }
}

fn bary_gradients(a: Point2, b: Point2, c: Point2) -> [Point2; 3] {
    let det = (b - a).cross(c - a);
    let rot = |u: Point2| Point2::new(-u.y, u.x) * (1.0 / det);
    [rot(c - b), rot(a - c), rot(b - a)]
}

impl TriMesh {
    /// Global node indices of triangle `t` in local dof order.
    pub fn dofs(&self, t: usize, deg: FeDegree) -> [usize; 6] {
        let v = self.triangles[t];
        let m = self.midsides[t];
        match deg {
            FeDegree::Linear => [v[0], v[1], v[2], usize::MAX, usize::MAX, usize::MAX],
            FeDegree::Quadratic => [v[0], v[1], v[2], m[0], m[1], m[2]],
        }
    }
}

#[derive(Debug, Clone)]
struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_triplets(n: usize, mut trips: Vec<(usize, usize, f64)>) -> Self {
        trips.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trips.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last = (usize::MAX, usize::MAX);
        for (r, c, v) in trips {
            if (r, c) == last {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = (r, c);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { n, row_ptr, cols, vals }
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            y[i] = (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.vals[k] * x[self.cols[k]]).sum();
        }
    }

    fn diag(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).find(|&k| self.cols[k] == i).map_or(1.0, |k| self.vals[k]))
            .collect()
    }
}

/// Systems at or above this size use preconditioned conjugate gradients.
pub const DIRECT_LIMIT: usize = 200_000;

enum Factor {
    Direct(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Iterative,
}

/// A factorized Dirichlet problem on one mesh, reusable for many right-hand sides.
pub struct PoissonSolver {
    pub mesh: Arc<TriMesh>,
    pub degree: FeDegree,
    pub corner: CornerRule,
    n_nodes: usize,
    /// Node → free index, or `usize::MAX` for Dirichlet nodes.
    free_index: Vec<usize>,
    free_nodes: Vec<usize>,
    k_ii: Csr,
    /// Rows are free indices, columns global node indices of Dirichlet nodes.
    k_ib: Csr,
    factor: Factor,
    load_rule: QuadRule2D,
}

impl fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PoissonSolver({} free unknowns, {:?})", self.free_nodes.len(), self.degree)
    }
}

impl PoissonSolver {
    pub fn new(mesh: Arc<TriMesh>, degree: FeDegree, corner: CornerRule) -> Result<Self, PoissonError> {
        let n_nodes = match degree {
            FeDegree::Linear => mesh.n_vertices,
            FeDegree::Quadratic => mesh.n_nodes(),
        };
        let mut free_index = vec![usize::MAX; n_nodes];
        let mut free_nodes = Vec::new();
        for i in 0..n_nodes {
            if mesh.tags[i] == NodeTag::Interior {
                free_index[i] = free_nodes.len();
                free_nodes.push(i);
            }
        }
        let nd = degree.local_dofs();
        let rule = triangle_rule(2);
        let mut ii = Vec::with_capacity(mesh.triangles.len() * nd * nd);
        let mut ib = Vec::new();
        let mut sv = [0.0; 6];
        let mut gr = [Point2::default(); 6];
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangles[t].map(|i| mesh.nodes[i]);
            let g = bary_gradients(a, b, c);
            let jac = (b - a).cross(c - a);
            let mut local = [[0.0; 6]; 6];
            for (&(xi, eta), &w) in rule.points.iter().zip(&rule.weights) {
                let l = [1.0 - xi - eta, xi, eta];
                shape_gradients(degree, l, g, &mut gr);
                let _ = &mut sv;
                for r in 0..nd {
                    for s in 0..nd {
                        local[r][s] += w * jac * gr[r].dot(gr[s]);
                    }
                }
            }
            let dofs = mesh.dofs(t, degree);
            for r in 0..nd {
                let fr = free_index[dofs[r]];
                if fr == usize::MAX {
                    continue;
                }
                for s in 0..nd {
                    let fs = free_index[dofs[s]];
                    if fs == usize::MAX {
                        ib.push((fr, dofs[s], local[r][s]));
                    } else {
                        ii.push((fr, fs, local[r][s]));
                    }
                }
            }
        }
        let nf = free_nodes.len();
        let k_ii = Csr::from_triplets(nf, ii);
        let k_ib = Csr::from_triplets(nf, ib);
        let factor = if nf == 0 || nf >= DIRECT_LIMIT {
            Factor::Iterative
        } else {
            let mut trips = Vec::with_capacity(k_ii.vals.len());
            for r in 0..nf {
                for k in k_ii.row_ptr[r]..k_ii.row_ptr[r + 1] {
                    trips.push(Triplet::new(r, k_ii.cols[k], k_ii.vals[k]));
                }
            }
            let mat = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &trips)
                .map_err(|e| PoissonError::SingularSystem(format!("{e:?}")))?;
            let llt = mat.sp_cholesky(faer::Side::Lower).map_err(|e| PoissonError::SingularSystem(format!("{e:?}")))?;
            Factor::Direct(llt)
        };
        Ok(PoissonSolver { mesh, degree, corner, n_nodes, free_index, free_nodes, k_ii, k_ib, factor, load_rule: triangle_rule(8) })
    }

    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    fn dirichlet_values(&self, bc: &BoundaryData) -> Vec<f64> {
        let mut u = vec![0.0; self.n_nodes];
        for i in 0..self.n_nodes {
            if self.free_index[i] == usize::MAX {
                u[i] = bc.node_value(&self.mesh.polygon, self.mesh.tags[i], self.corner);
            }
        }
        u
    }

    /// Right-hand side of the reduced system: −∫ source φ_i − (K_IB u_B)_i.
    fn reduced_rhs(&self, source: &Source, u: &[f64]) -> Vec<f64> {
        let nf = self.n_free();
        let mut rhs = vec![0.0; nf];
        if !matches!(source, Source::Zero) {
            let nd = self.degree.local_dofs();
            let mut sv = [0.0; 6];
            for t in 0..self.mesh.triangles.len() {
                let [a, b, c] = self.mesh.triangles[t].map(|i| self.mesh.nodes[i]);
                let jac = (b - a).cross(c - a);
                let dofs = self.mesh.dofs(t, self.degree);
                for (&(xi, eta), &w) in self.load_rule.points.iter().zip(&self.load_rule.weights) {
                    let p = a + (b - a) * xi + (c - a) * eta;
                    let f = source.eval(p) * w * jac;
                    shape_values(self.degree, [1.0 - xi - eta, xi, eta], &mut sv);
                    for r in 0..nd {
                        let fr = self.free_index[dofs[r]];
                        if fr != usize::MAX {
                            rhs[fr] -= f * sv[r];
                        }
                    }
                }
            }
        }
        for r in 0..nf {
            for k in self.k_ib.row_ptr[r]..self.k_ib.row_ptr[r + 1] {
                rhs[r] -= self.k_ib.vals[k] * u[self.k_ib.cols[k]];
            }
        }
        rhs
    }

    fn pcg(&self, b: &[f64]) -> Result<Vec<f64>, PoissonError> {
        let n = b.len();
        let d = self.k_ii.diag();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&d).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for _ in 0..10 * n.max(100) {
            self.k_ii.mul(&p, &mut ap);
            let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-12 * bnorm {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] / d[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(PoissonError::SingularSystem("conjugate gradients did not converge".into()))
    }

    pub fn solve(&self, source: Source, bc: BoundaryData) -> Result<ScalarField, PoissonError> {
        Ok(self.solve_many(vec![(source, bc)])?.pop().unwrap())
    }

    /// Solves several problems sharing the factorization.
    pub fn solve_many(&self, problems: Vec<(Source, BoundaryData)>) -> Result<Vec<ScalarField>, PoissonError> {
        let nf = self.n_free();
        let prep = |(source, bc): &(Source, BoundaryData)| {
            let u = self.dirichlet_values(bc);
            let rhs = self.reduced_rhs(source, &u);
            (u, rhs)
        };
        #[cfg(feature = "parallel")]
        let prepared: Vec<(Vec<f64>, Vec<f64>)> = problems.par_iter().map(prep).collect();
        #[cfg(not(feature = "parallel"))]
        let prepared: Vec<(Vec<f64>, Vec<f64>)> = problems.iter().map(prep).collect();

        let mut solutions: Vec<Vec<f64>> = Vec::with_capacity(problems.len());
        match &self.factor {
            Factor::Direct(llt) => {
                let mut rhs = Mat::<f64>::from_fn(nf, prepared.len(), |i, j| prepared[j].1[i]);
                llt.solve_in_place(rhs.as_mut());
                for j in 0..prepared.len() {
                    solutions.push((0..nf).map(|i| rhs[(i, j)]).collect());
                }
            }
            Factor::Iterative => {
                for (_, rhs) in &prepared {
                    solutions.push(self.pcg(rhs)?);
                }
            }
        }
        let mut out = Vec::with_capacity(problems.len());
        for ((source, bc), ((mut u, rhs), x)) in problems.into_iter().zip(prepared.into_iter().zip(solutions)) {
            let mut residual = vec![0.0; nf];
            self.k_ii.mul(&x, &mut residual);
            let rn = residual.iter().zip(&rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let bn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rn > 1e-10 * bn.max(1e-300) && rn > 1e-14 {
                return Err(PoissonError::SingularSystem(format!("relative residual {}", rn / bn)));
            }
            for (k, &node) in self.free_nodes.iter().enumerate() {
                u[node] = x[k];
            }
            out.push(ScalarField { mesh: self.mesh.clone(), degree: self.degree, coeffs: u, source, bc, corner: self.corner });
        }
        Ok(out)
    }
}

/// Convenience wrapper: factorize and solve one problem.
pub fn solve_poisson(mesh: Arc<TriMesh>, source: Source, bc: BoundaryData) -> Result<ScalarField, PoissonError> {
    PoissonSolver::new(mesh, FeDegree::Quadratic, CornerRule::Average)?.solve(source, bc)
}

/// Finite element solution of one Poisson problem.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub mesh: Arc<TriMesh>,
    pub degree: FeDegree,
    /// One coefficient per node used by the degree.
    pub coeffs: Vec<f64>,
    pub source: Source,
    pub bc: BoundaryData,
    pub corner: CornerRule,
}

impl ScalarField {
    /// Value and gradient at local barycentric coordinates of triangle `t`.
    pub fn eval_in(&self, t: usize, l: [f64; 3]) -> (f64, Point2) {
        let [a, b, c] = self.mesh.triangles[t].map(|i| self.mesh.nodes[i]);
        let g = bary_gradients(a, b, c);
        let mut sv = [0.0; 6];
        let mut gr = [Point2::default(); 6];
        shape_values(self.degree, l, &mut sv);
        shape_gradients(self.degree, l, g, &mut gr);
        let dofs = self.mesh.dofs(t, self.degree);
        let mut v = 0.0;
        let mut grad = Point2::default();
        for k in 0..self.degree.local_dofs() {
            let c = self.coeffs[dofs[k]];
            v += c * sv[k];
            grad = grad + gr[k] * c;
        }
        (v, grad)
    }

    pub fn field_eval(&self, p: Point2) -> Result<(f64, Point2), PoissonError> {
        let (t, l) = self.mesh.locate(p)?;
        Ok(self.eval_in(t, l))
    }

    /// Exact Dirichlet data at arc parameter `s` of polygon edge `edge`.
    /// Endpoints take the corner value.
    pub fn trace(&self, edge: usize, s: f64) -> f64 {
        let len = self.mesh.polygon.edges[edge].length;
        let n = self.bc.edges.len();
        if s <= 0.0 {
            self.bc.corner_value(&self.mesh.polygon, edge, self.corner)
        } else if s >= len {
            self.bc.corner_value(&self.mesh.polygon, (edge + 1) % n, self.corner)
        } else {
            self.bc.edges[edge].eval(s)
        }
    }

    /// Values at every point of `rule` in every triangle, triangle-major.
    pub fn values_on_rule(&self, table: &RuleTable) -> Vec<f64> {
        let nd = self.degree.local_dofs();
        let nq = table.rule.points.len();
        let mut out = vec![0.0; self.mesh.triangles.len() * nq];
        let shapes = match self.degree {
            FeDegree::Linear => &table.shapes_p1,
            FeDegree::Quadratic => &table.shapes_p2,
        };
        for t in 0..self.mesh.triangles.len() {
            let dofs = self.mesh.dofs(t, self.degree);
            let mut c = [0.0; 6];
            for k in 0..nd {
                c[k] = self.coeffs[dofs[k]];
            }
            for q in 0..nq {
                let s = &shapes[q];
                out[t * nq + q] = (0..nd).map(|k| s[k] * c[k]).sum();
            }
        }
        out
    }
}

/// A triangle rule mapped over a whole mesh, with cached shape values.
#[derive(Debug, Clone)]
pub struct RuleTable {
    pub rule: QuadRule2D,
    /// Physical points, triangle-major.
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    shapes_p1: Vec<[f64; 6]>,
    shapes_p2: Vec<[f64; 6]>,
}

impl RuleTable {
    pub fn new(mesh: &TriMesh, degree: usize) -> Self {
        let rule = triangle_rule(degree);
        let mut points = Vec::with_capacity(mesh.triangles.len() * rule.points.len());
        let mut weights = Vec::with_capacity(points.capacity());
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangles[t].map(|i| mesh.nodes[i]);
            for (p, w) in crate::quadrature::map_rule(&rule, a, b, c) {
                points.push(p);
                weights.push(w);
            }
        }
        let mk = |deg| {
            rule.points
                .iter()
                .map(|&(xi, eta)| {
                    let mut s = [0.0; 6];
                    shape_values(deg, [1.0 - xi - eta, xi, eta], &mut s);
                    s
                })
                .collect()
        };
        let shapes_p1 = mk(FeDegree::Linear);
        let shapes_p2 = mk(FeDegree::Quadratic);
        RuleTable { rule, points, weights, shapes_p1, shapes_p2 }
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// ∫_K f over the mesh with a rule exact to `degree` per triangle.
pub fn polygon_integral(f: impl Fn(Point2) -> f64, mesh: &TriMesh, degree: usize) -> f64 {
    let rule = triangle_rule(degree);
    let mut sum = 0.0;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangles[t].map(|i| mesh.nodes[i]);
        let mut local = 0.0;
        for (p, w) in crate::quadrature::map_rule(&rule, a, b, c) {
            local += w * f(p);
        }
        sum += local;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_polygon;

    fn square() -> Polygon {
        build_polygon(&[Point2::new(0., 0.), Point2::new(1., 0.), Point2::new(1., 1.), Point2::new(0., 1.)]).unwrap()
    }

    #[test]
    fn square_mesh_tags() {
        let m = triangulate(&square(), 0.5).unwrap();
        assert!(m.triangles.len() >= 8);
        assert!(m.max_edge() <= 0.5);
        for e in 0..4 {
            assert!(m.tags.iter().any(|t| matches!(t, NodeTag::Edge { edge, .. } if *edge == e)));
        }
        assert_eq!(m.tags.iter().filter(|t| matches!(t, NodeTag::Corner(_))).count(), 4);
    }

    #[test]
    fn coarse_triangle() {
        let p = build_polygon(&[Point2::new(0., 0.), Point2::new(1., 0.), Point2::new(0., 1.)]).unwrap();
        let m = triangulate(&p, 100.0).unwrap();
        assert!(!m.triangles.is_empty() && m.triangles.len() <= 4);
    }

    #[test]
    fn constant_and_linear_are_exact() {
        let p = square();
        let mesh = Arc::new(triangulate(&p, 0.2).unwrap());
        let solver = PoissonSolver::new(mesh, FeDegree::Quadratic, CornerRule::Average).unwrap();
        let one = solver.solve(Source::Zero, BoundaryData::uniform(4, 1.0)).unwrap();
        assert!(one.coeffs.iter().all(|c| (c - 1.0).abs() < 1e-12));
        let lin = solver.solve(Source::Zero, BoundaryData::from_fn(&p, Arc::new(|q: Point2| q.x))).unwrap();
        let (v, g) = lin.field_eval(Point2::new(0.3, 0.7)).unwrap();
        assert!((v - 0.3).abs() < 1e-12 && (g.x - 1.0).abs() < 1e-10 && g.y.abs() < 1e-10);
    }

    #[test]
    fn csr_sums_duplicates() {
        let a = Csr::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (1, 1, 4.0)]);
        let mut y = [0.0; 2];
        a.mul(&[1.0, 1.0], &mut y);
        assert_eq!(y, [3.0, 5.0]);
    }
}
