//! Canonical bases of the Poisson-based H(div) spaces on a polygon.
//!
//! Every basis function is a finite sum Σ (c + p·x) u over scalar Poisson
//! solutions u, where c is a constant vector and x the position vector. On the
//! boundary each u equals its Dirichlet data exactly, so normal traces are
//! evaluated from that data rather than from the finite element interpolant.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::Config;
use crate::geometry::{validate_shape, GeometryError, Point2, Polygon, ShapeDiagnostics, TOL_AXIS};
use crate::poisson::{BoundaryData, CornerRule, EdgeData, FeDegree, PoissonError, PoissonSolver, ScalarField, Source, TriMesh};
use crate::polyfam::{internal_count, BoundaryConstructor, HullFrame, PolyKind};

/// Dirichlet constant used for the normal-offset problems.
pub const OFFSET_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceFamily {
    /// k+3 functions per edge, including two whose duals degenerate.
    Classical,
    /// k+1 functions per edge; offset problems use 2·1_f on their own edge.
    ReducedLagrangeBC,
    /// k+1 functions per edge; one offset problem with u ≡ 2 on the whole boundary.
    ReducedNatural,
}

impl SpaceFamily {
    pub fn per_edge(self, k: usize) -> usize {
        match self {
            SpaceFamily::Classical => k + 3,
            _ => k + 1,
        }
    }
    pub fn is_reduced(self) -> bool {
        self != SpaceFamily::Classical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HdivSpaceKind {
    pub family: SpaceFamily,
    pub k: usize,
    /// Boundary data family g of the position-vector problems.
    pub bcons: BoundaryConstructor,
    /// Source family h of the Poisson problems.
    pub icons: PolyKind,
}

impl HdivSpaceKind {
    pub fn new(family: SpaceFamily, k: usize) -> Self {
        HdivSpaceKind { family, k, bcons: BoundaryConstructor::Lagrange, icons: PolyKind::Hermite }
    }

    pub fn dimension(&self, n: usize) -> usize {
        n * self.family.per_edge(self.k) + internal_count(self.k)
    }
}

/// Vector coefficient c + p·x multiplying a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Coef {
    pub c: Point2,
    pub p: f64,
}

impl Coef {
    pub fn constant(c: Point2) -> Self {
        Coef { c, p: 0.0 }
    }
    pub fn position() -> Self {
        Coef { c: Point2::default(), p: 1.0 }
    }
    pub fn at(&self, x: Point2) -> Point2 {
        self.c + x * self.p
    }
    fn scaled(&self, w: f64) -> Self {
        Coef { c: self.c * w, p: self.p * w }
    }
    fn is_zero(&self) -> bool {
        self.c.x == 0.0 && self.c.y == 0.0 && self.p == 0.0
    }
}

/// Shared scalar solutions of one basis, all on one mesh.
#[derive(Debug)]
pub struct ScalarPool {
    pub polygon: Polygon,
    pub mesh: Arc<TriMesh>,
    pub fields: Vec<ScalarField>,
    pub labels: Vec<String>,
}

#[derive(Debug, Error)]
pub enum FieldError {
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone)]
pub struct VectorField {
    pub pool: Arc<ScalarPool>,
    /// Scalar index → coefficient, sorted for deterministic evaluation.
    pub terms: BTreeMap<usize, Coef>,
    pub label: String,
}

impl VectorField {
    pub fn single(pool: Arc<ScalarPool>, scalar: usize, coef: Coef, label: impl Into<String>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(scalar, coef);
        VectorField { pool, terms, label: label.into() }
    }

    pub fn plus(mut self, scalar: usize, coef: Coef) -> Self {
        let e = self.terms.entry(scalar).or_default();
        *e = Coef { c: e.c + coef.c, p: e.p + coef.p };
        self
    }

    /// Σ w_m f_m; all fields must share one pool.
    pub fn combine(fields: &[&VectorField], weights: &[f64], label: impl Into<String>) -> Self {
        let pool = fields[0].pool.clone();
        let mut terms: BTreeMap<usize, Coef> = BTreeMap::new();
        for (f, &w) in fields.iter().zip(weights) {
            debug_assert!(Arc::ptr_eq(&f.pool, &pool));
            if w == 0.0 {
                continue;
            }
            for (&s, c) in &f.terms {
                let e = terms.entry(s).or_default();
                let add = c.scaled(w);
                *e = Coef { c: e.c + add.c, p: e.p + add.p };
            }
        }
        terms.retain(|_, c| !c.is_zero());
        VectorField { pool, terms, label: label.into() }
    }

    /// Value inside the polygon.
    pub fn value(&self, x: Point2) -> Result<Point2, FieldError> {
        let (t, l) = self.pool.mesh.locate(x)?;
        Ok(self.value_in(t, l, x))
    }

    /// Value at barycentric coordinates `l` of mesh triangle `t`, whose image is `x`.
    pub fn value_in(&self, t: usize, l: [f64; 3], x: Point2) -> Point2 {
        let mut v = Point2::default();
        for (&s, c) in &self.terms {
            let (u, _) = self.pool.fields[s].eval_in(t, l);
            v = v + c.at(x) * u;
        }
        v
    }

    /// Value at mesh node `node` (vertex or midside) from nodal coefficients.
    pub fn value_at_node(&self, node: usize) -> Point2 {
        let x = self.pool.mesh.nodes[node];
        let mut v = Point2::default();
        for (&s, c) in &self.terms {
            v = v + c.at(x) * self.pool.fields[s].coeffs[node];
        }
        v
    }

    /// Exact boundary value at arc parameter `s` of edge `edge`.
    pub fn trace_value(&self, edge: usize, s: f64) -> Point2 {
        let x = self.pool.polygon.edges[edge].at(s);
        let mut v = Point2::default();
        for (&sc, c) in &self.terms {
            v = v + c.at(x) * self.pool.fields[sc].trace(edge, s);
        }
        v
    }
}

/// Σ coefficient(pt)·scalar(pt).
pub fn field_value(v: &VectorField, pt: Point2) -> Result<Point2, FieldError> {
    v.value(pt)
}

/// q·n at arc parameter `s` of edge `edge`, from the exact boundary data.
pub fn normal_trace(v: &VectorField, edge: usize, s: f64) -> Result<f64, FieldError> {
    let e = &v.pool.polygon.edges[edge];
    crate::geometry::edge_point(e, s)?;
    Ok(v.trace_value(edge, s.clamp(0.0, e.length)).dot(e.normal))
}

/// What a canonical function was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    /// x f_{i,j} + n_i g_i.
    Normal { edge: usize, j: usize },
    /// x f − e3 g (x-directed misc function).
    MiscX { edge: usize },
    /// x f − e4 g (y-directed misc function).
    MiscY { edge: usize },
    /// x u with Δu = h_{l,k−1}.
    InternalF { l: usize },
    /// x u with Δu = h_{k−1,l}.
    InternalG { l: usize },
    /// (1,0) u with Δu = h_{l,m}.
    InternalHx { l: usize, m: usize },
    /// (0,1) u with Δu = h_{l,m}.
    InternalHy { l: usize, m: usize },
}

impl Role {
    pub fn edge(&self) -> Option<usize> {
        match *self {
            Role::Normal { edge, .. } | Role::MiscX { edge } | Role::MiscY { edge } => Some(edge),
            _ => None,
        }
    }
    pub fn is_internal(&self) -> bool {
        self.edge().is_none()
    }
}

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("shape is not admissible: {0:?}")]
    ShapeViolation(ShapeDiagnostics),
    #[error(transparent)]
    Mesh(#[from] PoissonError),
}

#[derive(Debug, Clone)]
pub struct CanonicalBasis {
    pub spec: HdivSpaceKind,
    pub pool: Arc<ScalarPool>,
    /// Per edge: the k+1 main functions, then (classical only) misc x and misc y.
    pub normal: Vec<Vec<VectorField>>,
    /// F, then G, then H^x, then H^y.
    pub internal: Vec<VectorField>,
    pub roles: Vec<Role>,
    /// Self-calibrated boundary tolerance.
    pub tau_bc: f64,
}

impl CanonicalBasis {
    pub fn polygon(&self) -> &Polygon {
        &self.pool.polygon
    }

    /// All functions in canonical order: edges, then internal.
    pub fn functions(&self) -> Vec<&VectorField> {
        self.normal.iter().flatten().chain(&self.internal).collect()
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }
}

/// The two misc offset vectors of an edge with normal n. Axis-parallel edges,
/// where the closed forms divide by zero, fall back to the coordinate axes.
pub fn misc_vectors(n: Point2) -> (Point2, Point2) {
    let e3 = if n.x.abs() < TOL_AXIS { Point2::new(1.0, 0.0) } else { Point2::new(n.x + n.y * n.y / n.x, 0.0) };
    let e4 = if n.y.abs() < TOL_AXIS { Point2::new(0.0, 1.0) } else { Point2::new(0.0, n.y + n.x * n.x / n.y) };
    (e3, e4)
}

/// Builds the canonical basis after checking the shape rules.
pub fn canonical_basis(p: &Polygon, spec: HdivSpaceKind, mesh: Arc<TriMesh>) -> Result<CanonicalBasis, BasisError> {
    // The direction rule only concerns particular DOF sets, so check with a II-family config.
    let diag = validate_shape(p, Config::IIa, Point2::new(1.0, 1.0));
    if !diag.admissible() {
        return Err(BasisError::ShapeViolation(diag));
    }
    canonical_basis_unchecked(p, spec, mesh)
}

/// Builds the canonical basis without the shape rules, for failing-case studies.
pub fn canonical_basis_unchecked(p: &Polygon, spec: HdivSpaceKind, mesh: Arc<TriMesh>) -> Result<CanonicalBasis, BasisError> {
    let k = spec.k;
    let n = p.n();
    let hull = HullFrame::of(p);
    let inner = |i: usize, j: usize| Source::Inner { kind: spec.icons, i, j, hull };
    let main_source = if k == 0 { Source::Zero } else { inner(k - 1, k - 1) };

    let mut problems: Vec<(Source, BoundaryData)> = Vec::new();
    let mut labels = Vec::new();
    // Per edge: k+1 position problems f_{i,j}, then the offset problem g_i.
    let mut f_index = vec![vec![0usize; k + 1]; n];
    let mut g_index = vec![0usize; n];
    for i in 0..n {
        let len = p.edges[i].length;
        for j in 0..=k {
            f_index[i][j] = problems.len();
            problems.push((main_source.clone(), BoundaryData::on_edge(n, i, EdgeData::Trace(spec.bcons.trace(j, k, len)))));
            labels.push(format!("f[{i},{j}]"));
        }
        if spec.family != SpaceFamily::ReducedNatural {
            g_index[i] = problems.len();
            problems.push((Source::Zero, BoundaryData::on_edge(n, i, EdgeData::Constant(OFFSET_CONSTANT))));
            labels.push(format!("g[{i}]"));
        }
    }
    if spec.family == SpaceFamily::ReducedNatural {
        let g = problems.len();
        problems.push((Source::Zero, BoundaryData::uniform(n, OFFSET_CONSTANT)));
        labels.push("g".into());
        g_index.iter_mut().for_each(|v| *v = g);
    }
    let mut internal_specs: Vec<(Role, usize)> = Vec::new();
    if k > 0 {
        let mut push = |src: Source, label: String| {
            problems.push((src, BoundaryData::zero(n)));
            labels.push(label);
            problems.len() - 1
        };
        for l in 0..k - 1 {
            let s = push(inner(l, k - 1), format!("uF[{l}]"));
            internal_specs.push((Role::InternalF { l }, s));
        }
        for l in 0..k {
            let s = push(inner(k - 1, l), format!("uG[{l}]"));
            internal_specs.push((Role::InternalG { l }, s));
        }
        let mut h = vec![vec![0usize; k]; k];
        for l in 0..k {
            for m in 0..k {
                h[l][m] = push(inner(l, m), format!("uH[{l},{m}]"));
            }
        }
        for l in 0..k {
            for m in 0..k {
                internal_specs.push((Role::InternalHx { l, m }, h[l][m]));
            }
        }
        for l in 0..k {
            for m in 0..k {
                internal_specs.push((Role::InternalHy { l, m }, h[l][m]));
            }
        }
    }

    let solver = PoissonSolver::new(mesh.clone(), FeDegree::Quadratic, CornerRule::Average)?;
    let fields = solver.solve_many(problems)?;
    let pool = Arc::new(ScalarPool { polygon: p.clone(), mesh, fields, labels });

    let mut normal = Vec::with_capacity(n);
    let mut roles = Vec::new();
    for i in 0..n {
        let nv = p.edges[i].normal;
        let mut group = Vec::with_capacity(spec.family.per_edge(k));
        for j in 0..=k {
            let f = VectorField::single(pool.clone(), f_index[i][j], Coef::position(), format!("N[{i},{j}]"))
                .plus(g_index[i], Coef::constant(nv));
            group.push(f);
            roles.push(Role::Normal { edge: i, j });
        }
        if spec.family == SpaceFamily::Classical {
            let (e3, e4) = misc_vectors(nv);
            let jy = k.max(1) - 1;
            group.push(
                VectorField::single(pool.clone(), f_index[i][0], Coef::position(), format!("MX[{i}]")).plus(g_index[i], Coef::constant(-e3)),
            );
            roles.push(Role::MiscX { edge: i });
            group.push(
                VectorField::single(pool.clone(), f_index[i][jy], Coef::position(), format!("MY[{i}]"))
                    .plus(g_index[i], Coef::constant(-e4)),
            );
            roles.push(Role::MiscY { edge: i });
        }
        normal.push(group);
    }
    let mut internal = Vec::new();
    for (role, s) in internal_specs {
        let (coef, label) = match role {
            Role::InternalF { l } => (Coef::position(), format!("F[{l}]")),
            Role::InternalG { l } => (Coef::position(), format!("G[{l}]")),
            Role::InternalHx { l, m } => (Coef::constant(Point2::new(1.0, 0.0)), format!("Hx[{l},{m}]")),
            Role::InternalHy { l, m } => (Coef::constant(Point2::new(0.0, 1.0)), format!("Hy[{l},{m}]")),
            _ => unreachable!(),
        };
        internal.push(VectorField::single(pool.clone(), s, coef, label));
        roles.push(role);
    }
    let tau_bc = boundary_tolerance(&pool);
    Ok(CanonicalBasis { spec, pool, normal, internal, roles, tau_bc })
}

/// Samples per edge used by boundary checks, placed away from the corners.
pub const EDGE_SAMPLES: usize = 20;

/// Arc parameters of the boundary samples of an edge of length `len`.
pub fn edge_samples(len: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |q| len * (0.05 + 0.9 * (q as f64 + 0.5) / count as f64))
}

/// 10× the largest deviation between a finite element solution and its
/// Dirichlet data along the boundary, floored at 1e-8.
///
/// Samples inside a mesh element that touches a corner are skipped: the data
/// may jump there and no continuous solution can follow it.
pub fn boundary_tolerance(pool: &ScalarPool) -> f64 {
    let margin = 1.01 * pool.mesh.max_edge();
    let mut dev: f64 = 0.0;
    for u in &pool.fields {
        if u.bc.is_zero() {
            continue;
        }
        for (e, edge) in pool.polygon.edges.iter().enumerate() {
            for s in edge_samples(edge.length, EDGE_SAMPLES).filter(|&s| s > margin && s < edge.length - margin) {
                let x = edge.at(s);
                if let Ok((v, _)) = u.field_eval(x) {
                    dev = dev.max((v - u.trace(e, s)).abs());
                }
            }
        }
    }
    (10.0 * dev).max(1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use crate::poisson::triangulate;

    #[test]
    fn misc_fallback_on_axis_edges() {
        let (e3, e4) = misc_vectors(Point2::new(0.0, -1.0));
        assert_eq!(e3, Point2::new(1.0, 0.0));
        assert_eq!(e4, Point2::new(0.0, -1.0));
    }

    #[test]
    fn counts_match_dimension() {
        let p = lookup("fig151").unwrap().polygon();
        let mesh = Arc::new(triangulate(&p, p.diameter / 8.0).unwrap());
        for family in [SpaceFamily::Classical, SpaceFamily::ReducedLagrangeBC, SpaceFamily::ReducedNatural] {
            for k in 0..3 {
                let spec = HdivSpaceKind::new(family, k);
                let b = canonical_basis(&p, spec, mesh.clone()).unwrap();
                assert_eq!(b.len(), spec.dimension(3));
                assert_eq!(b.internal.len(), internal_count(k));
            }
        }
    }
}
