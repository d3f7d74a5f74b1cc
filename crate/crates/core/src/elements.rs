//! Degree-of-freedom sets, transfer matrices and basis tuning.
//!
//! A DOF set is laid out edge by edge in counter-clockwise order. Within an
//! edge the order is core moments (ascending projector degree), the misc DOF,
//! then the two supplementary DOFs (x before y). Internal moments come last.
//! This layout matches the canonical basis ordering, so Λ has diagonal blocks.

use nalgebra::DMatrix;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{validate_shape, Point2, Polygon, ShapeDiagnostics};
use crate::hdiv_basis::{CanonicalBasis, HdivSpaceKind, Role, ScalarPool, SpaceFamily, VectorField};
use crate::poisson::{NodeTag, RuleTable};
use crate::polyfam::{boundary_projector, inner_table, HullFrame, PolyKind};
use crate::quadrature::gauss_legendre;

/// The six element configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Config {
    Ia,
    Ib,
    IbShifted,
    IIa,
    IIb,
    IIbShifted,
}

impl Config {
    pub const ALL: [Config; 6] = [Config::Ia, Config::Ib, Config::IbShifted, Config::IIa, Config::IIb, Config::IIbShifted];
    /// The four unshifted configurations.
    pub const BASE: [Config; 4] = [Config::Ia, Config::Ib, Config::IIa, Config::IIb];

    /// Whether the misc DOF uses the direction vector v.
    pub fn uses_direction(self) -> bool {
        matches!(self, Config::Ia | Config::Ib | Config::IbShifted)
    }

    pub fn name(self) -> &'static str {
        match self {
            Config::Ia => "Ia",
            Config::Ib => "Ib",
            Config::IbShifted => "IbShifted",
            Config::IIa => "IIa",
            Config::IIb => "IIb",
            Config::IIbShifted => "IIbShifted",
        }
    }

    pub fn parse(s: &str) -> Option<Config> {
        Config::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Component {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Weight {
    One,
    /// The coordinate matching the component (x for X, y for Y).
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InternalComponent {
    X,
    Y,
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DofKind {
    /// ∫ p_degree(s) q·n ds.
    CoreNormalMoment { edge: usize, degree: usize },
    /// ∫ s q·v ds.
    MiscDirectionMoment { edge: usize, v: Point2 },
    /// ∫ q·n ds.
    MiscNormalMoment { edge: usize },
    /// q(mid)·n, minus 1 when shifted.
    MiscPointValue { edge: usize, shifted: bool },
    /// ∫ w q_c n_c ds.
    SupplementaryComponentMoment { edge: usize, component: Component, weight: Weight },
    /// q_c(mid) n_c, minus 1 when shifted.
    SupplementaryComponentPoint { edge: usize, component: Component, shifted: bool },
    /// X: ∫ q_{l,m} q_x; Y: ∫ q_{m,l} q_y; Coupled: ∫ q_{l,m} q_x + q_{m,l} q_y.
    InternalMoment { l: usize, m: usize, component: InternalComponent },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dof {
    pub kind: DofKind,
    pub bproj: PolyKind,
    pub iproj: PolyKind,
}

impl Dof {
    pub fn edge(&self) -> Option<usize> {
        match self.kind {
            DofKind::CoreNormalMoment { edge, .. }
            | DofKind::MiscDirectionMoment { edge, .. }
            | DofKind::MiscNormalMoment { edge }
            | DofKind::MiscPointValue { edge, .. }
            | DofKind::SupplementaryComponentMoment { edge, .. }
            | DofKind::SupplementaryComponentPoint { edge, .. } => Some(edge),
            DofKind::InternalMoment { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        let c = |c: Component| if c == Component::X { "x" } else { "y" };
        match self.kind {
            DofKind::CoreNormalMoment { edge, degree } => format!("core[{edge},{degree}]"),
            DofKind::MiscDirectionMoment { edge, .. } => format!("misc_dir[{edge}]"),
            DofKind::MiscNormalMoment { edge } => format!("misc_int[{edge}]"),
            DofKind::MiscPointValue { edge, shifted } => format!("misc_pt{}[{edge}]", if shifted { "_shift" } else { "" }),
            DofKind::SupplementaryComponentMoment { edge, component, weight } => {
                format!("supp_{}{}[{edge}]", c(component), if weight == Weight::One { "" } else { "_w" })
            }
            DofKind::SupplementaryComponentPoint { edge, component, shifted } => {
                format!("supp_pt_{}{}[{edge}]", c(component), if shifted { "_shift" } else { "" })
            }
            DofKind::InternalMoment { l, m, component } => match component {
                InternalComponent::X => format!("int_x[{l},{m}]"),
                InternalComponent::Y => format!("int_y[{l},{m}]"),
                InternalComponent::Coupled => format!("int_xy[{l},{m}]"),
            },
        }
    }

    /// Whether the functional is affine (a constant is subtracted).
    pub fn is_shifted(&self) -> bool {
        matches!(
            self.kind,
            DofKind::MiscPointValue { shifted: true, .. } | DofKind::SupplementaryComponentPoint { shifted: true, .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElementConfig {
    pub config: Config,
    pub space: HdivSpaceKind,
    /// Direction of the I-family misc moment.
    pub v: Point2,
    pub bproj: PolyKind,
    pub iproj: PolyKind,
}

impl ElementConfig {
    pub fn new(config: Config, space: HdivSpaceKind) -> Self {
        ElementConfig { config, space, v: Point2::new(1.0, 1.0), bproj: PolyKind::Hermite, iproj: PolyKind::Hermite }
    }
}

#[derive(Debug, Error)]
pub enum ElementError {
    #[error("shape is not admissible for this element: {0:?}")]
    ShapeViolation(ShapeDiagnostics),
    #[error("DOF count {dofs} differs from basis size {functions}")]
    CountMismatch { dofs: usize, functions: usize },
    #[error("transfer matrix is numerically singular (cond {0:e})")]
    SingularTransfer(f64),
}

/// DOF list after checking the shape rules for the configuration.
pub fn dof_set(p: &Polygon, cfg: &ElementConfig) -> Result<Vec<Dof>, ElementError> {
    let diag = validate_shape(p, cfg.config, cfg.v);
    if !diag.admissible() {
        return Err(ElementError::ShapeViolation(diag));
    }
    let d = dof_set_unchecked(p, cfg);
    let expect = cfg.space.dimension(p.n());
    if d.len() != expect {
        return Err(ElementError::CountMismatch { dofs: d.len(), functions: expect });
    }
    Ok(d)
}

/// DOF list without the shape rules, for failing-case studies.
pub fn dof_set_unchecked(p: &Polygon, cfg: &ElementConfig) -> Vec<Dof> {
    let k = cfg.space.k;
    let classical = cfg.space.family == SpaceFamily::Classical;
    let mk = |kind| Dof { kind, bproj: cfg.bproj, iproj: cfg.iproj };
    let mut out = Vec::new();
    for edge in 0..p.n() {
        for degree in 1..=k {
            out.push(mk(DofKind::CoreNormalMoment { edge, degree }));
        }
        out.push(mk(match cfg.config {
            Config::Ia | Config::Ib | Config::IbShifted => DofKind::MiscDirectionMoment { edge, v: cfg.v },
            Config::IIa => DofKind::MiscNormalMoment { edge },
            Config::IIb => DofKind::MiscPointValue { edge, shifted: false },
            Config::IIbShifted => DofKind::MiscPointValue { edge, shifted: true },
        }));
        if classical {
            for component in [Component::X, Component::Y] {
                out.push(mk(match cfg.config {
                    Config::Ia => DofKind::SupplementaryComponentMoment { edge, component, weight: Weight::One },
                    Config::Ib => DofKind::SupplementaryComponentPoint { edge, component, shifted: false },
                    Config::IbShifted => DofKind::SupplementaryComponentPoint { edge, component, shifted: true },
                    _ => DofKind::SupplementaryComponentMoment { edge, component, weight: Weight::Coordinate },
                }));
            }
        }
    }
    if k > 0 {
        for component in [InternalComponent::X, InternalComponent::Y] {
            for l in 0..=k {
                for m in 0..k {
                    if (l, m) != (k, k - 1) {
                        out.push(mk(DofKind::InternalMoment { l, m, component }));
                    }
                }
            }
        }
        out.push(mk(DofKind::InternalMoment { l: k, m: k - 1, component: InternalComponent::Coupled }));
    }
    out
}

/// Gauss points used for edge moments at order k.
pub fn edge_points(k: usize) -> usize {
    k + 3
}

/// Interior rule degree at order k.
pub fn interior_degree(k: usize) -> usize {
    2 * k + 4
}

fn edge_value(d: &Dof, q: &VectorField, k: usize) -> f64 {
    let p = &q.pool.polygon;
    let edge = d.edge().expect("edge DOF");
    let e = &p.edges[edge];
    let n = e.normal;
    let integral = |f: &dyn Fn(f64, Point2) -> f64| {
        let rule = gauss_legendre(edge_points(k));
        let h = 0.5 * e.length;
        rule.nodes.iter().zip(&rule.weights).map(|(&z, &w)| {
            let s = h * (1.0 + z);
            w * h * f(s, q.trace_value(edge, s))
        })
        .sum::<f64>()
    };
    let comp = |c: Component, v: Point2| match c {
        Component::X => v.x * n.x,
        Component::Y => v.y * n.y,
    };
    let mid = || q.trace_value(edge, 0.5 * e.length);
    let shift = |s: bool| if s { 1.0 } else { 0.0 };
    match d.kind {
        DofKind::CoreNormalMoment { degree, .. } => integral(&|s, v| boundary_projector(d.bproj, degree, s, e.length) * v.dot(n)),
        DofKind::MiscDirectionMoment { v: dir, .. } => integral(&|s, v| s * v.dot(dir)),
        DofKind::MiscNormalMoment { .. } => integral(&|_, v| v.dot(n)),
        DofKind::MiscPointValue { shifted, .. } => mid().dot(n) - shift(shifted),
        DofKind::SupplementaryComponentMoment { component, weight, .. } => integral(&|s, v| {
            let w = match (weight, component) {
                (Weight::One, _) => 1.0,
                (Weight::Coordinate, Component::X) => e.at(s).x,
                (Weight::Coordinate, Component::Y) => e.at(s).y,
            };
            w * comp(component, v)
        }),
        DofKind::SupplementaryComponentPoint { component, shifted, .. } => comp(component, mid()) - shift(shifted),
        DofKind::InternalMoment { .. } => unreachable!(),
    }
}

/// Index of q_{a,b} in a moment table row of order k.
fn poly_index(k: usize, a: usize, b: usize) -> usize {
    a * (k + 1) + b
}

/// Interior moments ∫ q_{a,b} w u for every pool scalar u, a, b ≤ k, w ∈ {1, x, y}.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub k: usize,
    pub iproj: PolyKind,
    /// [scalar][poly_index][weight]
    pub moments: Vec<Vec<[f64; 3]>>,
}

impl MomentTable {
    pub fn new(pool: &ScalarPool, k: usize, iproj: PolyKind) -> Self {
        let table = RuleTable::new(&pool.mesh, interior_degree(k));
        let hull = HullFrame::of(&pool.polygon);
        let np = (k + 1) * (k + 1);
        let one = |u: &crate::poisson::ScalarField| {
            let vals = u.values_on_rule(&table);
            let mut acc = vec![[0.0; 3]; np];
            let mut polys = vec![0.0; np];
            for ((x, w), uv) in table.points.iter().zip(&table.weights).zip(&vals) {
                inner_table(iproj, k, *x, hull, &mut polys);
                let f = w * uv;
                for (a, &pv) in acc.iter_mut().zip(&polys) {
                    let g = f * pv;
                    a[0] += g;
                    a[1] += g * x.x;
                    a[2] += g * x.y;
                }
            }
            acc
        };
        #[cfg(feature = "parallel")]
        let moments = pool.fields.par_iter().map(one).collect();
        #[cfg(not(feature = "parallel"))]
        let moments = pool.fields.iter().map(one).collect();
        MomentTable { k, iproj, moments }
    }

    fn internal_value(&self, d: &Dof, q: &VectorField) -> f64 {
        let DofKind::InternalMoment { l, m, component } = d.kind else { unreachable!() };
        let k = self.k;
        let mut sum = 0.0;
        for (&s, c) in &q.terms {
            let row = &self.moments[s];
            let xpart = |a: usize, b: usize| {
                let mm = row[poly_index(k, a, b)];
                c.c.x * mm[0] + c.p * mm[1]
            };
            let ypart = |a: usize, b: usize| {
                let mm = row[poly_index(k, a, b)];
                c.c.y * mm[0] + c.p * mm[2]
            };
            sum += match component {
                InternalComponent::X => xpart(l, m),
                InternalComponent::Y => ypart(m, l),
                InternalComponent::Coupled => xpart(l, m) + ypart(m, l),
            };
        }
        sum
    }
}

/// σ(q) for one DOF. Internal moments are integrated directly over the mesh;
/// matrix assembly uses cached moments instead.
pub fn apply_dof(d: &Dof, q: &VectorField, k: usize) -> f64 {
    if let DofKind::InternalMoment { l, m, component } = d.kind {
        let pool = &q.pool;
        let hull = HullFrame::of(&pool.polygon);
        let table = RuleTable::new(&pool.mesh, interior_degree(k));
        let nq = table.rule.points.len();
        let mut sum = 0.0;
        for (i, (x, w)) in table.points.iter().zip(&table.weights).enumerate() {
            let (xi, eta) = table.rule.points[i % nq];
            let v = q.value_in(i / nq, [1.0 - xi - eta, xi, eta], *x);
            let px = crate::polyfam::inner_poly(d.iproj, l, m, *x, hull);
            let py = crate::polyfam::inner_poly(d.iproj, m, l, *x, hull);
            sum += w * match component {
                InternalComponent::X => px * v.x,
                InternalComponent::Y => py * v.y,
                InternalComponent::Coupled => px * v.x + py * v.y,
            };
        }
        sum
    } else {
        edge_value(d, q, k)
    }
}

#[derive(Debug, Clone)]
pub struct TransferMatrix {
    /// Λ_ij = σ_i(φ_j).
    pub lambda: DMatrix<f64>,
    pub dof_labels: Vec<String>,
    pub fn_labels: Vec<String>,
    pub dof_edges: Vec<Option<usize>>,
    pub fn_edges: Vec<Option<usize>>,
    pub cond2: f64,
}

impl TransferMatrix {
    pub fn from_matrix(lambda: DMatrix<f64>) -> Self {
        let n = lambda.nrows();
        TransferMatrix {
            cond2: condition_2norm(&lambda),
            dof_labels: (0..n).map(|i| format!("dof{i}")).collect(),
            fn_labels: (0..lambda.ncols()).map(|i| format!("fn{i}")).collect(),
            dof_edges: vec![None; n],
            fn_edges: vec![None; lambda.ncols()],
            lambda,
        }
    }

    /// Rows and columns of the internal DOFs against the internal functions.
    pub fn internal_block(&self) -> DMatrix<f64> {
        let rows: Vec<usize> = (0..self.dof_edges.len()).filter(|&i| self.dof_edges[i].is_none()).collect();
        let cols: Vec<usize> = (0..self.fn_edges.len()).filter(|&j| self.fn_edges[j].is_none()).collect();
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.lambda[(rows[a], cols[b])])
    }

    /// Rows of edge `row_edge` DOFs against columns of edge `col_edge` functions.
    pub fn edge_block(&self, row_edge: usize, col_edge: usize) -> DMatrix<f64> {
        let rows: Vec<usize> = (0..self.dof_edges.len()).filter(|&i| self.dof_edges[i] == Some(row_edge)).collect();
        let cols: Vec<usize> = (0..self.fn_edges.len()).filter(|&j| self.fn_edges[j] == Some(col_edge)).collect();
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.lambda[(rows[a], cols[b])])
    }

    /// CSV with a header row of function labels and a leading DOF label column.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dof");
        for l in &self.fn_labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for i in 0..self.lambda.nrows() {
            s.push_str(&self.dof_labels[i]);
            for j in 0..self.lambda.ncols() {
                s.push_str(&format!(",{:.17e}", self.lambda[(i, j)]));
            }
            s.push('\n');
        }
        s
    }
}

/// Λ for a DOF list against a canonical basis, assembled column-parallel.
pub fn assemble_transfer(dofs: &[Dof], basis: &CanonicalBasis) -> Result<TransferMatrix, ElementError> {
    let fns = basis.functions();
    if dofs.len() != fns.len() {
        return Err(ElementError::CountMismatch { dofs: dofs.len(), functions: fns.len() });
    }
    let k = basis.spec.k;
    let iproj = dofs.iter().find(|d| d.edge().is_none()).map(|d| d.iproj).unwrap_or(PolyKind::Hermite);
    let moments = if k > 0 { Some(MomentTable::new(&basis.pool, k, iproj)) } else { None };
    let column = |q: &&VectorField| -> Vec<f64> {
        dofs.iter()
            .map(|d| match d.kind {
                DofKind::InternalMoment { .. } => moments.as_ref().unwrap().internal_value(d, q),
                _ => edge_value(d, q, k),
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let cols: Vec<Vec<f64>> = fns.par_iter().map(column).collect();
    #[cfg(not(feature = "parallel"))]
    let cols: Vec<Vec<f64>> = fns.iter().map(column).collect();
    let n = dofs.len();
    let lambda = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
    Ok(TransferMatrix {
        cond2: condition_2norm(&lambda),
        dof_labels: dofs.iter().map(Dof::label).collect(),
        fn_labels: fns.iter().map(|f| f.label.clone()).collect(),
        dof_edges: dofs.iter().map(Dof::edge).collect(),
        fn_edges: basis.roles.iter().map(Role::edge).collect(),
        lambda,
    })
}

/// σ_max / σ_min from a full SVD; infinite when σ_min is zero, 1 when empty.
pub fn condition_2norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let a = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let sv = match a.singular_values() {
        Ok(sv) => sv,
        Err(_) => return f64::NAN,
    };
    let max = sv[0];
    let min = *sv.last().unwrap();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Default ceiling above which Λ is treated as singular.
pub const COND_CEILING: f64 = 1e14;

/// A = (Λ⁻¹)ᵀ with the duality residual ‖ΛAᵀ − I‖_max.
#[derive(Debug, Clone)]
pub struct Tuning {
    pub a: DMatrix<f64>,
    pub residual: f64,
    pub cond2: f64,
}

pub fn tune_matrix(lambda: &DMatrix<f64>, ceiling: f64) -> Result<Tuning, ElementError> {
    let cond2 = condition_2norm(lambda);
    if !(cond2 < ceiling) {
        return Err(ElementError::SingularTransfer(cond2));
    }
    let inv = lambda.clone().lu().try_inverse().ok_or(ElementError::SingularTransfer(cond2))?;
    let a = inv.transpose();
    let n = lambda.nrows();
    let r = lambda * a.transpose() - DMatrix::<f64>::identity(n, n);
    Ok(Tuning { a, residual: r.amax(), cond2 })
}

#[derive(Debug, Clone)]
pub struct TunedBasis {
    /// φ'_j = Σ_m A_jm φ_m.
    pub functions: Vec<VectorField>,
    /// Role of the canonical function sharing the index.
    pub origins: Vec<Role>,
    pub tuning: Tuning,
    pub tau_bc: f64,
}

pub fn tune_basis(t: &TransferMatrix, basis: &CanonicalBasis) -> Result<TunedBasis, ElementError> {
    let tuning = tune_matrix(&t.lambda, COND_CEILING)?;
    let fns = basis.functions();
    let n = fns.len();
    let build = |j: usize| {
        let w: Vec<f64> = (0..n).map(|m| tuning.a[(j, m)]).collect();
        VectorField::combine(&fns, &w, format!("tuned[{}]", t.dof_labels[j]))
    };
    #[cfg(feature = "parallel")]
    let functions = (0..n).into_par_iter().map(build).collect();
    #[cfg(not(feature = "parallel"))]
    let functions = (0..n).map(build).collect();
    Ok(TunedBasis { functions, origins: basis.roles.clone(), tuning, tau_bc: basis.tau_bc })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Normal,
    Degenerate,
    Internal,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegenerationReport {
    pub classes: Vec<Classification>,
    pub per_edge: Vec<usize>,
    pub normal_kept: usize,
    pub degenerated: usize,
    pub internal: usize,
    pub boundary_max: Vec<f64>,
    pub interior_max: Vec<f64>,
}

/// Largest |q·n| over boundary samples of every edge.
pub fn boundary_max(q: &VectorField) -> f64 {
    let p = &q.pool.polygon;
    let mut m: f64 = 0.0;
    for (i, e) in p.edges.iter().enumerate() {
        for s in crate::hdiv_basis::edge_samples(e.length, 50) {
            m = m.max(q.trace_value(i, s).dot(e.normal).abs());
        }
    }
    m
}

/// Largest |q| over interior mesh vertices.
pub fn interior_max(q: &VectorField) -> f64 {
    let mesh = &q.pool.mesh;
    (0..mesh.n_vertices).filter(|&v| mesh.tags[v] == NodeTag::Interior).map(|v| q.value_at_node(v).norm()).fold(0.0, f64::max)
}

/// Splits tuned functions of normal origin into kept and degenerated.
pub fn classify_degenerate(tb: &TunedBasis) -> DegenerationReport {
    let n_edges = tb.functions.first().map_or(0, |f| f.pool.polygon.n());
    let stats: Vec<(f64, f64)> = tb.functions.iter().map(|q| (boundary_max(q), interior_max(q))).collect();
    let mut per_edge = vec![0; n_edges];
    let mut classes = Vec::with_capacity(stats.len());
    for (role, &(b, i)) in tb.origins.iter().zip(&stats) {
        let c = match role.edge() {
            None => Classification::Internal,
            Some(e) => {
                if b < 100.0 * tb.tau_bc && i > 10.0 * tb.tau_bc {
                    per_edge[e] += 1;
                    Classification::Degenerate
                } else {
                    Classification::Normal
                }
            }
        };
        classes.push(c);
    }
    let count = |c| classes.iter().filter(|&&x| x == c).count();
    DegenerationReport {
        normal_kept: count(Classification::Normal),
        degenerated: count(Classification::Degenerate),
        internal: count(Classification::Internal),
        classes,
        per_edge,
        boundary_max: stats.iter().map(|s| s.0).collect(),
        interior_max: stats.iter().map(|s| s.1).collect(),
    }
}

/// The 6×6 single-edge example on the edge (x, 1−x), x ∈ [0, 1].
///
/// Rows: ∫ q_x n_x x, ∫ q_y n_y y, q(mid)·n, ∫ q·n x^r for r = 1, 2, 3.
/// Columns: (1,0), (0,1) and (x,y)·x^m for m = 0..3. Integrals run in dx.
pub fn worked_example_matrix() -> DMatrix<f64> {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let n = Point2::new(c, c);
    let pos = |x: f64| Point2::new(x, 1.0 - x);
    let field = |j: usize, x: f64| match j {
        0 => Point2::new(1.0, 0.0),
        1 => Point2::new(0.0, 1.0),
        m => pos(x) * x.powi(m as i32 - 2),
    };
    let rule = gauss_legendre(8);
    let int = |f: &dyn Fn(f64) -> f64| -> f64 {
        rule.nodes.iter().zip(&rule.weights).map(|(&z, &w)| 0.5 * w * f(0.5 * (1.0 + z))).sum()
    };
    DMatrix::from_fn(6, 6, |i, j| match i {
        0 => int(&|x| field(j, x).x * n.x * pos(x).x),
        1 => int(&|x| field(j, x).y * n.y * pos(x).y),
        2 => field(j, 0.5).dot(n),
        r => int(&|x| field(j, x).dot(n) * x.powi(r as i32 - 2)),
    })
}

/// The same matrix as printed, entry by entry.
pub fn worked_example_printed() -> DMatrix<f64> {
    let rows: [[f64; 6]; 6] = [
        [1. / 2., 0., 1. / 3., 1. / 4., 1. / 5., 1. / 6.],
        [0., 1. / 2., 1. / 3., 1. / 12., 1. / 30., 1. / 60.],
        [1., 1., 1., 1. / 2., 1. / 4., 1. / 8.],
        [1. / 2., 1. / 2., 1. / 2., 1. / 3., 1. / 4., 1. / 5.],
        [1. / 3., 1. / 3., 1. / 3., 1. / 4., 1. / 5., 1. / 6.],
        [1. / 4., 1. / 4., 1. / 4., 1. / 5., 1. / 6., 1. / 7.],
    ];
    DMatrix::from_fn(6, 6, |i, j| std::f64::consts::FRAC_1_SQRT_2 * rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cond_of_diagonals() {
        assert!((condition_2norm(&DMatrix::identity(4, 4)) - 1.0).abs() < 1e-14);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 10.0]));
        assert!((condition_2norm(&d) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn identity_tuning_is_identity() {
        let t = tune_matrix(&DMatrix::identity(5, 5), COND_CEILING).unwrap();
        assert_eq!(t.a, DMatrix::identity(5, 5));
        assert_eq!(t.residual, 0.0);
    }

    #[test]
    fn worked_example_entries() {
        let a = worked_example_matrix();
        let b = worked_example_printed();
        assert!((a - &b).amax() < 1e-12);
        let c = condition_2norm(&b);
        assert!((c / 17479.0 - 1.0).abs() < 0.01, "{c}");
    }
}
