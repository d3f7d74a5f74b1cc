//! Study orchestration behind the command-line tool: element builds, basis
//! exports, conditioning sweeps, shape validation and the Raviart–Thomas
//! comparison. Every function here returns data; file writing is explicit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{resolve, ShapeSourceError};
use crate::elements::{
    assemble_transfer, classify_degenerate, dof_set, dof_set_unchecked, tune_basis, tune_matrix, Config, DegenerationReport,
    ElementConfig, ElementError, TransferMatrix, TunedBasis, COND_CEILING,
};
use crate::geometry::{validate_shape, Point2, Polygon, ShapeDiagnostics};
use crate::hdiv_basis::{
    canonical_basis, canonical_basis_unchecked, edge_samples, BasisError, CanonicalBasis, HdivSpaceKind, SpaceFamily, VectorField,
};
use crate::poisson::{default_h, triangulate, NodeTag, PoissonError};
use crate::polyfam::{BoundaryConstructor, FamilyError, PolyKind};
use crate::rt_classical::{rt_basis, rt_dofs, PolyVec2, RtShape, RtVariant};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Shape(#[from] ShapeSourceError),
    #[error(transparent)]
    Mesh(#[from] PoissonError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid study: {0}")]
    Study(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The polynomial families of one element build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Families {
    pub bproj: PolyKind,
    pub iproj: PolyKind,
    pub bcons: BoundaryConstructor,
    pub icons: PolyKind,
}

impl Default for Families {
    fn default() -> Self {
        Families { bproj: PolyKind::Hermite, iproj: PolyKind::Hermite, bcons: BoundaryConstructor::Lagrange, icons: PolyKind::Hermite }
    }
}

impl Families {
    /// Families from their integer codes (projectors 1–7, boundary constructors 1–3, inner constructors 1–5).
    pub fn from_codes(bproj: u8, iproj: u8, bcons: u8, icons: u8) -> Result<Self, FamilyError> {
        Ok(Families {
            bproj: PolyKind::from_code(bproj)?,
            iproj: PolyKind::from_code(iproj)?,
            bcons: BoundaryConstructor::from_code(bcons)?,
            icons: PolyKind::from_constructor_code(icons)?,
        })
    }

    pub fn codes(&self) -> [u8; 4] {
        [self.bproj.code(), self.iproj.code(), self.bcons.code(), self.icons.constructor_code().unwrap_or(0)]
    }
}

/// Everything needed to build one element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementRequest {
    pub shape: String,
    pub space: SpaceFamily,
    pub config: Config,
    pub k: usize,
    pub families: Families,
    /// Mesh size; the default is taken from the polygon when absent.
    pub h: Option<f64>,
    /// Skip the shape rules, for failing-case studies.
    pub unchecked: bool,
}

impl ElementRequest {
    pub fn new(shape: &str, space: SpaceFamily, config: Config, k: usize) -> Self {
        ElementRequest { shape: shape.into(), space, config, k, families: Families::default(), h: None, unchecked: false }
    }

    pub fn spec(&self) -> HdivSpaceKind {
        HdivSpaceKind { family: self.space, k: self.k, bcons: self.families.bcons, icons: self.families.icons }
    }

    pub fn element_config(&self) -> ElementConfig {
        let mut c = ElementConfig::new(self.config, self.spec());
        c.bproj = self.families.bproj;
        c.iproj = self.families.iproj;
        c
    }
}

pub struct ElementRun {
    pub name: String,
    pub polygon: Polygon,
    pub basis: CanonicalBasis,
    pub transfer: TransferMatrix,
    pub tuned: Option<TunedBasis>,
    pub degeneration: Option<DegenerationReport>,
}

/// Builds the mesh, the canonical basis and the transfer matrix; tunes when possible.
pub fn build_element(req: &ElementRequest) -> Result<ElementRun, HarnessError> {
    let (name, polygon) = resolve(&req.shape)?;
    let h = req.h.unwrap_or_else(|| default_h(&polygon));
    let mesh = Arc::new(triangulate(&polygon, h)?);
    let basis = if req.unchecked {
        canonical_basis_unchecked(&polygon, req.spec(), mesh)?
    } else {
        canonical_basis(&polygon, req.spec(), mesh)?
    };
    build_on_basis(name, polygon, basis, req)
}

fn build_on_basis(name: String, polygon: Polygon, basis: CanonicalBasis, req: &ElementRequest) -> Result<ElementRun, HarnessError> {
    let cfg = req.element_config();
    let dofs = if req.unchecked { dof_set_unchecked(&polygon, &cfg) } else { dof_set(&polygon, &cfg)? };
    let transfer = assemble_transfer(&dofs, &basis)?;
    let tuned = tune_basis(&transfer, &basis).ok();
    let degeneration = tuned.as_ref().map(classify_degenerate);
    Ok(ElementRun { name, polygon, basis, transfer, tuned, degeneration })
}

#[derive(Debug, Clone, Serialize)]
pub struct ElementSummary {
    pub shape: String,
    pub space: SpaceFamily,
    pub config: Config,
    pub k: usize,
    pub family_codes: [u8; 4],
    pub mesh_triangles: usize,
    pub dimension: usize,
    pub normal_per_edge: usize,
    pub internal: usize,
    pub cond2: f64,
    pub cond2_truncated: Option<u64>,
    pub singular: bool,
    pub tau_bc: f64,
    pub duality_residual: Option<f64>,
    pub degenerate_per_edge: Option<Vec<usize>>,
    /// Per edge i: the largest |q·n| of edge-i canonical functions over the other edges.
    pub off_support_max: Vec<f64>,
}

/// Largest |q·n| of each edge's canonical functions on the other edges.
pub fn off_support_max(basis: &CanonicalBasis) -> Vec<f64> {
    let p = basis.polygon();
    basis
        .normal
        .iter()
        .enumerate()
        .map(|(i, group)| {
            let mut m: f64 = 0.0;
            for f in group {
                for (j, e) in p.edges.iter().enumerate() {
                    if j != i {
                        for s in edge_samples(e.length, 50) {
                            m = m.max(f.trace_value(j, s).dot(e.normal).abs());
                        }
                    }
                }
            }
            m
        })
        .collect()
}

pub fn summarize(run: &ElementRun, req: &ElementRequest) -> ElementSummary {
    let cond = run.transfer.cond2;
    ElementSummary {
        shape: run.name.clone(),
        space: req.space,
        config: req.config,
        k: req.k,
        family_codes: req.families.codes(),
        mesh_triangles: run.basis.pool.mesh.triangles.len(),
        dimension: run.basis.len(),
        normal_per_edge: req.space.per_edge(req.k),
        internal: run.basis.internal.len(),
        cond2: cond,
        cond2_truncated: cond.is_finite().then_some(cond as u64),
        singular: !(cond < COND_CEILING),
        tau_bc: run.basis.tau_bc,
        duality_residual: run.tuned.as_ref().map(|t| t.tuning.residual),
        degenerate_per_edge: run.degeneration.as_ref().map(|d| d.per_edge.clone()),
        off_support_max: off_support_max(&run.basis),
    }
}

/// Normal traces as rows `edge,s,value,function_id`.
pub fn traces_csv(functions: &[&VectorField], samples: usize) -> String {
    let mut s = String::from("edge,s,value,function_id\n");
    for f in functions {
        let p = &f.pool.polygon;
        for (j, e) in p.edges.iter().enumerate() {
            for t in edge_samples(e.length, samples) {
                let v = f.trace_value(j, t).dot(e.normal);
                let _ = writeln!(s, "{j},{t:.10e},{v:.10e},{}", f.label);
            }
        }
    }
    s
}

/// Interior values as rows `x,y,vx,vy,function_id` at up to `max_points` interior vertices.
pub fn interior_csv(functions: &[&VectorField], max_points: usize) -> String {
    let mut s = String::from("x,y,vx,vy,function_id\n");
    let Some(first) = functions.first() else { return s };
    let mesh = &first.pool.mesh;
    let nodes: Vec<usize> = (0..mesh.n_vertices).filter(|&v| mesh.tags[v] == NodeTag::Interior).collect();
    let stride = nodes.len().div_ceil(max_points.max(1)).max(1);
    for f in functions {
        for &v in nodes.iter().step_by(stride) {
            let x = mesh.nodes[v];
            let q = f.value_at_node(v);
            let _ = writeln!(s, "{:.10e},{:.10e},{:.10e},{:.10e},{}", x.x, x.y, q.x, q.y, f.label);
        }
    }
    s
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.into(), source })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| HarnessError::Io { path, source })
}

/// Builds one element and writes lambda.csv, traces.csv, interior.csv and summary.json.
pub fn cmd_element(req: &ElementRequest, out: &Path) -> Result<ElementSummary, HarnessError> {
    let run = build_element(req)?;
    let summary = summarize(&run, req);
    write_file(out, "lambda.csv", &run.transfer.to_csv())?;
    let fns: Vec<&VectorField> = match &run.tuned {
        Some(t) => t.functions.iter().collect(),
        None => run.basis.functions(),
    };
    write_file(out, "traces.csv", &traces_csv(&fns, 50))?;
    write_file(out, "interior.csv", &interior_csv(&fns, 400))?;
    write_file(out, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisSummary {
    pub shape: String,
    pub space: SpaceFamily,
    pub k: usize,
    pub functions: Vec<String>,
    pub tau_bc: f64,
    pub off_support_max: Vec<f64>,
}

/// Builds the canonical basis and writes traces.csv, interior.csv and summary.json.
pub fn cmd_basis(req: &ElementRequest, out: &Path) -> Result<BasisSummary, HarnessError> {
    let (name, polygon) = resolve(&req.shape)?;
    let h = req.h.unwrap_or_else(|| default_h(&polygon));
    let mesh = Arc::new(triangulate(&polygon, h)?);
    let basis = if req.unchecked {
        canonical_basis_unchecked(&polygon, req.spec(), mesh)?
    } else {
        canonical_basis(&polygon, req.spec(), mesh)?
    };
    let fns = basis.functions();
    write_file(out, "traces.csv", &traces_csv(&fns, 50))?;
    write_file(out, "interior.csv", &interior_csv(&fns, 400))?;
    let summary = BasisSummary {
        shape: name,
        space: req.space,
        k: req.k,
        functions: fns.iter().map(|f| f.label.clone()).collect(),
        tau_bc: basis.tau_bc,
        off_support_max: off_support_max(&basis),
    };
    write_file(out, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub shape: String,
    pub config: Config,
    pub admissible: bool,
    pub diagnostics: ShapeDiagnostics,
}

impl ValidationReport {
    pub fn render(&self) -> String {
        let mut s = format!("{} ({}): {}\n", self.shape, self.config.name(), if self.admissible { "pass" } else { "fail" });
        for f in &self.diagnostics.violations {
            let _ = writeln!(s, "  violation {:?} on edge {} ({:.3e})", f.rule, f.edge, f.value);
        }
        for f in &self.diagnostics.warnings {
            let _ = writeln!(s, "  warning {:?} on edge {} ({:.3e})", f.rule, f.edge, f.value);
        }
        s
    }
}

pub fn cmd_validate(shape: &str, config: Config, v: Point2) -> Result<ValidationReport, HarnessError> {
    let (name, p) = resolve(shape)?;
    let diagnostics = validate_shape(&p, config, v);
    Ok(ValidationReport { shape: name, config, admissible: diagnostics.admissible(), diagnostics })
}

/// Parameter grid of a conditioning study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub shapes: Vec<String>,
    pub orders: Vec<usize>,
    pub configs: Vec<Config>,
    #[serde(default = "default_spaces")]
    pub spaces: Vec<SpaceFamily>,
    /// Boundary projector codes 1–7.
    #[serde(default = "default_projectors")]
    pub bproj: Vec<u8>,
    /// Inner projector codes 1–7.
    #[serde(default = "default_projectors")]
    pub iproj: Vec<u8>,
    /// Boundary constructor codes 1–3.
    #[serde(default = "default_bcons")]
    pub bcons: Vec<u8>,
    /// Inner constructor codes 1–5.
    #[serde(default = "default_icons")]
    pub icons: Vec<u8>,
    pub h: Option<f64>,
    /// Shapes expected to fail validation; they are built unchecked.
    #[serde(default)]
    pub expect_fail: Vec<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub svg: bool,
}

fn default_spaces() -> Vec<SpaceFamily> {
    vec![SpaceFamily::Classical]
}
fn default_projectors() -> Vec<u8> {
    vec![PolyKind::Hermite.code()]
}
fn default_bcons() -> Vec<u8> {
    vec![1]
}
fn default_icons() -> Vec<u8> {
    vec![2]
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub shape: String,
    pub space: SpaceFamily,
    pub k: usize,
    pub config: Config,
    pub bproj: u8,
    pub iproj: u8,
    pub bcons: u8,
    pub icons: u8,
    pub cond2: f64,
    pub singular: bool,
    pub degenerated: Option<usize>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    /// Sorted ascending by cond2.
    pub rows: Vec<StudyRow>,
    /// Parameter tuples that could not be built, with the reason.
    pub failures: Vec<(String, String)>,
}

impl StudyResult {
    /// Deterministic CSV; wall times live in `timing_csv`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("shape,space,k,config,bproj,iproj,bcons,icons,cond2,cond2_truncated,singular,degenerated\n");
        for r in &self.rows {
            let trunc = if r.cond2.is_finite() { format!("{}", r.cond2 as u64) } else { "inf".into() };
            let deg = r.degenerated.map_or(String::from("NA"), |d| d.to_string());
            let _ = writeln!(
                s,
                "{},{:?},{},{},{},{},{},{},{:.10e},{},{},{}",
                r.shape,
                r.space,
                r.k,
                r.config.name(),
                r.bproj,
                r.iproj,
                r.bcons,
                r.icons,
                r.cond2,
                trunc,
                if r.singular { "SINGULAR" } else { "ok" },
                deg
            );
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("shape,space,k,config,bproj,iproj,bcons,icons,wall_ms\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:?},{},{},{},{},{},{},{:.3}",
                r.shape,
                r.space,
                r.k,
                r.config.name(),
                r.bproj,
                r.iproj,
                r.bcons,
                r.icons,
                r.wall_ms
            );
        }
        s
    }
}

/// Runs every parameter tuple of the study. Bases are shared across tuples
/// that differ only in configuration or projectors.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult, HarnessError> {
    if cfg.shapes.is_empty() || cfg.orders.is_empty() || cfg.configs.is_empty() || cfg.spaces.is_empty() {
        return Err(HarnessError::Study("shapes, orders, configs and spaces must be non-empty".into()));
    }
    let mut groups = Vec::new();
    for shape in &cfg.shapes {
        for &space in &cfg.spaces {
            for &k in &cfg.orders {
                for &bc in &cfg.bcons {
                    for &ic in &cfg.icons {
                        groups.push((shape.clone(), space, k, bc, ic));
                    }
                }
            }
        }
    }
    let run_group = |(shape, space, k, bc, ic): &(String, SpaceFamily, usize, u8, u8)| -> Result<Vec<Result<StudyRow, (String, String)>>, HarnessError> {
        let (name, polygon) = resolve(shape)?;
        let unchecked = cfg.expect_fail.iter().any(|s| s == shape);
        let h = cfg.h.unwrap_or_else(|| default_h(&polygon));
        let mesh = Arc::new(triangulate(&polygon, h)?);
        let families0 = Families::from_codes(cfg.bproj[0], cfg.iproj[0], *bc, *ic)?;
        let spec = HdivSpaceKind { family: *space, k: *k, bcons: families0.bcons, icons: families0.icons };
        let t0 = Instant::now();
        let basis = if unchecked {
            canonical_basis_unchecked(&polygon, spec, mesh)
        } else {
            canonical_basis(&polygon, spec, mesh)
        };
        let basis = match basis {
            Ok(b) => b,
            Err(e) => return Ok(vec![Err((format!("{name} {space:?} k={k} bcons={bc} icons={ic}"), e.to_string()))]),
        };
        let basis_ms = t0.elapsed().as_secs_f64() * 1e3;
        let mut rows = Vec::new();
        for &config in &cfg.configs {
            for &bp in &cfg.bproj {
                for &ip in &cfg.iproj {
                    let t1 = Instant::now();
                    let families = Families::from_codes(bp, ip, *bc, *ic)?;
                    let req = ElementRequest { shape: shape.clone(), space: *space, config, k: *k, families, h: cfg.h, unchecked };
                    let tag = format!("{name} {space:?} k={k} {} bproj={bp} iproj={ip} bcons={bc} icons={ic}", config.name());
                    match build_on_basis(name.clone(), polygon.clone(), basis.clone(), &req) {
                        Ok(run) => rows.push(Ok(StudyRow {
                            shape: name.clone(),
                            space: *space,
                            k: *k,
                            config,
                            bproj: bp,
                            iproj: ip,
                            bcons: *bc,
                            icons: *ic,
                            cond2: run.transfer.cond2,
                            singular: !(run.transfer.cond2 < COND_CEILING),
                            degenerated: run.degeneration.as_ref().map(|d| d.degenerated),
                            wall_ms: basis_ms + t1.elapsed().as_secs_f64() * 1e3,
                        })),
                        Err(e) => rows.push(Err((tag, e.to_string()))),
                    }
                }
            }
        }
        Ok(rows)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = groups.par_iter().map(run_group).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = groups.iter().map(run_group).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        for row in r? {
            match row {
                Ok(row) => rows.push(row),
                Err(f) => failures.push(f),
            }
        }
    }
    rows.sort_by(|a, b| {
        a.cond2
            .total_cmp(&b.cond2)
            .then_with(|| (&a.shape, a.k, a.config.name(), a.bproj, a.iproj, a.bcons, a.icons).cmp(&(&b.shape, b.k, b.config.name(), b.bproj, b.iproj, b.bcons, b.icons)))
    });
    Ok(StudyResult { rows, failures })
}

/// Runs the study and writes study.csv, study_timing.csv and optionally study.svg.
pub fn cmd_condstudy(cfg: &StudyConfig) -> Result<StudyResult, HarnessError> {
    let res = run_study(cfg)?;
    if let Some(out) = &cfg.out {
        write_file(out, "study.csv", &res.to_csv())?;
        write_file(out, "study_timing.csv", &res.timing_csv())?;
        if cfg.svg {
            write_file(out, "study.svg", &study_svg(&res.rows))?;
        }
    }
    Ok(res)
}

const PALETTE: [&str; 7] = ["#1f4fd1", "#d62728", "#2ca02c", "#e6c229", "#c41fc4", "#17becf", "#a68b6d"];

/// Sorted log10(cond) line over four colour bands: inner projector,
/// inner constructor, boundary projector, boundary constructor.
pub fn study_svg(rows: &[StudyRow]) -> String {
    let (w, plot_h, band_h) = (900.0, 300.0, 18.0);
    let n = rows.len().max(1) as f64;
    let finite: Vec<f64> = rows.iter().map(|r| r.cond2).filter(|c| c.is_finite() && *c > 0.0).map(f64::log10).collect();
    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(lo + 1.0);
    let total_h = plot_h + 4.0 * band_h + 30.0;
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{total_h}\" font-family=\"sans-serif\" font-size=\"10\">\n");
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{total_h}\" fill=\"white\"/>");
    let mut pts = String::new();
    for (i, r) in rows.iter().enumerate() {
        let c = if r.cond2.is_finite() { r.cond2.log10() } else { hi };
        let x = (i as f64 + 0.5) / n * w;
        let y = plot_h - (c - lo) / (hi - lo) * (plot_h - 20.0) - 10.0;
        let _ = write!(pts, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(s, "<polyline points=\"{pts}\" fill=\"none\" stroke=\"#1f4fd1\" stroke-width=\"1.5\"/>");
    let _ = writeln!(s, "<text x=\"4\" y=\"12\">log10 cond: {lo:.1} to {hi:.1}</text>");
    let bands: [(&str, fn(&StudyRow) -> u8); 4] =
        [("iproj", |r| r.iproj), ("icons", |r| r.icons), ("bproj", |r| r.bproj), ("bcons", |r| r.bcons)];
    for (b, (label, get)) in bands.iter().enumerate() {
        let y = plot_h + 10.0 + b as f64 * band_h;
        for (i, r) in rows.iter().enumerate() {
            let x = i as f64 / n * w;
            let colour = PALETTE[(get(r) as usize).saturating_sub(1) % PALETTE.len()];
            let _ = writeln!(s, "<rect x=\"{x:.2}\" y=\"{y}\" width=\"{:.2}\" height=\"{}\" fill=\"{colour}\"/>", w / n + 0.5, band_h - 2.0);
        }
        let _ = writeln!(s, "<text x=\"4\" y=\"{}\" fill=\"white\">{label}</text>", y + band_h - 6.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Boundary behaviour of one tuned family of functions.
#[derive(Debug, Clone, Serialize)]
pub struct TraceSide {
    pub per_edge_counts: Vec<usize>,
    /// Per normal function: the edge it belongs to.
    pub function_edges: Vec<usize>,
    /// Per normal function: max |q·n| on its own edge.
    pub own_edge_max: Vec<f64>,
    /// Per normal function: max |q·n| − 1| on its own edge (meaningful at k = 0).
    pub own_edge_unit_deviation: Vec<f64>,
    /// Largest |q·n| of any normal function on an edge other than its own.
    pub off_edge_max: f64,
    /// Largest |q·n| of any internal function on the boundary.
    pub internal_boundary_max: f64,
    pub internal_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RtCompareReport {
    pub shape: String,
    pub k: usize,
    pub raviart_thomas: TraceSide,
    pub reduced: TraceSide,
    pub reduced_cond2: f64,
}

fn side_from_samples(
    n_edges: usize,
    groups: &[(usize, Vec<Vec<f64>>)],
    internal: &[Vec<Vec<f64>>],
) -> TraceSide {
    // groups: (own edge, per-edge samples of q·n)
    let mut per_edge_counts = vec![0; n_edges];
    let mut own_edge_max = Vec::new();
    let mut own_edge_unit_deviation = Vec::new();
    let mut function_edges = Vec::new();
    let mut off: f64 = 0.0;
    for (e, samples) in groups {
        per_edge_counts[*e] += 1;
        function_edges.push(*e);
        own_edge_max.push(samples[*e].iter().fold(0.0f64, |m, v| m.max(v.abs())));
        own_edge_unit_deviation.push(samples[*e].iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs())));
        for (j, s) in samples.iter().enumerate() {
            if j != *e {
                off = off.max(s.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
        }
    }
    let internal_boundary_max = internal.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    TraceSide {
        per_edge_counts,
        function_edges,
        own_edge_max,
        own_edge_unit_deviation,
        off_edge_max: off,
        internal_boundary_max,
        internal_count: internal.len(),
    }
}

/// Compares the global-Lagrangian Raviart–Thomas basis with the tuned reduced
/// IIb element on the matching catalog shape (fig151 triangle, fig152 quadrilateral).
pub fn cmd_rtcompare(shape: RtShape, k: usize, h: Option<f64>) -> Result<RtCompareReport, HarnessError> {
    const SAMPLES: usize = 40;
    let rt = rt_basis(shape, k, RtVariant::Global);
    let edges = shape.edges();
    let rt_samples = |q: &PolyVec2| -> Vec<Vec<f64>> {
        edges.iter().map(|e| edge_samples(e.length, SAMPLES).map(|s| q.eval(e.at(s)).dot(e.normal)).collect()).collect()
    };
    let rt_groups: Vec<(usize, Vec<Vec<f64>>)> =
        rt.normal.iter().enumerate().flat_map(|(e, g)| g.iter().map(move |q| (e, q))).map(|(e, q)| (e, rt_samples(q))).collect();
    let rt_internal: Vec<Vec<Vec<f64>>> = rt.internal.iter().map(rt_samples).collect();
    let raviart_thomas = side_from_samples(edges.len(), &rt_groups, &rt_internal);

    let key = match shape {
        RtShape::Triangle => "fig151",
        RtShape::Quad => "fig152",
    };
    let mut req = ElementRequest::new(key, SpaceFamily::ReducedNatural, Config::IIb, k);
    req.h = h;
    let run = build_element(&req)?;
    let tuned = run.tuned.as_ref().ok_or(ElementError::SingularTransfer(run.transfer.cond2))?;
    let p = &run.polygon;
    let samples = |q: &VectorField| -> Vec<Vec<f64>> {
        p.edges.iter().enumerate().map(|(j, e)| edge_samples(e.length, SAMPLES).map(|s| q.trace_value(j, s).dot(e.normal)).collect()).collect()
    };
    let mut groups = Vec::new();
    let mut internal = Vec::new();
    for (q, role) in tuned.functions.iter().zip(&tuned.origins) {
        match role.edge() {
            Some(e) => groups.push((e, samples(q))),
            None => internal.push(samples(q)),
        }
    }
    let reduced = side_from_samples(p.n(), &groups, &internal);
    Ok(RtCompareReport { shape: key.into(), k, raviart_thomas, reduced, reduced_cond2: run.transfer.cond2 })
}

/// Transfer matrix of a Raviart–Thomas basis against the classical DOFs, tuned.
pub fn rt_tuned_residual(shape: RtShape, k: usize, variant: RtVariant) -> Result<f64, ElementError> {
    let basis = rt_basis(shape, k, variant);
    let fns = basis.functions();
    let dofs = rt_dofs(shape, k);
    let lambda = nalgebra::DMatrix::from_fn(dofs.len(), fns.len(), |i, j| dofs[i].apply(shape, k, &fns[j]));
    Ok(tune_matrix(&lambda, COND_CEILING)?.residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_codes_round_trip() {
        let f = Families::from_codes(3, 5, 2, 4).unwrap();
        assert_eq!(f.codes(), [3, 5, 2, 4]);
        assert!(Families::from_codes(8, 1, 1, 1).is_err());
        assert_eq!(Families::default().codes(), [3, 3, 1, 2]);
    }

    #[test]
    fn validate_reports() {
        assert!(cmd_validate("fig151", Config::IIb, Point2::new(1.0, 1.0)).unwrap().admissible);
        let r = cmd_validate("fig172", Config::IIb, Point2::new(1.0, 1.0)).unwrap();
        assert!(!r.admissible && r.render().contains("AxisCollinear"));
    }
}
