//! WebAssembly bindings for the browser demo.
//!
//! Every export takes and returns JSON strings. The plain Rust functions behind
//! them (`catalog_json`, `validate_json`, `element_json`) are what the tests use.

use std::sync::Arc;

use polydiv::catalog::CATALOG;
use polydiv::elements::{assemble_transfer, classify_degenerate, dof_set_unchecked, tune_basis, Config, ElementConfig};
use polydiv::geometry::{build_polygon, validate_shape, Point2, Polygon};
use polydiv::hdiv_basis::{canonical_basis_unchecked, HdivSpaceKind, SpaceFamily};
use polydiv::poisson::triangulate;
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Finest mesh the page may ask for, in divisions of the diameter.
const MAX_DIVISIONS: f64 = 48.0;
const MAX_ORDER: usize = 2;
const TRACE_SAMPLES: usize = 24;

fn parse_polygon(vertices: &str) -> Result<Polygon, String> {
    let pts: Vec<[f64; 2]> = serde_json::from_str(vertices).map_err(|e| format!("vertices: {e}"))?;
    let pts: Vec<Point2> = pts.iter().map(|p| Point2::new(p[0], p[1])).collect();
    build_polygon(&pts).map_err(|e| e.to_string())
}

fn parse_family(s: &str) -> Result<SpaceFamily, String> {
    match s {
        "classical" => Ok(SpaceFamily::Classical),
        "reduced" => Ok(SpaceFamily::ReducedLagrangeBC),
        "reduced-natural" => Ok(SpaceFamily::ReducedNatural),
        _ => Err(format!("unknown space {s}")),
    }
}

fn parse_config(s: &str) -> Result<Config, String> {
    Config::parse(s).ok_or_else(|| format!("unknown configuration {s}"))
}

fn vertices_of(p: &Polygon) -> Vec<[f64; 2]> {
    p.vertices.iter().map(|v| [v.x, v.y]).collect()
}

pub fn catalog_json() -> String {
    let shapes: Vec<_> =
        CATALOG.iter().map(|e| json!({ "key": e.key, "title": e.title, "vertices": e.vertices.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>() })).collect();
    serde_json::to_string(&shapes).unwrap()
}

pub fn validate_json(vertices: &str, config: &str, vx: f64, vy: f64) -> Result<String, String> {
    let p = parse_polygon(vertices)?;
    let d = validate_shape(&p, parse_config(config)?, Point2::new(vx, vy));
    Ok(json!({
        "admissible": d.admissible(),
        "vertices": vertices_of(&p),
        "violations": d.violations,
        "warnings": d.warnings,
    })
    .to_string())
}

#[derive(Serialize)]
struct TunedTrace {
    label: String,
    edge: Option<usize>,
    degenerate: bool,
    /// Normal trace sampled edge by edge, TRACE_SAMPLES values per edge.
    values: Vec<f64>,
}

/// Builds an element without the shape rules and reports its conditioning and tuned traces.
pub fn element_json(vertices: &str, space: &str, config: &str, k: usize, divisions: f64) -> Result<String, String> {
    if k > MAX_ORDER {
        return Err(format!("the demo stops at k = {MAX_ORDER}"));
    }
    let p = parse_polygon(vertices)?;
    let spec = HdivSpaceKind::new(parse_family(space)?, k);
    let cfg = ElementConfig::new(parse_config(config)?, spec);
    let divisions = divisions.clamp(4.0, MAX_DIVISIONS);
    let mesh = Arc::new(triangulate(&p, p.diameter / divisions).map_err(|e| e.to_string())?);
    let triangles = mesh.triangles.len();
    let basis = canonical_basis_unchecked(&p, spec, mesh).map_err(|e| e.to_string())?;
    let transfer = assemble_transfer(&dof_set_unchecked(&p, &cfg), &basis).map_err(|e| e.to_string())?;
    let mut traces = Vec::new();
    let mut residual = None;
    let mut degenerate = None;
    if let Ok(tb) = tune_basis(&transfer, &basis) {
        let report = classify_degenerate(&tb);
        for ((f, role), class) in tb.functions.iter().zip(&tb.origins).zip(&report.classes) {
            if role.is_internal() {
                continue;
            }
            let mut values = Vec::with_capacity(p.n() * TRACE_SAMPLES);
            for (i, e) in p.edges.iter().enumerate() {
                for m in 0..TRACE_SAMPLES {
                    let s = e.length * (m as f64 + 0.5) / TRACE_SAMPLES as f64;
                    values.push(f.trace_value(i, s).dot(e.normal));
                }
            }
            traces.push(TunedTrace {
                label: f.label.clone(),
                edge: role.edge(),
                degenerate: *class == polydiv::elements::Classification::Degenerate,
                values,
            });
        }
        residual = Some(tb.tuning.residual);
        degenerate = Some(report.per_edge);
    }
    Ok(json!({
        "vertices": vertices_of(&p),
        "triangles": triangles,
        "dimension": basis.len(),
        "cond2": if transfer.cond2.is_finite() { json!(transfer.cond2) } else { json!(null) },
        "tau_bc": basis.tau_bc,
        "residual": residual,
        "degenerate_per_edge": degenerate,
        "samples_per_edge": TRACE_SAMPLES,
        "traces": traces,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn catalog() -> String {
    catalog_json()
}

#[wasm_bindgen]
pub fn validate(vertices: &str, config: &str, vx: f64, vy: f64) -> Result<String, JsValue> {
    validate_json(vertices, config, vx, vy).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn element(vertices: &str, space: &str, config: &str, k: usize, divisions: f64) -> Result<String, JsValue> {
    element_json(vertices, space, config, k, divisions).map_err(|e| JsValue::from_str(&e))
}
