//! Polygons, edges and the admissibility rules for the Poisson-based elements.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::Config;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}
impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}
impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}
impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub a: Point2,
    pub b: Point2,
    /// Outward unit normal.
    pub normal: Point2,
    pub length: f64,
    /// The constant value of x·n along the edge.
    pub xn: f64,
}

impl Edge {
    fn new(a: Point2, b: Point2) -> Self {
        let d = b - a;
        let length = d.norm();
        let normal = Point2::new(d.y / length, -d.x / length);
        Edge { a, b, normal, length, xn: a.dot(normal) }
    }

    pub fn tangent(&self) -> Point2 {
        (self.b - self.a) * (1.0 / self.length)
    }

    pub fn midpoint(&self) -> Point2 {
        (self.a + self.b) * 0.5
    }

    /// Point at arc parameter `s`, without range checking.
    pub fn at(&self, s: f64) -> Point2 {
        self.a + (self.b - self.a) * (s / self.length)
    }

    /// Arc parameter of the orthogonal projection of `p` onto the edge line.
    pub fn project(&self, p: Point2) -> f64 {
        (p - self.a).dot(self.tangent())
    }

    pub fn distance(&self, p: Point2) -> f64 {
        let s = self.project(p).clamp(0.0, self.length);
        self.at(s).dist(p)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("a polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("edge {0} has zero length")]
    DegenerateEdge(usize),
    #[error("edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("vertices are given in clockwise order")]
    ClockwiseInput,
    #[error("arc parameter {s} outside [0, {length}]")]
    OutOfRange { s: f64, length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Reverse clockwise input silently.
    #[default]
    AutoReverse,
    Reject,
}

#[derive(Debug, Clone, Serialize)]
pub struct Polygon {
    pub vertices: Vec<Point2>,
    pub edges: Vec<Edge>,
    pub area: f64,
    /// Mean of the convex hull vertices.
    pub hull_barycenter: Point2,
    pub hull_area: f64,
    pub diameter: f64,
}

fn shoelace(pts: &[Point2]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Andrew's monotone chain; returns the hull in CCW order without collinear points.
pub fn convex_hull(pts: &[Point2]) -> Vec<Point2> {
    let mut p: Vec<Point2> = pts.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let turn = |o: Point2, a: Point2, b: Point2| (a - o).cross(b - o);
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * p.len());
    for &q in &p {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    let lower = hull.len() + 1;
    for &q in p.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    hull.pop();
    hull
}

fn segments_intersect(a: &Edge, b: &Edge) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| (q - p).cross(r - p);
    let d1 = orient(b.a, b.b, a.a);
    let d2 = orient(b.a, b.b, a.b);
    let d3 = orient(a.a, a.b, b.a);
    let d4 = orient(a.a, a.b, b.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let tol = 1e-14 * (a.length + b.length);
    a.distance(b.a) < tol || a.distance(b.b) < tol || b.distance(a.a) < tol || b.distance(a.b) < tol
}

pub fn build_polygon(vertices: &[Point2]) -> Result<Polygon, GeometryError> {
    build_polygon_with(vertices, Orientation::AutoReverse)
}

pub fn build_polygon_with(vertices: &[Point2], orientation: Orientation) -> Result<Polygon, GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite(i));
    }
    let mut verts = vertices.to_vec();
    if shoelace(&verts) < 0.0 {
        match orientation {
            Orientation::Reject => return Err(GeometryError::ClockwiseInput),
            Orientation::AutoReverse => {
                // Keep vertex 0 first so edge indices stay predictable.
                verts[1..].reverse();
            }
        }
    }
    let scale = verts.iter().map(|p| p.x.abs().max(p.y.abs())).fold(0.0, f64::max).max(1.0);
    for i in 0..n {
        if verts[i].dist(verts[(i + 1) % n]) <= 1e-14 * scale {
            return Err(GeometryError::DegenerateEdge(i));
        }
    }
    let edges: Vec<Edge> = (0..n).map(|i| Edge::new(verts[i], verts[(i + 1) % n])).collect();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges may only share their common vertex; reject folding back.
                let (e, f) = if j == i + 1 { (&edges[i], &edges[j]) } else { (&edges[j], &edges[i]) };
                if e.tangent().dot(f.tangent()) < -1.0 + 1e-14 {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
                continue;
            }
            if segments_intersect(&edges[i], &edges[j]) {
                return Err(GeometryError::SelfIntersecting(i, j));
            }
        }
    }
    let area = shoelace(&verts);
    if area <= 0.0 {
        return Err(GeometryError::SelfIntersecting(0, n - 1));
    }
    let hull = convex_hull(&verts);
    let hull_barycenter = hull.iter().fold(Point2::default(), |acc, &p| acc + p) * (1.0 / hull.len() as f64);
    let hull_area = shoelace(&hull);
    let mut diameter: f64 = 0.0;
    for a in &hull {
        for b in &hull {
            diameter = diameter.max(a.dist(*b));
        }
    }
    Ok(Polygon { vertices: verts, edges, area, hull_barycenter, hull_area, diameter })
}

impl Polygon {
    pub fn n(&self) -> usize {
        self.edges.len()
    }

    /// Even-odd ray casting; points on the boundary may land either way.
    pub fn contains(&self, p: Point2) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, p: Point2) -> f64 {
        self.edges.iter().map(|e| e.distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn edge_point(&self, edge: usize, s: f64) -> Result<Point2, GeometryError> {
        edge_point(&self.edges[edge], s)
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len();
        let mut c = Point2::default();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            c = c + (a + b) * a.cross(b);
        }
        c * (1.0 / (6.0 * self.area))
    }
}

pub fn edge_point(e: &Edge, s: f64) -> Result<Point2, GeometryError> {
    let slack = 1e-12 * e.length;
    if !(s >= -slack && s <= e.length + slack) {
        return Err(GeometryError::OutOfRange { s, length: e.length });
    }
    Ok(e.at(s.clamp(0.0, e.length)))
}

/// Identifiers of the shape rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    /// Edge parallel to a coordinate axis.
    AxisCollinear,
    /// Edge line passing through the origin.
    OriginAligned,
    /// Edge normal collinear with the misc-moment direction.
    DirectionCollinear,
    /// x·n small but nonzero.
    SmallOffset,
    /// Some edge point has its position vector along the normal.
    NormalThroughOrigin,
    /// Consecutive collinear edges.
    HangingNode,
    /// Two non-adjacent edges on the same line.
    AlignedSimilarEdges,
    /// Two opposite parallel edges of equal length.
    ParallelSimilarEdges,
}

#[derive(Debug, Clone, Serialize)]
pub struct Finding {
    pub edge: usize,
    pub rule: Rule,
    pub value: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ShapeDiagnostics {
    pub violations: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ShapeDiagnostics {
    pub fn admissible(&self) -> bool {
        self.violations.is_empty()
    }
    pub fn has_violation(&self, rule: Rule) -> bool {
        self.violations.iter().any(|f| f.rule == rule)
    }
    pub fn has_warning(&self, rule: Rule) -> bool {
        self.warnings.iter().any(|f| f.rule == rule)
    }
}

pub const TOL_AXIS: f64 = 1e-8;
pub const TOL_ORIGIN: f64 = 1e-8;
pub const TOL_DIRECTION: f64 = 1e-8;
pub const SMALL_OFFSET: f64 = 0.05;

pub fn validate_shape(p: &Polygon, config: Config, v: Point2) -> ShapeDiagnostics {
    let mut d = ShapeDiagnostics::default();
    let n = p.n();
    for (i, e) in p.edges.iter().enumerate() {
        let axis = e.normal.x.abs().min(e.normal.y.abs());
        if axis < TOL_AXIS {
            d.violations.push(Finding { edge: i, rule: Rule::AxisCollinear, value: axis });
        }
        if e.xn.abs() < TOL_ORIGIN {
            d.violations.push(Finding { edge: i, rule: Rule::OriginAligned, value: e.xn });
        } else if e.xn.abs() < SMALL_OFFSET {
            d.warnings.push(Finding { edge: i, rule: Rule::SmallOffset, value: e.xn });
        }
        if config.uses_direction() {
            let c = e.normal.cross(v).abs() / v.norm();
            if c < TOL_DIRECTION {
                d.violations.push(Finding { edge: i, rule: Rule::DirectionCollinear, value: c });
            }
        }
        let foot = -e.a.dot(e.tangent());
        if foot > 0.0 && foot < e.length && e.xn.abs() >= TOL_ORIGIN {
            d.warnings.push(Finding { edge: i, rule: Rule::NormalThroughOrigin, value: foot / e.length });
        }
        let next = &p.edges[(i + 1) % n];
        let turn = e.normal.dist(next.normal);
        if turn < 1e-8 {
            d.warnings.push(Finding { edge: i, rule: Rule::HangingNode, value: turn });
        }
        for j in i + 1..n {
            let f = &p.edges[j];
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if !adjacent && e.normal.dist(f.normal) < 1e-8 && (e.xn - f.xn).abs() < 1e-8 {
                d.warnings.push(Finding { edge: i, rule: Rule::AlignedSimilarEdges, value: j as f64 });
            }
            if (e.normal + f.normal).norm() < 1e-8 && (e.length - f.length).abs() < 1e-8 * e.length {
                d.warnings.push(Finding { edge: i, rule: Rule::ParallelSimilarEdges, value: j as f64 });
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn unit_square_normals() {
        let p = build_polygon(&pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)])).unwrap();
        let expect = [(0., -1.), (1., 0.), (0., 1.), (-1., 0.)];
        for (e, n) in p.edges.iter().zip(expect) {
            assert!((e.normal.x - n.0).abs() < 1e-15 && (e.normal.y - n.1).abs() < 1e-15);
        }
        assert!((p.area - 1.0).abs() < 1e-15);
        assert!(p.contains(Point2::new(0.5, 0.5)) && !p.contains(Point2::new(1.5, 0.5)));
    }

    #[test]
    fn clockwise_is_reversed_or_rejected() {
        let cw = pts(&[(0., 0.), (0., 1.), (1., 1.), (1., 0.)]);
        assert_eq!(build_polygon_with(&cw, Orientation::Reject).unwrap_err(), GeometryError::ClockwiseInput);
        let p = build_polygon(&cw).unwrap();
        assert!(p.area > 0.0);
        assert_eq!(p.vertices[0], Point2::new(0., 0.));
    }

    #[test]
    fn rejects_bowtie_and_repeated_vertex() {
        let bowtie = pts(&[(0., 0.), (1., 1.), (1., 0.), (0., 1.)]);
        assert!(matches!(build_polygon(&bowtie), Err(GeometryError::SelfIntersecting(..))));
        let rep = pts(&[(0., 0.), (1., 0.), (1., 0.), (0., 1.)]);
        assert_eq!(build_polygon(&rep).unwrap_err(), GeometryError::DegenerateEdge(1));
    }

    #[test]
    fn hull_of_nonconvex() {
        let p = build_polygon(&pts(&[(0., 0.), (2., 0.), (1., 0.5), (2., 2.), (0., 2.)])).unwrap();
        assert!((p.hull_area - 4.0).abs() < 1e-14);
        assert!((p.hull_barycenter.x - 1.0).abs() < 1e-14);
        assert!(p.area < p.hull_area);
    }

    #[test]
    fn edge_point_range() {
        let e = Edge::new(Point2::new(0.2, 0.0), Point2::new(1.0, 0.2));
        assert_eq!(edge_point(&e, 0.0).unwrap(), e.a);
        assert!(edge_point(&e, e.length + 1.0).is_err());
    }
}
