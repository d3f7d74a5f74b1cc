//! Raviart–Thomas elements on the reference triangle (0,0),(1,0),(0,1) and the
//! reference square (0,0),(1,0),(1,1),(0,1), built from exact polynomials.
//!
//! Edges run counter-clockwise from the origin; edge `i` joins vertex `i` to
//! vertex `i + 1` and is parametrized by arc length from its first vertex.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::Point2;
use crate::polyfam::LagrangeSet;
use crate::quadrature::{gauss_legendre, interval_integral, triangle_rule};

/// Bivariate polynomial as a map from exponents (i, j) of x^i y^j to coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly2 {
    pub terms: BTreeMap<(u32, u32), f64>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: f64, i: u32, j: u32) -> Self {
        let mut p = Self::zero();
        if c != 0.0 {
            p.terms.insert((i, j), c);
        }
        p
    }

    pub fn x() -> Self {
        Self::monomial(1.0, 1, 0)
    }

    pub fn y() -> Self {
        Self::monomial(1.0, 0, 1)
    }

    /// Σ c_j (a + b·t)^j, with t = x when `in_x`, else t = y.
    pub fn from_affine_univariate(coeffs: &[f64], in_x: bool, a: f64, b: f64) -> Self {
        let t = if in_x { Self::x() } else { Self::y() };
        let lin = Self::constant(a) + t * b;
        let mut out = Self::zero();
        let mut power = Self::constant(1.0);
        for &c in coeffs {
            out = out + power.clone() * c;
            power = &power * &lin;
        }
        out
    }

    fn add_term(&mut self, key: (u32, u32), c: f64) {
        let e = self.terms.entry(key).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn eval(&self, p: Point2) -> f64 {
        self.terms.iter().map(|(&(i, j), c)| c * p.x.powi(i as i32) * p.y.powi(j as i32)).sum()
    }

    pub fn dx(&self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &c) in &self.terms {
            if i > 0 {
                out.add_term((i - 1, j), c * i as f64);
            }
        }
        out
    }

    pub fn dy(&self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &c) in &self.terms {
            if j > 0 {
                out.add_term((i, j - 1), c * j as f64);
            }
        }
        out
    }

    /// Drops coefficients below `tol` in magnitude.
    pub fn pruned(&self, tol: f64) -> Self {
        Poly2 { terms: self.terms.iter().filter(|(_, c)| c.abs() > tol).map(|(&k, &c)| (k, c)).collect() }
    }

    /// Total degree, or None for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|&(i, j)| i + j).max()
    }

    pub fn degree_x(&self) -> Option<u32> {
        self.terms.keys().map(|&(i, _)| i).max()
    }

    pub fn degree_y(&self) -> Option<u32> {
        self.terms.keys().map(|&(_, j)| j).max()
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }
}

impl Add for Poly2 {
    type Output = Poly2;
    fn add(mut self, o: Poly2) -> Poly2 {
        for (k, c) in o.terms {
            self.add_term(k, c);
        }
        self
    }
}

impl Sub for Poly2 {
    type Output = Poly2;
    fn sub(self, o: Poly2) -> Poly2 {
        self + (-o)
    }
}

impl Neg for Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self * -1.0
    }
}

impl Mul<f64> for Poly2 {
    type Output = Poly2;
    fn mul(self, s: f64) -> Poly2 {
        if s == 0.0 {
            return Poly2::zero();
        }
        Poly2 { terms: self.terms.into_iter().map(|(k, c)| (k, c * s)).collect() }
    }
}

impl Mul<&Poly2> for &Poly2 {
    type Output = Poly2;
    fn mul(self, o: &Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for (&(i, j), &a) in &self.terms {
            for (&(k, l), &b) in &o.terms {
                out.add_term((i + k, j + l), a * b);
            }
        }
        out
    }
}

impl Mul<Poly2> for Poly2 {
    type Output = Poly2;
    fn mul(self, o: Poly2) -> Poly2 {
        &self * &o
    }
}

/// A vector field with polynomial components.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolyVec2 {
    pub x: Poly2,
    pub y: Poly2,
}

impl PolyVec2 {
    pub fn new(x: Poly2, y: Poly2) -> Self {
        PolyVec2 { x, y }
    }

    pub fn eval(&self, p: Point2) -> Point2 {
        Point2::new(self.x.eval(p), self.y.eval(p))
    }

    pub fn div(&self) -> Poly2 {
        self.x.dx() + self.y.dy()
    }

    pub fn scaled(&self, s: &Poly2) -> Self {
        PolyVec2 { x: s * &self.x, y: s * &self.y }
    }

    pub fn hadamard(&self, sx: &Poly2, sy: &Poly2) -> Self {
        PolyVec2 { x: sx * &self.x, y: sy * &self.y }
    }

    pub fn add(&self, o: &PolyVec2, w: f64) -> Self {
        PolyVec2 { x: self.x.clone() + o.x.clone() * w, y: self.y.clone() + o.y.clone() * w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RtShape {
    Triangle,
    Quad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RtVariant {
    /// Edge vectors x + n_i (with the sign-broken fourth vector on the square).
    Local,
    /// Edge vectors whose normal component is 1 on their own edge and 0 on the others.
    Global,
}

/// An edge of a reference element: endpoints and outward unit normal.
#[derive(Debug, Clone, Copy)]
pub struct RefEdge {
    pub a: Point2,
    pub b: Point2,
    pub normal: Point2,
    pub length: f64,
}

impl RefEdge {
    fn new(a: Point2, b: Point2) -> Self {
        let d = b - a;
        let length = d.norm();
        RefEdge { a, b, normal: Point2::new(d.y / length, -d.x / length), length }
    }
    pub fn at(&self, s: f64) -> Point2 {
        self.a + (self.b - self.a) * (s / self.length)
    }
}

impl RtShape {
    pub fn vertices(self) -> Vec<Point2> {
        match self {
            RtShape::Triangle => vec![Point2::new(0., 0.), Point2::new(1., 0.), Point2::new(0., 1.)],
            RtShape::Quad => vec![Point2::new(0., 0.), Point2::new(1., 0.), Point2::new(1., 1.), Point2::new(0., 1.)],
        }
    }

    pub fn edges(self) -> Vec<RefEdge> {
        let v = self.vertices();
        (0..v.len()).map(|i| RefEdge::new(v[i], v[(i + 1) % v.len()])).collect()
    }

    pub fn dimension(self, k: usize) -> usize {
        match self {
            RtShape::Triangle => (k + 1) * (k + 3),
            RtShape::Quad => 2 * (k + 1) * (k + 2),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RTBasis {
    pub shape: RtShape,
    pub k: usize,
    pub variant: RtVariant,
    /// Per edge, k+1 functions ordered by increasing arc parameter of their node.
    pub normal: Vec<Vec<PolyVec2>>,
    pub internal: Vec<PolyVec2>,
    /// Lagrange nodes (arc parameters) used on every edge.
    pub nodes: Vec<f64>,
}

impl RTBasis {
    pub fn functions(&self) -> Vec<PolyVec2> {
        self.normal.iter().flatten().chain(&self.internal).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.normal.iter().map(Vec::len).sum::<usize>() + self.internal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All boundary sampling points, edge by edge.
    pub fn sampling_points(&self) -> Vec<(usize, Point2)> {
        let edges = self.shape.edges();
        let mut out = Vec::new();
        for (i, e) in edges.iter().enumerate() {
            for &s in &self.nodes {
                out.push((i, e.at(s * e.length)));
            }
        }
        out
    }
}

/// Coefficients of the m-th Lagrange polynomial on `nodes`, lowest degree first.
fn lagrange_coeffs(nodes: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for (l, &sl) in nodes.iter().enumerate() {
        if l == m {
            continue;
        }
        let d = nodes[m] - sl;
        let mut next = vec![0.0; c.len() + 1];
        for (p, &v) in c.iter().enumerate() {
            next[p + 1] += v / d;
            next[p] -= v * sl / d;
        }
        c = next;
    }
    c
}

/// Arc parameter along reference edge `e` as an affine function of one coordinate.
/// Returns (in_x, a, b) with s = a + b·t.
fn edge_coordinate(e: &RefEdge) -> (bool, f64, f64) {
    let d = e.b - e.a;
    if d.x.abs() >= d.y.abs() {
        // s = L (x − a.x) / d.x
        let b = e.length / d.x;
        (true, -e.a.x * b, b)
    } else {
        let b = e.length / d.y;
        (false, -e.a.y * b, b)
    }
}

fn sign_pos(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// The edge vector e_i as a polynomial pair.
fn edge_vector(shape: RtShape, variant: RtVariant, i: usize, e: &RefEdge) -> PolyVec2 {
    let (x, y) = (Poly2::x(), Poly2::y());
    let c = Poly2::constant;
    match (shape, variant) {
        (RtShape::Triangle, RtVariant::Local) => PolyVec2::new(x + c(e.normal.x), y + c(e.normal.y)),
        (RtShape::Triangle, RtVariant::Global) => {
            if i == 1 {
                let r = std::f64::consts::SQRT_2;
                PolyVec2::new(x * r, y * r)
            } else {
                PolyVec2::new(x + c(e.normal.x), y + c(e.normal.y))
            }
        }
        (RtShape::Quad, RtVariant::Local) => {
            if i == 3 {
                let n = e.normal;
                PolyVec2::new(c(n.x.abs()) + x * sign_pos(n.x), c(n.y.abs()) + y * sign_pos(n.y))
            } else {
                PolyVec2::new(x + c(e.normal.x), y + c(e.normal.y))
            }
        }
        (RtShape::Quad, RtVariant::Global) => match i {
            0 => PolyVec2::new(Poly2::zero(), y - c(1.0)),
            1 => PolyVec2::new(x, Poly2::zero()),
            2 => PolyVec2::new(Poly2::zero(), y),
            _ => PolyVec2::new(x - c(1.0), Poly2::zero()),
        },
    }
}

pub fn rt_basis(shape: RtShape, k: usize, variant: RtVariant) -> RTBasis {
    let edges = shape.edges();
    let unit = LagrangeSet::on_length(1.0, k);
    let mut normal = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        let ev = edge_vector(shape, variant, i, e);
        let (in_x, a, b) = edge_coordinate(e);
        let nodes: Vec<f64> = unit.nodes.iter().map(|s| s * e.length).collect();
        let group = (0..=k)
            .map(|m| {
                let l = Poly2::from_affine_univariate(&lagrange_coeffs(&nodes, m), in_x, a, b);
                ev.scaled(&l)
            })
            .collect();
        normal.push(group);
    }
    let (x, y) = (Poly2::x(), Poly2::y());
    let one = Poly2::constant(1.0);
    let mut internal = Vec::new();
    if k > 0 {
        match shape {
            RtShape::Triangle => {
                let e1 = PolyVec2::new(&x * &(x.clone() - one.clone()), &x * &y);
                let e2 = PolyVec2::new(&y * &x, &y * &(y.clone() - one.clone()));
                let monos: Vec<Poly2> =
                    (0..k as u32).flat_map(|i| (0..k as u32 - i).map(move |j| Poly2::monomial(1.0, i, j))).collect();
                for e in [&e1, &e2] {
                    for p in &monos {
                        internal.push(e.scaled(p));
                    }
                }
            }
            RtShape::Quad => {
                let xx = &x * &(x.clone() - one.clone());
                let yy = &y * &(y.clone() - one.clone());
                let e1 = PolyVec2::new(xx.clone(), yy.clone());
                let e2 = PolyVec2::new(-xx, yy);
                let k32 = k as u32;
                let monos: Vec<(u32, u32)> = (0..k32).flat_map(|i| (0..=k32).map(move |j| (i, j))).collect();
                for e in [&e1, &e2] {
                    for &(i, j) in &monos {
                        internal.push(e.hadamard(&Poly2::monomial(1.0, i, j), &Poly2::monomial(1.0, j, i)));
                    }
                }
            }
        }
    }
    RTBasis { shape, k, variant, normal, internal, nodes: unit.nodes }
}

/// Classical Raviart–Thomas degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RtDof {
    /// ∫_f q·n s^power dγ on edge `edge`.
    NormalMoment { edge: usize, power: u32 },
    /// ∫_K q·(x^i y^j, 0) (component 0) or q·(0, x^i y^j) (component 1).
    InteriorMoment { component: u8, i: u32, j: u32 },
}

pub fn rt_dofs(shape: RtShape, k: usize) -> Vec<RtDof> {
    let mut out = Vec::new();
    for edge in 0..shape.edges().len() {
        for power in 0..=k as u32 {
            out.push(RtDof::NormalMoment { edge, power });
        }
    }
    if k > 0 {
        let k32 = k as u32;
        match shape {
            RtShape::Triangle => {
                for component in 0..2 {
                    for i in 0..k32 {
                        for j in 0..k32 - i {
                            out.push(RtDof::InteriorMoment { component, i, j });
                        }
                    }
                }
            }
            RtShape::Quad => {
                for i in 0..k32 {
                    for j in 0..=k32 {
                        out.push(RtDof::InteriorMoment { component: 0, i, j });
                    }
                }
                for i in 0..=k32 {
                    for j in 0..k32 {
                        out.push(RtDof::InteriorMoment { component: 1, i, j });
                    }
                }
            }
        }
    }
    out
}

/// ∫ over the reference shape with a rule exact to `degree`.
pub fn reference_integral(shape: RtShape, degree: usize, f: impl Fn(Point2) -> f64) -> f64 {
    match shape {
        RtShape::Triangle => {
            let r = triangle_rule(degree);
            r.points.iter().zip(&r.weights).map(|(&(x, y), w)| w * f(Point2::new(x, y))).sum()
        }
        RtShape::Quad => {
            let g = gauss_legendre(degree / 2 + 1);
            let mut s = 0.0;
            for (zx, wx) in g.nodes.iter().zip(&g.weights) {
                for (zy, wy) in g.nodes.iter().zip(&g.weights) {
                    s += 0.25 * wx * wy * f(Point2::new(0.5 * (1.0 + zx), 0.5 * (1.0 + zy)));
                }
            }
            s
        }
    }
}

impl RtDof {
    pub fn apply(&self, shape: RtShape, k: usize, q: &PolyVec2) -> f64 {
        match *self {
            RtDof::NormalMoment { edge, power } => {
                let e = shape.edges()[edge];
                interval_integral(|s| q.eval(e.at(s)).dot(e.normal) * s.powi(power as i32), 0.0, e.length, k + 3)
            }
            RtDof::InteriorMoment { component, i, j } => reference_integral(shape, 3 * k + 4, |p| {
                let v = q.eval(p);
                let w = p.x.powi(i as i32) * p.y.powi(j as i32);
                if component == 0 {
                    v.x * w
                } else {
                    v.y * w
                }
            }),
        }
    }
}

/// True when `q` lies in P_k² ⊕ x·P̃_k (triangle) or P_{k+1,k} × P_{k,k+1} (square).
pub fn in_rt_space(shape: RtShape, k: usize, q: &PolyVec2, tol: f64) -> bool {
    let (qx, qy) = (q.x.pruned(tol), q.y.pruned(tol));
    let k32 = k as u32;
    match shape {
        RtShape::Quad => {
            qx.degree_x().map_or(true, |d| d <= k32 + 1)
                && qx.degree_y().map_or(true, |d| d <= k32)
                && qy.degree_x().map_or(true, |d| d <= k32)
                && qy.degree_y().map_or(true, |d| d <= k32 + 1)
        }
        RtShape::Triangle => {
            if qx.total_degree().map_or(false, |d| d > k32 + 1) || qy.total_degree().map_or(false, |d| d > k32 + 1) {
                return false;
            }
            // Top-degree parts must be (x r, y r) for one homogeneous r of degree k.
            let top = k32 + 1;
            if qx.coeff(0, top).abs() > tol || qy.coeff(top, 0).abs() > tol {
                return false;
            }
            (0..=k32).all(|a| {
                let b = k32 - a;
                (qx.coeff(a + 1, b) - qy.coeff(a, b + 1)).abs() <= tol
            })
        }
    }
}

/// True when div q lies in P_k (triangle) or Q_k (square).
pub fn div_in_space(shape: RtShape, k: usize, q: &PolyVec2, tol: f64) -> bool {
    let d = q.div().pruned(tol);
    let k32 = k as u32;
    match shape {
        RtShape::Triangle => d.total_degree().map_or(true, |t| t <= k32),
        RtShape::Quad => d.degree_x().map_or(true, |t| t <= k32) && d.degree_y().map_or(true, |t| t <= k32),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PiolaError {
    #[error("the element map is degenerate (|det J| = {0:e})")]
    DegenerateMap(f64),
    #[error("Newton inversion of the bilinear map did not converge")]
    NoInverse,
}

/// A map from a reference element onto a physical element.
#[derive(Debug, Clone, Copy)]
pub enum ElementMap {
    /// x = B x̂ + c, B given row-major.
    Affine { b: [[f64; 2]; 2], c: Point2 },
    /// Bilinear map of the reference square onto the quadrilateral with these vertices.
    Bilinear { vertices: [Point2; 4] },
}

impl ElementMap {
    /// The affine map taking the reference triangle onto (p0, p1, p2).
    pub fn triangle(p0: Point2, p1: Point2, p2: Point2) -> Self {
        let (u, v) = (p1 - p0, p2 - p0);
        ElementMap::Affine { b: [[u.x, v.x], [u.y, v.y]], c: p0 }
    }

    pub fn forward(&self, r: Point2) -> Point2 {
        match *self {
            ElementMap::Affine { b, c } => Point2::new(b[0][0] * r.x + b[0][1] * r.y + c.x, b[1][0] * r.x + b[1][1] * r.y + c.y),
            ElementMap::Bilinear { vertices: v } => {
                v[0] * ((1.0 - r.x) * (1.0 - r.y)) + v[1] * (r.x * (1.0 - r.y)) + v[2] * (r.x * r.y) + v[3] * ((1.0 - r.x) * r.y)
            }
        }
    }

    /// Jacobian matrix, row-major.
    pub fn jacobian(&self, r: Point2) -> [[f64; 2]; 2] {
        match *self {
            ElementMap::Affine { b, .. } => b,
            ElementMap::Bilinear { vertices: v } => {
                let dx = (v[1] - v[0]) * (1.0 - r.y) + (v[2] - v[3]) * r.y;
                let dy = (v[3] - v[0]) * (1.0 - r.x) + (v[2] - v[1]) * r.x;
                [[dx.x, dy.x], [dx.y, dy.y]]
            }
        }
    }

    pub fn det(&self, r: Point2) -> f64 {
        let j = self.jacobian(r);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    pub fn inverse(&self, x: Point2) -> Result<Point2, PiolaError> {
        let mut r = Point2::new(0.5, 0.5);
        for _ in 0..50 {
            let f = self.forward(r) - x;
            let j = self.jacobian(r);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-300 {
                return Err(PiolaError::DegenerateMap(det.abs()));
            }
            let step = Point2::new((j[1][1] * f.x - j[0][1] * f.y) / det, (-j[1][0] * f.x + j[0][0] * f.y) / det);
            r = r - step;
            if step.norm() < 1e-15 {
                return Ok(r);
            }
        }
        if (self.forward(r) - x).norm() < 1e-12 {
            Ok(r)
        } else {
            Err(PiolaError::NoInverse)
        }
    }
}

/// φ̃ = J φ ∘ F⁻¹ / |det J| for a reference field φ.
#[derive(Debug, Clone)]
pub struct PiolaField {
    pub map: ElementMap,
    pub field: PolyVec2,
}

pub fn piola(map: ElementMap, field: PolyVec2) -> Result<PiolaField, PiolaError> {
    let probes = [Point2::new(0., 0.), Point2::new(1., 0.), Point2::new(1., 1.), Point2::new(0., 1.), Point2::new(0.3, 0.3)];
    let scale = probes.iter().map(|&p| map.jacobian(p).iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))).fold(0.0, f64::max);
    for p in probes {
        let d = map.det(p);
        if d.abs() <= 1e-12 * scale * scale {
            return Err(PiolaError::DegenerateMap(d.abs()));
        }
    }
    Ok(PiolaField { map, field })
}

impl PiolaField {
    /// Value at the image F(r) of a reference point r.
    pub fn eval_ref(&self, r: Point2) -> Point2 {
        let j = self.map.jacobian(r);
        let det = (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs();
        let v = self.field.eval(r);
        Point2::new(j[0][0] * v.x + j[0][1] * v.y, j[1][0] * v.x + j[1][1] * v.y) * (1.0 / det)
    }

    pub fn eval(&self, x: Point2) -> Result<Point2, PiolaError> {
        Ok(self.eval_ref(self.map.inverse(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_arithmetic() {
        let p = Poly2::x() * Poly2::y() + Poly2::constant(2.0);
        assert_eq!(p.eval(Point2::new(3.0, 4.0)), 14.0);
        assert_eq!(p.dx(), Poly2::y());
        assert_eq!(p.total_degree(), Some(2));
        let q = Poly2::from_affine_univariate(&[1.0, 2.0, 3.0], true, 1.0, -1.0);
        // 1 + 2(1−x) + 3(1−x)² at x = 0.25
        let t: f64 = 0.75;
        assert!((q.eval(Point2::new(0.25, 9.0)) - (1.0 + 2.0 * t + 3.0 * t * t)).abs() < 1e-14);
    }

    #[test]
    fn counts() {
        for k in 0..4 {
            for shape in [RtShape::Triangle, RtShape::Quad] {
                let b = rt_basis(shape, k, RtVariant::Local);
                assert_eq!(b.len(), shape.dimension(k));
                assert_eq!(rt_dofs(shape, k).len(), shape.dimension(k));
            }
        }
    }

    #[test]
    fn lagrange_coefficients_interpolate() {
        let nodes = [0.1, 0.5, 0.8];
        for m in 0..3 {
            let c = lagrange_coeffs(&nodes, m);
            for (l, &s) in nodes.iter().enumerate() {
                let v: f64 = c.iter().enumerate().map(|(p, c)| c * s.powi(p as i32)).sum();
                assert!((v - if l == m { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn bilinear_inverse() {
        let m = ElementMap::Bilinear {
            vertices: [Point2::new(0., 0.), Point2::new(2., 0.2), Point2::new(2.2, 1.5), Point2::new(-0.1, 1.0)],
        };
        let r = Point2::new(0.3, 0.7);
        let back = m.inverse(m.forward(r)).unwrap();
        assert!(back.dist(r) < 1e-13);
    }
}
