//! Polynomial families used as projectors (DOF kernels) and constructors
//! (Poisson data), per-edge Lagrange sets, and space dimension formulas.
//!
//! Conventions: Hermite polynomials are the physicists' ones (H₀ = 1, H₁ = 2z),
//! Laguerre polynomials the standard ones (L₀ = 1, L₁ = 1 − z).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Edge, Point2, Polygon};
use crate::quadrature::gauss_legendre;

pub fn chebyshev(n: usize, z: f64) -> f64 {
    let (mut a, mut b) = (1.0, z);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        (a, b) = (b, 2.0 * z * b - a);
    }
    b
}

pub fn legendre(n: usize, z: f64) -> f64 {
    let (mut a, mut b) = (1.0, z);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let k = k as f64;
        (a, b) = (b, ((2.0 * k + 1.0) * z * b - k * a) / (k + 1.0));
    }
    b
}

pub fn hermite(n: usize, z: f64) -> f64 {
    let (mut a, mut b) = (1.0, 2.0 * z);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        (a, b) = (b, 2.0 * z * b - 2.0 * k as f64 * a);
    }
    b
}

pub fn laguerre(n: usize, z: f64) -> f64 {
    let (mut a, mut b) = (1.0, 1.0 - z);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let k = k as f64;
        (a, b) = (b, ((2.0 * k + 1.0 - z) * b - k * a) / (k + 1.0));
    }
    b
}

/// Shared tag set for boundary projectors and inner polynomials.
/// Integer codes 1–7 follow the listing order of the projector tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolyKind {
    CanonicalCenteredScaled,
    Chebyshev,
    Hermite,
    Legendre,
    Laguerre,
    CanonicalCenteredUnscaled,
    CanonicalUnscaled,
}

pub type BoundaryProjectorKind = PolyKind;
pub type InnerPolyKind = PolyKind;

#[derive(Debug, Error, PartialEq)]
pub enum FamilyError {
    #[error("unknown family code {0}")]
    UnknownKind(u8),
    #[error("invalid space: {0}")]
    InvalidSpec(String),
}

impl PolyKind {
    pub const ALL: [PolyKind; 7] = [
        PolyKind::CanonicalCenteredScaled,
        PolyKind::Chebyshev,
        PolyKind::Hermite,
        PolyKind::Legendre,
        PolyKind::Laguerre,
        PolyKind::CanonicalCenteredUnscaled,
        PolyKind::CanonicalUnscaled,
    ];

    pub fn from_code(code: u8) -> Result<Self, FamilyError> {
        Self::ALL.get((code as usize).wrapping_sub(1)).copied().ok_or(FamilyError::UnknownKind(code))
    }

    pub fn code(self) -> u8 {
        Self::ALL.iter().position(|&k| k == self).unwrap() as u8 + 1
    }

    /// Inner polynomials usable as Poisson sources, with their own 1–5 codes.
    pub const CONSTRUCTORS: [PolyKind; 5] = [
        PolyKind::Chebyshev,
        PolyKind::Hermite,
        PolyKind::Legendre,
        PolyKind::CanonicalCenteredScaled,
        PolyKind::CanonicalCenteredUnscaled,
    ];

    pub fn from_constructor_code(code: u8) -> Result<Self, FamilyError> {
        Self::CONSTRUCTORS.get((code as usize).wrapping_sub(1)).copied().ok_or(FamilyError::UnknownKind(code))
    }

    pub fn constructor_code(self) -> Option<u8> {
        Self::CONSTRUCTORS.iter().position(|&k| k == self).map(|p| p as u8 + 1)
    }
}

pub fn boundary_projector(kind: PolyKind, i: usize, s: f64, length: f64) -> f64 {
    let z = 2.0 * s / length - 1.0;
    match kind {
        PolyKind::CanonicalCenteredScaled => z.powi(i as i32),
        PolyKind::Chebyshev => chebyshev(i, z),
        PolyKind::Hermite => hermite(i, 4.0 * s / length - 2.0),
        PolyKind::Legendre => legendre(i, z),
        PolyKind::Laguerre => laguerre(i, 12.0 * s / length - 2.0),
        PolyKind::CanonicalCenteredUnscaled => (s - 0.5 * length).powi(i as i32),
        PolyKind::CanonicalUnscaled => s.powi(i as i32),
    }
}

/// The convex-hull statistics that centre and scale the inner families.
#[derive(Debug, Clone, Copy)]
pub struct HullFrame {
    pub barycenter: Point2,
    pub area: f64,
}

impl HullFrame {
    pub fn of(p: &Polygon) -> Self {
        HullFrame { barycenter: p.hull_barycenter, area: p.hull_area }
    }
}

fn inner_1d(kind: PolyKind, i: usize, t: f64, b: f64, area: f64) -> f64 {
    match kind {
        PolyKind::CanonicalCenteredScaled => (2.0 * (t - b) / area).powi(i as i32),
        PolyKind::Chebyshev => chebyshev(i, 2.0 * (t - b) / area),
        PolyKind::Hermite => hermite(i, 4.0 * (t - b) / area),
        PolyKind::Legendre => legendre(i, 2.0 * (t - b) / area),
        PolyKind::Laguerre => laguerre(i, 12.0 * (t - b + 4.0) / area),
        PolyKind::CanonicalCenteredUnscaled => (t - b).powi(i as i32),
        PolyKind::CanonicalUnscaled => t.powi(i as i32),
    }
}

pub fn inner_poly(kind: PolyKind, i: usize, j: usize, p: Point2, hull: HullFrame) -> f64 {
    inner_1d(kind, i, p.x, hull.barycenter.x, hull.area) * inner_1d(kind, j, p.y, hull.barycenter.y, hull.area)
}

/// All products q_{i,j} for i, j ≤ `deg`, laid out as `out[i * (deg + 1) + j]`.
pub fn inner_table(kind: PolyKind, deg: usize, p: Point2, hull: HullFrame, out: &mut [f64]) {
    let mut xs = [0.0; 16];
    let mut ys = [0.0; 16];
    assert!(deg < 16);
    for i in 0..=deg {
        xs[i] = inner_1d(kind, i, p.x, hull.barycenter.x, hull.area);
        ys[i] = inner_1d(kind, i, p.y, hull.barycenter.y, hull.area);
    }
    for i in 0..=deg {
        for j in 0..=deg {
            out[i * (deg + 1) + j] = xs[i] * ys[j];
        }
    }
}

/// Boundary data families for the Poisson problems, codes 1–3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryConstructor {
    Lagrange,
    CanonicalCenteredScaled,
    CanonicalCenteredUnscaled,
}

impl BoundaryConstructor {
    pub const ALL: [BoundaryConstructor; 3] =
        [BoundaryConstructor::Lagrange, BoundaryConstructor::CanonicalCenteredScaled, BoundaryConstructor::CanonicalCenteredUnscaled];

    pub fn from_code(code: u8) -> Result<Self, FamilyError> {
        Self::ALL.get((code as usize).wrapping_sub(1)).copied().ok_or(FamilyError::UnknownKind(code))
    }

    pub fn code(self) -> u8 {
        Self::ALL.iter().position(|&k| k == self).unwrap() as u8 + 1
    }

    /// The `j`-th (0-based) trace of order `k` on an edge of length `length`.
    pub fn trace(self, j: usize, k: usize, length: f64) -> Trace1D {
        match self {
            BoundaryConstructor::Lagrange => Trace1D::Lagrange(LagrangeSet::on_length(length, k), j),
            BoundaryConstructor::CanonicalCenteredScaled => Trace1D::Monomial { shift: length / 2.0, scale: 2.0 / length, power: j },
            BoundaryConstructor::CanonicalCenteredUnscaled => Trace1D::Monomial { shift: length / 2.0, scale: 1.0, power: j },
        }
    }
}

/// A polynomial of the arc parameter, used as Dirichlet data on one edge.
#[derive(Debug, Clone, PartialEq)]
pub enum Trace1D {
    Lagrange(LagrangeSet, usize),
    /// (scale·(s − shift))^power
    Monomial { shift: f64, scale: f64, power: usize },
}

impl Trace1D {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Trace1D::Lagrange(set, m) => set.eval(*m, s),
            Trace1D::Monomial { shift, scale, power } => (scale * (s - shift)).powi(*power as i32),
        }
    }
}

/// The k+1 Lagrange polynomials on Gauss–Legendre nodes of an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeSet {
    pub length: f64,
    pub nodes: Vec<f64>,
}

impl LagrangeSet {
    pub fn on_length(length: f64, k: usize) -> Self {
        let rule = gauss_legendre(k + 1);
        let nodes = rule.nodes.iter().map(|&z| 0.5 * length * (1.0 + z)).collect();
        LagrangeSet { length, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, m: usize, s: f64) -> f64 {
        let sm = self.nodes[m];
        self.nodes.iter().enumerate().filter(|&(l, _)| l != m).map(|(_, &sl)| (s - sl) / (sm - sl)).product()
    }
}

pub fn lagrange_set(e: &Edge, k: usize) -> LagrangeSet {
    LagrangeSet::on_length(e.length, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceSpec {
    /// P_k in d variables.
    Pk { k: usize, d: usize },
    /// Q_k in d variables.
    Qk { k: usize, d: usize },
    /// P_{k1,k2}: degree ≤ k1 in x and ≤ k2 in y.
    Pk1k2 { k1: usize, k2: usize },
    /// R_k(∂K) = n·dim P_k(f) on the faces of a d-polytope with n faces.
    RkBoundary { k: usize, d: usize, n: usize },
    /// T_k(∂K) = n·dim Q_k(f).
    TkBoundary { k: usize, d: usize, n: usize },
    RtSimplex { k: usize, d: usize },
    RtCube { k: usize, d: usize },
    HkGeneral { n: usize, d: usize, l1: i64, l2: i64, m1: i64, m2: i64 },
    HkClassical { n: usize, k: usize },
    HkReduced { n: usize, k: usize },
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// dim Q_m in d variables, with Q_{-1} = {0}.
fn q_dim(m: i64, d: usize) -> usize {
    if m < 0 {
        0
    } else {
        (m as usize + 1).pow(d as u32)
    }
}

pub fn space_dimension(spec: SpaceSpec) -> Result<usize, FamilyError> {
    Ok(match spec {
        SpaceSpec::Pk { k, d } => binom(k + d, k),
        SpaceSpec::Qk { k, d } => (k + 1).pow(d as u32),
        SpaceSpec::Pk1k2 { k1, k2 } => (k1 + 1) * (k2 + 1),
        SpaceSpec::RkBoundary { k, d, n } => n * binom(k + d - 1, k),
        SpaceSpec::TkBoundary { k, d, n } => n * (k + 1).pow(d as u32 - 1),
        SpaceSpec::RtSimplex { k, d } => d * binom(k + d, k) + binom(k + d - 1, k),
        SpaceSpec::RtCube { k, d } => d * (k + 2) * (k + 1).pow(d as u32 - 1),
        SpaceSpec::HkGeneral { n, d, l1, l2, m1, m2 } => {
            if m1 < -1 || m2 < -1 || l2 < -1 || !(-1..=0).contains(&l1) {
                return Err(FamilyError::InvalidSpec(format!("l1={l1} l2={l2} m1={m1} m2={m2}")));
            }
            let dm = d as u32 - 1;
            let face = d * q_dim(l1, 1).pow(dm) + q_dim(l2, 1).pow(dm);
            let q_m2 = q_dim(m2, d);
            let q_m2_minus = if m2 >= 1 { q_dim(m2 - 1, d) } else { 0 };
            // (m2+1)^d − m2^d, the homogeneous part of Q_{m2}
            let homogeneous = q_m2 - q_m2_minus;
            n * face + d * q_dim(m1, d) + homogeneous
        }
        SpaceSpec::HkClassical { n, k } => n * (k + 3) + internal_count(k),
        SpaceSpec::HkReduced { n, k } => n * (k + 1) + internal_count(k),
    })
}

/// Number of interior functions of the Poisson-based spaces.
pub fn internal_count(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        2 * k * (k + 1) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrences_low_orders() {
        let z: f64 = 0.37;
        assert!((chebyshev(3, z) - (4.0 * z.powi(3) - 3.0 * z)).abs() < 1e-14);
        assert!((legendre(2, z) - 0.5 * (3.0 * z * z - 1.0)).abs() < 1e-14);
        assert!((hermite(2, 2.0) - 14.0).abs() < 1e-14);
        assert!((laguerre(2, z) - 0.5 * (z * z - 4.0 * z + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn projector_examples() {
        assert_eq!(boundary_projector(PolyKind::CanonicalCenteredScaled, 1, 0.5, 1.0), 0.0);
        assert!((boundary_projector(PolyKind::Legendre, 2, 2.0, 2.0) - 1.0).abs() < 1e-15);
        assert!((boundary_projector(PolyKind::Hermite, 2, 3.0, 3.0) - 14.0).abs() < 1e-13);
    }

    #[test]
    fn codes_round_trip() {
        for k in PolyKind::ALL {
            assert_eq!(PolyKind::from_code(k.code()).unwrap(), k);
        }
        assert_eq!(PolyKind::from_constructor_code(2).unwrap(), PolyKind::Hermite);
        assert!(PolyKind::from_code(0).is_err() && PolyKind::from_code(8).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), 10);
        assert_eq!(binom(7, 3), 35);
        assert_eq!(binom(3, 0), 1);
    }
}
