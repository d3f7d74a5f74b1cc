//! Gauss–Legendre rules, edge integrals and triangle rules.

use crate::geometry::{Edge, Point2};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule1D {
    /// Nodes on [−1, 1], ascending.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Nodes are the roots of P_n found by Newton iteration from Chebyshev-like guesses.
pub fn gauss_legendre(npoints: usize) -> QuadRule1D {
    assert!(npoints >= 1, "a Gauss–Legendre rule needs at least one point");
    let n = npoints;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 1..n {
                let kf = k as f64;
                (p0, p1) = (p1, ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0));
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadRule1D { nodes, weights }
}

/// ∫₀^L f(s) ds with an affinely mapped `npoints` Gauss–Legendre rule.
pub fn edge_integral(f: impl Fn(f64) -> f64, e: &Edge, npoints: usize) -> f64 {
    interval_integral(f, 0.0, e.length, npoints)
}

pub fn interval_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, npoints: usize) -> f64 {
    let rule = gauss_legendre(npoints);
    let h = 0.5 * (b - a);
    rule.nodes.iter().zip(&rule.weights).map(|(&z, &w)| w * h * f(a + h * (1.0 + z))).sum()
}

/// Points of a triangle rule on the reference triangle (0,0),(1,0),(0,1).
#[derive(Debug, Clone)]
pub struct QuadRule2D {
    /// Reference coordinates (ξ, η).
    pub points: Vec<(f64, f64)>,
    /// Weights summing to 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Collapsed (Duffy) tensor Gauss rule, exact for total degree `degree`.
pub fn triangle_rule(degree: usize) -> QuadRule2D {
    // The collapse adds one degree in the first direction.
    let n = (degree + 2).div_ceil(2).max(1);
    let g = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (zu, wu) in g.nodes.iter().zip(&g.weights) {
        let u = 0.5 * (1.0 + zu);
        for (zv, wv) in g.nodes.iter().zip(&g.weights) {
            let v = 0.5 * (1.0 + zv);
            points.push((u, v * (1.0 - u)));
            weights.push(0.25 * wu * wv * (1.0 - u));
        }
    }
    QuadRule2D { points, weights, degree }
}

/// Physical points and weights of a rule mapped onto triangle (a, b, c).
pub fn map_rule(rule: &QuadRule2D, a: Point2, b: Point2, c: Point2) -> impl Iterator<Item = (Point2, f64)> + '_ {
    let jac = ((b - a).cross(c - a)).abs();
    rule.points.iter().zip(&rule.weights).map(move |(&(xi, eta), &w)| (a + (b - a) * xi + (c - a) * eta, w * jac))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules() {
        let r1 = gauss_legendre(1);
        assert_eq!(r1.nodes, vec![0.0]);
        assert!((r1.weights[0] - 2.0).abs() < 1e-15);
        let r2 = gauss_legendre(2);
        assert!((r2.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((r2.weights[0] - 1.0).abs() < 1e-15);
        let r3 = gauss_legendre(3);
        let z4: f64 = r3.nodes.iter().zip(&r3.weights).map(|(z, w)| w * z.powi(4)).sum();
        assert!((z4 - 0.4).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_and_symmetry() {
        for n in 1..30 {
            let r = gauss_legendre(n);
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            for i in 0..n {
                assert!((r.nodes[i] + r.nodes[n - 1 - i]).abs() < 1e-15);
            }
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn triangle_rule_monomials() {
        // ∫_T ξ^i η^j = i! j! / (i + j + 2)!
        let fact = |n: u64| (1..=n).product::<u64>().max(1) as f64;
        for deg in 0..10 {
            let r = triangle_rule(deg);
            for i in 0..=deg {
                let j = deg - i;
                let q: f64 = r.points.iter().zip(&r.weights).map(|(&(x, y), w)| w * x.powi(i as i32) * y.powi(j as i32)).sum();
                let exact = fact(i as u64) * fact(j as u64) / fact((i + j + 2) as u64);
                assert!((q - exact).abs() < 1e-14 * exact.max(1e-3), "deg {deg} i {i}");
            }
        }
    }
}
