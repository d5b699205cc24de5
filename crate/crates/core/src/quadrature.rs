//! Gauss rules on edges and collapsed (conical product) Gauss rules on triangles.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mesh::ElementGeometry;
use crate::Vec2;

/// Highest supported total degree for triangle rules.
pub const MAX_TRIANGLE_DEGREE: usize = 20;
/// Highest supported degree for edge rules.
pub const MAX_EDGE_DEGREE: usize = 21;

/// Rule on the reference triangle in barycentric coordinates; weights sum to one.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Rule on `[0, 1]`; weights sum to one.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub degree: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Ascending order.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn build_edge_rule(degree: usize) -> EdgeRule {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    EdgeRule {
        degree,
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
    }
}

fn build_triangle_rule(degree: usize) -> TriangleRule {
    // Duffy map (u, v) -> (u, v (1 - u)) with Jacobian (1 - u): the u-direction
    // integrates a polynomial of degree `degree + 1`.
    let nu = (degree + 1) / 2 + 1;
    let nv = degree / 2 + 1;
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (a, wa) in xu.iter().zip(&wu) {
        let u = 0.5 * (a + 1.0);
        for (b, wb) in xv.iter().zip(&wv) {
            let v = 0.5 * (b + 1.0);
            let xi = u;
            let eta = v * (1.0 - u);
            points.push([1.0 - xi - eta, xi, eta]);
            // Reference area 1/2 scaled to weight sum 1.
            weights.push(2.0 * 0.25 * wa * wb * (1.0 - u));
        }
    }
    TriangleRule {
        degree,
        points,
        weights,
    }
}

/// Triangle rule exact for polynomials of total degree `degree` (1..=20).
pub fn tri_rule(degree: usize) -> Result<&'static TriangleRule> {
    static RULES: [OnceLock<TriangleRule>; MAX_TRIANGLE_DEGREE + 1] =
        [const { OnceLock::new() }; MAX_TRIANGLE_DEGREE + 1];
    if !(1..=MAX_TRIANGLE_DEGREE).contains(&degree) {
        return Err(Error::UnsupportedDegree(degree));
    }
    Ok(RULES[degree].get_or_init(|| build_triangle_rule(degree)))
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `degree` (0..=21).
pub fn edge_rule(degree: usize) -> Result<&'static EdgeRule> {
    static RULES: [OnceLock<EdgeRule>; MAX_EDGE_DEGREE + 1] =
        [const { OnceLock::new() }; MAX_EDGE_DEGREE + 1];
    if degree > MAX_EDGE_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    Ok(RULES[degree].get_or_init(|| build_edge_rule(degree)))
}

impl TriangleRule {
    /// Physical points and weights (scaled by the element area).
    pub fn on_element<'a>(
        &'a self,
        g: &'a ElementGeometry,
    ) -> impl Iterator<Item = (Vec2, f64)> + 'a {
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(b, w)| (g.point(*b), w * g.area))
    }

    pub fn integrate<F: FnMut(Vec2) -> f64>(&self, g: &ElementGeometry, mut f: F) -> f64 {
        self.on_element(g).map(|(x, w)| w * f(x)).sum()
    }
}

impl EdgeRule {
    /// Physical points and weights (scaled by the edge length) on segment `a`-`b`.
    pub fn on_segment(&self, a: Vec2, b: Vec2) -> impl Iterator<Item = (Vec2, f64)> + '_ {
        let len = (b - a).norm();
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&s, &w)| (a + (b - a) * s, w * len))
    }

    pub fn integrate<F: FnMut(Vec2) -> f64>(&self, a: Vec2, b: Vec2, mut f: F) -> f64 {
        self.on_segment(a, b).map(|(x, w)| w * f(x)).sum()
    }
}
