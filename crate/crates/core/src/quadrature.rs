//! Quadrature on triangles: tensor Gauss rules collapsed onto the reference
//! triangle (exact for polynomials up to a requested degree) and a dense
//! barycentric lattice for non-polynomial integrands and `L^∞` sampling.

use std::sync::OnceLock;

use crate::geom::Point2;

/// Gauss–Legendre nodes and weights on `[0, 1]`, by Newton iteration on the
/// Legendre polynomial. Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]
        out.push(((x + 1.0) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A quadrature rule on the reference triangle conv{(0,0),(1,0),(0,1)};
/// weights sum to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    /// Largest polynomial total degree integrated exactly.
    pub exact_degree: usize,
}

/// Rule exact for polynomials of total degree `<= degree`, built by the Duffy
/// collapse `(u, v) -> (u, v(1-u))` of a tensor Gauss–Legendre grid. A
/// polynomial of total degree `d` pulls back to degree `d+1` in `u` and `d`
/// in `v` once the Jacobian `1-u` is included, so `n = ceil((d+2)/2)` points
/// per direction are exact.
pub fn triangle_rule(degree: usize) -> &'static TriangleRule {
    static CACHE: OnceLock<Vec<TriangleRule>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..=16).map(build_triangle_rule).collect());
    &cache[degree.min(16)]
}

fn build_triangle_rule(degree: usize) -> TriangleRule {
    let n = degree / 2 + 1;
    let gl = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for &(u, wu) in &gl {
        for &(v, wv) in &gl {
            points.push(Point2::new(u, v * (1.0 - u)));
            weights.push(wu * wv * (1.0 - u));
        }
    }
    TriangleRule { points, weights, exact_degree: degree }
}

/// Uniform barycentric sub-triangle lattice on the reference triangle:
/// `n²` cells, one sample at each cell centroid, each carrying the cell area.
/// Returns (points, cell_area).
pub fn barycentric_lattice(n: usize) -> (Vec<Point2>, f64) {
    let mut pts = Vec::with_capacity(n * n);
    let h = 1.0 / n as f64;
    for i in 0..n {
        for j in 0..(n - i) {
            let x = i as f64 * h;
            let y = j as f64 * h;
            // upward cell centroid
            pts.push(Point2::new(x + h / 3.0, y + h / 3.0));
            // downward companion, present except on the hypotenuse row
            if j < n - i - 1 {
                pts.push(Point2::new(x + 2.0 * h / 3.0, y + 2.0 * h / 3.0));
            }
        }
    }
    let cell_area = 0.5 * h * h;
    (pts, cell_area)
}
