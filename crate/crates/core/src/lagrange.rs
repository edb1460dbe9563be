//! Lagrange interpolation of degree `m-1` on triangles and the local/global
//! `L^p` interpolation errors.
//!
//! Interpolation solves the node system in the reference frame of the
//! triangle, which keeps the linear algebra well conditioned on the very
//! thin triangles produced by anisotropic optimisation.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::forms::HomogeneousForm;
use crate::geom::{LinearMap2, Point2, Triangle};
use crate::mesh::Mesh;
use crate::quadrature::{barycentric_lattice, triangle_rule};

#[derive(Debug, Error)]
pub enum LagrangeError {
    #[error("degenerate triangle (area {0:.3e})")]
    DegenerateTriangle(f64),
    #[error("interpolation degree parameter must satisfy m >= 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("p must lie in [1, ∞), or be infinite")]
    InvalidExponent,
    #[error("mesh is empty")]
    EmptyMesh,
}

/// Norm exponent for error measurement: a finite `p >= 1` or `∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lp {
    Finite(f64),
    Infinity,
}

impl Lp {
    pub fn finite(p: f64) -> Self {
        Lp::Finite(p)
    }

    /// `1/p`, with the convention `1/∞ = 0`.
    pub fn recip(self) -> f64 {
        match self {
            Lp::Finite(p) => 1.0 / p,
            Lp::Infinity => 0.0,
        }
    }

    pub fn validate(self) -> Result<Self, LagrangeError> {
        match self {
            Lp::Finite(p) if p >= 1.0 && p.is_finite() => Ok(self),
            Lp::Infinity => Ok(self),
            _ => Err(LagrangeError::InvalidExponent),
        }
    }
}

impl std::fmt::Display for Lp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lp::Finite(p) => write!(f, "{p}"),
            Lp::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Lp {
    type Err = LagrangeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "Inf" | "INF" | "oo" => Ok(Lp::Infinity),
            other => {
                let p: f64 = other.parse().map_err(|_| LagrangeError::InvalidExponent)?;
                Lp::Finite(p).validate()
            }
        }
    }
}

/// A scalar function on the plane, optionally carrying analytic derivative
/// data: `derivative_jet(z, m)` returns the binomially-weighted coefficients
/// of `d^m f_z / m!` (entry `i` is `∂^m f/(∂x^{m-i} ∂y^i) / m!`).
pub trait ScalarField: Sync {
    fn value(&self, p: Point2) -> f64;

    fn derivative_jet(&self, _p: Point2, _m: usize) -> Option<Vec<f64>> {
        None
    }
}

/// Wrap a plain closure as a [`ScalarField`] without derivative data.
pub struct FnField<F: Fn(Point2) -> f64 + Sync>(pub F);

impl<F: Fn(Point2) -> f64 + Sync> ScalarField for FnField<F> {
    fn value(&self, p: Point2) -> f64 {
        (self.0)(p)
    }
}

/// A homogeneous form is a scalar field whose top-degree jet is itself.
impl ScalarField for HomogeneousForm {
    fn value(&self, p: Point2) -> f64 {
        self.eval(p)
    }

    fn derivative_jet(&self, _p: Point2, m: usize) -> Option<Vec<f64>> {
        (m == self.degree()).then(|| self.binomial_weights())
    }
}

/// Central finite differences for the binomially-weighted jet of degree
/// `m ∈ {2, 3}`, accuracy `O(step²)`.
pub fn numeric_jet(f: &dyn ScalarField, z: Point2, m: usize, step: f64) -> Option<Vec<f64>> {
    let h = step;
    let v = |dx: f64, dy: f64| f.value(Point2::new(z.x + dx * h, z.y + dy * h));
    match m {
        2 => {
            let fxx = (v(1.0, 0.0) - 2.0 * v(0.0, 0.0) + v(-1.0, 0.0)) / (h * h);
            let fyy = (v(0.0, 1.0) - 2.0 * v(0.0, 0.0) + v(0.0, -1.0)) / (h * h);
            let fxy = (v(1.0, 1.0) - v(1.0, -1.0) - v(-1.0, 1.0) + v(-1.0, -1.0)) / (4.0 * h * h);
            Some(vec![fxx / 2.0, fxy / 2.0, fyy / 2.0])
        }
        3 => {
            let fxxx = (v(2.0, 0.0) - 2.0 * v(1.0, 0.0) + 2.0 * v(-1.0, 0.0) - v(-2.0, 0.0))
                / (2.0 * h * h * h);
            let fyyy = (v(0.0, 2.0) - 2.0 * v(0.0, 1.0) + 2.0 * v(0.0, -1.0) - v(0.0, -2.0))
                / (2.0 * h * h * h);
            let fxxy = (v(1.0, 1.0) - 2.0 * v(0.0, 1.0) + v(-1.0, 1.0) - v(1.0, -1.0)
                + 2.0 * v(0.0, -1.0)
                - v(-1.0, -1.0))
                / (2.0 * h * h * h);
            let fxyy = (v(1.0, 1.0) - 2.0 * v(1.0, 0.0) + v(1.0, -1.0) - v(-1.0, 1.0)
                + 2.0 * v(-1.0, 0.0)
                - v(-1.0, -1.0))
                / (2.0 * h * h * h);
            Some(vec![fxxx / 6.0, fxxy / 6.0, fxyy / 6.0, fyyy / 6.0])
        }
        _ => None,
    }
}

/// Jet with analytic callback when available and finite differences otherwise.
pub fn jet_or_numeric(f: &dyn ScalarField, z: Point2, m: usize, step: f64) -> Option<Vec<f64>> {
    f.derivative_jet(z, m).or_else(|| numeric_jet(f, z, m, step))
}

/// Dense bivariate polynomial of bounded total degree, coefficients on the
/// monomials `x^a y^b`, `a + b <= deg`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial2 {
    deg: usize,
    /// Coefficient of `x^a y^b` at index [`Self::idx`]`(a, b)`.
    coeffs: Vec<f64>,
}

impl Polynomial2 {
    pub fn zero(deg: usize) -> Self {
        let n = (deg + 1) * (deg + 2) / 2;
        Self { deg, coeffs: vec![0.0; n] }
    }

    pub fn degree(&self) -> usize {
        self.deg
    }

    fn idx(a: usize, b: usize) -> usize {
        // terms ordered by total degree, then by power of y
        let d = a + b;
        d * (d + 1) / 2 + b
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        self.coeffs[Self::idx(a, b)]
    }

    pub fn set_coeff(&mut self, a: usize, b: usize, v: f64) {
        let i = Self::idx(a, b);
        self.coeffs[i] = v;
    }

    pub fn eval(&self, p: Point2) -> f64 {
        let mut acc = 0.0;
        for d in 0..=self.deg {
            for b in 0..=d {
                let c = self.coeffs[d * (d + 1) / 2 + b];
                if c != 0.0 {
                    acc += c * p.x.powi((d - b) as i32) * p.y.powi(b as i32);
                }
            }
        }
        acc
    }

    /// Terms `(a, b, coeff)` with nonzero coefficient.
    pub fn terms(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for d in 0..=self.deg {
            for b in 0..=d {
                let c = self.coeffs[d * (d + 1) / 2 + b];
                if c != 0.0 {
                    out.push((d - b, b, c));
                }
            }
        }
        out
    }

    fn add_scaled(&mut self, other: &Polynomial2, s: f64) {
        for (a, b, c) in other.terms() {
            let i = Self::idx(a, b);
            self.coeffs[i] += s * c;
        }
    }

    fn mul(&self, other: &Polynomial2) -> Polynomial2 {
        let mut out = Polynomial2::zero(self.deg + other.deg);
        for (a1, b1, c1) in self.terms() {
            for (a2, b2, c2) in other.terms() {
                let i = Self::idx(a1 + a2, b1 + b2);
                out.coeffs[i] += c1 * c2;
            }
        }
        out
    }

    /// Substitute the affine map `p -> (l.apply(p) + t)` into the polynomial,
    /// i.e. return `q` with `q(p) = self(l p + t)`.
    pub fn compose_affine(&self, l: &LinearMap2, t: Point2) -> Polynomial2 {
        let mut x_form = Polynomial2::zero(1);
        x_form.set_coeff(0, 0, t.x);
        x_form.set_coeff(1, 0, l.m[0][0]);
        x_form.set_coeff(0, 1, l.m[0][1]);
        let mut y_form = Polynomial2::zero(1);
        y_form.set_coeff(0, 0, t.y);
        y_form.set_coeff(1, 0, l.m[1][0]);
        y_form.set_coeff(0, 1, l.m[1][1]);

        let mut one = Polynomial2::zero(0);
        one.set_coeff(0, 0, 1.0);
        let mut x_pows = vec![one.clone()];
        let mut y_pows = vec![one];
        for k in 1..=self.deg {
            x_pows.push(x_pows[k - 1].mul(&x_form));
            y_pows.push(y_pows[k - 1].mul(&y_form));
        }
        let mut out = Polynomial2::zero(self.deg);
        for (a, b, c) in self.terms() {
            let term = x_pows[a].mul(&y_pows[b]);
            // term has nominal degree a+b <= deg
            let mut promoted = Polynomial2::zero(self.deg);
            promoted.add_scaled(&term, 1.0);
            out.add_scaled(&promoted, c);
        }
        out
    }
}

/// Reference-frame interpolation data for one degree parameter `m`:
/// Lagrange nodes of the reference triangle and the inverse Vandermonde
/// matrix in the monomial basis of `P_{m-1}`.
struct InterpEngine {
    nodes: Vec<Point2>,
    inv_vandermonde: DMatrix<f64>,
    monomials: Vec<(usize, usize)>,
}

const MAX_DEGREE_PARAM: usize = 12;

fn engine(m: usize) -> &'static InterpEngine {
    static CACHE: [OnceLock<InterpEngine>; MAX_DEGREE_PARAM + 1] =
        [const { OnceLock::new() }; MAX_DEGREE_PARAM + 1];
    assert!(
        (2..=MAX_DEGREE_PARAM).contains(&m),
        "interpolation degree parameter m={m} outside supported range"
    );
    CACHE[m].get_or_init(|| {
        let reference = Triangle::new(
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        );
        let nodes = lagrange_nodes(&reference, m).expect("reference triangle is non-degenerate");
        let mut monomials = Vec::new();
        for d in 0..m {
            for b in 0..=d {
                monomials.push((d - b, b));
            }
        }
        let n = nodes.len();
        assert_eq!(n, monomials.len());
        let v = DMatrix::from_fn(n, n, |r, c| {
            let (a, b) = monomials[c];
            nodes[r].x.powi(a as i32) * nodes[r].y.powi(b as i32)
        });
        let inv = v.try_inverse().expect("reference Vandermonde is invertible");
        InterpEngine { nodes, inv_vandermonde: inv, monomials }
    })
}

/// The `m(m+1)/2` Lagrange nodes of `T`: barycentric coordinates on the
/// uniform grid of step `1/(m-1)`, ordered lexicographically by the
/// barycentric multi-index.
pub fn lagrange_nodes(t: &Triangle, m: usize) -> Result<Vec<Point2>, LagrangeError> {
    if m < 2 {
        return Err(LagrangeError::DegreeTooSmall(m));
    }
    if t.area() <= 0.0 {
        return Err(LagrangeError::DegenerateTriangle(t.area()));
    }
    let n = m - 1;
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..=n {
        for j in 0..=(n - i) {
            let k = n - i - j;
            out.push(t.bary_point(
                i as f64 / n as f64,
                j as f64 / n as f64,
                k as f64 / n as f64,
            ));
        }
    }
    Ok(out)
}

/// Monomial coefficients (in the reference frame) of the interpolant of `v`
/// on `T`, plus the affine map from the reference triangle.
fn interpolate_ref(
    v: &dyn ScalarField,
    t: &Triangle,
    m: usize,
) -> Result<(Vec<f64>, Point2, LinearMap2), LagrangeError> {
    if m < 2 {
        return Err(LagrangeError::DegreeTooSmall(m));
    }
    let (origin, jac) = t.from_reference();
    if jac.det().abs() < 1e-300 {
        return Err(LagrangeError::DegenerateTriangle(t.area()));
    }
    let eng = engine(m);
    let vals = DMatrix::from_fn(eng.nodes.len(), 1, |r, _| {
        v.value(origin + jac.apply(eng.nodes[r]))
    });
    let coeffs = &eng.inv_vandermonde * vals;
    Ok((coeffs.iter().copied().collect(), origin, jac))
}

/// Lagrange interpolant of `v` on `T` in `P_{m-1}`, expressed in world
/// coordinates.
pub fn interpolate(
    v: &dyn ScalarField,
    t: &Triangle,
    m: usize,
) -> Result<Polynomial2, LagrangeError> {
    let (coeffs, origin, jac) = interpolate_ref(v, t, m)?;
    let eng = engine(m);
    let mut q_ref = Polynomial2::zero(m - 1);
    for ((a, b), c) in eng.monomials.iter().zip(&coeffs) {
        q_ref.set_coeff(*a, *b, *c);
    }
    let inv = jac.inverse().ok_or(LagrangeError::DegenerateTriangle(t.area()))?;
    // q_world(P) = q_ref(J⁻¹ (P - origin))
    Ok(q_ref.compose_affine(&inv, inv.apply(-origin)))
}

/// Density of the barycentric sampling lattice used for `p ∉ {even}` norms.
pub const DEFAULT_LATTICE: usize = 64;

/// Local interpolation error `‖v - I_{m,T} v‖_{L^p(T)}`.
pub fn local_error(
    v: &dyn ScalarField,
    t: &Triangle,
    m: usize,
    p: Lp,
) -> Result<f64, LagrangeError> {
    local_error_with_lattice(v, t, m, p, DEFAULT_LATTICE)
}

/// [`local_error`] with explicit lattice density for the sampled norms.
pub fn local_error_with_lattice(
    v: &dyn ScalarField,
    t: &Triangle,
    m: usize,
    p: Lp,
    lattice: usize,
) -> Result<f64, LagrangeError> {
    p.validate()?;
    let (coeffs, origin, jac) = interpolate_ref(v, t, m)?;
    let eng = engine(m);
    let q_ref = |u: Point2| -> f64 {
        let mut acc = 0.0;
        for ((a, b), c) in eng.monomials.iter().zip(&coeffs) {
            acc += c * u.x.powi(*a as i32) * u.y.powi(*b as i32);
        }
        acc
    };
    let residual = |u: Point2| v.value(origin + jac.apply(u)) - q_ref(u);
    let jac_det = jac.det().abs();

    match p {
        Lp::Finite(pv) if pv.fract() == 0.0 && (pv as usize) % 2 == 0 && pv as usize * m <= 16 => {
            // exact Gauss quadrature: the residual of a degree-m polynomial
            // integrand has degree m, its p-th power degree p·m
            let rule = triangle_rule(pv as usize * m + 2);
            let mut acc = 0.0;
            for (pt, w) in rule.points.iter().zip(&rule.weights) {
                acc += w * residual(*pt).powi(pv as i32);
            }
            Ok((acc * jac_det).powf(1.0 / pv))
        }
        Lp::Finite(pv) => {
            let (pts, cell) = barycentric_lattice(lattice);
            let mut acc = 0.0;
            for pt in &pts {
                acc += cell * residual(*pt).abs().powf(pv);
            }
            Ok((acc * jac_det).powf(1.0 / pv))
        }
        Lp::Infinity => {
            let (pts, _) = barycentric_lattice(lattice);
            let mut best: f64 = 0.0;
            for pt in &pts {
                best = best.max(residual(*pt).abs());
            }
            // extrema often sit on the boundary: scan the grid nodes too
            let h = 1.0 / lattice as f64;
            for i in 0..=lattice {
                for j in 0..=(lattice - i) {
                    let p = Point2::new(i as f64 * h, j as f64 * h);
                    best = best.max(residual(p).abs());
                }
            }
            Ok(best)
        }
    }
}

/// Global interpolation error over a conforming mesh: the `ℓ^p` aggregation
/// of local errors (maximum for `p = ∞`). Per-triangle errors are evaluated
/// in parallel and combined in mesh order.
pub fn global_error(
    v: &dyn ScalarField,
    mesh: &Mesh,
    m: usize,
    p: Lp,
) -> Result<f64, LagrangeError> {
    p.validate()?;
    if mesh.triangles.is_empty() {
        return Err(LagrangeError::EmptyMesh);
    }
    let locals: Vec<Result<f64, LagrangeError>> = mesh
        .triangles
        .par_iter()
        .map(|tri| local_error(v, &mesh.triangle(tri), m, p))
        .collect();
    let mut vals = Vec::with_capacity(locals.len());
    for r in locals {
        vals.push(r?);
    }
    Ok(match p {
        Lp::Finite(pv) => vals.iter().map(|e| e.powf(pv)).sum::<f64>().powf(1.0 / pv),
        Lp::Infinity => vals.into_iter().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::HomogeneousForm;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn form(c: &[f64]) -> HomogeneousForm {
        HomogeneousForm::new(c.to_vec()).unwrap()
    }

    fn random_triangle(rng: &mut impl Rng) -> Triangle {
        loop {
            let t = Triangle::new(
                Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            );
            if t.area() > 0.05 {
                return t;
            }
        }
    }

    #[test]
    fn node_counts_and_positions() {
        let t = Triangle::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0));
        let n2 = lagrange_nodes(&t, 2).unwrap();
        assert_eq!(n2.len(), 3);
        let n3 = lagrange_nodes(&t, 3).unwrap();
        assert_eq!(n3.len(), 6);
        // vertices and edge midpoints
        for expect in [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.0, 0.5),
            Point2::new(0.5, 0.5),
        ] {
            assert!(n3.iter().any(|p| p.dist(expect) < 1e-12));
        }
        assert_eq!(lagrange_nodes(&t, 4).unwrap().len(), 10);
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 2..=4 {
            let t = random_triangle(&mut rng);
            // v in P_{m-1}: built from a random polynomial
            let mut poly = Polynomial2::zero(m - 1);
            for d in 0..m {
                for b in 0..=d {
                    poly.set_coeff(d - b, b, rng.gen_range(-1.0..1.0));
                }
            }
            let field = FnField(|p: Point2| poly.eval(p));
            let q = interpolate(&field, &t, m).unwrap();
            for _ in 0..20 {
                let p = Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                assert!((q.eval(p) - poly.eval(p)).abs() < 1e-9);
            }
            let e = local_error(&field, &t, m, Lp::Finite(2.0)).unwrap();
            assert!(e < 1e-10);
        }
    }

    #[test]
    fn interpolation_matches_at_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = random_triangle(&mut rng);
        let v = FnField(|p: Point2| p.x.powi(3));
        let q = interpolate(&v, &t, 3).unwrap();
        for node in lagrange_nodes(&t, 3).unwrap() {
            assert!((q.eval(node) - node.x.powi(3)).abs() < 1e-10);
        }
    }

    #[test]
    fn error_translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let m = rng.gen_range(2..=4);
            let pi = form(&(0..=m).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            let t = random_triangle(&mut rng);
            let h = Point2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let a = local_error(&pi, &t, m, Lp::Finite(2.0)).unwrap();
            let b = local_error(&pi, &t.translate(h), m, Lp::Finite(2.0)).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.max(b).max(1e-30));
        }
    }

    #[test]
    fn error_scaling_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for p in [Lp::Finite(1.0), Lp::Finite(2.0), Lp::Infinity] {
            for _ in 0..5 {
                let m = rng.gen_range(2..=4);
                let pi = form(&(0..=m).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
                let t = random_triangle(&mut rng);
                let scale = 2.0;
                let a = local_error(&pi, &t.scaled(scale), m, p).unwrap();
                let b = local_error(&pi, &t, m, p).unwrap();
                let factor = scale.powf(m as f64 + 2.0 * p.recip());
                assert!(
                    (a - factor * b).abs() <= 1e-8 * (a.abs() + factor * b.abs()).max(1e-12),
                    "p={p:?} m={m}: {a} vs {b} * {factor}"
                );
            }
        }
    }

    #[test]
    fn error_change_of_variables() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = rng.gen_range(2..=4);
            let pi = form(&(0..=m).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            let t = random_triangle(&mut rng);
            let phi = LinearMap2::new(
                rng.gen_range(0.5..1.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(0.5..1.5),
            );
            let p = Lp::Finite(2.0);
            let lhs = local_error(&pi.compose(&phi), &t, m, p).unwrap();
            let rhs = phi.det().abs().powf(-p.recip()) * local_error(&pi, &t.map(&phi), m, p).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8 * (lhs + rhs).max(1e-12));
        }
    }

    #[test]
    fn interpolation_commutes_with_linear_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = 3;
        let v = FnField(|p: Point2| (p.x + 0.3 * p.y).powi(4) - p.y.powi(2));
        for _ in 0..5 {
            let t = random_triangle(&mut rng);
            let phi = LinearMap2::new(1.2, 0.4, -0.3, 0.9);
            let vphi = FnField(|p: Point2| v.value(phi.apply(p)));
            let lhs = interpolate(&vphi, &t, m).unwrap();
            let rhs = interpolate(&v, &t.map(&phi), m).unwrap();
            for _ in 0..50 {
                let p = Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                assert!((lhs.eval(p) - rhs.eval(phi.apply(p))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quadrature_self_consistency() {
        // doubling the lattice changes sampled errors by < 0.1%
        let t = Triangle::new(Point2::new(0.0, 0.0), Point2::new(1.3, 0.1), Point2::new(0.2, 0.9));
        let v = FnField(|p: Point2| (2.0 * p.x).sin() * (1.5 * p.y).cos());
        for p in [Lp::Finite(1.0), Lp::Infinity] {
            let a = local_error_with_lattice(&v, &t, 3, p, 64).unwrap();
            let b = local_error_with_lattice(&v, &t, 3, p, 128).unwrap();
            assert!((a - b).abs() < 1e-3 * a.abs(), "p={p:?}: {a} vs {b}");
        }
    }

    #[test]
    fn numeric_jet_matches_analytic() {
        let field = FnField(|p: Point2| p.x.powi(3) + 2.0 * p.x * p.y * p.y - p.y.powi(3));
        let z = Point2::new(0.4, -0.2);
        let jet = numeric_jet(&field, z, 3, 1e-3).unwrap();
        // d³f/3! has binomial weights (1, 0, 2/3·... ) computed from partials:
        // fxxx=6, fxxy=0, fxyy=4, fyyy=-6 → /6
        let expect = [1.0, 0.0, 4.0 / 6.0, -1.0];
        for (a, b) in jet.iter().zip(expect) {
            assert!((a - b).abs() < 1e-4 * (1.0 + b.abs()));
        }
    }
}
