//! Algebra of homogeneous binary forms: evaluation, composition, coefficient
//! norms, determinant/discriminant, root extraction and multiplicity tests.
//!
//! Coefficients are stored by descending powers of `x`: a form of degree `m`
//! with coefficients `(c_0, …, c_m)` is `Σ c_i x^{m-i} y^i`, matching the
//! text serialisation `"m:c_0,c_1,…,c_m"` (so `"3:1,0,-3,0"` is `x³-3xy²`).
//! Two coefficient conventions are in common use for derivative data; the
//! plain convention above is canonical here and
//! [`HomogeneousForm::from_binomial_weights`] converts from the
//! binomially-weighted one (`ax³+3bx²y+3cxy²+dy³` stored as `(a,b,c,d)`).

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::geom::{LinearMap2, Point2};

pub type Complex64 = Complex<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum FormError {
    #[error("operation requires degree {expected}, form has degree {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("the zero form has no roots")]
    ZeroForm,
    #[error("coefficient vector must have at least 2 entries, got {0}")]
    TooFewCoefficients(usize),
    #[error("coefficients must be finite")]
    NonFiniteCoefficient,
    #[error("malformed form token {0:?}, expected \"m:c_0,…,c_m\"")]
    ParseError(String),
}

/// A homogeneous binary form `Σ c_i x^{m-i} y^i` of degree `m >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousForm {
    coeffs: Vec<f64>,
}

impl HomogeneousForm {
    /// Build a form from coefficients by descending powers of `x`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self, FormError> {
        if coeffs.len() < 2 {
            return Err(FormError::TooFewCoefficients(coeffs.len()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FormError::NonFiniteCoefficient);
        }
        Ok(Self { coeffs })
    }

    /// Convert from the binomially-weighted representation, in which entry
    /// `i` carries the monomial `C(m,i) x^{m-i} y^i` (the `d^m f/m!`
    /// convention with entries `∂^m f /(∂x^{m-i} ∂y^i) / m!`).
    pub fn from_binomial_weights(weights: &[f64]) -> Result<Self, FormError> {
        let m = weights.len().checked_sub(1).ok_or(FormError::TooFewCoefficients(0))?;
        let coeffs = weights
            .iter()
            .enumerate()
            .map(|(i, w)| binomial(m, i) * w)
            .collect();
        Self::new(coeffs)
    }

    /// Inverse of [`Self::from_binomial_weights`].
    pub fn binomial_weights(&self) -> Vec<f64> {
        let m = self.degree();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c / binomial(m, i))
            .collect()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficients by descending powers of `x`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `x^{m-i} y^i`.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs[i]
    }

    /// Supremum of the coefficients, the norm used throughout.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeff_norm() == 0.0
    }

    /// Partial derivative in `x`, a form of degree `m - 1`.
    pub fn partial_x(&self) -> HomogeneousForm {
        let m = self.degree();
        let coeffs = (0..m).map(|i| self.coeffs[i] * (m - i) as f64).collect();
        Self { coeffs }
    }

    /// Partial derivative in `y`, a form of degree `m - 1`.
    pub fn partial_y(&self) -> HomogeneousForm {
        let coeffs = (1..=self.degree()).map(|i| self.coeffs[i] * i as f64).collect();
        Self { coeffs }
    }

    /// Evaluate at a point. Horner recursion in `y/x` or `x/y`, whichever is
    /// the stable direction.
    pub fn eval(&self, p: Point2) -> f64 {
        let m = self.degree();
        let (x, y) = (p.x, p.y);
        if x == 0.0 && y == 0.0 {
            return 0.0;
        }
        if x.abs() >= y.abs() {
            let t = y / x;
            let mut acc = 0.0;
            for c in self.coeffs.iter().rev() {
                acc = acc * t + c;
            }
            acc * x.powi(m as i32)
        } else {
            let t = x / y;
            let mut acc = 0.0;
            for c in self.coeffs.iter() {
                acc = acc * t + c;
            }
            acc * y.powi(m as i32)
        }
    }

    pub fn scale(&self, lambda: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| lambda * c).collect(),
        }
    }

    /// Composition `π ∘ φ`, i.e. the form `z ↦ π(φ z)`; same degree.
    pub fn compose(&self, phi: &LinearMap2) -> Self {
        let m = self.degree();
        // degree-1 forms for the two rows of φ
        let fx = vec![phi.m[0][0], phi.m[0][1]];
        let fy = vec![phi.m[1][0], phi.m[1][1]];
        // powers fx^k for k = 0..m, likewise fy
        let mut px: Vec<Vec<f64>> = vec![vec![1.0]];
        let mut py: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 1..=m {
            px.push(mul_dense(&px[k - 1], &fx));
            py.push(mul_dense(&py[k - 1], &fy));
        }
        let mut out = vec![0.0; m + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let term = mul_dense(&px[m - i], &py[i]);
            for (j, t) in term.iter().enumerate() {
                out[j] += c * t;
            }
        }
        Self { coeffs: out }
    }

    /// Serialise as `"m:c_0,…,c_m"`.
    pub fn to_token(&self) -> String {
        let body: Vec<String> = self.coeffs.iter().map(|c| format!("{c}")).collect();
        format!("{}:{}", self.degree(), body.join(","))
    }

    /// Parse the `"m:c_0,…,c_m"` serialisation.
    pub fn parse(token: &str) -> Result<Self, FormError> {
        let err = || FormError::ParseError(token.to_string());
        let (head, body) = token.split_once(':').ok_or_else(err)?;
        let m: usize = head.trim().parse().map_err(|_| err())?;
        let coeffs: Vec<f64> = body
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| err()))
            .collect::<Result<_, _>>()?;
        if coeffs.len() != m + 1 {
            return Err(err());
        }
        Self::new(coeffs)
    }
}

/// Product of two dense coefficient vectors (convolution); the product of
/// homogeneous forms of degrees `a` and `b` has degree `a+b`.
fn mul_dense(f: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len() + g.len() - 1];
    for (i, &a) in f.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (j, &b) in g.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Determinant of a degree-2 form read as `a x² + 2b xy + c y²`.
pub fn det2(pi: &HomogeneousForm) -> Result<f64, FormError> {
    if pi.degree() != 2 {
        return Err(FormError::DegreeMismatch { expected: 2, got: pi.degree() });
    }
    let a = pi.coeff(0);
    let b = pi.coeff(1) / 2.0;
    let c = pi.coeff(2);
    Ok(a * c - b * b)
}

/// Discriminant of a degree-3 form read with plain coefficients
/// `a x³ + b x²y + c xy² + d y³`.
pub fn disc3(pi: &HomogeneousForm) -> Result<f64, FormError> {
    if pi.degree() != 3 {
        return Err(FormError::DegreeMismatch { expected: 3, got: pi.degree() });
    }
    let (a, b, c, d) = (pi.coeff(0), pi.coeff(1), pi.coeff(2), pi.coeff(3));
    Ok(b * b * c * c - 4.0 * a * c * c * c - 4.0 * b * b * b * d + 18.0 * a * b * c * d
        - 27.0 * a * a * d * d)
}

/// Complete root data of a form: `π = leading · y^divisible_by_y · Π (x - r y)`.
#[derive(Debug, Clone)]
pub struct RootSet {
    /// Coefficient of the highest surviving power of `x`.
    pub leading: f64,
    /// Roots of the residual univariate polynomial, repeated by multiplicity.
    pub roots: Vec<Complex64>,
    /// Number of factors of `y`.
    pub divisible_by_y: usize,
}

impl RootSet {
    /// Rebuild coefficients from the factorisation; the imaginary parts of a
    /// conjugate-closed root set cancel.
    pub fn reconstruct(&self) -> HomogeneousForm {
        let mut poly: Vec<Complex64> = vec![Complex::new(self.leading, 0.0)];
        for r in &self.roots {
            // multiply by (x - r y): coefficients stay by descending x powers
            let mut next = vec![Complex::new(0.0, 0.0); poly.len() + 1];
            for (i, &c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * r;
            }
            poly = next;
        }
        // the y^k factor shifts every monomial: prepend k zero coefficients
        let mut coeffs = vec![0.0; self.divisible_by_y];
        coeffs.extend(poly.iter().map(|c| c.re));
        HomogeneousForm::new(coeffs).expect("reconstructed form is well-formed")
    }
}

/// Roots of a univariate real polynomial given by descending-power
/// coefficients, via the companion-matrix eigenvalue method. The leading
/// coefficient must be nonzero.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![Complex::new(-coeffs[1] / coeffs[0], 0.0)];
    }
    let lead = coeffs[0];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -coeffs[n - i] / lead;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Factor a nonzero form as `λ y^k Π (x - r_i y)` and return the root data.
pub fn roots(pi: &HomogeneousForm) -> Result<RootSet, FormError> {
    let norm = pi.coeff_norm();
    if norm == 0.0 {
        return Err(FormError::ZeroForm);
    }
    let tol = 1e-13 * norm;
    let c = pi.coeffs();
    let k = c.iter().take_while(|v| v.abs() <= tol).count();
    let residual = &c[k..];
    let rts = poly_roots(residual);
    Ok(RootSet {
        leading: residual[0],
        roots: rts,
        divisible_by_y: k,
    })
}

/// Chordal distance on the Riemann sphere between two finite points.
fn chordal(a: Complex64, b: Complex64) -> f64 {
    let num = (a - b).norm();
    num / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt())
}

fn chordal_to_infinity(a: Complex64) -> f64 {
    1.0 / (1.0 + a.norm_sqr()).sqrt()
}

/// Replace every group of roots within chordal distance `coarse` by its
/// centroid, repeated with the group size.
fn sharpen_clusters(roots: &mut [Complex64], coarse: f64) {
    let n = roots.len();
    let mut assigned = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if assigned[i] != usize::MAX {
            continue;
        }
        assigned[i] = next;
        for j in (i + 1)..n {
            if assigned[j] == usize::MAX && chordal(roots[i], roots[j]) <= coarse {
                assigned[j] = next;
            }
        }
        next += 1;
    }
    for g in 0..next {
        let members: Vec<usize> = (0..n).filter(|&i| assigned[i] == g).collect();
        if members.len() < 2 {
            continue;
        }
        let mean = members
            .iter()
            .map(|&i| roots[i])
            .fold(Complex::new(0.0, 0.0), |a, b| a + b)
            / members.len() as f64;
        for &i in &members {
            roots[i] = mean;
        }
    }
}

/// Largest multiplicity among the projective roots of `π`, clustering roots
/// within chordal distance `tol` (the factor `y^k` counts as a root at
/// infinity of multiplicity `k`). The form is degenerate in the sense of the
/// shape function exactly when this is at least `⌊m/2⌋ + 1`.
///
/// Companion-matrix eigenvalues of a k-fold root scatter at scale `ε^{1/k}`,
/// which can exceed a tight `tol`; clusters are first sharpened by replacing
/// coarse groups with their centroid (first-order scatter cancels there)
/// before the tolerance test.
pub fn multiplicity_class(pi: &HomogeneousForm, tol: f64) -> Result<usize, FormError> {
    let mut rs = roots(pi)?;
    let coarse = tol.max(2.0e-5);
    sharpen_clusters(&mut rs.roots, coarse);
    // projective points: finite roots plus a repeated point at infinity
    let n = rs.roots.len() + usize::from(rs.divisible_by_y > 0);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    let dist = |i: usize, j: usize| -> f64 {
        let fin = rs.roots.len();
        if i < fin && j < fin {
            chordal(rs.roots[i], rs.roots[j])
        } else if i < fin {
            chordal_to_infinity(rs.roots[i])
        } else if j < fin {
            chordal_to_infinity(rs.roots[j])
        } else {
            0.0
        }
    };
    for i in 0..n {
        for j in (i + 1)..n {
            if dist(i, j) <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut count = vec![0usize; n];
    for i in 0..n {
        let mul = if i >= rs.roots.len() { rs.divisible_by_y } else { 1 };
        let r = find(&mut parent, i);
        count[r] += mul;
    }
    Ok(count.into_iter().max().unwrap_or(0))
}

/// Default chordal clustering tolerance for [`multiplicity_class`].
pub const MULTIPLICITY_TOL: f64 = 1e-6;

/// Smallest integer strictly larger than `m/2`; a form has vanishing shape
/// function exactly when some projective root has at least this multiplicity.
pub fn critical_multiplicity(m: usize) -> usize {
    m / 2 + 1
}
