//! Optimal anisotropy metrics derived from a form: the cubic normal-form
//! change of variables, maximal inscribed ellipses, their diameter-
//! constrained variants, and scalar-rescaled metric fields over a domain.

use thiserror::Error;

use crate::forms::{self, HomogeneousForm};
use crate::geom::{LinearMap2, Point2, SymMetric2};
use crate::lagrange::{jet_or_numeric, Lp, ScalarField};
use crate::mesh::Polygon;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("operation supports degrees {0:?}, form has degree {1}")]
    UnsupportedDegree(&'static [usize], usize),
    #[error("cubic is degenerate (discriminant {0:.3e}); use the constrained path")]
    DegenerateCubic(f64),
    #[error("normalisation residual {0:.3e} too large")]
    NormalizationFailed(f64),
    #[error("the zero form has no thresholds")]
    ZeroForm,
    #[error("target accuracy ν must be positive, got {0}")]
    BadNu(f64),
    #[error("floor α must be positive, got {0}")]
    BadAlpha(f64),
    #[error("derivative data of degree {0} unavailable")]
    MissingJet(usize),
    #[error(transparent)]
    Form(#[from] forms::FormError),
}

/// Relative discriminant threshold below which a cubic is treated as
/// degenerate (`disc` is homogeneous of degree 4 in the coefficients).
const DISC_REL_TOL: f64 = 1e-12;

/// Change of variables carrying a nondegenerate cubic onto its normal form
/// `x(x² - 3y²)` (disc > 0) or `x(x² + 3y²)` (disc < 0).
#[derive(Debug, Clone)]
pub struct CubicNormalization {
    pub phi: LinearMap2,
    pub disc_sign: i8,
    pub normal_form: HomogeneousForm,
}

fn rotate_until_leading(pi: &HomogeneousForm) -> (HomogeneousForm, LinearMap2) {
    if pi.coeff(0).abs() > 1e-9 * pi.coeff_norm() {
        return (pi.clone(), LinearMap2::identity());
    }
    let mut best = (0.0, pi.clone(), LinearMap2::identity());
    for k in 1..8 {
        let rot = LinearMap2::rotation(std::f64::consts::PI * k as f64 / 8.0);
        let cand = pi.compose(&rot);
        let lead = cand.coeff(0).abs();
        if lead > best.0 {
            best = (lead, cand, rot);
        }
    }
    (best.1, best.2)
}

/// Build the explicit normal-form map of a nondegenerate cubic from its
/// roots, and verify it by composing.
pub fn normalize_cubic(pi: &HomogeneousForm) -> Result<CubicNormalization, MetricError> {
    if pi.degree() != 3 {
        return Err(MetricError::UnsupportedDegree(&[3], pi.degree()));
    }
    let disc = forms::disc3(pi)?;
    let norm = pi.coeff_norm();
    if disc.abs() <= DISC_REL_TOL * norm.powi(4) {
        return Err(MetricError::DegenerateCubic(disc));
    }
    let (work, pre_rot) = rotate_until_leading(pi);
    let rs = forms::roots(&work)?;
    let lambda = rs.leading;
    let sqrt3 = 3.0_f64.sqrt();
    let prefactor = lambda * (2.0 * disc).cbrt().recip();

    let raw = if disc > 0.0 {
        // three real roots, ascending
        let mut r: Vec<f64> = rs.roots.iter().map(|c| c.re).collect();
        r.sort_by(f64::total_cmp);
        let (r1, r2, r3) = (r[0], r[1], r[2]);
        LinearMap2::new(
            r1 * (r2 + r3) - 2.0 * r2 * r3,
            (r2 - r3) * r1 * sqrt3,
            2.0 * r1 - (r2 + r3),
            (r2 - r3) * sqrt3,
        )
    } else {
        // one real root and a conjugate pair with Im(r2) > 0; the entries
        // i(r2 - r3) = 2·Im(r3) - style combinations are real
        let mut real_root = rs.roots[0];
        let mut best_im = real_root.im.abs();
        for c in &rs.roots {
            if c.im.abs() < best_im {
                best_im = c.im.abs();
                real_root = *c;
            }
        }
        let pair: Vec<_> = rs
            .roots
            .iter()
            .filter(|c| (**c - real_root).norm() > 1e-14 * (1.0 + real_root.norm()))
            .collect();
        let (r2re, r2im) = if pair.len() == 2 {
            (pair[0].re, pair[0].im.abs())
        } else {
            // fall back: conjugate pair around the mean of the non-real parts
            (rs.roots[1].re, rs.roots[1].im.abs())
        };
        let r1 = real_root.re;
        // r2 + r3 = 2 Re, r2 r3 = |r2|², i(r2 - r3) = -2 Im(r2) with Im(r2) > 0
        let s = 2.0 * r2re;
        let q = r2re * r2re + r2im * r2im;
        let i_diff = -2.0 * r2im;
        LinearMap2::new(
            r1 * s - 2.0 * q,
            i_diff * r1 * sqrt3,
            2.0 * r1 - s,
            i_diff * sqrt3,
        )
    };
    let phi_work = LinearMap2::new(
        prefactor * raw.m[0][0],
        prefactor * raw.m[0][1],
        prefactor * raw.m[1][0],
        prefactor * raw.m[1][1],
    );
    let phi = pre_rot.mul_map(&phi_work);

    let target = if disc > 0.0 {
        HomogeneousForm::new(vec![1.0, 0.0, -3.0, 0.0])?
    } else {
        HomogeneousForm::new(vec![1.0, 0.0, 3.0, 0.0])?
    };
    let composed = pi.compose(&phi);
    let residual = composed
        .coeffs()
        .iter()
        .zip(target.coeffs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if residual > 1e-6 {
        return Err(MetricError::NormalizationFailed(residual));
    }
    Ok(CubicNormalization {
        phi,
        disc_sign: if disc > 0.0 { 1 } else { -1 },
        normal_form: target,
    })
}

/// Maximal-ellipse metric of a quadratic: absolute value of the associated
/// symmetric matrix. Semidefinite when the determinant vanishes.
pub fn hmatrix2(pi: &HomogeneousForm) -> Result<SymMetric2, MetricError> {
    if pi.degree() != 2 {
        return Err(MetricError::UnsupportedDegree(&[2], pi.degree()));
    }
    let q = SymMetric2::new(pi.coeff(0), pi.coeff(1) / 2.0, pi.coeff(2));
    let (l1, l2, u) = q.eigen();
    Ok(SymMetric2::from_eigen(l1.abs(), l2.abs(), &u))
}

/// Maximal-ellipse metric of a nondegenerate cubic, through the normal-form
/// pullback: `(φ⁻¹)ᵀ φ⁻¹`, times `2^{1/3}` when the discriminant is negative.
pub fn hmatrix3(pi: &HomogeneousForm) -> Result<SymMetric2, MetricError> {
    let cn = normalize_cubic(pi)?;
    hmatrix3_from(&cn)
}

fn hmatrix3_from(cn: &CubicNormalization) -> Result<SymMetric2, MetricError> {
    let inv = cn
        .phi
        .inverse()
        .ok_or(MetricError::DegenerateCubic(0.0))?;
    let base = SymMetric2::identity().congruence(&inv);
    Ok(if cn.disc_sign < 0 {
        base.scale(2.0_f64.cbrt())
    } else {
        base
    })
}

/// Explicit coefficient formula for the disc > 0 metric: with
/// `π = ax³+3bx²y+3cxy²+dy³`,
/// `h = 3·2^{-1/3}·disc^{-1/3}·[[2(b²-ac), bc-ad], [bc-ad, 2(c²-bd)]]`.
pub fn hmatrix3_coeff_formula(pi: &HomogeneousForm) -> Result<SymMetric2, MetricError> {
    if pi.degree() != 3 {
        return Err(MetricError::UnsupportedDegree(&[3], pi.degree()));
    }
    let disc = forms::disc3(pi)?;
    if disc <= 0.0 {
        return Err(MetricError::DegenerateCubic(disc));
    }
    let a = pi.coeff(0);
    let b = pi.coeff(1) / 3.0;
    let c = pi.coeff(2) / 3.0;
    let d = pi.coeff(3);
    let pref = 3.0 * 2.0_f64.powf(-1.0 / 3.0) * disc.powf(-1.0 / 3.0);
    Ok(SymMetric2::new(
        pref * 2.0 * (b * b - a * c),
        pref * (b * c - a * d),
        pref * 2.0 * (c * c - b * d),
    ))
}

/// The three radii controlling the constrained regimes, with the contact
/// rotation.
#[derive(Debug, Clone)]
pub struct RegimeThresholds {
    /// `μ`: reciprocal squared radius of the largest centered disc in the
    /// level set.
    pub mu: f64,
    /// `α*`: reciprocal squared half-diameter of the largest inscribed
    /// ellipse containing that disc; 0 when the family never leaves the set.
    pub alpha_star: f64,
    /// `β`: smallest eigenvalue of the unconstrained metric; 0 when the
    /// discriminant vanishes.
    pub beta: f64,
    /// Rotation mapping the contact point onto the positive x-axis.
    pub u_pi: LinearMap2,
    /// Contact point: `|π(z)| = 1` at minimal norm `μ^{-1/2}`.
    pub z_pi: Point2,
}

const THRESHOLD_DIRECTIONS: usize = 1440;

/// Maximise `|π|` over unit directions; returns (angle, value). The grid
/// maximum is polished to machine precision by bisecting the sign of
/// `d/dθ [π(u(θ))²]`; the downstream bisection for α* amplifies any angular
/// error quadratically, so the polish matters.
fn angular_max(pi: &HomogeneousForm) -> (f64, f64) {
    let prof = |theta: f64| pi.eval(Point2::unit(theta)).abs();
    let px = pi.partial_x();
    let py = pi.partial_y();
    // d/dθ π(u(θ))² = 2 π(u) ∇π(u)·u⊥
    let dprof2 = |theta: f64| {
        let u = Point2::unit(theta);
        let tangent = Point2::new(-u.y, u.x);
        2.0 * pi.eval(u) * (px.eval(u) * tangent.x + py.eval(u) * tangent.y)
    };
    let n = THRESHOLD_DIRECTIONS;
    let mut best = (0.0, 0.0);
    for i in 0..n {
        let theta = std::f64::consts::PI * i as f64 / n as f64;
        let v = prof(theta);
        if v > best.1 {
            best = (theta, v);
        }
    }
    let step = std::f64::consts::PI / n as f64;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    if dprof2(a) > 0.0 && dprof2(b) < 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if dprof2(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-16 {
                break;
            }
        }
    }
    let theta = 0.5 * (a + b);
    if prof(theta) >= best.1 {
        (theta, prof(theta))
    } else {
        best
    }
}

/// Signed feasibility margin of the ellipse `{<Hz,z> <= 1}` inside
/// `{|π| <= 1}`: minimum over directions of `<Hu,u> - |π(u)|^{2/m}`,
/// refined around the worst grid direction.
fn levelset_margin(h: &SymMetric2, pi: &HomogeneousForm, dirs: usize) -> f64 {
    let m = pi.degree() as f64;
    let g = |theta: f64| {
        let u = Point2::unit(theta);
        h.quad(u) - pi.eval(u).abs().powf(2.0 / m)
    };
    let mut worst = (0.0, f64::INFINITY);
    for i in 0..dirs {
        let theta = std::f64::consts::PI * i as f64 / dirs as f64;
        let v = g(theta);
        if v < worst.1 {
            worst = (theta, v);
        }
    }
    let step = std::f64::consts::PI / dirs as f64;
    let (mut a, mut b) = (worst.0 - step, worst.0 + step);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..50 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if g(x1) < g(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    worst.1.min(g((a + b) / 2.0))
}

/// Whether the ellipse of `h` is inscribed in the unit level set of `π`,
/// within the standard relative slack.
pub fn levelset_feasible(h: &SymMetric2, pi: &HomogeneousForm) -> bool {
    let m = pi.degree() as f64;
    (0..720).all(|i| {
        let u = Point2::unit(std::f64::consts::PI * i as f64 / 720.0);
        h.quad(u) >= pi.eval(u).abs().powf(2.0 / m) * (1.0 - 1e-6)
    })
}

/// Compute the regime thresholds `0 <= β <= α* <= μ` of a nonzero cubic.
pub fn regime_thresholds(pi: &HomogeneousForm) -> Result<RegimeThresholds, MetricError> {
    if pi.degree() != 3 {
        return Err(MetricError::UnsupportedDegree(&[3], pi.degree()));
    }
    if pi.is_zero() {
        return Err(MetricError::ZeroForm);
    }
    let (theta_star, gmax) = angular_max(pi);
    let mu = gmax.powf(2.0 / 3.0);
    let z_pi = Point2::unit(theta_star) * gmax.powf(-1.0 / 3.0);
    let u_pi = LinearMap2::rotation(-theta_star);

    let disc = forms::disc3(pi)?;
    let beta = if disc.abs() <= DISC_REL_TOL * pi.coeff_norm().powi(4) {
        0.0
    } else {
        hmatrix3(pi)?.min_eigenvalue()
    };

    // largest bitangent ellipse: E'_δ = U_πᵀ diag(μ, δ) U_π stays inscribed
    // until δ = α*
    let feasible = |delta: f64| -> bool {
        let h = SymMetric2::from_eigen(mu, delta, &u_pi);
        levelset_margin(&h, pi, THRESHOLD_DIRECTIONS) >= -1e-12 * mu
    };
    let mut alpha_star = 0.0;
    if !feasible(mu * (1.0 - 1e-9)) {
        alpha_star = mu;
    } else {
        // bracket downward
        let mut lo = mu;
        let mut found = false;
        for _ in 0..60 {
            let cand = lo / 2.0;
            if feasible(cand) {
                lo = cand;
                if lo < 1e-14 * mu {
                    break;
                }
            } else {
                found = true;
                let mut bad = cand;
                let mut good = lo;
                for _ in 0..80 {
                    let mid = 0.5 * (bad + good);
                    if feasible(mid) {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                alpha_star = 0.5 * (bad + good);
                break;
            }
        }
        if !found {
            alpha_star = 0.0; // family never leaves the set (x³ type)
        }
    }
    let alpha_star = alpha_star.clamp(beta.min(mu), mu);
    Ok(RegimeThresholds { mu, alpha_star, beta, u_pi, z_pi })
}

/// Which regime produced a constrained metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `α >= μ`: the floor dominates, `α·Id`.
    IsotropicCap,
    /// `α* <= α <= μ`: ellipse tangent at `±z_π` with diameter `2α^{-1/2}`.
    DiskTangent,
    /// `β <= α <= α*`: quadri-tangent family member.
    QuadriTangent,
    /// `α <= β`: the unconstrained optimum.
    Unconstrained,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::IsotropicCap => "isotropic-cap",
            Regime::DiskTangent => "disk-tangent",
            Regime::QuadriTangent => "quadri-tangent",
            Regime::Unconstrained => "unconstrained",
        };
        f.write_str(s)
    }
}

/// Quadri-tangent family of the normal forms, parametrised by `λ`.
enum Family {
    /// disc < 0: `diag((4+λ³)/(3λ²), λ)`, `λ ∈ (0, 2]`.
    DiscNeg,
    /// disc > 0: `Vᵀ diag((4-λ³)/(3λ²), λ) V`, `λ ∈ (0, 1]`, `V` one of three
    /// rotations.
    DiscPos,
    /// the `x²y` normal form: `diag(λ, 4/(27λ²))`, `λ ∈ (0, ∞)`.
    DoubleRoot,
}

impl Family {
    fn matrix(&self, lambda: f64) -> SymMetric2 {
        match self {
            Family::DiscNeg => {
                SymMetric2::new((4.0 + lambda.powi(3)) / (3.0 * lambda * lambda), 0.0, lambda)
            }
            Family::DiscPos => {
                SymMetric2::new((4.0 - lambda.powi(3)) / (3.0 * lambda * lambda), 0.0, lambda)
            }
            Family::DoubleRoot => {
                SymMetric2::new(lambda, 0.0, 4.0 / (27.0 * lambda * lambda))
            }
        }
    }

    fn lambda_range(&self) -> (f64, f64) {
        match self {
            Family::DiscNeg => (0.0, 2.0),
            Family::DiscPos => (0.0, 1.0),
            Family::DoubleRoot => (0.0, f64::INFINITY),
        }
    }

    /// Descending-power coefficients of `det(D_λ - α S) = 0`, cleared of
    /// denominators; `S` in the family's frame.
    fn det_equation(&self, alpha: f64, s: &SymMetric2) -> Vec<f64> {
        let (s11, s22) = (s.h11, s.h22);
        let det_s = s.det();
        match self {
            Family::DiscNeg => vec![
                1.0,
                -alpha * (3.0 * s11 + s22),
                3.0 * alpha * alpha * det_s,
                4.0,
                -4.0 * alpha * s22,
            ],
            Family::DiscPos => vec![
                1.0,
                -alpha * (s22 - 3.0 * s11),
                -3.0 * alpha * alpha * det_s,
                -4.0,
                4.0 * alpha * s22,
            ],
            Family::DoubleRoot => vec![
                -27.0 * alpha * s22,
                27.0 * alpha * alpha * det_s,
                4.0,
                -4.0 * alpha * s11,
            ],
        }
    }
}

/// Normal-form map for the `x²y` type: a degenerate cubic with a double and
/// a simple projective root.
fn normalize_x2y(pi: &HomogeneousForm) -> Result<LinearMap2, MetricError> {
    let (work, pre_rot) = rotate_until_leading(pi);
    let rs = forms::roots(&work)?;
    let r: Vec<f64> = rs.roots.iter().map(|c| c.re).collect();
    // double root = closest pair
    let pairs = [(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)];
    let (i, j, k) = pairs
        .iter()
        .copied()
        .min_by(|a, b| {
            (r[a.0] - r[a.1])
                .abs()
                .total_cmp(&(r[b.0] - r[b.1]).abs())
        })
        .unwrap();
    let r_double = 0.5 * (r[i] + r[j]);
    let r_single = r[k];
    let lambda = rs.leading;
    let sep = r_double - r_single;
    if sep.abs() < 1e-9 || !sep.is_finite() {
        return Err(MetricError::DegenerateCubic(0.0));
    }
    // columns: φ(e_x) on the simple-root direction, φ(e_y) on the double-root
    // direction, scaled so π∘φ = x²y exactly
    let b = 1.0 / (lambda * sep.powi(3));
    let phi_work = LinearMap2::new(r_single, b * r_double, 1.0, b);
    let phi = pre_rot.mul_map(&phi_work);
    let composed = pi.compose(&phi);
    let target = [0.0, 1.0, 0.0, 0.0];
    let residual = composed
        .coeffs()
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if residual > 1e-6 {
        return Err(MetricError::NormalizationFailed(residual));
    }
    Ok(phi)
}

/// Diameter-constrained maximal-ellipse metric of a cubic, with the regime
/// that produced it. The zero form yields `α·Id`.
pub fn hmatrix3_constrained(
    pi: &HomogeneousForm,
    alpha: f64,
) -> Result<(SymMetric2, Regime), MetricError> {
    if pi.degree() != 3 {
        return Err(MetricError::UnsupportedDegree(&[3], pi.degree()));
    }
    if alpha <= 0.0 {
        return Err(MetricError::BadAlpha(alpha));
    }
    if pi.is_zero() {
        return Ok((SymMetric2::scaled_identity(alpha), Regime::IsotropicCap));
    }
    let th = regime_thresholds(pi)?;
    if alpha >= th.mu {
        return Ok((SymMetric2::scaled_identity(alpha), Regime::IsotropicCap));
    }
    if alpha >= th.alpha_star {
        let h = SymMetric2::from_eigen(th.mu, alpha, &th.u_pi);
        return Ok((h, Regime::DiskTangent));
    }
    if alpha <= th.beta {
        return Ok((hmatrix3(pi)?, Regime::Unconstrained));
    }

    // quadri-tangent regime
    let disc = forms::disc3(pi)?;
    let degenerate = disc.abs() <= DISC_REL_TOL * pi.coeff_norm().powi(4);
    let (family, phi, rotations): (Family, LinearMap2, Vec<f64>) = if degenerate {
        // x³-type never reaches this branch (α* = 0)
        (Family::DoubleRoot, normalize_x2y(pi)?, vec![0.0])
    } else if disc < 0.0 {
        (Family::DiscNeg, normalize_cubic(pi)?.phi, vec![0.0])
    } else {
        (
            Family::DiscPos,
            normalize_cubic(pi)?.phi,
            vec![0.0, std::f64::consts::FRAC_PI_3, 2.0 * std::f64::consts::FRAC_PI_3],
        )
    };
    let inv = phi.inverse().ok_or(MetricError::DegenerateCubic(disc))?;
    let s_base = SymMetric2::identity().congruence(&phi); // φᵀφ
    let (lo, hi) = family.lambda_range();

    let mut best: Option<(f64, SymMetric2)> = None;
    for &vrot in &rotations {
        let v = LinearMap2::rotation(vrot);
        // S in the family frame: V S Vᵀ = congruence by Vᵀ
        let s_frame = s_base.congruence(&v.transpose());
        let coeffs = family.det_equation(alpha, &s_frame);
        for root in forms::poly_roots(&coeffs) {
            if root.im.abs() > 1e-8 * (1.0 + root.re.abs()) {
                continue;
            }
            let lambda = root.re;
            if lambda <= lo + 1e-12 || lambda > hi * (1.0 + 1e-9) {
                continue;
            }
            let lambda = lambda.min(hi);
            let d = family.matrix(lambda);
            // H = (φ⁻¹)ᵀ Vᵀ D V φ⁻¹: congruence of D by (V φ⁻¹)
            let h = d.congruence(&v.mul_map(&inv));
            if h.min_eigenvalue() < alpha * (1.0 - 1e-8) {
                continue;
            }
            if !levelset_feasible(&h, pi) {
                continue;
            }
            let det = h.det();
            if best.as_ref().map_or(true, |(bd, _)| det < *bd - 1e-15 * det.abs()) {
                best = Some((det, h));
            }
        }
    }
    if let Some((_, h)) = best {
        return Ok((h, Regime::QuadriTangent));
    }

    // no admissible root: threshold misclassification; fall back to a dense
    // family scan and keep the best inscribed member
    log::warn!(
        "quadri-tangent root selection found no admissible root for α={alpha}; falling back to a family scan"
    );
    let mut fallback: Option<(f64, SymMetric2)> = None;
    let hi_eff = if hi.is_finite() { hi } else { 1e6 };
    for &vrot in &rotations {
        let v = LinearMap2::rotation(vrot);
        for k in 0..4096 {
            let frac = (k as f64 + 0.5) / 4096.0;
            let lambda = (lo.max(1e-9).ln() + (hi_eff.ln() - lo.max(1e-9).ln()) * frac).exp();
            let d = family.matrix(lambda);
            let h = d.congruence(&v.mul_map(&inv));
            if h.min_eigenvalue() < alpha * (1.0 - 1e-8) || !levelset_feasible(&h, pi) {
                continue;
            }
            let det = h.det();
            if fallback.as_ref().map_or(true, |(bd, _)| det < *bd) {
                fallback = Some((det, h));
            }
        }
    }
    match fallback {
        Some((_, h)) => Ok((h, Regime::QuadriTangent)),
        // final guard: the bitangent matrix is always inscribed for α >= α*
        None => Ok((
            SymMetric2::from_eigen(th.mu, alpha.max(th.alpha_star), &th.u_pi),
            Regime::DiskTangent,
        )),
    }
}

/// Diameter-constrained metric of a quadratic: eigenvalues floored at `α`.
pub fn hmatrix2_constrained(pi: &HomogeneousForm, alpha: f64) -> Result<SymMetric2, MetricError> {
    if pi.degree() != 2 {
        return Err(MetricError::UnsupportedDegree(&[2], pi.degree()));
    }
    if alpha <= 0.0 {
        return Err(MetricError::BadAlpha(alpha));
    }
    let q = SymMetric2::new(pi.coeff(0), pi.coeff(1) / 2.0, pi.coeff(2));
    let (l1, l2, u) = q.eigen();
    Ok(SymMetric2::from_eigen(l1.abs().max(alpha), l2.abs().max(alpha), &u))
}

/// A field of positive definite matrices prescribing local anisotropy:
/// `h(z) = α_z^{-2}·h_{π_z,floor}` with
/// `α_z = ν^{p/(mp+2)} |E_z|^{-1/(mp+2)}`.
pub struct MetricField<'a> {
    f: &'a dyn ScalarField,
    m: usize,
    p: Lp,
    nu: f64,
    alpha_floor: f64,
    fd_step: f64,
}

/// Floor `α` for which the unit ellipse diameter stays within the domain
/// diameter.
pub fn default_alpha_floor(omega: &Polygon) -> f64 {
    let d = omega.diameter();
    (2.0 / d) * (2.0 / d)
}

/// Build a metric field for `f` over `omega`. Derivatives come from the
/// analytic callback when present, otherwise central finite differences with
/// step `1e-3 · diam(Ω)`.
pub fn metric_field<'a>(
    f: &'a dyn ScalarField,
    omega: &Polygon,
    m: usize,
    p: Lp,
    nu: f64,
    alpha_floor: f64,
) -> Result<MetricField<'a>, MetricError> {
    if m != 2 && m != 3 {
        return Err(MetricError::UnsupportedDegree(&[2, 3], m));
    }
    if nu <= 0.0 {
        return Err(MetricError::BadNu(nu));
    }
    if alpha_floor <= 0.0 {
        return Err(MetricError::BadAlpha(alpha_floor));
    }
    Ok(MetricField { f, m, p, nu, alpha_floor, fd_step: 1e-3 * omega.diameter() })
}

impl MetricField<'_> {
    /// Derivative form at `z`, converted to plain coefficients.
    pub fn form_at(&self, z: Point2) -> Result<HomogeneousForm, MetricError> {
        let jet = jet_or_numeric(self.f, z, self.m, self.fd_step)
            .ok_or(MetricError::MissingJet(self.m))?;
        Ok(HomogeneousForm::from_binomial_weights(&jet)?)
    }

    /// The floored base metric before rescaling.
    pub fn base_metric(&self, z: Point2) -> Result<SymMetric2, MetricError> {
        let pi = self.form_at(z)?;
        match self.m {
            2 => hmatrix2_constrained(&pi, self.alpha_floor),
            _ => hmatrix3_constrained(&pi, self.alpha_floor).map(|(h, _)| h),
        }
    }

    /// The rescaled metric at `z`.
    pub fn sample(&self, z: Point2) -> Result<SymMetric2, MetricError> {
        let h = self.base_metric(z)?;
        let area = h.ellipse_area();
        let alpha_z = match self.p {
            Lp::Finite(p) => {
                self.nu.powf(p / (self.m as f64 * p + 2.0))
                    * area.powf(-1.0 / (self.m as f64 * p + 2.0))
            }
            // limits p → ∞: exponents 1/m and 0
            Lp::Infinity => self.nu.powf(1.0 / self.m as f64),
        };
        Ok(h.scale(alpha_z.powi(-2)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn form(c: &[f64]) -> HomogeneousForm {
        HomogeneousForm::new(c.to_vec()).unwrap()
    }

    fn random_cubic(rng: &mut impl Rng, disc_lo: f64, disc_hi: f64, sign: f64) -> HomogeneousForm {
        loop {
            let pi = form(&[
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]);
            let d = forms::disc3(&pi).unwrap();
            if d * sign <= 0.0 {
                continue;
            }
            // rescale into the requested |disc| band: disc(λπ) = λ⁴ disc(π)
            let target = rng.gen_range(disc_lo..disc_hi);
            let lam = (target / d.abs()).powf(0.25);
            return pi.scale(lam);
        }
    }

    #[test]
    fn normalize_cubic_examples() {
        // already normal
        let cn = normalize_cubic(&form(&[1.0, 0.0, -3.0, 0.0])).unwrap();
        assert_eq!(cn.disc_sign, 1);
        // y(y² - 3x²): needs the pre-rotation
        let cn = normalize_cubic(&form(&[0.0, -3.0, 0.0, 1.0])).unwrap();
        assert_eq!(cn.disc_sign, 1);
        // x³ - xy², disc 4 > 0
        let cn = normalize_cubic(&form(&[1.0, 0.0, -1.0, 0.0])).unwrap();
        assert_eq!(cn.disc_sign, 1);
        // disc < 0 case
        let cn = normalize_cubic(&form(&[1.0, 0.0, 3.0, 0.0])).unwrap();
        assert_eq!(cn.disc_sign, -1);
        // degenerate rejected
        assert!(normalize_cubic(&form(&[0.0, 1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn normalize_cubic_random_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let pi = random_cubic(&mut rng, 0.5, 50.0, sign);
            let cn = normalize_cubic(&pi).unwrap();
            let composed = pi.compose(&cn.phi);
            for (a, b) in composed.coeffs().iter().zip(cn.normal_form.coeffs()) {
                assert!((a - b).abs() < 1e-8, "{:?}", composed.coeffs());
            }
        }
    }

    #[test]
    fn hmatrix2_examples() {
        let h = hmatrix2(&form(&[1.0, 0.0, 1.0])).unwrap();
        assert!(h.frob_dist(&SymMetric2::identity()) < 1e-12);
        let h = hmatrix2(&form(&[1.0, 0.0, -1.0])).unwrap();
        assert!(h.frob_dist(&SymMetric2::identity()) < 1e-12);
        let h = hmatrix2(&form(&[1.0, 0.0, -4.0])).unwrap();
        assert!(h.frob_dist(&SymMetric2::new(1.0, 0.0, 4.0)) < 1e-12);
    }

    #[test]
    fn hmatrix3_normal_forms() {
        let h = hmatrix3(&form(&[1.0, 0.0, -3.0, 0.0])).unwrap();
        assert!(h.frob_dist(&SymMetric2::identity()) < 1e-8, "{h:?}");
        let h = hmatrix3(&form(&[1.0, 0.0, 3.0, 0.0])).unwrap();
        let expect = SymMetric2::scaled_identity(2.0_f64.cbrt());
        assert!(h.frob_dist(&expect) < 1e-8, "{h:?}");
    }

    #[test]
    fn hmatrix3_det_identities_and_coeff_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let pos = random_cubic(&mut rng, 0.5, 50.0, 1.0);
            let disc = forms::disc3(&pos).unwrap();
            let h = hmatrix3(&pos).unwrap();
            let expect = 2.0_f64.powf(-2.0 / 3.0) / 3.0 * disc.powf(1.0 / 3.0);
            assert!((h.det() - expect).abs() < 1e-8 * expect.abs(), "{} vs {expect}", h.det());
            let hc = hmatrix3_coeff_formula(&pos).unwrap();
            assert!(h.frob_dist(&hc) < 1e-8 * (1.0 + h.trace().abs()), "{h:?} vs {hc:?}");

            let neg = random_cubic(&mut rng, 0.5, 50.0, -1.0);
            let disc = forms::disc3(&neg).unwrap();
            let h = hmatrix3(&neg).unwrap();
            let expect = disc.abs().powf(1.0 / 3.0) / 3.0;
            assert!((h.det() - expect).abs() < 1e-8 * expect.abs());
        }
    }

    #[test]
    fn hmatrix3_feasible_and_near_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let pi = random_cubic(&mut rng, 0.5, 50.0, sign);
            let h = hmatrix3(&pi).unwrap();
            assert!(levelset_feasible(&h, &pi), "not inscribed: {h:?}");
            // area matches the independent grid/N-M maximiser to 2%
            let oracle = shape::shape_ellipse(&pi).unwrap();
            let area = h.ellipse_area();
            assert!(
                (area / oracle.area - 1.0).abs() < 0.02,
                "area {area} vs oracle {}",
                oracle.area
            );
        }
    }

    #[test]
    fn hmatrix3_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..20 {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let pi = random_cubic(&mut rng, 0.5, 20.0, sign);
            let phi = LinearMap2::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            );
            if phi.det().abs() < 0.3 {
                continue;
            }
            let lhs = hmatrix3(&pi.compose(&phi)).unwrap();
            let rhs = hmatrix3(&pi).unwrap().congruence(&phi);
            assert!(
                lhs.frob_dist(&rhs) < 1e-7 * (1.0 + rhs.trace().abs()),
                "{lhs:?} vs {rhs:?}"
            );
        }
    }

    #[test]
    fn thresholds_collapsed_cases() {
        // x(x²+3y²): μ = α* = β = 2^{1/3}
        let th = regime_thresholds(&form(&[1.0, 0.0, 3.0, 0.0])).unwrap();
        let c = 2.0_f64.cbrt();
        assert!((th.mu - c).abs() < 1e-6, "μ = {}", th.mu);
        assert!((th.alpha_star - c).abs() < 1e-6, "α* = {}", th.alpha_star);
        assert!((th.beta - c).abs() < 1e-6, "β = {}", th.beta);
        assert!((pi_eval_abs(&form(&[1.0, 0.0, 3.0, 0.0]), th.z_pi) - 1.0).abs() < 1e-8);
        assert!((th.z_pi.norm() - th.mu.powf(-0.5)).abs() < 1e-8);

        // x(x²-3y²): all equal 1
        let th = regime_thresholds(&form(&[1.0, 0.0, -3.0, 0.0])).unwrap();
        assert!((th.mu - 1.0).abs() < 1e-6);
        assert!((th.alpha_star - 1.0).abs() < 1e-6);
        assert!((th.beta - 1.0).abs() < 1e-6);

        // x³: β = α* = 0
        let th = regime_thresholds(&form(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(th.beta, 0.0);
        assert!(th.alpha_star < 1e-9, "α* = {}", th.alpha_star);
        assert!((th.mu - 1.0).abs() < 1e-9);
    }

    fn pi_eval_abs(pi: &HomogeneousForm, z: Point2) -> f64 {
        pi.eval(z).abs()
    }

    #[test]
    fn constrained_regime_endpoints() {
        let neg = form(&[1.0, 0.0, 3.0, 0.0]);
        // α above μ
        let (h, r) = hmatrix3_constrained(&neg, 4.0).unwrap();
        assert_eq!(r, Regime::IsotropicCap);
        assert!(h.frob_dist(&SymMetric2::scaled_identity(4.0)) < 1e-12);
        // α below β = 2^{1/3}
        let (h, r) = hmatrix3_constrained(&neg, 1.0).unwrap();
        assert_eq!(r, Regime::Unconstrained);
        assert!(h.frob_dist(&SymMetric2::scaled_identity(2.0_f64.cbrt())) < 1e-8);
    }

    #[test]
    fn constrained_x2y_family() {
        let pi = form(&[0.0, 1.0, 0.0, 0.0]); // x²y
        for alpha in [0.05, 0.2, 0.4] {
            let (h, regime) = hmatrix3_constrained(&pi, alpha).unwrap();
            assert_eq!(regime, Regime::QuadriTangent, "α={alpha}");
            assert!(h.min_eigenvalue() >= alpha * (1.0 - 1e-8));
            assert!(
                (h.min_eigenvalue() - alpha).abs() < 1e-6 * alpha,
                "min eig {} vs α {alpha}",
                h.min_eigenvalue()
            );
            assert!(levelset_feasible(&h, &pi));
        }
    }

    #[test]
    fn constrained_continuity_and_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let mut cases = vec![
            form(&[1.0, 0.0, 3.0, 0.0]),
            form(&[1.0, 0.0, -3.0, 0.0]),
            form(&[1.0, 0.0, -1.0, 0.0]),
        ];
        for _ in 0..6 {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            cases.push(random_cubic(&mut rng, 0.5, 20.0, sign));
        }
        for pi in &cases {
            let th = regime_thresholds(pi).unwrap();
            // continuity across thresholds
            for t in [th.mu, th.alpha_star, th.beta] {
                if t <= 2e-6 {
                    continue;
                }
                let lo = hmatrix3_constrained(pi, t - 1e-6).unwrap().0;
                let hi = hmatrix3_constrained(pi, t + 1e-6).unwrap().0;
                assert!(
                    lo.frob_dist(&hi) < 1e-4 * (1.0 + hi.trace().abs()),
                    "jump at {t} for {:?}: {lo:?} vs {hi:?}",
                    pi.coeffs()
                );
            }
            // determinant monotone in α
            let mut last = 0.0;
            for k in 1..=50 {
                let alpha = th.mu * 1.5 * k as f64 / 50.0;
                let (h, _) = hmatrix3_constrained(pi, alpha).unwrap();
                let det = h.det();
                assert!(det >= last * (1.0 - 1e-9), "det not monotone at α={alpha}");
                last = det;
                assert!(h.min_eigenvalue() >= alpha * (1.0 - 1e-8));
                assert!(levelset_feasible(&h, pi));
            }
        }
    }

    #[test]
    fn constrained2_examples() {
        let h = hmatrix2_constrained(&form(&[1.0, 0.0, 0.0]), 0.5).unwrap();
        assert!(h.frob_dist(&SymMetric2::new(1.0, 0.0, 0.5)) < 1e-12);
        let h = hmatrix2_constrained(&form(&[1.0, 0.0, 1.0]), 0.5).unwrap();
        assert!(h.frob_dist(&SymMetric2::identity()) < 1e-12);
        let h = hmatrix2_constrained(&form(&[0.0, 0.0, 0.0]), 1.0).unwrap();
        assert!(h.frob_dist(&SymMetric2::identity()) < 1e-12);
    }

    #[test]
    fn metric_field_scaling_law() {
        let omega = Polygon::unit_square();
        let f = crate::lagrange::FnField(|p: Point2| p.x * p.x + p.y * p.y);
        let z = Point2::new(0.3, 0.4);
        let p = Lp::Finite(2.0);
        let m = 2;
        let field1 = metric_field(&f, &omega, m, p, 1e-3, 1e-6).unwrap();
        let field2 = metric_field(&f, &omega, m, p, 2e-3, 1e-6).unwrap();
        let h1 = field1.sample(z).unwrap();
        let h2 = field2.sample(z).unwrap();
        // doubling ν scales h by 2^{-2p/(mp+2)}
        let factor = 2.0_f64.powf(-2.0 * 2.0 / (2.0 * 2.0 + 2.0));
        assert!(h2.frob_dist(&h1.scale(factor)) < 1e-6 * h1.trace().abs());
    }

    #[test]
    fn metric_field_degenerate_floored() {
        let omega = Polygon::rectangle(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0));
        let f = crate::lagrange::FnField(|p: Point2| p.x.powi(3));
        let field = metric_field(&f, &omega, 3, Lp::Finite(2.0), 1e-2, 1.0).unwrap();
        let h = field.sample(Point2::new(0.2, 0.1)).unwrap();
        let base = field.base_metric(Point2::new(0.2, 0.1)).unwrap();
        assert!(base.min_eigenvalue() >= 1.0 * (1.0 - 1e-8));
        // rescaled floor: α_z^{-2}·floor
        let area = base.ellipse_area();
        let alpha_z = 1e-2_f64.powf(2.0 / 8.0) * area.powf(-1.0 / 8.0);
        assert!(h.min_eigenvalue() >= alpha_z.powi(-2) * (1.0 - 1e-6));
    }

    #[test]
    fn overfitting_sentinel_disc_bracket() {
        // unit disc is inscribed in Λ(x²y² + t·y⁴) for all t in [-1, 1]
        for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let pi = form(&[0.0, 0.0, 1.0, 0.0, t]);
            assert!(levelset_feasible(&SymMetric2::identity(), &pi), "t={t}");
        }
        // ellipse maximiser areas bracket 2|D| (t>0) and |D|√(2(√2+1)) (t<0)
        let disc_area = std::f64::consts::PI;
        let s_plus = 2.0 * disc_area;
        let s_minus = disc_area * (2.0 * (2.0_f64.sqrt() + 1.0)).sqrt();
        let plus = shape::shape_ellipse(&form(&[0.0, 0.0, 1.0, 0.0, 0.5])).unwrap();
        assert!((plus.area / s_plus - 1.0).abs() < 0.02, "{} vs {s_plus}", plus.area);
        let minus = shape::shape_ellipse(&form(&[0.0, 0.0, 1.0, 0.0, -0.5])).unwrap();
        assert!((minus.area / s_minus - 1.0).abs() < 0.02, "{} vs {s_minus}", minus.area);
    }
}
