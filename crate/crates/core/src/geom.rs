//! Small fixed-size 2D geometry kit: points, linear maps, symmetric
//! matrices and triangles.

use std::ops::{Add, Mul, Neg, Sub};

/// A point (or vector) of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product `self × other`.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn unit(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// A 2×2 real matrix acting on points, and on forms by composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMap2 {
    /// Row-major entries `[[a, b], [c, d]]` of the matrix.
    pub m: [[f64; 2]; 2],
}

impl LinearMap2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Self::new(a, 0.0, 0.0, d)
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Self::new(
            self.m[1][1] / d,
            -self.m[0][1] / d,
            -self.m[1][0] / d,
            self.m[0][0] / d,
        ))
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        Point2::new(
            self.m[0][0] * p.x + self.m[0][1] * p.y,
            self.m[1][0] * p.x + self.m[1][1] * p.y,
        )
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn mul_map(&self, rhs: &LinearMap2) -> Self {
        let a = &self.m;
        let b = &rhs.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        let t = self.transpose().mul_map(self);
        let s = SymMetric2::new(t.m[0][0], 0.5 * (t.m[0][1] + t.m[1][0]), t.m[1][1]);
        let (l1, l2, _) = s.eigen();
        l1.abs().max(l2.abs()).sqrt()
    }
}

/// A symmetric 2×2 matrix `[[h11, h12], [h12, h22]]`; when positive definite
/// it defines the ellipse `{z : <Hz, z> <= 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMetric2 {
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
}

impl SymMetric2 {
    pub const fn new(h11: f64, h12: f64, h22: f64) -> Self {
        Self { h11, h12, h22 }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn scaled_identity(a: f64) -> Self {
        Self::new(a, 0.0, a)
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12 * self.h12
    }

    pub fn trace(&self) -> f64 {
        self.h11 + self.h22
    }

    /// Quadratic form `<Hz, z>`.
    pub fn quad(&self, z: Point2) -> f64 {
        self.h11 * z.x * z.x + 2.0 * self.h12 * z.x * z.y + self.h22 * z.y * z.y
    }

    /// Eigen-decomposition `(λ1, λ2, U)` with `λ1 >= λ2` and
    /// `H = Uᵀ diag(λ1, λ2) U`, `U` a rotation.
    pub fn eigen(&self) -> (f64, f64, LinearMap2) {
        let half_tr = 0.5 * (self.h11 + self.h22);
        let half_diff = 0.5 * (self.h11 - self.h22);
        let disc = half_diff.hypot(self.h12);
        let l1 = half_tr + disc;
        let l2 = half_tr - disc;
        // angle of the eigenvector for λ1
        let theta = if self.h12 == 0.0 && half_diff >= 0.0 {
            0.0
        } else if self.h12 == 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            0.5 * (2.0 * self.h12).atan2(2.0 * half_diff)
        };
        // H = Uᵀ D U with U = R(-theta)
        (l1, l2, LinearMap2::rotation(-theta))
    }

    /// Rebuild `Uᵀ diag(l1, l2) U` from a rotation `U`.
    pub fn from_eigen(l1: f64, l2: f64, u: &LinearMap2) -> Self {
        let d = LinearMap2::diag(l1, l2);
        let m = u.transpose().mul_map(&d).mul_map(u);
        Self::new(m.m[0][0], 0.5 * (m.m[0][1] + m.m[1][0]), m.m[1][1])
    }

    /// Congruence transform `φᵀ H φ` (the matrix of `z -> <H φz, φz>`).
    pub fn congruence(&self, phi: &LinearMap2) -> Self {
        let h = LinearMap2::new(self.h11, self.h12, self.h12, self.h22);
        let m = phi.transpose().mul_map(&h).mul_map(phi);
        Self::new(m.m[0][0], 0.5 * (m.m[0][1] + m.m[1][0]), m.m[1][1])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().1
    }

    /// Area of the ellipse `{<Hz,z> <= 1}`; infinite when not positive definite.
    pub fn ellipse_area(&self) -> f64 {
        let d = self.det();
        if d <= 0.0 {
            f64::INFINITY
        } else {
            std::f64::consts::PI / d.sqrt()
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.h11 * s, self.h12 * s, self.h22 * s)
    }

    pub fn frob_dist(&self, other: &Self) -> f64 {
        let da = self.h11 - other.h11;
        let db = self.h12 - other.h12;
        let dc = self.h22 - other.h22;
        (da * da + 2.0 * db * db + dc * dc).sqrt()
    }
}

/// A triangle given by its three vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [Point2; 3],
}

impl Triangle {
    pub const fn new(a: Point2, b: Point2, c: Point2) -> Self {
        Self { v: [a, b, c] }
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * (self.v[1] - self.v[0]).cross(self.v[2] - self.v[0])
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn barycenter(&self) -> Point2 {
        Point2::new(
            (self.v[0].x + self.v[1].x + self.v[2].x) / 3.0,
            (self.v[0].y + self.v[1].y + self.v[2].y) / 3.0,
        )
    }

    pub fn diameter(&self) -> f64 {
        let d01 = self.v[0].dist(self.v[1]);
        let d12 = self.v[1].dist(self.v[2]);
        let d20 = self.v[2].dist(self.v[0]);
        d01.max(d12).max(d20)
    }

    /// Unit-area equilateral triangle centered at the origin, one vertex on
    /// the positive x-axis (so it is symmetric about that axis).
    pub fn equilateral_unit() -> Self {
        // circumradius r with area (3√3/4) r² = 1
        let r = (4.0 / (3.0 * 3.0_f64.sqrt())).sqrt();
        let third = 2.0 * std::f64::consts::FRAC_PI_3;
        Self::new(
            Point2::unit(0.0) * r,
            Point2::unit(third) * r,
            Point2::unit(2.0 * third) * r,
        )
    }

    /// Image under a linear map.
    pub fn map(&self, phi: &LinearMap2) -> Self {
        Self::new(phi.apply(self.v[0]), phi.apply(self.v[1]), phi.apply(self.v[2]))
    }

    pub fn translate(&self, h: Point2) -> Self {
        Self::new(self.v[0] + h, self.v[1] + h, self.v[2] + h)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self::new(self.v[0] * t, self.v[1] * t, self.v[2] * t)
    }

    /// Affine map sending the reference triangle conv{(0,0),(1,0),(0,1)}
    /// onto this triangle: `p -> v0 + J p`.
    pub fn from_reference(&self) -> (Point2, LinearMap2) {
        let e1 = self.v[1] - self.v[0];
        let e2 = self.v[2] - self.v[0];
        (self.v[0], LinearMap2::new(e1.x, e2.x, e1.y, e2.y))
    }

    /// Barycentric combination `l0 v0 + l1 v1 + l2 v2`.
    pub fn bary_point(&self, l0: f64, l1: f64, l2: f64) -> Point2 {
        Point2::new(
            l0 * self.v[0].x + l1 * self.v[1].x + l2 * self.v[2].x,
            l0 * self.v[0].y + l1 * self.v[1].y + l2 * self.v[2].y,
        )
    }

    /// Whether `p` lies inside (or on the boundary of) the triangle, with a
    /// signed-area tolerance `tol` per edge.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let s = self.signed_area().signum();
        for i in 0..3 {
            let a = self.v[i];
            let b = self.v[(i + 1) % 3];
            if s * (b - a).cross(p - a) < -tol {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilateral_has_unit_area() {
        let t = Triangle::equilateral_unit();
        assert!((t.area() - 1.0).abs() < 1e-12);
        assert!(t.barycenter().norm() < 1e-12);
        // all sides equal
        let d01 = t.v[0].dist(t.v[1]);
        let d12 = t.v[1].dist(t.v[2]);
        assert!((d01 - d12).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs() {
        let h = SymMetric2::new(3.0, 1.2, -0.5);
        let (l1, l2, u) = h.eigen();
        assert!(l1 >= l2);
        let r = SymMetric2::from_eigen(l1, l2, &u);
        assert!(h.frob_dist(&r) < 1e-12);
        // U is a rotation
        assert!((u.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn congruence_matches_pullback() {
        let h = SymMetric2::new(2.0, 0.3, 1.0);
        let phi = LinearMap2::new(1.0, 0.5, -0.2, 2.0);
        let g = h.congruence(&phi);
        let z = Point2::new(0.7, -1.3);
        assert!((g.quad(z) - h.quad(phi.apply(z))).abs() < 1e-12);
    }
}
