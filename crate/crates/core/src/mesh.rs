//! Conforming triangulations: polygons, mesh storage and text format,
//! uniform baselines, conformity checking and equidistribution diagnostics.
//!
//! The macro-patch construction of adapted meshes lives in [`adapt`].

pub mod adapt;

use std::io::{BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::delaunay;
use crate::geom::{Point2, Triangle};
use crate::lagrange::{self, Lp, ScalarField};

pub use adapt::{adapt_mesh, adapt_mesh_with_stats, build_patch_plan, AdaptStats, PatchItem, PatchPlan};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("polygon needs at least 3 vertices")]
    TooFewVertices,
    #[error("polygon is degenerate (area {0:.3e})")]
    DegeneratePolygon(f64),
    #[error("polygon is self-intersecting")]
    SelfIntersecting,
    #[error("grid resolution must be >= 1")]
    BadResolution,
    #[error("macro radius must be positive")]
    BadRadius,
    #[error("target triangle count too small, need at least {0}")]
    TargetTooSmall(usize),
    #[error("mesh generation targets p < ∞; L^∞ error evaluation remains available on any mesh")]
    InfinityMeshing,
    #[error("triangle index out of range in mesh file")]
    BadIndex,
    #[error("malformed mesh file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lagrange(#[from] lagrange::LagrangeError),
    #[error("shape oracle failed: {0}")]
    Oracle(String),
    #[error("derivative data of degree {0} unavailable for this function")]
    MissingJet(usize),
}

/// A simple polygon with counterclockwise vertex loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self, MeshError> {
        if vertices.len() < 3 {
            return Err(MeshError::TooFewVertices);
        }
        let area = signed_area(&vertices);
        if area.abs() < 1e-300 {
            return Err(MeshError::DegeneratePolygon(area));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let poly = Self { vertices };
        if poly.self_intersects() {
            return Err(MeshError::SelfIntersecting);
        }
        Ok(poly)
    }

    pub fn rectangle(lo: Point2, hi: Point2) -> Self {
        Self {
            vertices: vec![
                lo,
                Point2::new(hi.x, lo.y),
                hi,
                Point2::new(lo.x, hi.y),
            ],
        }
    }

    pub fn unit_square() -> Self {
        Self::rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0))
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(a.dist(*b));
            }
        }
        best
    }

    /// Axis-aligned rectangle detection; returns the corner pair.
    pub fn as_rectangle(&self) -> Option<(Point2, Point2)> {
        if self.vertices.len() != 4 {
            return None;
        }
        let (lo, hi) = self.bbox();
        let tol = 1e-12 * self.diameter();
        let corners = [
            lo,
            Point2::new(hi.x, lo.y),
            hi,
            Point2::new(lo.x, hi.y),
        ];
        let ok = corners
            .iter()
            .all(|c| self.vertices.iter().any(|v| v.dist(*c) <= tol));
        ok.then_some((lo, hi))
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let tol = 1e-12 * self.diameter() * self.diameter();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            (b - a).cross(c - b) >= -tol
        })
    }

    /// Point-in-polygon by crossing number; boundary points (within `tol`)
    /// count as inside.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            if dist_to_segment(p, self.vertices[i], self.vertices[(i + 1) % n]) <= tol {
                return true;
            }
        }
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn self_intersects(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a1, a2) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in (i + 1)..n {
                // skip adjacent edges
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (b1, b2) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_cross(a1, a2, b1, b2) {
                    return true;
                }
            }
        }
        false
    }

    /// Read a polygon from "x y" lines.
    pub fn read_text(r: impl std::io::Read) -> Result<Self, MeshError> {
        let reader = std::io::BufReader::new(r);
        let mut verts = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MeshError::Format(format!("bad polygon line {line:?}")))?;
            let y: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MeshError::Format(format!("bad polygon line {line:?}")))?;
            verts.push(Point2::new(x, y));
        }
        Self::new(verts)
    }
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += vertices[i].cross(vertices[(i + 1) % n]);
    }
    acc / 2.0
}

fn dist_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

fn segments_cross(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> bool {
    let d = |p: Point2, q: Point2, r: Point2| (q - p).cross(r - p);
    let d1 = d(a1, a2, b1);
    let d2 = d(a1, a2, b2);
    let d3 = d(b1, b2, a1);
    let d4 = d(b1, b2, a2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// A triangulation: shared vertices and index triples (ccw).
#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn triangle(&self, t: &[usize; 3]) -> Triangle {
        Triangle::new(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]])
    }

    pub fn triangle_at(&self, i: usize) -> Triangle {
        self.triangle(&self.triangles[i])
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle(t).area()).sum()
    }

    pub fn max_diameter(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| self.triangle(t).diameter())
            .fold(0.0, f64::max)
    }

    fn bbox_extent(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (hi.x - lo.x).max(hi.y - lo.y)
    }

    /// Force counterclockwise orientation on every triangle.
    pub fn orient_ccw(&mut self) {
        for t in &mut self.triangles {
            if self.vertices[t[1]].cross_about(self.vertices[t[0]], self.vertices[t[2]]) < 0.0 {
                t.swap(1, 2);
            }
        }
    }

    /// Edge table: undirected edge -> triangle count.
    pub fn edge_counts(&self) -> std::collections::HashMap<(usize, usize), usize> {
        let mut map = std::collections::HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *map.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        map
    }

    /// Serialise in the plain text format:
    /// `MESH2 <nv> <nt>`, then `nv` lines `x y`, then `nt` lines `i j k`.
    pub fn write_text(&self, mut w: impl Write) -> Result<(), MeshError> {
        writeln!(w, "MESH2 {} {}", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.16e} {:.16e}", v.x, v.y)?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_text(r: impl std::io::Read) -> Result<Self, MeshError> {
        let mut reader = std::io::BufReader::new(r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let mut it = header.split_whitespace();
        if it.next() != Some("MESH2") {
            return Err(MeshError::Format("missing MESH2 header".into()));
        }
        let nv: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MeshError::Format("bad vertex count".into()))?;
        let nt: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MeshError::Format("bad triangle count".into()))?;
        let mut vertices = Vec::with_capacity(nv);
        let mut triangles = Vec::with_capacity(nt);
        let mut line = String::new();
        for _ in 0..nv {
            line.clear();
            reader.read_line(&mut line)?;
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MeshError::Format("bad vertex line".into()))?;
            let y: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MeshError::Format("bad vertex line".into()))?;
            vertices.push(Point2::new(x, y));
        }
        for _ in 0..nt {
            line.clear();
            reader.read_line(&mut line)?;
            let mut it = line.split_whitespace();
            let mut tri = [0usize; 3];
            for v in &mut tri {
                *v = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| MeshError::Format("bad triangle line".into()))?;
                if *v >= nv {
                    return Err(MeshError::BadIndex);
                }
            }
            triangles.push(tri);
        }
        Ok(Self { vertices, triangles })
    }
}

trait CrossAbout {
    fn cross_about(&self, origin: Point2, other: Point2) -> f64;
}

impl CrossAbout for Point2 {
    fn cross_about(&self, origin: Point2, other: Point2) -> f64 {
        (*self - origin).cross(other - origin)
    }
}

/// Uniform baseline mesh: for an axis-aligned rectangle, the `n×n` grid with
/// each cell split in two; for a general polygon, a Delaunay triangulation of
/// a clipped grid with the boundary recovered as constraint segments.
pub fn uniform_mesh(omega: &Polygon, n: usize) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::BadResolution);
    }
    if let Some((lo, hi)) = omega.as_rectangle() {
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(Point2::new(
                    lo.x + (hi.x - lo.x) * i as f64 / n as f64,
                    lo.y + (hi.y - lo.y) * j as f64 / n as f64,
                ));
            }
        }
        let at = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
                triangles.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
        return Ok(Mesh { vertices, triangles });
    }

    // general polygon: interior grid + sampled boundary, constrained Delaunay
    let (lo, hi) = omega.bbox();
    let extent = (hi.x - lo.x).max(hi.y - lo.y);
    let step = extent / n as f64;
    let mut points = Vec::new();
    let mut segments = Vec::new();
    let verts = omega.vertices();
    for i in 0..verts.len() {
        let a = verts[i];
        let b = verts[(i + 1) % verts.len()];
        let len = a.dist(b);
        let pieces = (len / step).ceil().max(1.0) as usize;
        let start = points.len();
        for k in 0..pieces {
            points.push(a + (b - a) * (k as f64 / pieces as f64));
        }
        for k in 0..pieces {
            let p1 = start + k;
            let p2 = if k + 1 == pieces {
                // endpoint of this edge is the start of the next; patched below
                usize::MAX
            } else {
                start + k + 1
            };
            segments.push((p1, p2));
        }
    }
    // close the loop: MAX markers point to the next edge's first vertex
    let boundary_count = points.len();
    let mut fixups = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if seg.1 == usize::MAX {
            fixups.push(i);
        }
    }
    {
        let mut edge_starts = Vec::new();
        let mut idx = 0;
        for i in 0..verts.len() {
            edge_starts.push(idx);
            let a = verts[i];
            let b = verts[(i + 1) % verts.len()];
            let len = a.dist(b);
            idx += (len / step).ceil().max(1.0) as usize;
        }
        for (edge_i, seg_i) in fixups.into_iter().enumerate() {
            let next_start = edge_starts[(edge_i + 1) % verts.len()];
            segments[seg_i].1 = next_start;
        }
    }
    // interior grid points away from the boundary
    let margin = 0.4 * step;
    let nx = ((hi.x - lo.x) / step).ceil() as usize;
    let ny = ((hi.y - lo.y) / step).ceil() as usize;
    for j in 0..=ny {
        for i in 0..=nx {
            let p = Point2::new(lo.x + i as f64 * step, lo.y + j as f64 * step);
            if !omega.contains(p, 0.0) {
                continue;
            }
            let near = (0..boundary_count).any(|k| points[k].dist(p) < margin)
                || (0..verts.len()).any(|k| {
                    dist_to_segment(p, verts[k], verts[(k + 1) % verts.len()]) < margin
                });
            if !near {
                points.push(p);
            }
        }
    }
    let (pts, tris) = delaunay::triangulate_with_segments(&points, &segments);
    let keep: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| {
            let c = Triangle::new(pts[t[0]], pts[t[1]], pts[t[2]]).barycenter();
            omega.contains(c, 0.0)
        })
        .collect();
    let mut mesh = compact_mesh(&pts, &keep);
    mesh.orient_ccw();
    Ok(mesh)
}

/// Drop unreferenced vertices and re-index.
fn compact_mesh(points: &[Point2], triangles: &[[usize; 3]]) -> Mesh {
    let mut used = vec![usize::MAX; points.len()];
    let mut vertices = Vec::new();
    let mut out = Vec::with_capacity(triangles.len());
    for t in triangles {
        let mut nt = [0usize; 3];
        for (k, &v) in t.iter().enumerate() {
            if used[v] == usize::MAX {
                used[v] = vertices.len();
                vertices.push(points[v]);
            }
            nt[k] = used[v];
        }
        out.push(nt);
    }
    Mesh { vertices, triangles: out }
}

/// Conforming mesh with every triangle diameter at most `r`.
pub fn macro_mesh(omega: &Polygon, r: f64) -> Result<Mesh, MeshError> {
    if r <= 0.0 {
        return Err(MeshError::BadRadius);
    }
    let n = ((omega.diameter() / r).ceil() as usize) * 2;
    uniform_mesh(omega, n.max(1))
}

/// Outcome of [`check_conforming`].
#[derive(Debug, Clone)]
pub struct ConformityReport {
    pub pass: bool,
    pub triangle_count: usize,
    pub vertex_count: usize,
    pub total_area: f64,
    /// Area enclosed by the boundary loops, for comparison with `total_area`.
    pub boundary_area: f64,
    pub issues: Vec<String>,
}

impl std::fmt::Display for ConformityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{}: {} triangles, {} vertices, area {:.6}",
            if self.pass { "PASS" } else { "FAIL" },
            self.triangle_count,
            self.vertex_count,
            self.total_area
        )?;
        for issue in &self.issues {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

/// Verify edge sharing, orientation, degeneracy, hanging nodes and the
/// area consistency between the triangles and the boundary loops.
pub fn check_conforming(mesh: &Mesh) -> ConformityReport {
    let mut issues = Vec::new();
    let extent = mesh.bbox_extent().max(1e-300);
    let degenerate_tol = 1e-14 * extent * extent;

    for (i, t) in mesh.triangles.iter().enumerate() {
        let tri = mesh.triangle(t);
        if tri.signed_area() <= degenerate_tol {
            issues.push(format!(
                "triangle {i} is degenerate or mis-oriented (signed area {:.3e})",
                tri.signed_area()
            ));
        }
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            issues.push(format!("triangle {i} repeats a vertex"));
        }
    }

    let counts = mesh.edge_counts();
    let mut boundary_edges = Vec::new();
    for (&(a, b), &c) in &counts {
        match c {
            1 => boundary_edges.push((a, b)),
            2 => {}
            c => issues.push(format!("edge ({a},{b}) shared by {c} triangles")),
        }
    }
    // two ccw triangles on the same side of an edge traverse it in the same
    // direction: an overlap or fold
    {
        let mut directed = std::collections::HashMap::new();
        for t in &mesh.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0usize) += 1;
            }
        }
        for (&(a, b), &c) in &directed {
            if c > 1 {
                issues.push(format!("edge ({a},{b}) traversed {c} times in the same direction"));
            }
        }
    }

    // hanging nodes: a vertex strictly inside a boundary edge
    let hang_tol = 1e-9 * extent;
    for &(a, b) in &boundary_edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = pa.dist(pb);
        for (vi, v) in mesh.vertices.iter().enumerate() {
            if vi == a || vi == b {
                continue;
            }
            if dist_to_segment(*v, pa, pb) < hang_tol
                && v.dist(pa) > hang_tol
                && v.dist(pb) > hang_tol
                && v.dist(pa) < len
                && v.dist(pb) < len
            {
                issues.push(format!("vertex {vi} hangs on boundary edge ({a},{b})"));
            }
        }
    }

    // boundary loops vs area sum: overlapping triangles make the sum exceed
    // the enclosed area
    let total_area = mesh.total_area();
    let boundary_area = {
        // oriented boundary edges: use the triangle orientation
        let mut acc = 0.0;
        let mut directed = std::collections::HashSet::new();
        for t in &mesh.triangles {
            for k in 0..3 {
                directed.insert((t[k], t[(k + 1) % 3]));
            }
        }
        for t in &mesh.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if !directed.contains(&(b, a)) {
                    acc += mesh.vertices[a].cross(mesh.vertices[b]);
                }
            }
        }
        acc / 2.0
    };
    if (total_area - boundary_area).abs() > 1e-8 * total_area.max(boundary_area) {
        issues.push(format!(
            "triangle area sum {total_area:.9} does not match boundary loop area {boundary_area:.9}"
        ));
    }

    ConformityReport {
        pass: issues.is_empty(),
        triangle_count: mesh.triangles.len(),
        vertex_count: mesh.vertices.len(),
        total_area,
        boundary_area,
        issues,
    }
}

/// Per-triangle error statistics on a mesh.
#[derive(Debug, Clone)]
pub struct EquidistributionReport {
    pub triangle_count: usize,
    /// 10th percentile of per-triangle errors.
    pub p10: f64,
    /// 90th percentile of per-triangle errors.
    pub p90: f64,
    /// `p90 / p10`; near 1 on a perfectly equidistributed mesh.
    pub percentile_ratio: f64,
    /// `sup_T diam(T) · √N`, the admissibility constant estimate.
    pub admissibility: f64,
    pub global_error: f64,
}

/// Compute per-triangle errors of `v` and summarise their spread.
pub fn equidistribution_report(
    v: &dyn ScalarField,
    mesh: &Mesh,
    m: usize,
    p: Lp,
) -> Result<EquidistributionReport, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::Format("empty mesh".into()));
    }
    let locals: Vec<f64> = mesh
        .triangles
        .par_iter()
        .map(|t| lagrange::local_error(v, &mesh.triangle(t), m, p))
        .collect::<Result<_, _>>()?;
    let mut sorted = locals.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let pick = |q: f64| sorted[((q * (n - 1) as f64).round() as usize).min(n - 1)];
    let p10 = pick(0.1);
    let p90 = pick(0.9);
    let global = match p {
        Lp::Finite(pv) => locals.iter().map(|e| e.powf(pv)).sum::<f64>().powf(1.0 / pv),
        Lp::Infinity => locals.iter().copied().fold(0.0, f64::max),
    };
    Ok(EquidistributionReport {
        triangle_count: n,
        p10,
        p90,
        percentile_ratio: if p10 > 0.0 { p90 / p10 } else { f64::INFINITY },
        admissibility: mesh.max_diameter() * (n as f64).sqrt(),
        global_error: global,
    })
}
