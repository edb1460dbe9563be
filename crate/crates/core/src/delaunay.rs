//! Incremental Delaunay triangulation (Bowyer–Watson) for the small and
//! medium point sets produced by mesh assembly, with an optional segment
//! recovery pass that midpoint-splits boundary segments until they appear as
//! triangulation edges.

use crate::geom::Point2;

/// `> 0` if `d` lies inside the circumcircle of the ccw triangle `(a, b, c)`.
fn incircle(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    let (ax, ay) = (a.x - d.x, a.y - d.y);
    let (bx, by) = (b.x - d.x, b.y - d.y);
    let (cx, cy) = (c.x - d.x, c.y - d.y);
    let a2 = ax * ax + ay * ay;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

/// Delaunay triangulation of a point set; returns ccw index triples.
/// Collinear inputs yield an empty triangulation.
pub fn triangulate(points: &[Point2]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return vec![];
    }
    // bounding super-triangle
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
    let mid = Point2::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
    let s = 64.0 * span;
    let superv = [
        Point2::new(mid.x - s, mid.y - s / 2.0),
        Point2::new(mid.x + s, mid.y - s / 2.0),
        Point2::new(mid.x, mid.y + s),
    ];

    let mut pts: Vec<Point2> = points.to_vec();
    pts.extend_from_slice(&superv);
    let sv = [n, n + 1, n + 2];

    let mut tris: Vec<[usize; 3]> = vec![[sv[0], sv[1], sv[2]]];
    let eps2 = (1e-12 * span) * (1e-12 * span);

    for pi in 0..n {
        let p = pts[pi];
        // cavity: triangles whose circumcircle contains p
        let mut bad = Vec::new();
        for (ti, t) in tris.iter().enumerate() {
            if incircle(pts[t[0]], pts[t[1]], pts[t[2]], p) > 0.0 {
                bad.push(ti);
            }
        }
        if bad.is_empty() {
            // duplicate or exactly-on-circle degenerate; find the containing
            // triangle instead and split it
            let mut host = None;
            for (ti, t) in tris.iter().enumerate() {
                let a = orient(pts[t[0]], pts[t[1]], p);
                let b = orient(pts[t[1]], pts[t[2]], p);
                let c = orient(pts[t[2]], pts[t[0]], p);
                if a >= -eps2 && b >= -eps2 && c >= -eps2 {
                    host = Some(ti);
                    break;
                }
            }
            match host {
                Some(ti) => bad.push(ti),
                None => continue, // coincident point, skip
            }
        }
        // boundary edges of the cavity: edges not shared by two bad triangles
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &ti in &bad {
            let t = tris[ti];
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                if let Some(pos) = edges.iter().position(|&(a, b)| a == e.1 && b == e.0) {
                    edges.swap_remove(pos);
                } else {
                    edges.push(e);
                }
            }
        }
        bad.sort_unstable_by(|a, b| b.cmp(a));
        for ti in bad {
            tris.swap_remove(ti);
        }
        for (a, b) in edges {
            // degenerate (collinear) fans are dropped
            if orient(pts[a], pts[b], p).abs() > 0.0 {
                tris.push([a, b, pi]);
            }
        }
    }

    tris.retain(|t| t.iter().all(|&v| v < n));
    // normalise to ccw
    for t in &mut tris {
        if orient(pts[t[0]], pts[t[1]], pts[t[2]]) < 0.0 {
            t.swap(1, 2);
        }
    }
    tris
}

/// Delaunay triangulation constrained to contain every input segment as a
/// union of edges, by midpoint-splitting any segment that is missing and
/// re-triangulating. Segments are index pairs into `points`; the returned
/// point list may contain added split points.
pub fn triangulate_with_segments(
    points: &[Point2],
    segments: &[(usize, usize)],
) -> (Vec<Point2>, Vec<[usize; 3]>) {
    let mut pts = points.to_vec();
    let mut segs: Vec<(usize, usize)> = segments.to_vec();
    for _round in 0..12 {
        let tris = triangulate(&pts);
        let mut edge_set = std::collections::HashSet::new();
        for t in &tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edge_set.insert((a.min(b), a.max(b)));
            }
        }
        let mut missing = Vec::new();
        for (i, &(a, b)) in segs.iter().enumerate() {
            if !edge_set.contains(&(a.min(b), a.max(b))) {
                missing.push(i);
            }
        }
        if missing.is_empty() {
            return (pts, tris);
        }
        // split each missing segment at its midpoint
        for &i in missing.iter().rev() {
            let (a, b) = segs[i];
            let midpoint = Point2::new((pts[a].x + pts[b].x) / 2.0, (pts[a].y + pts[b].y) / 2.0);
            let mi = pts.len();
            pts.push(midpoint);
            segs[i] = (a, mi);
            segs.push((mi, b));
        }
    }
    let tris = triangulate(&pts);
    (pts, tris)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gives_two_triangles() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let tris = triangulate(&pts);
        assert_eq!(tris.len(), 2);
        let area: f64 = tris
            .iter()
            .map(|t| orient(pts[t[0]], pts[t[1]], pts[t[2]]).abs() / 2.0)
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_covers_area_and_is_delaunay() {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                pts.push(Point2::new(i as f64 + 0.01 * j as f64, j as f64));
            }
        }
        let tris = triangulate(&pts);
        let area: f64 = tris
            .iter()
            .map(|t| orient(pts[t[0]], pts[t[1]], pts[t[2]]).abs() / 2.0)
            .sum();
        // convex hull of a sheared grid
        assert!((area - 25.0).abs() < 1e-9);
        // empty-circle property against all other points
        for t in &tris {
            for (k, p) in pts.iter().enumerate() {
                if t.contains(&k) {
                    continue;
                }
                assert!(
                    incircle(pts[t[0]], pts[t[1]], pts[t[2]], *p) <= 1e-6,
                    "non-Delaunay triangle {t:?} vs point {k}"
                );
            }
        }
    }

    #[test]
    fn collinear_points_yield_nothing() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 2.0),
        ];
        assert!(triangulate(&pts).is_empty());
    }

    #[test]
    fn segment_recovery_inserts_midpoints() {
        // a segment cutting across a dense blob of points will be missing
        // from the unconstrained triangulation
        let mut pts = vec![Point2::new(-2.0, 0.0), Point2::new(2.0, 0.0)];
        for i in 0..8 {
            let x = -1.5 + 0.4 * i as f64;
            pts.push(Point2::new(x, 0.35));
            pts.push(Point2::new(x, -0.35));
        }
        let (newpts, tris) = triangulate_with_segments(&pts, &[(0, 1)]);
        let mut edge_set = std::collections::HashSet::new();
        for t in &tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edge_set.insert((a.min(b), a.max(b)));
            }
        }
        // walk the segment through split points
        let on_seg: Vec<usize> = (0..newpts.len())
            .filter(|&i| newpts[i].y.abs() < 1e-12 && newpts[i].x >= -2.0 && newpts[i].x <= 2.0)
            .collect();
        let mut xs: Vec<(f64, usize)> = on_seg.iter().map(|&i| (newpts[i].x, i)).collect();
        xs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in xs.windows(2) {
            let (a, b) = (w[0].1, w[1].1);
            assert!(
                edge_set.contains(&(a.min(b), a.max(b))),
                "segment piece {a}-{b} missing"
            );
        }
    }
}
