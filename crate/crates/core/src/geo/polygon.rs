//! Planar polygon primitives.
//!
//! All coordinates are kilometres in a local projected plane. Polygons are
//! single rings stored counter-clockwise without a repeated closing vertex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the projected km plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_squared(other).sqrt()
    }

    pub fn distance_squared(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Cross product of (b - a) and (c - a); positive when the turn a->b->c is
/// counter-clockwise.
fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// A simple polygon ring. The constructor normalises orientation to
/// counter-clockwise and drops repeated consecutive vertices; it does not
/// check simplicity (see [`Polygon::ensure_simple`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        // Drop an explicit closing vertex and consecutive duplicates.
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        vertices.dedup();
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(vertices.len()));
        }
        let mut poly = Polygon { vertices };
        if poly.signed_area() < 0.0 {
            poly.vertices.reverse();
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle helper.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
        .expect("rectangle is a valid polygon")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Shoelace signed area; positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.x * b.y - b.x * a.y;
        }
        acc / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
            a += w;
        }
        if a.abs() < f64::EPSILON {
            // Fall back to the vertex mean for near-degenerate rings.
            let inv = 1.0 / n as f64;
            let sx: f64 = self.vertices.iter().map(|p| p.x).sum();
            let sy: f64 = self.vertices.iter().map(|p| p.y).sum();
            return Point::new(sx * inv, sy * inv);
        }
        Point::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for p in &self.vertices {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        (min, max)
    }

    /// Even-odd point-in-polygon test. Points exactly on an edge may land on
    /// either side; use [`Polygon::strictly_contains`] when that matters.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
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

    /// True when `p` is inside and at least `eps` away from every edge.
    pub fn strictly_contains(&self, p: Point, eps: f64) -> bool {
        if !self.contains(p) {
            return false;
        }
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if point_segment_distance(p, a, b) < eps {
                return false;
            }
        }
        true
    }

    /// Rejects self-intersecting rings: any contact between non-adjacent
    /// edges, including touching endpoints, makes the ring non-simple.
    pub fn ensure_simple(&self) -> Result<()> {
        let n = self.vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let (c, d) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_touch(a, b, c, d) {
                    return Err(Error::SelfIntersecting(i));
                }
            }
        }
        Ok(())
    }

    /// Clips against the half-plane `{p : n·p <= c}` (Sutherland–Hodgman with
    /// a single clip edge). Returns `None` when nothing is left.
    pub fn clip_halfplane(&self, nx: f64, ny: f64, c: f64) -> Option<Polygon> {
        let m = self.vertices.len();
        let mut out: Vec<Point> = Vec::with_capacity(m + 2);
        for i in 0..m {
            let cur = self.vertices[i];
            let nxt = self.vertices[(i + 1) % m];
            let cur_val = nx * cur.x + ny * cur.y;
            let nxt_val = nx * nxt.x + ny * nxt.y;
            let cur_in = cur_val <= c;
            let nxt_in = nxt_val <= c;
            if cur_in {
                out.push(cur);
            }
            if cur_in != nxt_in {
                let t = (c - cur_val) / (nxt_val - cur_val);
                out.push(Point::new(
                    cur.x + t * (nxt.x - cur.x),
                    cur.y + t * (nxt.y - cur.y),
                ));
            }
        }
        out.dedup();
        if out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        if out.len() < 3 {
            return None;
        }
        let poly = Polygon { vertices: out };
        if poly.area() < 1e-15 {
            return None;
        }
        Some(poly)
    }

    /// Fan decomposition from the first vertex: `(sign, triangle)` pairs whose
    /// signed union reproduces the ring even when it is non-convex.
    fn signed_fan(&self) -> Vec<(f64, [Point; 3])> {
        let o = self.vertices[0];
        let mut fans = Vec::with_capacity(self.vertices.len().saturating_sub(2));
        for w in self.vertices[1..].windows(2) {
            let s = cross(o, w[0], w[1]);
            if s == 0.0 {
                continue;
            }
            let tri = if s > 0.0 {
                [o, w[0], w[1]]
            } else {
                [o, w[1], w[0]]
            };
            fans.push((s.signum(), tri));
        }
        fans
    }
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let len2 = a.distance_squared(&b);
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = (((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)))
}

/// Whether segments (a,b) and (c,d) share any point.
fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Area of a convex clip of one fan triangle against another.
fn triangle_pair_area(t: &[Point; 3], u: &[Point; 3]) -> f64 {
    // Interior of a CCW triangle is the meet of the left half-planes of its
    // edges: (p - a)·n <= 0 with n the outward normal of edge a->b.
    let mut poly = Polygon {
        vertices: u.to_vec(),
    };
    for i in 0..3 {
        let a = t[i];
        let b = t[(i + 1) % 3];
        let nx = b.y - a.y;
        let ny = a.x - b.x;
        let c = nx * a.x + ny * a.y;
        match poly.clip_halfplane(nx, ny, c) {
            Some(clipped) => poly = clipped,
            None => return 0.0,
        }
    }
    poly.area()
}

fn bboxes_disjoint(a: &Polygon, b: &Polygon) -> bool {
    let (amin, amax) = a.bounding_box();
    let (bmin, bmax) = b.bounding_box();
    amax.x < bmin.x || bmax.x < amin.x || amax.y < bmin.y || bmax.y < amin.y
}

/// Total order on rings used to canonicalise argument order, so that the
/// intersection area is bitwise symmetric in its arguments.
fn ring_order(a: &Polygon, b: &Polygon) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match a.vertices.len().cmp(&b.vertices.len()) {
        Ordering::Equal => {}
        other => return other,
    }
    for (p, q) in a.vertices.iter().zip(&b.vertices) {
        match p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    Ordering::Equal
}

/// Area of the intersection of two simple polygons, in km².
///
/// Both rings are validated; self-intersecting input is rejected. The result
/// is symmetric in its arguments by construction.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> Result<f64> {
    a.ensure_simple()?;
    b.ensure_simple()?;
    Ok(intersection_area_unchecked(a, b))
}

/// As [`intersection_area`] but without the simplicity checks; used on rings
/// that were validated at ingestion.
pub fn intersection_area_unchecked(a: &Polygon, b: &Polygon) -> f64 {
    let (first, second) = if ring_order(a, b) == std::cmp::Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    if bboxes_disjoint(first, second) {
        return 0.0;
    }
    // 1_P·1_Q expanded over the signed fans of both rings: every term is a
    // convex-convex clip.
    let fans_p = first.signed_fan();
    let fans_q = second.signed_fan();
    let mut total = 0.0;
    for (sp, tp) in &fans_p {
        for (sq, tq) in &fans_q {
            let area = triangle_pair_area(tp, tq);
            if area > 0.0 {
                total += sp * sq * area;
            }
        }
    }
    total.max(0.0)
}
