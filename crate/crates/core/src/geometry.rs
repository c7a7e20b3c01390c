//! Planar points and convex polygon primitives used by the mesh builders,
//! the shifted-overlap computations and the quadrature routines.
//!
//! Polygons are plain vertex loops (`&[Point]`) in counter-clockwise order
//! without a repeated closing vertex.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Rotates by -90 degrees; for a counter-clockwise boundary this is the outward normal direction.
    pub fn perp_cw(self) -> Point {
        Point::new(self.y, -self.x)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Shoelace formula; positive for counter-clockwise loops.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let origin = poly[0];
    let mut acc = 0.0;
    for i in 1..n - 1 {
        acc += (poly[i] - origin).cross(poly[i + 1] - origin);
    }
    0.5 * acc
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

pub fn centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let origin = poly[0];
    let mut a = 0.0;
    let mut c = Point::default();
    for i in 1..n.saturating_sub(1) {
        let p = poly[i] - origin;
        let q = poly[i + 1] - origin;
        let w = p.cross(q);
        a += w;
        c = c + (p + q) * w;
    }
    if a == 0.0 {
        let sum = poly.iter().fold(Point::default(), |s, &p| s + p);
        return sum * (1.0 / n as f64);
    }
    origin + c * (1.0 / (3.0 * a))
}

/// Largest vertex-to-vertex distance, which is the diameter of a convex polygon.
pub fn diameter(poly: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, &p) in poly.iter().enumerate() {
        for &q in &poly[i + 1..] {
            d = d.max(p.distance(q));
        }
    }
    d
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a.lerp(b, t))
}

/// Distance from `p` to the boundary of a polygon.
pub fn boundary_distance(p: Point, poly: &[Point]) -> f64 {
    edges(poly)
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Iterates over the closed edge list of a vertex loop.
pub fn edges(poly: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = poly.len();
    (0..n).map(move |i| (poly[i], poly[(i + 1) % n]))
}

/// True when `p` lies inside (or within `tol` of) a counter-clockwise convex polygon.
pub fn convex_contains(poly: &[Point], p: Point, tol: f64) -> bool {
    edges(poly).all(|(a, b)| {
        let e = b - a;
        let len = e.norm();
        len == 0.0 || e.cross(p - a) / len >= -tol
    })
}

pub fn is_convex_ccw(poly: &[Point], tol: f64) -> bool {
    let n = poly.len();
    if n < 3 || signed_area(poly) <= 0.0 {
        return false;
    }
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        (b - a).cross(c - b) >= -tol
    })
}

/// Axis-aligned bounding box `(min, max)`.
pub fn bounding_box(poly: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

/// Half-plane `{p : normal·p <= offset}`.
#[derive(Clone, Copy, Debug)]
pub struct HalfPlane {
    pub normal: Point,
    pub offset: f64,
}

impl HalfPlane {
    /// Points closer to `a` than to `b`.
    pub fn bisector(a: Point, b: Point) -> Self {
        let normal = b - a;
        let mid = (a + b) * 0.5;
        Self {
            normal,
            offset: normal.dot(mid),
        }
    }

    /// Left side of the directed line `a -> b`.
    pub fn left_of(a: Point, b: Point) -> Self {
        let normal = (b - a).perp_cw();
        Self {
            normal,
            offset: normal.dot(a),
        }
    }

    fn eval(&self, p: Point) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Sutherland-Hodgman clip of a convex loop against one half-plane. Every
/// vertex carries the label of the edge that leaves it; edges created along
/// the clipping line get `line_label`.
pub fn clip_labeled<L: Copy>(
    poly: &[(Point, L)],
    plane: &HalfPlane,
    line_label: L,
) -> Vec<(Point, L)> {
    let n = poly.len();
    if n == 0 {
        return Vec::new();
    }
    let scale = plane.normal.norm();
    let tol = 1e-14 * scale * poly.iter().map(|(p, _)| p.norm()).fold(1.0, f64::max);
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (p, lp) = poly[i];
        let (q, _) = poly[(i + 1) % n];
        let fp = plane.eval(p);
        let fq = plane.eval(q);
        let p_in = fp <= tol;
        let q_in = fq <= tol;
        if p_in {
            out.push((p, lp));
            if !q_in {
                let t = fp / (fp - fq);
                out.push((p.lerp(q, t), line_label));
            }
        } else if q_in {
            let t = fp / (fp - fq);
            out.push((p.lerp(q, t), lp));
        }
    }
    out
}

pub fn clip_convex(poly: &[Point], plane: &HalfPlane) -> Vec<Point> {
    let labeled: Vec<(Point, ())> = poly.iter().map(|&p| (p, ())).collect();
    clip_labeled(&labeled, plane, ())
        .into_iter()
        .map(|(p, _)| p)
        .collect()
}

/// Intersection of two counter-clockwise convex polygons.
pub fn convex_intersection(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    for (a, b) in edges(clip) {
        if out.is_empty() {
            break;
        }
        out = clip_convex(&out, &HalfPlane::left_of(a, b));
    }
    out
}

/// Area of the intersection of two convex polygons, with a bounding-box reject.
pub fn convex_overlap_area(a: &[Point], b: &[Point]) -> f64 {
    let (alo, ahi) = bounding_box(a);
    let (blo, bhi) = bounding_box(b);
    if alo.x >= bhi.x || blo.x >= ahi.x || alo.y >= bhi.y || blo.y >= ahi.y {
        return 0.0;
    }
    let inter = convex_intersection(a, b);
    if inter.len() < 3 {
        0.0
    } else {
        area(&inter)
    }
}

/// Merges points closer than `tol` into shared indices using a bucket grid.
#[derive(Debug)]
pub struct VertexIndex {
    tol: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point>,
}

impl VertexIndex {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            buckets: Default::default(),
            points: Vec::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.tol).floor() as i64, (p.y / self.tol).floor() as i64)
    }

    pub fn insert(&mut self, p: Point) -> usize {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        if self.points[id].distance(p) <= self.tol {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.buckets.entry((kx, ky)).or_default().push(id);
        id
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn square_area_centroid_diameter() {
        let sq = unit_square();
        assert_eq!(signed_area(&sq), 1.0);
        assert_eq!(centroid(&sq), Point::new(0.5, 0.5));
        assert!((diameter(&sq) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clip_by_bisector_halves_square() {
        let sq = unit_square();
        let plane = HalfPlane::bisector(Point::new(0.25, 0.5), Point::new(0.75, 0.5));
        let left = clip_convex(&sq, &plane);
        assert!((area(&left) - 0.5).abs() < 1e-15);
        assert!(left.iter().all(|p| p.x <= 0.5 + 1e-15));
    }

    #[test]
    fn labels_follow_edges() {
        let sq: Vec<(Point, usize)> = unit_square().into_iter().zip(0..).collect();
        let plane = HalfPlane::bisector(Point::new(0.25, 0.5), Point::new(0.75, 0.5));
        let out = clip_labeled(&sq, &plane, 99);
        // the edge that runs along x = 0.5 carries the clip label
        let n = out.len();
        let along: Vec<_> = (0..n)
            .filter(|&i| out[i].1 == 99)
            .map(|i| (out[i].0, out[(i + 1) % n].0))
            .collect();
        assert_eq!(along.len(), 1);
        assert!((along[0].0.x - 0.5).abs() < 1e-15 && (along[0].1.x - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shifted_square_overlap() {
        let sq = unit_square();
        let shifted: Vec<Point> = sq.iter().map(|&p| p + Point::new(0.25, 0.5)).collect();
        assert!((convex_overlap_area(&sq, &shifted) - 0.375).abs() < 1e-15);
        let far: Vec<Point> = sq.iter().map(|&p| p + Point::new(3.0, 0.0)).collect();
        assert_eq!(convex_overlap_area(&sq, &far), 0.0);
    }

    #[test]
    fn vertex_index_merges_close_points() {
        let mut idx = VertexIndex::new(1e-9);
        let a = idx.insert(Point::new(0.5, 0.5));
        let b = idx.insert(Point::new(0.5 + 1e-12, 0.5 - 1e-12));
        let c = idx.insert(Point::new(0.6, 0.5));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(idx.len(), 2);
    }

    #[test]
    fn containment_and_segment_distance() {
        let sq = unit_square();
        assert!(convex_contains(&sq, Point::new(0.5, 0.5), 0.0));
        assert!(!convex_contains(&sq, Point::new(1.5, 0.5), 1e-12));
        assert_eq!(
            point_segment_distance(Point::new(0.5, 2.0), Point::new(0.0, 0.0), Point::new(1.0, 0.0)),
            2.0
        );
        assert_eq!(boundary_distance(Point::new(0.5, 0.25), &sq), 0.25);
    }
}
