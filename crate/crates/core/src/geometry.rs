//! Planar geometry for text regions: quadrilaterals, polygon IoU and NMS.
//!
//! Quads are compared through their convex hull. Text annotations are
//! overwhelmingly convex, so a concave or self-intersecting annotation is
//! approximated by its hull before clipping.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Areas at or below this are treated as degenerate.
const AREA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn cross(o: Point, a: Point, b: Point) -> f64 {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    }

    fn lex_cmp(&self, other: &Point) -> Ordering {
        self.x
            .total_cmp(&other.x)
            .then_with(|| self.y.total_cmp(&other.y))
    }
}

/// A four-vertex text region polygon in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 8]", into = "[f64; 8]")]
pub struct Quad {
    pub vertices: [Point; 4],
}

impl From<[f64; 8]> for Quad {
    fn from(c: [f64; 8]) -> Self {
        Quad::from_coords(c)
    }
}

impl From<Quad> for [f64; 8] {
    fn from(q: Quad) -> Self {
        q.coords()
    }
}

impl Quad {
    pub const fn new(vertices: [Point; 4]) -> Self {
        Self { vertices }
    }

    /// Builds a quad from `x1 y1 x2 y2 x3 y3 x4 y4`.
    pub fn from_coords(c: [f64; 8]) -> Self {
        Self::new([
            Point::new(c[0], c[1]),
            Point::new(c[2], c[3]),
            Point::new(c[4], c[5]),
            Point::new(c[6], c[7]),
        ])
    }

    /// Axis-aligned rectangle, listed clockwise in image coordinates starting top-left.
    pub fn from_rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new([
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn coords(&self) -> [f64; 8] {
        let v = &self.vertices;
        [
            v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y, v[3].x, v[3].y,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut out = *self;
        for v in &mut out.vertices {
            v.x += dx;
            v.y += dy;
        }
        out
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }

    /// Counter-clockwise convex hull of the four vertices with collinear points dropped.
    pub fn canonical(&self) -> Vec<Point> {
        convex_hull(&self.vertices)
    }

    /// Area of the canonicalized polygon; always non-negative.
    pub fn area(&self) -> f64 {
        polygon_area(&self.canonical())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredQuad {
    pub quad: Quad,
    pub score: f64,
}

impl ScoredQuad {
    pub fn new(quad: Quad, score: f64) -> Result<Self> {
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(Error::contract(format!("score {score} outside [0, 1]")));
        }
        Ok(Self { quad, score })
    }
}

/// Andrew's monotone chain. Returns CCW order (in a y-up frame), no repeated
/// or collinear vertices.
fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(Point::lex_cmp);
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && Point::cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && Point::cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        twice += a.x * b.y - b.x * a.y;
    }
    (twice * 0.5).abs()
}

/// Sutherland–Hodgman: clips convex `subject` by convex CCW `clip`.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = Point::cross(a, b, cur) >= 0.0;
            let prev_in = Point::cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(segment_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

/// Intersection of segment `p→q` with the infinite line through `a→b`.
fn segment_intersection(p: Point, q: Point, a: Point, b: Point) -> Point {
    let dp = Point::cross(a, b, p);
    let dq = Point::cross(a, b, q);
    let denom = dp - dq;
    if denom == 0.0 {
        return q;
    }
    let t = dp / denom;
    Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
}

fn hull_cmp(a: &[Point], b: &[Point]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(p, q)| p.lex_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Intersection-over-union of two quads. Degenerate (zero-area) quads score 0.
pub fn polygon_iou(a: &Quad, b: &Quad) -> f64 {
    let ha = a.canonical();
    let hb = b.canonical();
    // Fixed argument order makes the result bit-identical under swapping.
    let (ha, hb) = match hull_cmp(&ha, &hb) {
        Ordering::Greater => (hb, ha),
        Ordering::Equal => {
            return if polygon_area(&ha) > AREA_EPS { 1.0 } else { 0.0 };
        }
        Ordering::Less => (ha, hb),
    };
    let area_a = polygon_area(&ha);
    let area_b = polygon_area(&hb);
    if area_a <= AREA_EPS || area_b <= AREA_EPS {
        return 0.0;
    }
    let inter = polygon_area(&clip_convex(&ha, &hb));
    let union = area_a + area_b - inter;
    if union <= AREA_EPS {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Greedy non-maximum suppression. Candidates are visited by descending score
/// (ties: earlier input first); a candidate survives unless its IoU with an
/// earlier survivor exceeds `iou_threshold`. Survivors are returned in
/// selection order.
pub fn nms(candidates: &[ScoredQuad], iou_threshold: f64) -> Result<Vec<ScoredQuad>> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::contract(format!(
            "nms threshold {iou_threshold} outside (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // stable sort keeps input order among equal scores
    order.sort_by(|&i, &j| candidates[j].score.total_cmp(&candidates[i].score));
    let mut kept: Vec<ScoredQuad> = Vec::new();
    for i in order {
        let c = candidates[i];
        if kept
            .iter()
            .all(|k| polygon_iou(&k.quad, &c.quad) <= iou_threshold)
        {
            kept.push(c);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square(dx: f64, dy: f64) -> Quad {
        Quad::from_rect(dx, dy, dx + 1.0, dy + 1.0)
    }

    fn sq(q: Quad, s: f64) -> ScoredQuad {
        ScoredQuad::new(q, s).unwrap()
    }

    #[test]
    fn iou_identity_and_disjoint() {
        assert_eq!(polygon_iou(&unit_square(0.0, 0.0), &unit_square(0.0, 0.0)), 1.0);
        assert_eq!(polygon_iou(&unit_square(0.0, 0.0), &unit_square(3.0, 0.0)), 0.0);
    }

    #[test]
    fn iou_half_shift_is_one_third() {
        let v = polygon_iou(&unit_square(0.0, 0.0), &unit_square(0.5, 0.0));
        assert!((v - 0.5 / 1.5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn iou_degenerate_is_zero() {
        let line = Quad::from_coords([0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        assert_eq!(polygon_iou(&line, &unit_square(0.0, 0.0)), 0.0);
        assert_eq!(polygon_iou(&line, &line), 0.0);
    }

    #[test]
    fn winding_and_vertex_order_do_not_matter() {
        let cw = unit_square(0.0, 0.0);
        let mut ccw = cw;
        ccw.vertices.reverse();
        let scrambled = Quad::new([cw.vertices[2], cw.vertices[0], cw.vertices[3], cw.vertices[1]]);
        assert_eq!(polygon_iou(&cw, &ccw), 1.0);
        assert_eq!(polygon_iou(&cw, &scrambled), 1.0);
        assert!((scrambled.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_square_overlap() {
        // diamond inscribed in the 2x2 square centered at (1,1): area 2, fully inside
        let square = Quad::from_rect(0.0, 0.0, 2.0, 2.0);
        let diamond = Quad::from_coords([1.0, 0.0, 2.0, 1.0, 1.0, 2.0, 0.0, 1.0]);
        assert!((polygon_iou(&square, &diamond) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nms_full_overlap_keeps_best() {
        let q = unit_square(0.0, 0.0);
        let out = nms(&[sq(q, 0.8), sq(q, 0.9)], 0.2).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn nms_disjoint_keeps_both() {
        let out = nms(&[sq(unit_square(0.0, 0.0), 0.9), sq(unit_square(5.0, 0.0), 0.8)], 0.2).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn nms_chain_trace() {
        // IoU(a,b) = IoU(b,c) = 0.5, IoU(a,c) = 0
        let a = Quad::from_rect(0.0, 0.0, 1.0, 1.0);
        let b = Quad::from_rect(0.0, 0.0, 2.0, 1.0);
        let c = Quad::from_rect(1.0, 0.0, 2.0, 1.0);
        assert!((polygon_iou(&a, &b) - 0.5).abs() < 1e-12);
        assert!((polygon_iou(&b, &c) - 0.5).abs() < 1e-12);
        assert_eq!(polygon_iou(&a, &c), 0.0);
        let out = nms(&[sq(a, 0.9), sq(b, 0.8), sq(c, 0.7)], 0.2).unwrap();
        let scores: Vec<f64> = out.iter().map(|s| s.score).collect();
        assert_eq!(scores, vec![0.9, 0.7]);
    }

    #[test]
    fn nms_ties_prefer_earlier_input() {
        let a = unit_square(0.0, 0.0);
        let b = unit_square(0.1, 0.0);
        let out = nms(&[sq(a, 0.5), sq(b, 0.5)], 0.2).unwrap();
        assert_eq!(out, vec![sq(a, 0.5)]);
    }

    #[test]
    fn nms_empty_and_bad_threshold() {
        assert!(nms(&[], 0.2).unwrap().is_empty());
        assert!(nms(&[], 0.0).is_err());
        assert!(nms(&[], 1.0).is_err());
    }

    #[test]
    fn scored_quad_rejects_out_of_range() {
        assert!(ScoredQuad::new(unit_square(0.0, 0.0), 1.5).is_err());
        assert!(ScoredQuad::new(unit_square(0.0, 0.0), f64::NAN).is_err());
    }

    fn arb_quad() -> impl Strategy<Value = Quad> {
        prop::array::uniform8(-10.0f64..10.0).prop_map(Quad::from_coords)
    }

    fn arb_rect() -> impl Strategy<Value = Quad> {
        (0.0f64..20.0, 0.0f64..20.0, 0.5f64..8.0, 0.5f64..8.0)
            .prop_map(|(x, y, w, h)| Quad::from_rect(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_quad(), b in arb_quad()) {
            let ab = polygon_iou(&a, &b);
            let ba = polygon_iou(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            if a.area() > 1e-6 {
                prop_assert_eq!(polygon_iou(&a, &a), 1.0);
            }
        }

        #[test]
        fn iou_matches_rectangle_formula(a in arb_rect(), b in arb_rect()) {
            let (ax0, ay0, ax1, ay1) = a.bounds();
            let (bx0, by0, bx1, by1) = b.bounds();
            let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
            let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
            let inter = iw * ih;
            let expect = inter / ((ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter);
            prop_assert!((polygon_iou(&a, &b) - expect).abs() < 1e-9);
        }

        #[test]
        fn nms_idempotent_and_ordered(
            items in prop::collection::vec((arb_rect(), 0.0f64..=1.0), 0..12),
            t in 0.05f64..0.95,
        ) {
            let input: Vec<ScoredQuad> = items.into_iter().map(|(q, s)| sq(q, s)).collect();
            let once = nms(&input, t).unwrap();
            let twice = nms(&once, t).unwrap();
            prop_assert_eq!(&once, &twice);
            for w in once.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
            for (i, a) in once.iter().enumerate() {
                prop_assert!(input.contains(a));
                for b in &once[i + 1..] {
                    prop_assert!(polygon_iou(&a.quad, &b.quad) <= t);
                }
            }
        }
    }
}
