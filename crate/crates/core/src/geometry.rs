//! Planar geometry in projected meters: points, axis-aligned rectangles and simple
//! polygons, with shoelace areas and rectangle clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let r = Rect {
            xmin,
            ymin,
            xmax,
            ymax,
        };
        if ![xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::validation(format!("non-finite rectangle {r:?}")));
        }
        if xmax <= xmin || ymax <= ymin {
            return Err(Error::validation(format!("degenerate rectangle {r:?}")));
        }
        Ok(r)
    }

    /// Rectangle `[0, width] x [0, height]`.
    pub fn with_size(width: f64, height: f64) -> Result<Self> {
        Rect::new(0.0, 0.0, width, height)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect {
            xmin: self.xmin.max(other.xmin),
            ymin: self.ymin.max(other.ymin),
            xmax: self.xmax.min(other.xmax),
            ymax: self.ymax.min(other.ymax),
        };
        (r.xmax > r.xmin && r.ymax > r.ymin).then_some(r)
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        self.intersection(other).map_or(0.0, |r| r.area())
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.xmin, self.ymin),
            Point::new(self.xmax, self.ymin),
            Point::new(self.xmax, self.ymax),
            Point::new(self.xmin, self.ymax),
        ]
    }
}

/// A simple polygon stored as an open ring (the closing vertex is not repeated).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    ring: Vec<Point>,
    bbox: Rect,
}

impl Polygon {
    /// Builds a polygon from a closed ring (first vertex repeated at the end), as found
    /// in GeoJSON. Rejects unclosed, degenerate and self-intersecting rings.
    pub fn from_closed_ring(closed: &[Point]) -> Result<Self> {
        if closed.len() < 4 {
            return Err(Error::validation(format!(
                "ring has {} positions, need at least 4",
                closed.len()
            )));
        }
        if closed.first() != closed.last() {
            return Err(Error::validation("ring is not closed"));
        }
        Polygon::from_open_ring(closed[..closed.len() - 1].to_vec())
    }

    pub fn from_open_ring(ring: Vec<Point>) -> Result<Self> {
        if ring.len() < 3 {
            return Err(Error::validation("ring has fewer than 3 distinct vertices"));
        }
        if let Some(p) = ring.iter().find(|p| !p.is_finite()) {
            return Err(Error::validation(format!("non-finite vertex {p:?}")));
        }
        if let Some((i, j)) = first_self_intersection(&ring) {
            return Err(Error::validation(format!(
                "ring is self-intersecting (segments {i} and {j})"
            )));
        }
        let area = shoelace_area(&ring).abs();
        if area <= 0.0 {
            return Err(Error::validation("ring has zero area"));
        }
        let bbox = bounding_box(&ring);
        Ok(Polygon { ring, bbox })
    }

    pub fn from_rect(r: &Rect) -> Self {
        Polygon {
            ring: r.corners().to_vec(),
            bbox: *r,
        }
    }

    pub fn ring(&self) -> &[Point] {
        &self.ring
    }

    pub fn bbox(&self) -> &Rect {
        &self.bbox
    }

    pub fn area(&self) -> f64 {
        shoelace_area(&self.ring).abs()
    }

    /// Area of the part of this polygon lying inside `r`.
    pub fn clipped_area(&self, r: &Rect) -> f64 {
        shoelace_area(&clip_to_rect(&self.ring, r)).abs()
    }

    /// Even-odd containment, with points on the boundary counted as inside.
    pub fn contains(&self, p: &Point) -> bool {
        if !self.bbox.contains(p) {
            return false;
        }
        let n = self.ring.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.ring[i];
            let b = self.ring[(i + 1) % n];
            if on_segment(p, &a, &b) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Signed shoelace area of an open ring; positive for counter-clockwise rings.
pub fn shoelace_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    twice / 2.0
}

/// Sutherland-Hodgman clipping of an open ring against an axis-aligned rectangle.
///
/// Works for concave subject polygons because the clip region is convex; the result may
/// contain zero-width slivers along the rectangle boundary, which do not affect area.
pub fn clip_to_rect(ring: &[Point], r: &Rect) -> Vec<Point> {
    #[derive(Clone, Copy)]
    enum Side {
        Left(f64),
        Right(f64),
        Bottom(f64),
        Top(f64),
    }
    impl Side {
        fn inside(self, p: &Point) -> bool {
            match self {
                Side::Left(x) => p.x >= x,
                Side::Right(x) => p.x <= x,
                Side::Bottom(y) => p.y >= y,
                Side::Top(y) => p.y <= y,
            }
        }
        fn cross(self, a: &Point, b: &Point) -> Point {
            match self {
                Side::Left(x) | Side::Right(x) => {
                    let t = (x - a.x) / (b.x - a.x);
                    Point::new(x, a.y + t * (b.y - a.y))
                }
                Side::Bottom(y) | Side::Top(y) => {
                    let t = (y - a.y) / (b.y - a.y);
                    Point::new(a.x + t * (b.x - a.x), y)
                }
            }
        }
    }

    let mut output = ring.to_vec();
    for side in [
        Side::Left(r.xmin),
        Side::Right(r.xmax),
        Side::Bottom(r.ymin),
        Side::Top(r.ymax),
    ] {
        if output.is_empty() {
            break;
        }
        let input = std::mem::take(&mut output);
        let mut prev = *input.last().unwrap();
        for cur in input {
            match (side.inside(&prev), side.inside(&cur)) {
                (true, true) => output.push(cur),
                (true, false) => output.push(side.cross(&prev, &cur)),
                (false, true) => {
                    output.push(side.cross(&prev, &cur));
                    output.push(cur);
                }
                (false, false) => {}
            }
            prev = cur;
        }
    }
    output
}

pub fn bounding_box(points: &[Point]) -> Rect {
    let mut r = Rect {
        xmin: f64::INFINITY,
        ymin: f64::INFINITY,
        xmax: f64::NEG_INFINITY,
        ymax: f64::NEG_INFINITY,
    };
    for p in points {
        r.xmin = r.xmin.min(p.x);
        r.ymin = r.ymin.min(p.y);
        r.xmax = r.xmax.max(p.x);
        r.ymax = r.ymax.max(p.y);
    }
    r
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(p: &Point, a: &Point, b: &Point) -> bool {
    orient(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Brute-force O(k^2) check over non-adjacent segment pairs. Also catches repeated
/// vertices, which show up as touching non-adjacent segments.
fn first_self_intersection(ring: &[Point]) -> Option<(usize, usize)> {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if a == b {
            return Some((i, i));
        }
        for j in (i + 1)..n {
            // adjacent segments share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(&a, &b, &c, &d) {
                return Some((i, j));
            }
        }
    }
    None
}
