//! Planar primitives used by the criteria.
//!
//! All angles are signed radians in `(-π, π]`, counterclockwise positive.
//! Criteria take absolute values; nothing in this module does.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used by [`LocalProjection`], in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A point in a local metric frame (meters).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn distance_sq(self, other: Point) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A non-degenerate directed segment `a -> b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectedSegment {
    a: Point,
    b: Point,
}

impl DirectedSegment {
    pub fn new(a: Point, b: Point) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::DegenerateGeometry("non-finite segment endpoint"));
        }
        if a == b {
            return Err(Error::DegenerateGeometry("zero-length segment"));
        }
        Ok(DirectedSegment { a, b })
    }

    pub fn a(&self) -> Point {
        self.a
    }

    pub fn b(&self) -> Point {
        self.b
    }

    pub fn reversed(&self) -> Self {
        DirectedSegment { a: self.b, b: self.a }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    fn delta(&self) -> (f64, f64) {
        (self.b.x - self.a.x, self.b.y - self.a.y)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Signed angle rotating the direction of `u` onto the direction of `v`.
pub fn signed_angle(u: &DirectedSegment, v: &DirectedSegment) -> f64 {
    let (ux, uy) = u.delta();
    let (vx, vy) = v.delta();
    let cross = ux * vy - uy * vx;
    let dot = ux * vx + uy * vy;
    let theta = cross.atan2(dot);
    // atan2 yields -π for a negative-zero cross product.
    if theta <= -PI {
        PI
    } else {
        theta
    }
}

/// Running and straight-line angles of a path relative to a base segment.
///
/// `running[r - 1]` is the turn at interior node `r` (r = 1..l-1) and
/// `straight[s]` is the angle from the base to link `s` (s = 0..l-1), so that
/// `straight[i + 1] - straight[i] ≡ running[i]` modulo 2π.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleSequence {
    pub running: Vec<f64>,
    pub straight: Vec<f64>,
}

pub fn angle_sequence(path: &[Point], base: &DirectedSegment) -> Result<AngleSequence> {
    if path.len() < 2 {
        return Err(Error::DegenerateGeometry("path needs at least two points"));
    }
    let links = path
        .windows(2)
        .map(|w| DirectedSegment::new(w[0], w[1]))
        .collect::<Result<Vec<_>>>()?;
    let running = links.windows(2).map(|w| signed_angle(&w[0], &w[1])).collect();
    let straight = links.iter().map(|link| signed_angle(base, link)).collect();
    Ok(AngleSequence { running, straight })
}

/// Unsigned area enclosed between a polyline and the line carrying `base`.
///
/// Points are expressed as `(t, d)`: abscissa along the base direction and
/// signed perpendicular offset. Each consecutive pair contributes the absolute
/// trapezoid area, split at the zero crossing when the offsets change sign, so
/// lobes on opposite sides of the base add up instead of cancelling.
pub fn absolute_area(path: &[Point], base: &DirectedSegment) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::DegenerateGeometry("path needs at least two points"));
    }
    let (dx, dy) = base.delta();
    let len = dx.hypot(dy);
    let (ux, uy) = (dx / len, dy / len);
    let origin = base.a;
    let frame = |p: &Point| {
        let (px, py) = (p.x - origin.x, p.y - origin.y);
        (px * ux + py * uy, ux * py - uy * px)
    };

    let mut area = 0.0;
    let mut prev = frame(&path[0]);
    for p in &path[1..] {
        let cur = frame(p);
        let width = (cur.0 - prev.0).abs();
        let (d0, d1) = (prev.1, cur.1);
        area += if (d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0) {
            let f = d0 / (d0 - d1);
            width * (d0.abs() * f + d1.abs() * (1.0 - f)) / 2.0
        } else {
            width * (d0 + d1).abs() / 2.0
        };
        prev = cur;
    }
    Ok(area)
}

/// Equirectangular projection about a fixed origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub origin_lon: f64,
    pub origin_lat: f64,
}

fn check_lonlat(lon: f64, lat: f64) -> Result<()> {
    if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
        return Err(Error::InvalidCoordinate { lon, lat });
    }
    Ok(())
}

impl LocalProjection {
    pub fn new(origin_lon: f64, origin_lat: f64) -> Result<Self> {
        check_lonlat(origin_lon, origin_lat)?;
        Ok(LocalProjection {
            origin_lon,
            origin_lat,
        })
    }

    pub fn project(&self, lon: f64, lat: f64) -> Result<Point> {
        check_lonlat(lon, lat)?;
        let cos_lat0 = self.origin_lat.to_radians().cos();
        Ok(Point::new(
            EARTH_RADIUS_M * (lon - self.origin_lon).to_radians() * cos_lat0,
            EARTH_RADIUS_M * (lat - self.origin_lat).to_radians(),
        ))
    }

    /// Inverse of [`project`](Self::project), returning `(lon, lat)` degrees.
    pub fn unproject(&self, p: Point) -> (f64, f64) {
        let cos_lat0 = self.origin_lat.to_radians().cos();
        let lon = self.origin_lon + (p.x / (EARTH_RADIUS_M * cos_lat0)).to_degrees();
        let lat = self.origin_lat + (p.y / EARTH_RADIUS_M).to_degrees();
        (lon, lat)
    }
}

/// Projects lon/lat degree pairs into a metric frame centred on `origin_lonlat`.
pub fn local_projection(origin_lonlat: (f64, f64), points: &[(f64, f64)]) -> Result<Vec<Point>> {
    let proj = LocalProjection::new(origin_lonlat.0, origin_lonlat.1)?;
    points.iter().map(|&(lon, lat)| proj.project(lon, lat)).collect()
}
