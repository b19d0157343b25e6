//! Geometry kernel for the three simply connected surfaces of constant curvature.
//!
//! Every model is embedded in R^3 so that isometries become 3x3 matrices:
//!
//! * the euclidean plane uses homogeneous coordinates `(x, y, 1)`; tangent vectors are `(dx, dy, 0)`
//!   and isometries are affine matrices with last row `(0, 0, 1)`;
//! * the round sphere is the unit sphere with the euclidean inner product;
//! * the hyperbolic plane is the upper sheet of `x^2 + y^2 - z^2 = -1` with the Lorentz form
//!   `<u, v> = u_x v_x + u_y v_y - u_z v_z`.
//!
//! Unfolding a billiard orbit then amounts to multiplying reflection matrices.

use std::f64::consts::TAU;
#[cfg(test)]
use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on point and direction invariants.
pub const INVARIANT_TOL: f64 = 1e-12;
/// Tolerance on group identities (composition, involutions).
pub const GROUP_TOL: f64 = 1e-10;
/// Tolerance on composed geometric predicates.
pub const PREDICATE_TOL: f64 = 1e-9;

/// Relative slack accepted when deciding that a ray meets a segment at one of its endpoints.
pub(crate) const SEGMENT_SLACK: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Euclidean,
    Spherical,
    Hyperbolic,
}

impl Model {
    pub fn curvature(self) -> i32 {
        match self {
            Model::Euclidean => 0,
            Model::Spherical => 1,
            Model::Hyperbolic => -1,
        }
    }

    pub fn from_curvature(k: i32) -> Result<Model> {
        match k {
            0 => Ok(Model::Euclidean),
            1 => Ok(Model::Spherical),
            -1 => Ok(Model::Hyperbolic),
            _ => Err(Error::Domain(format!("curvature must be -1, 0 or 1, got {k}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Euclidean => "euclidean",
            Model::Spherical => "spherical",
            Model::Hyperbolic => "hyperbolic",
        }
    }

    /// Bilinear form on tangent vectors (and on ambient vectors for the sphere and hyperboloid).
    #[inline]
    pub(crate) fn inner(self, a: &Vec3, b: &Vec3) -> f64 {
        match self {
            Model::Euclidean => a.x * b.x + a.y * b.y,
            Model::Spherical => a.dot(b),
            Model::Hyperbolic => a.x * b.x + a.y * b.y - a.z * b.z,
        }
    }

    #[inline]
    pub(crate) fn normalize_point(self, p: Vec3) -> Vec3 {
        match self {
            Model::Euclidean => Vec3::new(p.x / p.z, p.y / p.z, 1.0),
            Model::Spherical => p / p.norm(),
            Model::Hyperbolic => {
                let q = -lorentz(&p, &p);
                let p = if q > 0.0 {
                    p / q.sqrt()
                } else {
                    Vec3::new(p.x, p.y, (1.0 + p.x * p.x + p.y * p.y).sqrt())
                };
                if p.z < 0.0 {
                    -p
                } else {
                    p
                }
            }
        }
    }

    /// Projects `v` onto the tangent plane at `p` and rescales it to unit length.
    #[inline]
    pub(crate) fn tangent_normalize(self, p: &Vec3, v: Vec3) -> Vec3 {
        let w = match self {
            Model::Euclidean => Vec3::new(v.x, v.y, 0.0),
            Model::Spherical => v - p * v.dot(p),
            Model::Hyperbolic => v + p * lorentz(&v, p),
        };
        w / self.inner(&w, &w).sqrt()
    }

    /// Exponential map with parallel transport of the initial direction.
    #[inline]
    pub(crate) fn exp(self, p: &Vec3, v: &Vec3, t: f64) -> (Vec3, Vec3) {
        match self {
            Model::Euclidean => (Vec3::new(p.x + t * v.x, p.y + t * v.y, 1.0), *v),
            Model::Spherical => {
                let (s, c) = t.sin_cos();
                (p * c + v * s, v * c - p * s)
            }
            Model::Hyperbolic => {
                let (s, c) = (t.sinh(), t.cosh());
                (p * c + v * s, v * c + p * s)
            }
        }
    }

    #[inline]
    pub(crate) fn dist(self, p: &Vec3, q: &Vec3) -> f64 {
        match self {
            Model::Euclidean => (p.x - q.x).hypot(p.y - q.y),
            Model::Spherical => p.cross(q).norm().atan2(p.dot(q)),
            Model::Hyperbolic => {
                let w = p - q;
                let s = lorentz(&w, &w).max(0.0);
                2.0 * (s.sqrt() / 2.0).asinh()
            }
        }
    }

    /// Unit initial direction of the geodesic from `p` to `q`, if it is unique.
    pub(crate) fn log_dir(self, p: &Vec3, q: &Vec3) -> Option<Vec3> {
        let w = match self {
            Model::Euclidean => Vec3::new(q.x - p.x, q.y - p.y, 0.0),
            Model::Spherical => q - p * p.dot(q),
            Model::Hyperbolic => q + p * lorentz(p, q),
        };
        let n2 = self.inner(&w, &w);
        if n2 <= 1e-30 {
            None
        } else {
            Some(w / n2.sqrt())
        }
    }

    /// Positively oriented orthonormal frame of the tangent plane at `p`.
    pub(crate) fn frame(self, p: &Vec3) -> (Vec3, Vec3) {
        match self {
            Model::Euclidean => (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
            Model::Spherical => {
                let axis = if p.x.abs() <= p.y.abs() && p.x.abs() <= p.z.abs() {
                    Vec3::x()
                } else if p.y.abs() <= p.z.abs() {
                    Vec3::y()
                } else {
                    Vec3::z()
                };
                let e1 = (axis - p * axis.dot(p)).normalize();
                (e1, p.cross(&e1))
            }
            Model::Hyperbolic => {
                // First column of the boost taking (0,0,1) to p.
                let k = 1.0 / (1.0 + p.z);
                let e1 = self.tangent_normalize(p, Vec3::new(1.0 + p.x * p.x * k, p.x * p.y * k, p.x));
                (e1, self.second_axis(p, &e1))
            }
        }
    }

    /// Completes a unit tangent vector to a positively oriented orthonormal frame.
    #[inline]
    pub(crate) fn second_axis(self, p: &Vec3, e1: &Vec3) -> Vec3 {
        match self {
            Model::Euclidean => Vec3::new(-e1.y, e1.x, 0.0),
            Model::Spherical => p.cross(e1),
            Model::Hyperbolic => {
                let c = p.cross(e1);
                Vec3::new(c.x, c.y, -c.z)
            }
        }
    }

    /// Oriented angle in (-pi, pi] from tangent vector `a` to `b` at `p`.
    #[inline]
    pub(crate) fn oriented_angle(self, p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
        p.dot(&a.cross(b)).atan2(self.inner(a, b))
    }

    /// Matrix of the reflection in the geodesic through `p` with unit tangent `u`.
    pub(crate) fn reflection_matrix(self, p: &Vec3, u: &Vec3) -> Mat3 {
        match self {
            Model::Euclidean => {
                let (ux, uy) = (u.x, u.y);
                let r = [[2.0 * ux * ux - 1.0, 2.0 * ux * uy], [2.0 * ux * uy, 2.0 * uy * uy - 1.0]];
                let tx = p.x - (r[0][0] * p.x + r[0][1] * p.y);
                let ty = p.y - (r[1][0] * p.x + r[1][1] * p.y);
                Mat3::new(r[0][0], r[0][1], tx, r[1][0], r[1][1], ty, 0.0, 0.0, 1.0)
            }
            Model::Spherical => {
                let n = p.cross(u).normalize();
                Mat3::identity() - 2.0 * n * n.transpose()
            }
            Model::Hyperbolic => {
                let c = p.cross(u);
                let m = Vec3::new(c.x, c.y, -c.z);
                let m = m / lorentz(&m, &m).sqrt();
                let mj = Vec3::new(m.x, m.y, -m.z);
                Mat3::identity() - 2.0 * m * mj.transpose()
            }
        }
    }

    /// Parameter at which the ray `exp(o, t d)` meets the closed segment `[a, b]`.
    ///
    /// Euclidean and hyperbolic parameters may be negative (the caller filters); spherical
    /// parameters are reduced to `[0, 2 pi)`.
    pub(crate) fn ray_meets_segment(self, o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3) -> Option<f64> {
        match self {
            Model::Euclidean => {
                let (ex, ey) = (b.x - a.x, b.y - a.y);
                let denom = d.x * ey - d.y * ex;
                let elen = ex.hypot(ey);
                if denom.abs() <= 1e-15 * elen {
                    return None;
                }
                let (wx, wy) = (a.x - o.x, a.y - o.y);
                let s = (wx * d.y - wy * d.x) / denom;
                if !(-SEGMENT_SLACK..=1.0 + SEGMENT_SLACK).contains(&s) {
                    return None;
                }
                Some((wx * ey - wy * ex) / denom)
            }
            Model::Spherical | Model::Hyperbolic => {
                let cs = a.cross(b);
                let y = self.line_meet(&o.cross(d), &cs)?;
                for y in self.meet_candidates(y) {
                    if on_arc(&y, a, b, &cs) {
                        return Some(self.ray_param(o, d, &y));
                    }
                }
                None
            }
        }
    }

    /// Parameters at which the ray meets the full geodesic through `a` and `b`.
    pub(crate) fn ray_meets_line(self, o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3) -> Vec<f64> {
        match self {
            Model::Euclidean => {
                let (ex, ey) = (b.x - a.x, b.y - a.y);
                let denom = d.x * ey - d.y * ex;
                if denom.abs() <= 1e-15 * ex.hypot(ey) {
                    return Vec::new();
                }
                let (wx, wy) = (a.x - o.x, a.y - o.y);
                vec![(wx * ey - wy * ex) / denom]
            }
            Model::Spherical | Model::Hyperbolic => match self.line_meet(&o.cross(d), &a.cross(b)) {
                None => Vec::new(),
                Some(y) => self
                    .meet_candidates(y)
                    .into_iter()
                    .map(|y| self.ray_param(o, d, &y))
                    .collect(),
            },
        }
    }

    /// Intersection of two geodesic lines given by the euclidean normals of their planes.
    fn line_meet(self, c1: &Vec3, c2: &Vec3) -> Option<Vec3> {
        let x = c1.cross(c2);
        let scale = c1.norm() * c2.norm();
        match self {
            Model::Euclidean => {
                if x.z.abs() <= 1e-15 * scale {
                    None
                } else {
                    Some(Vec3::new(x.x / x.z, x.y / x.z, 1.0))
                }
            }
            Model::Spherical => {
                let n = x.norm();
                if n <= 1e-15 * scale {
                    None
                } else {
                    Some(x / n)
                }
            }
            Model::Hyperbolic => {
                let q = -lorentz(&x, &x);
                if q <= 1e-14 * x.norm_squared() {
                    None
                } else {
                    let y = x / q.sqrt();
                    Some(if y.z < 0.0 { -y } else { y })
                }
            }
        }
    }

    fn meet_candidates(self, y: Vec3) -> Vec<Vec3> {
        match self {
            Model::Spherical => vec![y, -y],
            _ => vec![y],
        }
    }

    #[inline]
    fn ray_param(self, o: &Vec3, d: &Vec3, y: &Vec3) -> f64 {
        match self {
            Model::Euclidean => (y.x - o.x) * d.x + (y.y - o.y) * d.y,
            Model::Spherical => y.dot(d).atan2(y.dot(o)).rem_euclid(TAU),
            Model::Hyperbolic => lorentz(y, d).asinh(),
        }
    }

    /// Closest point to `p` on the full geodesic through `a` and `b`.
    pub(crate) fn foot_on_line(self, p: &Vec3, a: &Vec3, b: &Vec3) -> Option<Vec3> {
        match self {
            Model::Euclidean => {
                let (ex, ey) = (b.x - a.x, b.y - a.y);
                let l2 = ex * ex + ey * ey;
                let s = ((p.x - a.x) * ex + (p.y - a.y) * ey) / l2;
                Some(Vec3::new(a.x + s * ex, a.y + s * ey, 1.0))
            }
            Model::Spherical => {
                let n = a.cross(b).normalize();
                let f = p - n * p.dot(&n);
                if f.norm() < 1e-12 {
                    None
                } else {
                    Some(f.normalize())
                }
            }
            Model::Hyperbolic => {
                let c = a.cross(b);
                let m = Vec3::new(c.x, c.y, -c.z);
                let m = m / lorentz(&m, &m).sqrt();
                Some(self.normalize_point(p - m * lorentz(p, &m)))
            }
        }
    }

    /// Distance from `p` to the closed geodesic segment `[a, b]`.
    pub(crate) fn point_segment_dist(self, p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
        let ends = self.dist(p, a).min(self.dist(p, b));
        match self {
            Model::Euclidean => {
                let (ex, ey) = (b.x - a.x, b.y - a.y);
                let s = (((p.x - a.x) * ex + (p.y - a.y) * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
                (p.x - a.x - s * ex).hypot(p.y - a.y - s * ey)
            }
            _ => match self.foot_on_line(p, a, b) {
                Some(f) if on_arc(&f, a, b, &a.cross(b)) => self.dist(p, &f).min(ends),
                _ => ends,
            },
        }
    }

    /// Intersection of the closed segments `[p, q]` and `[a, b]`, as fractions along each.
    ///
    /// Fractions are affine on the plane and monotone (not arclength) on the curved models.
    /// Returns `Overlap` when both segments lie on one geodesic and share points.
    pub(crate) fn segment_intersection(self, p: &Vec3, q: &Vec3, a: &Vec3, b: &Vec3) -> SegmentMeet {
        match self {
            Model::Euclidean => {
                let (rx, ry) = (q.x - p.x, q.y - p.y);
                let (sx, sy) = (b.x - a.x, b.y - a.y);
                let denom = rx * sy - ry * sx;
                let (wx, wy) = (a.x - p.x, a.y - p.y);
                let scale = rx.hypot(ry) * sx.hypot(sy);
                if denom.abs() <= 1e-14 * scale {
                    // Parallel: only collinear overlaps matter.
                    if (wx * ry - wy * rx).abs() > 1e-12 * rx.hypot(ry).max(1e-300) * scale.sqrt() {
                        return SegmentMeet::Disjoint;
                    }
                    let rr = rx * rx + ry * ry;
                    let t0 = (wx * rx + wy * ry) / rr;
                    let t1 = ((b.x - p.x) * rx + (b.y - p.y) * ry) / rr;
                    let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
                    return if hi < -SEGMENT_SLACK || lo > 1.0 + SEGMENT_SLACK {
                        SegmentMeet::Disjoint
                    } else {
                        SegmentMeet::Overlap
                    };
                }
                let t = (wx * sy - wy * sx) / denom;
                let u = (wx * ry - wy * rx) / denom;
                let ok = |x: f64| (-SEGMENT_SLACK..=1.0 + SEGMENT_SLACK).contains(&x);
                if ok(t) && ok(u) {
                    SegmentMeet::Point { along_first: t, along_second: u }
                } else {
                    SegmentMeet::Disjoint
                }
            }
            Model::Spherical | Model::Hyperbolic => {
                let c1 = p.cross(q);
                let c2 = a.cross(b);
                let x = c1.cross(&c2);
                if x.norm() <= 1e-14 * c1.norm() * c2.norm() {
                    let shares = on_arc(a, p, q, &c1) || on_arc(b, p, q, &c1) || on_arc(p, a, b, &c2);
                    return if shares { SegmentMeet::Overlap } else { SegmentMeet::Disjoint };
                }
                let Some(y) = self.line_meet(&c1, &c2) else {
                    return SegmentMeet::Disjoint;
                };
                for y in self.meet_candidates(y) {
                    if on_arc(&y, p, q, &c1) && on_arc(&y, a, b, &c2) {
                        return SegmentMeet::Point {
                            along_first: arc_fraction(&y, p, q, &c1),
                            along_second: arc_fraction(&y, a, b, &c2),
                        };
                    }
                }
                SegmentMeet::Disjoint
            }
        }
    }

    /// Lifts raw coordinates from a polygon file into the model.
    pub(crate) fn lift(self, coords: &[f64]) -> Result<Vec3> {
        match (self, coords) {
            (Model::Euclidean, [x, y]) => Ok(Vec3::new(*x, *y, 1.0)),
            (Model::Spherical, [x, y, z]) => {
                let p = Vec3::new(*x, *y, *z);
                if (p.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidPoint(format!("{coords:?} is not on the unit sphere")));
                }
                Ok(p.normalize())
            }
            (Model::Hyperbolic, [x, y, z]) => {
                let p = Vec3::new(*x, *y, *z);
                if (lorentz(&p, &p) + 1.0).abs() > 1e-9 * p.norm_squared().max(1.0) || *z <= 0.0 {
                    return Err(Error::InvalidPoint(format!("{coords:?} is not on the upper hyperboloid")));
                }
                Ok(self.normalize_point(p))
            }
            _ => Err(Error::InvalidPoint(format!(
                "{} coordinates must have {} components, got {:?}",
                self.name(),
                if self == Model::Euclidean { 2 } else { 3 },
                coords
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum SegmentMeet {
    Disjoint,
    Point { along_first: f64, along_second: f64 },
    Overlap,
}

#[inline]
pub(crate) fn lorentz(a: &Vec3, b: &Vec3) -> f64 {
    a.x * b.x + a.y * b.y - a.z * b.z
}

/// `y` (already on the geodesic through `a`, `b`) is a nonnegative combination of `a` and `b`.
#[inline]
fn on_arc(y: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let c2 = c.norm_squared();
    let tol = -SEGMENT_SLACK * c2;
    y.cross(b).dot(c) >= tol && a.cross(y).dot(c) >= tol
}

#[inline]
fn arc_fraction(y: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let l = y.cross(b).dot(c);
    let m = a.cross(y).dot(c);
    m / (l + m)
}

/// A point of one of the three models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    model: Model,
    coords: Vec3,
}

impl Point {
    pub fn euclidean(x: f64, y: f64) -> Point {
        Point { model: Model::Euclidean, coords: Vec3::new(x, y, 1.0) }
    }

    /// Unit vector on the sphere; the input must have norm 1 within `1e-9`.
    pub fn spherical(x: f64, y: f64, z: f64) -> Result<Point> {
        Point::new(Model::Spherical, &[x, y, z])
    }

    /// Point on the upper sheet of the hyperboloid.
    pub fn hyperbolic(x: f64, y: f64, z: f64) -> Result<Point> {
        Point::new(Model::Hyperbolic, &[x, y, z])
    }

    /// Hyperboloid point at distance `r` from `(0,0,1)` in direction `phi`.
    pub fn hyperbolic_polar(r: f64, phi: f64) -> Point {
        let (s, c) = phi.sin_cos();
        Point::from_raw(Model::Hyperbolic, Vec3::new(r.sinh() * c, r.sinh() * s, r.cosh()))
    }

    pub fn new(model: Model, coords: &[f64]) -> Result<Point> {
        Ok(Point { model, coords: model.lift(coords)? })
    }

    pub(crate) fn from_raw(model: Model, coords: Vec3) -> Point {
        Point { model, coords: model.normalize_point(coords) }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    /// Model coordinates; euclidean points report `[x, y, 1]`.
    pub fn coords(&self) -> [f64; 3] {
        [self.coords.x, self.coords.y, self.coords.z]
    }

    /// Coordinates as written in polygon files (two for the plane, three otherwise).
    pub fn file_coords(&self) -> Vec<f64> {
        match self.model {
            Model::Euclidean => vec![self.coords.x, self.coords.y],
            _ => self.coords().to_vec(),
        }
    }

    pub(crate) fn raw(&self) -> &Vec3 {
        &self.coords
    }

    /// Distance to another point of the same model.
    pub fn distance(&self, other: &Point) -> Result<f64> {
        distance(self.model, self, other)
    }

    fn check(&self, model: Model) -> Result<()> {
        if self.model == model {
            Ok(())
        } else {
            Err(Error::ModelMismatch { expected: model, found: self.model })
        }
    }
}

/// A unit tangent vector at a base point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    base: Point,
    v: Vec3,
}

impl Direction {
    /// Direction making angle `theta` with the first axis of the standard frame at `base`.
    ///
    /// In the plane the standard frame is the coordinate frame, so `theta` is the usual polar angle.
    pub fn at_angle(base: Point, theta: f64) -> Direction {
        let (e1, e2) = base.model.frame(&base.coords);
        let (s, c) = theta.sin_cos();
        Direction { base, v: e1 * c + e2 * s }
    }

    /// Initial direction of the geodesic from `base` to `target`.
    pub fn towards(base: Point, target: &Point) -> Result<Direction> {
        target.check(base.model)?;
        let v = base
            .model
            .log_dir(&base.coords, &target.coords)
            .ok_or_else(|| Error::InvalidGeodesic("direction to a coincident or antipodal point".into()))?;
        Ok(Direction { base, v })
    }

    /// Builds a direction from raw tangent components, projecting and normalizing them.
    pub fn from_vector(base: Point, v: [f64; 3]) -> Result<Direction> {
        let w = base.model.tangent_normalize(&base.coords, Vec3::new(v[0], v[1], v[2]));
        if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidGeodesic("zero tangent vector".into()));
        }
        Ok(Direction { base, v: w })
    }

    pub(crate) fn from_raw(base: Point, v: Vec3) -> Direction {
        Direction { base, v: base.model.tangent_normalize(&base.coords, v) }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn vector(&self) -> [f64; 3] {
        [self.v.x, self.v.y, self.v.z]
    }

    pub(crate) fn raw(&self) -> &Vec3 {
        &self.v
    }

    /// Angle of this direction in the standard frame at its base point, in `[0, 2 pi)`.
    pub fn angle(&self) -> f64 {
        let m = self.base.model;
        let (e1, e2) = m.frame(&self.base.coords);
        m.inner(&self.v, &e2).atan2(m.inner(&self.v, &e1)).rem_euclid(TAU)
    }

    pub fn reversed(&self) -> Direction {
        Direction { base: self.base, v: -self.v }
    }
}

/// An arclength-parametrized geodesic segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicSegment {
    pub dir: Direction,
    pub length: f64,
}

impl GeodesicSegment {
    pub fn new(dir: Direction, length: f64) -> Result<GeodesicSegment> {
        if !(length >= 0.0) {
            return Err(Error::Domain(format!("segment length {length} is negative")));
        }
        Ok(GeodesicSegment { dir, length })
    }

    pub fn from_endpoints(a: &Point, b: &Point) -> Result<GeodesicSegment> {
        let dir = Direction::towards(*a, b)?;
        let length = distance(a.model, a, b)?;
        Ok(GeodesicSegment { dir, length })
    }

    pub fn start(&self) -> &Point {
        &self.dir.base
    }

    pub fn end(&self) -> Point {
        let m = self.dir.base.model;
        Point::from_raw(m, m.exp(&self.dir.base.coords, &self.dir.v, self.length).0)
    }

    pub fn model(&self) -> Model {
        self.dir.base.model
    }
}

/// A rigid motion of a model, stored as a 3x3 matrix acting on model coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isometry {
    model: Model,
    m: Mat3,
    reflecting: bool,
}

impl Isometry {
    pub fn identity(model: Model) -> Isometry {
        Isometry { model, m: Mat3::identity(), reflecting: false }
    }

    /// Rotation by `angle` about `center` (counterclockwise in the standard orientation).
    pub fn rotation_about(center: &Point, angle: f64) -> Isometry {
        let model = center.model;
        let c = center.coords;
        let (s, co) = angle.sin_cos();
        let m = match model {
            Model::Euclidean => Mat3::new(
                co,
                -s,
                c.x - (co * c.x - s * c.y),
                s,
                co,
                c.y - (s * c.x + co * c.y),
                0.0,
                0.0,
                1.0,
            ),
            Model::Spherical => nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(c), angle)
                .into_inner(),
            Model::Hyperbolic => {
                let b = boost_to(&c);
                let r = Mat3::new(co, -s, 0.0, s, co, 0.0, 0.0, 0.0, 1.0);
                b * r * lorentz_inverse(&b)
            }
        };
        Isometry { model, m, reflecting: false }
    }

    /// Orientation-preserving isometry moving `from` to `to` along the geodesic joining them.
    pub fn transvection(from: &Point, to: &Point) -> Result<Isometry> {
        to.check(from.model)?;
        let model = from.model;
        let d = model.dist(&from.coords, &to.coords);
        if d < INVARIANT_TOL {
            return Ok(Isometry::identity(model));
        }
        let seg = GeodesicSegment::from_endpoints(from, to)?;
        // Two reflections in geodesics orthogonal to the segment, at its start and midpoint.
        let u = seg.dir.v;
        let p = from.coords;
        let n0 = model.second_axis(&p, &u);
        let (mid, um) = model.exp(&p, &u, d / 2.0);
        let n1 = model.second_axis(&mid, &um);
        let r0 = model.reflection_matrix(&p, &n0);
        let r1 = model.reflection_matrix(&mid, &n1);
        Ok(Isometry { model, m: r1 * r0, reflecting: false })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn is_reflecting(&self) -> bool {
        self.reflecting
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
    }

    pub(crate) fn raw(&self) -> &Mat3 {
        &self.m
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Isometry) -> Result<Isometry> {
        if self.model != other.model {
            return Err(Error::ModelMismatch { expected: self.model, found: other.model });
        }
        Ok(self.compose_unchecked(other))
    }

    pub(crate) fn compose_unchecked(&self, other: &Isometry) -> Isometry {
        Isometry { model: self.model, m: self.m * other.m, reflecting: self.reflecting ^ other.reflecting }
    }

    pub fn inverse(&self) -> Isometry {
        let m = match self.model {
            Model::Spherical => self.m.transpose(),
            Model::Hyperbolic => lorentz_inverse(&self.m),
            Model::Euclidean => self.m.try_inverse().expect("affine isometries are invertible"),
        };
        Isometry { model: self.model, m, reflecting: self.reflecting }
    }

    pub fn apply_point(&self, p: &Point) -> Result<Point> {
        p.check(self.model)?;
        Ok(self.map_point(p))
    }

    pub(crate) fn map_point(&self, p: &Point) -> Point {
        Point::from_raw(self.model, self.m * p.coords)
    }

    #[inline]
    pub(crate) fn map_raw(&self, x: &Vec3) -> Vec3 {
        self.model.normalize_point(self.m * x)
    }

    pub fn apply_direction(&self, d: &Direction) -> Result<Direction> {
        d.base.check(self.model)?;
        let base = self.map_point(&d.base);
        Ok(Direction::from_raw(base, self.m * d.v))
    }

    pub fn apply_segment(&self, s: &GeodesicSegment) -> Result<GeodesicSegment> {
        Ok(GeodesicSegment { dir: self.apply_direction(&s.dir)?, length: s.length })
    }

    /// Largest entry-wise deviation from `other`.
    pub fn deviation(&self, other: &Isometry) -> f64 {
        (self.m - other.m).amax()
    }
}

/// Boost (hyperbolic translation) taking `(0,0,1)` to `p`.
fn boost_to(p: &Vec3) -> Mat3 {
    let k = 1.0 / (1.0 + p.z);
    Mat3::new(
        1.0 + p.x * p.x * k,
        p.x * p.y * k,
        p.x,
        p.x * p.y * k,
        1.0 + p.y * p.y * k,
        p.y,
        p.x,
        p.y,
        p.z,
    )
}

fn lorentz_inverse(m: &Mat3) -> Mat3 {
    let j = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
    j * m.transpose() * j
}

/// Reflection in the geodesic carrying `mirror`.
pub fn reflect(model: Model, mirror: &GeodesicSegment) -> Result<Isometry> {
    mirror.dir.base.check(model)?;
    if !(mirror.length > INVARIANT_TOL) {
        return Err(Error::InvalidGeodesic(format!("mirror of length {} does not determine a geodesic", mirror.length)));
    }
    let m = model.reflection_matrix(&mirror.dir.base.coords, &mirror.dir.v);
    Ok(Isometry { model, m, reflecting: true })
}

/// Point and parallel-transported direction at arclength `t` along the geodesic.
pub fn geodesic_point_at(model: Model, start: &Point, dir: &Direction, t: f64) -> Result<(Point, Direction)> {
    start.check(model)?;
    dir.base.check(model)?;
    if t < 0.0 {
        return Err(Error::Domain(format!("geodesic parameter {t} is negative")));
    }
    let (p, v) = model.exp(&start.coords, &dir.v, t);
    let p = Point::from_raw(model, p);
    Ok((p, Direction::from_raw(p, v)))
}

pub fn distance(model: Model, p: &Point, q: &Point) -> Result<f64> {
    p.check(model)?;
    q.check(model)?;
    Ok(model.dist(&p.coords, &q.coords))
}

/// Oriented angle from `a` to `b` in `[0, 2 pi)`.
pub fn angle_between(a: &Direction, b: &Direction) -> Result<f64> {
    b.base.check(a.base.model)?;
    if a.base.model.dist(&a.base.coords, &b.base.coords) > INVARIANT_TOL {
        return Err(Error::BasePointMismatch);
    }
    let m = a.base.model;
    Ok(m.oriented_angle(&a.base.coords, &a.v, &b.v).rem_euclid(TAU))
}

/// Jacobian of the exponential map in polar coordinates: `t`, `|sin t|` or `sinh t`.
pub fn pullback_density(model: Model, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("radius {t} is negative")));
    }
    Ok(match model {
        Model::Euclidean => t,
        Model::Spherical => t.sin().abs(),
        Model::Hyperbolic => t.sinh(),
    })
}

/// `x mod 2 pi` shifted into `[lo, lo + 2 pi)`.
#[inline]
pub(crate) fn wrap_angle_from(x: f64, lo: f64) -> f64 {
    lo + (x - lo).rem_euclid(TAU)
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample_point(model: Model, a: f64, b: f64) -> Point {
        match model {
            Model::Euclidean => Point::euclidean(a, b),
            Model::Spherical => {
                let (st, ct) = (b.clamp(-1.4, 1.4)).sin_cos();
                Point::from_raw(model, Vec3::new(ct * a.cos(), ct * a.sin(), st))
            }
            Model::Hyperbolic => Point::hyperbolic_polar(b.abs().min(3.0), a),
        }
    }

    fn random_isometry(model: Model, a: f64, b: f64, angle: f64, flip: bool) -> Isometry {
        let c = sample_point(model, a, b);
        let mut g = Isometry::rotation_about(&c, angle);
        if flip {
            let d = Direction::at_angle(c, angle * 0.37);
            g = reflect(model, &GeodesicSegment::new(d, 1.0).unwrap()).unwrap().compose(&g).unwrap();
        }
        g
    }

    const MODELS: [Model; 3] = [Model::Euclidean, Model::Spherical, Model::Hyperbolic];

    #[test]
    fn reflect_examples() {
        let e = Point::euclidean(0.0, 0.0);
        let x_axis = GeodesicSegment::new(Direction::at_angle(e, 0.0), 1.0).unwrap();
        let r = reflect(Model::Euclidean, &x_axis).unwrap();
        let q = r.apply_point(&Point::euclidean(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(q.coords()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.coords()[1], -1.0, epsilon = 1e-12);
        assert!(r.is_reflecting());

        let a = Point::spherical(1.0, 0.0, 0.0).unwrap();
        let b = Point::spherical(0.0, 1.0, 0.0).unwrap();
        let equator = GeodesicSegment::from_endpoints(&a, &b).unwrap();
        let r = reflect(Model::Spherical, &equator).unwrap();
        let s = r.apply_point(&Point::spherical(0.0, 0.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(s.coords()[2], -1.0, epsilon = 1e-12);

        let o = Point::hyperbolic(0.0, 0.0, 1.0).unwrap();
        let y_axis = GeodesicSegment::new(Direction::from_vector(o, [0.0, 1.0, 0.0]).unwrap(), 1.0).unwrap();
        let r = reflect(Model::Hyperbolic, &y_axis).unwrap();
        let p = Point::hyperbolic(1f64.sinh(), 0.0, 1f64.cosh()).unwrap();
        let q = r.apply_point(&p).unwrap().coords();
        assert_abs_diff_eq!(q[0], -1f64.sinh(), epsilon = 1e-12);
        assert_abs_diff_eq!(q[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[2], 1f64.cosh(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_mirror_rejected() {
        let o = Point::euclidean(0.0, 0.0);
        let seg = GeodesicSegment::new(Direction::at_angle(o, 0.0), 0.0).unwrap();
        assert!(matches!(reflect(Model::Euclidean, &seg), Err(Error::InvalidGeodesic(_))));
    }

    #[test]
    fn apply_examples_and_mismatch() {
        let p = Point::euclidean(0.3, -2.0);
        assert_eq!(Isometry::identity(Model::Euclidean).apply_point(&p).unwrap(), p);
        let rot = Isometry::rotation_about(&Point::euclidean(0.0, 0.0), PI / 2.0);
        let q = rot.apply_point(&Point::euclidean(1.0, 0.0)).unwrap().coords();
        assert_abs_diff_eq!(q[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[1], 1.0, epsilon = 1e-12);
        let s = Point::spherical(0.0, 0.0, 1.0).unwrap();
        assert!(matches!(rot.apply_point(&s), Err(Error::ModelMismatch { .. })));
    }

    #[test]
    fn geodesic_point_examples() {
        let o = Point::euclidean(0.0, 0.0);
        let (p, _) = geodesic_point_at(Model::Euclidean, &o, &Direction::at_angle(o, 0.0), 2.0).unwrap();
        assert_abs_diff_eq!(p.coords()[0], 2.0, epsilon = 1e-15);

        let n = Point::spherical(0.0, 0.0, 1.0).unwrap();
        let (p, _) = geodesic_point_at(Model::Spherical, &n, &Direction::at_angle(n, 1.234), PI).unwrap();
        assert_abs_diff_eq!(p.coords()[2], -1.0, epsilon = 1e-12);

        let h = Point::hyperbolic(0.0, 0.0, 1.0).unwrap();
        let d = Direction::from_vector(h, [1.0, 0.0, 0.0]).unwrap();
        let (p, _) = geodesic_point_at(Model::Hyperbolic, &h, &d, 1.0).unwrap();
        assert_abs_diff_eq!(p.coords()[0], 1f64.sinh(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.coords()[2], 1f64.cosh(), epsilon = 1e-12);
    }

    #[test]
    fn distance_examples() {
        let d = distance(Model::Euclidean, &Point::euclidean(0.0, 0.0), &Point::euclidean(3.0, 4.0)).unwrap();
        assert_abs_diff_eq!(d, 5.0, epsilon = 1e-14);
        let n = Point::spherical(0.0, 0.0, 1.0).unwrap();
        let e = Point::spherical(1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(distance(Model::Spherical, &n, &e).unwrap(), PI / 2.0, epsilon = 1e-14);
        let o = Point::hyperbolic(0.0, 0.0, 1.0).unwrap();
        let p = Point::hyperbolic(2f64.sinh(), 0.0, 2f64.cosh()).unwrap();
        assert_abs_diff_eq!(distance(Model::Hyperbolic, &o, &p).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn angle_between_examples() {
        let o = Point::euclidean(0.0, 0.0);
        let a = Direction::at_angle(o, 0.0);
        let b = Direction::at_angle(o, PI / 2.0);
        assert_abs_diff_eq!(angle_between(&a, &b).unwrap(), PI / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(angle_between(&a, &a).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(angle_between(&a, &a.reversed()).unwrap(), PI, epsilon = 1e-14);
        let other = Direction::at_angle(Point::euclidean(1.0, 0.0), 0.0);
        assert!(matches!(angle_between(&a, &other), Err(Error::BasePointMismatch)));
    }

    #[test]
    fn pullback_density_examples() {
        assert_abs_diff_eq!(pullback_density(Model::Euclidean, 2.0).unwrap(), 2.0);
        assert_abs_diff_eq!(pullback_density(Model::Spherical, PI).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pullback_density(Model::Hyperbolic, 1.0).unwrap(), 1.1752011936438014, epsilon = 1e-15);
        assert!(matches!(pullback_density(Model::Euclidean, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn pullback_density_small_radius_expansion() {
        for model in MODELS {
            for &t in &[1e-3, 5e-4, 1e-4, 1e-6] {
                let k = model.curvature() as f64;
                let approx = t - k * t * t * t / 6.0;
                assert!((pullback_density(model, t).unwrap() - approx).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frames_are_orthonormal_and_positive() {
        for model in MODELS {
            for i in 0..20 {
                let p = sample_point(model, i as f64 * 0.7, (i as f64 * 0.31).sin() * 1.3);
                let (e1, e2) = model.frame(p.raw());
                assert!((model.inner(&e1, &e1) - 1.0).abs() < 1e-12);
                assert!((model.inner(&e2, &e2) - 1.0).abs() < 1e-12);
                assert!(model.inner(&e1, &e2).abs() < 1e-12);
                assert!((model.oriented_angle(p.raw(), &e1, &e2) - PI / 2.0).abs() < 1e-12);
                if model != Model::Euclidean {
                    assert!(model.inner(&e1, p.raw()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ray_hits_segment_in_each_model() {
        let o = Point::euclidean(0.5, 0.5);
        let d = Direction::at_angle(o, 0.0);
        let t = Model::Euclidean
            .ray_meets_segment(o.raw(), d.raw(), &Vec3::new(1.0, 0.0, 1.0), &Vec3::new(1.0, 1.0, 1.0))
            .unwrap();
        assert_abs_diff_eq!(t, 0.5, epsilon = 1e-15);

        // From the north pole along the x-meridian we hit the equator arc around (1,0,0) at pi/2.
        let n = Point::spherical(0.0, 0.0, 1.0).unwrap();
        let d = Direction::from_vector(n, [1.0, 0.0, 0.0]).unwrap();
        let a = Vec3::new(1.0, -0.5, 0.0).normalize();
        let b = Vec3::new(1.0, 0.5, 0.0).normalize();
        let t = Model::Spherical.ray_meets_segment(n.raw(), d.raw(), &a, &b).unwrap();
        assert_abs_diff_eq!(t, PI / 2.0, epsilon = 1e-14);
        // The opposite direction meets it after passing through the south pole.
        let t = Model::Spherical.ray_meets_segment(n.raw(), &-d.raw(), &a, &b).unwrap();
        assert_abs_diff_eq!(t, 3.0 * PI / 2.0, epsilon = 1e-14);

        let h = Point::hyperbolic(0.0, 0.0, 1.0).unwrap();
        let d = Direction::from_vector(h, [1.0, 0.0, 0.0]).unwrap();
        let a = *Point::hyperbolic_polar(1.0, -0.2).raw();
        let b = *Point::hyperbolic_polar(1.0, 0.2).raw();
        let t = Model::Hyperbolic.ray_meets_segment(h.raw(), d.raw(), &a, &b).unwrap();
        let m = Model::Hyperbolic.foot_on_line(h.raw(), &a, &b).unwrap();
        assert_abs_diff_eq!(t, Model::Hyperbolic.dist(h.raw(), &m), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn isometries_preserve_distance_and_compose(
            mi in 0usize..3, a in -3.0f64..3.0, b in -1.2f64..1.2, ang in -3.0f64..3.0, flip: bool,
            a2 in -3.0f64..3.0, b2 in -1.2f64..1.2, ang2 in -3.0f64..3.0,
            pa in -3.0f64..3.0, pb in -1.2f64..1.2, qa in -3.0f64..3.0, qb in -1.2f64..1.2,
        ) {
            let model = MODELS[mi];
            let g = random_isometry(model, a, b, ang, flip);
            let h = random_isometry(model, a2, b2, ang2, !flip);
            let p = sample_point(model, pa, pb);
            let q = sample_point(model, qa, qb);
            let d0 = distance(model, &p, &q).unwrap();
            let d1 = distance(model, &g.apply_point(&p).unwrap(), &g.apply_point(&q).unwrap()).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-10 * d0.max(1.0));
            let gh = g.compose(&h).unwrap();
            let lhs = gh.apply_point(&p).unwrap();
            let rhs = g.apply_point(&h.apply_point(&p).unwrap()).unwrap();
            prop_assert!(model.dist(lhs.raw(), rhs.raw()) < 1e-10);
            prop_assert_eq!(gh.is_reflecting(), g.is_reflecting() ^ h.is_reflecting());
        }

        #[test]
        fn reflection_is_an_involution(
            mi in 0usize..3, a in -3.0f64..3.0, b in -1.2f64..1.2, ang in 0.0f64..6.2,
            pa in -3.0f64..3.0, pb in -1.2f64..1.2,
        ) {
            let model = MODELS[mi];
            let c = sample_point(model, a, b);
            let r = reflect(model, &GeodesicSegment::new(Direction::at_angle(c, ang), 0.5).unwrap()).unwrap();
            let p = sample_point(model, pa, pb);
            let back = r.apply_point(&r.apply_point(&p).unwrap()).unwrap();
            prop_assert!(model.dist(p.raw(), back.raw()) < 1e-10);
            prop_assert!(r.compose(&r).unwrap().deviation(&Isometry::identity(model)) < 1e-10 * r.raw().amax().powi(2).max(1.0));
        }

        #[test]
        fn geodesic_flow_is_additive(
            mi in 0usize..3, a in -3.0f64..3.0, b in -1.2f64..1.2, ang in 0.0f64..TAU,
            t1 in 0.0f64..2.0, t2 in 0.0f64..2.0,
        ) {
            let model = MODELS[mi];
            let p = sample_point(model, a, b);
            let d = Direction::at_angle(p, ang);
            let (q, _) = geodesic_point_at(model, &p, &d, t1 + t2).unwrap();
            let (m, dm) = geodesic_point_at(model, &p, &d, t1).unwrap();
            let (r, _) = geodesic_point_at(model, &m, &dm, t2).unwrap();
            prop_assert!(model.dist(q.raw(), r.raw()) < 1e-9);
            if model != Model::Spherical || t1 < PI {
                let got = distance(model, &p, &m).unwrap();
                prop_assert!((got - t1).abs() < 1e-9);
            }
        }

        #[test]
        fn spherical_distance_wraps(ang in 0.0f64..TAU, t in 0.0f64..12.0) {
            let p = Point::spherical(0.0, 0.0, 1.0).unwrap();
            let (q, _) = geodesic_point_at(Model::Spherical, &p, &Direction::at_angle(p, ang), t).unwrap();
            let r = t.rem_euclid(TAU);
            prop_assert!((distance(Model::Spherical, &p, &q).unwrap() - r.min(TAU - r)).abs() < 1e-9);
        }

        #[test]
        fn transvection_moves_point(mi in 0usize..3, a in -3.0f64..3.0, b in -1.2f64..1.2, c in -3.0f64..3.0, d in -1.2f64..1.2) {
            let model = MODELS[mi];
            let p = sample_point(model, a, b);
            let q = sample_point(model, c, d);
            prop_assume!(model != Model::Spherical || model.dist(p.raw(), q.raw()) < 3.0);
            let g = Isometry::transvection(&p, &q).unwrap();
            prop_assert!(model.dist(g.apply_point(&p).unwrap().raw(), q.raw()) < 1e-9);
        }
    }
}
