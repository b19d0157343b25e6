//! Geodesic polygons with obstacles.
//!
//! Corners are numbered globally across loops. Side `i` runs from corner `i` to `next(i)`, and the
//! table lies to the left of every side.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};
use crate::geom::{Direction, Isometry, Model, Point, SegmentMeet, Vec3, PREDICATE_TOL};

/// Largest denominator tried when recognizing an angle as a rational multiple of pi.
pub const MAX_ANGLE_DENOMINATOR: u64 = 1_000_000;

/// Corners closer than this are treated as repeated.
const REPEAT_TOL: f64 = 1e-12;
/// Corner angles this close to 0 or 2 pi are rejected.
const ANGLE_TOL: f64 = 1e-9;

/// Raw polygon description as stored in polygon files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonSpec {
    pub model: Model,
    pub loops: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub side: usize,
    /// Arclength from the start corner of the side.
    pub s: f64,
    /// Arclength coordinate along the whole boundary, in `[0, perimeter)`.
    pub global: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HitKind {
    Side { side: usize, s: f64 },
    Corner { corner: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitResult {
    pub kind: HitKind,
    pub t: f64,
    pub point: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleAreaIdentity {
    pub angle_sum: f64,
    pub area: f64,
    pub residual: f64,
}

/// Coxeter relation orders between sides; `None` stands for infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct CoxeterMatrix {
    pub entries: Vec<Vec<Option<u64>>>,
    pub max_denominator: u64,
}

#[derive(Clone, Debug)]
pub struct Polygon {
    model: Model,
    corners: Vec<Vec3>,
    loops: Vec<Vec<usize>>,
    loop_of: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    angles: Vec<f64>,
    side_len: Vec<f64>,
    side_dir: Vec<Vec3>,
    side_offset: Vec<f64>,
    reflections: Vec<Isometry>,
    perimeter: f64,
    area: f64,
}

/// Validates raw corner lists and builds the polygon.
pub fn validate_polygon(spec: &PolygonSpec) -> Result<Polygon> {
    let loops = spec
        .loops
        .iter()
        .map(|lp| lp.iter().map(|c| Point::new(spec.model, c)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Polygon::from_loops(spec.model, loops)
}

impl Polygon {
    pub fn from_loops(model: Model, loops: Vec<Vec<Point>>) -> Result<Polygon> {
        if loops.is_empty() {
            return Err(ValidationError::Empty.into());
        }
        let mut raw: Vec<Vec<Vec3>> = Vec::with_capacity(loops.len());
        for (li, lp) in loops.iter().enumerate() {
            if lp.len() < 3 {
                return Err(ValidationError::TooFewCorners { loop_index: li, count: lp.len() }.into());
            }
            for p in lp {
                if p.model() != model {
                    return Err(Error::ModelMismatch { expected: model, found: p.model() });
                }
            }
            let pts: Vec<Vec3> = lp.iter().map(|p| *p.raw()).collect();
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    if model.dist(&pts[i], &pts[j]) < REPEAT_TOL {
                        return Err(ValidationError::RepeatedVertex { loop_index: li, vertex: j }.into());
                    }
                }
            }
            if model == Model::Spherical {
                for i in 0..pts.len() {
                    let length = model.dist(&pts[i], &pts[(i + 1) % pts.len()]);
                    if length >= PI - REPEAT_TOL {
                        return Err(ValidationError::OverlongSphericalSide { loop_index: li, side: i, length }.into());
                    }
                }
            }
            raw.push(pts);
        }

        for (li, pts) in raw.iter().enumerate() {
            let n = pts.len();
            for i in 0..n {
                for j in i + 2..n {
                    if i == 0 && j == n - 1 {
                        continue;
                    }
                    let meet = model.segment_intersection(&pts[i], &pts[(i + 1) % n], &pts[j], &pts[(j + 1) % n]);
                    if meet != SegmentMeet::Disjoint {
                        return Err(ValidationError::SelfIntersection { loop_index: li, side_a: i, side_b: j }.into());
                    }
                }
            }
        }
        for a in 0..raw.len() {
            for b in a + 1..raw.len() {
                let (pa, pb) = (&raw[a], &raw[b]);
                for i in 0..pa.len() {
                    for j in 0..pb.len() {
                        let meet = model.segment_intersection(
                            &pa[i],
                            &pa[(i + 1) % pa.len()],
                            &pb[j],
                            &pb[(j + 1) % pb.len()],
                        );
                        if meet != SegmentMeet::Disjoint {
                            return Err(ValidationError::LoopsIntersect { loop_a: a, loop_b: b }.into());
                        }
                    }
                }
            }
        }

        // The table must lie to the left of every side. On the plane and the hyperbolic plane the
        // orientation is forced by which side is bounded; on the sphere the given orientation is kept.
        if model != Model::Spherical {
            for (li, pts) in raw.iter_mut().enumerate() {
                let n = pts.len() as f64;
                let sum: f64 = loop_angles(model, pts).iter().sum();
                let outer_ok = sum < n * PI;
                if (li == 0) != outer_ok {
                    pts.reverse();
                }
            }
        }

        let mut poly = Polygon::assemble(model, raw);
        for (li, lp) in poly.loops.iter().enumerate() {
            for (k, &v) in lp.iter().enumerate() {
                let angle = poly.angles[v];
                if !(angle > ANGLE_TOL && angle < TAU - ANGLE_TOL) {
                    return Err(ValidationError::ZeroAngle { loop_index: li, vertex: k, angle }.into());
                }
            }
        }
        for li in 1..poly.loops.len() {
            let probe = poly.corners[poly.loops[li][0]];
            if !poly.left_of_loop(0, &probe) {
                return Err(ValidationError::ObstacleOutside { loop_index: li }.into());
            }
            for lj in 1..poly.loops.len() {
                if lj != li && !poly.left_of_loop(lj, &probe) {
                    return Err(ValidationError::NestedObstacle { inner: li, outer: lj }.into());
                }
            }
        }
        poly.area = poly.compute_area();
        if model == Model::Spherical && poly.area >= 4.0 * PI - 1e-9 {
            return Err(ValidationError::OversizedRegion { area: poly.area }.into());
        }
        Ok(poly)
    }

    fn assemble(model: Model, raw: Vec<Vec<Vec3>>) -> Polygon {
        let mut corners = Vec::new();
        let mut loops = Vec::new();
        let mut loop_of = Vec::new();
        let mut next = Vec::new();
        let mut prev = Vec::new();
        for (li, pts) in raw.into_iter().enumerate() {
            let start = corners.len();
            let n = pts.len();
            loops.push((start..start + n).collect());
            for (k, p) in pts.into_iter().enumerate() {
                corners.push(p);
                loop_of.push(li);
                next.push(start + (k + 1) % n);
                prev.push(start + (k + n - 1) % n);
            }
        }
        let m = corners.len();
        let mut side_len = Vec::with_capacity(m);
        let mut side_dir = Vec::with_capacity(m);
        let mut reflections = Vec::with_capacity(m);
        for i in 0..m {
            let (a, b) = (&corners[i], &corners[next[i]]);
            side_len.push(model.dist(a, b));
            let u = model.log_dir(a, b).expect("distinct corners");
            side_dir.push(u);
            let seg = crate::geom::GeodesicSegment::new(Direction::from_raw(Point::from_raw(model, *a), u), 1.0)
                .expect("positive length");
            reflections.push(crate::geom::reflect(model, &seg).expect("nondegenerate side"));
        }
        let mut side_offset = Vec::with_capacity(m);
        let mut acc = 0.0;
        for l in &side_len {
            side_offset.push(acc);
            acc += l;
        }
        let angles = (0..m)
            .map(|v| corner_angle(model, &corners[v], &corners[next[v]], &corners[prev[v]]))
            .collect();
        Polygon {
            model,
            corners,
            loops,
            loop_of,
            next,
            prev,
            angles,
            side_len,
            side_dir,
            side_offset,
            reflections,
            perimeter: acc,
            area: 0.0,
        }
    }

    /// Regular polygon with `n` corners at distance `circumradius` from the standard origin.
    pub fn regular(model: Model, n: usize, circumradius: f64) -> Result<Polygon> {
        let pts = (0..n)
            .map(|k| {
                let phi = TAU * k as f64 / n as f64;
                let r = circumradius;
                match model {
                    Model::Euclidean => Point::euclidean(r * phi.cos(), r * phi.sin()),
                    Model::Spherical => {
                        Point::from_raw(model, Vec3::new(r.sin() * phi.cos(), r.sin() * phi.sin(), r.cos()))
                    }
                    Model::Hyperbolic => Point::hyperbolic_polar(r, phi),
                }
            })
            .collect();
        Polygon::from_loops(model, vec![pts])
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn corner_count(&self) -> usize {
        self.corners.len()
    }

    pub fn side_count(&self) -> usize {
        self.corners.len()
    }

    pub fn obstacle_count(&self) -> usize {
        self.loops.len() - 1
    }

    pub fn loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    pub fn loop_of(&self, corner: usize) -> usize {
        self.loop_of[corner]
    }

    pub fn corner(&self, v: usize) -> Point {
        Point::from_raw(self.model, self.corners[v])
    }

    pub(crate) fn corner_raw(&self, v: usize) -> &Vec3 {
        &self.corners[v]
    }

    pub fn next(&self, v: usize) -> usize {
        self.next[v]
    }

    pub fn prev(&self, v: usize) -> usize {
        self.prev[v]
    }

    /// Interior angle at corner `v`, measured inside the table.
    pub fn angle(&self, v: usize) -> f64 {
        self.angles[v]
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn side_length(&self, side: usize) -> f64 {
        self.side_len[side]
    }

    /// Endpoints `(start, end)` of a side.
    pub fn side_corners(&self, side: usize) -> (usize, usize) {
        (side, self.next[side])
    }

    pub(crate) fn side_dir_raw(&self, side: usize) -> &Vec3 {
        &self.side_dir[side]
    }

    pub fn side_reflection(&self, side: usize) -> &Isometry {
        &self.reflections[side]
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Raw corner lists in table orientation, suitable for writing back to a file.
    pub fn to_spec(&self) -> PolygonSpec {
        PolygonSpec {
            model: self.model,
            loops: self.loops.iter().map(|lp| lp.iter().map(|&v| self.corner(v).file_coords()).collect()).collect(),
        }
    }

    /// Image of the polygon under an isometry (orientation is repaired if the isometry reflects).
    pub fn transformed(&self, g: &Isometry) -> Result<Polygon> {
        let loops = self
            .loops
            .iter()
            .map(|lp| lp.iter().map(|&v| g.apply_point(&self.corner(v))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let loops = if g.is_reflecting() && self.model == Model::Spherical {
            loops.into_iter().map(|mut l| {
                l.reverse();
                l
            }).collect()
        } else {
            loops
        };
        Polygon::from_loops(self.model, loops)
    }

    pub fn boundary_point(&self, global: f64) -> BoundaryPoint {
        let g = global.rem_euclid(self.perimeter);
        let side = match self.side_offset.binary_search_by(|o| o.partial_cmp(&g).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        BoundaryPoint { side, s: g - self.side_offset[side], global: g }
    }

    pub fn boundary_point_on_side(&self, side: usize, s: f64) -> Result<BoundaryPoint> {
        if side >= self.side_count() || !(0.0..self.side_len[side]).contains(&s) {
            return Err(Error::InvalidBase(format!("no boundary point at side {side}, s = {s}")));
        }
        Ok(BoundaryPoint { side, s, global: self.side_offset[side] + s })
    }

    pub fn point_on_boundary(&self, b: &BoundaryPoint) -> Point {
        let (p, _) = self.model.exp(&self.corners[b.side], &self.side_dir[b.side], b.s);
        Point::from_raw(self.model, p)
    }

    /// Unit tangent of side `side` at the given boundary point, pointing towards its end corner.
    pub fn side_tangent(&self, b: &BoundaryPoint) -> Direction {
        let (p, u) = self.model.exp(&self.corners[b.side], &self.side_dir[b.side], b.s);
        Direction::from_raw(Point::from_raw(self.model, p), u)
    }

    /// `p + 2q - 2` for `p` corners and `q` obstacles.
    pub fn kappa(&self) -> i64 {
        self.corners.len() as i64 + 2 * self.obstacle_count() as i64 - 2
    }

    pub fn angle_area_identity(&self) -> Result<AngleAreaIdentity> {
        let angle_sum: f64 = self.angles.iter().sum();
        let kp = self.kappa() as f64 * PI;
        let residual = match self.model {
            Model::Euclidean => angle_sum - kp,
            Model::Spherical => angle_sum - (self.area + kp),
            Model::Hyperbolic => angle_sum - (kp - self.area),
        };
        if residual.abs() >= 1e-8 {
            return Err(Error::InconsistentPolygon { residual });
        }
        Ok(AngleAreaIdentity { angle_sum, area: self.area, residual })
    }

    fn compute_area(&self) -> f64 {
        match self.model {
            Model::Spherical => {
                let outer = self.left_area(0);
                let holes: f64 = (1..self.loops.len()).map(|l| 4.0 * PI - self.left_area(l)).sum();
                outer - holes
            }
            _ => (0..self.loops.len()).map(|l| self.signed_area(l)).sum(),
        }
    }

    /// Area enclosed counterclockwise by a planar or hyperbolic loop (negative when clockwise).
    fn signed_area(&self, li: usize) -> f64 {
        let lp = &self.loops[li];
        let c = |k: usize| &self.corners[lp[k]];
        match self.model {
            Model::Euclidean => {
                let n = lp.len();
                0.5 * (0..n).map(|k| c(k).x * c((k + 1) % n).y - c((k + 1) % n).x * c(k).y).sum::<f64>()
            }
            _ => (1..lp.len() - 1)
                .map(|k| {
                    let (a, b, d) = (c(0), c(k), c(k + 1));
                    let det = a.dot(&b.cross(d));
                    if det.abs() < 1e-300 {
                        return 0.0;
                    }
                    let m = self.model;
                    let sum = corner_angle_unsigned(m, a, b, d) + corner_angle_unsigned(m, b, d, a) + corner_angle_unsigned(m, d, a, b);
                    det.signum() * (PI - sum)
                })
                .sum(),
        }
    }

    /// Area of the spherical region to the left of a loop, in `[0, 4 pi)`.
    fn left_area(&self, li: usize) -> f64 {
        let lp = &self.loops[li];
        let a = &self.corners[lp[0]];
        let mut total = 0.0;
        for k in 1..lp.len() - 1 {
            let (b, c) = (&self.corners[lp[k]], &self.corners[lp[k + 1]]);
            let det = a.dot(&b.cross(c));
            total += 2.0 * det.atan2(1.0 + a.dot(b) + b.dot(c) + c.dot(a));
        }
        total.rem_euclid(4.0 * PI)
    }

    /// Whether `p` lies in the region to the left of loop `li`.
    pub(crate) fn left_of_loop(&self, li: usize, p: &Vec3) -> bool {
        let lp = &self.loops[li];
        let m = self.model;
        for attempt in 0..3 * lp.len() {
            let side = lp[attempt % lp.len()];
            let frac = [0.5, 0.37, 0.61][(attempt / lp.len()).min(2)];
            let (mid, u) = m.exp(&self.corners[side], &self.side_dir[side], frac * self.side_len[side]);
            let normal = m.second_axis(&mid, &u);
            let eps = 1e-7 * self.side_len[side].min(1.0);
            let (reference, _) = m.exp(&mid, &normal, eps);
            if m == Model::Spherical && p.dot(&reference) < -1.0 + 1e-9 {
                continue;
            }
            if m.dist(p, &reference) < 1e-15 {
                return true;
            }
            let mut crossings = 0usize;
            let mut degenerate = false;
            for &s in lp {
                match m.segment_intersection(p, &reference, &self.corners[s], &self.corners[self.next[s]]) {
                    SegmentMeet::Disjoint => {}
                    SegmentMeet::Overlap => degenerate = true,
                    SegmentMeet::Point { along_first, along_second } => {
                        let edge = |x: f64| x.abs() < 1e-9 || (1.0 - x).abs() < 1e-9;
                        if edge(along_second) || along_first.abs() < 1e-9 {
                            degenerate = true;
                        } else if (1.0 - along_first).abs() < 1e-9 {
                            // Reference sits essentially on the side it was nudged away from.
                            if s != side {
                                degenerate = true;
                            }
                        } else {
                            crossings += 1;
                        }
                    }
                }
                if degenerate {
                    break;
                }
            }
            if !degenerate {
                return crossings.is_multiple_of(2);
            }
        }
        false
    }

    /// Whether `p` lies in the closed table.
    pub fn contains(&self, p: &Point) -> bool {
        if p.model() != self.model {
            return false;
        }
        if self.distance_to_boundary(p) < PREDICATE_TOL {
            return true;
        }
        (0..self.loops.len()).all(|l| self.left_of_loop(l, p.raw()))
    }

    /// Distance from `p` to the boundary of the table.
    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        (0..self.side_count())
            .map(|s| self.model.point_segment_dist(p.raw(), &self.corners[s], &self.corners[self.next[s]]))
            .fold(f64::INFINITY, f64::min)
    }

    /// First boundary feature met by the geodesic ray from `from` in direction `dir`.
    pub fn first_hit(&self, from: &Point, dir: &Direction) -> Result<HitResult> {
        if from.model() != self.model || dir.base().model() != self.model {
            return Err(Error::ModelMismatch {
                expected: self.model,
                found: if from.model() != self.model { from.model() } else { dir.base().model() },
            });
        }
        let launch = (0..self.side_count()).find(|&s| {
            self.model.point_segment_dist(from.raw(), &self.corners[s], &self.corners[self.next[s]]) < 1e-12
        });
        self.first_hit_raw(from.raw(), dir.raw(), launch)
    }

    pub(crate) fn first_hit_raw(&self, o: &Vec3, d: &Vec3, exclude: Option<usize>) -> Result<HitResult> {
        let m = self.model;
        let mut best: Option<(f64, usize)> = None;
        for s in 0..self.side_count() {
            if Some(s) == exclude {
                continue;
            }
            if let Some(t) = m.ray_meets_segment(o, d, &self.corners[s], &self.corners[self.next[s]]) {
                let valid = t > 1e-12 && (m != Model::Spherical || t < TAU - 1e-12);
                if valid && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, s));
                }
            }
        }
        let (t, side) = best.ok_or_else(|| Error::Integrity("ray does not meet the boundary".into()))?;
        let (hit, _) = m.exp(o, d, t);
        let point = Point::from_raw(m, hit);
        let (a, b) = self.side_corners(side);
        let kind = if m.dist(&hit, &self.corners[a]) < PREDICATE_TOL {
            HitKind::Corner { corner: a }
        } else if m.dist(&hit, &self.corners[b]) < PREDICATE_TOL {
            HitKind::Corner { corner: b }
        } else {
            HitKind::Side { side, s: m.dist(&self.corners[a], &hit) }
        };
        Ok(HitResult { kind, t, point })
    }

    pub fn coxeter_matrix(&self) -> CoxeterMatrix {
        let n = self.side_count();
        let mut entries = vec![vec![None; n]; n];
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = Some(1);
        }
        for v in 0..n {
            let (a, b) = (self.prev[v], v);
            let order = rational_denominator(self.angles[v] / PI, MAX_ANGLE_DENOMINATOR);
            entries[a][b] = order;
            entries[b][a] = order;
        }
        CoxeterMatrix { entries, max_denominator: MAX_ANGLE_DENOMINATOR }
    }
}

/// Interior angle at `v` between the side towards `next` and the side towards `prev`.
fn corner_angle(model: Model, v: &Vec3, next: &Vec3, prev: &Vec3) -> f64 {
    let (Some(a), Some(b)) = (model.log_dir(v, next), model.log_dir(v, prev)) else {
        return 0.0;
    };
    model.oriented_angle(v, &a, &b).rem_euclid(TAU)
}

fn corner_angle_unsigned(model: Model, v: &Vec3, p: &Vec3, q: &Vec3) -> f64 {
    let (Some(a), Some(b)) = (model.log_dir(v, p), model.log_dir(v, q)) else {
        return 0.0;
    };
    model.oriented_angle(v, &a, &b).abs()
}

fn loop_angles(model: Model, pts: &[Vec3]) -> Vec<f64> {
    let n = pts.len();
    (0..n).map(|k| corner_angle(model, &pts[k], &pts[(k + 1) % n], &pts[(k + n - 1) % n])).collect()
}

/// Denominator of `x` as a fraction in lowest terms, if one with denominator at most `max_den`
/// reproduces it within `1e-9`.
///
/// A convergent `p/q` is only accepted when it is far closer to `x` than the generic `1/q^2`
/// approximation quality, otherwise every irrational would be matched by some large denominator.
pub fn rational_denominator(x: f64, max_den: u64) -> Option<u64> {
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let err = (x - h1 as f64 / k1 as f64).abs();
        if err < 1e-9 && err * (k1 as f64).powi(2) < 1e-3 {
            return Some(k1 as u64);
        }
        let frac = r - a;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square() -> Polygon {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        Polygon::from_loops(Model::Euclidean, vec![pts.iter().map(|&(x, y)| Point::euclidean(x, y)).collect()]).unwrap()
    }

    fn octant() -> Polygon {
        let spec = PolygonSpec {
            model: Model::Spherical,
            loops: vec![vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]],
        };
        validate_polygon(&spec).unwrap()
    }

    #[test]
    fn square_and_octant_angles() {
        let sq = square();
        assert_eq!(sq.corner_count(), 4);
        for v in 0..4 {
            assert_abs_diff_eq!(sq.angle(v), PI / 2.0, epsilon = 1e-12);
        }
        let oc = octant();
        assert_eq!(oc.corner_count(), 3);
        for v in 0..3 {
            assert_abs_diff_eq!(oc.angle(v), PI / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn clockwise_outer_loop_is_reoriented() {
        let pts = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)];
        let p = Polygon::from_loops(Model::Euclidean, vec![pts.iter().map(|&(x, y)| Point::euclidean(x, y)).collect()])
            .unwrap();
        assert_abs_diff_eq!(p.area(), 1.0, epsilon = 1e-12);
        assert!(p.angles().iter().all(|a| (a - PI / 2.0).abs() < 1e-12));
    }

    #[test]
    fn repeated_vertex_rejected() {
        let spec = PolygonSpec {
            model: Model::Euclidean,
            loops: vec![vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]],
        };
        assert!(matches!(
            validate_polygon(&spec),
            Err(Error::Validation(ValidationError::RepeatedVertex { .. }))
        ));
    }

    #[test]
    fn bowtie_rejected() {
        let spec = PolygonSpec {
            model: Model::Euclidean,
            loops: vec![vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]],
        };
        assert!(matches!(
            validate_polygon(&spec),
            Err(Error::Validation(ValidationError::SelfIntersection { .. }))
        ));
    }

    #[test]
    fn collinear_corner_rejected() {
        let spec = PolygonSpec {
            model: Model::Euclidean,
            loops: vec![vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.0]]],
        };
        // A straight corner is allowed; a spike is not.
        assert!(validate_polygon(&spec).is_ok());
        let spike = PolygonSpec {
            model: Model::Euclidean,
            loops: vec![vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]],
        };
        assert!(validate_polygon(&spike).is_err());
    }

    #[test]
    fn obstacles_validated() {
        let outer = vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![4.0, 4.0], vec![0.0, 4.0]];
        let tri = vec![vec![1.0, 1.0], vec![2.0, 1.0], vec![1.5, 2.0]];
        let p = validate_polygon(&PolygonSpec { model: Model::Euclidean, loops: vec![outer.clone(), tri.clone()] })
            .unwrap();
        assert_eq!(p.kappa(), 7);
        assert_abs_diff_eq!(p.area(), 16.0 - 0.5, epsilon = 1e-12);
        p.angle_area_identity().unwrap();

        let outside = vec![vec![5.0, 1.0], vec![6.0, 1.0], vec![5.5, 2.0]];
        assert!(matches!(
            validate_polygon(&PolygonSpec { model: Model::Euclidean, loops: vec![outer.clone(), outside] }),
            Err(Error::Validation(ValidationError::ObstacleOutside { .. }))
        ));
        let inner = vec![vec![1.4, 1.2], vec![1.6, 1.2], vec![1.5, 1.4]];
        assert!(matches!(
            validate_polygon(&PolygonSpec { model: Model::Euclidean, loops: vec![outer.clone(), tri.clone(), inner] }),
            Err(Error::Validation(ValidationError::NestedObstacle { .. }))
        ));
        let crossing = vec![vec![3.0, 3.0], vec![5.0, 3.0], vec![3.0, 3.5]];
        assert!(matches!(
            validate_polygon(&PolygonSpec { model: Model::Euclidean, loops: vec![outer, crossing] }),
            Err(Error::Validation(ValidationError::LoopsIntersect { .. }))
        ));
    }

    #[test]
    fn overlong_spherical_side_rejected() {
        let spec = PolygonSpec {
            model: Model::Spherical,
            loops: vec![vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]],
        };
        assert!(matches!(
            validate_polygon(&spec),
            Err(Error::Validation(ValidationError::OverlongSphericalSide { .. }))
        ));
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(square().kappa(), 2);
        assert_eq!(octant().kappa(), 1);
    }

    #[test]
    fn identity_examples() {
        let id = square().angle_area_identity().unwrap();
        assert_abs_diff_eq!(id.angle_sum, TAU, epsilon = 1e-12);
        assert!(id.residual.abs() < 1e-12);
        let id = octant().angle_area_identity().unwrap();
        assert_abs_diff_eq!(id.angle_sum, 1.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(id.area, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn first_hit_examples() {
        let sq = square();
        let o = Point::euclidean(0.5, 0.5);
        let h = sq.first_hit(&o, &Direction::at_angle(o, 0.0)).unwrap();
        assert_eq!(h.kind, HitKind::Side { side: 1, s: 0.5 });
        assert_abs_diff_eq!(h.t, 0.5, epsilon = 1e-15);
        let h = sq.first_hit(&o, &Direction::at_angle(o, PI / 4.0)).unwrap();
        assert_eq!(h.kind, HitKind::Corner { corner: 2 });
        assert_abs_diff_eq!(h.t, 0.5f64.sqrt(), epsilon = 1e-12);

        let oc = octant();
        let c = Point::from_raw(Model::Spherical, Vec3::new(1.0, 1.0, 1.0));
        let pole = oc.corner(2);
        let h = oc.first_hit(&c, &Direction::towards(c, &pole).unwrap()).unwrap();
        assert_eq!(h.kind, HitKind::Corner { corner: 2 });
        assert_abs_diff_eq!(h.t, c.distance(&pole).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn coxeter_examples() {
        let cm = square().coxeter_matrix();
        assert_eq!(cm.entries[0][1], Some(2));
        assert_eq!(cm.entries[0][2], None);
        assert_eq!(cm.entries[2][2], Some(1));
        assert_eq!(rational_denominator(3.0 / 7.0, MAX_ANGLE_DENOMINATOR), Some(7));
        assert_eq!(rational_denominator(1.0 / PI, MAX_ANGLE_DENOMINATOR), None);
    }

    #[test]
    fn containment() {
        let sq = square();
        assert!(sq.contains(&Point::euclidean(0.5, 0.5)));
        assert!(sq.contains(&Point::euclidean(0.999, 0.001)));
        assert!(!sq.contains(&Point::euclidean(1.5, 0.5)));
        let oc = octant();
        assert!(oc.contains(&Point::from_raw(Model::Spherical, Vec3::new(1.0, 1.0, 1.0))));
        assert!(!oc.contains(&Point::from_raw(Model::Spherical, Vec3::new(-1.0, 1.0, 1.0))));
    }

    #[test]
    fn boundary_coordinates() {
        let sq = square();
        let b = sq.boundary_point(2.25);
        assert_eq!(b.side, 2);
        assert_abs_diff_eq!(b.s, 0.25, epsilon = 1e-15);
        let p = sq.point_on_boundary(&b).coords();
        assert_abs_diff_eq!(p[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-15);
    }
}
