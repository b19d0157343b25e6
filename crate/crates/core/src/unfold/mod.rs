//! Unfolding of billiard orbits.
//!
//! A billiard orbit reflected at side `s` continues as the straight geodesic through the reflected
//! copy of the table. Composing side reflections therefore turns every orbit into a single geodesic
//! of the model, and a whole interval of orbits that bounce off the same sides (a beam) is carried
//! by one isometry.

mod beam;
mod boundary;
mod images;

pub(crate) use beam::run;
pub use beam::{split_beams, Beam, BeamFamily, Budget, SourceDatum, SingularOrbitRecord, SplitOptions, SplitResult};
pub use boundary::{outer_boundary_curve, outer_boundary_curves, Polyline};
pub use images::{corner_images_within, visible_corner_images, CornerImage};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Direction, GeodesicSegment, Isometry, Model, Point, Vec3};
use crate::polygon::{HitKind, HitResult, Polygon};

/// Default cap on the number of beams (tiles) processed by one computation.
pub const DEFAULT_MAX_TILES: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitStatus {
    Running,
    EndedAtCorner,
    LengthExhausted,
    StepExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounce {
    pub hit: HitResult,
    /// Reflected direction; `None` when the orbit ends at a corner.
    pub outgoing: Option<Direction>,
}

#[derive(Clone, Debug)]
pub struct Orbit {
    pub source: Point,
    pub initial: Direction,
    pub bounces: Vec<Bounce>,
    /// Geodesic length of every segment, the last one possibly truncated.
    pub segments: Vec<f64>,
    pub length: f64,
    pub word: Vec<usize>,
    pub status: OrbitStatus,
}

impl Orbit {
    pub fn end_corner(&self) -> Option<usize> {
        match self.bounces.last().map(|b| b.hit.kind) {
            Some(HitKind::Corner { corner }) if self.status == OrbitStatus::EndedAtCorner => Some(corner),
            _ => None,
        }
    }
}

/// Follows the billiard flow until a corner, the length budget or the segment budget is reached.
pub fn trace_ray(p: &Polygon, source: &Point, dir: &Direction, max_length: f64, max_steps: usize) -> Result<Orbit> {
    let model = p.model();
    let launch = (0..p.side_count()).find(|&s| {
        let (a, b) = p.side_corners(s);
        model.point_segment_dist(source.raw(), p.corner_raw(a), p.corner_raw(b)) < 1e-12
    });
    let mut orbit = Orbit {
        source: *source,
        initial: *dir,
        bounces: Vec::new(),
        segments: Vec::new(),
        length: 0.0,
        word: Vec::new(),
        status: OrbitStatus::Running,
    };
    let mut pos = *source.raw();
    let mut d = *dir.raw();
    let mut exclude = launch;
    while orbit.segments.len() < max_steps {
        let hit = p.first_hit_raw(&pos, &d, exclude)?;
        if orbit.length + hit.t > max_length {
            let rest = (max_length - orbit.length).max(0.0);
            orbit.segments.push(rest);
            orbit.length = max_length;
            orbit.status = OrbitStatus::LengthExhausted;
            return Ok(orbit);
        }
        orbit.segments.push(hit.t);
        orbit.length += hit.t;
        match hit.kind {
            HitKind::Corner { .. } => {
                orbit.bounces.push(Bounce { hit, outgoing: None });
                orbit.status = OrbitStatus::EndedAtCorner;
                return Ok(orbit);
            }
            HitKind::Side { side, .. } => {
                let (_, arriving) = model.exp(&pos, &d, hit.t);
                let reflected = p.side_reflection(side).raw() * arriving;
                let out = Direction::from_raw(hit.point, reflected);
                orbit.bounces.push(Bounce { hit, outgoing: Some(out) });
                orbit.word.push(side);
                pos = *hit.point.raw();
                d = *out.raw();
                exclude = Some(side);
            }
        }
    }
    orbit.status = OrbitStatus::StepExhausted;
    Ok(orbit)
}

/// Maps every segment of the orbit into the unfolded model and measures how far the result is
/// from the single geodesic with the orbit's initial direction.
pub fn unfold_orbit(p: &Polygon, orbit: &Orbit) -> Result<(GeodesicSegment, f64)> {
    if orbit.segments.is_empty() {
        return Err(Error::Domain("orbit has no segments".into()));
    }
    let model = p.model();
    let straight = GeodesicSegment::new(orbit.initial, orbit.length)?;
    let mut g = Isometry::identity(model);
    let mut residual: f64 = 0.0;
    let mut start = *orbit.source.raw();
    let mut d = *orbit.initial.raw();
    let (o, u) = (*orbit.initial.base().raw(), *orbit.initial.raw());
    let normal = if model == Model::Hyperbolic {
        let n = o.cross(&u);
        let n = Vec3::new(n.x, n.y, -n.z);
        n / model.inner(&n, &n).sqrt()
    } else {
        Vec3::zeros()
    };
    let mut acc = 0.0;
    for (k, &len) in orbit.segments.iter().enumerate() {
        let (end, _) = model.exp(&start, &d, len);
        acc += len;
        let deviation = if model == Model::Hyperbolic {
            // Far from the origin, coordinates of nearby points agree only to a relative precision,
            // so the deviation is measured in Fermi coordinates along the unfolded geodesic and the image
            // is not renormalised onto the hyperboloid.
            let x = g.raw() * end;
            let across = model.inner(&normal, &x).asinh();
            let along = (model.inner(&u, &x) / across.cosh()).asinh();
            across.hypot(along - acc)
        } else {
            let (expected, _) = model.exp(&o, &u, acc);
            model.dist(&g.map_raw(&end), &expected)
        };
        residual = residual.max(deviation);
        if let Some(b) = orbit.bounces.get(k) {
            if let (HitKind::Side { side, .. }, Some(out)) = (b.hit.kind, b.outgoing) {
                g = g.compose_unchecked(p.side_reflection(side));
                start = *b.hit.point.raw();
                d = *out.raw();
            }
        }
    }
    if residual >= 1e-8 {
        return Err(Error::UnfoldingIntegrity { residual });
    }
    Ok((straight, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::{validate_polygon, PolygonSpec};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn square() -> Polygon {
        validate_polygon(&PolygonSpec {
            model: Model::Euclidean,
            loops: vec![vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]],
        })
        .unwrap()
    }

    #[test]
    fn horizontal_orbit() {
        let sq = square();
        let o = Point::euclidean(0.5, 0.5);
        let orbit = trace_ray(&sq, &o, &Direction::at_angle(o, 0.0), 2.0, 100).unwrap();
        assert_eq!(orbit.word, vec![1, 3]);
        assert_abs_diff_eq!(orbit.length, 2.0);
        assert_eq!(orbit.status, OrbitStatus::LengthExhausted);
        let (seg, residual) = unfold_orbit(&sq, &orbit).unwrap();
        assert_abs_diff_eq!(seg.length, 2.0);
        assert!(residual < 1e-14);
        let end = seg.end().coords();
        assert_abs_diff_eq!(end[0], 2.5, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_orbit_ends_at_corner() {
        let sq = square();
        let o = Point::euclidean(0.5, 0.5);
        let orbit = trace_ray(&sq, &o, &Direction::at_angle(o, PI / 4.0), 1.0, 100).unwrap();
        assert_eq!(orbit.status, OrbitStatus::EndedAtCorner);
        assert_eq!(orbit.end_corner(), Some(2));
        assert_abs_diff_eq!(orbit.length, 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn slope_half_orbit_matches_straight_line() {
        let sq = square();
        let o = Point::euclidean(0.5, 0.5);
        let theta = 0.5f64.atan();
        let orbit = trace_ray(&sq, &o, &Direction::at_angle(o, theta), 3.0, 100).unwrap();
        // The straight line from (0.5,0.5) with slope 1/2 crosses x = 1, 2, 3 and y = 1 within length 3.
        let mut crossings: Vec<(f64, usize)> = Vec::new();
        for k in 1..=3 {
            crossings.push(((k as f64 - 0.5) / theta.cos(), if k % 2 == 1 { 1 } else { 3 }));
        }
        crossings.push((0.5 / theta.sin(), 2));
        crossings.retain(|c| c.0 <= 3.0);
        crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(orbit.word, crossings.iter().map(|c| c.1).collect::<Vec<_>>());
        let (_, residual) = unfold_orbit(&sq, &orbit).unwrap();
        assert!(residual < 1e-12);
    }

    #[test]
    fn step_budget() {
        let sq = square();
        let o = Point::euclidean(0.5, 0.5);
        let orbit = trace_ray(&sq, &o, &Direction::at_angle(o, 0.3), 100.0, 3).unwrap();
        assert_eq!(orbit.status, OrbitStatus::StepExhausted);
        assert_eq!(orbit.segments.len(), 3);
        assert_eq!(orbit.word.len(), 3);
    }
}
