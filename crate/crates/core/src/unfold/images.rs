//! Brute-force enumeration of corner images, used as an independent check of the beam engine.
//!
//! Tiles are explored by side reflections. A tile is kept while some ray from the base point can
//! cross all the side images leading to it in order, tracked as an angular window; corner images
//! are then filtered by tracing the actual billiard orbit towards them.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geom::{Direction, Isometry, Model, Point, Vec3};
use crate::polygon::Polygon;

use super::beam::{SingularOrbitRecord, SourceDatum};
use super::{trace_ray, OrbitStatus};

#[derive(Clone, Debug, PartialEq)]
pub struct CornerImage {
    pub corner: usize,
    pub point: Point,
    /// Distance from the base point.
    pub t: f64,
    /// Words of the tiles that carry this image, shortest first.
    pub words: Vec<Vec<usize>>,
}

/// Closed arc of directions `[start, start + width]`; a width of `TAU` or more is the full circle.
#[derive(Clone, Copy, Debug)]
struct Arc {
    start: f64,
    width: f64,
}

impl Arc {
    const FULL: Arc = Arc { start: 0.0, width: TAU };

    fn contains(&self, theta: f64, tol: f64) -> bool {
        if self.width >= TAU {
            return true;
        }
        let d = (theta - self.start).rem_euclid(TAU);
        d <= self.width + tol || d >= TAU - tol
    }

    fn intersect(&self, other: &Arc) -> Option<Arc> {
        if self.width >= TAU {
            return Some(*other);
        }
        if other.width >= TAU {
            return Some(*self);
        }
        let tol = 1e-12;
        let d = (other.start - self.start).rem_euclid(TAU);
        if d <= self.width + tol {
            return Some(Arc { start: other.start, width: (self.width - d).min(other.width).max(0.0) });
        }
        if d + other.width >= TAU - tol {
            return Some(Arc { start: self.start, width: self.width.min(d + other.width - TAU).max(0.0) });
        }
        None
    }
}

struct Tile {
    g: Isometry,
    word: Vec<usize>,
    window: Arc,
    entry: Option<usize>,
}

fn direction_angle(model: Model, z: &Vec3, frame: &(Vec3, Vec3), x: &Vec3) -> Option<f64> {
    let dir = model.log_dir(z, x)?;
    Some(model.inner(&dir, &frame.1).atan2(model.inner(&dir, &frame.0)).rem_euclid(TAU))
}

/// Corner images within distance `l` of `z` on tiles reachable by rays from `z`.
///
/// Exact for convex tables; for nonconvex tables the windows over-approximate and the search is
/// bounded by `max_tiles`.
pub fn corner_images_within(p: &Polygon, z: &Point, l: f64, max_tiles: usize) -> Result<Vec<CornerImage>> {
    let model = p.model();
    if model == Model::Spherical {
        return Err(Error::Domain("corner image enumeration is only available on the plane and the hyperbolic plane".into()));
    }
    if z.model() != model {
        return Err(Error::ModelMismatch { expected: model, found: z.model() });
    }
    let zr = *z.raw();
    let frame = model.frame(&zr);
    let mut found: Vec<CornerImage> = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(Tile { g: Isometry::identity(model), word: Vec::new(), window: Arc::FULL, entry: None });
    let mut tiles = 0usize;
    while let Some(tile) = queue.pop_front() {
        tiles += 1;
        if tiles > max_tiles {
            return Err(Error::BudgetExceeded { limit: max_tiles });
        }
        let imgs: Vec<Vec3> = (0..p.corner_count()).map(|v| tile.g.map_raw(p.corner_raw(v))).collect();
        for (v, c) in imgs.iter().enumerate() {
            let t = model.dist(&zr, c);
            if t > l || t < 1e-12 {
                continue;
            }
            let Some(theta) = direction_angle(model, &zr, &frame, c) else { continue };
            if tile.window.contains(theta, 1e-12) {
                found.push(CornerImage { corner: v, point: Point::from_raw(model, *c), t, words: vec![tile.word.clone()] });
            }
        }
        for s in 0..p.side_count() {
            if Some(s) == tile.entry {
                continue;
            }
            let (a, b) = p.side_corners(s);
            let (ia, ib) = (&imgs[a], &imgs[b]);
            if model.point_segment_dist(&zr, ia, ib) > l {
                continue;
            }
            let (Some(ta), Some(tb)) = (direction_angle(model, &zr, &frame, ia), direction_angle(model, &zr, &frame, ib))
            else {
                continue;
            };
            let delta = (tb - ta + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
            let sector = if delta >= 0.0 { Arc { start: ta, width: delta } } else { Arc { start: tb, width: -delta } };
            if let Some(window) = tile.window.intersect(&sector).filter(|w| w.width > 1e-12) {
                let mut word = tile.word.clone();
                word.push(s);
                queue.push_back(Tile { g: tile.g.compose_unchecked(p.side_reflection(s)), word, window, entry: Some(s) });
            }
        }
    }

    found.sort_by(|a, b| a.corner.cmp(&b.corner).then(a.t.total_cmp(&b.t)));
    let mut merged: Vec<CornerImage> = Vec::new();
    for img in found {
        let dup = merged.iter_mut().rev().take_while(|m| m.corner == img.corner && img.t - m.t <= 1e-9).find(|m| {
            model.dist(m.point.raw(), img.point.raw()) <= 1e-9
        });
        match dup {
            Some(m) => m.words.extend(img.words),
            None => merged.push(img),
        }
    }
    for m in &mut merged {
        m.words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        m.words.dedup();
    }
    merged.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.corner.cmp(&b.corner)));
    Ok(merged)
}

/// Corner images that are actually reached by a billiard orbit from `z`, as singular orbit records.
pub fn visible_corner_images(p: &Polygon, z: &Point, l: f64, max_tiles: usize) -> Result<Vec<SingularOrbitRecord>> {
    let model = p.model();
    let frame = model.frame(z.raw());
    let mut out = Vec::new();
    for img in corner_images_within(p, z, l, max_tiles)? {
        let dir = Direction::towards(*z, &img.point)?;
        let orbit = trace_ray(p, z, &dir, img.t + 1e-6, usize::MAX)?;
        if orbit.status != OrbitStatus::EndedAtCorner
            || orbit.end_corner() != Some(img.corner)
            || (orbit.length - img.t).abs() > 1e-9
            || !img.words.contains(&orbit.word)
        {
            continue;
        }
        let theta = direction_angle(model, z.raw(), &frame, img.point.raw()).unwrap_or(0.0);
        out.push(SingularOrbitRecord {
            corner: img.corner,
            length: img.t,
            steps: orbit.word.len() + 1,
            word: orbit.word,
            source: SourceDatum::Direction { theta },
            weight: 1.0,
        });
    }
    out.sort_by(|a, b| a.length.total_cmp(&b.length).then(a.corner.cmp(&b.corner)).then_with(|| a.word.cmp(&b.word)));
    Ok(out)
}
