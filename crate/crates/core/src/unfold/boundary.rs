//! Outer boundary curves seen from a corner.

use crate::error::{Error, Result};
use crate::geom::{Model, Point};
use crate::polygon::Polygon;

use super::beam::{run, Beam, BeamFamily, Budget, SplitOptions};

pub type Polyline = Vec<Point>;

/// `∂_v(P; k)` for `k = 1..=n`: the unfolded boundary pieces reached by `k`-segment orbits leaving
/// corner `v`, as polylines ordered by angle. Entry `k - 1` of the result holds the curve for `k`.
pub fn outer_boundary_curves(p: &Polygon, v: usize, n: usize, options: SplitOptions) -> Result<Vec<Vec<Polyline>>> {
    if p.model() != Model::Euclidean {
        return Err(Error::Domain("outer boundary curves are only available on the plane".into()));
    }
    if v >= p.corner_count() {
        return Err(Error::InvalidBase(format!("corner {v} does not exist")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let model = p.model();
    let base = *p.corner_raw(v);
    let family = BeamFamily::pencil_from(model, base, *p.side_dir_raw(v));
    let seed = Beam::seed_beam(0.0, p.angle(v), model, [Some(v), Some(p.prev(v))], false);
    let result = run(p, family, vec![seed], Budget::steps(n), SplitOptions { keep_history: true, ..options })?
        .require_complete()?;

    let mut per_level: Vec<Vec<&Beam>> = vec![Vec::new(); n];
    for b in result.history.iter().chain(result.dead.iter()) {
        if b.level >= 1 && b.level <= n {
            per_level[b.level - 1].push(b);
        }
    }
    let mut curves = Vec::with_capacity(n);
    for mut beams in per_level {
        beams.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut polylines: Vec<Polyline> = Vec::new();
        for b in beams {
            let side = b.entry_side.expect("beams past the first level have an entry side");
            let (sa, sb) = p.side_corners(side);
            let a = b.tile.map_raw(p.corner_raw(sa));
            let c = b.tile.map_raw(p.corner_raw(sb));
            let ends: Vec<Point> = [b.lo, b.hi]
                .iter()
                .map(|&param| {
                    let (o, d) = family.ray(model, param);
                    let t = model.ray_meets_line(&o, &d, &a, &c).first().copied().unwrap_or(0.0);
                    Point::from_raw(model, model.exp(&o, &d, t).0)
                })
                .collect();
            match polylines.last_mut() {
                Some(pl) if model.dist(pl.last().unwrap().raw(), ends[0].raw()) < 1e-12 => pl.push(ends[1]),
                _ => polylines.push(ends),
            }
        }
        curves.push(polylines);
    }
    Ok(curves)
}

/// `∂_v(P; k)` for a single `k`.
pub fn outer_boundary_curve(p: &Polygon, v: usize, k: usize, options: SplitOptions) -> Result<Vec<Polyline>> {
    if k == 0 {
        return Err(Error::Domain("the step count must be at least 1".into()));
    }
    Ok(outer_boundary_curves(p, v, k, options)?.pop().unwrap_or_default())
}
