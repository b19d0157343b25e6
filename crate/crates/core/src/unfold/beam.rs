//! Breadth-first beam splitting.
//!
//! A beam is an interval of rays sharing the same side word, carried by the isometry of the tile it
//! currently crosses. Processing a beam finds the corner images of that tile which are hit first by
//! some ray of the interval, cuts the interval there, and forwards every piece through the side it
//! leaves by.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle_from, Isometry, Model, Point, Vec3};
use crate::polygon::Polygon;

use super::DEFAULT_MAX_TILES;

/// Directions closer than this are one split point.
const ANGULAR_EPS: f64 = 1e-12;
/// Slack when comparing the arc parameter of a corner with the first boundary crossing.
const VISIBILITY_TOL: f64 = 1e-9;

/// A one-parameter family of geodesic rays.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BeamFamily {
    /// Rays from `base` with initial direction `cos(theta) e1 + sin(theta) e2`.
    Pencil { base: Vec3, e1: Vec3, e2: Vec3 },
    /// Euclidean lines `u n + t d` with `n` the left normal of the unit vector `d`.
    Parallel { d: Vec3, n: Vec3 },
}

impl BeamFamily {
    /// Pencil at `base` using the standard frame there.
    pub fn pencil(base: &Point) -> BeamFamily {
        let (e1, e2) = base.model().frame(base.raw());
        BeamFamily::Pencil { base: *base.raw(), e1, e2 }
    }

    /// Pencil at `base` whose zero direction is the given unit tangent.
    pub(crate) fn pencil_from(model: Model, base: Vec3, e1: Vec3) -> BeamFamily {
        BeamFamily::Pencil { base, e1, e2: model.second_axis(&base, &e1) }
    }

    /// Parallel euclidean rays with direction angle `theta`.
    pub fn parallel(theta: f64) -> BeamFamily {
        let (s, c) = theta.sin_cos();
        BeamFamily::Parallel { d: Vec3::new(c, s, 0.0), n: Vec3::new(-s, c, 0.0) }
    }

    #[inline]
    pub(crate) fn ray(&self, model: Model, param: f64) -> (Vec3, Vec3) {
        match self {
            BeamFamily::Pencil { base, e1, e2 } => {
                let (s, c) = param.sin_cos();
                (*base, model.tangent_normalize(base, e1 * c + e2 * s))
            }
            BeamFamily::Parallel { d, n } => (Vec3::new(param * n.x, param * n.y, 1.0), *d),
        }
    }

    fn is_periodic(&self) -> bool {
        matches!(self, BeamFamily::Pencil { .. })
    }

    /// Parameter of the ray through `x` together with the arc parameter at which it gets there.
    /// Spherical pencils reach every point twice per turn.
    fn locate(&self, model: Model, x: &Vec3) -> Option<[(f64, f64); 2]> {
        match self {
            BeamFamily::Pencil { base, e1, e2 } => {
                let t = model.dist(base, x);
                let dir = model.log_dir(base, x)?;
                let theta = model.inner(&dir, e2).atan2(model.inner(&dir, e1));
                if model == Model::Spherical {
                    Some([(theta, t), (theta + PI, TAU - t)])
                } else {
                    Some([(theta, t), (f64::NAN, f64::NAN)])
                }
            }
            BeamFamily::Parallel { d, n } => {
                Some([(x.x * n.x + x.y * n.y, x.x * d.x + x.y * d.y), (f64::NAN, f64::NAN)])
            }
        }
    }
}

/// Length and step limits for beam propagation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_length: Option<f64>,
    pub max_steps: Option<usize>,
}

impl Budget {
    pub fn length(l: f64) -> Budget {
        Budget { max_length: Some(l), max_steps: None }
    }

    pub fn steps(n: usize) -> Budget {
        Budget { max_length: None, max_steps: Some(n) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitOptions {
    pub max_tiles: usize,
    /// Keep every processed beam (needed for boundary curves).
    pub keep_history: bool,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions { max_tiles: DEFAULT_MAX_TILES, keep_history: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceDatum {
    /// Initial direction angle at the base point (for boundary base points, the angle to the side).
    Direction { theta: f64 },
    /// Transverse coordinate of a parallel ray.
    Transverse { u: f64 },
}

/// A singular orbit: an orbit from the base that ends at a corner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularOrbitRecord {
    pub corner: usize,
    /// Geodesic length from the base to the corner (for parallel rays, from the seed side).
    pub length: f64,
    /// Number of segments, one more than the number of bounces.
    pub steps: usize,
    pub word: Vec<usize>,
    pub source: SourceDatum,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl SingularOrbitRecord {
    pub fn param(&self) -> f64 {
        match self.source {
            SourceDatum::Direction { theta } => theta,
            SourceDatum::Transverse { u } => u,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Beam {
    pub(crate) lo: f64,
    pub(crate) hi: f64,
    pub(crate) tile: Isometry,
    pub(crate) entry_side: Option<usize>,
    pub(crate) exclude: [Option<usize>; 2],
    pub(crate) level: usize,
    pub(crate) word: Vec<usize>,
    pub(crate) t_entry_min: f64,
    pub(crate) t_entry_max: f64,
    pub(crate) t_ref: f64,
    /// The interval is a whole period of a pencil with its endpoints identified.
    pub(crate) circular: bool,
    /// Index of the seed beam this beam descends from.
    pub(crate) seed: usize,
}

impl Beam {
    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn tile(&self) -> &Isometry {
        &self.tile
    }

    pub fn entry_side(&self) -> Option<usize> {
        self.entry_side
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn word(&self) -> &[usize] {
        &self.word
    }

    pub fn entry_range(&self) -> (f64, f64) {
        (self.t_entry_min, self.t_entry_max)
    }

    pub fn is_circular(&self) -> bool {
        self.circular
    }

    pub fn seed(&self) -> usize {
        self.seed
    }

    pub(crate) fn seed_beam(lo: f64, hi: f64, model: Model, exclude: [Option<usize>; 2], circular: bool) -> Beam {
        Beam {
            lo,
            hi,
            tile: Isometry::identity(model),
            entry_side: None,
            exclude,
            level: 0,
            word: Vec::new(),
            t_entry_min: 0.0,
            t_entry_max: 0.0,
            t_ref: 0.0,
            circular,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SplitResult {
    pub family: BeamFamily,
    pub budget: Budget,
    /// Sorted by `(length, corner, word)`.
    pub records: Vec<SingularOrbitRecord>,
    /// Pieces whose rays all reach the length budget before leaving their current tile.
    pub live: Vec<Beam>,
    /// Beams retired by the step budget.
    pub dead: Vec<Beam>,
    /// Beams left in the queue when the tile cap was hit.
    pub unprocessed: Vec<Beam>,
    /// Every processed beam, when requested.
    pub history: Vec<Beam>,
    pub tiles: usize,
    pub complete: bool,
    pub max_tiles: usize,
}

impl SplitResult {
    pub fn require_complete(self) -> Result<SplitResult> {
        if self.complete {
            Ok(self)
        } else {
            Err(Error::BudgetExceeded { limit: self.max_tiles })
        }
    }

    /// Beams partitioning the seed intervals at the end of the computation.
    pub fn leaves(&self) -> impl Iterator<Item = &Beam> {
        self.live.iter().chain(self.dead.iter())
    }
}

/// Splits the full pencil of directions at an interior point `z` up to the budget.
pub fn split_beams(p: &Polygon, z: &Point, budget: Budget, options: SplitOptions) -> Result<SplitResult> {
    if z.model() != p.model() {
        return Err(Error::ModelMismatch { expected: p.model(), found: z.model() });
    }
    if p.distance_to_boundary(z) <= 1e-9 || !p.contains(z) {
        return Err(Error::InvalidBase("base point must lie strictly inside the table".into()));
    }
    let family = BeamFamily::pencil(z);
    let seed = Beam::seed_beam(0.0, TAU, p.model(), [None, None], true);
    run(p, family, vec![seed], budget, options)
}

struct Candidate {
    param: f64,
    t: f64,
    corner: usize,
}

struct Group {
    param: f64,
    members: Vec<Candidate>,
}

struct Piece {
    lo: f64,
    hi: f64,
    /// Index of the group at the lower end, if it is a cut rather than a beam end.
    left: Option<usize>,
    exit_side: usize,
    t_min: f64,
    t_max: f64,
    t_mid: f64,
}

struct Processed {
    records: Vec<SingularOrbitRecord>,
    live: Vec<Beam>,
    children: Vec<Beam>,
}

struct Engine<'a> {
    poly: &'a Polygon,
    model: Model,
    family: BeamFamily,
    max_length: f64,
    /// Entry side of every seed; parallel record lengths are measured from it.
    seed_sides: Vec<Option<usize>>,
}

/// Runs the beam queue level by level. Output does not depend on the number of workers.
pub(crate) fn run(
    p: &Polygon,
    family: BeamFamily,
    mut seeds: Vec<Beam>,
    budget: Budget,
    options: SplitOptions,
) -> Result<SplitResult> {
    for (i, s) in seeds.iter_mut().enumerate() {
        s.seed = i;
    }
    let engine = Engine {
        poly: p,
        model: p.model(),
        family,
        max_length: budget.max_length.unwrap_or(f64::INFINITY),
        seed_sides: seeds.iter().map(|s| s.entry_side).collect(),
    };
    let max_steps = budget.max_steps.unwrap_or(usize::MAX);
    let mut result = SplitResult {
        family,
        budget,
        records: Vec::new(),
        live: Vec::new(),
        dead: Vec::new(),
        unprocessed: Vec::new(),
        history: Vec::new(),
        tiles: 0,
        complete: true,
        max_tiles: options.max_tiles,
    };
    let mut current: Vec<Beam> = Vec::new();
    for s in seeds {
        if max_steps == 0 {
            result.dead.push(s);
        } else {
            current.push(s);
        }
    }
    while !current.is_empty() {
        let allowed = options.max_tiles.saturating_sub(result.tiles);
        if current.len() > allowed {
            result.unprocessed = current.split_off(allowed);
            result.complete = false;
        }
        let outputs: Vec<Result<Processed>> = current.par_iter().map(|b| engine.process(b)).collect();
        result.tiles += current.len();
        let mut next = Vec::new();
        for out in outputs {
            let out = out?;
            result.records.extend(out.records);
            result.live.extend(out.live);
            for child in out.children {
                if child.level >= max_steps {
                    result.dead.push(child);
                } else {
                    next.push(child);
                }
            }
        }
        if options.keep_history {
            result.history.append(&mut current);
        }
        if !result.complete {
            break;
        }
        current = next;
    }
    if !result.complete {
        log::warn!("beam cap of {} tiles reached; results are partial", options.max_tiles);
    }
    result.records.sort_by(|a, b| {
        a.length
            .total_cmp(&b.length)
            .then(a.corner.cmp(&b.corner))
            .then_with(|| a.word.cmp(&b.word))
    });
    Ok(result)
}

impl Engine<'_> {
    #[inline]
    fn shift(&self, param: f64, lo: f64) -> f64 {
        if self.family.is_periodic() {
            wrap_angle_from(param, lo)
        } else {
            param
        }
    }

    /// Smallest spherical representative of `t` not below `floor`.
    #[inline]
    fn rep_from(&self, t: f64, floor: f64) -> f64 {
        if self.model == Model::Spherical {
            t + TAU * ((floor - t) / TAU).ceil()
        } else {
            t
        }
    }

    fn entry_t(&self, beam: &Beam, imgs: &[Vec3], o: &Vec3, d: &Vec3) -> f64 {
        let side = match (beam.level, self.family, beam.entry_side) {
            (0, BeamFamily::Pencil { .. }, _) | (_, _, None) => return 0.0,
            (_, _, Some(s)) => s,
        };
        let (a, b) = self.poly.side_corners(side);
        let mut best = beam.t_ref;
        let mut best_gap = f64::INFINITY;
        for t in self.model.ray_meets_line(o, d, &imgs[a], &imgs[b]) {
            let t = if self.model == Model::Spherical {
                t + TAU * ((beam.t_ref - t) / TAU).round()
            } else {
                t
            };
            if (t - beam.t_ref).abs() < best_gap {
                best_gap = (t - beam.t_ref).abs();
                best = t;
            }
        }
        best
    }

    /// Arc parameter at which a parallel ray crosses the side its seed started on.
    fn origin_t(&self, beam: &Beam, param: f64) -> f64 {
        let (BeamFamily::Parallel { .. }, Some(side)) = (self.family, self.seed_sides[beam.seed]) else {
            return 0.0;
        };
        let (o, d) = self.family.ray(self.model, param);
        let (a, b) = self.poly.side_corners(side);
        self.model.ray_meets_line(&o, &d, self.poly.corner_raw(a), self.poly.corner_raw(b)).first().copied().unwrap_or(0.0)
    }

    /// First side (other than the excluded ones) crossed after `t_in`.
    fn first_exit(&self, beam: &Beam, imgs: &[Vec3], o: &Vec3, d: &Vec3, t_in: f64) -> Option<(f64, usize)> {
        let floor = t_in + 1e-12 * t_in.abs().max(1.0);
        let mut best: Option<(f64, usize)> = None;
        for s in 0..self.poly.side_count() {
            if beam.exclude.contains(&Some(s)) {
                continue;
            }
            let (a, b) = self.poly.side_corners(s);
            if let Some(t) = self.model.ray_meets_segment(o, d, &imgs[a], &imgs[b]) {
                let t = self.rep_from(t, floor);
                if t > floor && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, s));
                }
            }
        }
        best
    }

    fn line_t_after(&self, imgs: &[Vec3], side: usize, o: &Vec3, d: &Vec3, t_in: f64) -> Option<f64> {
        let (a, b) = self.poly.side_corners(side);
        let floor = t_in - 1e-9 * t_in.abs().max(1.0);
        self.model
            .ray_meets_line(o, d, &imgs[a], &imgs[b])
            .into_iter()
            .map(|t| self.rep_from(t, floor))
            .filter(|&t| t >= floor)
            .min_by(f64::total_cmp)
    }

    fn process(&self, beam: &Beam) -> Result<Processed> {
        let m = self.model;
        let g = beam.tile.raw();
        let imgs: Vec<Vec3> = (0..self.poly.corner_count()).map(|v| m.normalize_point(g * self.poly.corner_raw(v))).collect();

        let mut cands = Vec::new();
        for (v, img) in imgs.iter().enumerate() {
            if let BeamFamily::Pencil { base, .. } = self.family {
                let d = m.dist(&base, img);
                if m == Model::Spherical && !(1e-9..=PI - 1e-9).contains(&d) {
                    return Err(Error::ExceptionalBasepoint { corner: v });
                }
                if d < 1e-12 {
                    continue;
                }
            }
            let Some(locs) = self.family.locate(m, img) else { continue };
            for (param, t_raw) in locs {
                if param.is_nan() {
                    continue;
                }
                let param = self.shift(param, beam.lo);
                let inside = if beam.circular {
                    true
                } else {
                    param > beam.lo + ANGULAR_EPS && param < beam.hi - ANGULAR_EPS
                };
                if !inside {
                    continue;
                }
                let (o, d) = self.family.ray(m, param);
                let t_in = self.entry_t(beam, &imgs, &o, &d);
                let eps = 1e-12 * t_in.abs().max(1.0);
                let t = self.rep_from(t_raw, t_in - eps);
                if t <= t_in + eps {
                    continue;
                }
                if let Some((tf, _)) = self.first_exit(beam, &imgs, &o, &d, t_in) {
                    if tf < t - VISIBILITY_TOL * t.max(1.0) {
                        continue;
                    }
                }
                cands.push(Candidate { param, t, corner: v });
            }
        }
        cands.sort_by(|a, b| a.param.total_cmp(&b.param).then(a.t.total_cmp(&b.t)));
        let mut groups: Vec<Group> = Vec::new();
        for c in cands {
            match groups.last_mut() {
                Some(gr) if c.param - gr.param <= ANGULAR_EPS => gr.members.push(c),
                _ => groups.push(Group { param: c.param, members: vec![c] }),
            }
        }

        let mut records = Vec::new();
        for gr in &groups {
            for c in &gr.members {
                if c.t <= self.max_length {
                    records.push(SingularOrbitRecord {
                        corner: c.corner,
                        length: c.t - self.origin_t(beam, c.param),
                        steps: beam.level + 1,
                        word: beam.word.clone(),
                        source: match self.family {
                            BeamFamily::Pencil { .. } => SourceDatum::Direction { theta: c.param.rem_euclid(TAU) },
                            BeamFamily::Parallel { .. } => SourceDatum::Transverse { u: c.param },
                        },
                        weight: 1.0,
                    });
                }
            }
        }
        let is_event = |gi: usize| groups[gi].members.iter().any(|c| c.t <= self.max_length);

        // Piece boundaries.
        let mut spans: Vec<(f64, f64, Option<usize>)> = Vec::new();
        let whole_circle = beam.circular && groups.is_empty();
        if beam.circular {
            if groups.is_empty() {
                spans.push((beam.lo, beam.lo + TAU, None));
            } else {
                let k = groups.len();
                for i in 0..k {
                    let hi = if i + 1 < k { groups[i + 1].param } else { groups[0].param + TAU };
                    spans.push((groups[i].param, hi, Some(i)));
                }
            }
        } else {
            let mut lo = beam.lo;
            let mut left = None;
            for (i, gr) in groups.iter().enumerate() {
                spans.push((lo, gr.param, left));
                lo = gr.param;
                left = Some(i);
            }
            spans.push((lo, beam.hi, left));
        }

        let mut pieces = Vec::with_capacity(spans.len());
        for (lo, hi, left) in spans {
            pieces.push(self.piece(beam, &imgs, lo, hi, left)?);
        }

        let mut live = Vec::new();
        let mut children = Vec::new();
        let mut run: Option<(f64, f64)> = None;
        let mut runs: Vec<(f64, f64)> = Vec::new();
        for pc in &pieces {
            let terminal = pc.t_min > self.max_length;
            if terminal {
                let continues = matches!((run, pc.left), (Some(_), Some(gi)) if !is_event(gi));
                if continues {
                    run.as_mut().unwrap().1 = pc.hi;
                } else {
                    if let Some((a, b)) = run.take() {
                        runs.push((a, b));
                    }
                    run = Some((pc.lo, pc.hi));
                }
            } else {
                if let Some((a, b)) = run.take() {
                    runs.push((a, b));
                }
                let mut word = beam.word.clone();
                word.push(pc.exit_side);
                children.push(Beam {
                    lo: pc.lo,
                    hi: pc.hi,
                    tile: beam.tile.compose_unchecked(self.poly.side_reflection(pc.exit_side)),
                    entry_side: Some(pc.exit_side),
                    exclude: [Some(pc.exit_side), None],
                    level: beam.level + 1,
                    word,
                    t_entry_min: pc.t_min,
                    t_entry_max: pc.t_max,
                    t_ref: pc.t_mid,
                    circular: whole_circle,
                    seed: beam.seed,
                });
            }
        }
        if let Some((a, b)) = run.take() {
            runs.push((a, b));
        }
        // On a full circle the first and last pieces meet across the first cut.
        if beam.circular && runs.len() > 1 && !groups.is_empty() && !is_event(0) {
            let first_terminal = pieces.first().is_some_and(|p| p.t_min > self.max_length);
            let last_terminal = pieces.last().is_some_and(|p| p.t_min > self.max_length);
            if first_terminal && last_terminal {
                let first = runs.remove(0);
                let last = runs.last_mut().unwrap();
                last.1 = first.1 + TAU;
            }
        }
        let all_terminal = pieces.iter().all(|p| p.t_min > self.max_length);
        let no_events = (0..groups.len()).all(|gi| !is_event(gi));
        for (a, b) in runs {
            live.push(Beam {
                lo: a,
                hi: b,
                circular: beam.circular && all_terminal && no_events,
                ..beam.clone()
            });
        }
        Ok(Processed { records, live, children })
    }

    fn piece(&self, beam: &Beam, imgs: &[Vec3], lo: f64, hi: f64, left: Option<usize>) -> Result<Piece> {
        let m = self.model;
        let mut exit = None;
        for frac in [0.5, 0.3, 0.7, 0.17, 0.83, 0.41] {
            let param = lo + frac * (hi - lo);
            let (o, d) = self.family.ray(m, param);
            let t_in = self.entry_t(beam, imgs, &o, &d);
            if let Some((t, side)) = self.first_exit(beam, imgs, &o, &d, t_in) {
                let (hit, _) = m.exp(&o, &d, t);
                let (a, b) = self.poly.side_corners(side);
                let near_corner = m.dist(&hit, &imgs[a]) < 1e-9 || m.dist(&hit, &imgs[b]) < 1e-9;
                if !near_corner || frac == 0.41 {
                    exit = Some((side, t));
                    break;
                }
            }
        }
        let (exit_side, t_mid) =
            exit.ok_or_else(|| Error::Integrity(format!("rays in [{lo}, {hi}] do not leave their tile")))?;

        let mut samples = vec![lo, hi, 0.5 * (lo + hi)];
        if let BeamFamily::Pencil { base, e1, e2 } = self.family {
            let (a, b) = self.poly.side_corners(exit_side);
            if let Some(foot) = m.foot_on_line(&base, &imgs[a], &imgs[b]) {
                if let Some(dir) = m.log_dir(&base, &foot) {
                    let theta = m.inner(&dir, &e2).atan2(m.inner(&dir, &e1));
                    let critical: &[f64] = if m == Model::Spherical { &[theta, theta + PI] } else { &[theta] };
                    for &th in critical {
                        let th = wrap_angle_from(th, lo);
                        if th > lo && th < hi {
                            samples.push(th);
                        }
                    }
                }
            }
        }
        let mut t_min = f64::INFINITY;
        let mut t_max = f64::NEG_INFINITY;
        for param in samples {
            let (o, d) = self.family.ray(m, param);
            let t_in = self.entry_t(beam, imgs, &o, &d);
            if let Some(t) = self.line_t_after(imgs, exit_side, &o, &d, t_in) {
                t_min = t_min.min(t);
                t_max = t_max.max(t);
            }
        }
        if !t_min.is_finite() {
            t_min = t_mid;
            t_max = t_mid;
        }
        t_min = t_min.min(t_mid);
        t_max = t_max.max(t_mid);
        Ok(Piece { lo, hi, left, exit_side, t_min, t_max, t_mid })
    }
}
