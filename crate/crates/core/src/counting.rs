//! Counting functions for singular orbits.
//!
//! Three bases are supported: an interior point with a length budget (billiard flow), a direction
//! with a step budget (billiard map, plane only) and a boundary point with a step budget (billiard
//! map, plane only). Every counting function is a [`CountingSeries`], a list of singular orbit
//! records read as a right-continuous step function of the budget.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Model, Point};
use crate::polygon::{BoundaryPoint, Polygon};
use crate::unfold::{run, split_beams, Beam, BeamFamily, Budget, SingularOrbitRecord, SplitOptions, SplitResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    /// Geodesic length of the singular orbit.
    Length,
    /// Number of segments of the singular orbit.
    Steps,
}

/// Singular orbit records sorted by abscissa, evaluated as a nondecreasing step function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingSeries {
    pub abscissa: Abscissa,
    /// Length or step budget the records were computed for.
    pub budget: f64,
    pub corner_count: usize,
    pub records: Vec<SingularOrbitRecord>,
    /// False when the tile cap stopped the computation early.
    pub complete: bool,
}

impl CountingSeries {
    pub fn new(
        abscissa: Abscissa,
        budget: f64,
        corner_count: usize,
        mut records: Vec<SingularOrbitRecord>,
        complete: bool,
    ) -> CountingSeries {
        let key = |r: &SingularOrbitRecord| match abscissa {
            Abscissa::Length => r.length,
            Abscissa::Steps => r.steps as f64,
        };
        records.sort_by(|a, b| {
            key(a)
                .total_cmp(&key(b))
                .then(a.length.total_cmp(&b.length))
                .then(a.corner.cmp(&b.corner))
                .then_with(|| a.word.cmp(&b.word))
        });
        CountingSeries { abscissa, budget, corner_count, records, complete }
    }

    pub fn abscissa_of(&self, r: &SingularOrbitRecord) -> f64 {
        match self.abscissa {
            Abscissa::Length => r.length,
            Abscissa::Steps => r.steps as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Event abscissae in order, with repetitions.
    pub fn events(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| self.abscissa_of(r))
    }

    /// Distinct event abscissae.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.events().collect();
        out.dedup();
        out
    }

    /// Number of records with abscissa at most `x`.
    pub fn count(&self, x: f64) -> usize {
        self.records.partition_point(|r| self.abscissa_of(r) <= x)
    }

    /// Number of records at corner `v` with abscissa at most `x`.
    pub fn count_corner(&self, x: f64, v: usize) -> usize {
        self.records[..self.count(x)].iter().filter(|r| r.corner == v).count()
    }

    /// Sum of record weights with abscissa at most `x`.
    pub fn weighted(&self, x: f64) -> f64 {
        self.records[..self.count(x)].iter().map(|r| r.weight).sum()
    }

    /// Records ending at corner `v`.
    pub fn for_corner(&self, v: usize) -> CountingSeries {
        let records = self.records.iter().filter(|r| r.corner == v).cloned().collect();
        CountingSeries { records, ..self.clone_empty() }
    }

    /// Records ending at one of the given corners.
    pub fn for_corners(&self, corners: &[usize]) -> CountingSeries {
        let records = self.records.iter().filter(|r| corners.contains(&r.corner)).cloned().collect();
        CountingSeries { records, ..self.clone_empty() }
    }

    /// Same series with every weight replaced by `w(abscissa, record)`.
    pub fn reweighted(&self, w: impl Fn(f64, &SingularOrbitRecord) -> f64) -> CountingSeries {
        let records = self
            .records
            .iter()
            .map(|r| SingularOrbitRecord { weight: w(self.abscissa_of(r), r), ..r.clone() })
            .collect();
        CountingSeries { records, ..self.clone_empty() }
    }

    fn clone_empty(&self) -> CountingSeries {
        CountingSeries {
            abscissa: self.abscissa,
            budget: self.budget,
            corner_count: self.corner_count,
            records: Vec::new(),
            complete: self.complete,
        }
    }

    /// Writes `abscissa,corner,cumulative_count,cumulative_weight`, one line per record.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "abscissa,corner,cumulative_count,cumulative_weight")?;
        let mut weight = 0.0;
        for (i, r) in self.records.iter().enumerate() {
            weight += r.weight;
            writeln!(w, "{},{},{},{}", self.abscissa_of(r), r.corner, i + 1, weight)?;
        }
        Ok(())
    }
}

/// `Σ w(abscissa, record)` over all records of the series.
pub fn weighted_count(series: &CountingSeries, w: impl Fn(f64, &SingularOrbitRecord) -> f64) -> f64 {
    series.records.iter().map(|r| w(series.abscissa_of(r), r)).sum()
}

/// Flow counting function `gc_z(l)` for `l ≤ max_length`, with the underlying beam splitting.
pub fn position_counting_flow_beams(
    p: &Polygon,
    z: &Point,
    max_length: f64,
    options: SplitOptions,
) -> Result<(CountingSeries, SplitResult)> {
    if !(max_length > 0.0) {
        return Err(Error::Domain(format!("length budget must be positive, got {max_length}")));
    }
    let result = split_beams(p, z, Budget::length(max_length), options)?;
    let series =
        CountingSeries::new(Abscissa::Length, max_length, p.corner_count(), result.records.clone(), result.complete);
    Ok((series, result))
}

/// Flow counting function `gc_z(l)` for `l ≤ max_length`.
pub fn position_counting_flow(p: &Polygon, z: &Point, max_length: f64, options: SplitOptions) -> Result<CountingSeries> {
    Ok(position_counting_flow_beams(p, z, max_length, options)?.0)
}

/// Seeds of the parallel family in direction `theta`: one beam per side the direction enters the
/// table through.
pub(crate) fn direction_seeds(p: &Polygon, theta: f64) -> Result<(BeamFamily, Vec<Beam>)> {
    if p.model() != Model::Euclidean {
        return Err(Error::Domain("direction counting is only defined for planar polygons".into()));
    }
    let family = BeamFamily::parallel(theta);
    let BeamFamily::Parallel { d, n } = family else { unreachable!() };
    let mut seeds = Vec::new();
    for s in 0..p.side_count() {
        let (a, b) = p.side_corners(s);
        let (pa, pb) = (p.corner_raw(a), p.corner_raw(b));
        let len = p.side_length(s);
        let tangent = (pb - pa) / len;
        let inward = d.x * -tangent.y + d.y * tangent.x;
        if inward.abs() < 1e-12 {
            return Err(Error::ExceptionalDirection { side: s });
        }
        if inward < 0.0 {
            continue;
        }
        let (ua, ub) = (pa.x * n.x + pa.y * n.y, pb.x * n.x + pb.y * n.y);
        let mut seed = Beam::seed_beam(ua.min(ub), ua.max(ub), Model::Euclidean, [Some(s), None], false);
        seed.entry_side = Some(s);
        seeds.push(seed);
    }
    Ok((family, seeds))
}

/// Map counting function `gd_θ(n)` for `n ≤ max_steps`, with the underlying beam splitting.
pub fn direction_counting_map_beams(
    p: &Polygon,
    theta: f64,
    max_steps: usize,
    options: SplitOptions,
) -> Result<(CountingSeries, SplitResult)> {
    let (family, seeds) = direction_seeds(p, theta)?;
    let result = run(p, family, seeds, Budget::steps(max_steps), options)?;
    let series =
        CountingSeries::new(Abscissa::Steps, max_steps as f64, p.corner_count(), result.records.clone(), result.complete);
    Ok((series, result))
}

/// Map counting function `gd_θ(n)` for `n ≤ max_steps`: phase points on the boundary with
/// outgoing direction `theta` whose orbit first meets a corner within `n` segments.
pub fn direction_counting_map(p: &Polygon, theta: f64, max_steps: usize, options: SplitOptions) -> Result<CountingSeries> {
    Ok(direction_counting_map_beams(p, theta, max_steps, options)?.0)
}

/// Boundary counting functions `gd_s(n)` (unit weights) and `god_s(n)` (weight `sin α`) for
/// `n ≤ max_steps`. Record angles are measured from the side tangent at `s`.
pub fn position_counting_map(
    p: &Polygon,
    s: &BoundaryPoint,
    max_steps: usize,
    options: SplitOptions,
) -> Result<(CountingSeries, CountingSeries)> {
    if p.model() != Model::Euclidean {
        return Err(Error::Domain("boundary counting is only available on the plane".into()));
    }
    if s.side >= p.side_count() {
        return Err(Error::InvalidBase(format!("side {} does not exist", s.side)));
    }
    if s.s <= 1e-9 || s.s >= p.side_length(s.side) - 1e-9 {
        return Err(Error::InvalidBase("boundary base point is a corner".into()));
    }
    let n = p.corner_count();
    if max_steps == 0 {
        let empty = CountingSeries::new(Abscissa::Steps, 0.0, n, Vec::new(), true);
        return Ok((empty.clone(), empty));
    }
    let tangent = p.side_tangent(s);
    let base = *p.point_on_boundary(s).raw();
    let family = BeamFamily::pencil_from(p.model(), base, *tangent.raw());
    let seed = Beam::seed_beam(0.0, PI, p.model(), [Some(s.side), None], false);
    let result = run(p, family, vec![seed], Budget::steps(max_steps), options)?;
    let pure = CountingSeries::new(Abscissa::Steps, max_steps as f64, n, result.records, result.complete);
    let optical = pure.reweighted(|_, r| r.param().sin());
    Ok((pure, optical))
}

/// Total length of a polyline.
pub fn curve_length(polyline: &[Point]) -> Result<f64> {
    if polyline.len() < 2 {
        return Err(Error::Domain("a polyline needs at least two points".into()));
    }
    polyline.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Optical length `∫ r |dφ|` of a planar polyline seen from `z`.
pub fn optical_length(polyline: &[Point], z: &Point) -> Result<f64> {
    if polyline.len() < 2 {
        return Err(Error::Domain("a polyline needs at least two points".into()));
    }
    if polyline.iter().chain(std::iter::once(z)).any(|q| q.model() != Model::Euclidean) {
        return Err(Error::Domain("optical length is only available on the plane".into()));
    }
    let [zx, zy, _] = z.coords();
    let mut total = 0.0;
    for w in polyline.windows(2) {
        let [ax, ay, _] = w[0].coords();
        let [bx, by, _] = w[1].coords();
        let (dx, dy) = (bx - ax, by - ay);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = (dx / len, dy / len);
        // Signed positions of the endpoints along the line, measured from the foot of `z`.
        let s1 = (ax - zx) * ux + (ay - zy) * uy;
        let s2 = s1 + len;
        let dist = ((ax - zx) * -uy + (ay - zy) * ux).abs();
        if dist <= 1e-12 {
            if s1 <= 1e-12 && s2 >= -1e-12 {
                return Err(Error::DegenerateView);
            }
            continue;
        }
        total += dist * ((s2 / dist).asinh() - (s1 / dist).asinh()).abs();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::{validate_polygon, PolygonSpec};
    use approx::assert_abs_diff_eq;

    fn square() -> Polygon {
        validate_polygon(&PolygonSpec {
            model: Model::Euclidean,
            loops: vec![vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]],
        })
        .unwrap()
    }

    #[test]
    fn square_center_flow_counts() {
        let g = position_counting_flow(&square(), &Point::euclidean(0.5, 0.5), 0.8, SplitOptions::default()).unwrap();
        assert_eq!(g.count(0.4), 0);
        assert_eq!(g.count(0.8), 4);
        assert_eq!(g.count(0.0), 0);
        assert_abs_diff_eq!(weighted_count(&g, |t, _| t), 4.0 * 0.5f64.sqrt(), epsilon = 1e-12);
        assert_eq!(weighted_count(&g, |_, _| 1.0), 4.0);
        assert_eq!(weighted_count(&g, |t, _| if t <= 0.4 { 1.0 } else { 0.0 }), 0.0);
        for v in 0..4 {
            assert_eq!(g.count_corner(0.8, v), 1);
        }
    }

    #[test]
    fn direction_thirty_degrees_first_step() {
        let g = direction_counting_map(&square(), PI / 6.0, 1, SplitOptions::default()).unwrap();
        assert_eq!(g.count(1.0), 1);
        assert_eq!(g.records[0].corner, 2);
        assert_abs_diff_eq!(g.records[0].length, 1.0 / (PI / 6.0).cos(), epsilon = 1e-12);
    }

    #[test]
    fn direction_parallel_to_side_is_exceptional() {
        let err = direction_counting_map(&square(), 0.0, 3, SplitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ExceptionalDirection { .. }));
    }

    #[test]
    fn boundary_midpoint_first_step() {
        let sq = square();
        let s = sq.boundary_point_on_side(0, 0.5).unwrap();
        let (pure, optical) = position_counting_map(&sq, &s, 1, SplitOptions::default()).unwrap();
        assert_eq!(pure.count(1.0), 2);
        let mut corners: Vec<usize> = pure.records.iter().map(|r| r.corner).collect();
        corners.sort();
        assert_eq!(corners, vec![2, 3]);
        assert_abs_diff_eq!(optical.weighted(1.0), 2.0 * 2f64.atan().sin(), epsilon = 1e-12);
        let (pure0, optical0) = position_counting_map(&sq, &s, 0, SplitOptions::default()).unwrap();
        assert!(pure0.is_empty() && optical0.is_empty());
    }

    #[test]
    fn boundary_corner_is_rejected() {
        let sq = square();
        let s = sq.boundary_point_on_side(1, 0.0).unwrap();
        assert!(matches!(position_counting_map(&sq, &s, 2, SplitOptions::default()), Err(Error::InvalidBase(_))));
    }

    #[test]
    fn optical_length_of_a_facing_segment() {
        let seg = [Point::euclidean(1.0, -0.5), Point::euclidean(1.0, 0.5)];
        let z = Point::euclidean(0.0, 0.0);
        // ∫ sec φ dφ over [-atan 1/2, atan 1/2], by Simpson's rule.
        let h = 0.5f64.atan();
        let m = 20_000;
        let f = |phi: f64| 1.0 / phi.cos();
        let step = 2.0 * h / m as f64;
        let mut quad = f(-h) + f(h);
        for i in 1..m {
            quad += f(-h + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        quad *= step / 3.0;
        assert_abs_diff_eq!(optical_length(&seg, &z).unwrap(), quad, epsilon = 1e-9);
        assert_abs_diff_eq!(curve_length(&seg).unwrap(), 1.0);
    }

    #[test]
    fn radial_segment_has_zero_optical_length() {
        let seg = [Point::euclidean(1.0, 1.0), Point::euclidean(2.0, 2.0)];
        assert_eq!(optical_length(&seg, &Point::euclidean(0.0, 0.0)).unwrap(), 0.0);
        let on = [Point::euclidean(-1.0, 0.0), Point::euclidean(1.0, 0.0)];
        assert!(matches!(optical_length(&on, &Point::euclidean(0.0, 0.0)), Err(Error::DegenerateView)));
    }

    #[test]
    fn csv_has_cumulative_columns() {
        let g = position_counting_flow(&square(), &Point::euclidean(0.5, 0.5), 0.8, SplitOptions::default()).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[4].ends_with(",4,4"));
    }
}
