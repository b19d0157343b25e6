//! Closed-form averages of the counting functions and their Monte Carlo estimates.
//!
//! Sampling uses `ChaCha8Rng` seeded with `seed_from_u64(seed)`; sample `i` draws from stream `i`,
//! so every estimate is bit-identical for a fixed seed and sample count regardless of the number of
//! worker threads.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{direction_complexity_map, position_complexity_flow};
use crate::counting::{curve_length, direction_counting_map, optical_length, position_counting_flow, position_counting_map};
use crate::error::{Error, Result};
use crate::geom::{lorentz, Model, Point, Vec3};
use crate::polygon::{BoundaryPoint, Polygon};
use crate::unfold::{outer_boundary_curves, SplitOptions};

/// Draws per sample before a run of exceptional parameters is treated as an error.
const MAX_ATTEMPTS: usize = 1000;

/// `ζ(x) = 1 - cos x - 2x/π` on `[0, π]`.
pub fn zeta(x: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&x) {
        return Err(Error::Domain(format!("zeta is defined on [0, pi], got {x}")));
    }
    Ok(1.0 - x.cos() - 2.0 * x / PI)
}

/// `(2/π) l + ζ(l mod π)`, the integral of `|sin t|` over `[0, l]`.
pub fn spherical_density_integral(l: f64) -> Result<f64> {
    if l < 0.0 {
        return Err(Error::Domain(format!("length must be nonnegative, got {l}")));
    }
    let r = (l - PI * (l / PI).floor()).clamp(0.0, PI);
    Ok(2.0 / PI * l + zeta(r)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageKind {
    /// `∫ gd_θ(n) dθ` over all directions; planar polygons only.
    DirectionMap,
    /// `∫ gc_z(l) dz` over the table.
    PositionFlow,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormAverage {
    pub model: Model,
    pub kind: AverageKind,
    pub arg: f64,
    pub kappa: i64,
    pub area: f64,
    pub angle_sum: f64,
    /// The integral over the parameter space.
    pub total: f64,
    /// The integral divided by `2π` (directions) or by the area (positions).
    pub normalized: f64,
    /// On the hyperbolic plane, the same integral with `cosh l` in place of `cosh l - 1`.
    pub printed_total: Option<f64>,
    pub printed_normalized: Option<f64>,
}

pub fn closed_form_average(p: &Polygon, kind: AverageKind, arg: f64) -> Result<ClosedFormAverage> {
    if !(arg >= 0.0) {
        return Err(Error::Domain(format!("budget must be nonnegative, got {arg}")));
    }
    let model = p.model();
    let kappa = p.kappa();
    let k = kappa as f64;
    let area = p.area();
    let angle_sum: f64 = p.angles().iter().sum();
    let mut printed = None;
    let (total, norm) = match (kind, model) {
        (AverageKind::DirectionMap, Model::Euclidean) => (PI * k * arg, TAU),
        (AverageKind::DirectionMap, _) => {
            return Err(Error::Domain("direction averages are only defined for planar polygons".into()))
        }
        (AverageKind::PositionFlow, Model::Euclidean) => (PI * k * arg * arg / 2.0, area),
        (AverageKind::PositionFlow, Model::Spherical) => ((k * PI + area) * spherical_density_integral(arg)?, area),
        (AverageKind::PositionFlow, Model::Hyperbolic) => {
            printed = Some((k * PI - area) * arg.cosh());
            ((k * PI - area) * (arg.cosh() - 1.0), area)
        }
    };
    Ok(ClosedFormAverage {
        model,
        kind,
        arg,
        kappa,
        area,
        angle_sum,
        total,
        normalized: total / norm,
        printed_total: printed,
        printed_normalized: printed.map(|x| x / norm),
    })
}

/// Monte Carlo estimate of the mean of a function of a random parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub samples: usize,
    pub seed: u64,
    pub mean: f64,
    /// Sample standard deviation over `√samples`.
    pub std_error: f64,
    pub values: Vec<f64>,
    /// Sampled parameter per value: a direction angle, point coordinates or boundary arclength.
    pub parameters: Vec<Vec<f64>>,
    /// Parameters that were redrawn because they were exceptional.
    pub exceptional: usize,
}

impl MCEstimate {
    pub fn from_values(seed: u64, values: Vec<f64>, parameters: Vec<Vec<f64>>, exceptional: usize) -> MCEstimate {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        MCEstimate { samples: n, seed, mean, std_error: (var / n as f64).sqrt(), values, parameters, exceptional }
    }

    /// `(mean - target) / std_error`; zero when both sides agree exactly.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    /// Writes `index,parameter,value` with the parameter components separated by spaces.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,parameter,value")?;
        for (i, (v, p)) in self.values.iter().zip(&self.parameters).enumerate() {
            let p: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{i},{},{v}", p.join(" "))?;
        }
        Ok(())
    }
}

/// Random number generator for sample `index`.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Uniform samples of the table with respect to the riemannian area, by rejection from a box, a
/// spherical cap or a hyperbolic disk around the corners.
pub struct AreaSampler<'a> {
    poly: &'a Polygon,
    region: Region,
}

enum Region {
    Box { x0: f64, x1: f64, y0: f64, y1: f64 },
    Cap { c: Vec3, e1: Vec3, e2: Vec3, min_height: f64 },
    Disk { c: Vec3, e1: Vec3, e2: Vec3, max_cosh: f64 },
}

impl<'a> AreaSampler<'a> {
    pub fn new(p: &'a Polygon) -> AreaSampler<'a> {
        let model = p.model();
        let corners: Vec<Vec3> = (0..p.corner_count()).map(|v| *p.corner_raw(v)).collect();
        let radius = |c: &Vec3| corners.iter().map(|x| model.dist(c, x)).fold(0.0, f64::max) * (1.0 + 1e-9) + 1e-12;
        let region = match model {
            Model::Euclidean => {
                let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
                for c in &corners {
                    x0 = x0.min(c.x);
                    x1 = x1.max(c.x);
                    y0 = y0.min(c.y);
                    y1 = y1.max(c.y);
                }
                Region::Box { x0, x1, y0, y1 }
            }
            Model::Spherical => {
                let sum: Vec3 = corners.iter().sum();
                let c = if sum.norm() > 1e-9 { sum.normalize() } else { corners[0] };
                let r = radius(&c);
                let (e1, e2) = model.frame(&c);
                let min_height = if r >= PI / 2.0 { -1.0 } else { r.cos() };
                Region::Cap { c, e1, e2, min_height }
            }
            Model::Hyperbolic => {
                let sum: Vec3 = corners.iter().sum();
                let c = sum / (-lorentz(&sum, &sum)).sqrt();
                let (e1, e2) = model.frame(&c);
                Region::Disk { c, e1, e2, max_cosh: radius(&c).cosh() }
            }
        };
        AreaSampler { poly: p, region }
    }

    fn candidate(&self, rng: &mut ChaCha8Rng) -> Point {
        let model = self.poly.model();
        match self.region {
            Region::Box { x0, x1, y0, y1 } => {
                Point::euclidean(x0 + (x1 - x0) * rng.gen::<f64>(), y0 + (y1 - y0) * rng.gen::<f64>())
            }
            Region::Cap { c, e1, e2, min_height } => {
                let h = min_height + (1.0 - min_height) * rng.gen::<f64>();
                let (s, co) = (TAU * rng.gen::<f64>()).sin_cos();
                let r = (1.0 - h * h).max(0.0).sqrt();
                Point::from_raw(model, c * h + (e1 * co + e2 * s) * r)
            }
            Region::Disk { c, e1, e2, max_cosh } => {
                let r = (1.0 + (max_cosh - 1.0) * rng.gen::<f64>()).acosh();
                let (s, co) = (TAU * rng.gen::<f64>()).sin_cos();
                Point::from_raw(model, model.exp(&c, &(e1 * co + e2 * s), r).0)
            }
        }
    }

    /// A point strictly inside the table.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        loop {
            let z = self.candidate(rng);
            if self.poly.contains(&z) && self.poly.distance_to_boundary(&z) > 1e-9 {
                return z;
            }
        }
    }
}

/// Uniform boundary point away from the corners.
pub fn sample_boundary_point(p: &Polygon, rng: &mut ChaCha8Rng) -> BoundaryPoint {
    loop {
        let b = p.boundary_point(p.perimeter() * rng.gen::<f64>());
        if b.s > 1e-9 && b.s < p.side_length(b.side) - 1e-9 {
            return b;
        }
    }
}

/// Runs `eval` on `samples` parameters drawn by `draw`, redrawing exceptional parameters, and
/// returns the per-sample outputs in index order with the number of redraws.
pub fn sample_map<P, T, D, E>(samples: usize, seed: u64, draw: D, eval: E) -> Result<(Vec<(P, T)>, usize)>
where
    P: Send,
    T: Send,
    D: Fn(&mut ChaCha8Rng) -> P + Sync,
    E: Fn(&P) -> Result<T> + Sync,
{
    let outputs: Vec<Result<(P, T, usize)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            for attempt in 0..MAX_ATTEMPTS {
                let param = draw(&mut rng);
                match eval(&param) {
                    Ok(v) => return Ok((param, v, attempt)),
                    Err(e) if e.is_exceptional() => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Domain(format!("sample {i}: {MAX_ATTEMPTS} exceptional parameters in a row")))
        })
        .collect();
    let mut out = Vec::with_capacity(samples);
    let mut redraws = 0;
    for o in outputs {
        let (p, v, r) = o?;
        redraws += r;
        out.push((p, v));
    }
    if samples > 0 && redraws as f64 > 0.01 * samples as f64 {
        log::warn!("{redraws} exceptional parameters in {samples} samples; the polygon may be degenerate");
    }
    Ok((out, redraws))
}

/// Monte Carlo estimate of the normalized average of `closed_form_average`.
pub fn mc_average(
    p: &Polygon,
    kind: AverageKind,
    arg: f64,
    samples: usize,
    seed: u64,
    options: SplitOptions,
) -> Result<MCEstimate> {
    if samples < 2 {
        return Err(Error::InsufficientData("at least two samples are needed".into()));
    }
    let (out, redraws) = match kind {
        AverageKind::DirectionMap => {
            if p.model() != Model::Euclidean {
                return Err(Error::Domain("direction averages are only defined for planar polygons".into()));
            }
            let n = arg.floor() as usize;
            let (out, r) = sample_map(
                samples,
                seed,
                |rng| TAU * rng.gen::<f64>(),
                |&theta| {
                    let g = direction_counting_map(p, theta, n, options)?;
                    complete(g.complete, options)?;
                    Ok(g.count(n as f64) as f64)
                },
            )?;
            (out.into_iter().map(|(t, v)| (vec![t], v)).collect::<Vec<_>>(), r)
        }
        AverageKind::PositionFlow => {
            let sampler = AreaSampler::new(p);
            let (out, r) = sample_map(
                samples,
                seed,
                |rng| sampler.sample(rng),
                |z| {
                    if arg == 0.0 {
                        return Ok(0.0);
                    }
                    let g = position_counting_flow(p, z, arg, options)?;
                    complete(g.complete, options)?;
                    Ok(g.count(arg) as f64)
                },
            )?;
            (out.into_iter().map(|(z, v)| (z.file_coords(), v)).collect(), r)
        }
    };
    let (params, values) = out.into_iter().unzip();
    Ok(MCEstimate::from_values(seed, values, params, redraws))
}

fn complete(flag: bool, options: SplitOptions) -> Result<()> {
    if flag {
        Ok(())
    } else {
        Err(Error::BudgetExceeded { limit: options.max_tiles })
    }
}

/// Both sides of the boundary counting identity for one corner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionMapAverage {
    pub corner: usize,
    pub steps: usize,
    pub perimeter: f64,
    /// Samples of `gd_s(n; v)`.
    pub pure: MCEstimate,
    /// Samples of `god_s(n; v)`.
    pub optical: MCEstimate,
    /// Perimeter times the pure mean, with its standard error.
    pub lhs_pure: f64,
    pub lhs_pure_se: f64,
    pub lhs_optical: f64,
    pub lhs_optical_se: f64,
    /// `Σ_k |∂_v(P; k)|`.
    pub rhs_pure: f64,
    /// `Σ_k op(∂_v(P; k), v)`.
    pub rhs_optical: f64,
}

/// `Σ_{k ≤ n} |∂_v(P; k)|` and `Σ_{k ≤ n} op(∂_v(P; k), v)` for `n = 1..=max_steps`.
pub fn boundary_curve_sums(p: &Polygon, v: usize, max_steps: usize, options: SplitOptions) -> Result<Vec<(f64, f64)>> {
    let curves = outer_boundary_curves(p, v, max_steps, options)?;
    let corner = p.corner(v);
    let mut acc = (0.0, 0.0);
    let mut out = Vec::with_capacity(max_steps);
    for level in curves {
        for pl in &level {
            acc.0 += curve_length(pl)?;
            acc.1 += optical_length(pl, &corner)?;
        }
        out.push(acc);
    }
    Ok(out)
}

pub fn mc_average_position_map(
    p: &Polygon,
    v: usize,
    steps: usize,
    samples: usize,
    seed: u64,
    options: SplitOptions,
) -> Result<PositionMapAverage> {
    if p.model() != Model::Euclidean {
        return Err(Error::Domain("boundary counting is only available on the plane".into()));
    }
    if v >= p.corner_count() {
        return Err(Error::InvalidBase(format!("corner {v} does not exist")));
    }
    if samples < 2 {
        return Err(Error::InsufficientData("at least two samples are needed".into()));
    }
    let (out, redraws) = sample_map(
        samples,
        seed,
        |rng| sample_boundary_point(p, rng),
        |s| {
            let (pure, optical) = position_counting_map(p, s, steps, options)?;
            complete(pure.complete, options)?;
            let n = steps as f64;
            Ok((pure.count_corner(n, v) as f64, optical.for_corner(v).weighted(n)))
        },
    )?;
    let params: Vec<Vec<f64>> = out.iter().map(|(s, _)| vec![s.global]).collect();
    let pure = MCEstimate::from_values(seed, out.iter().map(|o| o.1 .0).collect(), params.clone(), redraws);
    let optical = MCEstimate::from_values(seed, out.iter().map(|o| o.1 .1).collect(), params, redraws);
    let (rhs_pure, rhs_optical) =
        if steps == 0 { (0.0, 0.0) } else { *boundary_curve_sums(p, v, steps, options)?.last().unwrap() };
    let per = p.perimeter();
    Ok(PositionMapAverage {
        corner: v,
        steps,
        perimeter: per,
        lhs_pure: per * pure.mean,
        lhs_pure_se: per * pure.std_error,
        lhs_optical: per * optical.mean,
        lhs_optical_se: per * optical.std_error,
        pure,
        optical,
        rhs_pure,
        rhs_optical,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub c1: f64,
    pub c2: f64,
    pub ratio: f64,
    pub points: usize,
}

/// Smallest and largest `S(n)/n²` over the abscissae `n ≥ 5`.
pub fn quadratic_bound_fit(values: &[(f64, f64)]) -> Result<QuadraticFit> {
    let tail: Vec<f64> = values.iter().filter(|(n, _)| *n >= 5.0).map(|(n, s)| s / (n * n)).collect();
    if tail.len() < 10 {
        return Err(Error::InsufficientData(format!("{} abscissae at or above 5, need 10", tail.len())));
    }
    let c1 = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let c2 = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(QuadraticFit { c1, c2, ratio: c2 / c1, points: tail.len() })
}

/// Sampled nondecreasing functions on a common grid of abscissae.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFamily {
    pub grid: Vec<f64>,
    /// One row per sample, aligned with `grid`.
    pub values: Vec<Vec<f64>>,
}

impl TailFamily {
    /// Pointwise mean over the samples.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.values.len().max(1) as f64;
        (0..self.grid.len()).map(|j| self.values.iter().map(|row| row[j]).sum::<f64>() / n).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub samples: usize,
    pub epsilon: f64,
    pub threshold: f64,
    /// Fraction of samples exceeding `F(t)(1 + log(1 + F(t)))^{1+ε}` at some `t > threshold`.
    pub violation_fraction: f64,
    /// Fraction of samples with `f(t) < C F(t)` at some `t ≥ threshold`, when `C` is given.
    pub below_fraction: Option<f64>,
}

pub fn ae_tail_check(
    family: &TailFamily,
    average: &[f64],
    epsilon: f64,
    threshold: f64,
    c: Option<f64>,
) -> Result<TailReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if average.len() != family.grid.len() || family.values.iter().any(|row| row.len() != family.grid.len()) {
        return Err(Error::Domain("samples and average must share the grid".into()));
    }
    if family.values.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    for (i, row) in family.values.iter().enumerate() {
        if row.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::NonMonotone { sample: i });
        }
    }
    let bound = |f: f64| f * (1.0 + (1.0 + f).ln()).powf(1.0 + epsilon);
    let n = family.values.len() as f64;
    let mut violations = 0usize;
    let mut below = 0usize;
    for row in &family.values {
        let tail = family.grid.iter().zip(row).zip(average);
        if tail.clone().any(|((&t, &f), &a)| t > threshold && f > bound(a)) {
            violations += 1;
        }
        if let Some(c) = c {
            if tail.clone().any(|((&t, &f), &a)| t >= threshold && f < c * a) {
                below += 1;
            }
        }
    }
    Ok(TailReport {
        samples: family.values.len(),
        epsilon,
        threshold,
        violation_fraction: violations as f64 / n,
        below_fraction: c.map(|_| below as f64 / n),
    })
}

/// `fd_θ(n)` on the grid `n = 1..=max_steps` for `samples` uniform directions `θ`.
pub fn direction_tail_family(
    p: &Polygon,
    max_steps: usize,
    samples: usize,
    seed: u64,
    options: SplitOptions,
) -> Result<(TailFamily, Vec<f64>)> {
    let grid: Vec<f64> = (1..=max_steps).map(|n| n as f64).collect();
    let (out, _) = sample_map(
        samples,
        seed,
        |rng| TAU * rng.gen::<f64>(),
        |&theta| {
            let f = direction_complexity_map(p, theta, max_steps, options)?;
            complete(f.complete, options)?;
            Ok(grid.iter().map(|&n| f.value(n) as f64).collect::<Vec<f64>>())
        },
    )?;
    let (params, values) = out.into_iter().unzip();
    Ok((TailFamily { grid, values }, params))
}

/// `h_z(l)` on the grid `l = step, 2 step, ..., max_length` for `samples` uniform points `z`.
pub fn position_tail_family(
    p: &Polygon,
    max_length: f64,
    step: f64,
    samples: usize,
    seed: u64,
    options: SplitOptions,
) -> Result<(TailFamily, Vec<Vec<f64>>)> {
    if !(step > 0.0 && max_length >= step) {
        return Err(Error::Domain(format!("grid step {step} does not fit in length {max_length}")));
    }
    let count = (max_length / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (1..=count).map(|k| k as f64 * step).collect();
    let sampler = AreaSampler::new(p);
    let (out, _) = sample_map(
        samples,
        seed,
        |rng| sampler.sample(rng),
        |z| {
            let h = position_complexity_flow(p, z, max_length, options)?;
            complete(h.complete, options)?;
            Ok(grid.iter().map(|&l| h.value(l) as f64).collect::<Vec<f64>>())
        },
    )?;
    let (params, values): (Vec<Point>, _) = out.into_iter().unzip();
    Ok((TailFamily { grid, values }, params.iter().map(Point::file_coords).collect()))
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

    fn octant() -> Polygon {
        validate_polygon(&PolygonSpec {
            model: Model::Spherical,
            loops: vec![vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]],
        })
        .unwrap()
    }

    #[test]
    fn zeta_vanishes_at_quarter_points() {
        assert_eq!(zeta(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(zeta(PI / 2.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(zeta(PI).unwrap(), 0.0, epsilon = 1e-15);
        assert!(zeta(-0.1).is_err());
        assert!(zeta(3.2).is_err());
    }

    #[test]
    fn closed_forms() {
        let sq = square();
        let d = closed_form_average(&sq, AverageKind::DirectionMap, 7.0).unwrap();
        assert_abs_diff_eq!(d.total, 14.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(d.normalized, 7.0, epsilon = 1e-12);
        let f = closed_form_average(&sq, AverageKind::PositionFlow, 2.0).unwrap();
        assert_abs_diff_eq!(f.total, 4.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(f.normalized, 4.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(f.angle_sum * 2.0, PI * f.kappa as f64 * 2.0, epsilon = 1e-12);
        let s = closed_form_average(&octant(), AverageKind::PositionFlow, PI).unwrap();
        assert_abs_diff_eq!(s.total, 3.0 * PI, epsilon = 1e-12);
        assert!(closed_form_average(&octant(), AverageKind::DirectionMap, 1.0).is_err());
    }

    #[test]
    fn quadratic_fit() {
        let exact: Vec<(f64, f64)> = (1..=20).map(|n| (n as f64, 3.0 * (n * n) as f64)).collect();
        let fit = quadratic_bound_fit(&exact).unwrap();
        assert_abs_diff_eq!(fit.c1, 3.0);
        assert_abs_diff_eq!(fit.c2, 3.0);
        let short: Vec<(f64, f64)> = (1..=12).map(|n| (n as f64, 1.0)).collect();
        assert!(quadratic_bound_fit(&short).is_err());
        let r = |m: usize| {
            let v: Vec<(f64, f64)> = (m / 2..=m).map(|n| (n as f64, (n * n + n) as f64)).collect();
            quadratic_bound_fit(&v).unwrap().ratio
        };
        assert!(r(1000) < r(100) && r(100) < r(40));
    }

    #[test]
    fn tail_check_constructions() {
        let grid: Vec<f64> = (1..=50).map(|t| t as f64).collect();
        let average: Vec<f64> = grid.iter().map(|t| t * t).collect();
        let eps = 0.5;
        let over: Vec<f64> = average.iter().map(|&f| f * (1.0 + (1.0 + f).ln()).powf(2.0 + eps)).collect();
        let mut values = vec![average.clone(); 7];
        values.extend(vec![over; 3]);
        let family = TailFamily { grid: grid.clone(), values };
        let report = ae_tail_check(&family, &average, eps, 10.0, Some(1.5)).unwrap();
        assert_abs_diff_eq!(report.violation_fraction, 0.3);
        assert_abs_diff_eq!(report.below_fraction.unwrap(), 0.7);
        let bad = TailFamily { grid: vec![1.0, 2.0], values: vec![vec![2.0, 1.0]] };
        assert!(matches!(ae_tail_check(&bad, &[1.0, 1.0], eps, 0.0, None), Err(Error::NonMonotone { sample: 0 })));
    }

    #[test]
    fn estimates_are_reproducible() {
        let sq = square();
        let a = mc_average(&sq, AverageKind::PositionFlow, 1.0, 64, 11, SplitOptions::default()).unwrap();
        let b = mc_average(&sq, AverageKind::PositionFlow, 1.0, 64, 11, SplitOptions::default()).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.values, b.values);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = one.install(|| mc_average(&sq, AverageKind::PositionFlow, 1.0, 64, 11, SplitOptions::default()).unwrap());
        assert_eq!(a.mean.to_bits(), c.mean.to_bits());
    }

    #[test]
    fn short_flow_average_is_small() {
        let sq = square();
        let est = mc_average(&sq, AverageKind::PositionFlow, 0.1, 400, 3, SplitOptions::default()).unwrap();
        // Only points within 0.1 of a corner see it; each sees at most its own corner region.
        assert!(est.mean <= 4.0 * PI * 0.01);
    }

    #[test]
    fn samplers_stay_inside() {
        let oct = octant();
        let s = AreaSampler::new(&oct);
        let mut rng = sample_rng(5, 0);
        for _ in 0..200 {
            assert!(oct.contains(&s.sample(&mut rng)));
        }
    }
}
