//! End-to-end checks of the average formulas, the bridge between complexity and counting, and the
//! internal consistency of the unfolding engine.
//!
//! Each check is identified by a short id (`A1` to `A12`) and produces one [`Outcome`]. The same
//! checks back the `verify` subcommand and the acceptance test target.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complexity::{
    bridge_constants, direction_complexity_map_full, position_complexity_flow_full,
    GraphPoint, PuncturedGraph,
};
use crate::error::{Error, Result};
use crate::geom::{Direction, Model, Point};
use crate::polygon::{validate_polygon, Polygon, PolygonSpec};
use crate::stats::{
    ae_tail_check, boundary_curve_sums, closed_form_average, mc_average, mc_average_position_map,
    quadratic_bound_fit, sample_rng, spherical_density_integral, zeta, AreaSampler, AverageKind,
    direction_tail_family, position_tail_family,
};
use crate::unfold::{split_beams, trace_ray, unfold_orbit, visible_corner_images, Budget, SplitOptions};

pub const CRITERIA: [&str; 12] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11", "A12"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!("{} {} ({:.1} s): {}", self.id, if self.passed { "PASS" } else { "FAIL" }, self.seconds, self.detail)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub options: SplitOptions,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 20240917, options: SplitOptions::default() }
    }
}

pub fn unit_square() -> Polygon {
    validate_polygon(&PolygonSpec {
        model: Model::Euclidean,
        loops: vec![vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]],
    })
    .expect("the unit square is valid")
}

/// The spherical triangle with three right angles.
pub fn octant() -> Polygon {
    validate_polygon(&PolygonSpec {
        model: Model::Spherical,
        loops: vec![vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]],
    })
    .expect("the octant is valid")
}

/// Regular hyperbolic triangle with all angles equal to `angle`.
pub fn hyperbolic_equilateral(angle: f64) -> Result<Polygon> {
    let cosh_r = (PI / 3.0).tan().recip() * (angle / 2.0).tan().recip();
    if cosh_r <= 1.0 {
        return Err(Error::Domain(format!("no hyperbolic equilateral triangle with angle {angle}")));
    }
    Polygon::regular(Model::Hyperbolic, 3, cosh_r.acosh())
}

fn random_triangle(rng: &mut ChaCha8Rng) -> Polygon {
    loop {
        let pts: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0]).collect();
        let spec = PolygonSpec { model: Model::Euclidean, loops: vec![pts] };
        if let Ok(p) = validate_polygon(&spec) {
            if p.angles().iter().all(|&a| a > 0.2) {
                return p;
            }
        }
    }
}

fn run_one(id: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome { id: id.to_string(), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Runs one check by id.
pub fn run_criterion(id: &str, cfg: &VerifyConfig) -> Result<Outcome> {
    let c = *cfg;
    Ok(match id {
        "A1" => run_one(id, || direction_average(&c)),
        "A2" => run_one(id, || flow_average(&c)),
        "A3" => run_one(id, || spherical_average(&c)),
        "A4" => run_one(id, || hyperbolic_average(&c)),
        "A5" => run_one(id, || bridge(&c)),
        "A6" => run_one(id, || graph_bounds(&c)),
        "A7" => run_one(id, || oracle_equivalence(&c)),
        "A8" => run_one(id, || unfolding_integrity(&c)),
        "A9" => run_one(id, || boundary_theorem(&c)),
        "A10" => run_one(id, || quadratic_growth(&c)),
        "A11" => run_one(id, || tail_bound(&c)),
        "A12" => run_one(id, || density_identity(&c)),
        _ => return Err(Error::Domain(format!("unknown check {id}"))),
    })
}

pub fn run_all(cfg: &VerifyConfig) -> Vec<Outcome> {
    CRITERIA.iter().map(|id| run_criterion(id, cfg).expect("known id")).collect()
}

fn direction_average(c: &VerifyConfig) -> Result<(bool, String)> {
    let n = 50.0;
    let est = mc_average(&unit_square(), AverageKind::DirectionMap, n, 200, c.seed, c.options)?;
    let ratio = est.mean / n;
    Ok(((ratio - 1.0).abs() <= 0.05, format!("mean gd(50)/50 = {ratio:.4} (target 1 within 5%)")))
}

fn flow_average(c: &VerifyConfig) -> Result<(bool, String)> {
    let sq = unit_square();
    let target = closed_form_average(&sq, AverageKind::PositionFlow, 2.0)?.normalized;
    let est = mc_average(&sq, AverageKind::PositionFlow, 2.0, 2000, c.seed, c.options)?;
    let z = est.z_score(target);
    Ok((z.abs() <= 3.0, format!("mean gc(2) = {:.4} ± {:.4}, target {target:.4}, z = {z:.2}", est.mean, est.std_error)))
}

fn spherical_average(c: &VerifyConfig) -> Result<(bool, String)> {
    let oct = octant();
    let zeros = [zeta(0.0)?, zeta(PI / 2.0)?, zeta(PI)?];
    let mut ok = zeros.iter().all(|z| z.abs() <= 4.0 * f64::EPSILON);
    let mut parts = vec![format!("zeta(0, pi/2, pi) = {:.1e}, {:.1e}, {:.1e}", zeros[0], zeros[1], zeros[2])];
    for (i, l) in [1.0, 2.0, PI].into_iter().enumerate() {
        let target = closed_form_average(&oct, AverageKind::PositionFlow, l)?.normalized;
        let est = mc_average(&oct, AverageKind::PositionFlow, l, 2000, c.seed + i as u64, c.options)?;
        let z = est.z_score(target);
        ok &= z.abs() <= 3.0;
        parts.push(format!("l = {l:.4}: {:.4} vs {target:.4}, z = {z:.2}", est.mean));
    }
    Ok((ok, parts.join("; ")))
}

fn hyperbolic_average(c: &VerifyConfig) -> Result<(bool, String)> {
    let tri = hyperbolic_equilateral(FRAC_PI_4)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, l) in [1.0, 2.0, 3.0].into_iter().enumerate() {
        let cf = closed_form_average(&tri, AverageKind::PositionFlow, l)?;
        let est = mc_average(&tri, AverageKind::PositionFlow, l, 2000, c.seed + i as u64, c.options)?;
        let z = est.z_score(cf.normalized);
        let z_printed = est.z_score(cf.printed_normalized.unwrap_or(f64::NAN));
        ok &= z.abs() <= 3.0;
        parts.push(format!(
            "l = {l}: {:.4} vs {:.4} (z = {z:.2}); cosh l form {:.4} (z = {z_printed:.2})",
            est.mean,
            cf.normalized,
            cf.printed_normalized.unwrap_or(f64::NAN)
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn bridge(c: &VerifyConfig) -> Result<(bool, String)> {
    let sq = unit_square();
    let (h, g, _) = position_complexity_flow_full(&sq, &Point::euclidean(0.5, 0.5), 3.0, c.options)?;
    let center = bridge_constants(&h, &g)?;
    let mut ok = center.stabilized && center.offset == 0 && (center.threshold - 0.5f64.sqrt()).abs() <= 1e-9;
    let sampler = AreaSampler::new(&sq);
    let mut flow_ok = 0;
    for i in 0..20 {
        let z = sampler.sample(&mut sample_rng(c.seed, i));
        let (h, g, _) = position_complexity_flow_full(&sq, &z, 3.0, c.options)?;
        flow_ok += bridge_constants(&h, &g)?.stabilized as usize;
    }
    let mut map_ok = 0;
    for i in 0..20 {
        let theta = TAU * sample_rng(c.seed + 1, i).gen::<f64>();
        let (f, g, _) = direction_complexity_map_full(&sq, theta, 50, c.options)?;
        map_ok += bridge_constants(&f, &g)?.stabilized as usize;
    }
    ok &= flow_ok == 20 && map_ok == 20;
    Ok((
        ok,
        format!(
            "center h0 = {}, l0 = {:.12}; stabilized at {flow_ok}/20 points and {map_ok}/20 directions",
            center.offset, center.threshold
        ),
    ))
}

fn random_graph(rng: &mut ChaCha8Rng, forest: bool) -> PuncturedGraph {
    loop {
        let n = rng.gen_range(1..=12);
        let mut edges = Vec::new();
        if forest {
            for v in 1..n {
                if rng.gen_bool(0.8) {
                    edges.push((rng.gen_range(0..v), v));
                }
            }
        } else {
            for _ in 0..rng.gen_range(1..=2 * n) {
                edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
            }
        }
        if let Ok(g) = PuncturedGraph::new(n, &edges) {
            return g;
        }
    }
}

fn random_points(rng: &mut ChaCha8Rng, g: &PuncturedGraph) -> Vec<GraphPoint> {
    let mut pts = Vec::new();
    for v in 0..g.vertex_count() {
        if rng.gen_bool(0.3) {
            pts.push(GraphPoint::Vertex { vertex: v });
        }
    }
    for e in 0..g.edge_count() {
        for _ in 0..rng.gen_range(0..3) {
            pts.push(GraphPoint::Edge { edge: e, at: rng.gen_range(0.01..0.99) });
        }
    }
    pts.dedup();
    pts
}

fn graph_bounds(c: &VerifyConfig) -> Result<(bool, String)> {
    let mut checked = 0;
    let mut forests = 0;
    let mut failures = 0;
    for i in 0..2000 {
        let mut rng = sample_rng(c.seed, i);
        let g = random_graph(&mut rng, i >= 1000);
        let pts = random_points(&mut rng, &g);
        match g.component_bounds_check(&pts) {
            Ok(b) => {
                checked += 1;
                forests += b.is_forest as usize;
            }
            Err(_) => failures += 1,
        }
    }
    Ok((
        failures == 0,
        format!("{checked} punctured graphs within bounds ({forests} forests at the upper bound), {failures} violations"),
    ))
}

fn oracle_equivalence(c: &VerifyConfig) -> Result<(bool, String)> {
    let mut rng = sample_rng(c.seed, 0);
    let tables = [unit_square(), random_triangle(&mut rng)];
    let mut compared = 0;
    let mut records = 0;
    let mut mismatches = Vec::new();
    for (ti, p) in tables.iter().enumerate() {
        let sampler = AreaSampler::new(p);
        for i in 0..5 {
            let z = sampler.sample(&mut sample_rng(c.seed + 1 + ti as u64, i));
            let mut beams = split_beams(p, &z, Budget::length(3.0), c.options)?.require_complete()?.records;
            let mut oracle = visible_corner_images(p, &z, 3.0, c.options.max_tiles)?;
            for list in [&mut beams, &mut oracle] {
                list.sort_by(|a, b| a.corner.cmp(&b.corner).then_with(|| a.word.cmp(&b.word)));
            }
            let same = beams.len() == oracle.len()
                && beams.iter().zip(&oracle).all(|(a, b)| {
                    a.corner == b.corner && a.word == b.word && (a.length - b.length).abs() <= 1e-9
                });
            compared += 1;
            records += oracle.len();
            if !same {
                mismatches.push(format!("table {ti} point {i}: {} vs {} records", beams.len(), oracle.len()));
            }
        }
    }
    Ok((
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{compared} base points, {records} records identical")
        } else {
            mismatches.join("; ")
        },
    ))
}

fn unfolding_integrity(c: &VerifyConfig) -> Result<(bool, String)> {
    let tables = [unit_square(), octant(), hyperbolic_equilateral(FRAC_PI_4)?];
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..1000 {
        let p = &tables[i % 3];
        let mut rng = sample_rng(c.seed, i);
        let z = AreaSampler::new(p).sample(&mut rng);
        let dir = Direction::at_angle(z, TAU * rng.gen::<f64>());
        let orbit = trace_ray(p, &z, &dir, 1e3, 21)?;
        match unfold_orbit(p, &orbit) {
            Ok((_, r)) => worst = worst.max(r),
            Err(_) => failures += 1,
        }
    }
    Ok((failures == 0 && worst < 1e-8, format!("1000 orbits, largest residual {worst:.2e}")))
}

fn boundary_theorem(c: &VerifyConfig) -> Result<(bool, String)> {
    let sq = unit_square();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=3 {
        let avg = mc_average_position_map(&sq, 0, n, 4000, c.seed + n as u64, c.options)?;
        let zp = (avg.lhs_pure - avg.rhs_pure) / avg.lhs_pure_se;
        let zo = (avg.lhs_optical - avg.rhs_optical) / avg.lhs_optical_se;
        ok &= zp.abs() <= 3.0 && zo.abs() <= 3.0;
        if n == 1 {
            ok &= (avg.rhs_pure - 2.0).abs() <= 1e-12;
        }
        parts.push(format!(
            "n = {n}: {:.4} vs {:.4} (z = {zp:.2}), optical {:.4} vs {:.4} (z = {zo:.2})",
            avg.lhs_pure, avg.rhs_pure, avg.lhs_optical, avg.rhs_optical
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// `Σ_v Σ_{k ≤ n} op(∂_v(P; k), v)` for `n = 1..=max_steps`.
pub fn optical_boundary_sums(p: &Polygon, max_steps: usize, options: SplitOptions) -> Result<Vec<(f64, f64)>> {
    let mut total = vec![0.0; max_steps];
    for v in 0..p.corner_count() {
        for (k, (_, op)) in boundary_curve_sums(p, v, max_steps, options)?.into_iter().enumerate() {
            total[k] += op;
        }
    }
    Ok(total.into_iter().enumerate().map(|(k, s)| ((k + 1) as f64, s)).collect())
}

fn quadratic_growth(c: &VerifyConfig) -> Result<(bool, String)> {
    let sums = optical_boundary_sums(&unit_square(), 40, c.options)?;
    let tail: Vec<(f64, f64)> = sums.into_iter().filter(|(n, _)| *n >= 20.0).collect();
    let fit = quadratic_bound_fit(&tail)?;
    Ok((
        fit.c1 > 0.0 && fit.c1 <= fit.c2 && fit.ratio < 3.0,
        format!("c1 = {:.4}, c2 = {:.4}, ratio {:.4} over n in [20, 40]", fit.c1, fit.c2, fit.ratio),
    ))
}

fn tail_bound(c: &VerifyConfig) -> Result<(bool, String)> {
    let sq = unit_square();
    let eps = 0.5;
    let (family, _) = direction_tail_family(&sq, 100, 200, c.seed, c.options)?;
    let dir = ae_tail_check(&family, &family.mean(), eps, 20.0, None)?;
    let (family, _) = position_tail_family(&sq, 6.0, 0.1, 200, c.seed + 1, c.options)?;
    let pos = ae_tail_check(&family, &family.mean(), eps, 1.0, None)?;
    Ok((
        dir.violation_fraction <= 0.05 && pos.violation_fraction <= 0.05,
        format!(
            "violation fraction {:.3} for directions, {:.3} for positions",
            dir.violation_fraction, pos.violation_fraction
        ),
    ))
}

/// Composite Simpson rule with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn density_identity(c: &VerifyConfig) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let l = 4.0 * PI * sample_rng(c.seed, i).gen::<f64>();
        // |sin| is smooth between multiples of pi.
        let mut quad = 0.0;
        let mut a = 0.0;
        while a < l {
            let b = (a + PI).min(l);
            quad += simpson(|t| t.sin().abs(), a, b, 2000);
            a = b;
        }
        worst = worst.max((spherical_density_integral(l)? - quad).abs());
    }
    Ok((worst <= 1e-10, format!("largest deviation from quadrature {worst:.2e} over 100 lengths")))
}
