use std::f64::consts::{PI, TAU};

use approx::assert_abs_diff_eq;
use billiard_counting::geom::{Direction, Model, Point};
use billiard_counting::polygon::{validate_polygon, Polygon, PolygonSpec};
use billiard_counting::unfold::{
    outer_boundary_curve, split_beams, trace_ray, unfold_orbit, visible_corner_images, Budget, OrbitStatus,
    SingularOrbitRecord, SplitOptions,
};
use proptest::prelude::*;

fn poly<const N: usize>(model: Model, pts: &[[f64; N]]) -> Polygon {
    validate_polygon(&PolygonSpec { model, loops: vec![pts.iter().map(|p| p.to_vec()).collect()] }).unwrap()
}

fn square() -> Polygon {
    poly(Model::Euclidean, &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
}

fn sphere_point(x: f64, y: f64, z: f64) -> Point {
    let n = (x * x + y * y + z * z).sqrt();
    Point::spherical(x / n, y / n, z / n).unwrap()
}

fn key(r: &SingularOrbitRecord) -> (usize, Vec<usize>, i64) {
    (r.corner, r.word.clone(), (r.length * 1e7).round() as i64)
}

fn assert_same(p: &Polygon, z: &Point, l: f64) {
    let beams = split_beams(p, z, Budget::length(l), SplitOptions::default()).unwrap();
    let oracle = visible_corner_images(p, z, l, 5_000_000).unwrap();
    let mut a: Vec<_> = beams.records.iter().map(key).collect();
    let mut b: Vec<_> = oracle.iter().map(key).collect();
    a.sort();
    b.sort();
    assert_eq!(a, b, "records differ at length {l}");
    for (x, y) in beams.records.iter().zip(oracle.iter()) {
        assert_abs_diff_eq!(x.length, y.length, epsilon = 1e-9);
    }
}

#[test]
fn square_center_matches_images() {
    let sq = square();
    let z = Point::euclidean(0.5, 0.5);
    for l in [0.5, 0.8, 1.6, 1.9, 3.0, 5.5] {
        assert_same(&sq, &z, l);
    }
}

#[test]
fn square_generic_point_matches_images() {
    let sq = square();
    let z = Point::euclidean(0.3141, 0.2718);
    for l in [1.0, 2.5, 4.0, 7.0] {
        assert_same(&sq, &z, l);
    }
}

#[test]
fn triangle_matches_images() {
    let t = poly(Model::Euclidean, &[[0.0, 0.0], [1.3, 0.1], [0.4, 0.9]]);
    let z = Point::euclidean(0.5, 0.35);
    for l in [1.0, 3.0, 6.0] {
        assert_same(&t, &z, l);
    }
}

#[test]
fn hyperbolic_triangle_matches_images() {
    let t = Polygon::regular(Model::Hyperbolic, 3, 0.8).unwrap();
    let z = Point::hyperbolic_polar(0.06, 0.3);
    for l in [1.0, 2.5, 4.0] {
        assert_same(&t, &z, l);
    }
}

#[test]
fn leaves_partition_the_circle_and_records_grow() {
    let t = poly(Model::Euclidean, &[[0.0, 0.0], [1.3, 0.1], [0.4, 0.9]]);
    let z = Point::euclidean(0.5, 0.35);
    let mut prev = 0;
    for l in [0.5, 1.0, 2.0, 4.0, 6.0] {
        let r = split_beams(&t, &z, Budget::length(l), SplitOptions::default()).unwrap();
        let w: f64 = r.leaves().map(|b| b.width()).sum();
        assert_abs_diff_eq!(w, TAU, epsilon = 1e-9);
        assert!(r.records.len() >= prev);
        prev = r.records.len();
    }
}

#[test]
fn record_words_match_traced_orbits() {
    let t = poly(Model::Euclidean, &[[0.0, 0.0], [1.3, 0.1], [0.4, 0.9]]);
    let z = Point::euclidean(0.5, 0.35);
    let r = split_beams(&t, &z, Budget::length(5.0), SplitOptions::default()).unwrap();
    assert!(!r.records.is_empty());
    for rec in &r.records {
        let orbit = trace_ray(&t, &z, &Direction::at_angle(z, rec.param()), rec.length + 1e-6, usize::MAX).unwrap();
        assert_eq!(orbit.status, OrbitStatus::EndedAtCorner);
        assert_eq!(orbit.end_corner(), Some(rec.corner));
        assert_eq!(orbit.word, rec.word);
        assert_eq!(rec.steps, rec.word.len() + 1);
    }
}

#[test]
fn octant_orbits_unfold_to_geodesics() {
    let oct = poly(Model::Spherical, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let z = sphere_point(1.0, 0.9, 1.1);
    for k in 0..12 {
        let theta = 0.1 + k as f64 * TAU / 12.0;
        let orbit = trace_ray(&oct, &z, &Direction::at_angle(z, theta), 10.0, 1000).unwrap();
        let (_, residual) = unfold_orbit(&oct, &orbit).unwrap();
        assert!(residual < 1e-10);
    }
}

#[test]
fn octant_split_partitions_the_circle() {
    let oct = poly(Model::Spherical, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let z = sphere_point(1.0, 0.9, 1.1);
    let r = split_beams(&oct, &z, Budget::length(4.0), SplitOptions::default()).unwrap();
    let w: f64 = r.leaves().map(|b| b.width()).sum();
    assert_abs_diff_eq!(w, TAU, epsilon = 1e-9);
    for rec in &r.records {
        let orbit = trace_ray(&oct, &z, &Direction::at_angle(z, rec.param()), rec.length + 1e-6, usize::MAX).unwrap();
        assert_eq!(orbit.end_corner(), Some(rec.corner));
        assert_eq!(orbit.word, rec.word);
    }
}

#[test]
fn square_corner_first_boundary_has_length_two() {
    let sq = square();
    let curve = outer_boundary_curve(&sq, 0, 1, SplitOptions::default()).unwrap();
    let len: f64 = curve
        .iter()
        .flat_map(|pl| pl.windows(2).map(|w| w[0].distance(&w[1]).unwrap()))
        .sum();
    assert_abs_diff_eq!(len, 2.0, epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_square_points_match_images(x in 0.05f64..0.95, y in 0.05f64..0.95, l in 0.5f64..4.0) {
        assert_same(&square(), &Point::euclidean(x, y), l);
    }

    #[test]
    fn random_triangles_match_images(
        ax in 0.8f64..1.5, ay in -0.3f64..0.3, bx in -0.3f64..1.2, by in 0.5f64..1.3, l in 0.5f64..3.5
    ) {
        let t = poly(Model::Euclidean, &[[0.0, 0.0], [ax, ay], [bx, by]]);
        prop_assume!(t.angles().iter().all(|&a| a > 0.15 && a < PI - 0.15));
        let z = Point::euclidean((ax + bx) / 3.0, (ay + by) / 3.0);
        assert_same(&t, &z, l);
    }
}
