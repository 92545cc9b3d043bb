use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use spikelab::geometry::*;

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
}

#[test]
fn ellipse_maximizers_are_major_vertices() {
    let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
    let max = max_mean_curvature(&d);
    assert!((max.h_max - 2.0).abs() < 1e-12);
    assert!((max.h_min - 0.25).abs() < 1e-9);
    assert_eq!(max.points.len(), 2, "{:?}", max.points);
    assert!(max.points.iter().any(|p| close(p, &[2.0, 0.0], 1e-9)));
    assert!(max.points.iter().any(|p| close(p, &[-2.0, 0.0], 1e-9)));
    assert!(!max.degenerate);
}

#[test]
fn ball_is_degenerate() {
    for dim in [2, 3] {
        let max = max_mean_curvature(&DomainSpec::ball(2.0, dim).unwrap());
        assert!(max.degenerate);
        assert_eq!(max.h_max, 0.5);
        assert_eq!(max.note.as_deref(), Some("degenerate: constant curvature"));
    }
}

#[test]
fn perturbed_disk_has_three_rotated_maximizers() {
    let d = DomainSpec::perturbed_disk(1.0, 0.1, 3).unwrap();
    let max = max_mean_curvature(&d);
    assert_eq!(max.points.len(), 3, "{:?}", max.points);
    // Brute-force oracle on the polar-curve curvature formula.
    let kappa = |t: f64| {
        let (r, dr, ddr) = (1.0 + 0.1 * (3.0 * t).cos(), -0.3 * (3.0 * t).sin(), -0.9 * (3.0 * t).cos());
        (r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr).powf(1.5)
    };
    let brute = (0..200_000).map(|i| kappa(TAU * i as f64 / 200_000.0)).fold(f64::MIN, f64::max);
    assert!((max.h_max - brute).abs() < 1e-9);
    let mut angles: Vec<f64> = max.params.iter().map(|q| q[0]).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in angles.windows(2) {
        assert!((w[1] - w[0] - TAU / 3.0).abs() < 1e-8);
    }
}

#[test]
fn ellipsoid_maximizers_on_major_axis() {
    let d = DomainSpec::ellipsoid(1.6, 1.0, 1.0).unwrap();
    let max = max_mean_curvature(&d);
    assert!((max.h_max - 1.6).abs() < 1e-9);
    assert_eq!(max.points.len(), 2, "{:?}", max.points);
    for p in &max.points {
        assert!((p[0].abs() - 1.6).abs() < 1e-8, "{p:?}");
    }
}

#[test]
fn nearest_point_examples() {
    let ball = DomainSpec::ball(1.0, 3).unwrap();
    let n = nearest_boundary_point(&ball, &[0.5, 0.0, 0.0]);
    assert!(close(&n.point, &[1.0, 0.0, 0.0], 1e-12));
    assert!((n.distance - 0.5).abs() < 1e-12);
    assert!(!n.tie);
    assert!(nearest_boundary_point(&ball, &[0.0, 0.0, 0.0]).tie);

    let e = DomainSpec::ellipse(2.0, 1.0).unwrap();
    let n = nearest_boundary_point(&e, &[0.0, 0.0]);
    assert!((n.distance - 1.0).abs() < 1e-12);
    assert!(close(&[n.point[0], n.point[1].abs()], &[0.0, 1.0], 1e-12));
    assert!(n.tie);

    let pd = DomainSpec::perturbed_disk(1.0, 0.1, 3).unwrap();
    let n = nearest_boundary_point(&pd, &[0.0, 0.0]);
    assert!((n.distance - 0.9).abs() < 1e-9);
    assert!(n.tie);
}

#[test]
fn nearest_point_on_evolute_side() {
    // Inside the evolute of the ellipse the nearest point leaves the axis.
    let e = DomainSpec::ellipse(2.0, 1.0).unwrap();
    let n = nearest_boundary_point(&e, &[1.0, 0.0]);
    assert!(n.tie);
    assert!((n.point[0] - 4.0 / 3.0).abs() < 1e-12);
    assert!((n.distance - (6.0f64 / 9.0).sqrt()).abs() < 1e-12);
    assert!(matches!(
        mean_curvature(&e, &[1.0, 0.0]),
        Err(GeometryError::PointNotOnBoundary { .. })
    ));
}

#[test]
fn ellipse_total_curvature_is_tau() {
    let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
    // ∮ κ ds with ds = |γ'(t)| dt, trapezoid on a periodic integrand.
    let n = 20_000;
    let total: f64 = (0..n)
        .map(|i| {
            let t = TAU * i as f64 / n as f64;
            let speed = (4.0 * t.sin().powi(2) + t.cos().powi(2)).sqrt();
            d.curvature_at_param(&[t]) * speed
        })
        .sum::<f64>()
        * TAU
        / n as f64;
    assert!((total - TAU).abs() < 1e-10);
}

#[test]
fn boundary_arc_length() {
    let c = DomainSpec::ball(2.0, 2).unwrap();
    let s = boundary_distance(&c, &[2.0, 0.0], &[0.0, 2.0]);
    assert!((s - PI).abs() < 1e-12);
    let e = DomainSpec::ellipse(2.0, 1.0).unwrap();
    let quarter = boundary_distance(&e, &[2.0, 0.0], &[0.0, 1.0]);
    // Quarter perimeter of the (2,1) ellipse.
    assert!((quarter - 2.422_112_055_4).abs() < 1e-9);
    assert!((boundary_distance(&e, &[2.0, 0.0], &[-2.0, 0.0]) - 2.0 * quarter).abs() < 1e-9);
}

#[test]
fn mesh_is_deterministic_and_conforming() {
    let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
    let a = generate_mesh(&d, 0.15).unwrap();
    let b = generate_mesh(&d, 0.15).unwrap();
    assert_eq!(a.cells, b.cells);
    assert_eq!(a.coords, b.coords);
    // Conforming: every interior facet is shared by exactly two cells and
    // boundary facets touch only boundary vertices.
    for m in [a, generate_mesh(&DomainSpec::ellipsoid(1.6, 1.0, 1.0).unwrap(), 0.2).unwrap()] {
        let k = m.dim + 1;
        let mut facets = std::collections::HashMap::new();
        for c in 0..m.n_cells() {
            let cell = m.cell(c);
            for skip in 0..k {
                let mut f: Vec<usize> = (0..k).filter(|&j| j != skip).map(|j| cell[j]).collect();
                f.sort_unstable();
                *facets.entry(f).or_insert(0) += 1;
            }
        }
        for (f, count) in facets {
            assert!(count == 1 || count == 2);
            if count == 1 {
                assert!(f.iter().all(|&v| m.is_boundary(v)), "dangling facet {f:?}");
            }
        }
        let s = m.stats();
        assert!(s.min_volume > 0.0 && s.max_aspect_ratio <= 20.0);
    }
}

#[test]
fn ellipsoid_mesh_boundary_and_volume() {
    let d = DomainSpec::ellipsoid(1.6, 1.0, 1.0).unwrap();
    let m = generate_mesh(&d, 0.2).unwrap();
    for &b in &m.boundary {
        assert!(d.level(m.vertex(b)).abs() < 1e-10 * m.h);
    }
    let v = m.stats().total_volume;
    assert!((v / d.volume() - 1.0).abs() < 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nearest_of_boundary_point_is_itself(t in 0.0..TAU, shape in 0usize..3) {
        let d = match shape {
            0 => DomainSpec::ellipse(2.0, 1.0).unwrap(),
            1 => DomainSpec::perturbed_disk(1.0, 0.1, 3).unwrap(),
            _ => DomainSpec::ball(1.5, 2).unwrap(),
        };
        let p = d.boundary_point(&[t]);
        let n = nearest_boundary_point(&d, &p);
        prop_assert!(n.distance < 1e-10);
        prop_assert!(close(&n.point, &p, 1e-9));
    }

    #[test]
    fn ellipsoid_boundary_points_are_fixed(th in 0.05..3.09f64, ph in 0.0..TAU) {
        let d = DomainSpec::ellipsoid(1.6, 1.0, 1.2).unwrap();
        let p = d.boundary_point(&[th, ph]);
        let n = nearest_boundary_point(&d, &p);
        prop_assert!(n.distance < 1e-10);
        prop_assert!(mean_curvature(&d, &p).unwrap() > 0.0);
    }

    #[test]
    fn nearest_distance_is_minimal(x in -1.5..1.5f64, y in -0.7..0.7f64) {
        let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
        prop_assume!(d.contains(&[x, y]));
        let n = nearest_boundary_point(&d, &[x, y]);
        let brute = (0..200_000)
            .map(|i| {
                let p = d.boundary_point(&[TAU * i as f64 / 200_000.0]);
                ((p[0] - x).powi(2) + (p[1] - y).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!(n.distance <= brute + 1e-12);
        prop_assert!(brute - n.distance < 1e-6);
    }

    #[test]
    fn maximizer_set_closed_under_symmetry(a in 1.2..3.0f64) {
        let d = DomainSpec::ellipse(a, 1.0).unwrap();
        let max = max_mean_curvature(&d);
        for p in &max.points {
            for q in [[-p[0], p[1]], [p[0], -p[1]]] {
                prop_assert!(max.points.iter().any(|o| close(o, &q, 1e-8)));
            }
        }
    }
}
