//! Randomized invariants across modules.

use std::f64::consts::PI;

use proptest::prelude::*;

use isopart::bench::steiner_ell;
use isopart::constructions::{make_double_bubble, make_lens, make_peanut, make_reuleaux};
use isopart::geom::{CircularArc, Point};
use isopart::grid::{anneal, volume_fixing_variation, random_variation_instance, AnnealSchedule, GridPartition};
use isopart::io::{partition_from_json, partition_to_json};
use isopart::network::{ArcPartition, FarFieldClass, StationarityTolerances};
use isopart::sphere::{make_equidistant_sites, SpherePartition};

fn point() -> impl Strategy<Value = Point> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| Point::new(x, y))
}

/// Arcs with chord at least 0.1 and half-angle below pi/2 in magnitude.
fn arc() -> impl Strategy<Value = CircularArc> {
    (point(), 0.1..4.0f64, 0.0..2.0 * PI, -1.4..1.4f64, any::<bool>()).prop_map(|(a, c, phi, theta, major)| {
        let b = a + Point::from_angle(phi) * c;
        let kappa = 2.0 * theta.sin() / c;
        CircularArc::new(a, b, kappa, major && theta.abs() > 0.1)
    })
}

/// Constructed partitions over a range of areas.
fn construction() -> impl Strategy<Value = ArcPartition> {
    prop_oneof![
        (0.2..5.0f64).prop_map(|m| make_lens(m).unwrap()),
        (0.2..5.0f64).prop_map(|m| make_reuleaux(m).unwrap()),
        (0.2..5.0f64, 0.2..5.0f64).prop_map(|(a, b)| make_peanut(a, b).unwrap()),
        (0.2..5.0f64, 0.2..5.0f64).prop_map(|(a, b)| make_double_bubble(a, b).unwrap()),
    ]
}

fn same_class(a: &FarFieldClass, b: &FarFieldClass) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arc_length_is_rigid_invariant(a in arc(), angle in 0.0..2.0 * PI, shift in point()) {
        let moved = CircularArc::new(
            (a.start.rotate(angle)) + shift,
            (a.end.rotate(angle)) + shift,
            a.kappa,
            a.major,
        );
        prop_assert!((moved.length() - a.length()).abs() <= 1e-12 * a.length().max(1.0));
    }

    #[test]
    fn tangents_match_finite_differences(a in arc(), t in 0.05..0.95f64) {
        let h = 1e-5;
        let d = (a.point_at(t + h) - a.point_at(t - h)) * (1.0 / (2.0 * h * a.length()));
        prop_assert!((d - a.tangent_at(t)).norm() <= 1e-8, "{:?}", d - a.tangent_at(t));
        let (t0, t1) = a.endpoint_tangents().unwrap();
        prop_assert!((t0 - a.tangent_at(0.0)).norm() <= 1e-12);
        prop_assert!((t1 - a.tangent_at(1.0)).norm() <= 1e-12);
    }

    #[test]
    fn reversal_negates_area_moment(a in arc()) {
        prop_assert!((a.reversed().area_moment() + a.area_moment()).abs() <= 1e-12 * a.area_moment().abs().max(1.0));
        prop_assert!((a.reversed().length() - a.length()).abs() <= 1e-12 * a.length());
    }

    #[test]
    fn constructions_are_stationary_with_prescribed_areas(p in construction()) {
        let st = p.check_stationarity(&StationarityTolerances::default());
        prop_assert!(st.pass, "{:?}", st.failures);
        prop_assert!(p.validate_topology().valid);
        for (a, r) in p.finite_areas().iter().zip(&p.regions) {
            if let (Some(a), Some(m)) = (a, r.measure.value()) {
                prop_assert!((a / m - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn scaling_covariance(p in construction(), s in 0.2..5.0f64) {
        let q = p.scaled(s);
        for (a, b) in p.finite_areas().iter().zip(q.finite_areas()) {
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((b / (a * s * s) - 1.0).abs() <= 1e-10);
            }
        }
        prop_assert!((q.finite_perimeter() / (p.finite_perimeter() * s) - 1.0).abs() <= 1e-10);
        for (e, f) in p.edges.iter().zip(&q.edges) {
            prop_assert!((f.kappa * s - e.kappa).abs() <= 1e-10 * e.kappa.abs().max(1.0));
        }
        let (pp, qp) = (p.solve_pressures().p, q.solve_pressures().p);
        for (a, b) in pp.iter().zip(&qp) {
            prop_assert!((b * s - a).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn far_field_class_is_rigid_invariant(p in construction(), angle in 0.0..2.0 * PI, shift in (-0.5..0.5f64, -0.5..0.5f64)) {
        let q = p.transformed(1.0, angle, Point::new(shift.0, shift.1));
        prop_assert!(same_class(&p.classify_far_field(), &q.classify_far_field()));
    }

    #[test]
    fn perimeter_is_half_the_region_perimeters(p in construction()) {
        let m = p.region_measures(p.window_radius).unwrap();
        let half: f64 = m.region_perimeters.iter().sum::<f64>() / 2.0;
        prop_assert!((m.perimeter - half).abs() <= 1e-10 * m.perimeter);
    }

    #[test]
    fn curvature_defects_show_in_both_residuals(p in construction(), k in 0usize..16, d in 1e-6..1e-2f64) {
        let tol = 1e-10;
        prop_assert!(p.solve_pressures().residual <= tol);
        let bounded: Vec<usize> = (0..p.edges.len()).filter(|&e| p.arc(e).is_some()).collect();
        let mut q = p.clone();
        q.edges[bounded[k % bounded.len()]].kappa += d;
        let st = q.check_stationarity(&StationarityTolerances::uniform(tol));
        prop_assert!(st.max_curvature_sum > tol);
        prop_assert!(q.solve_pressures().residual > tol);
    }

    #[test]
    fn first_variation_matches_pressure_work(p in construction()) {
        for e in 0..p.edges.len() {
            if p.arc(e).is_none() {
                continue;
            }
            let r = p.perturbation_response(e, 1e-4).unwrap();
            prop_assert!(r.defect.abs() <= 1e-3 * r.d_perimeter.abs().max(1e-9), "edge {e}: {r:?}");
        }
    }

    #[test]
    fn peanut_perimeter_grows_with_each_area(a in 0.2..4.0f64, b in 0.2..4.0f64, d in 0.01..0.5f64) {
        let base = make_peanut(a, b).unwrap().finite_perimeter();
        prop_assert!(make_peanut(a + d, b).unwrap().finite_perimeter() > base);
        prop_assert!(make_peanut(a, b + d).unwrap().finite_perimeter() > base);
    }

    #[test]
    fn partition_files_round_trip(p in construction()) {
        let text = partition_to_json(&p).unwrap();
        let q = partition_from_json(&text).unwrap();
        prop_assert!(q.validate_topology().valid);
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(partition_to_json(&q).unwrap(), text);
    }

    #[test]
    fn sphere_sites_are_equidistant(d in 1usize..=10, k in 0usize..12, angle in -PI..PI) {
        let n = 2 + k % (d + 1);
        let sites = make_equidistant_sites(n, d).unwrap();
        prop_assert!(sites.gram_defect() <= 1e-12);
        let sp = SpherePartition::new(sites).rotated_in_plane(0, d, angle);
        prop_assert!(sp.orthogonality_defect() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn anneal_conserves_counts_and_frozen_cells(m in 0.3..1.5f64, seed in any::<u64>()) {
        let grid = GridPartition::rasterize(&make_lens(m).unwrap(), 32, 5.0).unwrap();
        let sched = AnnealSchedule { sweeps: 8, trace_points: 4, ..AnnealSchedule::default() };
        let res = anneal(&grid, &sched, seed).unwrap();
        let after = res.grid.counts();
        for (k, t) in grid.targets.iter().enumerate() {
            if let Some(t) = t {
                prop_assert_eq!(after[k], *t);
            }
        }
        for (i, f) in grid.frozen.iter().enumerate() {
            if *f {
                prop_assert_eq!(grid.labels[i], res.grid.labels[i]);
            }
        }
    }

    #[test]
    fn volume_fixing_respects_the_bound(labels in 2usize..6, seed in any::<u64>()) {
        let (grid, a, balls) = random_variation_instance(64, labels, seed);
        let out = volume_fixing_variation(&grid, &a, &balls).unwrap();
        prop_assert!(out.within_bound, "{} > {}", out.delta_perimeter, out.bound);
        let (before, after) = (grid.counts(), out.grid.counts());
        for k in 0..labels {
            let shift = (after[k] as f64 - before[k] as f64) * out.h * out.h;
            prop_assert!((shift - out.applied[k]).abs() <= 1e-9);
        }
    }
}

#[test]
fn steiner_length_is_increasing() {
    let mut prev = steiner_ell(0.0);
    for k in 1..=900 {
        let v = steiner_ell(k as f64 / 1000.0);
        assert!(v > prev, "rho = {}", k as f64 / 1000.0);
        prev = v;
    }
}

#[test]
fn steiner_lower_inequality() {
    let bad: Vec<(f64, f64)> = (1..=300)
        .map(|k| k as f64 / 1000.0)
        .map(|r| (r, steiner_ell(r) - (3.0 + 0.75 * r * r)))
        .filter(|&(_, gap)| gap < -1e-9)
        .collect();
    assert!(bad.is_empty(), "{} of 300 radii violate ell >= 3 + 3/4 rho^2, e.g. {:?}", bad.len(), bad.first());
}
