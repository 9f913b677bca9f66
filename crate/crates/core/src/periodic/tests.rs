use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::measures::wasserstein;
use crate::ratmap::{is_strictly_pcf, postcritical_scan};

fn square() -> RationalMap {
    RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap()
}

fn lattes() -> RationalMap {
    RationalMap::from_real(&[-2.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap()
}

fn basilica() -> RationalMap {
    RationalMap::from_real(&[-1.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap()
}

#[test]
fn fixed_points_of_square() {
    let s = find_periodic(&square(), 1, &Seeds::Exhaustive).unwrap();
    assert_eq!(s.orbits.len(), 3);
    assert_eq!(s.expected_points, Some(3));
    let mut mults: Vec<f64> = s.orbits.iter().map(|o| o.multiplier.norm()).collect();
    mults.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(mults[0] < 1e-12 && mults[1] < 1e-12 && (mults[2] - 2.0).abs() < 1e-12);
    for want in [SpherePoint::zero(), SpherePoint::from_re(1.0), SpherePoint::infinity()] {
        assert!(s.orbits.iter().any(|o| o.points[0].approx_eq(&want)));
    }
}

#[test]
fn basilica_two_cycle_is_superattracting() {
    let s = find_periodic(&basilica(), 2, &Seeds::Exhaustive).unwrap();
    assert_eq!(s.orbits.len(), 1);
    let o = &s.orbits[0];
    assert!(o.multiplier.norm() < 1e-12);
    assert_eq!(o.classification, Classification::Attracting);
    assert!(o.contains(&SpherePoint::zero(), 1e-10) && o.contains(&SpherePoint::from_re(-1.0), 1e-10));
    // the fixed points show up as divisor-period solutions
    assert!(!s.divisor_orbits.is_empty());
}

#[test]
fn lattes_fixed_point_multiplier() {
    let s = find_periodic(&lattes(), 1, &Seeds::Exhaustive).unwrap();
    let p = s.orbits.iter().find(|o| o.points[0].approx_eq(&SpherePoint::from_re(-1.0))).unwrap();
    assert!((p.multiplier - Complex64::new(-4.0, 0.0)).norm() < 1e-10);
    assert!(p.is_repelling());
    // oracle: roots of the numerator of f(z) - z, i.e. z^3 - z^2 + 2
    let roots = crate::poly::roots(&[2.0, 0.0, -1.0, 1.0].map(|x| Complex64::new(x, 0.0))).unwrap();
    for r in roots {
        assert!(s.orbits.iter().any(|o| o.points[0].approx_eq(&SpherePoint::from_complex(r))));
    }
}

#[test]
fn exhaustive_counts_match_expected() {
    for n in 1..=6 {
        let s = find_periodic(&lattes(), n, &Seeds::Exhaustive).unwrap();
        assert_eq!(s.found_points(), s.expected_points.unwrap(), "period {n}");
    }
    assert_eq!(exact_period_count(2, 4), 12);
    assert!(find_periodic(&lattes(), 14, &Seeds::Exhaustive).is_err());
}

#[test]
fn seeded_search_reports_failures_without_aborting() {
    let seeds = Seeds::Points(vec![SpherePoint::from_re(0.02), SpherePoint::from_re(-0.98)]);
    let s = find_periodic(&basilica(), 2, &seeds).unwrap();
    assert_eq!(s.orbits.len(), 1);
    assert_eq!(s.failures.len(), 0);
}

#[test]
fn classification_thresholds() {
    assert_eq!(Classification::of(Complex64::new(1.0 + 2e-8, 0.0)), Classification::Repelling);
    assert_eq!(Classification::of(Complex64::new(0.5, 0.0)), Classification::Attracting);
    assert_eq!(Classification::of(Complex64::new(-1.0, 1e-9)), Classification::ParabolicCandidate);
    let irrational = Complex64::from_polar(1.0, std::f64::consts::TAU * (5f64.sqrt() - 1.0) / 2.0);
    assert_eq!(Classification::of(irrational), Classification::Indifferent);
}

#[test]
fn periodic_measure_examples() {
    let f = basilica();
    let s = find_periodic(&f, 2, &Seeds::Exhaustive).unwrap();
    let pm = periodic_measure(&s.orbits[0]);
    assert_eq!(pm.measure.weights(), &[0.5, 0.5]);
    let pushed = pm.measure.push_forward(|x| f.evaluate(x));
    assert!(wasserstein(&pm.measure, &pushed).unwrap() < 1e-15);
    // e_n of a cycle point equals the cycle measure when the period divides n
    let e4 = crate::measures::DiscreteMeasure::uniform(f.iterate_orbit(&pm.orbit.points[0], 3).points).unwrap();
    assert!(wasserstein(&pm.measure, &e4).unwrap() < 1e-15);
    let fixed = periodic_measure(&find_periodic(&square(), 1, &Seeds::Exhaustive).unwrap().orbits[0]);
    assert_eq!(fixed.measure.len(), 1);
}

#[test]
fn close_exact_periodic_orbit() {
    let f = square();
    let orbit = f.iterate_orbit(&SpherePoint::on_circle(1.0 / 7.0), 3);
    let r = close_orbit(&f, &orbit, 1e-3).unwrap();
    assert!(r.shadow_distance < 1e-12);
    assert!(r.measure_gap < 1e-12);
}

#[test]
fn close_perturbed_angle_doubling_orbit() {
    let f = square();
    let orbit = f.iterate_orbit(&SpherePoint::on_circle(1.0 / 7.0 + 1e-9), 3);
    let r = close_orbit(&f, &orbit, 1e-3).unwrap();
    assert_eq!(r.periodic.period, 3);
    assert!(r.shadow_distance < 1e-9 * 8.0 * std::f64::consts::TAU);
    assert!(r.measure_gap <= r.shadow_distance + r.measure_gap_tolerance + 1e-15);
    assert!(r.periodic.contains(&SpherePoint::on_circle(1.0 / 7.0), 1e-12));
}

#[test]
fn close_without_return_fails() {
    let f = square();
    let orbit = f.iterate_orbit(&SpherePoint::on_circle(0.1234), 3);
    assert!(matches!(close_orbit(&f, &orbit, 1e-6), Err(Error::NoNearReturn { .. })));
}

#[test]
fn transit_single_target_returns_target() {
    let f = square();
    let one = PeriodicOrbit::certify(&f, &[SpherePoint::from_re(1.0)]).unwrap();
    let r = transit_periodic(&f, &[one.clone()], &[1.0], 100, &TransitOptions::default()).unwrap();
    assert_eq!(r.orbit, one);
    assert!(r.gap < 1e-8);
}

fn circle_targets(f: &RationalMap) -> Vec<PeriodicOrbit> {
    let one = PeriodicOrbit::certify(f, &[SpherePoint::from_re(1.0)]).unwrap();
    let two = PeriodicOrbit::certify(f, &[SpherePoint::on_circle(1.0 / 3.0), SpherePoint::on_circle(2.0 / 3.0)]).unwrap();
    vec![one, two]
}

#[test]
fn transit_between_fixed_point_and_two_cycle() {
    let f = square();
    let targets = circle_targets(&f);
    let r = transit_periodic(&f, &targets, &[0.5, 0.5], 200, &TransitOptions::default()).unwrap();
    assert!(r.gap < 0.1, "gap {}", r.gap);
    assert!(r.orbit.is_repelling());
    assert!(!r.postcritical_flags.iter().any(|&b| b));
    let skew = transit_periodic(&f, &targets, &[0.9, 0.1], 200, &TransitOptions::default()).unwrap();
    assert!((skew.dwell_fractions[0] - 0.9).abs() <= 2.0 / 200.0);
    assert!((r.dwell_fractions[0] - 0.5).abs() <= 2.0 / 200.0);
}

#[test]
fn transit_rejects_bad_coefficients() {
    let f = square();
    let t = circle_targets(&f);
    assert!(transit_periodic(&f, &t, &[0.7, 0.7], 100, &TransitOptions::default()).is_err());
    let attracting = PeriodicOrbit::certify(&f, &[SpherePoint::zero()]).unwrap();
    assert!(transit_periodic(&f, &[attracting], &[1.0], 100, &TransitOptions::default()).is_err());
}

#[test]
fn pcf_map_has_only_repelling_cycles() {
    let f = lattes();
    assert!(is_strictly_pcf(&postcritical_scan(&f, 50, 1e-6).unwrap()).unwrap().verdict);
    for n in 1..=4 {
        for o in find_periodic(&f, n, &Seeds::Exhaustive).unwrap().orbits {
            assert!(o.multiplier.norm() > 1.0 + 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn multipliers_are_conjugation_invariant(re in -1.0..1.0f64, im in -1.0..1.0f64, s in 0.2..2.0f64) {
        let f = lattes();
        let g = MobiusMap::new([
            [Complex64::new(s, 0.0), Complex64::new(re, im)],
            [Complex64::new(0.3 * im, 0.1), Complex64::new(1.0, 0.0)],
        ]).unwrap();
        let h = f.conjugate(&g).unwrap();
        for o in find_periodic(&f, 2, &Seeds::Exhaustive).unwrap().orbits {
            let image = cycle_from_seed(&h, &g.apply(&o.points[0]), 2).unwrap();
            prop_assert!((image.multiplier - o.multiplier).norm() < 1e-7 * o.multiplier.norm().max(1.0));
        }
    }
}
