use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::sphere::chordal_distance;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn square() -> RationalMap {
    RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap()
}

/// (z^2 - 2) / z^2
fn lattes() -> RationalMap {
    RationalMap::from_real(&[-2.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap()
}

fn direct_lattes(z: Option<Complex64>) -> Option<Complex64> {
    // independent substitution oracle on the extended plane
    match z {
        None => Some(c(1.0, 0.0)),
        Some(z) if z == c(0.0, 0.0) => None,
        Some(z) => Some((z * z - 2.0) / (z * z)),
    }
}

#[test]
fn evaluate_examples() {
    let f = square();
    assert!(f.evaluate(&SpherePoint::from_re(3.0)).approx_eq(&SpherePoint::from_re(9.0)));
    assert!(f.evaluate(&SpherePoint::infinity()).is_infinity());
    let g = lattes();
    let mut x = SpherePoint::zero();
    let mut oracle = Some(c(0.0, 0.0));
    for want in [None, Some(c(1.0, 0.0)), Some(c(-1.0, 0.0)), Some(c(-1.0, 0.0))] {
        x = g.evaluate(&x);
        oracle = direct_lattes(oracle);
        assert_eq!(oracle, want);
        match want {
            None => assert!(x.is_infinity()),
            Some(w) => assert!(x.approx_eq(&SpherePoint::from_complex(w))),
        }
    }
}

#[test]
fn invalid_maps_are_rejected() {
    // common factor z
    assert!(RationalMap::from_real(&[0.0, 1.0, 1.0], &[0.0, 1.0, 0.0]).is_err());
    // degree one
    assert!(RationalMap::from_real(&[0.0, 1.0], &[1.0, 0.0]).is_err());
    assert!(RationalMap::from_real(&[0.0, 0.0, 0.0], &[1.0]).is_err());
}

#[test]
fn derivative_examples() {
    let d = lattes().sphere_derivative(&SpherePoint::from_re(-1.0));
    assert!((d.value - c(-4.0, 0.0)).norm() < 1e-12);
    assert_eq!(d.input_chart, Chart::Finite);
    assert_eq!(square().sphere_derivative(&SpherePoint::zero()).value, c(0.0, 0.0));
    let at_inf = square().sphere_derivative(&SpherePoint::infinity());
    assert_eq!(at_inf.value, c(0.0, 0.0));
    assert_eq!(at_inf.input_chart, Chart::Infinite);
    assert_eq!(at_inf.output_chart, Chart::Infinite);
}

fn has_point(set: &CriticalSet, x: &SpherePoint, mult: usize) -> bool {
    set.points.iter().any(|(p, m)| *m == mult && chordal_distance(p, x) < 1e-7)
}

#[test]
fn critical_point_examples() {
    let s = square().critical_points().unwrap();
    assert_eq!(s.points.len(), 2);
    assert!(has_point(&s, &SpherePoint::zero(), 1) && has_point(&s, &SpherePoint::infinity(), 1));
    let l = lattes().critical_points().unwrap();
    assert!(has_point(&l, &SpherePoint::zero(), 1) && has_point(&l, &SpherePoint::infinity(), 1));
    let cube = RationalMap::from_real(&[0.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.0]).unwrap();
    let k = cube.critical_points().unwrap();
    assert_eq!(k.total_multiplicity(), 4);
    assert!(has_point(&k, &SpherePoint::zero(), 2) && has_point(&k, &SpherePoint::infinity(), 2));
}

#[test]
fn orbit_examples() {
    let f = square();
    let o = f.iterate_orbit(&SpherePoint::from_re(1.0), 5);
    assert_eq!(o.steps(), 5);
    assert!(o.points.iter().all(|p| p.approx_eq(&SpherePoint::from_re(1.0))));
    let x = SpherePoint::on_circle(1.0 / 3.0);
    let o = f.iterate_orbit(&x, 2);
    assert!(chordal_distance(&o.points[2], &x) < 1e-14);
    assert!(chordal_distance(&o.points[1], &SpherePoint::on_circle(2.0 / 3.0)) < 1e-14);
    assert!(o.max_step_error(&f) < 1e-9);
    let l = lattes().iterate_orbit(&SpherePoint::zero(), 3);
    assert!(l.points[1].is_infinity());
    assert!(l.points[3].approx_eq(&SpherePoint::from_re(-1.0)));
}

#[test]
fn compose_matches_iteration() {
    let f = lattes();
    let ff = f.compose(&f).unwrap();
    assert_eq!(ff.degree(), 4);
    let x = SpherePoint::from_complex(c(0.3, 0.8));
    assert!(chordal_distance(&ff.evaluate(&x), &f.iterate(&x, 2)) < 1e-12);
}

#[test]
fn map_json_schema() {
    let s = serde_json::to_string(&lattes()).unwrap();
    assert_eq!(s, r#"{"p":[[-2.0,0.0],[0.0,0.0],[1.0,0.0]],"q":[[0.0,0.0],[0.0,0.0],[1.0,0.0]]}"#);
    let back: RationalMap = serde_json::from_str(&s).unwrap();
    assert_eq!(back, lattes());
    assert!(serde_json::from_str::<RationalMap>(r#"{"p":[[0,0],[1,0]],"q":[[0,0],[1,0]]}"#).is_err());
}

#[test]
fn postcritical_scan_of_lattes() {
    let data = postcritical_scan(&lattes(), 50, 1e-6).unwrap();
    assert!(data.orbits.iter().all(|o| o.flag == LandingFlag::LandsOnCycle));
    let steps = |x: SpherePoint| {
        data.orbits
            .iter()
            .find(|o| chordal_distance(&o.critical_point, &x) < 1e-9)
            .and_then(|o| o.landing.as_ref())
            .map(|l| l.steps)
    };
    assert_eq!(steps(SpherePoint::zero()), Some(3));
    assert_eq!(steps(SpherePoint::infinity()), Some(2));
    let cert = is_strictly_pcf(&data).unwrap();
    assert!(cert.verdict, "{:?}", cert.reasons);
    for e in &cert.entries {
        assert_eq!(e.period, 1);
        assert!((e.multiplier - c(-4.0, 0.0)).norm() < 1e-8);
        assert!(e.landing_point.approx_eq(&SpherePoint::from_re(-1.0)));
    }
    assert!(cert.margins.all_critical_simple);
}

#[test]
fn square_and_chebyshev_are_not_strictly_pcf() {
    let cert = is_strictly_pcf(&postcritical_scan(&square(), 20, 1e-6).unwrap()).unwrap();
    assert!(!cert.verdict);
    let cheb = RationalMap::from_real(&[-2.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap();
    let data = postcritical_scan(&cheb, 20, 1e-6).unwrap();
    let fin = data.orbits.iter().find(|o| !o.critical_point.is_infinity()).unwrap();
    assert_eq!(fin.landing.as_ref().unwrap().steps, 2);
    assert!(!is_strictly_pcf(&data).unwrap().verdict);
}

#[test]
fn escaping_critical_orbit_is_not_certified() {
    let f = RationalMap::from_real(&[10.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap();
    let data = postcritical_scan(&f, 20, 1e-6).unwrap();
    let fin = data.orbits.iter().find(|o| !o.critical_point.is_infinity()).unwrap();
    if let Some(l) = &fin.landing {
        // the orbit can only settle on the superattracting point at infinity
        assert!(crate::sphere::chordal_distance(&l.cycle.points[0], &SpherePoint::infinity()) < 1e-8);
    }
    match is_strictly_pcf(&data) {
        Ok(cert) => assert!(!cert.verdict),
        Err(e) => assert!(e.is_undecided()),
    }
}

fn arb_complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| c(a, b))
}

fn arb_map() -> impl Strategy<Value = RationalMap> {
    (prop::collection::vec(arb_complex(), 3), prop::collection::vec(arb_complex(), 3))
        .prop_filter_map("valid map", |(p, q)| RationalMap::new(p, q).ok())
        .prop_filter("well separated", |f| f.normalized_resultant() > 1e-3)
}

fn arb_point() -> impl Strategy<Value = SpherePoint> {
    arb_complex().prop_map(SpherePoint::from_complex)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covering_degree(f in arb_map(), y in arb_point()) {
        let pre = f.preimages(&y).unwrap();
        prop_assert_eq!(pre.len(), f.degree());
        for x in pre {
            prop_assert!(chordal_distance(&f.evaluate(&x), &y) < 1e-8);
        }
    }

    #[test]
    fn chain_rule(f in arb_map(), x in arb_point()) {
        let ff = f.compose(&f).unwrap();
        let y = f.evaluate(&x);
        let z = f.evaluate(&y);
        let whole = ff.derivative_in_charts(&x, x.chart(), z.chart());
        let parts = f.derivative_in_charts(&x, x.chart(), y.chart()) * f.derivative_in_charts(&y, y.chart(), z.chart());
        prop_assume!(parts.norm() > 1e-6 && parts.norm() < 1e6);
        prop_assert!((whole - parts).norm() <= 1e-8 * parts.norm().max(1.0));
    }

    #[test]
    fn critical_multiplicities_sum(f in arb_map()) {
        prop_assert_eq!(f.critical_points().unwrap().total_multiplicity(), 2 * f.degree() - 2);
    }

    #[test]
    fn conjugation_moves_critical_points(f in arb_map(), a in arb_complex(), b in arb_complex(), t in arb_complex()) {
        let m = [[a + c(1.5, 0.0), b], [t * 0.3, c(1.0, 0.0)]];
        prop_assume!(((m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm()) > 0.2);
        let g = MobiusMap::new(m).unwrap();
        let h = f.conjugate(&g).unwrap();
        let mine = f.critical_points().unwrap();
        let theirs = h.critical_points().unwrap();
        prop_assume!(mine.all_simple());
        for (p, _) in &mine.points {
            let gp = g.apply(p);
            prop_assert!(theirs.points.iter().any(|(q, _)| chordal_distance(q, &gp) < 1e-7));
        }
    }
}
