//! Acceptance suite: one test and one printed PASS/FAIL line per criterion.
//! The lines go straight to stdout, so they show up without `--nocapture`.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratdyn::bifurcation::{
    scenario_driver, solve_parabolic, solve_preperiodic, transversality_rank, Builtin, FamilySpec, ParabolicOptions,
    ParabolicSeed, PreperiodicOptions, ScenarioBudgets, ScenarioReport,
};
use ratdyn::measures::{coarsen, meta_wasserstein, wasserstein, MetaMeasure, ReferenceSampler};
use ratdyn::orbitstat::{coarse_empirical, law_sequence, CircleRestriction, DEFAULT_COARSEN};
use ratdyn::periodic::{close_orbit, find_periodic, transit_periodic, Seeds, TransitOptions};
use ratdyn::ratmap::{is_strictly_pcf, postcritical_scan};
use ratdyn::{DiscreteMeasure, MobiusMap, PeriodicOrbit, RationalMap, SpherePoint};

fn verdict(n: &str, name: &str, pass: bool, elapsed: Duration, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    // Bypasses libtest capture, which only intercepts the print macros.
    let line = format!("criterion {n:>2} [{tag}] {name} ({:.1} s): {detail}\n", elapsed.as_secs_f64());
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn lattes() -> RationalMap {
    RationalMap::from_real(&[-2.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap()
}

fn square() -> RationalMap {
    RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap()
}

fn on_threads<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(job)
}

fn random_point(rng: &mut ChaCha8Rng) -> SpherePoint {
    if rng.gen_bool(0.05) {
        return SpherePoint::infinity();
    }
    let r = rng.gen_range(0.0..3.0f64);
    SpherePoint::from_complex(Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU)))
}

fn random_measure(rng: &mut ChaCha8Rng, max_atoms: usize) -> DiscreteMeasure {
    let n = rng.gen_range(1..=max_atoms);
    let atoms = (0..n).map(|_| random_point(rng)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    DiscreteMeasure::new(atoms, raw.iter().map(|w| w / total).collect()).unwrap()
}

/// Minimum over all permutations, by Heap's algorithm.
fn brute_force_assignment(a: &[SpherePoint], b: &[SpherePoint]) -> f64 {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| ratdyn::chordal_distance(&a[i], &b[j])).sum::<f64>() / n as f64;
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

#[test]
fn criterion_01_transport_exactness() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.gen_range(1..=8);
        let a: Vec<SpherePoint> = (0..n).map(|_| random_point(&mut rng)).collect();
        let b: Vec<SpherePoint> = (0..n).map(|_| random_point(&mut rng)).collect();
        let d = wasserstein(&DiscreteMeasure::uniform(a.clone()).unwrap(), &DiscreteMeasure::uniform(b.clone()).unwrap()).unwrap();
        worst = worst.max((d - brute_force_assignment(&a, &b)).abs());
    }
    let el = t.elapsed();
    verdict("1", "transport exactness", worst <= 1e-10 && el.as_secs_f64() < 10.0, el, format!("max |exact - brute force| = {worst:e} over 500 pairs"));
}

#[test]
fn criterion_02_metric_axioms() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut sym, mut tri) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..200 {
        let [a, b, c] = [0; 3].map(|_| random_measure(&mut rng, 10));
        let (ab, ba, bc, ac) = (wasserstein(&a, &b).unwrap(), wasserstein(&b, &a).unwrap(), wasserstein(&b, &c).unwrap(), wasserstein(&a, &c).unwrap());
        sym = sym.max((ab - ba).abs());
        tri = tri.max(ac - ab - bc);
    }
    let random_meta = |rng: &mut ChaCha8Rng| {
        let k = rng.gen_range(1..=4);
        let atoms: Vec<DiscreteMeasure> = (0..k).map(|_| random_measure(rng, 4)).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        MetaMeasure::new(atoms, raw.iter().map(|w| w / total).collect()).unwrap()
    };
    let (mut msym, mut mtri) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..200 {
        let [a, b, c] = [0; 3].map(|_| random_meta(&mut rng));
        let (ab, ba, bc, ac) = (
            meta_wasserstein(&a, &b).unwrap(),
            meta_wasserstein(&b, &a).unwrap(),
            meta_wasserstein(&b, &c).unwrap(),
            meta_wasserstein(&a, &c).unwrap(),
        );
        msym = msym.max((ab - ba).abs());
        mtri = mtri.max(ac - ab - bc);
    }
    let el = t.elapsed();
    let pass = sym <= 1e-9 && tri <= 1e-9 && msym <= 1e-9 && mtri <= 1e-9 && el.as_secs_f64() < 30.0;
    verdict(
        "2",
        "metric axioms",
        pass,
        el,
        format!("d_w: asymmetry {sym:e}, triangle excess {tri:e}; meta: asymmetry {msym:e}, triangle excess {mtri:e}"),
    );
}

#[test]
fn criterion_03_strictly_pcf_certificate() {
    let t = Instant::now();
    let cert = is_strictly_pcf(&postcritical_scan(&lattes(), 200, 1e-6).unwrap()).unwrap();
    let lands = cert.entries.len() == 2
        && cert.entries.iter().all(|e| {
            e.period == 1 && (e.cycle[0].to_complex().unwrap() + 1.0).norm() < 1e-10 && (e.multiplier + 4.0).norm() < 1e-8
        });
    let square_verdict = is_strictly_pcf(&postcritical_scan(&square(), 200, 1e-6).unwrap()).map(|c| c.verdict);
    let el = t.elapsed();
    let pass = cert.verdict && lands && square_verdict == Ok(false) && el.as_secs_f64() < 1.0;
    let mults: Vec<String> = cert.entries.iter().map(|e| format!("{:.10}", e.multiplier)).collect();
    verdict("3", "strictly-pcf certificate", pass, el, format!("lattès verdict {}, multipliers {mults:?}; z^2 verdict {square_verdict:?}", cert.verdict));
}

#[test]
fn criterion_04_repelling_only() {
    let t = Instant::now();
    let f = lattes();
    let mut smallest = f64::INFINITY;
    let mut complete = true;
    let mut counts = Vec::new();
    for n in 1..=6 {
        let s = find_periodic(&f, n, &Seeds::Exhaustive).unwrap();
        complete &= s.expected_points.is_some_and(|e| e == s.found_points());
        counts.push(s.found_points());
        for o in s.orbits.iter().chain(&s.divisor_orbits) {
            smallest = smallest.min(o.multiplier.norm());
        }
    }
    let el = t.elapsed();
    let pass = complete && smallest > 1.0 + 1e-6 && el.as_secs_f64() < 60.0;
    verdict("4", "repelling-only cycles up to period 6", pass, el, format!("points per period {counts:?}, all found {complete}, min |multiplier| {smallest}"));
}

/// d_w(e_n, reference) + coarsening bound for 100 circle starts of the doubling map.
fn circle_fixture_distances() -> Vec<f64> {
    let f = CircleRestriction::new(square()).unwrap();
    let reference = DiscreteMeasure::uniform((0..256).map(|k| SpherePoint::on_circle((k as f64 + 0.5) / 256.0)).collect()).unwrap();
    let sampler = ReferenceSampler::circle(5);
    (0..100)
        .map(|i| {
            let e = coarse_empirical(&f, &sampler.draw(i), &[100_000], DEFAULT_COARSEN).unwrap().remove(0);
            wasserstein(&e.measure, &reference).unwrap() + e.bound()
        })
        .collect()
}

#[test]
fn criterion_05_ergodic_convergence() {
    let t = Instant::now();
    let d = circle_fixture_distances();
    let good = d.iter().filter(|&&x| x < 0.05).count();
    let el = t.elapsed();
    let worst = d.iter().copied().fold(0.0, f64::max);
    verdict("5", "ergodic convergence on the circle", good >= 95 && el.as_secs_f64() < 120.0, el, format!("{good}/100 starts below 0.05 (worst {worst:.4})"));
}

#[test]
fn criterion_06_identity_law_constancy() {
    let t = Instant::now();
    let seq = law_sequence(&MobiusMap::identity(), &ReferenceSampler::circle(6), 32, &[10, 100, 1000], DEFAULT_COARSEN).unwrap();
    let mut worst_excess = f64::NEG_INFINITY;
    for j in 0..3 {
        for k in 0..3 {
            let d = meta_wasserstein(&seq.laws[j], &seq.laws[k]).unwrap();
            worst_excess = worst_excess.max(d - (seq.tolerances[j] + seq.tolerances[k]));
        }
    }
    let el = t.elapsed();
    verdict(
        "6",
        "identity law constancy",
        worst_excess <= 0.0 && el.as_secs_f64() < 60.0,
        el,
        format!("max(meta d_w - combined tolerance) = {worst_excess:e}, tolerances {:?}", seq.tolerances),
    );
}

/// Serialized closing results (or errors) for 50 area starts.
fn closing_runs() -> Vec<Result<ratdyn::periodic::ClosingResult, ratdyn::Error>> {
    let f = lattes();
    let sampler = ReferenceSampler::area(7);
    (0..50).map(|i| close_orbit(&f, &f.iterate_orbit(&sampler.draw(i), 2000), 1e-3)).collect()
}

#[test]
fn criterion_07_orbit_closing() {
    let t = Instant::now();
    let runs = closing_runs();
    let ok: Vec<_> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let violations = ok.iter().filter(|r| !(r.measure_gap <= r.shadow_distance + r.measure_gap_tolerance)).count();
    let el = t.elapsed();
    let pass = ok.len() >= 30 && violations == 0 && el.as_secs_f64() < 300.0;
    verdict("7", "orbit closing at desk scale", pass, el, format!("{}/50 closed, {violations} violate gap <= shadow + tolerance", ok.len()));
}

#[test]
fn criterion_08_convex_combination_transit() {
    let t = Instant::now();
    let f = square();
    let one = PeriodicOrbit::certify(&f, &[SpherePoint::from_re(1.0)]).unwrap();
    let two = PeriodicOrbit::certify(&f, &[SpherePoint::on_circle(1.0 / 3.0), SpherePoint::on_circle(2.0 / 3.0)]).unwrap();
    let r = transit_periodic(&f, &[one, two.clone()], &[0.5, 0.5], 1000, &TransitOptions::default()).unwrap();
    // independent recomputation of the gap from the returned orbit
    let target = DiscreteMeasure::new(
        vec![SpherePoint::from_re(1.0), two.points[0], two.points[1]],
        vec![0.5, 0.25, 0.25],
    )
    .unwrap();
    let orbit = DiscreteMeasure::uniform(r.orbit.points.clone()).unwrap();
    let c = coarsen(&orbit, 1024).unwrap();
    let gap = wasserstein(&c.measure, &target).unwrap() + c.bound();
    let el = t.elapsed();
    let pass = gap < 0.1 && r.gap < 0.1 && el.as_secs_f64() < 120.0;
    verdict("8", "convex-combination transit", pass, el, format!("period {}, reported gap {:.4}, recomputed bound {gap:.4}", r.period, r.gap));
}

#[test]
fn criterion_09_parabolic_ground_truth() {
    let t = Instant::now();
    let fam = FamilySpec::builtin(Builtin::Quadratic, 1.0).unwrap();
    let seed = ParabolicSeed::new(Complex64::new(0.3, 0.0), SpherePoint::from_re(0.45));
    let r = solve_parabolic(&fam, 1, &[seed], None, &ParabolicOptions::default()).unwrap();
    let cusp = r.solutions.iter().any(|s| {
        (s.lambda - Complex64::new(0.25, 0.0)).norm() < 1e-12
            && (s.point.to_complex().unwrap() - Complex64::new(0.5, 0.0)).norm() < 1e-6
            && s.residuals.iter().all(|&x| x < 1e-12)
    });
    let seed2 = ParabolicSeed::new(Complex64::new(-0.7, 0.0), SpherePoint::from_re(-0.45));
    let r2 = solve_parabolic(&fam, 2, &[seed2], None, &ParabolicOptions::default()).unwrap();
    let degenerate = r2
        .exact_period_failures
        .iter()
        .any(|e| e.minimal_period == 1 && (e.lambda - Complex64::new(-0.75, 0.0)).norm() < 1e-3);
    let el = t.elapsed();
    let detail = format!(
        "period 1: {:?}; period 2: {} exact-period failures, {} solutions",
        r.solutions.iter().map(|s| (s.lambda, s.residuals)).collect::<Vec<_>>(),
        r2.exact_period_failures.len(),
        r2.solutions.len()
    );
    verdict("9", "parabolic solver ground truth", cusp && degenerate && r2.solutions.is_empty() && el.as_secs_f64() < 5.0, el, detail);
}

#[test]
fn criterion_10_misiurewicz_solve() {
    let t = Instant::now();
    let fam = FamilySpec::builtin(Builtin::Quadratic, 2.5).unwrap();
    let crit = fam.base().critical_points().unwrap();
    let zero = crit.points.iter().position(|(c, _)| !c.is_infinity()).unwrap();
    let beta = PeriodicOrbit::certify(fam.base(), &[SpherePoint::from_re(1.0)]).unwrap();
    let roots = solve_preperiodic(&fam, zero, 2, &beta, &PreperiodicOptions::default()).unwrap();
    let err = roots.iter().map(|r| (r.lambda - Complex64::new(-2.0, 0.0)).norm()).fold(f64::INFINITY, f64::min);
    let el = t.elapsed();
    verdict("10", "Misiurewicz solve", err <= 1e-9 && el.as_secs_f64() < 5.0, el, format!("|λ + 2| = {err:e}"));
}

#[test]
fn criterion_11_transversality_rank() {
    let t = Instant::now();
    let f = lattes();
    let data = postcritical_scan(&f, 200, 1e-6).unwrap();
    let a = transversality_rank(&f, &data, 1e-5).unwrap();
    let b = transversality_rank(&f, &data, 5e-6).unwrap();
    let ratio = |r: &ratdyn::bifurcation::TransversalityReport| r.singular_values[1] / r.singular_values[0];
    let el = t.elapsed();
    let pass = a.rank_estimate == 2 && b.rank_estimate == 2 && ratio(&a) > 1e-4 && el.as_secs_f64() < 30.0;
    verdict("11", "transversality rank", pass, el, format!("rank {} / {} (halved step), σ2/σ1 = {:.4e}", a.rank_estimate, b.rank_estimate, ratio(&a)));
}

fn minus_one(f: &RationalMap) -> PeriodicOrbit {
    PeriodicOrbit::certify(f, &[SpherePoint::from_re(-1.0)]).unwrap()
}

/// The scenario run shared by criteria 12 and 13 (one worker thread).
fn scenario_single_thread() -> &'static (ScenarioReport, Duration) {
    static RUN: OnceLock<(ScenarioReport, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let f = lattes();
        let t = Instant::now();
        let r = on_threads(1, || scenario_driver(&f, &minus_one(&f), &ScenarioBudgets::default()).unwrap());
        (r, t.elapsed())
    })
}

#[test]
fn criterion_12_end_to_end_scenario() {
    let (r, el) = scenario_single_thread();
    let mut residuals = Vec::new();
    if let Some(p) = &r.preperiodic {
        residuals.push(p.residual);
        residuals.extend(&p.kept_residuals);
    }
    let mut near = Vec::new();
    if let Some(para) = &r.parabolic {
        for s in &para.solutions {
            residuals.extend(s.residuals.iter().chain(&s.verification));
            if s.cycle_to_target <= 0.2 {
                near.push(s);
            }
        }
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    let stages = r.failure.is_none() && r.family.is_some() && r.preperiodic.is_some() && r.parabolic.is_some();
    let chain = stages && !residuals.is_empty() && worst < 1e-8 && !near.is_empty();
    let diag: Vec<_> = r.diagnostics.iter().filter(|d| d.cycle_to_target <= 0.2 && d.starts == 50).collect();
    let statistics = diag.iter().any(|d| d.matched_fraction >= 0.8);
    let detail = format!(
        "stages (a)-(c) {} (worst certificate {worst:e}, {} solutions within 0.2 of the target, best {:.3}); \
         stage (d) {}: matched fraction {:?}, median nearest-center distance {:?}",
        if chain { "ok" } else { "incomplete" },
        near.len(),
        near.iter().map(|s| s.cycle_to_target).fold(f64::INFINITY, f64::min),
        if statistics { "ok" } else { "below 80%" },
        diag.iter().map(|d| d.matched_fraction).collect::<Vec<_>>(),
        diag.iter()
            .map(|d| {
                let mut v = d.nearest_to_cycle.clone();
                v.sort_by(f64::total_cmp);
                v.get(v.len() / 2).copied().unwrap_or(f64::NAN)
            })
            .collect::<Vec<_>>(),
    );
    verdict("12", "end-to-end scenario", chain && statistics && el.as_secs_f64() < 1800.0, *el, detail);
}

#[test]
fn criterion_13_determinism() {
    let t = Instant::now();
    let fixture = |threads| on_threads(threads, || serde_json::to_string(&circle_fixture_distances()).unwrap());
    let same5 = fixture(1) == fixture(3);
    let closing = |threads| {
        on_threads(threads, || {
            let runs: Vec<_> = closing_runs().into_iter().map(|r| r.map_err(|e| e.to_string())).collect();
            serde_json::to_string(&runs).unwrap()
        })
    };
    let same7 = closing(1) == closing(3);
    let f = lattes();
    let first = serde_json::to_string(&scenario_single_thread().0).unwrap();
    let second = on_threads(3, || serde_json::to_string(&scenario_driver(&f, &minus_one(&f), &ScenarioBudgets::default()).unwrap()).unwrap());
    let same12 = first == second;
    let el = t.elapsed();
    verdict("13", "determinism across worker counts", same5 && same7 && same12, el, format!("criterion 5 {same5}, 7 {same7}, 12 {same12}"));
}
