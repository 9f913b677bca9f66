//! The full chain around a strictly pcf map: a one-parameter family keeping
//! the other critical relations, a parameter where the active critical point
//! lands on the target cycle, parabolic cycles with growing dwell near that
//! cycle, and orbit statistics of the resulting parabolic maps.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::continuation::continue_cycle;
use super::family::FamilySpec;
use super::parabolic::{dwell_seeds, solve_parabolic, DwellSeed, ParabolicOptions, ParabolicReport, ParabolicSolution};
use super::preperiodic::{solve_preperiodic, PreperiodicOptions};
use super::transversality::{keep_others_direction, sorted_singular_values, RelationSystem, Target};
use crate::error::{Error, Result};
use crate::measures::{wasserstein, DiscreteMeasure, ReferenceSampler};
use crate::orbitstat::{accumulation_report, empirical_sequence, geometric_grid, PROBE_LABEL};
use crate::periodic::transit_neighborhood_radius;
use crate::periodic::{cycle_residual, PeriodicOrbit};
use crate::ratmap::{is_strictly_pcf, postcritical_scan, RationalMap};
use crate::sphere::{chordal_distance, SpherePoint};

pub const SCHEMA_VERSION: u32 = 1;
/// Critical orbits are followed this many steps when certifying the input.
const PCF_STEPS: usize = 200;
const PCF_CYCLE_TOL: f64 = 1e-6;
/// A target point this close to a critical value is refused.
const CRITICAL_VALUE_TOL: f64 = 1e-8;
/// Cap on the preimage tree searched for a return point near the target.
const MAX_FRONTIER: usize = 4096;

/// Work limits for each stage. Zero counts switch a stage off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioBudgets {
    pub domain_radius: f64,
    /// Relation to move; by default the shortest one landing on the target.
    pub active: Option<usize>,
    pub rank_step: f64,
    pub max_landing_steps: usize,
    pub preperiodic_grid: usize,
    pub preimage_depth: usize,
    /// Passes around the target cycle for each parabolic solve.
    pub dwell_cycles: Vec<usize>,
    pub diagnostic_starts: usize,
    pub diagnostic_horizon: usize,
    pub tail_fraction: f64,
    pub cluster_radius: f64,
    /// A start counts as matched when its nearest cluster center is this close to the cycle measure.
    pub match_radius: f64,
    pub seed: u64,
}

impl Default for ScenarioBudgets {
    fn default() -> Self {
        ScenarioBudgets {
            domain_radius: 0.05,
            active: None,
            rank_step: 1e-5,
            max_landing_steps: 4,
            preperiodic_grid: 5,
            preimage_depth: 6,
            dwell_cycles: vec![4, 8, 16, 32],
            diagnostic_starts: 50,
            diagnostic_horizon: 1 << 16,
            tail_fraction: 0.5,
            cluster_radius: 0.05,
            match_radius: 0.2,
            seed: 0,
        }
    }
}

impl ScenarioBudgets {
    /// Every stage switched off.
    pub fn zero() -> Self {
        ScenarioBudgets {
            max_landing_steps: 0,
            preperiodic_grid: 0,
            preimage_depth: 0,
            dwell_cycles: Vec::new(),
            diagnostic_starts: 0,
            diagnostic_horizon: 0,
            ..Default::default()
        }
    }

    fn is_zero(&self) -> bool {
        self.max_landing_steps == 0 && self.preimage_depth == 0 && self.dwell_cycles.is_empty() && self.diagnostic_starts == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyStage {
    pub active_relation: usize,
    pub active_critical_point: SpherePoint,
    pub kept_relations: Vec<usize>,
    pub singular_values: Vec<f64>,
    #[serde(serialize_with = "crate::serde_util::complex_vec")]
    pub direction: Vec<Complex64>,
    /// `|J_active · v|`
    pub active_gain: f64,
    /// Largest `|J_j · v|` over the kept relations.
    pub kept_leak: f64,
    pub family: FamilySpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct PreperiodicStage {
    pub critical_index: usize,
    pub landing_steps: usize,
    /// Rotation of the target cycle the critical point lands on.
    pub landing_point: usize,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub lambda_star: Complex64,
    pub residual: f64,
    pub landing_distance: f64,
    pub roots_found: usize,
    pub kept_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub period: usize,
    pub dwell_cycles: usize,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub lambda: Complex64,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub lambda_lo: Complex64,
    pub residuals: [f64; 2],
    pub verification: [f64; 2],
    pub resolved_in_f64: bool,
    pub dwell_near_q: Option<usize>,
    pub dwell_fraction: Option<f64>,
    /// `d_w` between the parabolic cycle measure and the uniform measure on the continued target cycle.
    pub cycle_to_target: f64,
    pub kept_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicStage {
    pub linearization_radius: f64,
    pub return_point: SpherePoint,
    /// Steps from the return point to its critical point.
    pub return_depth: usize,
    /// Steps from the return point to the target cycle point.
    pub transit: usize,
    pub seeds: Vec<DwellSeed>,
    pub reports: Vec<ParabolicReport>,
    pub solutions: Vec<SolutionSummary>,
    #[serde(skip)]
    full: Vec<ParabolicSolution>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticStage {
    pub label: &'static str,
    pub period: usize,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub lambda: Complex64,
    pub resolved_in_f64: bool,
    pub starts: usize,
    pub horizon: usize,
    /// Per start: `d_w` from the nearest cluster center to the cycle measure.
    pub nearest_to_cycle: Vec<f64>,
    /// Per start: `d_w` from the cluster center of the last checkpoint to the target cycle measure.
    pub limit_to_target: Vec<f64>,
    pub matched: usize,
    pub matched_fraction: f64,
    pub match_radius: f64,
    pub cycle_to_target: f64,
    pub skipped_starts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageFailure {
    pub stage: &'static str,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub map: RationalMap,
    pub target: PeriodicOrbit,
    pub budgets: ScenarioBudgets,
    pub family: Option<FamilyStage>,
    pub preperiodic: Option<PreperiodicStage>,
    pub parabolic: Option<ParabolicStage>,
    pub diagnostics: Vec<DiagnosticStage>,
    pub failure: Option<StageFailure>,
}

impl ScenarioReport {
    fn fail(mut self, stage: &'static str, e: Error) -> Self {
        self.failure = Some(StageFailure { stage, error: e.to_string() });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.family.is_none() && self.preperiodic.is_none() && self.parabolic.is_none() && self.diagnostics.is_empty()
    }
}

/// Checks the input and runs the stages in order; a failing stage ends the
/// run with a partial report.
pub fn scenario_driver(f: &RationalMap, target: &PeriodicOrbit, budgets: &ScenarioBudgets) -> Result<ScenarioReport> {
    let data = postcritical_scan(f, PCF_STEPS, PCF_CYCLE_TOL)?;
    let crit = f.critical_points()?;
    for (c, _) in &crit.points {
        let v = f.evaluate(c);
        if let Some(p) = target.points.iter().find(|p| chordal_distance(p, &v) < CRITICAL_VALUE_TOL) {
            return Err(Error::Precondition(format!(
                "target cycle contains the critical value {p} (image of {c}); no perturbation can move the critical orbit onto it"
            )));
        }
    }
    let res = cycle_residual(f, &target.points);
    if !(res < 1e-9) {
        return Err(Error::Precondition(format!("target is not a cycle of the map (residual {res:e})")));
    }
    if !target.is_repelling() {
        return Err(Error::Precondition("target cycle must be repelling".into()));
    }
    let cert = is_strictly_pcf(&data)?;
    if !cert.verdict {
        return Err(Error::Precondition(format!("map is not certified strictly pcf: {}", cert.reasons.join("; "))));
    }
    let mut report = ScenarioReport {
        schema_version: SCHEMA_VERSION,
        map: f.clone(),
        target: target.clone(),
        budgets: budgets.clone(),
        family: None,
        preperiodic: None,
        parabolic: None,
        diagnostics: Vec::new(),
        failure: None,
    };
    if budgets.is_zero() {
        return Ok(report);
    }
    let sys = RelationSystem::from_pcf(f, &data)?;

    let fam_stage = match family_stage(&sys, target, budgets) {
        Ok(s) => s,
        Err(e) => return Ok(report.fail("family", e)),
    };
    let fam = fam_stage.family.clone();
    let kept = fam_stage.kept_relations.clone();
    let active_point = fam_stage.active_critical_point;
    report.family = Some(fam_stage);
    if budgets.max_landing_steps == 0 {
        return Ok(report);
    }

    let crit_index = crit
        .points
        .iter()
        .enumerate()
        .min_by(|a, b| chordal_distance(&a.1 .0, &active_point).total_cmp(&chordal_distance(&b.1 .0, &active_point)))
        .map(|(i, _)| i)
        .expect("degree >= 2 maps have critical points");
    let (pre_stage, root_cycle) = match preperiodic_stage(&fam, &sys, &kept, crit_index, target, budgets) {
        Ok(s) => s,
        Err(e) => return Ok(report.fail("preperiodic", e)),
    };
    let lambda_star = pre_stage.lambda_star;
    let landing_steps = pre_stage.landing_steps;
    report.preperiodic = Some(pre_stage);
    if budgets.preimage_depth == 0 || budgets.dwell_cycles.is_empty() {
        return Ok(report);
    }

    let para = match parabolic_stage(&fam, &sys, &kept, lambda_star, crit_index, landing_steps, &root_cycle, budgets) {
        Ok(s) => s,
        Err(e) => return Ok(report.fail("parabolic", e)),
    };
    let solutions: Vec<(ParabolicSolution, f64)> = para.full.iter().cloned().zip(para.solutions.iter().map(|s| s.cycle_to_target)).collect();
    report.parabolic = Some(para);

    if budgets.diagnostic_starts > 0 && budgets.diagnostic_horizon > 0 {
        // conjugate branches share their statistics, so one solution per period
        let mut chosen: Vec<&(ParabolicSolution, f64)> = Vec::new();
        for s in &solutions {
            match chosen.iter().position(|c| c.0.period == s.0.period) {
                Some(i) if chosen[i].1 <= s.1 => {}
                Some(i) => chosen[i] = s,
                None => chosen.push(s),
            }
        }
        for (s, _) in chosen {
            match diagnostic_stage(&fam, s, &root_cycle, budgets) {
                Ok(d) => report.diagnostics.push(d),
                Err(e) => return Ok(report.fail("diagnostics", e)),
            }
        }
    }
    Ok(report)
}

fn family_stage(sys: &RelationSystem, target: &PeriodicOrbit, budgets: &ScenarioBudgets) -> Result<FamilyStage> {
    let lands_on_target = |t: &Target| match t {
        Target::Cycle(c) => c.iter().any(|p| target.contains(p, 1e-8)),
        Target::Critical(_) => false,
    };
    let active = match budgets.active {
        Some(a) if a < sys.relations.len() => a,
        Some(a) => return Err(Error::Precondition(format!("relation {a} out of range"))),
        None => (0..sys.relations.len())
            .filter(|&j| lands_on_target(&sys.relations[j].target))
            .min_by_key(|&j| sys.relations[j].steps)
            .or_else(|| (0..sys.relations.len()).find(|&j| matches!(sys.relations[j].target, Target::Cycle(_))))
            .ok_or_else(|| Error::Precondition("no critical orbit lands on a cycle".into()))?,
    };
    let jac = sys.jacobian(budgets.rank_step)?;
    let v = keep_others_direction(&jac, active)?;
    let apply = |r: usize| (0..v.len()).map(|k| jac[(r, k)] * v[k]).sum::<Complex64>().norm();
    let kept: Vec<usize> = (0..sys.relations.len()).filter(|&r| r != active).collect();
    let kept_leak = kept.iter().map(|&r| apply(r)).fold(0.0, f64::max);
    let singular_values = sorted_singular_values(&jac);
    let family = FamilySpec::coefficient_line(sys.base.clone(), sys.direction(&v), budgets.domain_radius)?;
    Ok(FamilyStage {
        active_relation: active,
        active_critical_point: sys.relations[active].critical_point,
        kept_relations: kept,
        singular_values,
        active_gain: apply(active),
        kept_leak,
        direction: v,
        family,
    })
}

fn kept_residuals(sys: &RelationSystem, kept: &[usize], g: &RationalMap) -> Vec<f64> {
    match sys.values(g) {
        Ok(v) => kept.iter().map(|&r| v[r].norm()).collect(),
        Err(_) => vec![f64::NAN; kept.len()],
    }
}

fn rotated(target: &PeriodicOrbit, r: usize) -> PeriodicOrbit {
    let mut t = target.clone();
    t.points.rotate_left(r);
    t
}

fn preperiodic_stage(
    fam: &FamilySpec,
    sys: &RelationSystem,
    kept: &[usize],
    crit_index: usize,
    target: &PeriodicOrbit,
    budgets: &ScenarioBudgets,
) -> Result<(PreperiodicStage, Vec<SpherePoint>)> {
    let opts = PreperiodicOptions { grid: budgets.preperiodic_grid, ..Default::default() };
    let mut best: Option<(PreperiodicStage, Vec<SpherePoint>)> = None;
    let mut found = 0;
    let mut last_err = Error::NoRoots;
    for k in 1..=budgets.max_landing_steps {
        for r in 0..target.period {
            match solve_preperiodic(fam, crit_index, k, &rotated(target, r), &opts) {
                Ok(roots) => {
                    found += roots.len();
                    let root = &roots[0];
                    if best.as_ref().is_none_or(|(b, _)| root.lambda.norm() < b.lambda_star.norm() * (1.0 - 1e-9) - 1e-300) {
                        let g = fam.member(root.lambda)?;
                        best = Some((
                            PreperiodicStage {
                                critical_index: crit_index,
                                landing_steps: k,
                                landing_point: r,
                                lambda_star: root.lambda,
                                residual: root.residual,
                                landing_distance: root.landing_distance,
                                roots_found: 0,
                                kept_residuals: kept_residuals(sys, kept, &g),
                            },
                            root.cycle.clone(),
                        ));
                    }
                }
                Err(e) => last_err = e,
            }
        }
    }
    let (mut stage, cycle) = best.ok_or(last_err)?;
    stage.roots_found = found;
    Ok((stage, cycle))
}

/// A point near `cycle[0]` whose orbit reaches `critical` after the returned
/// number of steps: the closest point of the preimage tree, then pulled in
/// by the inverse branch along the cycle.
fn return_point(g: &RationalMap, critical: &SpherePoint, cycle: &[SpherePoint], radius: f64, depth: usize) -> Result<(SpherePoint, usize)> {
    let q = cycle[0];
    let mut frontier = vec![*critical];
    let mut best: Option<(f64, SpherePoint, usize)> = None;
    for level in 1..=depth {
        let mut next: Vec<SpherePoint> = Vec::new();
        for y in &frontier {
            for x in g.preimages(y)? {
                if !next.iter().any(|z| chordal_distance(z, &x) < 1e-10) {
                    next.push(x);
                }
            }
        }
        for x in &next {
            let d = chordal_distance(x, &q);
            if d > 1e-8 && best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, *x, level));
            }
        }
        next.truncate(MAX_FRONTIER);
        frontier = next;
    }
    let (_, mut x, mut steps) = best.ok_or_else(|| Error::Precondition("preimage depth is zero".into()))?;
    let p = cycle.len();
    for _ in 0..64 {
        if chordal_distance(&x, &q) <= radius / 2.0 {
            return Ok((x, steps));
        }
        for s in (0..p).rev() {
            x = g
                .preimages(&x)?
                .into_iter()
                .min_by(|a, b| chordal_distance(a, &cycle[s]).total_cmp(&chordal_distance(b, &cycle[s])))
                .expect("degree >= 2 maps have preimages");
        }
        steps += p;
    }
    Err(Error::ContinuationFailed("inverse branch did not approach the target cycle".into()))
}

#[allow(clippy::too_many_arguments)]
fn parabolic_stage(
    fam: &FamilySpec,
    sys: &RelationSystem,
    kept: &[usize],
    lambda_star: Complex64,
    crit_index: usize,
    landing_steps: usize,
    cycle: &[SpherePoint],
    budgets: &ScenarioBudgets,
) -> Result<ParabolicStage> {
    let g = fam.member(lambda_star)?;
    let target = PeriodicOrbit::certify(&g, cycle)?;
    let critical = super::continuation::continue_critical(&g, &fam.base().critical_points()?.points[crit_index].0)?;
    let radius = transit_neighborhood_radius(&g, &target, 0.1);
    let (ret, depth) = return_point(&g, &critical, &target.points, radius, budgets.preimage_depth)?;
    let transit = depth + landing_steps;
    let landed = g.iterate(&ret, transit);
    if chordal_distance(&landed, &target.points[0]) > 1e-6 {
        return Err(Error::ContinuationFailed(format!("return point lands {:e} away from the cycle", chordal_distance(&landed, &target.points[0]))));
    }
    let seeds = dwell_seeds(fam, lambda_star, &ret, transit, &target.points, &budgets.dwell_cycles)?;
    let opts = ParabolicOptions::default();
    let reports: Vec<ParabolicReport> = seeds
        .iter()
        .map(|s| solve_parabolic(fam, s.period, std::slice::from_ref(&s.seed), Some(&target), &opts))
        .collect::<Result<_>>()?;
    let mut solutions = Vec::new();
    let mut full = Vec::new();
    for (seed, rep) in seeds.iter().zip(&reports) {
        for s in &rep.solutions {
            let member = fam.member(s.lambda)?;
            let target_measure = continue_cycle(&member, &target.points).and_then(DiscreteMeasure::uniform)?;
            solutions.push(SolutionSummary {
                period: s.period,
                dwell_cycles: seed.dwell_cycles,
                lambda: s.lambda,
                lambda_lo: s.lambda_lo,
                residuals: s.residuals,
                verification: s.verification,
                resolved_in_f64: s.resolved_in_f64,
                dwell_near_q: s.dwell_near_q,
                dwell_fraction: s.dwell_near_q.map(|d| d as f64 / s.period as f64),
                cycle_to_target: wasserstein(&s.cycle_measure(), &target_measure)?,
                kept_residuals: kept_residuals(sys, kept, &member),
            });
            full.push(s.clone());
        }
    }
    Ok(ParabolicStage { linearization_radius: radius, return_point: ret, return_depth: depth, transit, seeds, reports, solutions, full })
}

fn diagnostic_stage(fam: &FamilySpec, s: &ParabolicSolution, cycle: &[SpherePoint], budgets: &ScenarioBudgets) -> Result<DiagnosticStage> {
    let g = fam.member(s.lambda)?;
    let cycle_measure = s.cycle_measure();
    let target_measure = continue_cycle(&g, cycle).and_then(DiscreteMeasure::uniform)?;
    let sampler = ReferenceSampler::area(budgets.seed);
    let checkpoints = geometric_grid(8, budgets.diagnostic_horizon);
    let per_start: Vec<Result<(f64, f64)>> = (0..budgets.diagnostic_starts as u64)
        .into_par_iter()
        .map(|i| {
            let seq = empirical_sequence(&g, &sampler.draw(i), &checkpoints)?;
            let rep = accumulation_report(&seq, budgets.tail_fraction, budgets.cluster_radius)?;
            let centers = rep.cluster_centers();
            let mut nearest = f64::INFINITY;
            for c in centers {
                nearest = nearest.min(wasserstein(c, &cycle_measure)?);
            }
            let last = rep.assignment.last().copied().unwrap_or(0);
            Ok((nearest, wasserstein(&centers[last], &target_measure)?))
        })
        .collect();
    let mut nearest_to_cycle = Vec::new();
    let mut limit_to_target = Vec::new();
    let mut skipped_starts = Vec::new();
    for (i, r) in per_start.into_iter().enumerate() {
        match r {
            Ok((a, b)) => {
                nearest_to_cycle.push(a);
                limit_to_target.push(b);
            }
            Err(e) => skipped_starts.push(format!("start {i}: {e}")),
        }
    }
    let matched = nearest_to_cycle.iter().filter(|&&d| d <= budgets.match_radius).count();
    Ok(DiagnosticStage {
        label: PROBE_LABEL,
        period: s.period,
        lambda: s.lambda,
        resolved_in_f64: s.resolved_in_f64,
        starts: budgets.diagnostic_starts,
        horizon: budgets.diagnostic_horizon,
        matched_fraction: matched as f64 / budgets.diagnostic_starts as f64,
        matched,
        match_radius: budgets.match_radius,
        cycle_to_target: wasserstein(&cycle_measure, &target_measure)?,
        nearest_to_cycle,
        limit_to_target,
        skipped_starts,
    })
}
