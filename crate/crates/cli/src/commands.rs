//! One function per subcommand: typed parameters in, JSON result and plot table out.

use num_complex::Complex64;
use ratdyn::bifurcation::{
    scenario_driver, solve_parabolic, transversality_rank, ParabolicOptions, ParabolicSeed, ScenarioBudgets,
};
use ratdyn::measures::{MetaMeasure, ReferenceSampler, SamplerKind};
use ratdyn::orbitstat::{
    accumulation_report, bifurcation_probe, empirical_sequence, finite_ek_probe, geometric_grid, CircleRestriction,
    Dynamics, LawParams, DEFAULT_COARSEN,
};
use ratdyn::periodic::{close_orbit, find_periodic, refine_cycle, transit_periodic, NewtonOptions, Seeds, TransitOptions};
use ratdyn::ratmap::{is_strictly_pcf, postcritical_scan};
use ratdyn::{PeriodicOrbit, RationalMap, SpherePoint};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::exit::Failure;
use crate::plot::{num, point, Table};

pub struct Outcome {
    /// Resolved parameters, echoed into the embedded config.
    pub params: Value,
    pub result: Value,
    pub table: Table,
    /// Set when the result is a numerically undecided certificate (exit 3).
    pub undecided: Option<String>,
}

fn outcome<P: Serialize, R: Serialize>(params: &P, result: &R, table: Table) -> Outcome {
    Outcome {
        params: serde_json::to_value(params).expect("parameters serialize"),
        result: serde_json::to_value(result).expect("result serializes"),
        table,
        undecided: None,
    }
}

fn to_string<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v).expect("value serializes") {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

/// Starting point: explicit, or draw `start_index` of the seeded sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<SpherePoint>,
    #[serde(default)]
    pub start_index: u64,
    #[serde(default)]
    pub sampler: SamplerKind,
}

impl StartParams {
    fn point(&self, seed: u64) -> Result<SpherePoint, Failure> {
        Ok(match self.start {
            Some(x) => x,
            None => ReferenceSampler::new(self.sampler.clone(), seed)?.draw(self.start_index),
        })
    }
}

fn certified_cycle(f: &RationalMap, seeds: &[SpherePoint]) -> Result<PeriodicOrbit, Failure> {
    if seeds.is_empty() {
        return Err(Failure::usage("cycle needs at least one point"));
    }
    let (pts, _) = refine_cycle(f, seeds, &NewtonOptions::default())?;
    Ok(PeriodicOrbit::certify(f, &pts)?)
}

fn dynamics(f: &RationalMap, circle: bool) -> Result<Box<dyn DynamicsBox>, Failure> {
    Ok(if circle { Box::new(CircleRestriction::new(f.clone())?) } else { Box::new(f.clone()) })
}

/// Object-safe wrapper so the circle restriction can be chosen at run time.
trait DynamicsBox: Sync {
    fn step(&self, x: &SpherePoint) -> SpherePoint;
}

impl<T: Dynamics> DynamicsBox for T {
    fn step(&self, x: &SpherePoint) -> SpherePoint {
        self.apply(x)
    }
}

struct Boxed(Box<dyn DynamicsBox>);

impl Dynamics for Boxed {
    fn apply(&self, x: &SpherePoint) -> SpherePoint {
        self.0.step(x)
    }
}

fn default_steps() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitParams {
    #[serde(flatten)]
    pub start: StartParams,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

pub fn orbit(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let f = cfg.map()?;
    let p: OrbitParams = cfg.params()?;
    let rec = f.iterate_orbit(&p.start.point(cfg.seed)?, p.steps);
    let mut t = Table::new(&["step", "re", "im"]);
    for (i, x) in rec.points.iter().enumerate() {
        let [re, im] = point(x);
        t.push(vec![i.to_string(), re, im]);
    }
    Ok(outcome(&p, &rec, t))
}

fn default_horizon() -> usize {
    1 << 16
}

fn default_grid_start() -> usize {
    8
}

fn default_tail() -> f64 {
    0.5
}

fn default_cluster() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalParams {
    #[serde(flatten)]
    pub start: StartParams,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_grid_start")]
    pub grid_start: usize,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    #[serde(default = "default_cluster")]
    pub cluster_radius: f64,
    /// Iterate the restriction to the unit circle.
    #[serde(default)]
    pub circle: bool,
}

pub fn empirical(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let f = cfg.map()?;
    let p: EmpiricalParams = cfg.params()?;
    let g = Boxed(dynamics(f, p.circle)?);
    let x = p.start.point(cfg.seed)?;
    let seq = empirical_sequence(&g, &x, &geometric_grid(p.grid_start, p.horizon))?;
    let rep = accumulation_report(&seq, p.tail_fraction, p.cluster_radius)?;
    let mut t = Table::new(&["checkpoint", "cluster", "center_distance", "oscillation_diameter"]);
    for (i, n) in rep.checkpoints.iter().enumerate() {
        t.push(vec![n.to_string(), rep.assignment[i].to_string(), num(rep.center_distances[i]), num(rep.oscillation_diameter)]);
    }
    let result = serde_json::json!({ "start": x, "report": rep });
    Ok(outcome(&p, &result, t))
}

fn default_samples() -> usize {
    32
}

fn default_law_horizon() -> usize {
    4096
}

fn default_coarsen() -> usize {
    DEFAULT_COARSEN
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawCommandParams {
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default = "default_samples")]
    pub sample_count: usize,
    #[serde(default)]
    pub k: usize,
    #[serde(default = "default_law_horizon")]
    pub horizon: usize,
    #[serde(default = "default_coarsen")]
    pub coarsen_to: usize,
    #[serde(default = "default_grid_start")]
    pub grid_start: usize,
    #[serde(default)]
    pub circle: bool,
}

pub fn law(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let f = cfg.map()?;
    let p: LawCommandParams = cfg.params()?;
    let g = Boxed(dynamics(f, p.circle)?);
    let params = LawParams {
        sampler: ReferenceSampler::new(p.sampler.clone(), cfg.seed)?,
        sample_count: p.sample_count,
        coarsen_to: p.coarsen_to,
        grid_start: p.grid_start,
    };
    let probe = finite_ek_probe(&g, p.k, p.horizon, &params)?;
    let mut t = Table::new(&["checkpoint", "coarsening_tolerance", "diameter"]);
    for (n, tol) in probe.laws.checkpoints.iter().zip(&probe.laws.tolerances) {
        t.push(vec![n.to_string(), num(*tol), num(probe.diameter)]);
    }
    Ok(outcome(&p, &probe, t))
}

fn default_seeds() -> Seeds {
    Seeds::Exhaustive
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicParams {
    pub period: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Seeds,
}

pub fn periodic(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let f = cfg.map()?;
    let p: PeriodicParams = cfg.params()?;
    let search = find_periodic(f, p.period, &p.seeds)?;
    let mut t = Table::new(&["orbit", "period", "multiplier_re", "multiplier_im", "multiplier_abs", "classification"]);
    for (i, o) in search.orbits.iter().chain(&search.divisor_orbits).enumerate() {
        t.push(vec![
            i.to_string(),
            o.period.to_string(),
            num(o.multiplier.re),
            num(o.multiplier.im),
            num(o.multiplier.norm()),
            to_string(&o.classification),
        ]);
    }
    Ok(outcome(&p, &search, t))
}

fn default_close_horizon() -> usize {
    2000
}

fn default_return_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CloseParams {
    #[serde(flatten)]
    pub start: StartParams,
    #[serde(default = "default_close_horizon")]
    pub horizon: usize,
    #[serde(default = "default_return_tol")]
    pub return_tol: f64,
}

pub fn close(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let f = cfg.map()?;
    let p: CloseParams = cfg.params()?;
    let rec = f.iterate_orbit(&p.start.point(cfg.seed)?, p.horizon);
    let r = close_orbit(f, &rec, p.return_tol)?;
    let mut t = Table::new(&["segment_start", "period", "return_distance", "shadow_distance", "measure_gap", "measure_gap_tolerance"]);
    t.push(vec![
        r.segment_start.to_string(),
        r.periodic.period.to_string(),
        num(r.return_distance),
        num(r.shadow_distance),
        num(r.measure_gap),
        num(r.measure_gap_tolerance),
    ]);
    // the input orbit is reproducible from the config and would dominate the output
    let mut result = serde_json::to_value(&r).expect("result serializes");
    result["source_orbit"]["points"] = Value::Array(Vec::new());
    Ok(Outcome { result, ..outcome(&p, &Value::Null, t) })
}

fn default_dwell_budget() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitParams {
    /// One list of approximate cycle points per target.
    pub targets: Vec<Vec<SpherePoint>>,
    pub coefficients: Vec<f64>,
    #[serde(default = "default_dwell_budget")]
    pub dwell_budget: usize,
    #[serde(default)]
    pub options: TransitOptions,
}

pub fn transit(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let f = cfg.map()?;
    let p: TransitParams = cfg.params()?;
    let targets = p.targets.iter().map(|c| certified_cycle(f, c)).collect::<Result<Vec<_>, _>>()?;
    let r = transit_periodic(f, &targets, &p.coefficients, p.dwell_budget, &p.options)?;
    let mut t = Table::new(&["target", "coefficient", "design_dwell", "dwell_fraction", "achieved_fraction", "gap"]);
    for i in 0..targets.len() {
        t.push(vec![
            i.to_string(),
            num(p.coefficients[i]),
            r.design_dwell[i].to_string(),
            num(r.dwell_fractions[i]),
            num(r.achieved_fractions[i]),
            num(r.gap),
        ]);
    }
    Ok(outcome(&p, &r, t))
}

fn default_pcf_steps() -> usize {
    200
}

fn default_cycle_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcfParams {
    #[serde(default = "default_pcf_steps")]
    pub max_steps: usize,
    #[serde(default = "default_cycle_tol")]
    pub cycle_tol: f64,
}

pub fn pcf(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let f = cfg.map()?;
    let p: PcfParams = cfg.params()?;
    let data = postcritical_scan(f, p.max_steps, p.cycle_tol)?;
    let mut t = Table::new(&["critical_re", "critical_im", "multiplicity", "flag", "landing_steps", "period", "multiplier_re", "multiplier_im"]);
    for o in &data.orbits {
        let [re, im] = point(&o.critical_point);
        let (steps, period, m) = match &o.landing {
            Some(l) => (l.steps.to_string(), l.cycle.period.to_string(), [num(l.cycle.multiplier.re), num(l.cycle.multiplier.im)]),
            None => (String::new(), String::new(), [String::new(), String::new()]),
        };
        let [mre, mim] = m;
        t.push(vec![re, im, o.multiplicity.to_string(), to_string(&o.flag), steps, period, mre, mim]);
    }
    let (certificate, undecided) = match is_strictly_pcf(&data) {
        Ok(c) => (Some(c), None),
        Err(e) if e.is_undecided() => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let result = serde_json::json!({ "postcritical": data, "certificate": certificate, "undecided": undecided });
    Ok(Outcome { undecided, ..outcome(&p, &result, t) })
}

fn default_rank_step() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankParams {
    #[serde(flatten)]
    pub scan: PcfParams,
    #[serde(default = "default_rank_step")]
    pub step: f64,
}

pub fn rank(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let f = cfg.map()?;
    let p: RankParams = cfg.params()?;
    let data = postcritical_scan(f, p.scan.max_steps, p.scan.cycle_tol)?;
    let r = transversality_rank(f, &data, p.step)?;
    let mut t = Table::new(&["index", "singular_value", "relative"]);
    let top = r.singular_values.first().copied().unwrap_or(0.0);
    for (i, s) in r.singular_values.iter().enumerate() {
        t.push(vec![i.to_string(), num(*s), num(if top > 0.0 { s / top } else { 0.0 })]);
    }
    Ok(outcome(&p, &r, t))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolicParams {
    pub period: usize,
    pub seeds: Vec<ParabolicSeed>,
    /// Approximate points of a repelling cycle of the base map; enables the dwell count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub companion: Option<Vec<SpherePoint>>,
    #[serde(default)]
    pub options: ParabolicOptions,
}

pub fn parabolic(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let fam = cfg.family()?;
    let p: ParabolicParams = cfg.params()?;
    let companion = p.companion.as_ref().map(|c| certified_cycle(fam.base(), c)).transpose()?;
    let r = solve_parabolic(fam, p.period, &p.seeds, companion.as_ref(), &p.options)?;
    let mut t = Table::new(&[
        "period",
        "lambda_re",
        "lambda_im",
        "z_re",
        "z_im",
        "fixed_point_residual",
        "multiplier_residual",
        "dwell_near_q",
    ]);
    for s in &r.solutions {
        let [zre, zim] = point(&s.point);
        t.push(vec![
            s.period.to_string(),
            num(s.lambda.re),
            num(s.lambda.im),
            zre,
            zim,
            num(s.residuals[0]),
            num(s.residuals[1]),
            s.dwell_near_q.map(|d| d.to_string()).unwrap_or_default(),
        ]);
    }
    Ok(outcome(&p, &r, t))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// Approximate points of the repelling target cycle.
    pub target: Vec<SpherePoint>,
    /// `budgets.seed` is replaced by the top-level seed.
    #[serde(default)]
    pub budgets: ScenarioBudgets,
}

pub fn scenario(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let f = cfg.map()?;
    let mut p: ScenarioParams = cfg.params()?;
    p.budgets.seed = cfg.seed;
    let target = certified_cycle(f, &p.target)?;
    let r = scenario_driver(f, &target, &p.budgets)?;
    let mut t = Table::new(&[
        "period",
        "dwell_cycles",
        "lambda_re",
        "lambda_im",
        "dwell_fraction",
        "cycle_to_target",
        "resolved_in_f64",
        "matched_fraction",
    ]);
    if let Some(para) = &r.parabolic {
        for s in &para.solutions {
            let matched = r
                .diagnostics
                .iter()
                .find(|d| d.period == s.period && d.lambda == s.lambda)
                .map(|d| num(d.matched_fraction))
                .unwrap_or_default();
            t.push(vec![
                s.period.to_string(),
                s.dwell_cycles.to_string(),
                num(s.lambda.re),
                num(s.lambda.im),
                s.dwell_fraction.map(num).unwrap_or_default(),
                num(s.cycle_to_target),
                s.resolved_in_f64.to_string(),
                matched,
            ]);
        }
    }
    Ok(outcome(&p, &r, t))
}

fn default_probes() -> usize {
    8
}

fn default_probe_samples() -> usize {
    16
}

fn default_checkpoints() -> Vec<usize> {
    vec![64, 256, 1024]
}

fn default_probe_cluster() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeParams {
    #[serde(default)]
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default = "default_probe_samples")]
    pub sample_count: usize,
    #[serde(default = "default_coarsen")]
    pub coarsen_to: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<MetaMeasure>>,
    #[serde(default = "default_probe_cluster")]
    pub cluster_radius: f64,
}

pub fn probe(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let fam = cfg.family()?;
    let p: ProbeParams = cfg.params()?;
    let params = LawParams {
        sampler: ReferenceSampler::new(p.sampler.clone(), cfg.seed)?,
        sample_count: p.sample_count,
        coarsen_to: p.coarsen_to,
        grid_start: default_grid_start(),
    };
    let center = Complex64::new(p.center[0], p.center[1]);
    let r = bifurcation_probe(fam, center, p.radius, p.probes, &params, &p.checkpoints, p.targets.as_deref(), p.cluster_radius)?;
    let mut t = Table::new(&["parameter_re", "parameter_im", "checkpoint", "target", "d_w_to_target"]);
    for row in &r.rows {
        t.push(vec![num(row.parameter_re), num(row.parameter_im), row.checkpoint.to_string(), row.target.to_string(), num(row.d_w_to_target)]);
    }
    Ok(outcome(&p, &r, t))
}
