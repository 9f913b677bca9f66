//! Empirical measures along orbits, their laws under a reference measure, and
//! finite-horizon probes of how those laws accumulate.
//!
//! Everything here is a finite-sample estimate of a limit object; reports
//! carry [`PROBE_LABEL`] and the tolerances that were folded in.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bifurcation::FamilySpec;
use crate::error::{Error, Result};
use crate::measures::{coarsen, member_rng, meta_wasserstein, wasserstein, Coarsened, DiscreteMeasure, MetaMeasure, ReferenceSampler};
use crate::ratmap::RationalMap;
use crate::sphere::{MobiusMap, SpherePoint};

pub const PROBE_LABEL: &str = "finite-sample probe";
/// Atom budget for measures entering a transport computation.
pub const DEFAULT_COARSEN: usize = 256;
/// Oscillation above this multiple of the combined tolerance is reported as a signal.
pub const SIGNAL_FACTOR: f64 = 10.0;

/// Anything that can be iterated on the sphere.
pub trait Dynamics: Sync {
    fn apply(&self, x: &SpherePoint) -> SpherePoint;
}

impl Dynamics for RationalMap {
    fn apply(&self, x: &SpherePoint) -> SpherePoint {
        self.evaluate(x)
    }
}

/// Degree-one maps are only meaningful here as fixtures (the identity law is constant).
impl Dynamics for MobiusMap {
    fn apply(&self, x: &SpherePoint) -> SpherePoint {
        MobiusMap::apply(self, x)
    }
}

/// A map preserving the unit circle, with each image pushed radially back
/// onto the circle so rounding cannot carry the orbit off it.
#[derive(Debug, Clone)]
pub struct CircleRestriction {
    map: RationalMap,
}

impl CircleRestriction {
    pub fn new(map: RationalMap) -> Result<Self> {
        for k in 0..16 {
            let y = map.evaluate(&SpherePoint::on_circle(k as f64 / 16.0 + 0.01));
            let off = y.to_complex().map_or(f64::INFINITY, |z| (z.norm() - 1.0).abs());
            if off > 1e-10 {
                return Err(Error::Precondition("map does not preserve the unit circle".into()));
            }
        }
        Ok(CircleRestriction { map })
    }

    pub fn map(&self) -> &RationalMap {
        &self.map
    }
}

impl Dynamics for CircleRestriction {
    fn apply(&self, x: &SpherePoint) -> SpherePoint {
        let y = self.map.evaluate(x);
        match y.to_complex() {
            Some(z) if z.norm() > 0.0 => SpherePoint::from_complex(z / z.norm()),
            _ => y,
        }
    }
}

fn check_checkpoints(checkpoints: &[usize]) -> Result<()> {
    if checkpoints.is_empty() || checkpoints[0] == 0 {
        return Err(Error::Precondition("checkpoints must be nonempty and start at 1 or later".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("checkpoints must be strictly increasing".into()));
    }
    Ok(())
}

/// `start, 2 start, 4 start, ...` up to `end`, with `end` itself appended.
pub fn geometric_grid(start: usize, end: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut n = start.max(1);
    while n < end {
        grid.push(n);
        n = n.saturating_mul(2);
    }
    grid.push(end);
    grid
}

/// `x, f(x), ..., f^{n-1}(x)`.
pub fn orbit_prefix(f: &impl Dynamics, x: &SpherePoint, n: usize) -> Vec<SpherePoint> {
    let mut pts = Vec::with_capacity(n);
    let mut y = *x;
    for _ in 0..n {
        pts.push(y);
        y = f.apply(&y);
    }
    pts
}

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalSequence {
    pub start: SpherePoint,
    pub checkpoints: Vec<usize>,
    pub measures: Vec<DiscreteMeasure>,
}

/// `e_n(x) = (1/n) sum_{i<n} δ_{f^i(x)}` at every checkpoint, from one orbit pass.
pub fn empirical_sequence(f: &impl Dynamics, x: &SpherePoint, checkpoints: &[usize]) -> Result<EmpiricalSequence> {
    check_checkpoints(checkpoints)?;
    let orbit = orbit_prefix(f, x, *checkpoints.last().unwrap());
    let measures = checkpoints
        .iter()
        .map(|&n| DiscreteMeasure::uniform(orbit[..n].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalSequence { start: *x, checkpoints: checkpoints.to_vec(), measures })
}

/// Coarsened `e_n(x)` at every checkpoint.
pub fn coarse_empirical(f: &impl Dynamics, x: &SpherePoint, checkpoints: &[usize], coarsen_to: usize) -> Result<Vec<Coarsened>> {
    check_checkpoints(checkpoints)?;
    let orbit = orbit_prefix(f, x, *checkpoints.last().unwrap());
    checkpoints
        .iter()
        .map(|&n| coarsen(&DiscreteMeasure::uniform(orbit[..n].to_vec())?, coarsen_to))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LawSequence {
    pub sampler: ReferenceSampler,
    pub sample_count: usize,
    pub checkpoints: Vec<usize>,
    pub laws: Vec<MetaMeasure>,
    /// `[checkpoint][member]` covering radius of the member's coarsening.
    pub coarsening_radii: Vec<Vec<f64>>,
    /// Per checkpoint, the meta distance between the coarsened and the exact law is at most this.
    pub tolerances: Vec<f64>,
}

/// Monte Carlo estimate of the law of `e_n` when the start is drawn from the sampler.
pub fn law_sequence(
    f: &impl Dynamics,
    sampler: &ReferenceSampler,
    sample_count: usize,
    checkpoints: &[usize],
    coarsen_to: usize,
) -> Result<LawSequence> {
    if sample_count < 2 {
        return Err(Error::Precondition(format!("sample_count must be at least 2, got {sample_count}")));
    }
    check_checkpoints(checkpoints)?;
    let members = (0..sample_count as u64)
        .into_par_iter()
        .map(|i| coarse_empirical(f, &sampler.draw(i), checkpoints, coarsen_to))
        .collect::<Result<Vec<_>>>()?;
    let mut laws = Vec::with_capacity(checkpoints.len());
    let mut coarsening_radii = Vec::with_capacity(checkpoints.len());
    let mut tolerances = Vec::with_capacity(checkpoints.len());
    for j in 0..checkpoints.len() {
        let atoms: Vec<DiscreteMeasure> = members.iter().map(|m| m[j].measure.clone()).collect();
        laws.push(MetaMeasure::uniform(atoms)?);
        coarsening_radii.push(members.iter().map(|m| m[j].radius).collect());
        tolerances.push(members.iter().map(|m| m[j].bound()).sum::<f64>() / sample_count as f64);
    }
    Ok(LawSequence {
        sampler: sampler.clone(),
        sample_count,
        checkpoints: checkpoints.to_vec(),
        laws,
        coarsening_radii,
        tolerances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub coarsen: f64,
    pub sampling: f64,
}

impl Tolerances {
    pub fn combined(&self) -> f64 {
        self.coarsen + self.sampling
    }
}

/// Pairwise distances, symmetric with zero diagonal.
fn pairwise(n: usize, dist: impl Fn(usize, usize) -> Result<f64> + Sync) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = pairs.par_iter().map(|&(i, j)| dist(i, j)).collect::<Result<Vec<f64>>>()?;
    let mut m = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(values) {
        m[i][j] = d;
        m[j][i] = d;
    }
    Ok(m)
}

/// Single-linkage components of the graph `d <= radius`, each represented by
/// its medoid. Returns `(medoids, nearest-medoid assignment)`.
fn single_linkage(d: &[Vec<f64>], radius: f64) -> (Vec<usize>, Vec<usize>) {
    let n = d.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if d[i][j] <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    for i in 0..n {
        match seen.iter().position(|&r| r == roots[i]) {
            Some(k) => components[k].push(i),
            None => {
                seen.push(roots[i]);
                components.push(vec![i]);
            }
        }
    }
    let medoids: Vec<usize> = components
        .iter()
        .map(|c| {
            let spread = |i: usize| c.iter().map(|&j| d[i][j]).fold(0.0, f64::max);
            *c.iter().min_by(|&&a, &&b| spread(a).total_cmp(&spread(b))).unwrap()
        })
        .collect();
    let assignment = (0..n)
        .map(|i| (0..medoids.len()).min_by(|&a, &b| d[i][medoids[a]].total_cmp(&d[i][medoids[b]])).unwrap())
        .collect();
    (medoids, assignment)
}

#[derive(Debug, Clone, Serialize)]
pub struct AccumulationReport {
    pub label: &'static str,
    /// Tail checkpoints, in order.
    pub checkpoints: Vec<usize>,
    /// First checkpoint of the tail.
    pub tail_start: usize,
    pub oscillation_diameter: f64,
    /// Cluster centers (coarsened tail measures).
    pub clusters: Vec<DiscreteMeasure>,
    /// Index of the nearest center for each tail checkpoint.
    pub assignment: Vec<usize>,
    /// Distance from each tail measure to its assigned center.
    pub center_distances: Vec<f64>,
    pub tolerances: Tolerances,
    pub cluster_radius: f64,
    pub signal_factor: f64,
    /// Oscillation exceeds `signal_factor` times the combined tolerance.
    pub non_statistical_signal: bool,
}

impl AccumulationReport {
    pub fn cluster_centers(&self) -> &[DiscreteMeasure] {
        &self.clusters
    }
}

/// Clusters the measures at the last `ceil(tail_fraction * k)` checkpoints.
pub fn accumulation_report(seq: &EmpiricalSequence, tail_fraction: f64, cluster_radius: f64) -> Result<AccumulationReport> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Precondition(format!("tail_fraction {tail_fraction} not in (0, 1]")));
    }
    if !(cluster_radius >= 0.0) {
        return Err(Error::Precondition(format!("cluster_radius {cluster_radius} must be nonnegative")));
    }
    if seq.checkpoints.len() != seq.measures.len() {
        return Err(Error::Precondition("one measure per checkpoint required".into()));
    }
    let k = seq.checkpoints.len();
    let t = ((tail_fraction * k as f64).ceil() as usize).min(k);
    if t < 3 {
        return Err(Error::InsufficientTail(t));
    }
    let tail = k - t..k;
    let coarse = seq.measures[tail.clone()]
        .par_iter()
        .map(|m| coarsen(m, DEFAULT_COARSEN))
        .collect::<Result<Vec<_>>>()?;
    let d = pairwise(t, |i, j| wasserstein(&coarse[i].measure, &coarse[j].measure))?;
    let diameter = d.iter().flatten().copied().fold(0.0, f64::max);
    let (medoids, assignment) = single_linkage(&d, cluster_radius);
    let worst = coarse.iter().map(|c| c.bound()).fold(0.0, f64::max);
    let tolerances = Tolerances { coarsen: 2.0 * worst, sampling: 0.0 };
    Ok(AccumulationReport {
        label: PROBE_LABEL,
        checkpoints: seq.checkpoints[tail.clone()].to_vec(),
        tail_start: seq.checkpoints[tail.start],
        oscillation_diameter: diameter,
        clusters: medoids.iter().map(|&m| coarse[m].measure.clone()).collect(),
        center_distances: (0..t).map(|i| d[i][medoids[assignment[i]]]).collect(),
        assignment,
        tolerances,
        cluster_radius,
        signal_factor: SIGNAL_FACTOR,
        non_statistical_signal: diameter > SIGNAL_FACTOR * tolerances.combined(),
    })
}

fn default_coarsen() -> usize {
    DEFAULT_COARSEN
}

fn default_grid_start() -> usize {
    8
}

/// Shared settings for probes that estimate laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawParams {
    pub sampler: ReferenceSampler,
    pub sample_count: usize,
    #[serde(default = "default_coarsen")]
    pub coarsen_to: usize,
    /// First point of the geometric checkpoint grid.
    #[serde(default = "default_grid_start")]
    pub grid_start: usize,
}

impl LawParams {
    pub fn new(sampler: ReferenceSampler, sample_count: usize) -> Self {
        LawParams { sampler, sample_count, coarsen_to: DEFAULT_COARSEN, grid_start: default_grid_start() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EkProbe {
    pub label: &'static str,
    pub k: usize,
    pub horizon: usize,
    pub laws: LawSequence,
    /// Largest meta distance between two returned laws.
    pub diameter: f64,
    /// Coarsening tolerance: distances are exact up to twice the largest per-law tolerance.
    pub tolerance: f64,
}

/// The laws at the grid checkpoints in `(k, horizon]`: a finite skeleton of
/// the closure of `{law of e_n : n > k}`.
pub fn finite_ek_probe(f: &impl Dynamics, k: usize, horizon: usize, params: &LawParams) -> Result<EkProbe> {
    if horizon <= k {
        return Err(Error::Precondition(format!("horizon {horizon} must exceed k = {k}")));
    }
    let grid: Vec<usize> = geometric_grid(params.grid_start, horizon).into_iter().filter(|&n| n > k).collect();
    let laws = law_sequence(f, &params.sampler, params.sample_count, &grid, params.coarsen_to)?;
    let d = pairwise(laws.laws.len(), |i, j| meta_wasserstein(&laws.laws[i], &laws.laws[j]))?;
    let diameter = d.iter().flatten().copied().fold(0.0, f64::max);
    let tolerance = 2.0 * laws.tolerances.iter().copied().fold(0.0, f64::max);
    Ok(EkProbe { label: PROBE_LABEL, k, horizon, laws, diameter, tolerance })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeEntry {
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub parameter: Complex64,
    pub checkpoint: usize,
    pub law: MetaMeasure,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub parameter_re: f64,
    pub parameter_im: f64,
    pub checkpoint: usize,
    pub target: usize,
    pub d_w_to_target: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedParameter {
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub parameter: Complex64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationProbe {
    pub label: &'static str,
    pub entries: Vec<ProbeEntry>,
    pub targets: Vec<MetaMeasure>,
    /// Whether the targets were found by clustering the final laws.
    pub targets_discovered: bool,
    pub rows: Vec<ProbeRow>,
    pub skipped: Vec<SkippedParameter>,
}

/// Stream offset keeping parameter draws apart from the sampler's start draws.
const PARAMETER_STREAM: u64 = 1 << 63;

/// Probe parameters: the center, then points uniform in the disk.
pub fn probe_parameters(center: Complex64, radius: f64, probes: usize, seed: u64) -> Vec<Complex64> {
    (0..probes as u64)
        .map(|i| {
            if i == 0 {
                return center;
            }
            let mut rng = member_rng(seed, PARAMETER_STREAM | i);
            let r = radius * rng.gen::<f64>().sqrt();
            center + Complex64::from_polar(r, std::f64::consts::TAU * rng.gen::<f64>())
        })
        .collect()
}

/// Laws of family members at parameters sampled around `center`, and their
/// distances to target laws.
///
/// Without supplied targets, the final-checkpoint laws are clustered by single
/// linkage at `cluster_radius` and the cluster medoids become the targets.
#[allow(clippy::too_many_arguments)]
pub fn bifurcation_probe(
    family: &FamilySpec,
    center: Complex64,
    radius: f64,
    probes: usize,
    params: &LawParams,
    checkpoints: &[usize],
    targets: Option<&[MetaMeasure]>,
    cluster_radius: f64,
) -> Result<BifurcationProbe> {
    if probes == 0 {
        return Err(Error::Precondition("probes must be at least 1".into()));
    }
    if !(radius >= 0.0) {
        return Err(Error::Precondition(format!("radius {radius} must be nonnegative")));
    }
    check_checkpoints(checkpoints)?;
    let mut entries = Vec::new();
    let mut finals = Vec::new();
    let mut skipped = Vec::new();
    for lambda in probe_parameters(center, radius, probes, params.sampler.seed) {
        let f = match family.member(lambda) {
            Ok(f) => f,
            Err(e) => {
                skipped.push(SkippedParameter { parameter: lambda, error: e.to_string() });
                continue;
            }
        };
        let seq = law_sequence(&f, &params.sampler, params.sample_count, checkpoints, params.coarsen_to)?;
        for (j, law) in seq.laws.into_iter().enumerate() {
            entries.push(ProbeEntry { parameter: lambda, checkpoint: checkpoints[j], law, tolerance: seq.tolerances[j] });
        }
        finals.push(entries.len() - 1);
    }
    let (targets, targets_discovered) = match targets {
        Some(t) => (t.to_vec(), false),
        None => {
            let d = pairwise(finals.len(), |i, j| meta_wasserstein(&entries[finals[i]].law, &entries[finals[j]].law))?;
            let (medoids, _) = single_linkage(&d, cluster_radius);
            (medoids.iter().map(|&m| entries[finals[m]].law.clone()).collect(), true)
        }
    };
    let rows = entries
        .par_iter()
        .map(|e| {
            let dists = targets.iter().map(|t| meta_wasserstein(&e.law, t)).collect::<Result<Vec<f64>>>()?;
            let (target, d) = dists
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((usize::MAX, f64::NAN));
            Ok(ProbeRow { parameter_re: e.parameter.re, parameter_im: e.parameter.im, checkpoint: e.checkpoint, target, d_w_to_target: d })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BifurcationProbe { label: PROBE_LABEL, entries, targets, targets_discovered, rows, skipped })
}
