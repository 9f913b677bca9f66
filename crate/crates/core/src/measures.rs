//! Discrete probability measures on the sphere, measures on measures, the
//! Wasserstein-1 distance for both, reference samplers and coarsening.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{chordal_distance, SpherePoint};
use crate::transport::{self, CostMatrix};

/// Weights must sum to one within this.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Smallest admissible atom weight.
pub const MIN_WEIGHT: f64 = 1e-15;

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidMeasure("no atoms".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= MIN_WEIGHT) || !w.is_finite()) {
        return Err(Error::InvalidMeasure(format!("weight {w:e} below {MIN_WEIGHT:e}")));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidMeasure(format!("weights sum to {s}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    atoms: Vec<SpherePoint>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!("{} atoms but {} weights", atoms.len(), weights.len())));
        }
        check_weights(&weights)?;
        Ok(DiscreteMeasure { atoms, weights })
    }

    /// Equal weights `1/n` on the given atoms.
    pub fn uniform(atoms: Vec<SpherePoint>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        Ok(DiscreteMeasure { weights: vec![1.0 / n as f64; n], atoms })
    }

    pub fn dirac(x: SpherePoint) -> Self {
        DiscreteMeasure { atoms: vec![x], weights: vec![1.0] }
    }

    /// `sum c_k nu_k`; mixtures with zero coefficient are dropped.
    pub fn mixture(parts: &[(f64, &DiscreteMeasure)]) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (c, nu) in parts {
            if *c == 0.0 {
                continue;
            }
            for (x, w) in nu.iter() {
                atoms.push(*x);
                weights.push(c * w);
            }
        }
        Self::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[SpherePoint] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SpherePoint, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Image measure under a point map.
    pub fn push_forward(&self, map: impl Fn(&SpherePoint) -> SpherePoint) -> Self {
        DiscreteMeasure { atoms: self.atoms.iter().map(map).collect(), weights: self.weights.clone() }
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            atoms: Vec<SpherePoint>,
            weights: Vec<f64>,
        }
        let r = Repr::deserialize(d)?;
        DiscreteMeasure::new(r.atoms, r.weights).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaMeasure {
    atoms: Vec<DiscreteMeasure>,
    weights: Vec<f64>,
}

impl MetaMeasure {
    pub fn new(atoms: Vec<DiscreteMeasure>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!("{} atoms but {} weights", atoms.len(), weights.len())));
        }
        check_weights(&weights)?;
        Ok(MetaMeasure { atoms, weights })
    }

    pub fn uniform(atoms: Vec<DiscreteMeasure>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        Ok(MetaMeasure { weights: vec![1.0 / n as f64; n], atoms })
    }

    pub fn dirac(nu: DiscreteMeasure) -> Self {
        MetaMeasure { atoms: vec![nu], weights: vec![1.0] }
    }

    pub fn atoms(&self) -> &[DiscreteMeasure] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl<'de> Deserialize<'de> for MetaMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            atoms: Vec<DiscreteMeasure>,
            weights: Vec<f64>,
        }
        let r = Repr::deserialize(d)?;
        MetaMeasure::new(r.atoms, r.weights).map_err(serde::de::Error::custom)
    }
}

/// Exact W1 distance with the chordal ground metric.
pub fn wasserstein(nu1: &DiscreteMeasure, nu2: &DiscreteMeasure) -> Result<f64> {
    // a Dirac side admits only one coupling
    if nu1.len() == 1 || nu2.len() == 1 {
        let (x, other) = if nu1.len() == 1 { (&nu1.atoms[0], nu2) } else { (&nu2.atoms[0], nu1) };
        return Ok(other.iter().map(|(y, w)| w * chordal_distance(x, y)).sum());
    }
    let cost = CostMatrix::from_fn(nu1.len(), nu2.len(), |i, j| chordal_distance(&nu1.atoms[i], &nu2.atoms[j]));
    Ok(transport::solve(&cost, &nu1.weights, &nu2.weights)?.cost)
}

/// W1 distance on measures of measures with ground metric [`wasserstein`].
pub fn meta_wasserstein(mu1: &MetaMeasure, mu2: &MetaMeasure) -> Result<f64> {
    let (n, m) = (mu1.len(), mu2.len());
    let ground: Vec<Result<f64>> = (0..n * m)
        .into_par_iter()
        .map(|k| wasserstein(&mu1.atoms[k / m], &mu2.atoms[k % m]))
        .collect();
    let data = ground.into_iter().collect::<Result<Vec<f64>>>()?;
    if n == 1 || m == 1 {
        let w = if n == 1 { &mu2.weights } else { &mu1.weights };
        return Ok(data.iter().zip(w).map(|(d, w)| d * w).sum());
    }
    let cost = CostMatrix { rows: n, cols: m, data };
    Ok(transport::solve(&cost, &mu1.weights, &mu2.weights)?.cost)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerKind {
    SphericalAreaUniform,
    UnitCircleUniform,
    CustomAtomList { atoms: Vec<SpherePoint> },
}

impl Default for SamplerKind {
    fn default() -> Self {
        SamplerKind::SphericalAreaUniform
    }
}

/// Seeded source of i.i.d. reference points. Draw `i` depends only on
/// `(seed, i)`, so any partition of the work yields the same sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSampler {
    #[serde(flatten)]
    pub kind: SamplerKind,
    pub seed: u64,
}

impl ReferenceSampler {
    pub fn new(kind: SamplerKind, seed: u64) -> Result<Self> {
        if let SamplerKind::CustomAtomList { atoms } = &kind {
            if atoms.is_empty() {
                return Err(Error::Precondition("custom sampler needs at least one atom".into()));
            }
        }
        Ok(ReferenceSampler { kind, seed })
    }

    pub fn area(seed: u64) -> Self {
        ReferenceSampler { kind: SamplerKind::SphericalAreaUniform, seed }
    }

    pub fn circle(seed: u64) -> Self {
        ReferenceSampler { kind: SamplerKind::UnitCircleUniform, seed }
    }

    /// The `index`-th draw.
    pub fn draw(&self, index: u64) -> SpherePoint {
        let mut rng = member_rng(self.seed, index);
        match &self.kind {
            SamplerKind::SphericalAreaUniform => {
                // uniform height and longitude on the unit sphere, then stereographic projection
                let h = 2.0 * rng.gen::<f64>() - 1.0;
                let phi = std::f64::consts::TAU * rng.gen::<f64>();
                let r = (1.0 - h * h).max(0.0).sqrt();
                SpherePoint::new(
                    num_complex::Complex64::from_polar(r, phi),
                    num_complex::Complex64::new(1.0 - h, 0.0),
                )
            }
            SamplerKind::UnitCircleUniform => SpherePoint::on_circle(rng.gen::<f64>()),
            SamplerKind::CustomAtomList { atoms } => atoms[rng.gen_range(0..atoms.len())],
        }
    }
}

/// Independent RNG stream for ensemble member `index`.
pub fn member_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_reference(s: &ReferenceSampler, count: usize) -> Result<Vec<SpherePoint>> {
    if count == 0 {
        return Err(Error::Precondition("count must be at least 1".into()));
    }
    Ok((0..count as u64).map(|i| s.draw(i)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct Coarsened {
    pub measure: DiscreteMeasure,
    /// Every input atom lies within this chordal distance of its output atom.
    pub radius: f64,
    /// Transport cost of moving each input atom onto its output atom.
    pub displacement: f64,
}

impl Coarsened {
    /// Certified upper bound on `d_w(input, output)`: the cost of an explicit
    /// coupling, never more than `radius` (and so within `2 * radius`).
    pub fn bound(&self) -> f64 {
        self.displacement
    }
}

/// Farthest-point clustering down to at most `max_atoms` atoms.
///
/// Centers are input atoms chosen greedily (each new one is the atom farthest
/// from the current centers), so the covering radius is within a factor two
/// of optimal. Weights are aggregated onto the nearest center.
pub fn coarsen(nu: &DiscreteMeasure, max_atoms: usize) -> Result<Coarsened> {
    if max_atoms == 0 {
        return Err(Error::Precondition("max_atoms must be at least 1".into()));
    }
    let n = nu.len();
    if n <= max_atoms {
        return Ok(Coarsened { measure: nu.clone(), radius: 0.0, displacement: 0.0 });
    }
    let atoms = nu.atoms();
    let xyz: Vec<[f64; 3]> = atoms.iter().map(SpherePoint::to_unit_vector).collect();
    let sq = |p: &[f64; 3], q: &[f64; 3]| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
    // squared Euclidean distances order points like the chordal metric
    let mut centers = vec![0usize];
    let mut nearest = vec![0usize; n];
    let mut dist: Vec<f64> = xyz.iter().map(|p| sq(p, &xyz[0])).collect();
    while centers.len() < max_atoms {
        let (far, &d) = dist
            .iter()
            .enumerate()
            .fold((0, &-1.0), |best, (i, d)| if *d > *best.1 { (i, d) } else { best });
        if d <= 0.0 {
            break;
        }
        let c = centers.len();
        centers.push(far);
        let pf = xyz[far];
        for (i, p) in xyz.iter().enumerate() {
            let di = sq(p, &pf);
            if di < dist[i] {
                dist[i] = di;
                nearest[i] = c;
            }
        }
    }
    let dist: Vec<f64> = (0..n).map(|i| chordal_distance(&atoms[i], &atoms[centers[nearest[i]]])).collect();
    let radius = dist.iter().copied().fold(0.0, f64::max);
    let displacement: f64 = dist.iter().zip(nu.weights()).map(|(d, w)| d * w).sum();
    let mut weights = vec![0.0; centers.len()];
    for (i, w) in nu.weights().iter().enumerate() {
        weights[nearest[i]] += w;
    }
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let measure = DiscreteMeasure::new(centers.iter().map(|&c| atoms[c]).collect(), weights)?;
    Ok(Coarsened { measure, radius, displacement })
}
