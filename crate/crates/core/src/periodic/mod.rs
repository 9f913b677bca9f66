//! Periodic orbits: Newton refinement, certification, multipliers,
//! exhaustive search, periodic measures, closing and transit constructions.

mod closing;
mod newton;
mod transit;

pub use closing::{close_orbit, ClosingResult};
pub use newton::{cycle_residual, refine_cycle, NewtonOptions};
pub use transit::{neighborhood_radius as transit_neighborhood_radius, transit_periodic, TransitOptions, TransitReport};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::poly;
use crate::ratmap::RationalMap;
use crate::sphere::{chordal_distance, MobiusMap, SpherePoint};

/// Certified cycles satisfy `d(f(p_i), p_{i+1}) <= CYCLE_TOL`.
pub const CYCLE_TOL: f64 = 1e-10;
/// A proper divisor `q` with `d(f^q(p_0), p_0) < MINIMALITY_TOL` shortens the period.
pub const MINIMALITY_TOL: f64 = 1e-8;
/// Exhaustive search refuses `d^period` above this.
pub const EXHAUSTIVE_CAP: f64 = 1e4;

const MULTIPLIER_TOL: f64 = 1e-8;
const ROOT_OF_UNITY_TOL: f64 = 1e-6;
const ROOT_OF_UNITY_MAX_ORDER: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Repelling,
    Attracting,
    ParabolicCandidate,
    Indifferent,
}

impl Classification {
    pub fn of(multiplier: Complex64) -> Self {
        let m = multiplier.norm();
        if m > 1.0 + MULTIPLIER_TOL {
            Classification::Repelling
        } else if m < 1.0 - MULTIPLIER_TOL {
            Classification::Attracting
        } else if near_root_of_unity(multiplier) {
            Classification::ParabolicCandidate
        } else {
            Classification::Indifferent
        }
    }
}

fn near_root_of_unity(m: Complex64) -> bool {
    let turns = m.arg() / std::f64::consts::TAU;
    (1..=ROOT_OF_UNITY_MAX_ORDER).any(|q| {
        let k = (turns * q as f64).round();
        let root = Complex64::from_polar(1.0, std::f64::consts::TAU * k / q as f64);
        (m - root).norm() < ROOT_OF_UNITY_TOL
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub points: Vec<SpherePoint>,
    pub period: usize,
    #[serde(serialize_with = "crate::serde_util::complex", deserialize_with = "crate::serde_util::de_complex")]
    pub multiplier: Complex64,
    pub classification: Classification,
}

impl PeriodicOrbit {
    /// Certifies a cycle: residual within [`CYCLE_TOL`], then reduces to the
    /// minimal period. The returned orbit may be shorter than `points`.
    pub fn certify(f: &RationalMap, points: &[SpherePoint]) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Precondition("empty cycle".into()));
        }
        let res = cycle_residual(f, points);
        if !(res <= CYCLE_TOL) {
            return Err(Error::ResidualTooLarge(res));
        }
        let q = minimal_period(points);
        let points = points[..q].to_vec();
        let multiplier = cycle_multiplier(f, &points);
        Ok(PeriodicOrbit { classification: Classification::of(multiplier), points, period: q, multiplier })
    }

    pub fn is_repelling(&self) -> bool {
        self.classification == Classification::Repelling
    }

    pub fn contains(&self, x: &SpherePoint, tol: f64) -> bool {
        self.points.iter().any(|p| chordal_distance(p, x) < tol)
    }

    /// Distance from `x` to the nearest cycle point.
    pub fn distance_to(&self, x: &SpherePoint) -> f64 {
        self.points.iter().map(|p| chordal_distance(p, x)).fold(f64::INFINITY, f64::min)
    }

    /// Same cycle, started at the point with the smallest sort key.
    fn canonical(mut self) -> Self {
        let start = (0..self.period)
            .min_by(|&i, &j| point_key(&self.points[i]).partial_cmp(&point_key(&self.points[j])).unwrap())
            .unwrap_or(0);
        self.points.rotate_left(start);
        self
    }

    fn same_cycle(&self, other: &PeriodicOrbit) -> bool {
        self.period == other.period && self.points.iter().all(|p| other.contains(p, MINIMALITY_TOL))
    }
}

fn point_key(p: &SpherePoint) -> (f64, f64, f64) {
    match p.to_complex() {
        Some(z) if !p.is_infinity() => (0.0, z.re, z.im),
        _ => (1.0, 0.0, 0.0),
    }
}

/// Smallest divisor `q` of `n` with the cycle repeating after `q` steps.
fn minimal_period(points: &[SpherePoint]) -> usize {
    let n = points.len();
    (1..n)
        .filter(|q| n % q == 0)
        .find(|&q| (0..n).all(|i| chordal_distance(&points[i], &points[(i + q) % n]) < MINIMALITY_TOL))
        .unwrap_or(n)
}

/// `(f^n)'` along the cycle in adapted charts.
pub fn cycle_multiplier(f: &RationalMap, points: &[SpherePoint]) -> Complex64 {
    let n = points.len();
    (0..n).fold(Complex64::new(1.0, 0.0), |acc, i| {
        let next = &points[(i + 1) % n];
        acc * f.derivative_in_charts(&points[i], points[i].chart(), next.chart())
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeds {
    Points(Vec<SpherePoint>),
    Exhaustive,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedFailure {
    pub seed: SpherePoint,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicSearch {
    pub period: usize,
    /// Cycles of exact period `period`, in canonical order.
    pub orbits: Vec<PeriodicOrbit>,
    /// Cycles whose exact period is a proper divisor of `period`.
    pub divisor_orbits: Vec<PeriodicOrbit>,
    pub failures: Vec<SeedFailure>,
    /// Number of points of exact period `period` counted with multiplicity
    /// (exhaustive mode only).
    pub expected_points: Option<usize>,
}

impl PeriodicSearch {
    pub fn found_points(&self) -> usize {
        self.orbits.iter().map(|o| o.period).sum()
    }
}

/// Refines the cycle through `seed` of length `period` and certifies it.
pub fn cycle_from_seed(f: &RationalMap, seed: &SpherePoint, period: usize) -> Result<PeriodicOrbit> {
    let guess = f.iterate_orbit(seed, period - 1).points;
    let (pts, _) = refine_cycle(f, &guess, &NewtonOptions::default())?;
    PeriodicOrbit::certify(f, &pts)
}

pub fn find_periodic(f: &RationalMap, period: usize, seeds: &Seeds) -> Result<PeriodicSearch> {
    if period == 0 {
        return Err(Error::Precondition("period must be at least 1".into()));
    }
    let (seed_points, expected) = match seeds {
        Seeds::Points(p) => (p.clone(), None),
        Seeds::Exhaustive => {
            let d = f.degree() as f64;
            if d.powi(period as i32) > EXHAUSTIVE_CAP {
                return Err(Error::Precondition(format!(
                    "exhaustive search needs d^period <= {EXHAUSTIVE_CAP}, got {}^{period}",
                    f.degree()
                )));
            }
            (exhaustive_candidates(f, period)?, Some(exact_period_count(f.degree(), period)))
        }
    };
    let results: Vec<Result<PeriodicOrbit>> = seed_points.par_iter().map(|s| cycle_from_seed(f, s, period)).collect();
    let mut found = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in seed_points.iter().zip(results) {
        match r {
            Ok(o) => found.push(o.canonical()),
            Err(e) => failures.push(SeedFailure { seed: *seed, error: e.to_string() }),
        }
    }
    found.sort_by(|a, b| {
        (a.period, point_key(&a.points[0]))
            .partial_cmp(&(b.period, point_key(&b.points[0])))
            .unwrap()
    });
    let mut unique: Vec<PeriodicOrbit> = Vec::new();
    for o in found {
        if !unique.iter().any(|u| u.same_cycle(&o)) {
            unique.push(o);
        }
    }
    let (orbits, divisor_orbits) = unique.into_iter().partition(|o| o.period == period);
    Ok(PeriodicSearch { period, orbits, divisor_orbits, failures, expected_points: expected })
}

fn mobius_mu(mut n: usize) -> i64 {
    let mut mu = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if n > 1 {
        mu = -mu;
    }
    mu
}

/// Points of exact period `n` of a degree-`d` map, with multiplicity.
pub fn exact_period_count(d: usize, n: usize) -> usize {
    let total: i64 = (1..=n)
        .filter(|q| n % q == 0)
        .map(|q| mobius_mu(n / q) * (d.pow(q as u32) as i64 + 1))
        .sum();
    total as usize
}

/// All solutions of `f^n(x) = x`, by Aberth iteration on the fixed-point
/// polynomial of a rotated conjugate that keeps ∞ off every `n`-cycle.
fn exhaustive_candidates(f: &RationalMap, period: usize) -> Result<Vec<SpherePoint>> {
    let (rot, g) = rotated_conjugate(f, period)?;
    let deg = f.degree().pow(period as u32) + 1;
    let gp = g.numerator().to_vec();
    let gq = g.denominator().to_vec();
    let d = g.degree();
    let ratio = move |z: Complex64| {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let (mut a, mut b, mut da, mut db) = (z, one, one, zero);
        for _ in 0..period {
            let (pa, pda, pdb) = homogeneous_partials(&gp, d, a, b);
            let (qa, qda, qdb) = homogeneous_partials(&gq, d, a, b);
            let (na, nb) = (pa, qa);
            let nda = pda * da + pdb * db;
            let ndb = qda * da + qdb * db;
            // common rescaling keeps the Newton ratio exact
            let s = na.norm().max(nb.norm());
            let s = if s > 0.0 && s.is_finite() { s } else { 1.0 };
            a = na / s;
            b = nb / s;
            da = nda / s;
            db = ndb / s;
        }
        (a - z * b) / (da - b - z * db)
    };
    let (roots, _) = poly::aberth_with(ratio, poly::circle_guesses(deg, 1.0), 500);
    let inv = rot.inverse();
    Ok(roots
        .into_iter()
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .map(|z| inv.apply(&SpherePoint::from_complex(z)))
        .collect())
}

/// `(F(a, b), dF/da, dF/db)` for the degree-`d` form with ascending coefficients.
fn homogeneous_partials(c: &[Complex64], d: usize, a: Complex64, b: Complex64) -> (Complex64, Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    let mut apow = vec![Complex64::new(1.0, 0.0); d + 1];
    let mut bpow = vec![Complex64::new(1.0, 0.0); d + 1];
    for k in 1..=d {
        apow[k] = apow[k - 1] * a;
        bpow[k] = bpow[k - 1] * b;
    }
    let (mut v, mut va, mut vb) = (zero, zero, zero);
    for k in 0..=d {
        v += c[k] * apow[k] * bpow[d - k];
        if k > 0 {
            va += c[k] * (k as f64) * apow[k - 1] * bpow[d - k];
        }
        if k < d {
            vb += c[k] * ((d - k) as f64) * apow[k] * bpow[d - k - 1];
        }
    }
    (v, va, vb)
}

/// A rotation `R` with `R f R^{-1}` mapping ∞ well away from ∞ after `period` steps.
fn rotated_conjugate(f: &RationalMap, period: usize) -> Result<(MobiusMap, RationalMap)> {
    let mut best: Option<(f64, MobiusMap, RationalMap)> = None;
    for k in 0..16 {
        let t = 0.37 + 0.61 * k as f64;
        let alpha = Complex64::from_polar(t.cos(), 1.3 * t);
        let beta = Complex64::from_polar(t.sin(), 0.7 + 2.1 * t);
        let rot = MobiusMap::rotation(alpha, beta)?;
        let g = f.conjugate(&rot)?;
        let inf = SpherePoint::infinity();
        let gap = chordal_distance(&g.iterate(&inf, period), &inf);
        if gap > 1e-2 {
            return Ok((rot, g));
        }
        if best.as_ref().map_or(true, |b| gap > b.0) {
            best = Some((gap, rot, g));
        }
    }
    let (_, rot, g) = best.unwrap();
    Ok((rot, g))
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicMeasure {
    pub orbit: PeriodicOrbit,
    pub measure: DiscreteMeasure,
}

pub fn periodic_measure(p: &PeriodicOrbit) -> PeriodicMeasure {
    PeriodicMeasure {
        orbit: p.clone(),
        measure: DiscreteMeasure::uniform(p.points.clone()).expect("cycle is nonempty"),
    }
}

#[cfg(test)]
mod tests;
