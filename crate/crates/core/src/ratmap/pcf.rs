//! Postcritical orbits and the strictly-postcritically-finite certificate.

use num_complex::Complex64;
use serde::Serialize;

use super::RationalMap;
use crate::error::{Error, Result};
use crate::periodic::{refine_cycle, NewtonOptions, PeriodicOrbit};
use crate::sphere::{chordal_distance, SpherePoint};

/// A landing is confirmed when the re-evaluated iterate is this close to the cycle.
pub const LANDING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LandingFlag {
    LandsOnCycle,
    EscapingResolution,
    Undecided,
}

#[derive(Debug, Clone, Serialize)]
pub struct Landing {
    /// First `n` with `f^n(c)` on the cycle.
    pub steps: usize,
    /// Index into `cycle.points` of `f^steps(c)`.
    pub cycle_index: usize,
    pub cycle: PeriodicOrbit,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalOrbit {
    pub critical_point: SpherePoint,
    pub multiplicity: usize,
    /// `c, f(c), ...` up to the detected return or `max_steps`.
    pub segment: Vec<SpherePoint>,
    pub flag: LandingFlag,
    pub landing: Option<Landing>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PostcriticalData {
    pub map: RationalMap,
    pub max_steps: usize,
    pub cycle_tol: f64,
    pub orbits: Vec<CriticalOrbit>,
}

impl PostcriticalData {
    /// Every computed postcritical point `f^k(c)`, `k >= 1`.
    pub fn postcritical_points(&self) -> Vec<SpherePoint> {
        let mut out = Vec::new();
        for o in &self.orbits {
            out.extend(o.segment.iter().skip(1).copied());
            if let Some(l) = &o.landing {
                out.extend(l.cycle.points.iter().copied());
            }
        }
        out
    }
}

/// Iterates each critical point until two orbit points come within
/// `cycle_tol`, then refines the repeating block into a certified cycle and
/// locates the first landing step.
pub fn postcritical_scan(f: &RationalMap, max_steps: usize, cycle_tol: f64) -> Result<PostcriticalData> {
    if max_steps == 0 {
        return Err(Error::Precondition("max_steps must be at least 1".into()));
    }
    let crit = f.critical_points()?;
    let orbits = crit.points.iter().map(|(c, m)| scan_one(f, c, *m, max_steps, cycle_tol)).collect();
    Ok(PostcriticalData { map: f.clone(), max_steps, cycle_tol, orbits })
}

fn scan_one(f: &RationalMap, c: &SpherePoint, multiplicity: usize, max_steps: usize, cycle_tol: f64) -> CriticalOrbit {
    let mut segment = vec![*c];
    let mut ret = None;
    'outer: for j in 1..=max_steps {
        let next = f.evaluate(&segment[j - 1]);
        segment.push(next);
        for i in 0..j {
            if chordal_distance(&segment[i], &next) < cycle_tol {
                ret = Some((i, j));
                break 'outer;
            }
        }
    }
    let undecided = |segment| CriticalOrbit {
        critical_point: *c,
        multiplicity,
        segment,
        flag: LandingFlag::Undecided,
        landing: None,
    };
    let Some((i, j)) = ret else {
        return undecided(segment);
    };
    let guess = &segment[i..j];
    let cycle = refine_cycle(f, guess, &NewtonOptions::default()).and_then(|(pts, _)| PeriodicOrbit::certify(f, &pts));
    let cycle = match cycle {
        Ok(cyc) => cyc,
        Err(_) => {
            return CriticalOrbit {
                critical_point: *c,
                multiplicity,
                segment,
                flag: LandingFlag::EscapingResolution,
                landing: None,
            }
        }
    };
    // first landing, re-evaluated from c directly
    let mut x = *c;
    for steps in 0..=j {
        if let Some(idx) = cycle.points.iter().position(|p| chordal_distance(p, &x) < LANDING_TOL) {
            return CriticalOrbit {
                critical_point: *c,
                multiplicity,
                segment,
                flag: LandingFlag::LandsOnCycle,
                landing: Some(Landing { steps, cycle_index: idx, cycle }),
            };
        }
        x = f.evaluate(&x);
    }
    // the orbit accumulates on the cycle without reaching it to tolerance
    CriticalOrbit { critical_point: *c, multiplicity, segment, flag: LandingFlag::EscapingResolution, landing: None }
}

#[derive(Debug, Clone, Serialize)]
pub struct PcfEntry {
    pub critical_point: SpherePoint,
    pub landing_steps: usize,
    pub landing_point: SpherePoint,
    pub period: usize,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub multiplier: Complex64,
    pub cycle: Vec<SpherePoint>,
}

/// The two sub-conditions of the simple-critical-point variant, with margins.
#[derive(Debug, Clone, Serialize)]
pub struct KappaStarMargins {
    pub all_critical_simple: bool,
    /// Smallest chordal distance between distinct critical points.
    pub min_critical_separation: f64,
    /// Smallest chordal distance from a computed postcritical point to a critical point.
    pub postcritical_to_critical: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PcfCertificate {
    pub verdict: bool,
    pub reasons: Vec<String>,
    pub entries: Vec<PcfEntry>,
    pub margins: KappaStarMargins,
}

/// Numerical certificate that every critical point lands on a repelling
/// cycle free of critical points.
pub fn is_strictly_pcf(data: &PostcriticalData) -> Result<PcfCertificate> {
    let undecided: Vec<String> = data
        .orbits
        .iter()
        .filter(|o| o.flag == LandingFlag::Undecided)
        .map(|o| o.critical_point.to_string())
        .collect();
    if !undecided.is_empty() {
        return Err(Error::Undecidable(format!(
            "no return within {} steps for critical point(s) {}",
            data.max_steps,
            undecided.join(", ")
        )));
    }
    let crit: Vec<SpherePoint> = data.orbits.iter().map(|o| o.critical_point).collect();
    let mut reasons = Vec::new();
    let mut entries = Vec::new();
    for o in &data.orbits {
        let Some(l) = &o.landing else {
            reasons.push(format!("critical point {} did not resolve onto a cycle", o.critical_point));
            continue;
        };
        if l.cycle.points.iter().any(|p| crit.iter().any(|c| chordal_distance(p, c) < LANDING_TOL)) {
            reasons.push(format!("cycle reached from {} contains a critical point", o.critical_point));
        }
        if !l.cycle.is_repelling() {
            reasons.push(format!(
                "cycle reached from {} has |multiplier| = {} (not repelling)",
                o.critical_point,
                l.cycle.multiplier.norm()
            ));
        }
        entries.push(PcfEntry {
            critical_point: o.critical_point,
            landing_steps: l.steps,
            landing_point: l.cycle.points[l.cycle_index],
            period: l.cycle.period,
            multiplier: l.cycle.multiplier,
            cycle: l.cycle.points.clone(),
        });
    }
    let mut sep = f64::INFINITY;
    for i in 0..crit.len() {
        for j in (i + 1)..crit.len() {
            sep = sep.min(chordal_distance(&crit[i], &crit[j]));
        }
    }
    let post = data.postcritical_points();
    let post_to_crit = post
        .iter()
        .flat_map(|p| crit.iter().map(move |c| chordal_distance(p, c)))
        .fold(f64::INFINITY, f64::min);
    let margins = KappaStarMargins {
        all_critical_simple: data.orbits.iter().all(|o| o.multiplicity == 1),
        min_critical_separation: sep,
        postcritical_to_critical: post_to_crit,
    };
    Ok(PcfCertificate { verdict: reasons.is_empty(), reasons, entries, margins })
}
