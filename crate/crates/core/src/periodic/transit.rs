//! A single periodic orbit whose empirical measure approximates a convex
//! combination of periodic measures.
//!
//! The orbit is designed as a pseudo-orbit that winds `r_i` times around
//! target cycle `i` and then follows a transition chain to cycle `i + 1`.
//! Transition chains are found backwards: preimages of the next cycle are
//! expanded breadth first until one falls inside the neighborhood of the
//! current cycle where the map is close to affine. The pseudo-orbit is then
//! turned into a true orbit by backward shadowing sweeps and a final Newton
//! polish on the whole cycle.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{refine_cycle, NewtonOptions, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::measures::{coarsen, wasserstein, DiscreteMeasure};
use crate::ratmap::{postcritical_scan, RationalMap};
use crate::sphere::{chordal_distance, SpherePoint};

const EXACT_GAP_ATOMS: usize = 1024;
const COARSE_GAP_ATOMS: usize = 256;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitOptions {
    /// Maximum length of a transition chain.
    pub depth_budget: usize,
    /// Cap on the number of preimages explored per transition.
    pub max_nodes: usize,
    /// Backward shadowing sweeps before the Newton polish.
    pub sweeps: usize,
    /// Targets closer than this to the computed postcritical set are flagged.
    pub postcritical_margin: f64,
    /// Relative error of the affine model that defines the neighborhood radius.
    pub affine_rel_error: f64,
}

impl Default for TransitOptions {
    fn default() -> Self {
        TransitOptions {
            depth_budget: 24,
            max_nodes: 1 << 17,
            sweeps: 60,
            postcritical_margin: 1e-4,
            affine_rel_error: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitReport {
    pub orbit: PeriodicOrbit,
    pub period: usize,
    /// Planned time `n_i` at each target, a multiple of its period.
    pub design_dwell: Vec<usize>,
    /// `n_i / sum_j n_j`
    pub dwell_fractions: Vec<f64>,
    /// Fraction of the closed orbit lying in each target's neighborhood.
    pub achieved_fractions: Vec<f64>,
    pub transition_lengths: Vec<usize>,
    /// Chart radius around each target where the affine model holds.
    pub neighborhood_radii: Vec<f64>,
    /// `d_w(e_N(orbit), sum_i c_i e(p_i))`
    pub gap: f64,
    /// Coarsening bound included in `gap` (zero when solved exactly).
    pub gap_tolerance: f64,
    /// Largest jump `d(f(y_t), y_{t+1})` of the designed pseudo-orbit.
    pub pseudo_orbit_defect: f64,
    /// Largest distance between the closed orbit and the pseudo-orbit.
    pub shadow_distance: f64,
    /// Distance from each target to the computed postcritical set.
    pub postcritical_distance: Vec<f64>,
    /// Targets within the postcritical margin.
    pub postcritical_flags: Vec<bool>,
}

pub fn transit_periodic(
    f: &RationalMap,
    targets: &[PeriodicOrbit],
    coefficients: &[f64],
    dwell_budget: usize,
    opts: &TransitOptions,
) -> Result<TransitReport> {
    if targets.is_empty() || targets.len() != coefficients.len() {
        return Err(Error::Precondition("need one coefficient per target".into()));
    }
    if coefficients.iter().any(|c| !(*c >= 0.0)) || (coefficients.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition("coefficients must be nonnegative and sum to one".into()));
    }
    if let Some(t) = targets.iter().find(|t| !t.is_repelling()) {
        return Err(Error::Precondition(format!("target of period {} is not repelling", t.period)));
    }
    if dwell_budget == 0 {
        return Err(Error::Precondition("dwell_budget must be positive".into()));
    }
    let (postcritical_distance, postcritical_flags) = postcritical_check(f, targets, opts.postcritical_margin);
    let radii: Vec<f64> = targets.iter().map(|t| neighborhood_radius(f, t, opts.affine_rel_error)).collect();

    let active: Vec<usize> = (0..targets.len()).filter(|&i| coefficients[i] > 0.0).collect();
    let design_dwell: Vec<usize> = (0..targets.len())
        .map(|i| {
            if coefficients[i] == 0.0 {
                return 0;
            }
            let per = targets[i].period;
            let reps = (coefficients[i] * dwell_budget as f64 / per as f64).round().max(1.0) as usize;
            reps * per
        })
        .collect();
    let total: usize = design_dwell.iter().sum();
    let dwell_fractions: Vec<f64> = design_dwell.iter().map(|&n| n as f64 / total as f64).collect();
    let cycle_measures = active
        .iter()
        .map(|&i| DiscreteMeasure::uniform(targets[i].points.clone()))
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<(f64, &DiscreteMeasure)> =
        active.iter().zip(&cycle_measures).map(|(&i, m)| (coefficients[i], m)).collect();
    let target_measure = DiscreteMeasure::mixture(&parts)?;

    if active.len() == 1 {
        let t = &targets[active[0]];
        let e = DiscreteMeasure::uniform(t.points.clone())?;
        return Ok(TransitReport {
            orbit: t.clone(),
            period: t.period,
            achieved_fractions: (0..targets.len()).map(|i| if i == active[0] { 1.0 } else { 0.0 }).collect(),
            design_dwell,
            dwell_fractions,
            transition_lengths: vec![],
            neighborhood_radii: radii,
            gap: wasserstein(&e, &target_measure)?,
            gap_tolerance: 0.0,
            pseudo_orbit_defect: 0.0,
            shadow_distance: 0.0,
            postcritical_distance,
            postcritical_flags,
        });
    }

    // transitions active[k] -> active[k + 1]
    let m = active.len();
    let mut chains = Vec::with_capacity(m);
    for k in 0..m {
        let (from, to) = (&targets[active[k]], &targets[active[(k + 1) % m]]);
        chains.push(find_transition(f, from, radii[active[k]], to, opts)?);
    }
    let mut pseudo = Vec::new();
    for k in 0..m {
        let t = &targets[active[k]];
        let per = t.period;
        let prev = &chains[(k + m - 1) % m];
        let exit = &chains[k];
        // dwell from the landing index up to the point whose image is the chain start
        let start = prev.landing_index;
        let stop = (exit.near_index + per - 1) % per;
        let extra = (stop + per - start) % per + 1;
        let reps = design_dwell[active[k]] / per;
        let len = (reps - 1) * per + extra;
        for s in 0..len {
            pseudo.push(t.points[(start + s) % per]);
        }
        pseudo.extend(exit.chain.iter().copied());
    }
    let defect = super::cycle_residual(f, &pseudo);
    let shadowed = backward_shadow(f, &pseudo, opts.sweeps)?;
    let (cycle, _) = refine_cycle(f, &shadowed, &NewtonOptions::default())?;
    let shadow = pseudo.iter().zip(&cycle).map(|(a, b)| chordal_distance(a, b)).fold(0.0, f64::max);
    let max_radius = radii.iter().cloned().fold(0.0, f64::max);
    if shadow > 10.0 * defect.max(max_radius) + 1e-8 {
        return Err(Error::NewtonEscaped { distance: shadow });
    }
    let orbit = PeriodicOrbit::certify(f, &cycle)?;
    let achieved_fractions = achieved(&cycle, targets, &radii);
    let e = DiscreteMeasure::uniform(cycle)?;
    let (gap, gap_tolerance) = if e.len() <= EXACT_GAP_ATOMS {
        (wasserstein(&e, &target_measure)?, 0.0)
    } else {
        let c = coarsen(&e, COARSE_GAP_ATOMS)?;
        (wasserstein(&c.measure, &target_measure)? + c.radius, c.radius)
    };
    Ok(TransitReport {
        period: orbit.period,
        orbit,
        design_dwell,
        dwell_fractions,
        achieved_fractions,
        transition_lengths: chains.iter().map(|c| c.chain.len()).collect(),
        neighborhood_radii: radii,
        gap,
        gap_tolerance,
        pseudo_orbit_defect: defect,
        shadow_distance: shadow,
        postcritical_distance,
        postcritical_flags,
    })
}

fn postcritical_check(f: &RationalMap, targets: &[PeriodicOrbit], margin: f64) -> (Vec<f64>, Vec<bool>) {
    let post = postcritical_scan(f, 200, 1e-6).map(|d| d.postcritical_points()).unwrap_or_default();
    let dist: Vec<f64> = targets
        .iter()
        .map(|t| {
            post.iter()
                .map(|p| t.distance_to(p))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let flags = dist.iter().map(|&d| d <= margin).collect();
    (dist, flags)
}

/// Largest chart radius (halving from 1/2) at which the first-order model of
/// `f` at every cycle point predicts the image within `rel` relative error.
pub fn neighborhood_radius(f: &RationalMap, cycle: &PeriodicOrbit, rel: f64) -> f64 {
    let n = cycle.period;
    let mut r = 0.5;
    for _ in 0..50 {
        let ok = (0..n).all(|i| {
            let p = &cycle.points[i];
            let q = &cycle.points[(i + 1) % n];
            let (cin, cout) = (p.chart(), q.chart());
            let u0 = p.chart_coord(cin);
            let jet = f.jet(cin, u0, cout);
            (0..16).all(|k| {
                let h = Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / 16.0);
                let actual = f.evaluate(&SpherePoint::from_chart(cin, u0 + h)).chart_coord(cout);
                let predicted = jet.value + jet.d1 * h;
                (actual - predicted).norm() <= rel * (jet.d1 * h).norm()
            })
        });
        if ok {
            return r;
        }
        r *= 0.5;
    }
    r
}

struct Transition {
    /// `z_0, ..., z_{k-1}`; `f(z_{k-1})` is the landing point.
    chain: Vec<SpherePoint>,
    /// Index of the source cycle point that `z_0` is close to.
    near_index: usize,
    /// Index of the landing point on the destination cycle.
    landing_index: usize,
}

/// Breadth-first search over iterated preimages of `to` for a point inside
/// the `radius` chart neighborhood of `from`.
fn find_transition(
    f: &RationalMap,
    from: &PeriodicOrbit,
    radius: f64,
    to: &PeriodicOrbit,
    opts: &TransitOptions,
) -> Result<Transition> {
    // node: (point, parent index, depth, landing index)
    let mut nodes: Vec<(SpherePoint, usize, usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    for (li, p) in to.points.iter().enumerate() {
        nodes.push((*p, usize::MAX, 0, li));
        queue.push_back(nodes.len() - 1);
    }
    let near = |x: &SpherePoint| {
        from.points.iter().position(|a| {
            let c = a.chart();
            (x.chart_coord(c) - a.chart_coord(c)).norm() < radius
        })
    };
    while let Some(idx) = queue.pop_front() {
        let (y, _, depth, landing) = nodes[idx];
        if depth >= opts.depth_budget {
            continue;
        }
        for z in f.preimages(&y)? {
            if to.contains(&z, 1e-9) {
                continue;
            }
            nodes.push((z, idx, depth + 1, landing));
            let zi = nodes.len() - 1;
            if let Some(near_index) = near(&z) {
                let mut chain = Vec::with_capacity(depth + 1);
                let mut cur = zi;
                while nodes[cur].2 > 0 {
                    chain.push(nodes[cur].0);
                    cur = nodes[cur].1;
                }
                return Ok(Transition { chain, near_index, landing_index: landing });
            }
            if nodes.len() >= opts.max_nodes {
                return Err(Error::TransitionNotFound(depth + 1));
            }
            queue.push_back(zi);
        }
    }
    Err(Error::TransitionNotFound(opts.depth_budget))
}

/// Replaces each point by the preimage of its successor closest to it,
/// sweeping backwards around the cycle until the sweep stops moving points.
fn backward_shadow(f: &RationalMap, pseudo: &[SpherePoint], sweeps: usize) -> Result<Vec<SpherePoint>> {
    let n = pseudo.len();
    let mut cur = pseudo.to_vec();
    for _ in 0..sweeps {
        let mut moved: f64 = 0.0;
        for t in (0..n).rev() {
            let next = cur[(t + 1) % n];
            let pre = f.preimages(&next)?;
            let best = pre
                .iter()
                .min_by(|a, b| chordal_distance(a, &cur[t]).partial_cmp(&chordal_distance(b, &cur[t])).unwrap())
                .copied()
                .expect("degree >= 2");
            moved = moved.max(chordal_distance(&best, &cur[t]));
            cur[t] = best;
        }
        if moved < 1e-13 {
            break;
        }
    }
    Ok(cur)
}

fn achieved(cycle: &[SpherePoint], targets: &[PeriodicOrbit], radii: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; targets.len()];
    for x in cycle {
        let hit = targets.iter().enumerate().find(|(i, t)| {
            t.points.iter().any(|a| {
                let c = a.chart();
                (x.chart_coord(c) - a.chart_coord(c)).norm() < radii[*i]
            })
        });
        if let Some((i, _)) = hit {
            counts[i] += 1;
        }
    }
    counts.iter().map(|&c| c as f64 / cycle.len() as f64).collect()
}
