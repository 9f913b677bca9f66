//! Closing a nearly returning orbit segment into a true periodic orbit.

use serde::Serialize;

use super::{refine_cycle, NewtonOptions, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::measures::{coarsen, wasserstein, DiscreteMeasure};
use crate::ratmap::{OrbitRecord, RationalMap};
use crate::sphere::{chordal_distance, SpherePoint};

/// Segments longer than this are coarsened before the transport solve.
const EXACT_GAP_ATOMS: usize = 256;
/// Near-return candidates tried, best first, before giving up.
const CANDIDATES: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct ClosingResult {
    /// The orbit segment `x_i, ..., x_j` that was closed.
    pub source_orbit: OrbitRecord,
    /// Offset `i` of the segment inside the input orbit.
    pub segment_start: usize,
    /// `d(x_i, x_j)`
    pub return_distance: f64,
    pub periodic: PeriodicOrbit,
    /// `max_k d(f^k(x_i), f^k(p))` over one pass of the segment.
    pub shadow_distance: f64,
    /// `d_w(e_n(x_i), e_n(p))` with `n = j - i`.
    pub measure_gap: f64,
    /// Coarsening bound folded into `measure_gap` (zero when solved exactly).
    pub measure_gap_tolerance: f64,
}

/// Finds the closest pair `i < j` of orbit points within `return_tol`, runs
/// Newton for the period `j - i` cycle through `x_i`, and measures how well
/// the resulting periodic orbit shadows the segment.
pub fn close_orbit(f: &RationalMap, orbit: &OrbitRecord, return_tol: f64) -> Result<ClosingResult> {
    let pts = &orbit.points;
    if pts.len() < 2 {
        return Err(Error::Precondition("orbit needs at least two points".into()));
    }
    let candidates = near_returns(pts, return_tol);
    if candidates.is_empty() {
        let best = (0..pts.len())
            .flat_map(|i| ((i + 1)..pts.len()).map(move |j| (i, j)))
            .map(|(i, j)| chordal_distance(&pts[i], &pts[j]))
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NoNearReturn { best });
    }
    let mut last_err = None;
    for (dist, i, j) in candidates {
        match close_segment(f, orbit, i, j, dist, return_tol) {
            Ok(r) => return Ok(r),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one candidate"))
}

/// Up to [`CANDIDATES`] pairs below `tol`, closest first, ties broken by
/// shorter period and then earlier start. Pairs sharing a start are skipped
/// after the first so the candidates differ.
fn near_returns(pts: &[SpherePoint], tol: f64) -> Vec<(f64, usize, usize)> {
    let mut all = Vec::new();
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = chordal_distance(&pts[i], &pts[j]);
            if d < tol {
                all.push((d, i, j));
            }
        }
    }
    all.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then((a.2 - a.1).cmp(&(b.2 - b.1)))
            .then(a.1.cmp(&b.1))
    });
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    for c in all {
        if out.len() == CANDIDATES {
            break;
        }
        if !out.iter().any(|o| o.1 == c.1) {
            out.push(c);
        }
    }
    out
}

fn close_segment(
    f: &RationalMap,
    orbit: &OrbitRecord,
    i: usize,
    j: usize,
    dist: f64,
    return_tol: f64,
) -> Result<ClosingResult> {
    let n = j - i;
    let seg = &orbit.points[i..j];
    let (cycle, _) = refine_cycle(f, seg, &NewtonOptions::default())?;
    let shadow = seg.iter().zip(&cycle).map(|(x, p)| chordal_distance(x, p)).fold(0.0, f64::max);
    if shadow > 10.0 * return_tol {
        return Err(Error::NewtonEscaped { distance: shadow });
    }
    let periodic = PeriodicOrbit::certify(f, &cycle)?;
    let e_x = DiscreteMeasure::uniform(seg.to_vec())?;
    let e_p = DiscreteMeasure::uniform(cycle)?;
    let (gap, tol) = if n <= EXACT_GAP_ATOMS {
        (wasserstein(&e_x, &e_p)?, 0.0)
    } else {
        let cx = coarsen(&e_x, EXACT_GAP_ATOMS)?;
        let cp = coarsen(&e_p, EXACT_GAP_ATOMS)?;
        (wasserstein(&cx.measure, &cp.measure)?, cx.bound() + cp.bound())
    };
    Ok(ClosingResult {
        source_orbit: OrbitRecord { start: orbit.points[i], points: orbit.points[i..=j].to_vec(), map_id: orbit.map_id },
        segment_start: i,
        return_distance: dist,
        periodic,
        shadow_distance: shadow,
        measure_gap: gap,
        measure_gap_tolerance: tol,
    })
}
