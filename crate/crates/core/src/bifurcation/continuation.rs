//! Following critical points and cycles of a base map to nearby maps.

use crate::error::{Error, Result};
use crate::periodic::{refine_cycle, NewtonOptions};
use crate::ratmap::RationalMap;
use crate::sphere::{chordal_distance, SpherePoint};

/// Continued points may move at most this far (chordal) from their base value.
pub const MAX_DRIFT: f64 = 0.1;

/// The critical point of `g` near `c0`: Newton on the chart derivative.
pub fn continue_critical(g: &RationalMap, c0: &SpherePoint) -> Result<SpherePoint> {
    let chart = c0.chart();
    let out = g.evaluate(c0).chart();
    let mut u = c0.chart_coord(chart);
    for _ in 0..60 {
        let j = g.jet(chart, u, out);
        if j.d2.norm() == 0.0 || !j.d2.norm().is_finite() {
            return Err(Error::ContinuationFailed(format!("degenerate critical point near {c0}")));
        }
        let step = j.d1 / j.d2;
        u -= step;
        if !(step.norm() > 1e-15 * (1.0 + u.norm())) {
            break;
        }
    }
    let c = SpherePoint::from_chart(chart, u);
    let j = g.jet(chart, u, out);
    if !(j.d1.norm() <= 1e-9 * (1.0 + j.d2.norm())) || chordal_distance(&c, c0) > MAX_DRIFT {
        return Err(Error::ContinuationFailed(format!("critical point near {c0} lost (|f'| = {:e})", j.d1.norm())));
    }
    Ok(c)
}

/// The cycle of `g` near the base cycle `points`, in the same order.
pub fn continue_cycle(g: &RationalMap, points: &[SpherePoint]) -> Result<Vec<SpherePoint>> {
    let (pts, res) = refine_cycle(g, points, &NewtonOptions::default())
        .map_err(|e| Error::ContinuationFailed(format!("cycle through {}: {e}", points[0])))?;
    let drift = pts.iter().zip(points).map(|(a, b)| chordal_distance(a, b)).fold(0.0, f64::max);
    if drift > MAX_DRIFT || !(res < 1e-9) {
        return Err(Error::ContinuationFailed(format!("cycle through {} drifted {drift:e}", points[0])));
    }
    Ok(pts)
}
