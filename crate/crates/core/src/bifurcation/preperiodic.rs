//! Parameters at which a critical point lands on a continued repelling cycle.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::continuation::{continue_critical, continue_cycle};
use super::family::FamilySpec;
use crate::error::{Error, Result};
use crate::periodic::{cycle_multiplier, PeriodicOrbit};
use crate::ratmap::RationalMap;
use crate::sphere::{chordal_distance, Chart, SpherePoint};

/// Roots are reported when `|h(λ)|` falls below this.
pub const ROOT_TOL: f64 = 1e-10;
/// Largest parameter increment between two continuation steps.
const PATH_STEP: f64 = 0.01;

/// Critical point and target cycle of one family member, followed from `λ = 0`.
#[derive(Debug, Clone)]
pub(crate) struct Tracked {
    pub lambda: Complex64,
    pub map: RationalMap,
    pub critical: SpherePoint,
    pub cycle: Vec<SpherePoint>,
}

impl Tracked {
    pub fn base(fam: &FamilySpec, critical: SpherePoint, cycle: Vec<SpherePoint>) -> Self {
        Tracked { lambda: Complex64::new(0.0, 0.0), map: fam.base().clone(), critical, cycle }
    }

    /// Moves along the straight segment to `target` in small steps.
    pub fn move_to(&self, fam: &FamilySpec, target: Complex64) -> Result<Tracked> {
        let span = target - self.lambda;
        let steps = ((span.norm() / PATH_STEP).ceil() as usize).max(1);
        let mut cur = self.clone();
        for k in 1..=steps {
            let lambda = if k == steps { target } else { self.lambda + span * (k as f64 / steps as f64) };
            let map = fam.member(lambda)?;
            let critical = continue_critical(&map, &cur.critical)?;
            let cycle = continue_cycle(&map, &cur.cycle)?;
            cur = Tracked { lambda, map, critical, cycle };
        }
        Ok(cur)
    }

    /// `f^steps(c) - q` in the chart of the base landing point.
    pub fn relation(&self, steps: usize, chart: Chart) -> Complex64 {
        self.map.iterate(&self.critical, steps).chart_coord(chart) - self.cycle[0].chart_coord(chart)
    }
}

fn default_grid() -> usize {
    9
}

fn default_max_iter() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreperiodicOptions {
    /// Starts on a `grid x grid` lattice clipped to the search disk, plus `λ = 0`.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Defaults to the family's domain radius.
    #[serde(default)]
    pub search_radius: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for PreperiodicOptions {
    fn default() -> Self {
        PreperiodicOptions { grid: default_grid(), search_radius: None, max_iter: default_max_iter() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreperiodicRoot {
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub lambda: Complex64,
    /// `|h(λ)|` in chart coordinates.
    pub residual: f64,
    /// Chordal distance from `f^steps(c)` to the continued cycle point, recomputed along a fresh path.
    pub landing_distance: f64,
    pub critical_point: SpherePoint,
    pub cycle: Vec<SpherePoint>,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub cycle_multiplier: Complex64,
}

/// Start parameters: `0` followed by the lattice points inside the disk.
pub fn grid_starts(radius: f64, grid: usize) -> Vec<Complex64> {
    let mut starts = vec![Complex64::new(0.0, 0.0)];
    if grid >= 2 && radius > 0.0 {
        for i in 0..grid {
            for j in 0..grid {
                let x = -radius + 2.0 * radius * i as f64 / (grid - 1) as f64;
                let y = -radius + 2.0 * radius * j as f64 / (grid - 1) as f64;
                let z = Complex64::new(x, y);
                if z.norm() <= radius && z.norm() > 0.0 {
                    starts.push(z);
                }
            }
        }
    }
    starts
}

/// Solves `f_λ^steps(c(λ)) = q(λ)` for `λ` in the family disk, where `c` is
/// the `crit_index`-th critical point of the base map and `q` continues
/// `target.points[0]`.
pub fn solve_preperiodic(
    fam: &FamilySpec,
    crit_index: usize,
    landing_steps: usize,
    target: &PeriodicOrbit,
    opts: &PreperiodicOptions,
) -> Result<Vec<PreperiodicRoot>> {
    let crit = fam.base().critical_points()?;
    let Some(&(c0, mult)) = crit.points.get(crit_index) else {
        return Err(Error::Precondition(format!("critical index {crit_index} out of range ({} points)", crit.points.len())));
    };
    if mult != 1 {
        return Err(Error::Precondition("critical point must be simple".into()));
    }
    if !target.is_repelling() {
        return Err(Error::Precondition("target cycle must be repelling".into()));
    }
    let radius = opts.search_radius.unwrap_or(fam.domain_radius()).min(fam.domain_radius());
    let base = Tracked::base(fam, c0, target.points.clone());
    let chart = target.points[0].chart();
    let candidates: Vec<Complex64> = grid_starts(radius, opts.grid)
        .par_iter()
        .filter_map(|&start| newton_from(fam, &base, start, landing_steps, chart, radius, opts.max_iter))
        .collect();
    let mut roots: Vec<PreperiodicRoot> = Vec::new();
    for lambda in candidates {
        if roots.iter().any(|r| (r.lambda - lambda).norm() < 1e-8) {
            continue;
        }
        // verify along a fresh path from the base map
        let Ok(t) = base.move_to(fam, lambda) else { continue };
        let residual = t.relation(landing_steps, chart).norm();
        let landing_distance = chordal_distance(&t.map.iterate(&t.critical, landing_steps), &t.cycle[0]);
        let m = cycle_multiplier(&t.map, &t.cycle);
        if residual < ROOT_TOL && m.norm() > 1.0 {
            roots.push(PreperiodicRoot {
                lambda,
                residual,
                landing_distance,
                critical_point: t.critical,
                cycle: t.cycle,
                cycle_multiplier: m,
            });
        }
    }
    if roots.is_empty() {
        return Err(Error::NoRoots);
    }
    roots.sort_by(|a, b| a.lambda.norm().total_cmp(&b.lambda.norm()));
    Ok(roots)
}

fn newton_from(
    fam: &FamilySpec,
    base: &Tracked,
    start: Complex64,
    steps: usize,
    chart: Chart,
    radius: f64,
    max_iter: usize,
) -> Option<Complex64> {
    let mut t = base.move_to(fam, start).ok()?;
    let mut h = t.relation(steps, chart);
    for _ in 0..max_iter {
        if h.norm() < 1e-14 {
            break;
        }
        let delta = 1e-7 * (1.0 + t.lambda.norm());
        let plus = t.move_to(fam, t.lambda + delta).ok()?.relation(steps, chart);
        let minus = t.move_to(fam, t.lambda - delta).ok()?.relation(steps, chart);
        let dh = (plus - minus) / (2.0 * delta);
        if dh.norm() == 0.0 || !dh.norm().is_finite() {
            return None;
        }
        let full = -h / dh;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=40 {
            let trial = t.lambda + full * scale;
            if trial.norm() <= radius {
                if let Ok(next) = t.move_to(fam, trial) {
                    let hn = next.relation(steps, chart);
                    if hn.norm() < h.norm() {
                        accepted = Some((next, hn));
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        let (next, hn) = accepted?;
        let moved = (next.lambda - t.lambda).norm();
        t = next;
        h = hn;
        if moved < 1e-16 * (1.0 + t.lambda.norm()) {
            break;
        }
    }
    (h.norm() < ROOT_TOL).then_some(t.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::Builtin;

    fn quadratic() -> FamilySpec {
        FamilySpec::builtin(Builtin::Quadratic, 2.5).unwrap()
    }

    fn finite_critical_index(fam: &FamilySpec) -> usize {
        let crit = fam.base().critical_points().unwrap();
        crit.points.iter().position(|(c, _)| !c.is_infinity()).unwrap()
    }

    fn beta_cycle(fam: &FamilySpec) -> PeriodicOrbit {
        PeriodicOrbit::certify(fam.base(), &[SpherePoint::from_re(1.0)]).unwrap()
    }

    #[test]
    fn misiurewicz_parameter_of_the_quadratic_family() {
        let fam = quadratic();
        let roots = solve_preperiodic(&fam, finite_critical_index(&fam), 2, &beta_cycle(&fam), &PreperiodicOptions::default()).unwrap();
        let r = roots.iter().find(|r| (r.lambda - Complex64::new(-2.0, 0.0)).norm() < 1e-6).expect("λ = -2");
        assert!((r.lambda - Complex64::new(-2.0, 0.0)).norm() < 1e-9);
        // substitution oracle: 0 -> λ -> λ^2 + λ equals the fixed point (1 + sqrt(1 - 4λ)) / 2
        for r in &roots {
            let l = r.lambda;
            let beta = (1.0 + (1.0 - 4.0 * l).sqrt()) / 2.0;
            assert!((l * l + l - beta).norm() < 1e-8, "λ = {l}");
            assert!(r.landing_distance < 1e-8);
        }
    }

    #[test]
    fn one_step_roots_pass_substitution() {
        let fam = quadratic();
        match solve_preperiodic(&fam, finite_critical_index(&fam), 1, &beta_cycle(&fam), &PreperiodicOptions::default()) {
            Ok(roots) => {
                for r in roots {
                    let beta = (1.0 + (1.0 - 4.0 * r.lambda).sqrt()) / 2.0;
                    assert!((r.lambda - beta).norm() < 1e-8);
                }
            }
            Err(e) => assert_eq!(e, Error::NoRoots),
        }
    }

    #[test]
    fn relation_already_holding_returns_zero() {
        // (z^2 - 2)/z^2: infinity lands on the fixed point -1 after two steps
        let base = RationalMap::from_real(&[-2.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        let dir = super::super::CoefficientDirection { p: vec![Complex64::new(1.0, 0.0)], q: vec![] };
        let fam = FamilySpec::coefficient_line(base.clone(), dir, 0.05).unwrap();
        let crit = base.critical_points().unwrap();
        let inf = crit.points.iter().position(|(c, _)| c.is_infinity()).unwrap();
        let target = PeriodicOrbit::certify(&base, &[SpherePoint::from_re(-1.0)]).unwrap();
        let opts = PreperiodicOptions { grid: 3, ..Default::default() };
        let roots = solve_preperiodic(&fam, inf, 2, &target, &opts).unwrap();
        assert!(roots[0].lambda.norm() < 1e-12);
    }

    #[test]
    fn attracting_target_is_refused() {
        let fam = quadratic();
        let zero = PeriodicOrbit::certify(fam.base(), &[SpherePoint::zero()]).unwrap();
        assert!(solve_preperiodic(&fam, 0, 2, &zero, &PreperiodicOptions::default()).is_err());
    }
}
