//! Finite-difference Jacobian of the critical-orbit relations of a strictly
//! postcritically finite map, taken over coefficient space.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::continuation::{continue_critical, continue_cycle};
use super::family::CoefficientDirection;
use crate::error::{Error, Result};
use crate::ratmap::{is_strictly_pcf, PostcriticalData, RationalMap, LANDING_TOL};
use crate::sphere::{chordal_distance, Chart, SpherePoint};

/// Singular values above `RANK_TOL * σ_1` count toward the rank.
pub const RANK_TOL: f64 = 1e-8;

/// What a critical orbit is tied to after `steps` iterations.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", content = "points", rename_all = "snake_case")]
pub enum Target {
    /// A periodic cycle, rotated to start at the landing point.
    Cycle(Vec<SpherePoint>),
    /// Another critical point met before the orbit lands.
    Critical(SpherePoint),
}

/// `f^steps(c) = target` for one critical point.
#[derive(Debug, Clone, Serialize)]
pub struct Relation {
    pub critical_point: SpherePoint,
    pub steps: usize,
    pub target: Target,
    #[serde(skip)]
    chart: Chart,
}

/// The relations of every critical point, with their continuations to nearby maps.
#[derive(Debug, Clone, Serialize)]
pub struct RelationSystem {
    pub base: RationalMap,
    pub relations: Vec<Relation>,
    /// Index of the coefficient held fixed (the largest one) in `p_0..p_d, q_0..q_d`.
    pub fixed_coefficient: usize,
    scale: f64,
}

impl RelationSystem {
    /// Needs a strictly pcf certificate with simple critical points.
    pub fn from_pcf(f: &RationalMap, data: &PostcriticalData) -> Result<Self> {
        if data.map != *f {
            return Err(Error::Precondition("postcritical data belongs to another map".into()));
        }
        let cert = is_strictly_pcf(data)?;
        if !cert.verdict {
            return Err(Error::Precondition(format!("map is not strictly pcf: {}", cert.reasons.join("; "))));
        }
        if !cert.margins.all_critical_simple {
            return Err(Error::Precondition("critical points must be simple".into()));
        }
        let crit: Vec<SpherePoint> = data.orbits.iter().map(|o| o.critical_point).collect();
        let mut relations = Vec::new();
        for (i, o) in data.orbits.iter().enumerate() {
            let l = o.landing.as_ref().expect("certified orbits have landings");
            // an orbit through another critical point is tied to it: the
            // landing relation would then repeat that point's relation to first order
            let mut x = o.critical_point;
            let mut hit = None;
            for k in 1..l.steps {
                x = f.evaluate(&x);
                if let Some(j) = (0..crit.len()).find(|&j| j != i && chordal_distance(&crit[j], &x) < LANDING_TOL) {
                    hit = Some((k, crit[j]));
                    break;
                }
            }
            let relation = match hit {
                Some((steps, c)) => Relation { critical_point: o.critical_point, steps, chart: c.chart(), target: Target::Critical(c) },
                None => {
                    let n = l.cycle.points.len();
                    let cycle: Vec<SpherePoint> = (0..n).map(|k| l.cycle.points[(l.cycle_index + k) % n]).collect();
                    Relation { critical_point: o.critical_point, steps: l.steps, chart: cycle[0].chart(), target: Target::Cycle(cycle) }
                }
            };
            relations.push(relation);
        }
        let coeffs: Vec<Complex64> = f.numerator().iter().chain(f.denominator()).copied().collect();
        let (fixed, scale) = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c.norm()))
            .fold((0, 0.0), |best, x| if x.1 > best.1 { x } else { best });
        Ok(RelationSystem { base: f.clone(), relations, fixed_coefficient: fixed, scale })
    }

    pub fn degree(&self) -> usize {
        self.base.degree()
    }

    /// Coefficient indices that are varied, in column order.
    pub fn free_coefficients(&self) -> Vec<usize> {
        (0..2 * self.degree() + 2).filter(|&k| k != self.fixed_coefficient).collect()
    }

    /// The base map moved by `t * scale` along `v`, a vector over the free coefficients.
    pub fn perturbed(&self, v: &[Complex64], t: f64) -> Result<RationalMap> {
        let d = self.degree();
        let mut p = self.base.numerator().to_vec();
        let mut q = self.base.denominator().to_vec();
        for (&k, &vk) in self.free_coefficients().iter().zip(v) {
            let dv = vk * (t * self.scale);
            if k <= d {
                p[k] += dv;
            } else {
                q[k - d - 1] += dv;
            }
        }
        RationalMap::new(p, q)
    }

    /// A free-coefficient vector as a full coefficient direction.
    pub fn direction(&self, v: &[Complex64]) -> CoefficientDirection {
        let d = self.degree();
        let mut p = vec![Complex64::new(0.0, 0.0); d + 1];
        let mut q = p.clone();
        for (&k, &vk) in self.free_coefficients().iter().zip(v) {
            let dv = vk * self.scale;
            if k <= d {
                p[k] = dv;
            } else {
                q[k - d - 1] = dv;
            }
        }
        CoefficientDirection { p, q }
    }

    /// Relation residuals at a nearby map, each in the base chart of its landing point.
    pub fn values(&self, g: &RationalMap) -> Result<Vec<Complex64>> {
        self.relations
            .iter()
            .map(|r| {
                let c = continue_critical(g, &r.critical_point)?;
                let image = g.iterate(&c, r.steps);
                let target = match &r.target {
                    Target::Cycle(cycle) => continue_cycle(g, cycle)?[0],
                    Target::Critical(c) => continue_critical(g, c)?,
                };
                Ok(image.chart_coord(r.chart) - target.chart_coord(r.chart))
            })
            .collect()
    }

    /// Central differences with relative coefficient step `step`; one row per relation.
    pub fn jacobian(&self, step: f64) -> Result<DMatrix<Complex64>> {
        let free = self.free_coefficients();
        let rows = self.relations.len();
        let mut jac = DMatrix::<Complex64>::zeros(rows, free.len());
        for col in 0..free.len() {
            let mut e = vec![Complex64::new(0.0, 0.0); free.len()];
            e[col] = Complex64::new(1.0, 0.0);
            let plus = self.values(&self.perturbed(&e, step)?)?;
            let minus = self.values(&self.perturbed(&e, -step)?)?;
            for r in 0..rows {
                jac[(r, col)] = (plus[r] - minus[r]) / (2.0 * step);
            }
        }
        Ok(jac)
    }
}

pub(crate) fn sorted_singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct TransversalityReport {
    #[serde(serialize_with = "crate::serde_util::complex_mat")]
    pub jacobian: Vec<Vec<Complex64>>,
    pub singular_values: Vec<f64>,
    pub rank_estimate: usize,
    pub step_size: f64,
    pub rank_tol: f64,
    /// Coefficient held fixed to remove the scaling direction.
    pub fixed_coefficient: usize,
}

/// Numerical rank of the critical-relation Jacobian; the expected value is
/// `2d - 2` with a three-dimensional kernel of Möbius conjugation directions.
pub fn transversality_rank(f: &RationalMap, data: &PostcriticalData, step: f64) -> Result<TransversalityReport> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::Precondition(format!("step {step} must lie in (0, 1)")));
    }
    let sys = RelationSystem::from_pcf(f, data)?;
    let jac = sys.jacobian(step)?;
    let singular_values = sorted_singular_values(&jac);
    let top = singular_values.first().copied().unwrap_or(0.0);
    let rank_estimate = singular_values.iter().filter(|&&s| s > RANK_TOL * top).count();
    Ok(TransversalityReport {
        jacobian: jac.row_iter().map(|r| r.iter().copied().collect()).collect(),
        singular_values,
        rank_estimate,
        step_size: step,
        rank_tol: RANK_TOL,
        fixed_coefficient: sys.fixed_coefficient,
    })
}

/// Unit free-coefficient vector that keeps every relation except `active`
/// to first order while moving `active` as much as possible: the projection
/// of row `active` onto the kernel of the other rows.
pub fn keep_others_direction(jac: &DMatrix<Complex64>, active: usize) -> Result<Vec<Complex64>> {
    let (rows, cols) = jac.shape();
    if active >= rows {
        return Err(Error::Precondition(format!("relation {active} out of range")));
    }
    let row: DMatrix<Complex64> = DMatrix::from_iterator(cols, 1, jac.row(active).iter().map(|c| c.conj()));
    let others: Vec<usize> = (0..rows).filter(|&r| r != active).collect();
    let mut v = row.clone();
    if !others.is_empty() {
        let a = jac.select_rows(&others);
        let svd = a.clone().svd(false, true);
        let vt = svd.v_t.expect("requested");
        let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
        // remove the row-space component of the others
        for (k, s) in svd.singular_values.iter().enumerate() {
            if *s > RANK_TOL * top {
                let basis: DMatrix<Complex64> = DMatrix::from_iterator(cols, 1, vt.row(k).iter().map(|c| c.conj()));
                let coef = (basis.adjoint() * &v)[(0, 0)];
                v -= basis * coef;
            }
        }
    }
    let norm = v.norm();
    if !(norm > RANK_TOL * row.norm().max(1e-300)) {
        return Err(Error::ContinuationFailed("active relation is dependent on the others".into()));
    }
    Ok((0..cols).map(|k| v[(k, 0)] / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratmap::postcritical_scan;
    use crate::sphere::MobiusMap;

    fn lattes() -> RationalMap {
        RationalMap::from_real(&[-2.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap()
    }

    fn report(f: &RationalMap, step: f64) -> TransversalityReport {
        transversality_rank(f, &postcritical_scan(f, 50, 1e-6).unwrap(), step).unwrap()
    }

    #[test]
    fn lattes_relations_have_full_rank() {
        let r = report(&lattes(), 1e-5);
        assert_eq!(r.jacobian.len(), 2);
        assert_eq!(r.jacobian[0].len(), 5);
        assert_eq!(r.rank_estimate, 2);
        assert!(r.singular_values[1] / r.singular_values[0] > 1e-4);
        assert_eq!(report(&lattes(), 5e-6).rank_estimate, 2);
    }

    #[test]
    fn step_halving_agrees() {
        let a = report(&lattes(), 1e-4);
        let b = report(&lattes(), 5e-5);
        for (ra, rb) in a.jacobian.iter().zip(&b.jacobian) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).norm() <= 0.01 * y.norm().max(1e-6), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn mobius_conjugation_keeps_relations() {
        let f = lattes();
        let sys = RelationSystem::from_pcf(&f, &postcritical_scan(&f, 50, 1e-6).unwrap()).unwrap();
        let h = 1e-4;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let moves = [
            [[one, Complex64::new(h, 0.0)], [zero, one]],
            [[Complex64::new(1.0 + h, 0.0), zero], [zero, one]],
            [[one, zero], [Complex64::new(h, 0.0), one]],
        ];
        for m in moves {
            let g = f.conjugate(&MobiusMap::new(m).unwrap()).unwrap();
            for v in sys.values(&g).unwrap() {
                assert!(v.norm() < 10.0 * h * h, "|Φ| = {}", v.norm());
            }
        }
        // a generic coefficient move is first order
        let e = [one, zero, zero, zero, zero];
        let g = sys.perturbed(&e, h).unwrap();
        assert!(sys.values(&g).unwrap().iter().any(|v| v.norm() > h / 10.0));
    }

    #[test]
    fn rank_ignores_common_scaling() {
        let f = lattes();
        let s = Complex64::new(0.3, 1.7);
        let g = RationalMap::new(
            f.numerator().iter().map(|c| c * s).collect(),
            f.denominator().iter().map(|c| c * s).collect(),
        )
        .unwrap();
        assert_eq!(report(&g, 1e-5).rank_estimate, report(&f, 1e-5).rank_estimate);
    }

    #[test]
    fn non_pcf_map_is_refused() {
        let f = RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap();
        let data = postcritical_scan(&f, 20, 1e-6).unwrap();
        assert!(matches!(transversality_rank(&f, &data, 1e-5), Err(Error::Precondition(_))));
    }

    #[test]
    fn kernel_direction_keeps_the_other_relation() {
        let f = lattes();
        let sys = RelationSystem::from_pcf(&f, &postcritical_scan(&f, 50, 1e-6).unwrap()).unwrap();
        let jac = sys.jacobian(1e-5).unwrap();
        let v = keep_others_direction(&jac, 0).unwrap();
        let t = 1e-4;
        let vals = sys.values(&sys.perturbed(&v, t).unwrap()).unwrap();
        assert!(vals[1].norm() < 1e-2 * vals[0].norm(), "{vals:?}");
        assert!(vals[0].norm() > 1e-6);
    }
}
