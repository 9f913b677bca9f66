//! Multiple-shooting Newton for cycles `p_0 -> p_1 -> ... -> p_{n-1} -> p_0`.
//!
//! Each point lives in its own adapted chart. The linearized residual system
//! `a_i δ_i - δ_{i+1} = -r_i` is cyclic bidiagonal and is solved in O(n) by
//! Givens rotations, so long cycles stay cheap and well conditioned.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ratmap::RationalMap;
use crate::sphere::{chordal_distance, SpherePoint};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Stop once the cycle residual drops below this.
    pub tol: f64,
    /// A run that stalls is still accepted when the residual is below this.
    pub accept_tol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iter: 100, tol: 1e-14, accept_tol: 1e-11, max_halvings: 40 }
    }
}

/// Largest chordal gap `d(f(p_i), p_{i+1 mod n})`.
pub fn cycle_residual(f: &RationalMap, points: &[SpherePoint]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| chordal_distance(&f.evaluate(&points[i]), &points[(i + 1) % n]))
        .fold(0.0, f64::max)
}

/// Solves `a_i x_i - x_{(i+1) mod n} = b_i`. `None` if the system is singular.
pub(crate) fn solve_cyclic(a: &[Complex64], b: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = a.len();
    if n == 1 {
        let den = a[0] - ONE;
        return (den.norm() > 0.0).then(|| vec![b[0] / den]);
    }
    let m = n - 1;
    let mut diag = a[..m].to_vec();
    let mut sup = vec![-ONE; m];
    let mut last = vec![ZERO; m];
    let mut rhs = b[..m].to_vec();
    // bottom row: -x_0 + a_{n-1} x_{n-1} = b_{n-1}, spike walks right
    let mut spike = -ONE;
    let mut corner = a[m];
    let mut rb = b[m];
    for i in 0..m {
        if i + 1 == m {
            last[i] += sup[i];
            sup[i] = ZERO;
        }
        let (x, y) = (diag[i], spike);
        let r = x.norm().hypot(y.norm());
        if r == 0.0 {
            return None;
        }
        let (c, s) = (x / r, y / r);
        let (cc, sc) = (c.conj(), s.conj());
        diag[i] = Complex64::new(r, 0.0);
        let (si, li, ri) = (sup[i], last[i], rhs[i]);
        sup[i] = cc * si;
        last[i] = cc * li + sc * corner;
        rhs[i] = cc * ri + sc * rb;
        spike = -s * si;
        corner = -s * li + c * corner;
        rb = -s * ri + c * rb;
    }
    let scale = diag.iter().map(|d| d.norm()).fold(corner.norm(), f64::max);
    if !(corner.norm() > 1e-300 * scale.max(1.0)) {
        return None;
    }
    let mut out = vec![ZERO; n];
    out[m] = rb / corner;
    for i in (0..m).rev() {
        let next = if i + 1 < m { out[i + 1] } else { ZERO };
        out[i] = (rhs[i] - sup[i] * next - last[i] * out[m]) / diag[i];
    }
    out.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(out)
}

/// Runs damped Newton from `guess` and returns the refined cycle and its residual.
pub fn refine_cycle(f: &RationalMap, guess: &[SpherePoint], opts: &NewtonOptions) -> Result<(Vec<SpherePoint>, f64)> {
    let n = guess.len();
    if n == 0 {
        return Err(Error::Precondition("empty cycle guess".into()));
    }
    let mut pts = guess.to_vec();
    let mut res = cycle_residual(f, &pts);
    // a few extra steps past `tol` sharpen superattracting cycles, where the
    // residual is quadratic in the position error
    let mut extra = 3;
    for _ in 0..opts.max_iter {
        if res == 0.0 {
            break;
        }
        if res < opts.tol {
            if extra == 0 {
                break;
            }
            extra -= 1;
        }
        let charts: Vec<_> = pts.iter().map(|p| p.chart()).collect();
        let coords: Vec<Complex64> = pts.iter().map(|p| p.chart_coord(p.chart())).collect();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for i in 0..n {
            let j = (i + 1) % n;
            let jet = f.jet(charts[i], coords[i], charts[j]);
            a.push(jet.d1);
            b.push(coords[j] - jet.value);
        }
        if a.iter().chain(b.iter()).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            break;
        }
        let Some(delta) = solve_cyclic(&a, &b) else {
            if res < opts.accept_tol {
                break;
            }
            let cond = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
            return Err(Error::JacobianSingular { condition: cond / f64::MIN_POSITIVE });
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<SpherePoint> = (0..n)
                .map(|i| SpherePoint::from_chart(charts[i], coords[i] + delta[i] * step))
                .collect();
            let tres = cycle_residual(f, &trial);
            if tres < res {
                pts = trial;
                res = tres;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res < opts.accept_tol {
        Ok((pts, res))
    } else {
        Err(Error::NoConvergence(format!("cycle residual {res:e} after Newton")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cyclic_solver_matches_dense_solve() {
        for n in 1..7 {
            let a: Vec<Complex64> = (0..n).map(|i| c(1.5 + i as f64, 0.3 * i as f64 - 0.5)).collect();
            let b: Vec<Complex64> = (0..n).map(|i| c(i as f64 - 1.0, 0.7)).collect();
            let x = solve_cyclic(&a, &b).unwrap();
            for i in 0..n {
                let lhs = a[i] * x[i] - x[(i + 1) % n];
                assert!((lhs - b[i]).norm() < 1e-12, "n={n} row {i}");
            }
        }
    }

    #[test]
    fn singular_cyclic_system_is_detected() {
        // product of a_i equals 1: (1, 1) has the all-ones kernel
        assert!(solve_cyclic(&[ONE, ONE], &[ZERO, ZERO]).is_none());
        assert!(solve_cyclic(&[ONE], &[ONE]).is_none());
    }

    #[test]
    fn refines_two_cycle_of_basilica() {
        let f = RationalMap::from_real(&[-1.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap();
        let guess = [SpherePoint::from_re(0.05), SpherePoint::from_re(-0.97)];
        let (cyc, res) = refine_cycle(&f, &guess, &NewtonOptions::default()).unwrap();
        assert!(res < 1e-14);
        assert!(cyc[0].approx_eq(&SpherePoint::zero()));
        assert!(cyc[1].approx_eq(&SpherePoint::from_re(-1.0)));
    }

    #[test]
    fn cycle_through_infinity() {
        // 1/z^2 swaps 0 and ∞
        let f = RationalMap::from_real(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        let guess = [SpherePoint::from_re(0.01), SpherePoint::from_re(90.0)];
        let (cyc, _) = refine_cycle(&f, &guess, &NewtonOptions::default()).unwrap();
        assert!(cyc[0].approx_eq(&SpherePoint::zero()));
        assert!(chordal_distance(&cyc[1], &SpherePoint::infinity()) < 1e-12);
    }
}
