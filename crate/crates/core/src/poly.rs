//! Dense complex polynomials (ascending coefficients) and an Aberth–Ehrlich
//! simultaneous root finder.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients below `rel * max|c|` count as zero when trimming.
pub const TRIM_REL: f64 = 1e-14;

pub fn eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
}

/// `(p(z), p'(z))` by Horner.
pub fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect()
}

pub fn add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(ZERO) + b.get(i).copied().unwrap_or(ZERO))
        .collect()
}

pub fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let nb: Vec<Complex64> = b.iter().map(|c| -c).collect();
    add(a, &nb)
}

pub fn scale(a: &[Complex64], s: Complex64) -> Vec<Complex64> {
    a.iter().map(|&c| c * s).collect()
}

pub fn mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn pow(a: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..k {
        out = mul(&out, a);
    }
    out
}

pub fn max_modulus(coeffs: &[Complex64]) -> f64 {
    coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Degree after discarding high-order coefficients below `rel * max|c|`.
/// `None` for the zero polynomial.
pub fn degree(coeffs: &[Complex64], rel: f64) -> Option<usize> {
    let m = max_modulus(coeffs);
    if m == 0.0 {
        return None;
    }
    coeffs.iter().rposition(|c| c.norm() > rel * m)
}

pub fn trim(coeffs: &[Complex64], rel: f64) -> Vec<Complex64> {
    match degree(coeffs, rel) {
        None => Vec::new(),
        Some(d) => coeffs[..=d].to_vec(),
    }
}

/// Aberth–Ehrlich iteration driven by a Newton-ratio oracle `z -> p(z)/p'(z)`.
///
/// Works for polynomials that are only available through evaluation (e.g.
/// iterates of a rational map). Returns the final approximations and whether
/// every correction fell below the relative tolerance.
pub fn aberth_with<F>(newton_ratio: F, mut roots: Vec<Complex64>, max_iter: usize) -> (Vec<Complex64>, bool)
where
    F: Fn(Complex64) -> Complex64,
{
    let n = roots.len();
    let mut done = vec![false; n];
    for _ in 0..max_iter {
        let mut all_done = true;
        for k in 0..n {
            if done[k] {
                continue;
            }
            let zk = roots[k];
            let ratio = newton_ratio(zk);
            if !ratio.re.is_finite() || !ratio.im.is_finite() {
                // p'(z) = 0 or overflow: nudge off the bad spot.
                roots[k] = zk + Complex64::new(1e-3, 7e-4) * zk.norm().max(1e-3);
                all_done = false;
                continue;
            }
            if ratio == ZERO {
                done[k] = true;
                continue;
            }
            let mut repulsion = ZERO;
            for (j, &zj) in roots.iter().enumerate() {
                if j != k {
                    let diff = zk - zj;
                    if diff != ZERO {
                        repulsion += diff.inv();
                    }
                }
            }
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            let w = if w.re.is_finite() && w.im.is_finite() { w } else { ratio };
            roots[k] = zk - w;
            if w.norm() <= 4.0 * f64::EPSILON * roots[k].norm().max(f64::MIN_POSITIVE) {
                done[k] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            return (roots, true);
        }
    }
    let converged = done.iter().all(|&d| d);
    (roots, converged)
}

/// Starting points on a circle, rotated off the real axis so that real
/// polynomials do not start on a symmetry line.
pub fn circle_guesses(n: usize, radius: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / n as f64 + 0.4))
        .collect()
}

/// All roots of a polynomial, with multiplicity, certified by the residual
/// bound `|p(r)| <= 1e-8 * sum_k |c_k| |r|^k`.
///
/// Exact zero roots are split off first so monomial factors come out exact.
pub fn roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let coeffs = trim(coeffs, TRIM_REL);
    let Some(deg) = coeffs.len().checked_sub(1) else {
        return Err(Error::RootFindingFailed("zero polynomial".into()));
    };
    let m = max_modulus(&coeffs);
    let zeros = coeffs.iter().position(|c| c.norm() > TRIM_REL * m).unwrap_or(0);
    let mut out = vec![ZERO; zeros];
    let reduced = &coeffs[zeros..];
    let rdeg = deg - zeros;
    if rdeg == 0 {
        return Ok(out);
    }
    if rdeg == 1 {
        out.push(-reduced[0] / reduced[1]);
        return Ok(out);
    }
    let radius = (reduced[0].norm() / reduced[rdeg].norm()).powf(1.0 / rdeg as f64);
    let radius = if radius.is_finite() && radius > 0.0 { radius } else { 1.0 };
    let dp = derivative(reduced);
    let ratio = |z: Complex64| eval(reduced, z) / eval(&dp, z);
    let (found, _) = aberth_with(ratio, circle_guesses(rdeg, radius), 2000);
    for r in &found {
        let scale: f64 = reduced
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * r.norm().powi(k as i32))
            .sum();
        let res = eval(reduced, *r).norm();
        if !(res <= 1e-8 * scale) {
            return Err(Error::RootFindingFailed(format!(
                "residual {res:e} at root {r} exceeds bound (scale {scale:e})"
            )));
        }
    }
    out.extend(found);
    Ok(out)
}

/// Merges roots closer than `rel * max(1, |r|)`; returns (centroid, multiplicity).
pub fn cluster(roots: &[Complex64], rel: f64) -> Vec<(Complex64, usize)> {
    let n = roots.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let tol = rel * roots[i].norm().max(roots[j].norm()).max(1.0);
            if (roots[i] - roots[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Complex64, usize)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => {
                g.1 += roots[i];
                g.2 += 1;
            }
            None => groups.push((r, roots[i], 1)),
        }
    }
    groups.into_iter().map(|(_, s, m)| (s / m as f64, m)).collect()
}
