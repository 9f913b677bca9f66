//! Parabolic parameters: `f_λ^N(z) = z` together with `(f_λ^N)'(z) = 1`,
//! solved by Newton on `(λ, z)` in double-double arithmetic.
//!
//! Derivatives in `λ` are carried along the orbit analytically, so no finite
//! differences are involved. Every accepted solution is re-checked by an
//! independent evaluation in homogeneous coordinates.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use super::continuation::continue_cycle;
use super::family::FamilySpec;
use crate::error::{Error, Result};
use crate::jet::form_on_chart;
use crate::measures::DiscreteMeasure;
use crate::periodic::{cycle_multiplier, cycle_residual, PeriodicOrbit};
use crate::periodic::transit_neighborhood_radius as neighborhood_radius;
use crate::sphere::{chordal_distance, Chart, SpherePoint};

type Dd = TwoFloat;
type Cdd = Complex<TwoFloat>;

/// Both residuals of an accepted solution stay below this, in the solver and
/// in the homogeneous re-check.
pub const VERIFY_TOL: f64 = 1e-9;
/// A converged orbit repeating after a proper divisor of the period to within
/// this (chordal, at every point) is an exact-period failure. Newton converges
/// only linearly to such degenerate roots, so the points stay split by roughly
/// the square root of the residual.
pub const EXACT_PERIOD_TOL: f64 = 1e-4;
/// The `f64` re-check counts as resolving the parameter below this.
pub const F64_RESOLVED_TOL: f64 = 1e-6;
/// Newton stops with a singular Jacobian above this condition number.
const SINGULAR_CONDITION: f64 = 1e28;

fn dd(z: Complex64) -> Cdd {
    Complex::new(Dd::from(z.re), Dd::from(z.im))
}

fn hi(z: Cdd) -> Complex64 {
    Complex64::new(z.re.hi(), z.im.hi())
}

fn lo(z: Cdd) -> Complex64 {
    Complex64::new(z.re.lo(), z.im.lo())
}

fn abs(z: Cdd) -> f64 {
    hi(z).norm()
}

/// `a / b` with a Newton-refined reciprocal. The division operator of
/// `TwoFloat` forms its remainder without a fused multiply-add and is only
/// accurate to `f64` precision.
fn div(a: Cdd, b: Cdd) -> Cdd {
    let n = b.norm_sqr();
    let t = Dd::from(n.hi().recip());
    let inv = t + t * (Dd::from(1.0) - n * t);
    a * b.conj() * Cdd::new(inv, Dd::from(0.0))
}

fn finite(z: Cdd) -> bool {
    let h = hi(z);
    h.re.is_finite() && h.im.is_finite()
}

/// The family's coefficient line in double-double.
struct DdLine {
    p: Vec<Cdd>,
    q: Vec<Cdd>,
    dp: Vec<Cdd>,
    dq: Vec<Cdd>,
    degree: usize,
}

impl DdLine {
    fn new(fam: &FamilySpec) -> Self {
        let conv = |v: &[Complex64]| v.iter().map(|&c| dd(c)).collect();
        DdLine {
            p: conv(fam.base().numerator()),
            q: conv(fam.base().denominator()),
            dp: conv(&fam.direction().p),
            dq: conv(&fam.direction().q),
            degree: fam.base().degree(),
        }
    }

    fn member(&self, lambda: Cdd) -> (Vec<Cdd>, Vec<Cdd>) {
        let line = |b: &[Cdd], v: &[Cdd]| b.iter().zip(v).map(|(&b, &v)| b + lambda * v).collect();
        (line(&self.p, &self.dp), line(&self.q, &self.dq))
    }
}

/// One pass around the orbit with derivatives in `u` and `λ`.
struct Pass {
    value: Cdd,
    du: Cdd,
    dl: Cdd,
    mult_du: Cdd,
    mult_dl: Cdd,
    /// Chart coordinates of the `N` orbit points, starting at `u`.
    orbit: Vec<(Chart, Cdd)>,
}

impl Pass {
    fn mult(&self) -> Cdd {
        self.du
    }
}

/// `last` is the chart of the final image.
fn pass(line: &DdLine, lambda: Cdd, chart0: Chart, u: Cdd, n: usize, last: Chart) -> Option<Pass> {
    let (p, q) = line.member(lambda);
    let zero = Cdd::new(Dd::from(0.0), Dd::from(0.0));
    let one = Cdd::new(Dd::from(1.0), Dd::from(0.0));
    let two = Cdd::new(Dd::from(2.0), Dd::from(0.0));
    let (mut chart, mut x) = (chart0, u);
    // a = dx/du (also the running multiplier), b = dx/dλ, s = da/du, t = da/dλ
    let (mut a, mut b, mut s, mut t) = (one, zero, zero, zero);
    let mut orbit = Vec::with_capacity(n);
    for i in 0..n {
        orbit.push((chart, x));
        let fp = form_on_chart(&p, line.degree, chart, x);
        let fq = form_on_chart(&q, line.degree, chart, x);
        let fdp = form_on_chart(&line.dp, line.degree, chart, x);
        let fdq = form_on_chart(&line.dq, line.degree, chart, x);
        let out = if i + 1 == n {
            last
        } else if abs(fp[0]) <= abs(fq[0]) {
            Chart::Finite
        } else {
            Chart::Infinite
        };
        let (num, den, dnum, dden) = match out {
            Chart::Finite => (fp, fq, fdp, fdq),
            Chart::Infinite => (fq, fp, fdq, fdp),
        };
        let [n0, n1, n2] = num;
        let [d0, d1, d2] = den;
        let [e0, e1, _] = dnum;
        let [g0, g1, _] = dden;
        if abs(d0) == 0.0 {
            return None;
        }
        let d_sq = d0 * d0;
        let d_cu = d_sq * d0;
        let w = n1 * d0 - n0 * d1;
        let v = div(n0, d0);
        let vu = div(w, d_sq);
        let vuu = div(n2 * d0 - n0 * d2, d_sq) - div(two * d1 * w, d_cu);
        let vl = div(e0 * d0 - n0 * g0, d_sq);
        let vul = div(e1 * d0 + n1 * g0 - e0 * d1 - n0 * g1, d_sq) - div(two * g0 * w, d_cu);
        let s_next = s * vu + a * vuu * a;
        let t_next = t * vu + a * (vuu * b + vul);
        b = vu * b + vl;
        a = vu * a;
        s = s_next;
        t = t_next;
        x = v;
        chart = out;
        if !(finite(x) && finite(a) && finite(b) && finite(s) && finite(t)) {
            return None;
        }
    }
    Some(Pass { value: x, du: a, dl: b, mult_du: s, mult_dl: t, orbit })
}

/// Chordal residual of `[f^n(v0)] = [v0]` and the cycle multiplier, computed
/// from homogeneous lifts without charts.
///
/// With `F(v_k) = s_k v_(k+1)` the tangent action of one step is
/// `det DF(v_k) / (d s_k^2)`; closing the loop with `v_n = α v_0` divides by `α^2`.
fn homogeneous_check(p: &[Cdd], q: &[Cdd], degree: usize, v0: [Cdd; 2], n: usize) -> (f64, Cdd) {
    let zero = Cdd::new(Dd::from(0.0), Dd::from(0.0));
    let one = Cdd::new(Dd::from(1.0), Dd::from(0.0));
    let deg = Cdd::new(Dd::from(degree as f64), Dd::from(0.0));
    let eval = |c: &[Cdd], x: Cdd, y: Cdd| -> [Cdd; 3] {
        let mut xp = vec![one; degree + 1];
        let mut yp = vec![one; degree + 1];
        for k in 1..=degree {
            xp[k] = xp[k - 1] * x;
            yp[k] = yp[k - 1] * y;
        }
        let (mut f, mut fx, mut fy) = (zero, zero, zero);
        for (k, &ck) in c.iter().enumerate() {
            f = f + ck * xp[k] * yp[degree - k];
            if k > 0 {
                fx = fx + ck * Cdd::new(Dd::from(k as f64), Dd::from(0.0)) * xp[k - 1] * yp[degree - k];
            }
            if k < degree {
                fy = fy + ck * Cdd::new(Dd::from((degree - k) as f64), Dd::from(0.0)) * xp[k] * yp[degree - k - 1];
            }
        }
        [f, fx, fy]
    };
    let mut v = v0;
    let mut prod = one;
    for _ in 0..n {
        let [fp, px, py] = eval(p, v[0], v[1]);
        let [fq, qx, qy] = eval(q, v[0], v[1]);
        let det = px * qy - py * qx;
        let scale = if abs(fp) >= abs(fq) { fp } else { fq };
        prod = div(prod * det, deg * scale * scale);
        v = [div(fp, scale), div(fq, scale)];
    }
    let n0 = v0[0].norm_sqr() + v0[1].norm_sqr();
    let alpha = div(v[0] * v0[0].conj() + v[1] * v0[1].conj(), Cdd::new(n0, Dd::from(0.0)));
    let cross = abs(v0[0] * v[1] - v0[1] * v[0]);
    let norms = (hi(v0[0]).norm_sqr() + hi(v0[1]).norm_sqr()).sqrt() * (hi(v[0]).norm_sqr() + hi(v[1]).norm_sqr()).sqrt();
    (cross / norms, div(prod, alpha * alpha))
}

fn lift(chart: Chart, u: Cdd) -> [Cdd; 2] {
    let one = Cdd::new(Dd::from(1.0), Dd::from(0.0));
    match chart {
        Chart::Finite => [u, one],
        Chart::Infinite => [one, u],
    }
}

fn to_point(chart: Chart, u: Cdd) -> SpherePoint {
    SpherePoint::from_chart(chart, hi(u))
}

/// Newton start. `point_offset` is added to the chart coordinate of `point`
/// in its preferred chart, and `lambda_lo` to `lambda`; both carry
/// information below `f64` resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicSeed {
    #[serde(serialize_with = "crate::serde_util::complex", deserialize_with = "crate::serde_util::de_complex")]
    pub lambda: Complex64,
    #[serde(default, serialize_with = "crate::serde_util::complex", deserialize_with = "crate::serde_util::de_complex")]
    pub lambda_lo: Complex64,
    pub point: SpherePoint,
    #[serde(default, serialize_with = "crate::serde_util::complex", deserialize_with = "crate::serde_util::de_complex")]
    pub point_offset: Complex64,
}

impl ParabolicSeed {
    pub fn new(lambda: Complex64, point: SpherePoint) -> Self {
        ParabolicSeed { lambda, lambda_lo: Complex64::default(), point, point_offset: Complex64::default() }
    }
}

fn default_max_iter() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicOptions {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for ParabolicOptions {
    fn default() -> Self {
        ParabolicOptions { max_iter: default_max_iter() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicSolution {
    pub period: usize,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub lambda: Complex64,
    /// Low-order part of `λ`.
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub lambda_lo: Complex64,
    pub chart: Chart,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub coord: Complex64,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub coord_lo: Complex64,
    pub point: SpherePoint,
    pub cycle: Vec<SpherePoint>,
    /// From the homogeneous re-check.
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub multiplier: Complex64,
    /// `(|f^N(z) - z|, |(f^N)'(z) - 1|)` in the solver's chart.
    pub residuals: [f64; 2],
    /// Chordal closing distance and `|multiplier - 1|` from the homogeneous re-check.
    pub verification: [f64; 2],
    /// In `f64` with the rounded parameter: chordal distance after iterating
    /// the rounded point forward one period, and `|multiplier - 1|` along the
    /// rounded cycle.
    pub f64_check: [f64; 2],
    /// False when the rounded `f64` member does not carry the cycle for one
    /// period, e.g. because the parameter is below coefficient resolution.
    pub resolved_in_f64: bool,
    /// Largest per-step `f64` residual along the rounded cycle.
    pub f64_step_residual: f64,
    pub iterations: usize,
    pub condition: f64,
    /// Cycle points inside the linearization neighborhood of the companion cycle.
    pub dwell_near_q: Option<usize>,
    pub dwell_radius: Option<f64>,
}

impl ParabolicSolution {
    /// Uniform measure on the cycle.
    pub fn cycle_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::uniform(self.cycle.clone()).expect("cycle is nonempty")
    }

    /// The parameter in double-double, as `(hi, lo)`.
    pub fn lambda_parts(&self) -> (Complex64, Complex64) {
        (self.lambda, self.lambda_lo)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactPeriodFailure {
    pub seed: usize,
    pub period: usize,
    pub minimal_period: usize,
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub lambda: Complex64,
    pub point: SpherePoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedFailure {
    pub seed: usize,
    pub error: String,
    pub condition: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicReport {
    pub period: usize,
    pub solutions: Vec<ParabolicSolution>,
    pub exact_period_failures: Vec<ExactPeriodFailure>,
    pub failures: Vec<SeedFailure>,
}

#[derive(Debug, Clone)]
pub enum SeedOutcome {
    Solution(Box<ParabolicSolution>),
    ExactPeriod { minimal_period: usize, lambda: Complex64, point: SpherePoint },
}

fn residual(p: &Pass, u: Cdd) -> f64 {
    let one = Cdd::new(Dd::from(1.0), Dd::from(0.0));
    abs(p.value - u).max(abs(p.mult() - one))
}

/// Newton from one seed.
pub fn solve_parabolic_seed(
    fam: &FamilySpec,
    period: usize,
    seed: &ParabolicSeed,
    companion: Option<&PeriodicOrbit>,
    opts: &ParabolicOptions,
) -> Result<SeedOutcome> {
    if period == 0 {
        return Err(Error::Precondition("period must be positive".into()));
    }
    let line = DdLine::new(fam);
    let one = Cdd::new(Dd::from(1.0), Dd::from(0.0));
    let radius = fam.domain_radius() * (1.0 + 1e-12);
    let mut lambda = dd(seed.lambda) + dd(seed.lambda_lo);
    let mut chart = seed.point.chart();
    let mut u = dd(seed.point.chart_coord(chart)) + dd(seed.point_offset);
    let mut cur = pass(&line, lambda, chart, u, period, chart)
        .ok_or_else(|| Error::NoConvergence("orbit of the seed hits a pole".into()))?;
    let mut res = residual(&cur, u);
    let mut condition = 0.0;
    let mut iterations = 0;
    while iterations < opts.max_iter && res > 0.0 {
        iterations += 1;
        let (j00, j01, j10, j11) = (cur.du - one, cur.dl, cur.mult_du, cur.mult_dl);
        let det = j00 * j11 - j01 * j10;
        let frob = hi(j00).norm_sqr() + hi(j01).norm_sqr() + hi(j10).norm_sqr() + hi(j11).norm_sqr();
        condition = frob / abs(det);
        if !(condition < SINGULAR_CONDITION) {
            break;
        }
        let (f0, f1) = (cur.value - u, cur.mult() - one);
        let du = div(j11 * f0 - j01 * f1, det);
        let dl = div(j00 * f1 - j10 * f0, det);
        let mut scale = Dd::from(1.0);
        let mut accepted = None;
        for _ in 0..40 {
            let s = Cdd::new(scale, Dd::from(0.0));
            let (lt, ut) = (lambda - s * dl, u - s * du);
            if hi(lt).norm() <= radius {
                if let Some(next) = pass(&line, lt, chart, ut, period, chart) {
                    let r = residual(&next, ut);
                    if r < res {
                        accepted = Some((lt, ut, next, r));
                        break;
                    }
                }
            }
            scale = scale * Dd::from(0.5);
        }
        let Some((lt, ut, next, r)) = accepted else { break };
        lambda = lt;
        u = ut;
        cur = next;
        res = r;
        // keep the coordinate inside the unit disk of its chart
        if abs(u) > 1.0 {
            chart = match chart {
                Chart::Finite => Chart::Infinite,
                Chart::Infinite => Chart::Finite,
            };
            u = div(one, u);
            match pass(&line, lambda, chart, u, period, chart) {
                Some(p) => {
                    res = residual(&p, u);
                    cur = p;
                }
                None => break,
            }
        }
    }
    let points: Vec<SpherePoint> = cur.orbit.iter().map(|&(c, x)| to_point(c, x)).collect();
    let repeats = |q: usize| (0..period).all(|i| chordal_distance(&points[i], &points[(i + q) % period]) < EXACT_PERIOD_TOL);
    if let Some(q) = (1..period).filter(|q| period % q == 0).find(|&q| repeats(q)) {
        return Ok(SeedOutcome::ExactPeriod { minimal_period: q, lambda: hi(lambda), point: points[0] });
    }
    if res > VERIFY_TOL {
        if !(condition < SINGULAR_CONDITION) {
            return Err(Error::JacobianSingular { condition });
        }
        return Err(Error::NoConvergence(format!("residual {res:e} after {iterations} iterations")));
    }
    let (p, q) = line.member(lambda);
    let (closing, multiplier) = homogeneous_check(&p, &q, line.degree, lift(chart, u), period);
    let verification = [closing, abs(multiplier - one)];
    if !(verification[0] < VERIFY_TOL && verification[1] < VERIFY_TOL) {
        return Err(Error::ResidualTooLarge(verification[0].max(verification[1])));
    }
    let map = fam.member(hi(lambda))?;
    let f64_check = [chordal_distance(&map.iterate(&points[0], period), &points[0]), (cycle_multiplier(&map, &points) - 1.0).norm()];
    let f64_step_residual = cycle_residual(&map, &points);
    let (dwell_near_q, dwell_radius) = match companion {
        Some(c) => match continue_cycle(&map, &c.points).and_then(|pts| PeriodicOrbit::certify(&map, &pts)) {
            Ok(orbit) => {
                let r = neighborhood_radius(&map, &orbit, 0.1);
                (Some(points.iter().filter(|x| orbit.distance_to(x) < r).count()), Some(r))
            }
            Err(_) => (None, None),
        },
        None => (None, None),
    };
    let f0 = cur.value - u;
    Ok(SeedOutcome::Solution(Box::new(ParabolicSolution {
        period,
        lambda: hi(lambda),
        lambda_lo: lo(lambda),
        chart,
        coord: hi(u),
        coord_lo: lo(u),
        point: points[0],
        cycle: points,
        multiplier: hi(multiplier),
        residuals: [abs(f0), abs(cur.mult() - one)],
        verification,
        resolved_in_f64: f64_check[0] < F64_RESOLVED_TOL && f64_check[1] < F64_RESOLVED_TOL,
        f64_check,
        f64_step_residual,
        iterations,
        condition,
        dwell_near_q,
        dwell_radius,
    })))
}

/// A seed for the dwell construction, with the period it targets.
#[derive(Debug, Clone, Serialize)]
pub struct DwellSeed {
    /// Passes around the target cycle between landing and return.
    pub dwell_cycles: usize,
    pub period: usize,
    /// Local degree of the transit at the return point.
    pub local_degree: usize,
    /// Which root of `z^(m-1)` the seed uses.
    pub branch: usize,
    pub seed: ParabolicSeed,
}

/// Samples on the circle used to read off Taylor coefficients.
const CAUCHY_SAMPLES: usize = 16;

/// Taylor coefficients `a_1..a_(K/2)` of `u ↦ f^n(u) - f^n(center)` from a
/// discrete Cauchy integral on the circle of radius `rho`.
fn taylor_coefficients(line: &DdLine, lambda: Cdd, chart: Chart, center: Cdd, n: usize, last: Chart, rho: f64) -> Option<Vec<Cdd>> {
    let k = CAUCHY_SAMPLES;
    let base = pass(line, lambda, chart, center, n, last)?.value;
    let values: Vec<(Cdd, Cdd)> = (0..k)
        .map(|s| {
            let w = dd(Complex64::from_polar(1.0, std::f64::consts::TAU * s as f64 / k as f64));
            let h = w * Cdd::new(Dd::from(rho), Dd::from(0.0));
            pass(line, lambda, chart, center + h, n, last).map(|p| (w, p.value - base))
        })
        .collect::<Option<_>>()?;
    let one = Cdd::new(Dd::from(1.0), Dd::from(0.0));
    let scale = Cdd::new(Dd::from(k as f64), Dd::from(0.0));
    Some(
        (1..=k / 2)
            .map(|j| {
                let mut acc = Cdd::new(Dd::from(0.0), Dd::from(0.0));
                for (w, v) in &values {
                    let mut wj = one;
                    for _ in 0..j {
                        wj = wj * w.conj();
                    }
                    acc = acc + *v * wj;
                }
                let mut rj = one;
                for _ in 0..j {
                    rj = rj * Cdd::new(Dd::from(rho), Dd::from(0.0));
                }
                div(acc, scale * rj)
            })
            .collect(),
    )
}

/// Seeds for cycles that start at `c + z` near `preimage`, follow it through
/// the critical point(s) onto `cycle[0]` in `transit` steps, stay near the
/// repelling cycle for `j` passes and return to `c + z`.
///
/// `preimage` must be a critical point of `f^transit` landing on `cycle[0]`
/// and lie in the linearization neighborhood of the cycle. With
/// `f^transit(c + z) ≈ q + A + A'(λ - λ*) + C z^m` and the cycle multiplier
/// `γ`, the multiplier-one condition gives `z^(m-1) = 1 / (m C γ^j)` (one seed
/// per root) and the return condition `A + A'(λ - λ*) + C z^m = (c - q) / γ^j`.
pub fn dwell_seeds(
    fam: &FamilySpec,
    lambda_star: Complex64,
    preimage: &SpherePoint,
    transit: usize,
    cycle: &[SpherePoint],
    dwell_cycles: &[usize],
) -> Result<Vec<DwellSeed>> {
    if cycle.is_empty() || transit == 0 {
        return Err(Error::Precondition("dwell seeds need a cycle and a positive transit".into()));
    }
    let line = DdLine::new(fam);
    let one = Cdd::new(Dd::from(1.0), Dd::from(0.0));
    let l = dd(lambda_star);
    let p = cycle.len();
    let lost = || Error::NoConvergence("dwell seed orbit hits a pole".into());
    // the cycle point and its multiplier, refined in double-double
    let cq = cycle[0].chart();
    let mut uq = dd(cycle[0].chart_coord(cq));
    let mut cyc = pass(&line, l, cq, uq, p, cq).ok_or_else(lost)?;
    for _ in 0..30 {
        let step = div(cyc.value - uq, cyc.du - one);
        uq = uq - step;
        cyc = pass(&line, l, cq, uq, p, cq).ok_or_else(lost)?;
        if abs(step) <= 1e-31 * (1.0 + abs(uq)) {
            break;
        }
    }
    let gamma = cyc.du;
    let dq_dl = -div(cyc.dl, cyc.du - one);
    // local degree at the preimage, then a multiplicity-aware Newton refinement
    let cc = preimage.chart();
    let mut uc = dd(preimage.chart_coord(cc));
    let rho = 1e-4 * (1.0 + abs(uc));
    let coeffs = taylor_coefficients(&line, l, cc, uc, transit, cq, rho).ok_or_else(lost)?;
    let sizes: Vec<f64> = coeffs.iter().enumerate().map(|(j, a)| abs(*a) * rho.powi(j as i32 + 1)).collect();
    let top = sizes.iter().copied().fold(0.0, f64::max);
    let m = 1 + sizes.iter().position(|&x| x > 1e-6 * top).unwrap_or(0);
    if m < 2 {
        return Err(Error::Precondition("preimage is not a critical point of the transit".into()));
    }
    let order = Cdd::new(Dd::from((m - 1) as f64), Dd::from(0.0));
    for _ in 0..60 {
        let tr = pass(&line, l, cc, uc, transit, cq).ok_or_else(lost)?;
        if abs(tr.mult_du) == 0.0 {
            break;
        }
        let step = order * div(tr.du, tr.mult_du);
        uc = uc - step;
        if abs(step) <= 1e-31 * (1.0 + abs(uc)) {
            break;
        }
    }
    let tr = pass(&line, l, cc, uc, transit, cq).ok_or_else(lost)?;
    let coeffs = taylor_coefficients(&line, l, cc, uc, transit, cq, rho).ok_or_else(lost)?;
    let c_m = coeffs[m - 1];
    let a0 = tr.value - uq;
    let a1 = tr.dl - dq_dl;
    // offset of the preimage from the cycle point, and the chart change back to it
    let (e, back) = if cc == cq { (uc - uq, one) } else { (div(one, uc) - uq, -(uc * uc)) };
    let inv_gamma = div(one, gamma);
    let mdd = Cdd::new(Dd::from(m as f64), Dd::from(0.0));
    let mut seeds = Vec::new();
    for &j in dwell_cycles {
        let mut gj = one;
        let mut inv_gj = one;
        for _ in 0..j {
            gj = gj * gamma;
            inv_gj = inv_gj * inv_gamma;
        }
        // z^(m-1) = w, each root refined by Newton in double-double
        let w = div(one, mdd * c_m * gj * back);
        let w64 = hi(w);
        for branch in 0..m - 1 {
            let root = w64.powf(1.0 / (m - 1) as f64) * Complex64::from_polar(1.0, std::f64::consts::TAU * branch as f64 / (m - 1) as f64);
            let mut z = dd(root);
            for _ in 0..4 {
                let mut zk = one;
                for _ in 0..m - 2 {
                    zk = zk * z;
                }
                // z <- z - (z^(m-1) - w) / ((m-1) z^(m-2))
                z = z - div(zk * z - w, order * zk);
            }
            let zm = {
                let mut acc = one;
                for _ in 0..m {
                    acc = acc * z;
                }
                acc
            };
            let lambda = l + div(inv_gj * e - a0 - c_m * zm, a1);
            let start = uc + z;
            let point = SpherePoint::from_chart(cc, hi(start));
            let pc = point.chart();
            let coord = if pc == cc { start } else { div(one, start) };
            seeds.push(DwellSeed {
                dwell_cycles: j,
                period: transit + j * p,
                local_degree: m,
                branch,
                seed: ParabolicSeed {
                    lambda: hi(lambda),
                    lambda_lo: lo(lambda),
                    point,
                    point_offset: hi(coord - dd(point.chart_coord(pc))),
                },
            });
        }
    }
    Ok(seeds)
}

fn same_solution(a: &ParabolicSolution, b: &ParabolicSolution) -> bool {
    let dl = (dd(a.lambda) + dd(a.lambda_lo)) - (dd(b.lambda) + dd(b.lambda_lo));
    abs(dl) <= 1e-8 * a.lambda.norm() + 1e-30 && b.cycle.iter().any(|x| chordal_distance(x, &a.point) < 1e-9)
}

/// Runs Newton from every seed in parallel and collects distinct solutions.
pub fn solve_parabolic(
    fam: &FamilySpec,
    period: usize,
    seeds: &[ParabolicSeed],
    companion: Option<&PeriodicOrbit>,
    opts: &ParabolicOptions,
) -> Result<ParabolicReport> {
    if period == 0 {
        return Err(Error::Precondition("period must be positive".into()));
    }
    let outcomes: Vec<Result<SeedOutcome>> =
        seeds.par_iter().map(|s| solve_parabolic_seed(fam, period, s, companion, opts)).collect();
    let mut report = ParabolicReport { period, solutions: Vec::new(), exact_period_failures: Vec::new(), failures: Vec::new() };
    for (seed, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(SeedOutcome::Solution(s)) => {
                if !report.solutions.iter().any(|t| same_solution(t, &s)) {
                    report.solutions.push(*s);
                }
            }
            Ok(SeedOutcome::ExactPeriod { minimal_period, lambda, point }) => {
                report.exact_period_failures.push(ExactPeriodFailure { seed, period, minimal_period, lambda, point })
            }
            Err(e) => {
                let condition = match e {
                    Error::JacobianSingular { condition } => Some(condition),
                    _ => None,
                };
                report.failures.push(SeedFailure { seed, error: e.to_string(), condition });
            }
        }
    }
    Ok(report)
}
