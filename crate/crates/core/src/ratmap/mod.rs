//! Rational maps of the Riemann sphere given by coefficient pairs `(P, Q)`.

mod pcf;

pub use pcf::{
    is_strictly_pcf, postcritical_scan, CriticalOrbit, LANDING_TOL, KappaStarMargins, Landing, LandingFlag, PcfCertificate,
    PcfEntry, PostcriticalData,
};

use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::jet::{chart_jet, Jet};
use crate::poly;
use crate::sphere::{Chart, MobiusMap, SpherePoint};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Resultant threshold for normalized coefficient vectors.
pub const RESULTANT_TOL: f64 = 1e-10;

/// Roots closer than this (relative) are merged into one multiple critical point.
pub const CRITICAL_CLUSTER_REL: f64 = 1e-6;

/// A rational map `P / Q` of exact degree `d`, coefficients ascending and
/// padded to length `d + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMap {
    p: Vec<Complex64>,
    q: Vec<Complex64>,
    degree: usize,
}

impl RationalMap {
    pub fn new(p: Vec<Complex64>, q: Vec<Complex64>) -> Result<Self> {
        let map = Self::assemble(p, q)?;
        if map.degree < 2 {
            return Err(Error::InvalidMap(format!("degree {} < 2", map.degree)));
        }
        let res = map.normalized_resultant();
        if !(res > RESULTANT_TOL) {
            return Err(Error::InvalidMap(format!(
                "numerator and denominator share a root (|resultant| = {res:e})"
            )));
        }
        Ok(map)
    }

    fn assemble(p: Vec<Complex64>, q: Vec<Complex64>) -> Result<Self> {
        if p.iter().chain(q.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        let dp = poly::degree(&p, poly::TRIM_REL);
        let dq = poly::degree(&q, poly::TRIM_REL);
        let (Some(dp), Some(dq)) = (dp, dq) else {
            return Err(Error::InvalidMap("zero numerator or denominator".into()));
        };
        let degree = dp.max(dq);
        let pad = |mut v: Vec<Complex64>| {
            v.resize(degree + 1, ZERO);
            v.truncate(degree + 1);
            v
        };
        Ok(RationalMap { p: pad(p), q: pad(q), degree })
    }

    /// Composition results and conjugates of valid maps are valid; skip the
    /// resultant, which underflows for large degrees.
    fn trusted(p: Vec<Complex64>, q: Vec<Complex64>) -> Result<Self> {
        Self::assemble(p, q)
    }

    pub fn from_real(p: &[f64], q: &[f64]) -> Result<Self> {
        Self::new(
            p.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            q.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// The polynomial `sum c_k z^k` as a rational map with denominator 1.
    pub fn polynomial(coeffs: &[Complex64]) -> Result<Self> {
        Self::new(coeffs.to_vec(), vec![Complex64::new(1.0, 0.0)])
    }

    pub fn numerator(&self) -> &[Complex64] {
        &self.p
    }

    pub fn denominator(&self) -> &[Complex64] {
        &self.q
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Stable 64-bit identifier of the coefficient bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for c in self.p.iter().chain(self.q.iter()) {
            c.re.to_bits().hash(&mut h);
            c.im.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Resultant of the homogeneous forms after scaling each coefficient
    /// vector to unit max-modulus.
    pub fn normalized_resultant(&self) -> f64 {
        let d = self.degree;
        let np = poly::max_modulus(&self.p);
        let nq = poly::max_modulus(&self.q);
        let n = 2 * d;
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for row in 0..d {
            for k in 0..=d {
                // descending powers of the homogeneous form
                m[(row, row + k)] = self.p[d - k] / np;
                m[(d + row, row + k)] = self.q[d - k] / nq;
            }
        }
        m.determinant().norm()
    }

    /// `(P_h(a, b), Q_h(a, b))` at the stored homogeneous coordinates.
    fn forms(&self, x: &SpherePoint) -> (Complex64, Complex64) {
        let (a, b) = x.coords();
        match x.chart() {
            Chart::Finite => (poly::eval(&self.p, a), poly::eval(&self.q, a)),
            Chart::Infinite => {
                let rev = |c: &[Complex64]| c.iter().fold(ZERO, |acc, &ck| acc * b + ck);
                (rev(&self.p), rev(&self.q))
            }
        }
    }

    pub fn evaluate(&self, x: &SpherePoint) -> SpherePoint {
        let (num, den) = self.forms(x);
        debug_assert!(
            num.norm().max(den.norm()) > 1e-14 * poly::max_modulus(&self.p).max(poly::max_modulus(&self.q)),
            "[0 : 0] while evaluating a valid map"
        );
        SpherePoint::new(num, den)
    }

    /// Chart representation with derivatives, input at chart coordinate `u`.
    pub fn jet(&self, chart_in: Chart, u: Complex64, chart_out: Chart) -> Jet<f64> {
        chart_jet(&self.p, &self.q, self.degree, chart_in, u, chart_out)
    }

    /// Derivative of `chart_out ∘ f ∘ chart_in^{-1}` at `x`.
    pub fn derivative_in_charts(&self, x: &SpherePoint, chart_in: Chart, chart_out: Chart) -> Complex64 {
        self.jet(chart_in, x.chart_coord(chart_in), chart_out).d1
    }

    /// Derivative in the adapted charts of `x` and of `f(x)`.
    pub fn sphere_derivative(&self, x: &SpherePoint) -> ChartDerivative {
        let input_chart = x.chart();
        let output_chart = self.evaluate(x).chart();
        ChartDerivative {
            value: self.derivative_in_charts(x, input_chart, output_chart),
            input_chart,
            output_chart,
        }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &RationalMap) -> Result<RationalMap> {
        let (pg, qg) = (&other.p, &other.q);
        let d = self.degree;
        let pows_p: Vec<Vec<Complex64>> = (0..=d).map(|k| poly::pow(pg, k)).collect();
        let pows_q: Vec<Vec<Complex64>> = (0..=d).map(|k| poly::pow(qg, k)).collect();
        let mut num = Vec::new();
        let mut den = Vec::new();
        for k in 0..=d {
            let term = poly::mul(&pows_p[k], &pows_q[d - k]);
            num = poly::add(&num, &poly::scale(&term, self.p[k]));
            den = poly::add(&den, &poly::scale(&term, self.q[k]));
        }
        Self::trusted(num, den)
    }

    /// `g ∘ self ∘ g^{-1}`
    pub fn conjugate(&self, g: &MobiusMap) -> Result<RationalMap> {
        let h = g.inverse().matrix();
        // self ∘ g^{-1}: substitute z -> (h00 z + h01) / (h10 z + h11)
        let lin_a = [h[0][1], h[0][0]];
        let lin_b = [h[1][1], h[1][0]];
        let d = self.degree;
        let mut num = Vec::new();
        let mut den = Vec::new();
        for k in 0..=d {
            let term = poly::mul(&poly::pow(&lin_a, k), &poly::pow(&lin_b, d - k));
            num = poly::add(&num, &poly::scale(&term, self.p[k]));
            den = poly::add(&den, &poly::scale(&term, self.q[k]));
        }
        let m = g.matrix();
        let p = poly::add(&poly::scale(&num, m[0][0]), &poly::scale(&den, m[0][1]));
        let q = poly::add(&poly::scale(&num, m[1][0]), &poly::scale(&den, m[1][1]));
        Self::trusted(p, q)
    }

    /// Same map with every coefficient multiplied by `s`.
    pub fn rescaled(&self, s: Complex64) -> Result<RationalMap> {
        Self::trusted(poly::scale(&self.p, s), poly::scale(&self.q, s))
    }

    /// All `d` preimages of `y` with multiplicity (infinity included).
    pub fn preimages(&self, y: &SpherePoint) -> Result<Vec<SpherePoint>> {
        let (ya, yb) = y.coords();
        let r = poly::sub(&poly::scale(&self.p, yb), &poly::scale(&self.q, ya));
        let r = poly::trim(&r, poly::TRIM_REL);
        let finite_deg = r.len().saturating_sub(1);
        let mut out: Vec<SpherePoint> = if finite_deg == 0 {
            Vec::new()
        } else {
            poly::roots(&r)?.into_iter().map(SpherePoint::from_complex).collect()
        };
        out.extend(std::iter::repeat(SpherePoint::infinity()).take(self.degree - finite_deg));
        Ok(out)
    }

    /// Wronskian `P'Q - PQ'`, whose roots are the finite critical points.
    pub fn wronskian(&self) -> Vec<Complex64> {
        let dp = poly::derivative(&self.p);
        let dq = poly::derivative(&self.q);
        poly::sub(&poly::mul(&dp, &self.q), &poly::mul(&self.p, &dq))
    }

    pub fn critical_points(&self) -> Result<CriticalSet> {
        let total = 2 * self.degree - 2;
        let w = poly::trim(&self.wronskian(), poly::TRIM_REL);
        let wdeg = w.len().saturating_sub(1);
        let mut points: Vec<(SpherePoint, usize)> = if wdeg == 0 {
            Vec::new()
        } else {
            let roots = poly::roots(&w)?;
            poly::cluster(&roots, CRITICAL_CLUSTER_REL)
                .into_iter()
                .map(|(z, m)| (SpherePoint::from_complex(z), m))
                .collect()
        };
        if wdeg < total {
            points.push((SpherePoint::infinity(), total - wdeg));
        }
        let sum: usize = points.iter().map(|(_, m)| m).sum();
        assert_eq!(sum, total, "critical multiplicities must sum to 2d-2");
        Ok(CriticalSet { points })
    }

    pub fn iterate_orbit(&self, x: &SpherePoint, n: usize) -> OrbitRecord {
        let mut points = Vec::with_capacity(n + 1);
        points.push(*x);
        let mut cur = *x;
        for _ in 0..n {
            cur = self.evaluate(&cur);
            points.push(cur);
        }
        OrbitRecord { start: *x, points, map_id: self.fingerprint() }
    }

    pub fn iterate(&self, x: &SpherePoint, n: usize) -> SpherePoint {
        (0..n).fold(*x, |cur, _| self.evaluate(&cur))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartDerivative {
    #[serde(serialize_with = "crate::serde_util::complex")]
    pub value: Complex64,
    pub input_chart: Chart,
    pub output_chart: Chart,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalSet {
    pub points: Vec<(SpherePoint, usize)>,
}

impl CriticalSet {
    pub fn total_multiplicity(&self) -> usize {
        self.points.iter().map(|(_, m)| m).sum()
    }

    pub fn all_simple(&self) -> bool {
        self.points.iter().all(|(_, m)| *m == 1)
    }
}

/// `x, f(x), ..., f^n(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitRecord {
    pub start: SpherePoint,
    pub points: Vec<SpherePoint>,
    pub map_id: u64,
}

impl OrbitRecord {
    /// Number of steps `n` (the record holds `n + 1` points).
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    /// Largest chordal gap between a stored point and the image of its predecessor.
    pub fn max_step_error(&self, f: &RationalMap) -> f64 {
        self.points
            .windows(2)
            .map(|w| crate::sphere::chordal_distance(&f.evaluate(&w[0]), &w[1]))
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct MapRepr {
    p: Vec<[f64; 2]>,
    q: Vec<[f64; 2]>,
}

impl Serialize for RationalMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let conv = |v: &[Complex64]| v.iter().map(|c| [c.re, c.im]).collect();
        MapRepr { p: conv(&self.p), q: conv(&self.q) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MapRepr::deserialize(d)?;
        let conv = |v: Vec<[f64; 2]>| v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        RationalMap::new(conv(r.p), conv(r.q)).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests;
