//! Points of the Riemann sphere, the chordal metric and Möbius maps.
//!
//! A [`SpherePoint`] is stored in homogeneous coordinates `[a : b]` scaled so
//! that the dominant coordinate is exactly `1`. That makes the stored pair
//! double as a chart coordinate: `[u : 1]` with `|u| <= 1` near the finite
//! plane, `[1 : w]` with `|w| < 1` near infinity.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Cross-product magnitude below which two points are considered equal.
pub const POINT_EQ_TOL: f64 = 1e-10;

/// Which affine chart a coordinate lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// `z = a / b`
    Finite,
    /// `w = b / a = 1 / z`
    Infinite,
}

#[derive(Clone, Copy, PartialEq)]
pub struct SpherePoint {
    a: Complex64,
    b: Complex64,
}

impl SpherePoint {
    /// Builds `[a : b]`, failing when both coordinates vanish or are not finite.
    pub fn try_new(a: Complex64, b: Complex64) -> Result<Self> {
        let na = a.norm_sqr();
        let nb = b.norm_sqr();
        if !(na.is_finite() && nb.is_finite()) {
            // Rescale before giving up: huge but finite coordinates are fine.
            let s = a.re.abs().max(a.im.abs()).max(b.re.abs()).max(b.im.abs());
            if s.is_finite() && s > 0.0 {
                return Self::try_new(a / s, b / s);
            }
            return Err(Error::Precondition(format!("non-finite point [{a} : {b}]")));
        }
        if na == 0.0 && nb == 0.0 {
            return Err(Error::Precondition("point [0 : 0]".into()));
        }
        Ok(if nb >= na {
            SpherePoint { a: a / b, b: Complex64::new(1.0, 0.0) }
        } else {
            SpherePoint { a: Complex64::new(1.0, 0.0), b: b / a }
        })
    }

    /// Panics on `[0 : 0]`; use [`SpherePoint::try_new`] for untrusted input.
    pub fn new(a: Complex64, b: Complex64) -> Self {
        Self::try_new(a, b).expect("valid homogeneous coordinates")
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z, Complex64::new(1.0, 0.0))
    }

    pub fn from_re(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    pub fn infinity() -> Self {
        SpherePoint { a: Complex64::new(1.0, 0.0), b: Complex64::new(0.0, 0.0) }
    }

    pub fn zero() -> Self {
        Self::from_complex(Complex64::new(0.0, 0.0))
    }

    /// `exp(2 pi i t)`
    pub fn on_circle(turns: f64) -> Self {
        Self::from_complex(Complex64::from_polar(1.0, std::f64::consts::TAU * turns))
    }

    /// Re-applies normalization. Stored points are already normalized, so
    /// this is the identity on them bit for bit.
    pub fn normalized(&self) -> Self {
        Self::new(self.a, self.b)
    }

    pub fn coords(&self) -> (Complex64, Complex64) {
        (self.a, self.b)
    }

    pub fn is_infinity(&self) -> bool {
        self.b == Complex64::new(0.0, 0.0)
    }

    /// The affine value `a / b`, or `None` at infinity.
    pub fn to_complex(&self) -> Option<Complex64> {
        if self.is_infinity() {
            None
        } else {
            Some(self.a / self.b)
        }
    }

    /// Preferred chart: the one in which this point has modulus at most one.
    pub fn chart(&self) -> Chart {
        if self.b == Complex64::new(1.0, 0.0) {
            Chart::Finite
        } else {
            Chart::Infinite
        }
    }

    /// Coordinate in the given chart. Infinite when the point is the pole of
    /// that chart.
    pub fn chart_coord(&self, chart: Chart) -> Complex64 {
        match chart {
            Chart::Finite => self.a / self.b,
            Chart::Infinite => self.b / self.a,
        }
    }

    pub fn from_chart(chart: Chart, u: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        match chart {
            Chart::Finite => Self::new(u, one),
            Chart::Infinite => Self::new(one, u),
        }
    }

    /// Projective equality up to [`POINT_EQ_TOL`].
    pub fn approx_eq(&self, other: &SpherePoint) -> bool {
        (self.a * other.b - other.a * self.b).norm() < POINT_EQ_TOL
    }

    /// Stereographic image on the unit sphere in `R^3`. Euclidean distance
    /// there equals [`chordal_distance`].
    pub fn to_unit_vector(&self) -> [f64; 3] {
        let ab = self.a * self.b.conj();
        let (na, nb) = (self.a.norm_sqr(), self.b.norm_sqr());
        let n = na + nb;
        [2.0 * ab.re / n, 2.0 * ab.im / n, (na - nb) / n]
    }

    pub fn antipode(&self) -> SpherePoint {
        SpherePoint::new(-self.b.conj(), self.a.conj())
    }
}

impl fmt::Debug for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_complex() {
            None => write!(f, "inf"),
            Some(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}

/// Chordal distance `2|a1 b2 - a2 b1| / (|(a1,b1)| |(a2,b2)|)`, in `[0, 2]`.
pub fn chordal_distance(x: &SpherePoint, y: &SpherePoint) -> f64 {
    let cross = (x.a * y.b - y.a * x.b).norm();
    let nx = (x.a.norm_sqr() + x.b.norm_sqr()).sqrt();
    let ny = (y.a.norm_sqr() + y.b.norm_sqr()).sqrt();
    (2.0 * cross / (nx * ny)).min(2.0)
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PointRepr {
    Finite([f64; 2]),
    Tag(String),
}

impl Serialize for SpherePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.to_complex() {
            None => PointRepr::Tag("inf".into()).serialize(s),
            Some(z) => PointRepr::Finite([z.re, z.im]).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for SpherePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match PointRepr::deserialize(d)? {
            PointRepr::Tag(t) if t == "inf" => Ok(SpherePoint::infinity()),
            PointRepr::Tag(t) => Err(serde::de::Error::custom(format!("unknown point tag {t:?}"))),
            PointRepr::Finite([re, im]) => SpherePoint::try_new(Complex64::new(re, im), Complex64::new(1.0, 0.0))
                .map_err(serde::de::Error::custom),
        }
    }
}

/// `z -> (m00 z + m01) / (m10 z + m11)`, stored scaled by a power of two so
/// that the Frobenius norm lies in `[1/sqrt 2, sqrt 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    m: [[Complex64; 2]; 2],
}

impl MobiusMap {
    pub fn new(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let fro = m.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(fro.is_finite() && fro > 0.0) {
            return Err(Error::Precondition("zero or non-finite Möbius matrix".into()));
        }
        let unit = m.map(|row| row.map(|c| c / fro));
        let det = unit[0][0] * unit[1][1] - unit[0][1] * unit[1][0];
        if det.norm() <= 1e-12 {
            return Err(Error::Precondition(format!("singular Möbius matrix (|det| = {:e})", det.norm())));
        }
        // power-of-two scaling keeps entries exact (the identity stays the identity)
        let scale = 2f64.powi(-(fro.log2().round() as i32));
        Ok(MobiusMap { m: m.map(|row| row.map(|c| c * scale)) })
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self::new([[o, z], [z, o]]).unwrap()
    }

    /// `z -> z + c`
    pub fn translation(c: Complex64) -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self::new([[o, c], [z, o]]).unwrap()
    }

    /// `z -> 1 / z`
    pub fn inversion() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self::new([[z, o], [o, z]]).unwrap()
    }

    /// Rotation of the sphere `[[alpha, -conj(beta)], [beta, conj(alpha)]]`.
    pub fn rotation(alpha: Complex64, beta: Complex64) -> Result<Self> {
        Self::new([[alpha, -beta.conj()], [beta, alpha.conj()]])
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        self.m
    }

    pub fn apply(&self, x: &SpherePoint) -> SpherePoint {
        let (a, b) = x.coords();
        SpherePoint::new(self.m[0][0] * a + self.m[0][1] * b, self.m[1][0] * a + self.m[1][1] * b)
    }

    pub fn inverse(&self) -> Self {
        let m = self.m;
        Self::new([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]).unwrap()
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &MobiusMap) -> Self {
        let (a, b) = (self.m, other.m);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self::new(out).unwrap()
    }

    /// Whether `m m* = c I` for some `c > 0`, i.e. a rigid rotation of the sphere.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let m = self.m;
        let g00 = m[0][0].norm_sqr() + m[0][1].norm_sqr();
        let g11 = m[1][0].norm_sqr() + m[1][1].norm_sqr();
        let g01 = m[0][0] * m[1][0].conj() + m[0][1] * m[1][1].conj();
        (g00 - g11).abs() < tol && g01.norm() < tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn antipodal_and_identity_distances() {
        assert_eq!(chordal_distance(&SpherePoint::zero(), &SpherePoint::infinity()), 2.0);
        let x = SpherePoint::from_complex(c(0.3, -2.0));
        assert_eq!(chordal_distance(&x, &x), 0.0);
        let d01 = chordal_distance(&SpherePoint::zero(), &SpherePoint::from_re(1.0));
        assert!((d01 - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mobius_examples() {
        let zero = SpherePoint::zero();
        assert!(MobiusMap::inversion().apply(&zero).is_infinity());
        let x = SpherePoint::from_complex(c(1.5, 0.25));
        assert_eq!(MobiusMap::identity().apply(&x), x);
        let inf = SpherePoint::infinity();
        assert!(MobiusMap::translation(c(1.0, 0.0)).apply(&inf).is_infinity());
    }

    #[test]
    fn zero_zero_rejected() {
        assert!(SpherePoint::try_new(c(0.0, 0.0), c(0.0, 0.0)).is_err());
        assert!(MobiusMap::new([[c(1.0, 0.0), c(2.0, 0.0)], [c(2.0, 0.0), c(4.0, 0.0)]]).is_err());
    }

    #[test]
    fn serde_roundtrip_inf() {
        let pts = vec![SpherePoint::infinity(), SpherePoint::from_complex(c(0.5, -1.0))];
        let s = serde_json::to_string(&pts).unwrap();
        assert!(s.starts_with(r#"["inf",["#));
        let back: Vec<SpherePoint> = serde_json::from_str(&s).unwrap();
        assert!(back[0].is_infinity());
        assert!(back[1].approx_eq(&pts[1]));
    }

    #[test]
    fn huge_coordinates_are_rescaled() {
        let p = SpherePoint::new(c(1e300, 1e300), c(1e-300, 0.0));
        assert_eq!(p.chart(), Chart::Infinite);
        assert!(chordal_distance(&p, &SpherePoint::infinity()) < 1e-12);
    }

    fn arb_point() -> impl Strategy<Value = SpherePoint> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(a, b, c_, d)| a * a + b * b + c_ * c_ + d * d > 1e-6)
            .prop_map(|(a, b, c_, d)| SpherePoint::new(c(a, b), c(c_, d)))
    }

    fn arb_rotation() -> impl Strategy<Value = MobiusMap> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(a, b, c_, d)| a * a + b * b + c_ * c_ + d * d > 1e-3)
            .prop_map(|(a, b, c_, d)| {
                let n = (a * a + b * b + c_ * c_ + d * d).sqrt();
                MobiusMap::rotation(c(a / n, b / n), c(c_ / n, d / n)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn triangle_inequality(x in arb_point(), y in arb_point(), z in arb_point()) {
            let dxy = chordal_distance(&x, &y);
            prop_assert!(dxy <= chordal_distance(&x, &z) + chordal_distance(&z, &y) + 1e-12);
            prop_assert_eq!(dxy, chordal_distance(&y, &x));
            prop_assert!((0.0..=2.0).contains(&dxy));
        }

        #[test]
        fn rotations_are_isometries(x in arb_point(), y in arb_point(), u in arb_rotation()) {
            prop_assert!(u.is_unitary(1e-12));
            let before = chordal_distance(&x, &y);
            let after = chordal_distance(&u.apply(&x), &u.apply(&y));
            prop_assert!((before - after).abs() < 1e-12);
        }

        #[test]
        fn normalization_idempotent(x in arb_point()) {
            let once = x.normalized();
            let twice = once.normalized();
            prop_assert_eq!(once.coords(), twice.coords());
            let (a, b) = once.coords();
            prop_assert_eq!(a.norm().max(b.norm()), 1.0);
        }
    }
}
