use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::ratmap::RationalMap;

/// Parameters checked on the boundary circle when a family is built.
pub const BOUNDARY_SAMPLES: usize = 64;

/// Named one-parameter families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// `z^2 + λ`
    Quadratic,
    /// `(1 + λ)(z^2 - 2) / z^2`
    ScaledLattes,
}

impl Builtin {
    fn line(self) -> (RationalMap, Vec<Complex64>, Vec<Complex64>) {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Builtin::Quadratic => (
                RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).expect("z^2 is valid"),
                vec![one, zero, zero],
                vec![zero; 3],
            ),
            Builtin::ScaledLattes => (
                RationalMap::from_real(&[-2.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).expect("lattes map is valid"),
                vec![-2.0 * one, zero, one],
                vec![zero; 3],
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    CoefficientLine,
    Builtin { name: Builtin },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDirection {
    #[serde(serialize_with = "crate::serde_util::complex_vec", deserialize_with = "crate::serde_util::de_complex_vec")]
    pub p: Vec<Complex64>,
    #[serde(serialize_with = "crate::serde_util::complex_vec", deserialize_with = "crate::serde_util::de_complex_vec")]
    pub q: Vec<Complex64>,
}

/// The affine line `λ ↦ (P + λ ΔP) / (Q + λ ΔQ)` over a closed parameter disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySpec {
    #[serde(flatten)]
    kind: FamilyKind,
    base: RationalMap,
    direction: CoefficientDirection,
    domain_radius: f64,
}

impl FamilySpec {
    pub fn coefficient_line(base: RationalMap, direction: CoefficientDirection, domain_radius: f64) -> Result<Self> {
        Self::checked(FamilyKind::CoefficientLine, base, direction, domain_radius)
    }

    pub fn builtin(name: Builtin, domain_radius: f64) -> Result<Self> {
        let (base, p, q) = name.line();
        Self::checked(FamilyKind::Builtin { name }, base, CoefficientDirection { p, q }, domain_radius)
    }

    fn checked(kind: FamilyKind, base: RationalMap, mut direction: CoefficientDirection, domain_radius: f64) -> Result<Self> {
        if !(domain_radius >= 0.0) || !domain_radius.is_finite() {
            return Err(Error::Precondition(format!("domain radius {domain_radius} must be finite and nonnegative")));
        }
        let d = base.degree();
        for v in [&mut direction.p, &mut direction.q] {
            if v.len() > d + 1 {
                return Err(Error::Precondition(format!("direction has {} coefficients, map degree is {d}", v.len())));
            }
            v.resize(d + 1, Complex64::new(0.0, 0.0));
        }
        let fam = FamilySpec { kind, base, direction, domain_radius };
        fam.member(Complex64::new(0.0, 0.0))?;
        if domain_radius > 0.0 {
            for k in 0..BOUNDARY_SAMPLES {
                let t = k as f64 / BOUNDARY_SAMPLES as f64;
                fam.member(Complex64::from_polar(domain_radius, std::f64::consts::TAU * t))?;
            }
        }
        Ok(fam)
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn base(&self) -> &RationalMap {
        &self.base
    }

    pub fn direction(&self) -> &CoefficientDirection {
        &self.direction
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Coefficients at `λ` without any validity check.
    pub fn coefficients(&self, lambda: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
        let line = |b: &[Complex64], v: &[Complex64]| b.iter().zip(v).map(|(b, v)| b + lambda * v).collect();
        (line(self.base.numerator(), &self.direction.p), line(self.base.denominator(), &self.direction.q))
    }

    pub fn member(&self, lambda: Complex64) -> Result<RationalMap> {
        if lambda.norm() > self.domain_radius * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "|λ| = {} outside the family disk of radius {}",
                lambda.norm(),
                self.domain_radius
            )));
        }
        if lambda == Complex64::new(0.0, 0.0) {
            return Ok(self.base.clone());
        }
        let (p, q) = self.coefficients(lambda);
        RationalMap::new(p, q).map_err(|e| Error::DegenerateMember(format!("λ = {lambda}: {e}")))
    }
}

impl<'de> Deserialize<'de> for FamilySpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            #[serde(flatten)]
            kind: FamilyKind,
            base: Option<RationalMap>,
            direction: Option<CoefficientDirection>,
            domain_radius: f64,
        }
        let r = Repr::deserialize(d)?;
        let fam = match r.kind {
            FamilyKind::Builtin { name } => FamilySpec::builtin(name, r.domain_radius),
            FamilyKind::CoefficientLine => match (r.base, r.direction) {
                (Some(b), Some(v)) => FamilySpec::coefficient_line(b, v, r.domain_radius),
                _ => Err(Error::Precondition("coefficient_line needs base and direction".into())),
            },
        };
        fam.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn builtin_members() {
        let fam = FamilySpec::builtin(Builtin::Quadratic, 3.0).unwrap();
        assert_eq!(&fam.member(c(0.0, 0.0)).unwrap(), fam.base());
        let m = fam.member(c(-2.0, 0.0)).unwrap();
        assert_eq!(m, RationalMap::from_real(&[-2.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap());
        assert!(fam.member(c(3.5, 0.0)).is_err());
    }

    #[test]
    fn degenerate_member_is_reported() {
        // (z^2 - 2) / (z^2 + λ) shares a root at λ = -2
        let base = RationalMap::from_real(&[-2.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        let dir = CoefficientDirection { p: vec![], q: vec![c(1.0, 0.0)] };
        // caught by the boundary grid
        assert!(FamilySpec::coefficient_line(base.clone(), dir.clone(), 2.0).is_err());
        // the grid cannot see interior degeneracies, member can
        let fam = FamilySpec::coefficient_line(base, dir, 2.5).unwrap();
        assert!(matches!(fam.member(c(-2.0, 0.0)), Err(Error::DegenerateMember(_))));
        assert!(fam.member(c(0.3, 0.1)).is_ok());
        // a scalar multiple is the same map, so only λ = -1 itself fails here
        let scaled = FamilySpec::builtin(Builtin::ScaledLattes, 1.5).unwrap();
        assert!(scaled.member(c(-1.0, 0.0)).is_err());
    }

    #[test]
    fn coefficient_line_changes_one_coefficient() {
        let base = RationalMap::from_real(&[-2.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        let z = c(0.0, 0.0);
        let dir = CoefficientDirection { p: vec![c(1.0, 0.0)], q: vec![] };
        let fam = FamilySpec::coefficient_line(base.clone(), dir, 0.5).unwrap();
        let m = fam.member(c(1e-3, 0.0)).unwrap();
        assert_eq!(m.numerator()[0], c(-2.0 + 1e-3, 0.0));
        assert_eq!(&m.numerator()[1..], &base.numerator()[1..]);
        assert_eq!(m.denominator(), base.denominator());
        assert_eq!(fam.direction().q, vec![z; 3]);
    }

    #[test]
    fn members_are_affine_bit_for_bit() {
        let base = RationalMap::from_real(&[-2.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        let dir = CoefficientDirection { p: vec![c(0.3, -0.1), c(0.2, 0.0)], q: vec![c(0.0, 0.0), c(0.1, 0.4)] };
        let fam = FamilySpec::coefficient_line(base.clone(), dir.clone(), 0.2).unwrap();
        for lambda in [c(0.1, 0.0), c(-0.05, 0.12), c(0.0, -0.2)] {
            let m = fam.member(lambda).unwrap();
            for k in 0..3 {
                let want = base.numerator()[k] + lambda * dir.p.get(k).copied().unwrap_or_default();
                assert_eq!(m.numerator()[k], want);
                let want = base.denominator()[k] + lambda * dir.q.get(k).copied().unwrap_or_default();
                assert_eq!(m.denominator()[k], want);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let fam: FamilySpec = serde_json::from_str(r#"{"kind":"builtin","name":"quadratic","domain_radius":2.5}"#).unwrap();
        assert_eq!(fam, FamilySpec::builtin(Builtin::Quadratic, 2.5).unwrap());
        let s = serde_json::to_string(&fam).unwrap();
        let back: FamilySpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, fam);
    }
}
