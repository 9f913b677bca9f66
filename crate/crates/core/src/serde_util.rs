//! `[re, im]` encodings for complex values in JSON outputs.

use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serializer};

pub fn complex<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq([c.re, c.im])
}

pub fn complex_vec<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for c in v {
        seq.serialize_element(&[c.re, c.im])?;
    }
    seq.end()
}

pub fn complex_opt<S: Serializer>(c: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
    match c {
        Some(c) => s.collect_seq([c.re, c.im]),
        None => s.serialize_none(),
    }
}

pub fn de_complex<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
    let [re, im] = <[f64; 2]>::deserialize(d)?;
    Ok(Complex64::new(re, im))
}

pub fn de_complex_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
    let v = Vec::<[f64; 2]>::deserialize(d)?;
    Ok(v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
}

pub fn complex_mat<S: Serializer>(m: &[Vec<Complex64>], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.len()))?;
    for row in m {
        let row: Vec<[f64; 2]> = row.iter().map(|c| [c.re, c.im]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}
