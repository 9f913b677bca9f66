//! Chart-wise evaluation of a rational map with first and second derivatives,
//! generic over the real scalar so the same code runs in `f64` and in
//! double-double precision.

use num_complex::Complex;
use num_traits::Float;

use crate::sphere::Chart;

pub trait Real: Float + From<f64> + Send + Sync + std::fmt::Debug + 'static {}

impl<T> Real for T where T: Float + From<f64> + Send + Sync + std::fmt::Debug + 'static {}

/// Value and first two derivatives of `v = chart_out(f(chart_in^{-1}(u)))`.
#[derive(Debug, Clone, Copy)]
pub struct Jet<T> {
    pub value: Complex<T>,
    pub d1: Complex<T>,
    pub d2: Complex<T>,
}

/// `(X, X', X'')` for the homogeneous form restricted to the input chart line.
pub(crate) fn form_on_chart<T: Real>(coeffs: &[Complex<T>], degree: usize, chart: Chart, u: Complex<T>) -> [Complex<T>; 3] {
    let zero = Complex::new(T::zero(), T::zero());
    let (mut p, mut dp, mut ddp) = (zero, zero, zero);
    let two = Complex::new(<T as From<f64>>::from(2.0), T::zero());
    // Chart::Finite: X(u) = sum c_k u^k ; Chart::Infinite: X(u) = sum c_k u^(d-k)
    let coeff_at = |power: usize| -> Complex<T> {
        let k = match chart {
            Chart::Finite => power,
            Chart::Infinite => degree - power,
        };
        coeffs.get(k).copied().unwrap_or(zero)
    };
    for power in (0..=degree).rev() {
        ddp = ddp * u + two * dp;
        dp = dp * u + p;
        p = p * u + coeff_at(power);
    }
    [p, dp, ddp]
}

/// Evaluates the map `[P : Q]` of the given degree at chart coordinate `u`.
pub fn chart_jet<T: Real>(
    p: &[Complex<T>],
    q: &[Complex<T>],
    degree: usize,
    chart_in: Chart,
    u: Complex<T>,
    chart_out: Chart,
) -> Jet<T> {
    let [xp, xp1, xp2] = form_on_chart(p, degree, chart_in, u);
    let [xq, xq1, xq2] = form_on_chart(q, degree, chart_in, u);
    // v = N / D
    let (n, n1, n2, d, d1, d2) = match chart_out {
        Chart::Finite => (xp, xp1, xp2, xq, xq1, xq2),
        Chart::Infinite => (xq, xq1, xq2, xp, xp1, xp2),
    };
    let two = <T as From<f64>>::from(2.0);
    let value = n / d;
    let num1 = n1 * d - n * d1;
    let d_sq = d * d;
    let v1 = num1 / d_sq;
    let v2 = (n2 * d - n * d2) / d_sq - (d1 * num1 * two) / (d_sq * d);
    Jet { value, d1: v1, d2: v2 }
}
