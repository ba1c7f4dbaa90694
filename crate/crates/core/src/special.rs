//! Special functions and log-domain helpers.

use crate::Real;

/// Digamma function Ψ(x).
///
/// Shifts the argument above 6 with Ψ(x) = Ψ(x + 1) − 1/x and evaluates the
/// asymptotic expansion there. Negative arguments go through the reflection
/// formula. Poles (0, −1, −2, ...) return NaN.
pub fn digamma<F: Real>(x: F) -> F {
    if x.is_nan() || x == F::neg_infinity() {
        return F::nan();
    }
    if x <= F::zero() {
        if x == x.floor() {
            return F::nan();
        }
        // Ψ(x) = Ψ(1 − x) − π / tan(πx)
        let pi = F::lit(std::f64::consts::PI);
        return digamma(F::one() - x) - pi / (pi * x).tan();
    }
    let mut x = x;
    let mut acc = F::zero();
    let six = F::lit(6.0);
    while x < six {
        acc = acc - x.recip();
        x = x + F::one();
    }
    // Bernoulli terms B_2k / (2k), k = 1..7
    const COEF: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
        1.0 / 12.0,
    ];
    let inv2 = (x * x).recip();
    let mut series = F::zero();
    for &c in COEF.iter().rev() {
        series = (series + F::lit(c)) * inv2;
    }
    acc + x.ln() - F::lit(0.5) / x - series
}

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma<F: Real>(x: F) -> F {
    F::lit(statrs::function::gamma::ln_gamma(x.as_f64()))
}

/// log(exp(a) + exp(b)) without overflow; handles −∞ operands.
#[inline]
pub fn log_add<F: Real>(a: F, b: F) -> F {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == F::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// log Σ exp(x_i). Returns −∞ for an empty or all −∞ slice.
pub fn log_sum_exp<F: Real>(xs: &[F]) -> F {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    let sum: F = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Natural log that maps exact zeros to −∞.
#[inline]
pub fn safe_ln<F: Real>(x: F) -> F {
    if x > F::zero() {
        x.ln()
    } else {
        F::neg_infinity()
    }
}
