//! Small special-function helpers shared by kernels and oracles.

use std::f64::consts::PI;

use libm::{erfc, tgamma as gamma};
use statrs::function::beta::beta_reg;

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(u: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * u * u).exp()
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / std::f64::consts::SQRT_2)
}

/// `Phi(b) - Phi(a)` without cancellation when both arguments sit in the same tail.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite_he(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    match n {
        0 => 1.0,
        _ => {
            for k in 1..n {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// m-th derivative of the standard normal density: `(-1)^m He_m(u) phi(u)`.
pub fn normal_pdf_deriv(m: u32, u: f64) -> f64 {
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * hermite_he(m, u) * normal_pdf(u)
}

/// Lebesgue volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    PI.powf(half) / gamma(half + 1.0)
}

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// Normalized surface measure of `{theta in S^{d-1} : <theta, e> >= c}` for a
/// fixed unit vector `e`, with `d >= 2` the ambient dimension.
pub fn spherical_cap_fraction(d: usize, c: f64) -> f64 {
    if c >= 1.0 {
        return 0.0;
    }
    if c <= -1.0 {
        return 1.0;
    }
    if d == 2 {
        return c.acos() / PI;
    }
    let half = 0.5 * beta_reg((d as f64 - 1.0) / 2.0, 0.5, 1.0 - c * c);
    if c >= 0.0 {
        half
    } else {
        1.0 - half
    }
}
