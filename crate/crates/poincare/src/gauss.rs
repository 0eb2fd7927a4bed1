//! Scalar Gaussian special functions shared across the crate.
//!
//! Tail quantities go through `erfc`, which keeps full relative accuracy far
//! into the tails where `1 - Phi(x)` would cancel.

use std::f64::consts::PI;

/// Density of N(0, tau) at displacement `d`.
pub fn phi_tau(tau: f64, d: f64) -> f64 {
    debug_assert!(tau > 0.0);
    (-d * d / (2.0 * tau)).exp() / (2.0 * PI * tau).sqrt()
}

/// Standard normal density.
pub fn phi(z: f64) -> f64 {
    phi_tau(1.0, z)
}

/// Standard normal CDF `Phi(z)`.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `Q(z) = 1 - Phi(z)`.
pub fn norm_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Central moment `E Z^j` of N(0, tau): zero for odd `j`,
/// `tau^(j/2) (j-1)!!` for even `j`.
pub fn central_moment(tau: f64, j: u32) -> f64 {
    if j % 2 == 1 {
        return 0.0;
    }
    let mut value = 1.0;
    let mut k = j as i64 - 1;
    while k > 1 {
        value *= k as f64;
        k -= 2;
    }
    value * tau.powi(j as i32 / 2)
}

/// Binomial coefficient as f64; exact for the orders used here (n <= 40).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut num = 1.0;
    for i in 0..k {
        num = num * (n - i) as f64 / (i + 1) as f64;
    }
    num.round()
}
