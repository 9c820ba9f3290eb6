//! Standard normal distribution function and the scaled complementary
//! error function used by the closed-form cumulative rate.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `Phi(x)`, the standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `1 - Phi(x)` without cancellation for large `x`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `Phi(hi) - Phi(lo)` evaluated on whichever tail keeps both terms small.
pub fn normal_cdf_diff(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else if hi <= 0.0 {
        normal_cdf(hi) - normal_cdf(lo)
    } else {
        1.0 - normal_sf(hi) - normal_cdf(lo)
    }
}

// Below this point erfc(x) * exp(x^2) is representable and accurate.
const ERFCX_SWITCH: f64 = 26.0;

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        // Overflows to +inf for x below about -26.6, like the true value.
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < ERFCX_SWITCH {
        return libm::erfc(x) * (x * x).exp();
    }
    // Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
    // evaluated bottom-up. Thirty levels are far past convergence for x >= 26.
    let mut tail = x;
    for m in (1..=30).rev() {
        tail = x + (m as f64 * 0.5) / tail;
    }
    1.0 / (PI.sqrt() * tail)
}
