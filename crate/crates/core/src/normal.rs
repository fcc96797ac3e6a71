//! Normal-distribution helpers shared by the density, posterior and
//! hurdle code.

use statrs::function::erf::erfc_inv;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density of Normal(mean, var) at `x`. `var` must be positive.
#[inline]
pub fn pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    (-0.5 * z * z / var).exp() * INV_SQRT_2PI / var.sqrt()
}

/// Log density of Normal(mean, var) at `x`.
#[inline]
pub fn ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    -0.5 * z * z / var - LN_SQRT_2PI - 0.5 * var.ln()
}

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Pr(|Z| > h) for standard normal Z, accurate in the far tail.
pub fn two_sided_tail(h: f64) -> f64 {
    if h <= 0.0 {
        return 1.0;
    }
    libm::erfc(h / std::f64::consts::SQRT_2)
}

/// Inverse of [`two_sided_tail`]: the `h >= 0` with Pr(|Z| > h) = `p`.
/// Returns 0 for `p >= 1` and +inf for `p <= 0`.
pub fn two_sided_tail_inv(p: f64) -> f64 {
    if p >= 1.0 {
        0.0
    } else if p <= 0.0 {
        f64::INFINITY
    } else {
        std::f64::consts::SQRT_2 * erfc_inv(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((pdf(0.0, 0.0, 1.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((pdf(0.0, 0.0, 2.0) - 0.282_094_791_773_878_1).abs() < 1e-15);
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!((two_sided_tail(1.959_963_984_540_054) - 0.05).abs() < 1e-14);
    }

    #[test]
    fn tail_inverse_round_trips() {
        for p in [0.5, 0.05, 1e-3, 1e-9] {
            let h = two_sided_tail_inv(p);
            assert!((two_sided_tail(h) / p - 1.0).abs() < 1e-10, "p={p}");
        }
        assert_eq!(two_sided_tail_inv(1.5), 0.0);
        assert!(two_sided_tail_inv(0.0).is_infinite());
    }

    #[test]
    fn ln_pdf_matches_pdf() {
        let (x, m, v) = (1.3, -0.4, 2.7);
        assert!((ln_pdf(x, m, v) - pdf(x, m, v).ln()).abs() < 1e-14);
    }
}
