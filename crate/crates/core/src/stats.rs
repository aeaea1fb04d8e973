//! Shared density helpers.

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of N(mu, sigma^2) at x. `sigma = 0` degenerates to a point
/// mass: +inf at the mean, -inf elsewhere.
#[inline]
pub(crate) fn ln_normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if x == mu { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    let d = (x - mu) / sigma;
    -0.5 * d * d - sigma.ln() - LN_SQRT_2PI
}
