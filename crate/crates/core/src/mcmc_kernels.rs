//! Reusable one-dimensional sampling primitives: envelope rejection
//! sampling, truncated-normal sampling, and slice sampling with shrinkage.
//!
//! All density work happens in log space; the Gibbs targets routinely sit
//! many orders of magnitude below their proposals, so linear-space
//! arithmetic would underflow.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Width below which a shrinking slice interval is considered collapsed.
const SLICE_MIN_WIDTH: f64 = 1e-15;

/// Draw from an unnormalized target enveloped by `exp(log_c) * proposal`.
///
/// The caller guarantees `log_target(x) <= log_c + log_proposal(x)` for all
/// x; a violation beyond 1e-9 is detected at runtime and is a hard error.
/// Returns the accepted draw and the number of proposals consumed. If no
/// proposal is accepted within `max_tries`, the error lets callers fall back
/// to slice sampling.
pub fn rejection_sample<R, T, P, Q>(
    log_target: T,
    mut propose: P,
    log_proposal: Q,
    log_c: f64,
    rng: &mut R,
    max_tries: u64,
) -> Result<(f64, u64)>
where
    R: Rng + ?Sized,
    T: Fn(f64) -> f64,
    P: FnMut(&mut R) -> f64,
    Q: Fn(f64) -> f64,
{
    for tries in 1..=max_tries {
        let x = propose(rng);
        let log_ratio = log_target(x) - log_c - log_proposal(x);
        if log_ratio > 1e-9 {
            return Err(Error::EnvelopeViolation {
                at: x,
                excess: log_ratio,
            });
        }
        if rng.random::<f64>().ln() < log_ratio {
            return Ok((x, tries));
        }
    }
    Err(Error::AcceptanceTooLow { max_tries })
}

/// A normal distribution restricted to `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncNormSpec {
    pub mu: f64,
    pub sigma: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncNormSpec {
    pub fn new(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "truncated normal needs sigma > 0, got {sigma}"
            )));
        }
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "truncated normal needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { mu, sigma, lo, hi })
    }
}

/// Sampling regime, chosen from the standardized bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncNormRegime {
    /// Interval overlaps [-4, 4]: invert the normal cdf.
    CdfInversion,
    /// Interval entirely right of +4: shifted-exponential rejection.
    RightTailExponential,
    /// Mirror image of the right tail.
    LeftTailExponential,
    /// Standardized width below 0.2: uniform-proposal rejection.
    UniformRejection,
}

/// Regime for standardized bounds `a < b`.
pub fn truncnorm_regime(a: f64, b: f64) -> TruncNormRegime {
    if b - a < 0.2 {
        TruncNormRegime::UniformRejection
    } else if a > 4.0 {
        TruncNormRegime::RightTailExponential
    } else if b < -4.0 {
        TruncNormRegime::LeftTailExponential
    } else {
        TruncNormRegime::CdfInversion
    }
}

/// Optimal scale of the shifted-exponential proposal for a right tail at `a`.
pub fn tail_scale_factor(a: f64) -> f64 {
    0.5 * (a + (a * a + 4.0).sqrt())
}

/// Exact draw from `N(mu, sigma^2)` restricted to `[lo, hi]`.
///
/// The regime is chosen automatically: cdf inversion while the standardized
/// interval overlaps [-4, 4], shifted-exponential rejection in a far tail,
/// and uniform-proposal rejection when the interval is too narrow for either.
pub fn sample_truncated_normal<R: Rng + ?Sized>(spec: &TruncNormSpec, rng: &mut R) -> f64 {
    let a = (spec.lo - spec.mu) / spec.sigma;
    let b = (spec.hi - spec.mu) / spec.sigma;
    let std = match truncnorm_regime(a, b) {
        TruncNormRegime::CdfInversion => {
            let n = Normal::standard();
            let (pa, pb) = (n.cdf(a), n.cdf(b));
            let p = pa + rng.random::<f64>() * (pb - pa);
            n.inverse_cdf(p).clamp(a, b)
        }
        TruncNormRegime::RightTailExponential => tail_sample(a, b, rng),
        TruncNormRegime::LeftTailExponential => -tail_sample(-b, -a, rng),
        TruncNormRegime::UniformRejection => {
            // Accept against the largest density value on the interval.
            let peak2 = if a <= 0.0 && 0.0 <= b {
                0.0
            } else {
                a.abs().min(b.abs()).powi(2)
            };
            loop {
                let x = a + rng.random::<f64>() * (b - a);
                if rng.random::<f64>().ln() <= -0.5 * (x * x - peak2) {
                    break x;
                }
            }
        }
    };
    spec.mu + spec.sigma * std
}

/// Robert-style right-tail sampler for a standard normal on `[a, b]`, a > 0.
fn tail_sample<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let alpha = tail_scale_factor(a);
    loop {
        let e: f64 = -(1.0 - rng.random::<f64>()).ln() / alpha;
        let x = a + e;
        if x > b {
            continue;
        }
        let d = x - alpha;
        if rng.random::<f64>().ln() <= -0.5 * d * d {
            return x;
        }
    }
}

/// One shrinkage update: move the endpoint on the rejected side in to the
/// rejected point.
#[inline]
pub fn shrink_interval(lo: f64, hi: f64, rejected: f64, current: f64) -> (f64, f64) {
    if rejected < current {
        (rejected, hi)
    } else {
        (lo, rejected)
    }
}

/// One slice-sampling transition with the shrinkage procedure.
///
/// Draws the slice level `log u = log_density(current) + ln Uniform(0,1)`,
/// then repeatedly samples uniformly from the interval, shrinking the
/// violated side toward the current point, until a point inside the slice is
/// found. The initial interval must contain the current point and the whole
/// slice. Returns the new point and the number of shrinkage iterations.
pub fn slice_sample_step<R, F>(
    current: f64,
    log_density: F,
    interval: (f64, f64),
    rng: &mut R,
) -> Result<(f64, u32)>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let log_u = log_density(current) + rng.random::<f64>().ln();
    shrink_to_slice(log_u, current, log_density, interval, rng)
}

/// Slice transition whose initial interval may depend on the slice level
/// (e.g. an analytic bound derived from `log u`).
pub fn slice_sample_step_bracketed<R, F, B>(
    current: f64,
    log_density: F,
    bracket: B,
    rng: &mut R,
) -> Result<(f64, u32)>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
    B: FnOnce(f64) -> (f64, f64),
{
    let log_u = log_density(current) + rng.random::<f64>().ln();
    let interval = bracket(log_u);
    shrink_to_slice(log_u, current, log_density, interval, rng)
}

fn shrink_to_slice<R, F>(
    log_u: f64,
    current: f64,
    log_density: F,
    (mut lo, mut hi): (f64, f64),
    rng: &mut R,
) -> Result<(f64, u32)>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    if !(lo <= current && current <= hi) {
        return Err(Error::InvalidConfig(format!(
            "slice interval [{lo}, {hi}] does not contain the current point {current}"
        )));
    }
    let mut shrinks = 0u32;
    loop {
        let x = lo + rng.random::<f64>() * (hi - lo);
        if log_density(x) >= log_u {
            return Ok((x, shrinks));
        }
        (lo, hi) = shrink_interval(lo, hi, x, current);
        shrinks += 1;
        if hi - lo < SLICE_MIN_WIDTH {
            return Err(Error::SliceCollapse { width: hi - lo });
        }
    }
}
