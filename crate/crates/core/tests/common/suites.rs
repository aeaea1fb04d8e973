//! Reusable distributional test suites shared by the sampler tests and the
//! acceptance gate: each returns per-regime results for the caller to
//! assert and report.

use super::{ks_critical, ks_statistic, mean_stderr, GridCdf};
use dejitter::mcmc_kernels::{
    rejection_sample, sample_truncated_normal, shrink_interval, slice_sample_step, TruncNormSpec,
};
use dejitter::rng::substream;
use rand::Rng;
use rand_distr::StandardNormal;

pub const SUITE_DRAWS: usize = 100_000;

pub struct KsOutcome {
    pub name: &'static str,
    pub statistic: f64,
    pub critical: f64,
}

impl KsOutcome {
    pub fn passed(&self) -> bool {
        self.statistic < self.critical
    }
}

fn ln_normal(x: f64, mu: f64, sigma: f64) -> f64 {
    let d = (x - mu) / sigma;
    -0.5 * d * d - sigma.ln() - 0.918_938_533_204_672_8
}

/// Rejection sampler against dense-grid oracles across five
/// target/proposal regimes.
pub fn rejection_ks_suite() -> Vec<KsOutcome> {
    struct Case {
        name: &'static str,
        log_target: Box<dyn Fn(f64) -> f64>,
        /// (mu, sigma); sigma = 0 means "uniform over the support".
        proposal: (f64, f64),
        log_c: f64,
        support: (f64, f64),
    }
    let sup_ratio = |target: &dyn Fn(f64) -> f64, proposal: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
        (0..40_001)
            .map(|i| lo + (hi - lo) * i as f64 / 40_000.0)
            .map(|x| target(x) - proposal(x))
            .fold(f64::NEG_INFINITY, f64::max)
            + 0.01
    };
    let cases = vec![
        Case {
            name: "normal-under-wider-normal",
            log_target: Box::new(|x| ln_normal(x, 0.0, 1.0)),
            proposal: (0.0, 2.0),
            log_c: 2.0_f64.ln(),
            support: (-9.0, 9.0),
        },
        Case {
            name: "shifted-normal-under-wide-normal",
            log_target: Box::new(|x| ln_normal(x, 1.0, 0.7)),
            log_c: sup_ratio(
                &|x| ln_normal(x, 1.0, 0.7),
                &|x| ln_normal(x, 0.0, 2.5),
                -9.0,
                11.0,
            ),
            proposal: (0.0, 2.5),
            support: (-9.0, 11.0),
        },
        Case {
            // Laplace tails beat any Gaussian's, so the target is windowed;
            // outside the window it vanishes and the envelope is trivial.
            name: "windowed-laplace-under-normal",
            log_target: Box::new(|x: f64| {
                if x.abs() <= 10.0 {
                    -x.abs()
                } else {
                    f64::NEG_INFINITY
                }
            }),
            log_c: sup_ratio(&|x: f64| -x.abs(), &|x| ln_normal(x, 0.0, 2.0), -10.0, 10.0),
            proposal: (0.0, 2.0),
            support: (-10.0, 10.0),
        },
        Case {
            name: "triangular-under-uniform",
            log_target: Box::new(|x: f64| {
                if (0.0..=1.0).contains(&x) {
                    x.max(1e-300).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }),
            proposal: (0.0, 0.0),
            log_c: 0.0,
            support: (0.0, 1.0),
        },
        Case {
            name: "cosine-bump-under-uniform",
            log_target: Box::new(|x: f64| {
                if x.abs() <= std::f64::consts::PI {
                    (1.0 + x.cos()).max(1e-300).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }),
            proposal: (0.0, 0.0),
            log_c: 2.0_f64.ln(),
            support: (-std::f64::consts::PI, std::f64::consts::PI),
        },
    ];

    cases
        .iter()
        .enumerate()
        .map(|(i, case)| {
            let mut rng = substream(100 + i as u64, 0);
            let (lo, hi) = case.support;
            let mut draws = Vec::with_capacity(SUITE_DRAWS);
            for _ in 0..SUITE_DRAWS {
                let (x, _) = if case.proposal.1 > 0.0 {
                    let (mu, sigma) = case.proposal;
                    rejection_sample(
                        &case.log_target,
                        |r: &mut rand_chacha::ChaCha8Rng| {
                            mu + sigma * r.sample::<f64, _>(StandardNormal)
                        },
                        |x| ln_normal(x, mu, sigma),
                        case.log_c,
                        &mut rng,
                        1_000_000,
                    )
                    .unwrap()
                } else {
                    rejection_sample(
                        &case.log_target,
                        |r: &mut rand_chacha::ChaCha8Rng| lo + (hi - lo) * r.random::<f64>(),
                        |_| -(hi - lo).ln(),
                        case.log_c + (hi - lo).ln(),
                        &mut rng,
                        1_000_000,
                    )
                    .unwrap()
                };
                draws.push(x);
            }
            let oracle = GridCdf::from_log_density(&case.log_target, lo, hi, 400_000);
            KsOutcome {
                name: case.name,
                statistic: ks_statistic(&mut draws, |x| oracle.eval(x)),
                critical: ks_critical(SUITE_DRAWS, 0.01),
            }
        })
        .collect()
}

/// Truncated-normal sampler across its three regimes (plus interval-width
/// variations), each against a dense-grid oracle.
pub fn truncnorm_ks_suite() -> Vec<KsOutcome> {
    let cases = [
        ("center", TruncNormSpec::new(0.0, 1.0, -1.0, 1.0).unwrap()),
        ("wide", TruncNormSpec::new(0.0, 1.0, -8.0, 8.0).unwrap()),
        ("near-tail", TruncNormSpec::new(0.0, 1.0, 2.0, 5.0).unwrap()),
        ("right-tail", TruncNormSpec::new(0.0, 1.0, 5.0, 7.0).unwrap()),
        ("left-deep-tail", TruncNormSpec::new(10.0, 1.0, -1.0, 1.0).unwrap()),
        ("narrow", TruncNormSpec::new(0.0, 1.0, 0.05, 0.15).unwrap()),
        ("narrow-far", TruncNormSpec::new(0.0, 1.0, 10.0, 10.1).unwrap()),
    ];
    cases
        .iter()
        .enumerate()
        .map(|(i, (name, spec))| {
            let mut rng = substream(210 + i as u64, 0);
            let mut draws: Vec<f64> = (0..SUITE_DRAWS)
                .map(|_| sample_truncated_normal(spec, &mut rng))
                .collect();
            let oracle = GridCdf::from_log_density(
                |x| ln_normal(x, spec.mu, spec.sigma),
                spec.lo,
                spec.hi,
                400_000,
            );
            KsOutcome {
                name,
                statistic: ks_statistic(&mut draws, |x| oracle.eval(x)),
                critical: ks_critical(SUITE_DRAWS, 0.01),
            }
        })
        .collect()
}

/// Slice sampler across five targets. Chained draws are thinned before the
/// iid KS threshold applies; the small multiplier absorbs the residual
/// autocorrelation.
pub fn slice_ks_suite() -> Vec<KsOutcome> {
    struct Case {
        name: &'static str,
        log_density: Box<dyn Fn(f64) -> f64>,
        interval: (f64, f64),
        start: f64,
        thin: usize,
    }
    let cases = vec![
        Case {
            name: "flat-unit",
            log_density: Box::new(|_| 0.0),
            interval: (0.0, 1.0),
            start: 0.5,
            thin: 1,
        },
        Case {
            name: "standard-normal",
            log_density: Box::new(|x: f64| -0.5 * x * x),
            interval: (-10.0, 10.0),
            start: 0.0,
            thin: 10,
        },
        Case {
            name: "laplace",
            log_density: Box::new(|x: f64| -x.abs()),
            interval: (-15.0, 15.0),
            start: 0.0,
            thin: 10,
        },
        Case {
            name: "bimodal",
            log_density: Box::new(|x: f64| {
                let a = -0.5 * ((x + 2.0) / 0.5).powi(2);
                let b = -0.5 * ((x - 2.0) / 0.5).powi(2);
                let m = a.max(b);
                m + ((a - m).exp() + (b - m).exp()).ln()
            }),
            interval: (-8.0, 8.0),
            start: 0.0,
            thin: 20,
        },
        Case {
            name: "triangular",
            log_density: Box::new(|x: f64| {
                if (0.0..=1.0).contains(&x) {
                    x.max(1e-300).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }),
            interval: (0.0, 1.0),
            start: 0.5,
            thin: 5,
        },
    ];
    cases
        .iter()
        .enumerate()
        .map(|(i, case)| {
            let mut rng = substream(300 + i as u64, 0);
            let mut x = case.start;
            for _ in 0..100 {
                x = slice_sample_step(x, &case.log_density, case.interval, &mut rng)
                    .unwrap()
                    .0;
            }
            let mut draws = Vec::with_capacity(SUITE_DRAWS);
            while draws.len() < SUITE_DRAWS {
                for _ in 0..case.thin {
                    x = slice_sample_step(x, &case.log_density, case.interval, &mut rng)
                        .unwrap()
                        .0;
                }
                draws.push(x);
            }
            let oracle = GridCdf::from_log_density(
                &case.log_density,
                case.interval.0,
                case.interval.1,
                400_000,
            );
            KsOutcome {
                name: case.name,
                statistic: ks_statistic(&mut draws, |x| oracle.eval(x)),
                critical: 1.5 * ks_critical(SUITE_DRAWS, 0.01),
            }
        })
        .collect()
}

pub struct ShrinkOutcome {
    pub x0_fraction: f64,
    pub mean_ratio: f64,
    pub analytic_ratio: f64,
    pub stderr: f64,
}

/// Empirical one-step interval contraction of the shrinkage update,
/// conditional on the current point's position in the interval.
pub fn shrinkage_suite() -> Vec<ShrinkOutcome> {
    let (l, r) = (-0.3, 1.7);
    let width = r - l;
    let mut rng = substream(7, 0);
    let reps = 200_000;
    [0.0, 0.25, 0.5, 0.77, 1.0]
        .iter()
        .map(|&frac| {
            let x0 = l + frac * width;
            let mut ratios = Vec::with_capacity(reps);
            for _ in 0..reps {
                let rejected = l + rng.random::<f64>() * width;
                let (nl, nr) = shrink_interval(l, r, rejected, x0);
                ratios.push((nr - nl) / width);
            }
            let (mean, se) = mean_stderr(&ratios);
            let analytic = (width / 2.0 + (x0 * (r + l - x0) - r * l) / width) / width;
            ShrinkOutcome {
                x0_fraction: frac,
                mean_ratio: mean,
                analytic_ratio: analytic,
                stderr: se,
            }
        })
        .collect()
}
