//! Monte Carlo approximation of the Cramér-Rao bound for the random-jitter
//! model.
//!
//! Gauss-Hermite quadrature turns each singleton likelihood into a Gaussian
//! mixture `sum_i w_i N(h_n(z_i)^T x, sigma_w^2)`; sampling that mixture and
//! averaging the outer products of the mixture score approximates each
//! sample's Fisher information contribution. The bound is the trace of the
//! inverse of the accumulated matrix.
//!
//! The per-index Monte Carlo sum is averaged (divided by the draw count), so
//! the zero-jitter case reproduces the analytic Fisher information
//! `(M / sigma_w^2) I` of the linear model.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::rng::{self, STREAM_FISHER};
use crate::signal_model::{ModelConfig, ParameterVector, SincBasis};
use crate::stats::ln_normal_pdf;

/// Monte Carlo Fisher information estimate.
#[derive(Clone, Debug)]
pub struct FisherEstimate {
    /// Symmetric PSD estimate of the K x K Fisher information matrix.
    pub i_y: DMatrix<f64>,
    /// Mixture samples per data index.
    pub ns: usize,
    pub quad_order: usize,
    pub seed: u64,
    /// Draws whose mixture density underflowed (scored as zero).
    pub underflows: u64,
}

/// Mixture representation of one sample's likelihood: basis rows and means at
/// the quadrature nodes.
struct Mixture {
    rows: Vec<DVector<f64>>,
    means: Vec<f64>,
    log_w: Vec<f64>,
    weights: Vec<f64>,
}

impl Mixture {
    fn new(n: usize, x: &ParameterVector, config: &ModelConfig, rule: &QuadratureRule) -> Self {
        let basis = SincBasis::new(config.k);
        let tau = config.tau(n);
        let points: Vec<(f64, f64)> = if config.sigma_z == 0.0 {
            vec![(0.0, 1.0)]
        } else {
            rule.iter().map(|(z, w)| (config.sigma_z * z, w)).collect()
        };
        let rows: Vec<DVector<f64>> = points.iter().map(|&(z, _)| basis.row(tau + z)).collect();
        let means = rows.iter().map(|h| h.dot(&x.0)).collect();
        Self {
            rows,
            means,
            log_w: points.iter().map(|&(_, w)| w.ln()).collect(),
            weights: points.iter().map(|&(_, w)| w).collect(),
        }
    }

    /// Quadrature-approximated score `d ln p(y; x) / dx` at `y`, or `None`
    /// when every mixture component underflows.
    fn score(&self, y: f64, sigma_w: f64) -> Option<DVector<f64>> {
        let k = self.rows[0].len();
        let mut t_max = f64::NEG_INFINITY;
        let t: Vec<f64> = (0..self.rows.len())
            .map(|i| {
                let v = self.log_w[i] + ln_normal_pdf(y, self.means[i], sigma_w);
                if v > t_max {
                    t_max = v;
                }
                v
            })
            .collect();
        if t_max == f64::NEG_INFINITY {
            return None;
        }
        let mut score = DVector::zeros(k);
        let mut norm = 0.0;
        for i in 0..self.rows.len() {
            let c = (t[i] - t_max).exp();
            norm += c;
            score.axpy(c * (y - self.means[i]) / (sigma_w * sigma_w), &self.rows[i], 1.0);
        }
        score /= norm;
        Some(score)
    }
}

/// Score of the quadrature-approximated singleton likelihood of sample `n`
/// at observation value `y_s`. An irrecoverable mixture underflow yields the
/// zero vector.
pub fn score_at_sample(
    y_s: f64,
    n: usize,
    x: &ParameterVector,
    config: &ModelConfig,
    rule: &QuadratureRule,
) -> DVector<f64> {
    assert!(config.sigma_w > 0.0, "score needs sigma_w > 0");
    Mixture::new(n, x, config, rule)
        .score(y_s, config.sigma_w)
        .unwrap_or_else(|| DVector::zeros(config.k))
}

/// Monte Carlo Fisher information at `x`: for every sample index, draw `ns`
/// observations from the mixture and average the outer products of their
/// scores.
pub fn fisher_information(
    x: &ParameterVector,
    config: &ModelConfig,
    ns: usize,
    rule: &QuadratureRule,
    seed: u64,
) -> FisherEstimate {
    assert!(ns >= 1);
    assert!(config.sigma_w > 0.0, "Fisher information needs sigma_w > 0");
    assert_eq!(x.len(), config.k);
    let k = config.k;
    let mut acc = DMatrix::zeros(k, k);
    let mut underflows = 0u64;
    let inv_ns = 1.0 / ns as f64;
    for n in 0..config.n() {
        let mixture = Mixture::new(n, x, config, rule);
        let mut r = rng::substream(rng::fold_seed(seed, &[n as u64]), STREAM_FISHER);
        for _ in 0..ns {
            // Component by inverse cdf on the discrete weights, then a
            // Gaussian draw around its mean.
            let u: f64 = r.random();
            let mut cum = 0.0;
            let mut comp = mixture.weights.len() - 1;
            for (i, &w) in mixture.weights.iter().enumerate() {
                cum += w;
                if u < cum {
                    comp = i;
                    break;
                }
            }
            let y_s = mixture.means[comp] + config.sigma_w * r.sample::<f64, _>(StandardNormal);
            match mixture.score(y_s, config.sigma_w) {
                Some(score) => {
                    // Upper triangle only, mirrored afterwards, so the
                    // estimate is symmetric to the last bit.
                    for i in 0..k {
                        for j in i..k {
                            acc[(i, j)] += inv_ns * score[i] * score[j];
                        }
                    }
                }
                None => underflows += 1,
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            acc[(i, j)] = acc[(j, i)];
        }
    }
    FisherEstimate {
        i_y: acc,
        ns,
        quad_order: rule.order(),
        seed,
        underflows,
    }
}

/// The Cramér-Rao bound: trace of the inverse Fisher estimate.
pub fn crb_trace(fisher: &FisherEstimate) -> Result<f64> {
    nalgebra::Cholesky::new(fisher.i_y.clone())
        .map(|c| c.inverse().trace())
        .ok_or_else(|| {
            Error::NumericalFailure(
                "Fisher estimate is singular; increase the mixture sample count".into(),
            )
        })
}
