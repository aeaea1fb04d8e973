//! Gibbs samplers approximating the Bayes least squares estimate under the
//! Uniform(-1, 1) coefficient prior.
//!
//! One sweep draws every jitter coordinate from its full conditional
//! (a Gaussian prior reweighted by one sample's likelihood), then every
//! coefficient from a truncated normal. Jitter draws use either envelope
//! rejection sampling with the prior as proposal, or slice sampling with the
//! analytic bracket derived from the slice level; the rejection mode falls
//! back to a slice transition for any draw that exhausts its proposal
//! budget, and the fallback is recorded in the diagnostics.
//!
//! The full conditional of `z_n` does not depend on the other jitter
//! coordinates, so the z-sweep is a set of independent one-dimensional
//! draws; the coefficients are updated sequentially because their
//! conditionals couple through the residual.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc_kernels::{
    rejection_sample, sample_truncated_normal, slice_sample_step_bracketed, TruncNormSpec,
};
use crate::rng::{self, STREAM_GIBBS};
use crate::signal_model::{
    JitterVector, ModelConfig, ObservationMatrix, ParameterVector, SampleSet, SincBasis,
};
use crate::stats::{ln_normal_pdf, LN_SQRT_2PI};

/// Which kernel draws the jitter coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZSamplerKind {
    Rejection,
    Slice,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsSettings {
    /// Discarded initial iterations.
    pub burn_in: usize,
    /// Retained iterations averaged into the estimate.
    pub samples: usize,
    pub z_sampler: ZSamplerKind,
    /// Proposal budget per rejection draw before the slice fallback.
    pub rejection_max_tries: u64,
    pub seed: u64,
    /// Keep the post-burn-in coefficient draws in the result.
    pub store_chain: bool,
}

impl Default for GibbsSettings {
    fn default() -> Self {
        Self {
            burn_in: 500,
            samples: 2000,
            z_sampler: ZSamplerKind::Rejection,
            rejection_max_tries: 10_000,
            seed: 0,
            store_chain: false,
        }
    }
}

/// Per-variable counters for convergence analysis.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GibbsDiagnostics {
    /// Rejection proposals consumed, per sample index.
    pub z_proposals: Vec<u64>,
    /// Rejection draws that fell back to slice sampling, per sample index.
    pub z_fallbacks: Vec<u64>,
    /// Slice shrinkage iterations, per sample index.
    pub z_shrinks: Vec<u64>,
    /// Total z draws per sample index over the run.
    pub z_draws: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsResult {
    /// Coordinate-wise mean of the retained coefficient draws; every entry
    /// lies in [-1, 1].
    pub x_hat: ParameterVector,
    /// Coordinate-wise mean of the retained jitter draws (diagnostic only,
    /// never fed back into estimation).
    pub z_hat: JitterVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_x: Option<Vec<Vec<f64>>>,
    pub diagnostics: GibbsDiagnostics,
}

/// Outcome details of one jitter draw.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZDrawStats {
    pub proposals: u64,
    pub fell_back: bool,
    pub shrinks: u32,
}

/// Unnormalized log full-conditional of `z_n`:
/// `ln N(y_n; h_n(z_n)^T x, sigma_w^2) + ln N(z_n; 0, sigma_z^2)`
/// (normalization constants included; the slice bracket relies on them).
pub fn conditional_z_logdensity(
    z_n: f64,
    n: usize,
    x: &ParameterVector,
    y_n: f64,
    config: &ModelConfig,
) -> f64 {
    let basis = SincBasis::new(config.k);
    z_logdensity(&basis, config.tau(n), &x.0, y_n, z_n, config)
}

#[inline]
fn z_logdensity(
    basis: &SincBasis,
    tau: f64,
    x: &DVector<f64>,
    y_n: f64,
    z: f64,
    config: &ModelConfig,
) -> f64 {
    ln_normal_pdf(y_n, basis.row_dot(tau + z, x), config.sigma_w)
        + ln_normal_pdf(z, 0.0, config.sigma_z)
}

/// Symmetric initial slice interval for a jitter draw at slice level
/// `log u`: `|z| <= sigma_z sqrt(-2 log u - 2 log(2 pi sigma_w sigma_z))`.
pub fn slice_z_bracket(log_u: f64, config: &ModelConfig) -> (f64, f64) {
    let log_peak = (2.0 * std::f64::consts::PI * config.sigma_w * config.sigma_z).ln();
    let bound = config.sigma_z * (-2.0 * log_u - 2.0 * log_peak).max(0.0).sqrt();
    (-bound, bound)
}

fn draw_z<R: Rng + ?Sized>(
    basis: &SincBasis,
    tau: f64,
    x: &DVector<f64>,
    x_norm: f64,
    y_n: f64,
    z_current: f64,
    config: &ModelConfig,
    z_sampler: ZSamplerKind,
    max_tries: u64,
    rng: &mut R,
) -> Result<(f64, ZDrawStats)> {
    let target = |z: f64| z_logdensity(basis, tau, x, y_n, z, config);
    if z_sampler == ZSamplerKind::Rejection {
        // Envelope: c = 1/sqrt(2 pi sigma_w^2), tightened by the
        // |h^T x| <= ||x|| bound whenever that sharpens it.
        let mut log_c = -config.sigma_w.ln() - LN_SQRT_2PI;
        let gap = y_n * y_n - 2.0 * y_n.abs() * x_norm;
        if gap > 0.0 {
            log_c -= gap / (2.0 * config.sigma_w * config.sigma_w);
        }
        let proposal = |r: &mut R| config.sigma_z * r.sample::<f64, _>(StandardNormal);
        let log_proposal = |z: f64| ln_normal_pdf(z, 0.0, config.sigma_z);
        match rejection_sample(target, proposal, log_proposal, log_c, rng, max_tries) {
            Ok((z, tries)) => {
                return Ok((
                    z,
                    ZDrawStats {
                        proposals: tries,
                        ..Default::default()
                    },
                ))
            }
            Err(Error::AcceptanceTooLow { .. }) => {
                // Fall through to one slice transition for this draw.
                let (z, shrinks) = slice_sample_step_bracketed(
                    z_current,
                    target,
                    |log_u| slice_z_bracket(log_u, config),
                    rng,
                )?;
                return Ok((
                    z,
                    ZDrawStats {
                        proposals: max_tries,
                        fell_back: true,
                        shrinks,
                    },
                ));
            }
            Err(e) => return Err(e),
        }
    }
    let (z, shrinks) =
        slice_sample_step_bracketed(z_current, target, |log_u| slice_z_bracket(log_u, config), rng)?;
    Ok((
        z,
        ZDrawStats {
            shrinks,
            ..Default::default()
        },
    ))
}

/// One draw from the full conditional of `z_n` given the coefficients and
/// `y_n` (the conditional does not depend on the other jitter coordinates).
/// `z_current` seeds the slice transition; the rejection kernel ignores it.
pub fn sample_z_given_rest<R: Rng + ?Sized>(
    n: usize,
    x: &ParameterVector,
    y_n: f64,
    z_current: f64,
    config: &ModelConfig,
    settings: &GibbsSettings,
    rng: &mut R,
) -> Result<(f64, ZDrawStats)> {
    if config.sigma_z <= 0.0 || config.sigma_w <= 0.0 {
        return Err(Error::InvalidConfig(
            "jitter conditional needs sigma_z > 0 and sigma_w > 0".into(),
        ));
    }
    let basis = SincBasis::new(config.k);
    draw_z(
        &basis,
        config.tau(n),
        &x.0,
        x.norm(),
        y_n,
        z_current,
        config,
        settings.z_sampler,
        settings.rejection_max_tries,
        rng,
    )
}

/// Truncated-normal parameters of the full conditional of `x_k` given the
/// jitter (through `h = H(z)`) and the other coefficients:
/// `mu_k = H_k^T (y - H_-k x_-k) / H_k^T H_k`, `sigma_k^2 = sigma_w^2 / H_k^T H_k`.
pub fn x_full_conditional(
    k: usize,
    x: &ParameterVector,
    h: &ObservationMatrix,
    y: &DVector<f64>,
    config: &ModelConfig,
) -> Result<TruncNormSpec> {
    let col = h.0.column(k);
    let norm2 = col.norm_squared();
    if norm2 < 1e-12 {
        return Err(Error::NumericalFailure(format!(
            "basis column {k} has zero norm"
        )));
    }
    let residual = y - &h.0 * &x.0;
    let mu = (col.dot(&residual) + norm2 * x.0[k]) / norm2;
    let sigma = config.sigma_w / norm2.sqrt();
    TruncNormSpec::new(mu, sigma, -1.0, 1.0)
}

/// One draw from the full conditional of `x_k`.
pub fn sample_x_given_rest<R: Rng + ?Sized>(
    k: usize,
    x: &ParameterVector,
    z: &JitterVector,
    s: &SampleSet,
    rng: &mut R,
) -> Result<f64> {
    let h = crate::signal_model::build_observation_matrix(z, &s.config)?;
    let spec = x_full_conditional(k, x, &h, &s.y, &s.config)?;
    Ok(sample_truncated_normal(&spec, rng))
}

/// Run the Gibbs chain: initialize `(z, x) = (0, 0)`, sweep all jitter
/// coordinates then all coefficients each iteration, discard `burn_in`
/// iterations and average the rest into the estimates.
pub fn gibbs_run(s: &SampleSet, settings: &GibbsSettings) -> Result<GibbsResult> {
    s.validate()?;
    if settings.samples == 0 {
        return Err(Error::InvalidConfig("gibbs needs samples >= 1".into()));
    }
    if !(s.config.sigma_w > 0.0) {
        return Err(Error::InvalidConfig(
            "gibbs sampling needs sigma_w > 0".into(),
        ));
    }
    let config = s.config;
    let (n, k) = (config.n(), config.k);
    let basis = SincBasis::new(k);
    let mut rng = rng::substream(settings.seed, STREAM_GIBBS);

    let mut z = DVector::<f64>::zeros(n);
    let mut x = DVector::<f64>::zeros(k);
    let mut h = DMatrix::<f64>::zeros(n, k);
    let mut rowbuf = vec![0.0; k];
    for i in 0..n {
        basis.fill_row(config.tau(i), &mut rowbuf);
        for (j, &v) in rowbuf.iter().enumerate() {
            h[(i, j)] = v;
        }
    }

    let mut diag = GibbsDiagnostics {
        z_proposals: vec![0; n],
        z_fallbacks: vec![0; n],
        z_shrinks: vec![0; n],
        z_draws: 0,
    };
    let mut x_sum = DVector::<f64>::zeros(k);
    let mut z_sum = DVector::<f64>::zeros(n);
    let mut chain: Option<Vec<Vec<f64>>> = settings.store_chain.then(Vec::new);

    let total = settings.burn_in + settings.samples;
    for iter in 1..=total {
        if config.sigma_z > 0.0 {
            let x_norm = x.norm();
            for idx in 0..n {
                let (value, stats) = draw_z(
                    &basis,
                    config.tau(idx),
                    &x,
                    x_norm,
                    s.y[idx],
                    z[idx],
                    &config,
                    settings.z_sampler,
                    settings.rejection_max_tries,
                    &mut rng,
                )
                .map_err(|e| {
                    Error::NumericalFailure(format!("gibbs iteration {iter}, z[{idx}]: {e}"))
                })?;
                z[idx] = value;
                diag.z_proposals[idx] += stats.proposals;
                diag.z_fallbacks[idx] += stats.fell_back as u64;
                diag.z_shrinks[idx] += stats.shrinks as u64;
            }
            diag.z_draws += 1;
            for idx in 0..n {
                basis.fill_row(config.tau(idx) + z[idx], &mut rowbuf);
                for (j, &v) in rowbuf.iter().enumerate() {
                    h[(idx, j)] = v;
                }
            }
        }

        let mut residual = &s.y - &h * &x;
        for kk in 0..k {
            let col = h.column(kk);
            let norm2 = col.norm_squared();
            if norm2 < 1e-12 {
                return Err(Error::NumericalFailure(format!(
                    "gibbs iteration {iter}: basis column {kk} has zero norm"
                )));
            }
            let x_old = x[kk];
            let mu = (col.dot(&residual) + norm2 * x_old) / norm2;
            let sigma = config.sigma_w / norm2.sqrt();
            let spec = TruncNormSpec::new(mu, sigma, -1.0, 1.0)?;
            let x_new = sample_truncated_normal(&spec, &mut rng);
            x[kk] = x_new;
            residual.axpy(x_old - x_new, &col, 1.0);
        }

        if iter > settings.burn_in {
            x_sum += &x;
            z_sum += &z;
            if let Some(c) = &mut chain {
                c.push(x.as_slice().to_vec());
            }
        }
    }

    let inv = 1.0 / settings.samples as f64;
    Ok(GibbsResult {
        x_hat: ParameterVector(x_sum * inv),
        z_hat: JitterVector(z_sum * inv),
        chain_x: chain,
        diagnostics: diag,
    })
}
