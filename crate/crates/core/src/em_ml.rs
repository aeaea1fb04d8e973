//! Maximum-likelihood estimation via EM with the jitter as missing data.
//!
//! Each iteration solves the linear system
//! `E[H^T H | y; x_prev] x = E[H | y; x_prev]^T y`, where the conditional
//! expectations are per-sample posteriors over the jitter evaluated by
//! Gauss-Hermite quadrature: node `j` of sample `n` gets posterior weight
//! `w_j p(y_n | z_j; x_prev) / p(y_n; x_prev)`. The quadrature grid is fixed
//! by the config, so all basis rows are precomputed once per dataset and
//! every E-step is a pair of weighted matrix products.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd_or_lstsq;
use crate::linear_estimators::efficient_no_jitter;
use crate::quadrature::{gauss_hermite_rule, QuadratureRule, DEFAULT_QUAD_ORDER};
use crate::rng::{self, STREAM_EM_RESTART};
use crate::signal_model::{draw_prior_parameters, ModelConfig, ParameterVector, SampleSet, SincBasis};
use crate::stats::{ln_normal_pdf, LN_SQRT_2PI};

/// Starting point of the iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EmInit {
    /// Initialize at the no-jitter efficient linear estimate.
    NoJitterLinear,
    /// Initialize at an explicit coefficient vector.
    Vector(ParameterVector),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmSettings {
    /// Gauss-Hermite order for every E-step quadrature.
    pub quad_order: usize,
    pub max_iters: usize,
    /// Relative parameter-change stopping threshold.
    pub tol: f64,
    pub init: EmInit,
    /// Extra random restarts (uniform prior draws); the run with the best
    /// final quadrature log-likelihood wins.
    pub restarts: usize,
    pub restart_seed: u64,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self {
            quad_order: DEFAULT_QUAD_ORDER,
            max_iters: 500,
            tol: 1e-8,
            init: EmInit::NoJitterLinear,
            restarts: 0,
            restart_seed: 0,
        }
    }
}

/// Per-iteration record of an EM run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmTrace {
    /// Iterates x^(0) .. x^(T); the first entry is the initialization.
    pub estimates: Vec<ParameterVector>,
    /// Quadrature log-likelihood of each iterate.
    pub loglik: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Number of M-steps that needed the least-squares fallback because the
    /// E-step matrix was numerically singular.
    pub solver_fallbacks: usize,
}

/// Precomputed quadrature grid for one dataset: basis rows at every
/// (sample, node) pair. The grid depends only on (config, rule), not on x.
struct EStepTables {
    /// (N*I) x K; row n*I + j holds h_n(sigma_z * node_j)^T.
    rows: DMatrix<f64>,
    log_w: Vec<f64>,
    y: DVector<f64>,
    sigma_w: f64,
    n: usize,
    order: usize,
}

impl EStepTables {
    fn new(s: &SampleSet, rule: &QuadratureRule) -> Self {
        let config = &s.config;
        let (n, k) = (config.n(), config.k);
        // sigma_z = 0 collapses the grid to the single point z = 0.
        let points: Vec<(f64, f64)> = if config.sigma_z == 0.0 {
            vec![(0.0, 1.0)]
        } else {
            rule.iter().map(|(x, w)| (config.sigma_z * x, w)).collect()
        };
        let order = points.len();
        let basis = SincBasis::new(k);
        let mut rows = DMatrix::zeros(n * order, k);
        let mut row = vec![0.0; k];
        for i in 0..n {
            for (j, &(z, _)) in points.iter().enumerate() {
                basis.fill_row(config.tau(i) + z, &mut row);
                for (c, &v) in row.iter().enumerate() {
                    rows[(i * order + j, c)] = v;
                }
            }
        }
        Self {
            rows,
            log_w: points.iter().map(|&(_, w)| w.ln()).collect(),
            y: s.y.clone(),
            sigma_w: config.sigma_w,
            n,
            order,
        }
    }

    /// Posterior node weights for every sample at `x`, plus the quadrature
    /// log-likelihood of `x`. Weights fall back to the prior when all nodes
    /// underflow.
    fn posterior_weights(&self, x: &DVector<f64>) -> (Vec<f64>, f64) {
        let means = &self.rows * x;
        let mut weights = vec![0.0; self.n * self.order];
        let mut loglik = 0.0;
        let mut t = vec![0.0; self.order];
        for i in 0..self.n {
            let y_i = self.y[i];
            let mut t_max = f64::NEG_INFINITY;
            for j in 0..self.order {
                let tj = if self.sigma_w == 0.0 {
                    ln_normal_pdf(y_i, means[i * self.order + j], 0.0)
                } else {
                    let d = (y_i - means[i * self.order + j]) / self.sigma_w;
                    self.log_w[j] - 0.5 * d * d
                };
                t[j] = tj;
                if tj > t_max {
                    t_max = tj;
                }
            }
            let w = &mut weights[i * self.order..(i + 1) * self.order];
            if t_max == f64::NEG_INFINITY {
                // Extreme outlier: jitter uninformative, keep the prior.
                for j in 0..self.order {
                    w[j] = self.log_w[j].exp();
                }
                loglik = f64::NEG_INFINITY;
                continue;
            }
            if t_max == f64::INFINITY {
                // Degenerate sigma_w = 0 with an exactly matching node.
                let hits = t.iter().filter(|&&v| v == f64::INFINITY).count();
                for j in 0..self.order {
                    w[j] = if t[j] == f64::INFINITY { 1.0 / hits as f64 } else { 0.0 };
                }
                loglik = f64::INFINITY;
                continue;
            }
            let mut sum = 0.0;
            for j in 0..self.order {
                let e = (t[j] - t_max).exp();
                w[j] = e;
                sum += e;
            }
            for v in w.iter_mut() {
                *v /= sum;
            }
            loglik += t_max + sum.ln() - self.sigma_w.ln() - LN_SQRT_2PI;
        }
        (weights, loglik)
    }

    /// One E-step at `x`: returns (A, b, loglik(x)) with
    /// `A = sum_n E[h_n h_n^T | y_n; x]` and `b = E[H | y; x]^T y`.
    fn e_step(&self, x: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, f64) {
        let (weights, loglik) = self.posterior_weights(x);
        // A = R^T diag(w) R via a sqrt-weighted copy, which keeps the result
        // symmetric PSD by construction.
        let mut scaled = self.rows.clone();
        for (r, &w) in weights.iter().enumerate() {
            scaled.row_mut(r).scale_mut(w.sqrt());
        }
        let a = scaled.tr_mul(&scaled);
        let mut wy = DVector::zeros(self.n * self.order);
        for i in 0..self.n {
            for j in 0..self.order {
                wy[i * self.order + j] = weights[i * self.order + j] * self.y[i];
            }
        }
        let b = self.rows.tr_mul(&wy);
        (a, b, loglik)
    }

    fn loglik(&self, x: &DVector<f64>) -> f64 {
        self.posterior_weights(x).1
    }
}

/// Quadrature-approximated singleton likelihood `p(y_n; x)`:
/// `sum_i w_i N(y_n; h_n(sigma_z x_i)^T x, sigma_w^2)`.
pub fn singleton_likelihood(
    y_n: f64,
    n: usize,
    x: &ParameterVector,
    config: &ModelConfig,
    rule: &QuadratureRule,
) -> f64 {
    log_singleton_likelihood(y_n, n, x, config, rule).exp()
}

/// Log of [`singleton_likelihood`], evaluated with a log-sum-exp shift.
pub fn log_singleton_likelihood(
    y_n: f64,
    n: usize,
    x: &ParameterVector,
    config: &ModelConfig,
    rule: &QuadratureRule,
) -> f64 {
    let basis = SincBasis::new(config.k);
    let tau = config.tau(n);
    if config.sigma_z == 0.0 {
        return ln_normal_pdf(y_n, basis.row_dot(tau, &x.0), config.sigma_w);
    }
    let mut t_max = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity(rule.order());
    for (node, w) in rule.iter() {
        let mean = basis.row_dot(tau + config.sigma_z * node, &x.0);
        let t = w.ln() + ln_normal_pdf(y_n, mean, config.sigma_w);
        terms.push(t);
        if t > t_max {
            t_max = t;
        }
    }
    if t_max == f64::NEG_INFINITY || t_max == f64::INFINITY {
        return t_max;
    }
    t_max + terms.iter().map(|t| (t - t_max).exp()).sum::<f64>().ln()
}

/// Quadrature log-likelihood of the whole sample set at `x`.
pub fn quadrature_log_likelihood(s: &SampleSet, x: &ParameterVector, rule: &QuadratureRule) -> f64 {
    EStepTables::new(s, rule).loglik(&x.0)
}

/// One E-step: the linear-system pair `(A, b)` of the M-step at `x_prev`.
pub fn em_e_step(
    s: &SampleSet,
    x_prev: &ParameterVector,
    rule: &QuadratureRule,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    s.validate()?;
    check_dims(s, x_prev)?;
    let (a, b, _) = EStepTables::new(s, rule).e_step(&x_prev.0);
    Ok((a, b))
}

fn check_dims(s: &SampleSet, x: &ParameterVector) -> Result<()> {
    if x.len() != s.config.k {
        return Err(Error::DimensionMismatch {
            what: "parameter vector",
            expected: s.config.k,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Run EM to convergence; returns the final estimate and the full trace.
pub fn em_run(s: &SampleSet, settings: &EmSettings) -> Result<(ParameterVector, EmTrace)> {
    s.validate()?;
    if settings.max_iters == 0 || !(settings.tol > 0.0) {
        return Err(Error::InvalidConfig(
            "EM needs max_iters >= 1 and tol > 0".into(),
        ));
    }
    if s.config.sigma_w == 0.0 && s.config.sigma_z > 0.0 {
        return Err(Error::NumericalFailure(
            "EM requires sigma_w > 0 when jitter is present".into(),
        ));
    }
    let rule = gauss_hermite_rule(settings.quad_order)?;
    let tables = EStepTables::new(s, &rule);

    let init = match &settings.init {
        EmInit::NoJitterLinear => efficient_no_jitter(s)?,
        EmInit::Vector(v) => {
            check_dims(s, v)?;
            v.clone()
        }
    };

    let mut best = run_from(&tables, init, settings);
    for r in 0..settings.restarts {
        let seed = rng::fold_seed(settings.restart_seed, &[STREAM_EM_RESTART, r as u64]);
        let start = draw_prior_parameters(s.config.k, seed);
        let candidate = run_from(&tables, start, settings);
        let best_ll = *best.1.loglik.last().unwrap();
        let cand_ll = *candidate.1.loglik.last().unwrap();
        if cand_ll > best_ll {
            best = candidate;
        }
    }
    Ok(best)
}

fn run_from(
    tables: &EStepTables,
    init: ParameterVector,
    settings: &EmSettings,
) -> (ParameterVector, EmTrace) {
    let mut estimates = vec![init.clone()];
    let mut loglik = Vec::new();
    let mut x = init.0;
    let mut converged = false;
    let mut fallbacks = 0;
    for _ in 0..settings.max_iters {
        let (a, b, ll_prev) = tables.e_step(&x);
        loglik.push(ll_prev);
        let (x_next, fell_back) = solve_spd_or_lstsq(a, &b);
        if fell_back {
            fallbacks += 1;
        }
        let rel = (&x_next - &x).norm() / x.norm().max(1.0);
        estimates.push(ParameterVector(x_next.clone()));
        x = x_next;
        if rel < settings.tol {
            converged = true;
            break;
        }
    }
    loglik.push(tables.loglik(&x));
    let trace = EmTrace {
        iterations_run: estimates.len() - 1,
        converged,
        solver_fallbacks: fallbacks,
        estimates,
        loglik,
    };
    (ParameterVector(x), trace)
}
