//! Monte Carlo benchmark harness: MSE sweeps over (estimator, M, sigma_z,
//! sigma_w) grids, CSV/JSON persistence, and the jitter-tolerance
//! improvement factor.
//!
//! Every trial of a cell draws the coefficients from the prior, generates
//! one dataset, and feeds the *same* dataset to every estimator, so MSE
//! differences are paired comparisons; the per-cell dataset hash in the
//! provenance record witnesses the pairing. Trials are scheduled on a worker
//! pool but reduced in trial order, so reports are bit-identical across
//! thread counts.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes_gibbs::{gibbs_run, GibbsSettings, ZSamplerKind};
use crate::crb::{crb_trace, fisher_information};
use crate::em_ml::{em_run, EmSettings};
use crate::error::{Error, Result};
use crate::linear_estimators::{
    efficient_no_jitter, linear_unbiased, lls_no_jitter, lls_random_jitter,
    mean_observation_matrices, MeanObservationMatrix, DEFAULT_PRIOR_VARIANCE,
};
use crate::quadrature::{gauss_hermite_rule, DEFAULT_QUAD_ORDER};
use crate::rng::fold_seed;
use crate::signal_model::{draw_prior_parameters, generate_samples, ModelConfig, SampleSet};

/// Estimator identifiers accepted by sweeps and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorId {
    EfficientNoJitter,
    LinearUnbiased,
    LlsNoJitter,
    LlsRandomJitter,
    Em,
    GibbsRejection,
    GibbsSlice,
    Crb,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 8] = [
        EstimatorId::EfficientNoJitter,
        EstimatorId::LinearUnbiased,
        EstimatorId::LlsNoJitter,
        EstimatorId::LlsRandomJitter,
        EstimatorId::Em,
        EstimatorId::GibbsRejection,
        EstimatorId::GibbsSlice,
        EstimatorId::Crb,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::EfficientNoJitter => "efficient-no-jitter",
            EstimatorId::LinearUnbiased => "linear-unbiased",
            EstimatorId::LlsNoJitter => "lls-no-jitter",
            EstimatorId::LlsRandomJitter => "lls-random-jitter",
            EstimatorId::Em => "em",
            EstimatorId::GibbsRejection => "gibbs-rejection",
            EstimatorId::GibbsSlice => "gibbs-slice",
            EstimatorId::Crb => "crb",
        }
    }
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator id `{s}`")))
    }
}

fn default_quad_order() -> usize {
    DEFAULT_QUAD_ORDER
}
fn default_sigma_x2() -> f64 {
    DEFAULT_PRIOR_VARIANCE
}
fn default_em_max_iters() -> usize {
    500
}
fn default_em_tol() -> f64 {
    1e-8
}
fn default_gibbs_burn_in() -> usize {
    500
}
fn default_gibbs_samples() -> usize {
    2000
}
fn default_gibbs_max_tries() -> u64 {
    10_000
}
fn default_crb_ns() -> usize {
    1000
}

/// A sweep over the cross product of `m_list x sigma_z_list x sigma_w_list`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSpec {
    pub k: usize,
    pub m_list: Vec<usize>,
    pub sigma_z_list: Vec<f64>,
    pub sigma_w_list: Vec<f64>,
    pub trials: usize,
    pub estimators: Vec<EstimatorId>,
    pub master_seed: u64,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
    #[serde(default = "default_sigma_x2")]
    pub sigma_x2: f64,
    #[serde(default = "default_em_max_iters")]
    pub em_max_iters: usize,
    #[serde(default = "default_em_tol")]
    pub em_tol: f64,
    #[serde(default = "default_gibbs_burn_in")]
    pub gibbs_burn_in: usize,
    #[serde(default = "default_gibbs_samples")]
    pub gibbs_samples: usize,
    #[serde(default = "default_gibbs_max_tries")]
    pub gibbs_max_tries: u64,
    #[serde(default = "default_crb_ns")]
    pub crb_ns: usize,
    /// Optional per-trial estimator time budget in seconds; a trial whose
    /// estimator call exceeds it is recorded as a failure. Off by default
    /// because wall-clock exclusion makes reports timing-dependent.
    #[serde(default)]
    pub trial_timeout_s: Option<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("sweep needs k >= 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("sweep needs trials >= 1".into()));
        }
        if self.m_list.is_empty() || self.sigma_z_list.is_empty() || self.sigma_w_list.is_empty() {
            return Err(Error::InvalidConfig("sweep grid lists must be nonempty".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one estimator".into()));
        }
        for &m in &self.m_list {
            ModelConfig::new(self.k, m, self.sigma_z_list[0], self.sigma_w_list[0])?;
        }
        for &sz in &self.sigma_z_list {
            for &sw in &self.sigma_w_list {
                ModelConfig::new(self.k, self.m_list[0], sz, sw)?;
            }
        }
        Ok(())
    }
}

/// One (estimator, cell) aggregate. `mse_mean`/`mse_stderr` are the mean and
/// standard error of the per-trial total squared error `||x_hat - x||^2`
/// (for `crb` rows they aggregate the bound value instead).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub estimator: EstimatorId,
    pub k: usize,
    pub m: usize,
    pub sigma_z: f64,
    pub sigma_w: f64,
    pub trials: usize,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub failures: usize,
    pub wall_time_s: f64,
    pub seed: u64,
}

/// Per-cell provenance: the derived cell seed and a hash over every trial's
/// dataset, witnessing that all estimators consumed identical data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellInfo {
    pub m: usize,
    pub sigma_z: f64,
    pub sigma_w: f64,
    pub seed: u64,
    pub dataset_hash: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub cells: Vec<CellInfo>,
}

/// Full reproducibility record written next to the CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact_version: String,
    pub spec: SweepSpec,
    pub cells: Vec<CellInfo>,
    pub rows: Vec<ReportRow>,
}

/// Maximum jitter-tolerance ratio between two MSE curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementResult {
    pub baseline: EstimatorId,
    pub candidate: EstimatorId,
    pub m: usize,
    pub sigma_w: f64,
    /// Max over common MSE levels of sigma_z(candidate) / sigma_z(baseline).
    pub factor: f64,
    /// The MSE level at which the maximum occurs.
    pub mse_level: f64,
}

fn fnv1a(state: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *state ^= b as u64;
        *state = state.wrapping_mul(0x0000_0100_0000_01B3);
    }
}

struct TrialResult {
    /// Per estimator: Ok(squared error or bound value) / Err(message).
    outcomes: Vec<std::result::Result<f64, String>>,
    elapsed: Vec<f64>,
    trial_seed: u64,
    y_bits: Vec<u64>,
}

fn run_trial(
    spec: &SweepSpec,
    config: &ModelConfig,
    means: Option<&MeanObservationMatrix>,
    cell_seed: u64,
    trial: usize,
) -> TrialResult {
    let trial_seed = fold_seed(cell_seed, &[trial as u64]);
    let x_true = draw_prior_parameters(spec.k, trial_seed);
    let samples = generate_samples(&x_true, config, trial_seed);
    let mut outcomes = Vec::with_capacity(spec.estimators.len());
    let mut elapsed = Vec::with_capacity(spec.estimators.len());
    for &estimator in &spec.estimators {
        let start = Instant::now();
        let outcome = run_estimator(spec, estimator, &samples, &x_true.0, means, trial_seed);
        elapsed.push(start.elapsed().as_secs_f64());
        outcomes.push(outcome.map_err(|e| e.to_string()));
    }
    TrialResult {
        outcomes,
        elapsed,
        trial_seed,
        y_bits: samples.y.iter().map(|v| v.to_bits()).collect(),
    }
}

fn run_estimator(
    spec: &SweepSpec,
    estimator: EstimatorId,
    samples: &SampleSet,
    x_true: &nalgebra::DVector<f64>,
    means: Option<&MeanObservationMatrix>,
    trial_seed: u64,
) -> Result<f64> {
    let sq_err = |est: crate::signal_model::ParameterVector| (&est.0 - x_true).norm_squared();
    match estimator {
        EstimatorId::EfficientNoJitter => efficient_no_jitter(samples).map(sq_err),
        EstimatorId::LinearUnbiased => {
            linear_unbiased(samples, means.expect("means precomputed")).map(sq_err)
        }
        EstimatorId::LlsNoJitter => lls_no_jitter(samples, spec.sigma_x2).map(sq_err),
        EstimatorId::LlsRandomJitter => {
            lls_random_jitter(samples, means.expect("means precomputed"), spec.sigma_x2).map(sq_err)
        }
        EstimatorId::Em => {
            let settings = EmSettings {
                quad_order: spec.quad_order,
                max_iters: spec.em_max_iters,
                tol: spec.em_tol,
                ..EmSettings::default()
            };
            em_run(samples, &settings).map(|(est, _)| sq_err(est))
        }
        EstimatorId::GibbsRejection | EstimatorId::GibbsSlice => {
            let settings = GibbsSettings {
                burn_in: spec.gibbs_burn_in,
                samples: spec.gibbs_samples,
                z_sampler: if estimator == EstimatorId::GibbsRejection {
                    ZSamplerKind::Rejection
                } else {
                    ZSamplerKind::Slice
                },
                rejection_max_tries: spec.gibbs_max_tries,
                seed: trial_seed,
                store_chain: false,
            };
            gibbs_run(samples, &settings).map(|r| sq_err(r.x_hat))
        }
        EstimatorId::Crb => {
            let rule = gauss_hermite_rule(spec.quad_order)?;
            let x = crate::signal_model::ParameterVector(x_true.clone());
            let fisher = fisher_information(&x, &samples.config, spec.crb_ns, &rule, trial_seed);
            crb_trace(&fisher)
        }
    }
}

/// Run the full sweep. Within a cell all estimators see identical per-trial
/// datasets; rows appear in (m, sigma_z, sigma_w, estimator) order.
pub fn run_sweep(spec: &SweepSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let rule = gauss_hermite_rule(spec.quad_order)?;
    let needs_means = spec
        .estimators
        .iter()
        .any(|e| matches!(e, EstimatorId::LinearUnbiased | EstimatorId::LlsRandomJitter));

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (mi, &m) in spec.m_list.iter().enumerate() {
        for (zi, &sigma_z) in spec.sigma_z_list.iter().enumerate() {
            for (wi, &sigma_w) in spec.sigma_w_list.iter().enumerate() {
                let config = ModelConfig::new(spec.k, m, sigma_z, sigma_w)?;
                let cell_seed = fold_seed(spec.master_seed, &[mi as u64, zi as u64, wi as u64]);
                let means = needs_means.then(|| mean_observation_matrices(&config, &rule));

                let results: Vec<TrialResult> = (0..spec.trials)
                    .into_par_iter()
                    .map(|t| run_trial(spec, &config, means.as_ref(), cell_seed, t))
                    .collect();

                let mut hash = 0xCBF2_9CE4_8422_2325u64;
                for r in &results {
                    fnv1a(&mut hash, &r.trial_seed.to_le_bytes());
                    for bits in &r.y_bits {
                        fnv1a(&mut hash, &bits.to_le_bytes());
                    }
                }
                cells.push(CellInfo {
                    m,
                    sigma_z,
                    sigma_w,
                    seed: cell_seed,
                    dataset_hash: format!("{hash:016x}"),
                });

                for (ei, &estimator) in spec.estimators.iter().enumerate() {
                    let mut values = Vec::with_capacity(spec.trials);
                    let mut failures = 0usize;
                    let mut wall = 0.0;
                    for r in &results {
                        wall += r.elapsed[ei];
                        let timed_out = spec
                            .trial_timeout_s
                            .map(|budget| r.elapsed[ei] > budget)
                            .unwrap_or(false);
                        match (&r.outcomes[ei], timed_out) {
                            (Ok(v), false) => values.push(*v),
                            _ => failures += 1,
                        }
                    }
                    let count = values.len();
                    let (mean, stderr) = if count == 0 {
                        (f64::NAN, f64::NAN)
                    } else {
                        let mean = values.iter().sum::<f64>() / count as f64;
                        let var = if count > 1 {
                            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                                / (count - 1) as f64
                        } else {
                            0.0
                        };
                        (mean, (var / count as f64).sqrt())
                    };
                    rows.push(ReportRow {
                        estimator,
                        k: spec.k,
                        m,
                        sigma_z,
                        sigma_w,
                        trials: spec.trials,
                        mse_mean: mean,
                        mse_stderr: stderr,
                        failures,
                        wall_time_s: wall,
                        seed: cell_seed,
                    });
                }
            }
        }
    }
    Ok(ExperimentReport { rows, cells })
}

/// CSV with the fixed column order
/// `estimator,K,M,sigma_z,sigma_w,trials,mse_mean,mse_stderr,failures,wall_time_s,seed`.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "estimator",
        "K",
        "M",
        "sigma_z",
        "sigma_w",
        "trials",
        "mse_mean",
        "mse_stderr",
        "failures",
        "wall_time_s",
        "seed",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.estimator.as_str().to_string(),
            r.k.to_string(),
            r.m.to_string(),
            format_float(r.sigma_z),
            format_float(r.sigma_w),
            r.trials.to_string(),
            format_float(r.mse_mean),
            format_float(r.mse_stderr),
            r.failures.to_string(),
            format_float(r.wall_time_s),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::NumericalFailure(format!("csv flush failed: {e}")))?;
    Ok(())
}

fn format_float(v: f64) -> String {
    // Shortest representation that round-trips exactly.
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:?}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("csv error: {e}"))
}

/// Read rows written by [`write_report_csv`].
pub fn read_report_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        if record.len() != 11 {
            return Err(Error::InvalidConfig(format!(
                "report row has {} fields, expected 11",
                record.len()
            )));
        }
        let field = |i: usize| record.get(i).unwrap();
        let parse_f = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("bad float `{}`: {e}", field(i))))
        };
        let parse_u = |i: usize| -> Result<usize> {
            field(i)
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("bad integer `{}`: {e}", field(i))))
        };
        rows.push(ReportRow {
            estimator: field(0).parse()?,
            k: parse_u(1)?,
            m: parse_u(2)?,
            sigma_z: parse_f(3)?,
            sigma_w: parse_f(4)?,
            trials: parse_u(5)?,
            mse_mean: parse_f(6)?,
            mse_stderr: parse_f(7)?,
            failures: parse_u(8)?,
            wall_time_s: parse_f(9)?,
            seed: field(10)
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("bad seed: {e}")))?,
        });
    }
    Ok(rows)
}

/// Piecewise-linear curve in (ln sigma_z, ln mse) space.
struct LogCurve {
    points: Vec<(f64, f64)>,
}

impl LogCurve {
    fn from_rows(rows: &[&ReportRow]) -> Result<Self> {
        let mut points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.sigma_z > 0.0 && r.sigma_z <= 0.5 && r.mse_mean > 0.0)
            .map(|r| (r.sigma_z.ln(), r.mse_mean.ln()))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|a, b| a.0 == b.0);
        if points.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "need at least 3 usable sigma_z points in (0, 0.5], got {}",
                points.len()
            )));
        }
        Ok(Self { points })
    }

    fn min_level(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    fn max_level(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest ln(sigma_z) at which the curve is at or below `level`: the
    /// jitter tolerance at that MSE level.
    fn tolerance(&self, level: f64) -> Option<f64> {
        let last = *self.points.last().unwrap();
        if last.1 <= level {
            return Some(last.0);
        }
        // Walk right-to-left for the last downward crossing of `level`.
        for seg in self.points.windows(2).rev() {
            let (x0, y0) = seg[0];
            let (x1, y1) = seg[1];
            if y0 <= level && level < y1 {
                let t = (level - y0) / (y1 - y0);
                return Some(x0 + t * (x1 - x0));
            }
        }
        None
    }
}

/// Maximum horizontal (sigma_z-axis) ratio between two log-log MSE curves at
/// equal MSE, over sigma_z <= 0.5.
pub fn improvement_factor(
    rows: &[ReportRow],
    baseline: EstimatorId,
    candidate: EstimatorId,
    m: usize,
    sigma_w: f64,
) -> Result<ImprovementResult> {
    let select = |id: EstimatorId| -> Vec<&ReportRow> {
        rows.iter()
            .filter(|r| r.estimator == id && r.m == m && r.sigma_w == sigma_w)
            .collect()
    };
    let base = LogCurve::from_rows(&select(baseline))?;
    let cand = LogCurve::from_rows(&select(candidate))?;

    let lo = base.min_level().max(cand.min_level());
    let hi = base.max_level().min(cand.max_level());
    if lo > hi {
        return Err(Error::NoComparableRange);
    }

    // The log tolerance gap is piecewise linear in the level with breakpoints
    // at the curves' vertex levels, so scanning those (plus the range ends)
    // finds the maximum.
    let mut levels: Vec<f64> = base
        .points
        .iter()
        .chain(cand.points.iter())
        .map(|p| p.1)
        .filter(|&l| l >= lo && l <= hi)
        .collect();
    levels.push(lo);
    levels.push(hi);

    let mut best: Option<(f64, f64)> = None;
    for level in levels {
        let (Some(tb), Some(tc)) = (base.tolerance(level), cand.tolerance(level)) else {
            continue;
        };
        let gap = tc - tb;
        if best.map(|(g, _)| gap > g).unwrap_or(true) {
            best = Some((gap, level));
        }
    }
    let (gap, level) = best.ok_or(Error::NoComparableRange)?;
    Ok(ImprovementResult {
        baseline,
        candidate,
        m,
        sigma_w,
        factor: gap.exp(),
        mse_level: level.exp(),
    })
}

/// Fractional power reduction `1 - 1/factor^2` implied by a jitter-tolerance
/// factor at equal accuracy.
pub fn power_savings(factor: f64) -> f64 {
    debug_assert!(factor >= 1.0);
    1.0 - 1.0 / (factor * factor)
}
