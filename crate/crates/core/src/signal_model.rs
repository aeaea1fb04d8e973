//! Observation model: periodic-sinc basis, observation matrices and
//! synthetic jittered, noisy samples.
//!
//! The signal is `x(t) = sum_k x_k psinc_K(t - k)` with
//! `psinc_K(t) = sin(pi t) / (K sin(pi t / K))`, sampled at instants
//! `t_n = n/M + z_n` (critical sampling period normalized to 1). Sample `n`
//! observes `y_n = h_n(z_n)^T x + w_n` where
//! `[h_n(z)]_k = psinc_K(n/M + z - k)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, STREAM_JITTER, STREAM_NOISE, STREAM_PRIOR};

/// Threshold on |sin(pi t / K)| below which the removable singularity branch
/// of [`psinc`] returns the analytic limit.
pub(crate) const PSINC_SINGULARITY_EPS: f64 = 1e-9;

/// Problem dimensions and noise scales, the shared context of every
/// estimator. `N = M * K` is derived, never stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of signal coefficients; also the signal period in units of the
    /// critical sampling period.
    pub k: usize,
    /// Oversampling factor.
    pub m: usize,
    /// Jitter standard deviation, in units of the critical sampling period.
    pub sigma_z: f64,
    /// Additive-noise standard deviation, in units of the coefficient scale.
    pub sigma_w: f64,
}

impl ModelConfig {
    pub fn new(k: usize, m: usize, sigma_z: f64, sigma_w: f64) -> Result<Self> {
        let config = Self { k, m, sigma_z, sigma_w };
        config.validate()?;
        Ok(config)
    }

    /// Validate invariants; needed after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::InvalidConfig(format!(
                "K and M must be positive (got K={}, M={})",
                self.k, self.m
            )));
        }
        if !(self.sigma_z >= 0.0) || !(self.sigma_w >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise scales must be nonnegative (got sigma_z={}, sigma_w={})",
                self.sigma_z, self.sigma_w
            )));
        }
        Ok(())
    }

    /// Total sample count `N = M * K`.
    pub fn n(&self) -> usize {
        self.k * self.m
    }

    /// Nominal sample instant `t_n = n / M`.
    pub fn tau(&self, n: usize) -> f64 {
        n as f64 / self.m as f64
    }
}

/// The `K` signal coefficients (ground truth or estimate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", from = "Vec<f64>")]
pub struct ParameterVector(pub DVector<f64>);

/// One jitter realization of length `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", from = "Vec<f64>")]
pub struct JitterVector(pub DVector<f64>);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(DVector::from_vec(v))
            }
        }
        impl From<$name> for Vec<f64> {
            fn from(v: $name) -> Self {
                v.0.as_slice().to_vec()
            }
        }
        impl std::ops::Deref for $name {
            type Target = DVector<f64>;
            fn deref(&self) -> &Self::Target {
                &self.0
            }
        }
    };
}
vector_newtype!(ParameterVector);
vector_newtype!(JitterVector);

/// Observed samples plus, for synthetic data, the hidden jitter realization
/// (kept so Gibbs `z` estimates can be checked against truth).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub config: ModelConfig,
    /// Generation seed; the prior draw, jitter and noise streams all derive
    /// from it.
    pub seed: u64,
    #[serde(with = "serde_dvector")]
    pub y: DVector<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_true: Option<JitterVector>,
}

impl SampleSet {
    /// Check config invariants and the y/config length agreement; needed
    /// after deserializing.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.y.len() != self.config.n() {
            return Err(Error::DimensionMismatch {
                what: "sample vector",
                expected: self.config.n(),
                actual: self.y.len(),
            });
        }
        if let Some(z) = &self.z_true {
            if z.len() != self.config.n() {
                return Err(Error::DimensionMismatch {
                    what: "jitter vector",
                    expected: self.config.n(),
                    actual: z.len(),
                });
            }
        }
        Ok(())
    }
}

pub(crate) mod serde_dvector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DVector<f64>, D::Error> {
        Vec::<f64>::deserialize(d).map(DVector::from_vec)
    }
}

/// Dense `N x K` observation matrix `H(z)`; row `n` is `h_n(z_n)^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationMatrix(pub DMatrix<f64>);

/// Periodic sinc kernel `sin(pi t) / (K sin(pi t / K))`.
///
/// Removable singularities at `t = j K` evaluate to the analytic two-sided
/// limit `(-1)^(j (K-1))`. For odd `K` the kernel is `K`-periodic; for even
/// `K` it is `K`-antiperiodic (period `2K`), so the limit at `t = K` is `-1`.
pub fn psinc(t: f64, k: usize) -> f64 {
    debug_assert!(k >= 1);
    let kf = k as f64;
    let den = (PI * t / kf).sin();
    if den.abs() < PSINC_SINGULARITY_EPS {
        return psinc_limit((t / kf).round() as i64, k);
    }
    (PI * t).sin() / (kf * den)
}

#[inline]
fn psinc_limit(j: i64, k: usize) -> f64 {
    if (j * (k as i64 - 1)).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Precomputed shift tables for evaluating whole basis rows.
///
/// Row entries share the numerator `sin(pi tau)` up to sign, and the
/// denominators follow from the angle-difference identity, so one row costs
/// two trig calls plus O(K) arithmetic instead of 2K trig calls.
#[derive(Clone, Debug)]
pub struct SincBasis {
    k: usize,
    cos_shift: Vec<f64>,
    sin_shift: Vec<f64>,
}

impl SincBasis {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1);
        let kf = k as f64;
        Self {
            k,
            cos_shift: (0..k).map(|i| (PI * i as f64 / kf).cos()).collect(),
            sin_shift: (0..k).map(|i| (PI * i as f64 / kf).sin()).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Write `h(tau)` (entries `psinc_K(tau - k)`) into `out`.
    pub fn fill_row(&self, tau: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.k);
        let kf = self.k as f64;
        let sin_pit = (PI * tau).sin();
        let (sin_ptk, cos_ptk) = (PI * tau / kf).sin_cos();
        let mut sign = 1.0;
        for i in 0..self.k {
            // sin(pi (tau - i) / K) by the angle-difference identity.
            let den = sin_ptk * self.cos_shift[i] - cos_ptk * self.sin_shift[i];
            out[i] = if den.abs() < PSINC_SINGULARITY_EPS {
                psinc(tau - i as f64, self.k)
            } else {
                sign * sin_pit / (kf * den)
            };
            sign = -sign;
        }
    }

    /// `h(tau)` as a fresh vector.
    pub fn row(&self, tau: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.k);
        self.fill_row(tau, out.as_mut_slice());
        out
    }

    /// `h(tau)^T x` without allocating.
    pub fn row_dot(&self, tau: f64, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.k);
        let kf = self.k as f64;
        let sin_pit = (PI * tau).sin();
        let (sin_ptk, cos_ptk) = (PI * tau / kf).sin_cos();
        let xs = x.as_slice();
        let mut acc = 0.0;
        let mut sign = 1.0;
        for i in 0..self.k {
            let den = sin_ptk * self.cos_shift[i] - cos_ptk * self.sin_shift[i];
            let v = if den.abs() < PSINC_SINGULARITY_EPS {
                psinc(tau - i as f64, self.k)
            } else {
                sign * sin_pit / (kf * den)
            };
            acc += v * xs[i];
            sign = -sign;
        }
        acc
    }
}

/// Build `H(z)` for the periodic-sinc basis.
pub fn build_observation_matrix(z: &JitterVector, config: &ModelConfig) -> Result<ObservationMatrix> {
    let n = config.n();
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            what: "jitter vector",
            expected: n,
            actual: z.len(),
        });
    }
    let basis = SincBasis::new(config.k);
    let mut h = DMatrix::zeros(n, config.k);
    let mut row = vec![0.0; config.k];
    for i in 0..n {
        basis.fill_row(config.tau(i) + z[i], &mut row);
        for (j, &v) in row.iter().enumerate() {
            h[(i, j)] = v;
        }
    }
    Ok(ObservationMatrix(h))
}

/// Build an observation matrix for an arbitrary scalar kernel; entry `(n, k)`
/// is `kernel(n/M + z_n - k)`. This is the hook for spline or windowed bases.
pub fn build_observation_matrix_with<F>(
    z: &JitterVector,
    config: &ModelConfig,
    kernel: F,
) -> Result<ObservationMatrix>
where
    F: Fn(f64) -> f64,
{
    let n = config.n();
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            what: "jitter vector",
            expected: n,
            actual: z.len(),
        });
    }
    Ok(ObservationMatrix(DMatrix::from_fn(n, config.k, |i, j| {
        kernel(config.tau(i) + z[i] - j as f64)
    })))
}

/// Draw `z ~ N(0, sigma_z^2 I)`, `w ~ N(0, sigma_w^2 I)` from streams derived
/// from `seed` and return `y = H(z) x + w` with the jitter retained.
pub fn generate_samples(x: &ParameterVector, config: &ModelConfig, seed: u64) -> SampleSet {
    assert_eq!(x.len(), config.k, "parameter vector length must equal K");
    let n = config.n();

    let z = if config.sigma_z > 0.0 {
        let mut r = rng::substream(seed, STREAM_JITTER);
        DVector::from_fn(n, |_, _| config.sigma_z * r.sample::<f64, _>(StandardNormal))
    } else {
        DVector::zeros(n)
    };

    let basis = SincBasis::new(config.k);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        y[i] = basis.row_dot(config.tau(i) + z[i], &x.0);
    }
    if config.sigma_w > 0.0 {
        let mut r = rng::substream(seed, STREAM_NOISE);
        for i in 0..n {
            y[i] += config.sigma_w * r.sample::<f64, _>(StandardNormal);
        }
    }

    SampleSet {
        config: *config,
        seed,
        y,
        z_true: Some(JitterVector(z)),
    }
}

/// i.i.d. Uniform(-1, 1) coefficients from a seeded stream (the maximum
/// entropy prior over the coefficient interval).
pub fn draw_prior_parameters(k: usize, seed: u64) -> ParameterVector {
    assert!(k >= 1);
    let mut r = rng::substream(seed, STREAM_PRIOR);
    ParameterVector(DVector::from_fn(k, |_, _| r.random_range(-1.0..1.0)))
}
