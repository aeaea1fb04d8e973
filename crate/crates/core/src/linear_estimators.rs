//! Linear baselines.
//!
//! Four closed-form estimators bracket the nonlinear algorithms:
//!
//! - [`efficient_no_jitter`]: `(H(0)^T H(0))^-1 H(0)^T y`, efficient when
//!   `z = 0`;
//! - [`linear_unbiased`]: the pseudoinverse of `E[H(z)]`, unbiased for the
//!   random-jitter model;
//! - [`blue`]: the best linear unbiased estimator, which needs the data
//!   covariance and hence a plug-in parameter value — a diagnostic oracle,
//!   not a realizable estimator;
//! - [`lls_random_jitter`] / [`lls_no_jitter`]: the minimum-MSE linear
//!   estimators under the coefficient prior, with and without the jitter
//!   moments.
//!
//! All moments of `H(z)` are one-dimensional Gauss-Hermite quadratures; the
//! whiteness of the jitter makes cross-sample expectations factor into
//! products of means.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{solve_spd, solve_spd_or_lstsq};
use crate::quadrature::QuadratureRule;
use crate::signal_model::{JitterVector, ModelConfig, ParameterVector, SampleSet, SincBasis};
use crate::signal_model::build_observation_matrix;

/// Variance of the Uniform(-1, 1) coefficient prior, the default `sigma_x^2`
/// for the LLS estimators.
pub const DEFAULT_PRIOR_VARIANCE: f64 = 1.0 / 3.0;

/// First and second moments of the random observation matrix under
/// `z_n ~ N(0, sigma_z^2)` i.i.d.
#[derive(Clone, Debug)]
pub struct MeanObservationMatrix {
    /// `E[H(z)]`, entrywise (N x K).
    pub eh: DMatrix<f64>,
    /// `E[H(z) H(z)^T]` (N x N). Off-diagonal entries are products of row
    /// means by independence of z_n and z_m; diagonal entries come from the
    /// per-row second moments.
    pub ehht: DMatrix<f64>,
    /// `E[H(z)^T H(z)]` (K x K).
    pub ehth: DMatrix<f64>,
    /// Per-row second moments `E[h_n h_n^T]` (K x K each), retained for the
    /// BLUE data covariance.
    pub row_second_moments: Vec<DMatrix<f64>>,
}

/// Quadrature moments of `H(z)` for the given config.
pub fn mean_observation_matrices(
    config: &ModelConfig,
    rule: &QuadratureRule,
) -> MeanObservationMatrix {
    let (n, k) = (config.n(), config.k);
    let basis = SincBasis::new(k);

    // sigma_z = 0 degenerates to a single point mass at z = 0.
    let points: Vec<(f64, f64)> = if config.sigma_z == 0.0 {
        vec![(0.0, 1.0)]
    } else {
        rule.iter()
            .map(|(node, w)| (config.sigma_z * node, w))
            .collect()
    };

    let mut eh = DMatrix::zeros(n, k);
    let mut row_second_moments = Vec::with_capacity(n);
    let mut row = DVector::zeros(k);
    for i in 0..n {
        let mut mean_row = DVector::zeros(k);
        let mut second = DMatrix::zeros(k, k);
        for &(z, w) in &points {
            basis.fill_row(config.tau(i) + z, row.as_mut_slice());
            mean_row.axpy(w, &row, 1.0);
            second.ger(w, &row, &row, 1.0);
        }
        eh.row_mut(i).copy_from(&mean_row.transpose());
        row_second_moments.push(second);
    }

    let mut ehht = &eh * eh.transpose();
    for i in 0..n {
        ehht[(i, i)] = row_second_moments[i].trace();
    }
    let mut ehth = DMatrix::zeros(k, k);
    for s in &row_second_moments {
        ehth += s;
    }

    MeanObservationMatrix {
        eh,
        ehht,
        ehth,
        row_second_moments,
    }
}

fn h_zero(config: &ModelConfig) -> DMatrix<f64> {
    let z = JitterVector(DVector::zeros(config.n()));
    build_observation_matrix(&z, config).expect("zero jitter has matching length").0
}

/// `(H(0)^T H(0))^-1 H(0)^T y`, the efficient estimator of the no-jitter
/// model (`H(0)^T H(0) = M I` for the periodic-sinc basis).
pub fn efficient_no_jitter(s: &SampleSet) -> Result<ParameterVector> {
    s.validate()?;
    let h0 = h_zero(&s.config);
    let gram = h0.transpose() * &h0;
    let rhs = h0.transpose() * &s.y;
    solve_spd(gram, &rhs)
        .map(ParameterVector)
        .ok_or_else(|| Error::NumericalFailure("H(0) is rank deficient".into()))
}

/// Pseudoinverse-of-mean estimator `E[H]^+ y`; unbiased whenever `E[H]` has
/// full column rank.
pub fn linear_unbiased(s: &SampleSet, means: &MeanObservationMatrix) -> Result<ParameterVector> {
    s.validate()?;
    let gram = means.eh.transpose() * &means.eh;
    let rhs = means.eh.transpose() * &s.y;
    solve_spd(gram, &rhs).map(ParameterVector).ok_or_else(|| {
        Error::NumericalFailure(
            "E[H] is rank deficient; sigma_z too large for this configuration".into(),
        )
    })
}

/// Covariance of the data at a plug-in parameter value:
/// `E[H x x^T H^T] - E[H] x x^T E[H]^T + sigma_w^2 I`.
///
/// Under independent per-sample jitter the off-diagonal terms cancel exactly,
/// so the matrix is diagonal (but not scalar).
pub fn data_covariance(
    x_plug: &ParameterVector,
    means: &MeanObservationMatrix,
    config: &ModelConfig,
) -> DMatrix<f64> {
    let n = config.n();
    let ex = &means.eh * &x_plug.0;
    let mut lambda = DMatrix::zeros(n, n);
    for i in 0..n {
        let second = (&means.row_second_moments[i] * &x_plug.0).dot(&x_plug.0);
        lambda[(i, i)] = second - ex[i] * ex[i] + config.sigma_w * config.sigma_w;
    }
    lambda
}

/// Best linear unbiased estimator for the random-matrix observation model.
///
/// The data covariance depends on the true parameters, so this takes a
/// plug-in value and serves as a diagnostic oracle only.
pub fn blue(
    s: &SampleSet,
    x_plug: &ParameterVector,
    means: &MeanObservationMatrix,
) -> Result<ParameterVector> {
    s.validate()?;
    let lambda = data_covariance(x_plug, means, &s.config);
    let n = s.config.n();
    // Diagonal covariance: whiten rows directly.
    let mut weighted = means.eh.clone();
    let mut wy = s.y.clone();
    for i in 0..n {
        let v = lambda[(i, i)];
        if !(v > 0.0) {
            return Err(Error::NumericalFailure(format!(
                "data covariance not positive definite at index {i} (value {v}); \
                 increase the quadrature order"
            )));
        }
        let inv = 1.0 / v;
        weighted.row_mut(i).scale_mut(inv);
        wy[i] *= inv;
    }
    let gram = means.eh.transpose() * &weighted;
    let rhs = means.eh.transpose() * &wy;
    solve_spd(gram, &rhs)
        .map(ParameterVector)
        .ok_or_else(|| Error::NumericalFailure("BLUE normal equations are singular".into()))
}

/// Linear least squares under the coefficient prior with the jitter moments:
/// `E[H]^T (E[H H^T] + (sigma_w^2/sigma_x^2) I)^-1 y`.
pub fn lls_random_jitter(
    s: &SampleSet,
    means: &MeanObservationMatrix,
    sigma_x2: f64,
) -> Result<ParameterVector> {
    s.validate()?;
    check_prior_variance(sigma_x2)?;
    let n = s.config.n();
    let ridge = s.config.sigma_w * s.config.sigma_w / sigma_x2;
    let mut a = means.ehht.clone();
    for i in 0..n {
        a[(i, i)] += ridge;
    }
    let (solved, _) = solve_spd_or_lstsq(a, &s.y);
    Ok(ParameterVector(means.eh.transpose() * solved))
}

/// The no-jitter linear least squares baseline:
/// `H(0)^T (H(0) H(0)^T + (sigma_w^2/sigma_x^2) I)^-1 y`.
///
/// Its error covariance at `sigma_z = 0` is
/// `sigma_w^2 / (M + sigma_w^2/sigma_x^2) I`.
pub fn lls_no_jitter(s: &SampleSet, sigma_x2: f64) -> Result<ParameterVector> {
    s.validate()?;
    check_prior_variance(sigma_x2)?;
    let h0 = h_zero(&s.config);
    let n = s.config.n();
    let ridge = s.config.sigma_w * s.config.sigma_w / sigma_x2;
    let mut a = &h0 * h0.transpose();
    for i in 0..n {
        a[(i, i)] += ridge;
    }
    let (solved, _) = solve_spd_or_lstsq(a, &s.y);
    Ok(ParameterVector(h0.transpose() * solved))
}

fn check_prior_variance(sigma_x2: f64) -> Result<()> {
    if sigma_x2 > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "prior variance must be positive, got {sigma_x2}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_hermite_rule;
    use crate::signal_model::{draw_prior_parameters, generate_samples, psinc};
    use approx::assert_abs_diff_eq;

    fn rule20() -> QuadratureRule {
        gauss_hermite_rule(20).unwrap()
    }

    #[test]
    fn zero_jitter_moments_degenerate_to_h_zero() {
        let config = ModelConfig::new(3, 2, 0.0, 0.05).unwrap();
        let means = mean_observation_matrices(&config, &rule20());
        let h0 = h_zero(&config);
        assert!((&means.eh - &h0).amax() < 1e-12);
        assert!((&means.ehht - &h0 * h0.transpose()).amax() < 1e-9);
        assert!((&means.ehth - h0.transpose() * &h0).amax() < 1e-9);
    }

    #[test]
    fn mean_matrix_entry_matches_dense_integration() {
        // E[psinc_2(z)] for z ~ N(0, 0.25^2) against a trapezoid oracle.
        let config = ModelConfig::new(2, 2, 0.25, 0.0).unwrap();
        let means = mean_observation_matrices(&config, &rule20());
        let (lo, hi) = (-6.0 * config.sigma_z, 6.0 * config.sigma_z);
        let steps = 100_000;
        let h = (hi - lo) / steps as f64;
        let density = |z: f64| {
            (-0.5 * (z / config.sigma_z).powi(2)).exp()
                / (config.sigma_z * (2.0 * std::f64::consts::PI).sqrt())
        };
        let mut acc = 0.0;
        for i in 0..=steps {
            let z = lo + h * i as f64;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            acc += w * psinc(z, 2) * density(z);
        }
        acc *= h;
        assert_abs_diff_eq!(means.eh[(0, 0)], acc, epsilon = 1e-8);
    }

    #[test]
    fn second_moment_diagonal_dominates_squared_mean() {
        let config = ModelConfig::new(4, 2, 0.3, 0.0).unwrap();
        let means = mean_observation_matrices(&config, &rule20());
        let outer = &means.eh * means.eh.transpose();
        for i in 0..config.n() {
            assert!(means.ehht[(i, i)] >= outer[(i, i)] - 1e-12);
        }
    }

    #[test]
    fn efficient_estimator_recovers_noiseless_data() {
        let config = ModelConfig::new(2, 2, 0.0, 0.0).unwrap();
        let mut x = ParameterVector(DVector::zeros(2));
        x.0[0] = 1.0;
        let s = generate_samples(&x, &config, 3);
        let est = efficient_no_jitter(&s).unwrap();
        assert!((&est.0 - &x.0).amax() < 1e-12);

        let config = ModelConfig::new(5, 3, 0.0, 0.0).unwrap();
        let x = draw_prior_parameters(5, 17);
        let s = generate_samples(&x, &config, 17);
        let est = efficient_no_jitter(&s).unwrap();
        assert!((&est.0 - &x.0).amax() < 1e-12);
    }

    #[test]
    fn pseudoinverse_times_mean_is_identity() {
        let config = ModelConfig::new(10, 16, 0.5, 0.05).unwrap();
        let means = mean_observation_matrices(&config, &rule20());
        // A from the defining normal equations: A E[H] = (G^-1 E[H]^T) E[H].
        let gram = means.eh.transpose() * &means.eh;
        let chol = nalgebra::Cholesky::new(gram.clone()).unwrap();
        let product = chol.solve(&gram);
        let eye = DMatrix::<f64>::identity(10, 10);
        assert!((product - eye).amax() < 1e-9);
    }

    #[test]
    fn estimators_collapse_at_zero_jitter() {
        // At sigma_z = 0, each estimator reduces to its no-jitter closed form
        // on identical data.
        let config = ModelConfig::new(4, 4, 0.0, 0.1).unwrap();
        let x = draw_prior_parameters(4, 9);
        let s = generate_samples(&x, &config, 9);
        let means = mean_observation_matrices(&config, &rule20());

        let eff = efficient_no_jitter(&s).unwrap();
        let lu = linear_unbiased(&s, &means).unwrap();
        assert!((&eff.0 - &lu.0).amax() < 1e-10);

        let lls_rj = lls_random_jitter(&s, &means, DEFAULT_PRIOR_VARIANCE).unwrap();
        let lls_nj = lls_no_jitter(&s, DEFAULT_PRIOR_VARIANCE).unwrap();
        assert!((&lls_rj.0 - &lls_nj.0).amax() < 1e-10);

        let b = blue(&s, &x, &means).unwrap();
        assert!((&b.0 - &eff.0).amax() < 1e-10);
    }

    #[test]
    fn blue_with_zero_plug_in_equals_linear_unbiased() {
        let config = ModelConfig::new(4, 4, 0.3, 0.1).unwrap();
        let x = draw_prior_parameters(4, 5);
        let s = generate_samples(&x, &config, 5);
        let means = mean_observation_matrices(&config, &rule20());
        let zero = ParameterVector(DVector::zeros(4));
        let b = blue(&s, &zero, &means).unwrap();
        let lu = linear_unbiased(&s, &means).unwrap();
        assert!((&b.0 - &lu.0).amax() < 1e-10);
    }

    #[test]
    fn data_covariance_is_diagonal_psd() {
        let config = ModelConfig::new(5, 3, 0.4, 0.05).unwrap();
        let means = mean_observation_matrices(&config, &rule20());
        for seed in 0..5 {
            let x = draw_prior_parameters(5, seed);
            let lambda = data_covariance(&x, &means, &config);
            assert_eq!(lambda, lambda.transpose());
            for i in 0..config.n() {
                assert!(lambda[(i, i)] >= -1e-9, "diag {i} = {}", lambda[(i, i)]);
            }
        }
    }

    #[test]
    fn lls_no_jitter_shrinks_by_the_closed_form_factor() {
        // Noiseless y run through the sigma_w = 0.05 formula shrinks toward 0
        // by M / (M + sigma_w^2/sigma_x^2).
        let config = ModelConfig::new(10, 16, 0.0, 0.0).unwrap();
        let x = draw_prior_parameters(10, 23);
        let s = generate_samples(&x, &config, 23);
        let mut biased = s.clone();
        biased.config.sigma_w = 0.05;
        let est = lls_no_jitter(&biased, DEFAULT_PRIOR_VARIANCE).unwrap();
        let factor = 16.0 / (16.0 + 0.05 * 0.05 / DEFAULT_PRIOR_VARIANCE);
        assert!((&est.0 - &x.0 * factor).amax() < 1e-10);
    }

    #[test]
    fn lls_no_jitter_ridge_vanishes_with_noise() {
        let config = ModelConfig::new(4, 4, 0.0, 1e-6).unwrap();
        let x = draw_prior_parameters(4, 31);
        let s = generate_samples(&x, &config, 31);
        let est = lls_no_jitter(&s, DEFAULT_PRIOR_VARIANCE).unwrap();
        let h0 = h_zero(&config);
        let plain = (h0.transpose() * &s.y) / config.m as f64;
        assert!((&est.0 - plain).amax() < 1e-10);
    }

    #[test]
    fn lls_estimators_are_linear_in_y() {
        let config = ModelConfig::new(3, 4, 0.2, 0.1).unwrap();
        let means = mean_observation_matrices(&config, &rule20());
        let s = SampleSet {
            config,
            seed: 0,
            y: DVector::zeros(config.n()),
            z_true: None,
        };
        assert_eq!(lls_random_jitter(&s, &means, 1.0 / 3.0).unwrap().0.amax(), 0.0);
        assert_eq!(lls_no_jitter(&s, 1.0 / 3.0).unwrap().0.amax(), 0.0);
    }

    #[test]
    fn invalid_prior_variance_rejected() {
        let config = ModelConfig::new(2, 2, 0.0, 0.1).unwrap();
        let s = generate_samples(&draw_prior_parameters(2, 1), &config, 1);
        assert!(lls_no_jitter(&s, 0.0).is_err());
        assert!(lls_no_jitter(&s, -1.0).is_err());
    }
}
