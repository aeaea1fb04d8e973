//! Shared oracle machinery for the integration suites: dense-grid
//! integration, grid CDFs, and the Kolmogorov-Smirnov statistic. Everything
//! here is independent of the library's quadrature and sampling paths.

#![allow(dead_code)]

pub mod suites;

/// Composite Simpson integration of `f` over `[a, b]` with `n` intervals
/// (`n` is rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Trapezoid integration of `f` over `[a, b]` with `n` intervals.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for i in 1..n {
        acc += f(a + h * i as f64);
    }
    acc * h
}

/// Normalized cumulative distribution tabulated on a dense grid from an
/// unnormalized log density. Evaluation interpolates linearly.
pub struct GridCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridCdf {
    pub fn from_log_density<F: Fn(f64) -> f64>(log_f: F, lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2);
        let h = (hi - lo) / (n - 1) as f64;
        let logs: Vec<f64> = (0..n).map(|i| log_f(lo + h * i as f64)).collect();
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(shift.is_finite(), "log density is -inf everywhere on the grid");
        let dens: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i - 1] + dens[i]) * h;
        }
        let total = cdf[n - 1];
        assert!(total > 0.0);
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Self {
            xs: (0..n).map(|i| lo + h * i as f64).collect(),
            cdf,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return 1.0;
        }
        let idx = self.xs.partition_point(|&v| v < x);
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        c0 + (c1 - c0) * (x - x0) / (x1 - x0)
    }

    /// Mean of the tabulated density.
    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.xs.len() {
            let mid = 0.5 * (self.xs[i - 1] + self.xs[i]);
            acc += mid * (self.cdf[i] - self.cdf[i - 1]);
        }
        acc
    }
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Asymptotic KS critical value at significance `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error of paired differences `a[i] - b[i]`.
pub fn paired_diff_stderr(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_stderr(&diffs)
}
