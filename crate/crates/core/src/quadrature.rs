//! Gauss-Hermite quadrature for expectations under a normal distribution.
//!
//! Rules are the probabilists' variant: nodes are roots of the probabilists'
//! Hermite polynomial and weights sum to one, so `E[f(X)]` for
//! `X ~ N(mu, sigma^2)` is approximated by `sum_i w_i f(sigma x_i + mu)`.
//! Nodes and weights come from the Golub-Welsch eigendecomposition of the
//! Jacobi matrix, whose off-diagonal recurrence coefficients are `sqrt(k)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default rule order for likelihood and E-step quadratures.
pub const DEFAULT_QUAD_ORDER: usize = 20;

/// Largest supported rule order.
pub const MAX_QUAD_ORDER: usize = 100;

/// Abscissas and weights for standard-normal expectations.
///
/// Invariants: weights are positive and sum to one, nodes are sorted
/// ascending and symmetric about zero.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Probabilists' Gauss-Hermite rule of the given order.
pub fn gauss_hermite_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_QUAD_ORDER {
        return Err(Error::InvalidConfig(format!(
            "quadrature order {order} outside supported range 1..={MAX_QUAD_ORDER}"
        )));
    }
    if order == 1 {
        return Ok(QuadratureRule {
            nodes: vec![0.0],
            weights: vec![1.0],
        });
    }

    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for i in 1..order {
        let b = (i as f64).sqrt();
        jacobi[(i - 1, i)] = b;
        jacobi[(i, i - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);

    // Weight of node i is the squared first component of its unit eigenvector
    // (the zeroth moment of the standard-normal weight function is 1).
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();

    // The exact rule is symmetric; enforce it so that odd moments cancel.
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let node = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -node;
        nodes[j] = node;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }

    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    Ok(QuadratureRule { nodes, weights })
}

/// `E[f(X)]` for `X ~ N(mu, sigma^2)` via the rule; `sigma = 0` collapses to
/// an exact point evaluation `f(mu)`.
pub fn expect_gaussian<F: Fn(f64) -> f64>(f: F, mu: f64, sigma: f64, rule: &QuadratureRule) -> f64 {
    if sigma == 0.0 {
        return f(mu);
    }
    rule.iter().map(|(x, w)| w * f(mu + sigma * x)).sum()
}
