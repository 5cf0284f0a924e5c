//! Gauss-Hermite quadrature.
//!
//! Nodes and weights are computed once per order in `f64` with the
//! Golub-Welsch method: the nodes are the eigenvalues of the symmetric
//! tridiagonal Jacobi matrix of the Hermite recurrence and each weight is the
//! squared first component of the matching unit eigenvector. Weights are
//! stored normalised by `1/sqrt(pi)`, so [`GaussHermite::integrate`] returns
//! `(1/sqrt(pi)) * int e^{-z^2} f(z) dz` and [`GaussHermite::expect_normal`]
//! returns `E[f(X)]` for `X ~ N(mean, std^2)` directly.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::Real;

/// A Gauss-Hermite rule with weights summing to one.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Hermite order must be positive");
        let n = order;
        let mut diag = vec![0.0; n];
        // sub[i] couples rows i and i+1
        let mut sub: Vec<f64> = (1..=n)
            .map(|k| if k < n { (k as f64 / 2.0).sqrt() } else { 0.0 })
            .collect();
        let mut first = vec![0.0; n];
        first[0] = 1.0;
        tridiagonal_ql(&mut diag, &mut sub, &mut first);
        let mut pairs: Vec<(f64, f64)> = diag
            .into_iter()
            .zip(first.into_iter().map(|v| v * v))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        // enforce exact symmetry of the rule
        for i in 0..n / 2 {
            let (x, w) = (
                0.5 * (pairs[i].0 - pairs[n - 1 - i].0),
                0.5 * (pairs[i].1 + pairs[n - 1 - i].1),
            );
            pairs[i] = (x, w);
            pairs[n - 1 - i] = (-x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let (nodes, weights) = pairs.into_iter().map(|(x, w)| (x, w / total)).unzip();
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(1/sqrt(pi)) * int e^{-z^2} f(z) dz`.
    pub fn integrate<T: Real, F: Fn(T) -> T>(&self, f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| T::lit(w) * f(T::lit(z)))
            .sum()
    }

    /// `E[f(X)]` for `X ~ N(mean, std^2)`.
    pub fn expect_normal<T: Real, F: Fn(T) -> T>(&self, mean: T, std: T, f: F) -> T {
        let scale = std * T::lit(std::f64::consts::SQRT_2);
        self.integrate(|z: T| f(mean + scale * z))
    }
}

/// Implicit QL on a symmetric tridiagonal matrix. On return `diag` holds
/// the eigenvalues and `first` the first row of the eigenvector matrix
/// (which starts as the first row of the identity).
fn tridiagonal_ql(diag: &mut [f64], sub: &mut [f64], first: &mut [f64]) {
    let n = diag.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if sub[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations <= 100, "tridiagonal QL did not converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * sub[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + sub[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * sub[i];
                let b = c * sub[i];
                r = f.hypot(g);
                sub[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    sub[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            sub[l] = g;
            sub[m] = 0.0;
        }
    }
}

/// Shared rule of the given order, built once per order and kept for the
/// life of the process.
pub fn gauss_hermite(order: usize) -> &'static GaussHermite {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussHermite>>> = OnceLock::new();
    let mut cache = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    cache
        .entry(order)
        .or_insert_with(|| Box::leak(Box::new(GaussHermite::new(order))))
}
