//! Degree distributions of LDPC ensembles.
//!
//! A distribution is stored sparsely as `degree -> weight`. Edge-perspective
//! weights `lambda_i` are the fraction of edges attached to degree-`i` nodes
//! (polynomial `sum lambda_i x^{i-1}`); node-perspective weights `L_i` are the
//! fraction of nodes of degree `i`.

use std::collections::BTreeMap;

use crate::{Error, Real, Result};

pub const DEFAULT_MAX_DEGREE: u32 = 100;
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Perspective {
    Edge,
    Node,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Variable,
    Check,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegreeDistribution<T> {
    coeffs: BTreeMap<u32, T>,
    perspective: Perspective,
    side: Side,
}

fn sum_tolerance<T: Real>() -> T {
    T::lit(SUM_TOLERANCE).max(T::epsilon() * T::lit(64.0))
}

impl<T: Real> DegreeDistribution<T> {
    /// Validated constructor with the default maximum degree. Zero weights are
    /// dropped.
    pub fn new<I>(coeffs: I, perspective: Perspective, side: Side) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, T)>,
    {
        Self::with_max_degree(coeffs, perspective, side, DEFAULT_MAX_DEGREE)
    }

    pub fn with_max_degree<I>(
        coeffs: I,
        perspective: Perspective,
        side: Side,
        max_degree: u32,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, T)>,
    {
        let mut map = BTreeMap::new();
        for (deg, w) in coeffs {
            if deg < 2 {
                return Err(Error::InvalidDistribution(format!(
                    "degree {deg} is below 2"
                )));
            }
            if deg > max_degree {
                return Err(Error::InvalidDistribution(format!(
                    "degree {deg} exceeds the maximum {max_degree}"
                )));
            }
            if !w.is_finite() || w < T::zero() {
                return Err(Error::InvalidDistribution(format!(
                    "weight {w} of degree {deg}"
                )));
            }
            if w > T::zero() {
                *map.entry(deg).or_insert(T::zero()) += w;
            }
        }
        let total: T = map.values().copied().sum();
        if (total - T::one()).abs() > sum_tolerance::<T>() {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            coeffs: map,
            perspective,
            side,
        })
    }

    /// Drops weights below `prune` and rescales the rest to sum to one. Used
    /// once on raw LP output.
    pub fn renormalized<I>(
        coeffs: I,
        prune: T,
        perspective: Perspective,
        side: Side,
        max_degree: u32,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, T)>,
    {
        let kept: Vec<(u32, T)> = coeffs
            .into_iter()
            .filter(|&(_, w)| w >= prune && w > T::zero())
            .collect();
        let total: T = kept.iter().map(|&(_, w)| w).sum();
        if total <= T::zero() {
            return Err(Error::InvalidDistribution(
                "no weight left after pruning".into(),
            ));
        }
        Self::with_max_degree(
            kept.into_iter().map(|(d, w)| (d, w / total)),
            perspective,
            side,
            max_degree,
        )
    }

    /// Edge-perspective check distribution `rho(x) = x^{dc-1}`.
    pub fn check_monomial(dc: u32) -> Result<Self> {
        Self::with_max_degree(
            [(dc, T::one())],
            Perspective::Edge,
            Side::Check,
            dc.max(DEFAULT_MAX_DEGREE),
        )
    }

    /// Edge-perspective regular variable distribution `lambda(x) = x^{dv-1}`.
    pub fn variable_regular(dv: u32) -> Result<Self> {
        Self::new([(dv, T::one())], Perspective::Edge, Side::Variable)
    }

    pub fn perspective(&self) -> Perspective {
        self.perspective
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn coeffs(&self) -> &BTreeMap<u32, T> {
        &self.coeffs
    }

    pub fn weight(&self, degree: u32) -> T {
        self.coeffs.get(&degree).copied().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, T)> + '_ {
        self.coeffs.iter().map(|(&d, &w)| (d, w))
    }

    pub fn min_degree(&self) -> u32 {
        *self
            .coeffs
            .keys()
            .next()
            .expect("validated distribution is non-empty")
    }

    pub fn max_degree(&self) -> u32 {
        *self
            .coeffs
            .keys()
            .next_back()
            .expect("validated distribution is non-empty")
    }

    /// `sum_i w_i / i`; for an edge-perspective distribution this is
    /// `int_0^1 lambda(x) dx`, the number of nodes per edge.
    pub fn integral(&self) -> T {
        self.iter().map(|(d, w)| w / T::lit(d as f64)).sum()
    }

    /// Average node degree (edges per node) of an edge-perspective
    /// distribution.
    pub fn mean_node_degree(&self) -> T {
        T::one() / self.integral()
    }

    /// `L_i = (lambda_i / i) / sum_j (lambda_j / j)`.
    pub fn edge_to_node(&self) -> Result<Self> {
        if self.perspective != Perspective::Edge {
            return Err(Error::InvalidDistribution(
                "expected an edge-perspective distribution".into(),
            ));
        }
        let norm = self.integral();
        let coeffs = self
            .iter()
            .map(|(d, w)| (d, w / T::lit(d as f64) / norm))
            .collect();
        Ok(Self {
            coeffs,
            perspective: Perspective::Node,
            side: self.side,
        })
    }

    /// `lambda_i = i L_i / sum_j j L_j`.
    pub fn node_to_edge(&self) -> Result<Self> {
        if self.perspective != Perspective::Node {
            return Err(Error::InvalidDistribution(
                "expected a node-perspective distribution".into(),
            ));
        }
        let norm: T = self.iter().map(|(d, w)| w * T::lit(d as f64)).sum();
        let coeffs = self
            .iter()
            .map(|(d, w)| (d, w * T::lit(d as f64) / norm))
            .collect();
        Ok(Self {
            coeffs,
            perspective: Perspective::Edge,
            side: self.side,
        })
    }
}

/// `R = 1 - (sum rho_i / i) / (sum lambda_i / i)`. May be non-positive for
/// degenerate pairs; callers decide what to do with that.
pub fn design_rate<T: Real>(
    lambda: &DegreeDistribution<T>,
    rho: &DegreeDistribution<T>,
) -> Result<T> {
    if lambda.perspective() != Perspective::Edge || rho.perspective() != Perspective::Edge {
        return Err(Error::InvalidDistribution(
            "design rate needs edge-perspective inputs".into(),
        ));
    }
    Ok(T::one() - rho.integral() / lambda.integral())
}

/// Rate of `lambda` paired with the monomial check side `x^{dc-1}`.
pub fn monomial_rate<T: Real>(lambda: &DegreeDistribution<T>, dc: u32) -> T {
    T::one() - T::one() / (T::lit(dc as f64) * lambda.integral())
}

/// Strict upper bound on `lambda_2` for the monomial check side at power `p`:
/// `exp(p/2) / (dc - 1)`.
pub fn stability_bound<T: Real>(power: T, dc: u32) -> Result<T> {
    if !(power > T::zero()) || !power.is_finite() {
        return Err(Error::Domain(format!(
            "stability bound needs a positive power, got {power}"
        )));
    }
    if dc < 3 {
        return Err(Error::Domain(format!(
            "stability bound needs dc >= 3, got {dc}"
        )));
    }
    Ok((power / T::lit(2.0)).exp() / T::lit((dc - 1) as f64))
}

/// Variable side of one user's ensemble with a monomial check side.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeEnsemble<T> {
    lambda: DegreeDistribution<T>,
    dc: u32,
    rate: T,
}

impl<T: Real> CodeEnsemble<T> {
    /// Rejects `dc < 2`, non-variable or node-perspective `lambda`, and
    /// ensembles whose design rate is not in `(0, 1)`.
    pub fn new(lambda: DegreeDistribution<T>, dc: u32) -> Result<Self> {
        if dc < 2 {
            return Err(Error::InvalidDistribution(format!(
                "check degree {dc} is below 2"
            )));
        }
        if lambda.perspective() != Perspective::Edge || lambda.side() != Side::Variable {
            return Err(Error::InvalidDistribution(
                "ensemble needs an edge-perspective variable side".into(),
            ));
        }
        let rate = monomial_rate(&lambda, dc);
        if !(rate > T::zero() && rate < T::one()) {
            return Err(Error::InvalidDistribution(format!(
                "design rate {rate} is outside (0, 1)"
            )));
        }
        Ok(Self { lambda, dc, rate })
    }

    pub fn lambda(&self) -> &DegreeDistribution<T> {
        &self.lambda
    }

    pub fn dc(&self) -> u32 {
        self.dc
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn rho(&self) -> DegreeDistribution<T> {
        DegreeDistribution::check_monomial(self.dc).expect("dc >= 2 checked at construction")
    }

    /// Whether `lambda_2` is strictly below the stability bound at `power`.
    pub fn is_stable(&self, power: T) -> bool {
        match stability_bound(power, self.dc) {
            Ok(bound) => self.lambda.weight(2) < bound,
            Err(_) => false,
        }
    }
}
