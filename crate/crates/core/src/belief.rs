//! Beliefs over the robot's reward parameter.
//!
//! A [`Belief`] is a probability vector on an ordered grid of candidate
//! parameter values. Priors are built from a [`ParamDistribution`] with
//! [`ParamDistribution::discretize`] and refined with
//! [`Belief::posterior_update`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Discrete probability distribution over candidate parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief<T> {
    support: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> Belief<T> {
    /// Builds a belief from already-normalized weights.
    pub fn new(support: Vec<T>, weights: Vec<T>) -> Result<Self> {
        check_support(&support, &weights)?;
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::tie_tolerance() {
            return Err(Error::Config(format!("belief weights sum to {total}, expected 1")));
        }
        Ok(Self { support, weights })
    }

    /// Builds a belief from nonnegative weights of any positive total.
    pub fn from_unnormalized(support: Vec<T>, weights: Vec<T>) -> Result<Self> {
        check_support(&support, &weights)?;
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::Config("belief weights must have positive finite total".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { support, weights })
    }

    pub fn point(value: T) -> Self {
        Self { support: vec![value], weights: vec![T::one()] }
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Iterates `(theta, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    /// Expected parameter value.
    pub fn mean(&self) -> T {
        self.iter().map(|(theta, w)| theta * w).sum()
    }

    /// Bayes' rule with the given likelihood, keeping the support fixed.
    ///
    /// Fails with [`Error::InconsistentObservation`] when no support point
    /// explains the observation.
    pub fn posterior_update<F>(&self, likelihood: F) -> Result<Self>
    where
        F: Fn(T) -> T,
    {
        self.posterior_update_indexed(|i| likelihood(self.support[i]))
    }

    /// Bayes' rule with a likelihood given per support index.
    pub fn posterior_update_indexed<F>(&self, likelihood: F) -> Result<Self>
    where
        F: Fn(usize) -> T,
    {
        let mut raw = Vec::with_capacity(self.len());
        for (i, (theta, w)) in self.iter().enumerate() {
            let l = likelihood(i);
            if !l.is_finite() || l < T::zero() {
                return Err(Error::Contract(format!("likelihood at {theta} is {l}")));
            }
            raw.push(w * l);
        }
        let total: T = raw.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InconsistentObservation);
        }
        Ok(Self { support: self.support.clone(), weights: raw.into_iter().map(|w| w / total).collect() })
    }

    /// Same support, weights multiplied by `scale` (no renormalization).
    ///
    /// Only useful for exercising scale invariance of consumers; the result
    /// does not satisfy the normalization invariant.
    pub fn rescaled(&self, scale: T) -> Self {
        Self { support: self.support.clone(), weights: self.weights.iter().map(|&w| w * scale).collect() }
    }

    /// Indices of support points carrying positive weight.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.iter().enumerate().filter(|(_, &w)| w > T::zero()).map(|(i, _)| i)
    }
}

fn check_support<T: Scalar>(support: &[T], weights: &[T]) -> Result<()> {
    if support.is_empty() || support.len() != weights.len() {
        return Err(Error::Config(format!(
            "belief needs matching nonempty support ({}) and weights ({})",
            support.len(),
            weights.len()
        )));
    }
    if support.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("belief support must be strictly increasing".into()));
    }
    if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
        return Err(Error::Config("belief weights must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Parametric prior over the robot's reward parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDistribution<T> {
    Uniform { lo: T, hi: T },
    /// Density proportional to `exp(-theta / a)` on `[lo, hi]`.
    Boltzmann { a: T, lo: T, hi: T },
    /// Normal density, truncated to `mean ± 4 sd` when discretized.
    Gaussian { mean: T, sd: T },
    Point { value: T },
}

impl<T: Scalar> ParamDistribution<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            Self::Boltzmann { a, lo, hi } => a > T::zero() && lo < hi && lo.is_finite() && hi.is_finite(),
            Self::Gaussian { mean, sd } => sd > T::zero() && mean.is_finite() && sd.is_finite(),
            Self::Point { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid distribution parameters: {self:?}")))
        }
    }

    /// Support interval used for discretization.
    pub fn bounds(&self) -> (T, T) {
        match *self {
            Self::Uniform { lo, hi } | Self::Boltzmann { lo, hi, .. } => (lo, hi),
            Self::Gaussian { mean, sd } => (mean - T::lit(4.0) * sd, mean + T::lit(4.0) * sd),
            Self::Point { value } => (value, value),
        }
    }

    /// Unnormalized density at `theta`.
    pub fn density(&self, theta: T) -> T {
        let (lo, hi) = self.bounds();
        if theta < lo || theta > hi {
            return T::zero();
        }
        match *self {
            Self::Uniform { .. } => T::one(),
            // Shifted by `lo` so large supports do not underflow.
            Self::Boltzmann { a, lo, .. } => (-(theta - lo) / a).exp(),
            Self::Gaussian { mean, sd } => {
                let z = (theta - mean) / sd;
                (-(z * z) / T::lit(2.0)).exp()
            }
            Self::Point { value } => {
                if theta == value {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Grid of `n` equally spaced points with weights proportional to the
    /// density. A point distribution yields a one-point belief.
    pub fn discretize(&self, n: usize) -> Result<Belief<T>> {
        self.validate()?;
        if let Self::Point { value } = *self {
            return Ok(Belief::point(value));
        }
        if n < 2 {
            return Err(Error::Config(format!("discretization needs n >= 2, got {n}")));
        }
        let support = linspace(self.bounds(), n);
        let weights = support.iter().map(|&theta| self.density(theta)).collect();
        Belief::from_unnormalized(support, weights)
    }
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace<T: Scalar>((lo, hi): (T, T), n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / T::from_count(n - 1);
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * T::from_count(i) })
        .collect()
}
