use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HatchingEstimate, InferenceError};
use crate::scalar::Scalar;

/// Prior on the hatching time (hours on the case clock).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorSpec {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
    /// `t - offset` is exponential with mean `mean - offset`, so the density
    /// starts at `offset` and decays towards later times.
    Exponential { offset: f64, mean: f64 },
}

impl PriorSpec {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let ok = match *self {
            PriorSpec::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            PriorSpec::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            PriorSpec::Exponential { offset, mean } => {
                offset.is_finite() && mean.is_finite() && mean > offset
            }
        };
        if ok {
            Ok(())
        } else {
            Err(InferenceError::InvalidPrior(format!("{self} has invalid parameters")))
        }
    }

    /// Unnormalized log density.
    pub fn log_density(&self, t: f64) -> f64 {
        match *self {
            PriorSpec::Uniform { lo, hi } => {
                if t >= lo && t <= hi {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            PriorSpec::Gaussian { mean, sd } => -0.5 * ((t - mean) / sd).powi(2),
            PriorSpec::Exponential { offset, mean } => {
                if t >= offset {
                    -(t - offset) / (mean - offset)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

impl FromStr for PriorSpec {
    type Err = String;

    /// `uniform:LO:HI`, `gaussian:MEAN:SD` or `exponential:OFFSET:MEAN`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let usage = || {
            format!("invalid prior `{s}` (uniform:LO:HI, gaussian:MEAN:SD or exponential:OFFSET:MEAN)")
        };
        if parts.len() != 3 {
            return Err(usage());
        }
        let a: f64 = parts[1].parse().map_err(|_| usage())?;
        let b: f64 = parts[2].parse().map_err(|_| usage())?;
        let prior = match parts[0].to_ascii_lowercase().as_str() {
            "uniform" => PriorSpec::Uniform { lo: a, hi: b },
            "gaussian" | "normal" => PriorSpec::Gaussian { mean: a, sd: b },
            "exponential" | "exp" => PriorSpec::Exponential { offset: a, mean: b },
            _ => return Err(usage()),
        };
        prior.validate().map_err(|e| e.to_string())?;
        Ok(prior)
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            PriorSpec::Gaussian { mean, sd } => write!(f, "gaussian:{mean}:{sd}"),
            PriorSpec::Exponential { offset, mean } => write!(f, "exponential:{offset}:{mean}"),
        }
    }
}

/// Posterior density on the candidate grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Posterior<F> {
    pub prior: PriorSpec,
    pub times: Vec<F>,
    /// Zero on inadmissible candidates; `Σ density · Δt = 1`.
    pub density: Vec<F>,
    pub map: F,
}

/// `f(t | Y) ∝ exp(l(t)) π(t)` on the admissible candidates.
pub fn posterior<F: Scalar>(
    est: &HatchingEstimate<F>,
    prior: &PriorSpec,
) -> Result<Posterior<F>, InferenceError> {
    prior.validate()?;
    if !est.has_likelihood() {
        return Err(InferenceError::VarianceUndefined { n_obs: est.n_obs });
    }
    let times: Vec<F> = est.candidates.iter().map(|c| c.t).collect();
    let log_post: Vec<f64> = times
        .iter()
        .zip(&est.loglik)
        .map(|(t, l)| match l {
            Some(l) => l.as_f64() + prior.log_density(t.as_f64()),
            None => f64::NEG_INFINITY,
        })
        .collect();
    let (map_idx, top) = log_post
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    if top == f64::NEG_INFINITY {
        return Err(InferenceError::ZeroPosteriorMass);
    }
    let dt = if times.len() > 1 { (times[1] - times[0]).as_f64() } else { 1.0 };
    let weights: Vec<f64> = log_post.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = weights.iter().sum::<f64>() * dt;
    Ok(Posterior {
        prior: *prior,
        density: weights.iter().map(|w| F::lit(w / total)).collect(),
        map: times[map_idx],
        times,
    })
}
