use serde::{Deserialize, Serialize};

use super::stats::chi2_1_quantile;
use super::{HatchingEstimate, InferenceError};
use crate::scalar::Scalar;

/// Hull of the likelihood-ratio confidence region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ConfidenceInterval<F> {
    pub level: f64,
    pub lo: F,
    pub hi: F,
    /// Candidates inside the region `l(t) > l(t_hat) - χ²/2`.
    pub region: Vec<F>,
    /// The interval reaches the first admissible candidate.
    pub touches_lower: bool,
    /// The interval reaches the last admissible candidate.
    pub touches_upper: bool,
}

impl<F: Scalar> ConfidenceInterval<F> {
    /// The region has gaps, so the hull is conservative.
    pub fn is_convex(&self, all_admissible: &[F]) -> bool {
        let inside = all_admissible.iter().filter(|t| **t >= self.lo && **t <= self.hi).count();
        inside == self.region.len()
    }
}

/// `[min CR, max CR]` with `CR = {t : l(t) > l(t_hat) - χ²_level(1)/2}` over
/// the admissible candidates.
pub fn likelihood_ci<F: Scalar>(
    est: &HatchingEstimate<F>,
    level: f64,
) -> Result<ConfidenceInterval<F>, InferenceError> {
    assert!(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
    let l_hat = est.max_loglik().ok_or(InferenceError::VarianceUndefined { n_obs: est.n_obs })?;
    let cut = l_hat - F::lit(chi2_1_quantile(level) / 2.0);
    let admissible: Vec<(F, F)> = est
        .candidates
        .iter()
        .zip(&est.loglik)
        .filter_map(|(c, l)| l.map(|l| (c.t, l)))
        .collect();
    let mut region: Vec<F> = admissible.iter().filter(|(_, l)| *l > cut).map(|(t, _)| *t).collect();
    if region.is_empty() {
        region.push(est.t_hat_h);
    }
    let lo = region[0];
    let hi = region[region.len() - 1];
    Ok(ConfidenceInterval {
        level,
        lo,
        hi,
        region,
        touches_lower: lo == admissible[0].0,
        touches_upper: hi == admissible[admissible.len() - 1].0,
    })
}
