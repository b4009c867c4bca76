use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{likelihood_ci, posterior, ConfidenceInterval, HatchingEstimate, InferenceError, Posterior, PriorSpec};
use crate::data::{CaseObservation, Stage};
use crate::dynamics::Phase;
use crate::scalar::Scalar;

/// One candidate of the criterion profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ProfileRow<F> {
    pub t: F,
    pub sse: F,
    pub admissible: bool,
    pub phase: Phase,
    pub terminal_length: F,
    pub loglik: Option<F>,
}

/// Everything an estimate run reports, ready for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct EstimateReport<F> {
    pub t_hat_h: F,
    /// Post-mortem interval bound `t* - t_hat`.
    pub pmi_h: F,
    pub t_a_h: F,
    pub t_star_h: F,
    pub stage: Stage,
    pub n_obs: usize,
    pub mean_length_mm: F,
    pub sigma2: Option<F>,
    pub sse_min: F,
    pub ci: Option<ConfidenceInterval<F>>,
    pub posterior: Option<Posterior<F>>,
    pub profile: Vec<ProfileRow<F>>,
}

impl<F: Scalar> EstimateReport<F> {
    /// Builds the report, adding the interval at `ci_level` and the posterior
    /// under `prior` when requested. Both need a sample variance.
    pub fn build(
        est: &HatchingEstimate<F>,
        obs: &CaseObservation<F>,
        ci_level: Option<f64>,
        prior: Option<&PriorSpec>,
    ) -> Result<Self, InferenceError> {
        let ci = ci_level.map(|level| likelihood_ci(est, level)).transpose()?;
        let posterior = prior.map(|p| posterior(est, p)).transpose()?;
        let profile = est
            .candidates
            .iter()
            .zip(&est.loglik)
            .map(|(c, l)| ProfileRow {
                t: c.t,
                sse: c.sse,
                admissible: c.admissible,
                phase: c.phase,
                terminal_length: c.terminal_length,
                loglik: *l,
            })
            .collect();
        Ok(EstimateReport {
            t_hat_h: est.t_hat_h,
            pmi_h: obs.t_star_h - est.t_hat_h,
            t_a_h: obs.t_a_h,
            t_star_h: obs.t_star_h,
            stage: est.stage,
            n_obs: est.n_obs,
            mean_length_mm: est.mean_length,
            sigma2: est.sigma2,
            sse_min: est.sse_min,
            ci,
            posterior,
            profile,
        })
    }

    pub fn write_criterion_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "candidate_t,sse,admissible")?;
        for row in &self.profile {
            writeln!(out, "{},{},{}", row.t.as_f64(), row.sse.as_f64(), row.admissible)?;
        }
        Ok(())
    }

    /// Writes nothing when no posterior was requested.
    pub fn write_posterior_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let Some(post) = &self.posterior else { return Ok(()) };
        writeln!(out, "t,posterior_density")?;
        for (t, d) in post.times.iter().zip(&post.density) {
            writeln!(out, "{},{}", t.as_f64(), d.as_f64())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{estimate_hatching, Candidate};

    fn case(lengths: Vec<f64>) -> (HatchingEstimate<f64>, CaseObservation<f64>) {
        let obs = CaseObservation::new(lengths, -3.0, 0.0, Stage::Feeding);
        let candidates = [(-3.0, 2.0, true), (-2.0, 0.5, true), (-1.0, 1.0, true), (0.0, 4.0, false)]
            .map(|(t, sse, admissible)| Candidate {
                t,
                sse,
                admissible,
                terminal_length: 5.0,
                phase: if admissible { Phase::Feeding } else { Phase::PostFeeding },
            })
            .to_vec();
        (estimate_hatching(candidates, &obs).unwrap(), obs)
    }

    #[test]
    fn report_carries_estimate_and_pmi() {
        let (est, obs) = case(vec![4.0, 5.0, 6.0]);
        let prior = PriorSpec::Uniform { lo: -3.0, hi: 0.0 };
        let r = EstimateReport::build(&est, &obs, Some(0.95), Some(&prior)).unwrap();
        assert_eq!(r.t_hat_h, -2.0);
        assert_eq!(r.pmi_h, 2.0);
        assert_eq!(r.profile.len(), 4);
        assert!(r.profile[3].loglik.is_none());
        assert!(r.ci.is_some());
        assert_eq!(r.posterior.as_ref().unwrap().map, -2.0);

        let mut csv = Vec::new();
        r.write_criterion_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "candidate_t,sse,admissible\n-3,2,true\n-2,0.5,true\n-1,1,true\n0,4,false\n"
        );
        let mut post = Vec::new();
        r.write_posterior_csv(&mut post).unwrap();
        let text = String::from_utf8(post).unwrap();
        assert!(text.starts_with("t,posterior_density\n-3,"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn single_observation_needs_no_variance_without_ci() {
        let (est, obs) = case(vec![5.0]);
        let r = EstimateReport::build(&est, &obs, None, None).unwrap();
        assert!(r.sigma2.is_none() && r.ci.is_none() && r.posterior.is_none());
        let mut post = Vec::new();
        r.write_posterior_csv(&mut post).unwrap();
        assert!(post.is_empty());
        assert_eq!(
            EstimateReport::build(&est, &obs, Some(0.95), None),
            Err(InferenceError::VarianceUndefined { n_obs: 1 })
        );
    }

    #[test]
    fn report_json_round_trips() {
        let (est, obs) = case(vec![4.1, 5.3, 6.7]);
        let r = EstimateReport::build(&est, &obs, Some(0.9), None).unwrap();
        let text = crate::json::to_string(&r).unwrap();
        let back: EstimateReport<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
