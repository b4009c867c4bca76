//! Hatching-time estimation.
//!
//! Every candidate hatching time on a grid is scored by the squared distance
//! between the reconstructed length at collection and the observed lengths.
//! Candidates whose trajectory disagrees with the recorded developmental stage
//! are excluded.

mod adh;
mod ci;
mod multispecies;
mod posterior;
mod report;
pub mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adh::{adh_interval, adh_time};
pub use ci::{likelihood_ci, ConfidenceInterval};
pub use multispecies::{estimate_multispecies, MultiSpeciesEstimate, SpeciesCase};
pub use posterior::{posterior, Posterior, PriorSpec};
pub use report::{EstimateReport, ProfileRow};

use crate::data::{validate_case, CaseObservation, DataError, Stage, TemperatureProfile};
use crate::dynamics::{reconstruct_growth, CurveSource, DynamicsError, Phase, DEFAULT_DT_H};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("no admissible hatching time for stage {stage}: {summary}")]
    NoAdmissibleCandidate { stage: Stage, summary: String },
    #[error("the likelihood needs a positive sample variance (n = {n_obs}); confidence intervals and posteriors are unavailable")]
    VarianceUndefined { n_obs: usize },
    #[error("posterior has zero mass on the admissible grid")]
    ZeroPosteriorMass,
    #[error("the profile accumulates only {available} degree-hours before {t_star} h, {required} required")]
    InsufficientSpan { available: f64, required: f64, t_star: f64 },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid candidate grid: {0}")]
    InvalidGrid(String),
    #[error("reconstruction from candidate {candidate} h failed: {source}")]
    Reconstruction { candidate: f64, source: DynamicsError },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Step and time resolution of the candidate search.
#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions<F> {
    /// Euler step (hours).
    pub dt: F,
    /// Candidate spacing (hours).
    pub step: F,
    /// Evaluate candidates on the rayon pool.
    pub parallel: bool,
}

impl<F: Scalar> Default for EstimateOptions<F> {
    fn default() -> Self {
        EstimateOptions { dt: F::lit(DEFAULT_DT_H), step: F::one(), parallel: true }
    }
}

/// `t_a, t_a + step, …` up to and including `t_star` when it falls on the
/// grid.
pub fn candidate_grid<F: Scalar>(t_a: F, t_star: F, step: F) -> Result<Vec<F>, InferenceError> {
    if !(step > F::zero() && step.is_finite() && t_a <= t_star) {
        return Err(InferenceError::InvalidGrid(format!(
            "need t_a <= t_star and a positive step (t_a = {t_a}, t_star = {t_star}, step = {step})"
        )));
    }
    let count = ((t_star - t_a) / step).as_f64();
    let n = (count + 1e-9).floor() as usize;
    let mut grid: Vec<F> = (0..=n).map(|k| t_a + F::from_count(k) * step).collect();
    if (count - n as f64).abs() < 1e-9 {
        grid[n] = t_star;
    }
    Ok(grid)
}

/// Score of one candidate hatching time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Candidate<F> {
    pub t: F,
    pub sse: F,
    pub admissible: bool,
    /// Reconstructed length at collection (at pupation if that came first).
    pub terminal_length: F,
    /// Phase at collection; pupation exactly at collection reads as
    /// post-feeding.
    pub phase: Phase,
}

/// Stage agreement. A trajectory that pupated before collection leaves no
/// larva to measure and is never admissible.
pub fn stage_admits(stage: Stage, phase: Phase) -> bool {
    match (stage, phase) {
        (_, Phase::Pupated) => false,
        (Stage::Unknown, _) => true,
        (Stage::Feeding, p) => p == Phase::Feeding,
        (Stage::PostFeeding, p) => p == Phase::PostFeeding,
    }
}

fn score_candidate<F: Scalar, S: CurveSource<F> + ?Sized>(
    source: &S,
    profile: &TemperatureProfile<F>,
    obs: &CaseObservation<F>,
    t: F,
    dt: F,
) -> Result<Candidate<F>, InferenceError> {
    let t_star = obs.t_star_h;
    let fail = |source| InferenceError::Reconstruction { candidate: t.as_f64(), source };
    let (terminal_length, phase) = if t >= t_star {
        let curve = source
            .curve_at(profile.temperature_at(t_star)?)
            .map_err(|e| fail(DynamicsError::Field(e)))?;
        (curve.hatch_value(), Phase::Feeding)
    } else {
        let traj = reconstruct_growth(source, profile, t, t_star, dt).map_err(fail)?;
        let phase = match (traj.final_phase(), traj.pupation_time) {
            (Phase::Pupated, Some(tp)) if tp >= t_star => Phase::PostFeeding,
            (p, _) => p,
        };
        (traj.final_length(), phase)
    };
    let sse = obs.lengths_mm.iter().map(|y| (terminal_length - *y) * (terminal_length - *y)).sum();
    Ok(Candidate { t, sse, admissible: stage_admits(obs.stage, phase), terminal_length, phase })
}

/// Reconstructs growth from every candidate to collection and scores it.
/// Parallel and sequential evaluation give identical results.
pub fn criterion_profile<F: Scalar, S: CurveSource<F> + ?Sized>(
    source: &S,
    profile: &TemperatureProfile<F>,
    obs: &CaseObservation<F>,
    grid: &[F],
    options: &EstimateOptions<F>,
) -> Result<Vec<Candidate<F>>, InferenceError> {
    validate_case(obs, profile)?;
    if let Some(bad) = grid.iter().find(|t| **t < obs.t_a_h || **t > obs.t_star_h) {
        return Err(InferenceError::InvalidGrid(format!(
            "candidate {bad} lies outside [{}, {}]",
            obs.t_a_h, obs.t_star_h
        )));
    }
    let score = |t: &F| score_candidate(source, profile, obs, *t, options.dt);
    if options.parallel {
        grid.par_iter().map(score).collect()
    } else {
        grid.iter().map(score).collect()
    }
}

/// Point estimate with its criterion and log-likelihood profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct HatchingEstimate<F> {
    pub t_hat_h: F,
    pub sse_min: F,
    pub n_obs: usize,
    pub mean_length: F,
    /// Sample variance of the observed lengths (`None` when `n_obs < 2`).
    pub sigma2: Option<F>,
    pub stage: Stage,
    pub candidates: Vec<Candidate<F>>,
    /// Gaussian log-likelihood per candidate; `None` for inadmissible
    /// candidates or when the variance is unavailable.
    pub loglik: Vec<Option<F>>,
}

impl<F: Scalar> HatchingEstimate<F> {
    pub fn admissible(&self) -> impl Iterator<Item = &Candidate<F>> {
        self.candidates.iter().filter(|c| c.admissible)
    }

    pub fn has_likelihood(&self) -> bool {
        self.loglik.iter().any(Option::is_some)
    }

    pub fn max_loglik(&self) -> Option<F> {
        self.loglik.iter().flatten().copied().reduce(F::max)
    }
}

fn no_admissible<F: Scalar>(stage: Stage, candidates: &[Candidate<F>]) -> InferenceError {
    let count = |p: Phase| candidates.iter().filter(|c| c.phase == p).count();
    InferenceError::NoAdmissibleCandidate {
        stage,
        summary: format!(
            "{} candidates: {} feeding, {} post-feeding, {} pupated before collection",
            candidates.len(),
            count(Phase::Feeding),
            count(Phase::PostFeeding),
            count(Phase::Pupated)
        ),
    }
}

/// Admissible minimizer of the criterion (earliest on ties) and the Gaussian
/// log-likelihood `l(t) = -n/2 ln(2π σ²) - sse(t) / (2σ²)` with the sample
/// variance plugged in.
pub fn estimate_hatching<F: Scalar>(
    candidates: Vec<Candidate<F>>,
    obs: &CaseObservation<F>,
) -> Result<HatchingEstimate<F>, InferenceError> {
    let best = candidates
        .iter()
        .filter(|c| c.admissible)
        .fold(None::<&Candidate<F>>, |best, c| match best {
            Some(b) if b.sse <= c.sse => Some(b),
            _ => Some(c),
        })
        .copied()
        .ok_or_else(|| no_admissible(obs.stage, &candidates))?;
    let n = obs.n_obs();
    let sigma2 = stats::sample_variance(&obs.lengths_mm);
    let loglik = candidates
        .iter()
        .map(|c| match sigma2 {
            Some(s2) if s2 > F::zero() && c.admissible => {
                let two_pi = F::lit(std::f64::consts::TAU);
                Some(-F::from_count(n) / F::lit(2.0) * (two_pi * s2).ln() - c.sse / (F::lit(2.0) * s2))
            }
            _ => None,
        })
        .collect();
    Ok(HatchingEstimate {
        t_hat_h: best.t,
        sse_min: best.sse,
        n_obs: n,
        mean_length: obs.mean_length(),
        sigma2,
        stage: obs.stage,
        candidates,
        loglik,
    })
}

/// Candidate grid, criterion and point estimate in one call.
pub fn estimate_case<F: Scalar, S: CurveSource<F> + ?Sized>(
    source: &S,
    profile: &TemperatureProfile<F>,
    obs: &CaseObservation<F>,
    options: &EstimateOptions<F>,
) -> Result<HatchingEstimate<F>, InferenceError> {
    let grid = candidate_grid(obs.t_a_h, obs.t_star_h, options.step)?;
    let candidates = criterion_profile(source, profile, obs, &grid, options)?;
    estimate_hatching(candidates, obs)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::curve::ConstantTempCurve;
    use crate::field::FieldError;
    use std::sync::Arc;

    /// Curves depending on temperature through a time scale, without any
    /// fitting: `L(t) = 2 + 10 sin(π t / (2 t_m))` up to `t_m`, then a linear
    /// decline to 10 at `t_pup`.
    pub(crate) struct ToySource;

    impl ToySource {
        pub(crate) fn curve(temp: f64) -> ConstantTempCurve<f64> {
            let t_pup = 1200.0 / (temp - 2.0);
            let t_m = 0.6 * t_pup;
            ConstantTempCurve::from_fn(
                temp,
                t_pup,
                512,
                move |t| {
                    if t <= t_m {
                        2.0 + 10.0 * (std::f64::consts::FRAC_PI_2 * t / t_m).sin()
                    } else {
                        12.0 - 2.0 * (t - t_m) / (t_pup - t_m)
                    }
                },
                move |t| {
                    if t < t_m {
                        10.0 * std::f64::consts::FRAC_PI_2 / t_m * (std::f64::consts::FRAC_PI_2 * t / t_m).cos()
                    } else {
                        -2.0 / (t_pup - t_m)
                    }
                },
            )
        }
    }

    impl CurveSource<f64> for ToySource {
        fn curve_at(&self, temp_c: f64) -> Result<Arc<ConstantTempCurve<f64>>, FieldError> {
            Ok(Arc::new(Self::curve(temp_c)))
        }
    }

    fn profile() -> TemperatureProfile<f64> {
        TemperatureProfile::new(
            (0..=300).map(|i| -300.0 + i as f64).collect(),
            (0..=300).map(|i| 14.0 + 3.0 * (i as f64 / 12.0).sin()).collect(),
        )
        .unwrap()
    }

    fn serial() -> EstimateOptions<f64> {
        EstimateOptions { parallel: false, ..EstimateOptions::default() }
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(candidate_grid(-3.0f64, 0.0, 1.0).unwrap(), vec![-3.0, -2.0, -1.0, 0.0]);
        assert_eq!(candidate_grid(-3.0f64, 0.0, 2.0).unwrap(), vec![-3.0, -1.0]);
        assert_eq!(candidate_grid(-0.3f64, 0.0, 0.1).unwrap().last(), Some(&0.0));
        assert!(candidate_grid(0.0f64, -1.0, 1.0).is_err());
    }

    #[test]
    fn admissibility_table() {
        use Phase::*;
        assert!(stage_admits(Stage::Unknown, Feeding) && stage_admits(Stage::Unknown, PostFeeding));
        assert!(!stage_admits(Stage::Unknown, Pupated));
        assert!(stage_admits(Stage::Feeding, Feeding) && !stage_admits(Stage::Feeding, PostFeeding));
        assert!(stage_admits(Stage::PostFeeding, PostFeeding) && !stage_admits(Stage::PostFeeding, Feeding));
        assert!(!stage_admits(Stage::PostFeeding, Pupated));
    }

    #[test]
    fn noiseless_recovery_and_independent_sse() {
        let prof = profile();
        let t0 = -25.0;
        let truth = reconstruct_growth(&ToySource, &prof, t0, 0.0, 1.0).unwrap();
        let y = truth.final_length();
        let obs = CaseObservation::new(vec![y; 5], -250.0, 0.0, Stage::Unknown);
        let est = estimate_case(&ToySource, &prof, &obs, &serial()).unwrap();
        assert_eq!(est.t_hat_h, t0);
        assert_eq!(est.sse_min, 0.0);

        // Independent recomputation for three candidates.
        for c in est.candidates.iter().filter(|c| [-200.0, -25.0, -37.0].contains(&c.t)) {
            let traj = reconstruct_growth(&ToySource, &prof, c.t, 0.0, 1.0).unwrap();
            let l = traj.final_length();
            let sse: f64 = obs.lengths_mm.iter().map(|y| (l - y).powi(2)).sum();
            assert_eq!(c.sse, sse);
            if c.t != t0 {
                assert!(c.sse > 0.0);
            }
        }
    }

    #[test]
    fn parallel_equals_sequential() {
        let prof = profile();
        let obs = CaseObservation::new(vec![7.0, 7.5, 8.2], -250.0, 0.0, Stage::Feeding);
        let a = estimate_case(&ToySource, &prof, &obs, &serial()).unwrap();
        let b = estimate_case(&ToySource, &prof, &obs, &EstimateOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stage_filters_candidates() {
        let prof = profile();
        let obs = CaseObservation::new(vec![11.5, 11.7], -250.0, 0.0, Stage::PostFeeding);
        let est = estimate_case(&ToySource, &prof, &obs, &serial()).unwrap();
        for c in &est.candidates {
            if c.phase == Phase::Feeding {
                assert!(!c.admissible);
            }
        }
        assert_eq!(est.candidates.iter().find(|c| c.t == est.t_hat_h).unwrap().phase, Phase::PostFeeding);

        // Collection 20 h after hatching at the earliest: nothing reaches
        // post-feeding.
        let young = CaseObservation::new(vec![3.0, 3.2], -20.0, 0.0, Stage::PostFeeding);
        assert!(matches!(
            estimate_case(&ToySource, &prof, &young, &serial()),
            Err(InferenceError::NoAdmissibleCandidate { .. })
        ));
    }

    #[test]
    fn ties_go_to_earliest_and_variance() {
        let obs = CaseObservation::new(vec![4.0, 6.0], -3.0, 0.0, Stage::Unknown);
        let mk = |t: f64, sse: f64| Candidate { t, sse, admissible: true, terminal_length: 5.0, phase: Phase::Feeding };
        let est = estimate_hatching(vec![mk(-3.0, 2.0), mk(-2.0, 1.0), mk(-1.0, 1.0), mk(0.0, 3.0)], &obs).unwrap();
        assert_eq!(est.t_hat_h, -2.0);
        assert_eq!(est.sigma2, Some(2.0));
        let l = est.loglik[1].unwrap();
        assert!((l - (-(std::f64::consts::TAU * 2.0).ln() - 0.25)).abs() < 1e-12);

        let single = CaseObservation::new(vec![4.0], -3.0, 0.0, Stage::Unknown);
        let est = estimate_hatching(vec![mk(-3.0, 2.0)], &single).unwrap();
        assert!(est.sigma2.is_none() && !est.has_likelihood());
    }
}
