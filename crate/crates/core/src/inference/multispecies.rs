use serde::{Deserialize, Serialize};

use super::{criterion_profile, stats, Candidate, EstimateOptions, InferenceError};
use crate::data::{CaseObservation, TemperatureProfile};
use crate::dynamics::CurveSource;
use crate::scalar::Scalar;

/// Observations of one species with the growth model for that species.
pub struct SpeciesCase<'a, F> {
    pub source: &'a dyn CurveSource<F>,
    pub obs: CaseObservation<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MultiSpeciesEstimate<F> {
    pub t_hat_h: F,
    pub times: Vec<F>,
    /// `Σ_j n_j sse_j(t) / σ_j²` per candidate.
    pub criterion: Vec<F>,
    /// Admissible for every species.
    pub admissible: Vec<bool>,
    pub species_ids: Vec<String>,
    pub species_sigma2: Vec<F>,
    pub species_candidates: Vec<Vec<Candidate<F>>>,
}

/// Pools species by weighting each criterion with `n_j / σ_j²`; a candidate
/// is admissible only if it is admissible for every species.
pub fn estimate_multispecies<F: Scalar>(
    cases: &[SpeciesCase<'_, F>],
    profile: &TemperatureProfile<F>,
    grid: &[F],
    options: &EstimateOptions<F>,
) -> Result<MultiSpeciesEstimate<F>, InferenceError> {
    let first = cases
        .first()
        .ok_or_else(|| InferenceError::InvalidGrid("at least one species is required".into()))?;
    let (t_a, t_star) = (first.obs.t_a_h, first.obs.t_star_h);
    if cases.iter().any(|c| c.obs.t_a_h != t_a || c.obs.t_star_h != t_star) {
        return Err(InferenceError::InvalidGrid(
            "all species must share the admissible interval [t_a, t_star]".into(),
        ));
    }
    if grid.is_empty() {
        return Err(InferenceError::InvalidGrid("empty candidate grid".into()));
    }
    let mut criterion = vec![F::zero(); grid.len()];
    let mut admissible = vec![true; grid.len()];
    let mut species_sigma2 = Vec::with_capacity(cases.len());
    let mut species_candidates = Vec::with_capacity(cases.len());
    for case in cases {
        let s2 = stats::sample_variance(&case.obs.lengths_mm)
            .filter(|s2| *s2 > F::zero())
            .ok_or(InferenceError::VarianceUndefined { n_obs: case.obs.n_obs() })?;
        let weight = F::from_count(case.obs.n_obs()) / s2;
        let cands = criterion_profile(case.source, profile, &case.obs, grid, options)?;
        for (i, c) in cands.iter().enumerate() {
            criterion[i] += weight * c.sse;
            admissible[i] &= c.admissible;
        }
        species_sigma2.push(s2);
        species_candidates.push(cands);
    }
    let best = (0..grid.len())
        .filter(|i| admissible[*i])
        .fold(None::<usize>, |b, i| match b {
            Some(b) if criterion[b] <= criterion[i] => Some(b),
            _ => Some(i),
        })
        .ok_or_else(|| InferenceError::NoAdmissibleCandidate {
            stage: first.obs.stage,
            summary: format!("no candidate is admissible for all {} species", cases.len()),
        })?;
    Ok(MultiSpeciesEstimate {
        t_hat_h: grid[best],
        times: grid.to_vec(),
        criterion,
        admissible,
        species_ids: cases.iter().map(|c| c.obs.species_id.clone()).collect(),
        species_sigma2,
        species_candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Stage;
    use crate::dynamics::reconstruct_growth;
    use crate::inference::{candidate_grid, estimate_case};
    use crate::inference::tests::ToySource;

    fn profile() -> TemperatureProfile<f64> {
        TemperatureProfile::constant(15.0, -300.0, 0.0).unwrap()
    }

    fn grid() -> Vec<f64> {
        candidate_grid(-200.0, 0.0, 1.0).unwrap()
    }

    fn opts() -> EstimateOptions<f64> {
        EstimateOptions { parallel: false, ..EstimateOptions::default() }
    }

    #[test]
    fn single_species_matches_plain_estimate() {
        let obs = CaseObservation::new(vec![6.0, 6.4, 7.1, 6.8], -200.0, 0.0, Stage::Unknown);
        let single = estimate_case(&ToySource, &profile(), &obs, &opts()).unwrap();
        let pooled =
            estimate_multispecies(&[SpeciesCase { source: &ToySource, obs: obs.clone() }], &profile(), &grid(), &opts())
                .unwrap();
        assert_eq!(pooled.t_hat_h, single.t_hat_h);
        let mut a: Vec<usize> = (0..pooled.times.len()).collect();
        let mut b = a.clone();
        a.sort_by(|i, j| pooled.criterion[*i].partial_cmp(&pooled.criterion[*j]).unwrap());
        b.sort_by(|i, j| single.candidates[*i].sse.partial_cmp(&single.candidates[*j].sse).unwrap());
        assert_eq!(a, b);

        let twice = estimate_multispecies(
            &[SpeciesCase { source: &ToySource, obs: obs.clone() }, SpeciesCase { source: &ToySource, obs }],
            &profile(),
            &grid(),
            &opts(),
        )
        .unwrap();
        assert_eq!(twice.t_hat_h, single.t_hat_h);
    }

    #[test]
    fn heavier_species_wins() {
        let prof = profile();
        let at = |t: f64| reconstruct_growth(&ToySource, &prof, t, 0.0, 1.0).unwrap().final_length();
        let (ya, yb) = (at(-50.0), at(-90.0));
        // Tight replicates for A, loose for B.
        let a = CaseObservation::new(vec![ya - 0.01, ya + 0.01, ya], -200.0, 0.0, Stage::Feeding);
        let b = CaseObservation::new(vec![yb - 2.0, yb + 2.0, yb], -200.0, 0.0, Stage::Feeding);
        let cases = [SpeciesCase { source: &ToySource, obs: a }, SpeciesCase { source: &ToySource, obs: b }];
        let est = estimate_multispecies(&cases, &prof, &grid(), &opts()).unwrap();
        // Exhaustive pooled criterion.
        let oracle = est
            .times
            .iter()
            .enumerate()
            .filter(|(i, _)| est.admissible[*i])
            .map(|(i, t)| {
                let value: f64 = cases
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let l = est.species_candidates[j][i].terminal_length;
                        let ys = &c.obs.lengths_mm;
                        let m = ys.iter().sum::<f64>() / 3.0;
                        let s2 = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / 2.0;
                        ys.iter().map(|y| (l - y).powi(2)).sum::<f64>() * 3.0 / s2
                    })
                    .sum();
                (*t, value)
            })
            .fold((f64::NAN, f64::INFINITY), |b, (t, v)| if v < b.1 { (t, v) } else { b });
        assert_eq!(est.t_hat_h, oracle.0);
        assert_eq!(est.t_hat_h, -50.0);
    }

    #[test]
    fn mismatched_windows_and_single_lengths_fail() {
        let a = CaseObservation::new(vec![5.0, 5.5], -200.0, 0.0, Stage::Unknown);
        let b = CaseObservation::new(vec![5.0, 5.5], -100.0, 0.0, Stage::Unknown);
        let err = estimate_multispecies(
            &[SpeciesCase { source: &ToySource, obs: a.clone() }, SpeciesCase { source: &ToySource, obs: b }],
            &profile(),
            &grid(),
            &opts(),
        );
        assert!(matches!(err, Err(InferenceError::InvalidGrid(_))));
        let one = CaseObservation::new(vec![5.0], -200.0, 0.0, Stage::Unknown);
        let err = estimate_multispecies(&[SpeciesCase { source: &ToySource, obs: one }], &profile(), &grid(), &opts());
        assert_eq!(err.unwrap_err(), InferenceError::VarianceUndefined { n_obs: 1 });
    }
}
