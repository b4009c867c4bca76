//! Experimental datasets, temperature profiles and case observations.
//!
//! Experimental times are hours after hatching and start at 0. Case files use a
//! relative clock where the collection time is normally 0 and the past is
//! negative. Lengths are millimetres, temperatures degrees Celsius.

mod csv;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use self::csv::{
    parse_experimental_csv, parse_lengths_csv, parse_temperature_csv, write_experimental_csv,
    write_temperature_csv,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("dataset contains no rows")]
    EmptyDataset,
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("profile times must be strictly increasing (line {line}: {time} after {previous})")]
    NonMonotoneTime { line: usize, previous: f64, time: f64 },
    #[error("temperature profile needs at least 2 samples, found {found}")]
    TooFewSamples { found: usize },
    #[error("time {time} h is outside the temperature profile span [{lo}, {hi}]")]
    OutsideSpan { time: f64, lo: f64, hi: f64 },
    #[error("temperature profile [{have_lo}, {have_hi}] does not cover the case window [{need_lo}, {need_hi}]")]
    ProfileCoverageGap {
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },
    #[error("earliest admissible hatching time {t_a} must precede collection time {t_star}")]
    BadTimeOrder { t_a: f64, t_star: f64 },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e.to_string())
    }
}

/// Replicate lengths measured at one time after hatching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TimePoint<F> {
    pub time_h: F,
    pub lengths_mm: Vec<F>,
}

/// All observations made at one constant experimental temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TemperatureBatch<F> {
    pub temperature_c: F,
    pub observations: Vec<TimePoint<F>>,
}

impl<F: Scalar> TemperatureBatch<F> {
    /// Last observation time, taken as the pupation time of the batch.
    pub fn last_time(&self) -> F {
        self.observations.last().map(|o| o.time_h).unwrap_or_else(F::zero)
    }

    pub fn total_replicates(&self) -> usize {
        self.observations.iter().map(|o| o.lengths_mm.len()).sum()
    }

    fn validate(&self) -> Result<(), DataError> {
        let t = self.temperature_c;
        let first = self.observations.first().ok_or_else(|| {
            DataError::InvariantViolation(format!("temperature {t} has no observations"))
        })?;
        if first.time_h != F::zero() {
            return Err(DataError::InvariantViolation(format!(
                "temperature {t}: first observation time is {} h, expected 0",
                first.time_h
            )));
        }
        for pair in self.observations.windows(2) {
            if pair[1].time_h <= pair[0].time_h {
                return Err(DataError::InvariantViolation(format!(
                    "temperature {t}: times not strictly increasing at {} h",
                    pair[1].time_h
                )));
            }
        }
        for obs in &self.observations {
            if obs.lengths_mm.is_empty() {
                return Err(DataError::InvariantViolation(format!(
                    "temperature {t}, time {} h: no replicate lengths",
                    obs.time_h
                )));
            }
            if let Some(bad) = obs.lengths_mm.iter().find(|y| !(**y > F::zero())) {
                return Err(DataError::InvariantViolation(format!(
                    "temperature {t}, time {} h: non-positive length {bad}",
                    obs.time_h
                )));
            }
        }
        Ok(())
    }
}

/// Constant-temperature rearing experiment: replicate larval lengths indexed by
/// temperature and time after hatching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ExperimentalDataset<F> {
    batches: Vec<TemperatureBatch<F>>,
}

impl<F: Scalar> ExperimentalDataset<F> {
    pub fn new(batches: Vec<TemperatureBatch<F>>) -> Result<Self, DataError> {
        if batches.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        for pair in batches.windows(2) {
            if pair[1].temperature_c <= pair[0].temperature_c {
                return Err(DataError::InvariantViolation(format!(
                    "temperatures not strictly increasing at {}",
                    pair[1].temperature_c
                )));
            }
        }
        for b in &batches {
            b.validate()?;
        }
        Ok(ExperimentalDataset { batches })
    }

    pub fn batches(&self) -> &[TemperatureBatch<F>] {
        &self.batches
    }

    pub fn temperatures(&self) -> Vec<F> {
        self.batches.iter().map(|b| b.temperature_c).collect()
    }

    pub fn into_batches(self) -> Vec<TemperatureBatch<F>> {
        self.batches
    }
}

/// Temperature time series, linearly interpolated between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TemperatureProfile<F> {
    times_h: Vec<F>,
    temps_c: Vec<F>,
}

impl<F: Scalar> TemperatureProfile<F> {
    pub fn new(times_h: Vec<F>, temps_c: Vec<F>) -> Result<Self, DataError> {
        assert_eq!(times_h.len(), temps_c.len(), "time/temperature length mismatch");
        if times_h.len() < 2 {
            return Err(DataError::TooFewSamples { found: times_h.len() });
        }
        for (i, pair) in times_h.windows(2).enumerate() {
            if !(pair[1] > pair[0]) {
                return Err(DataError::NonMonotoneTime {
                    line: i + 3,
                    previous: pair[0].as_f64(),
                    time: pair[1].as_f64(),
                });
            }
        }
        if let Some(bad) = times_h.iter().chain(&temps_c).find(|v| !v.is_finite()) {
            return Err(DataError::InvariantViolation(format!("non-finite profile value {bad}")));
        }
        Ok(TemperatureProfile { times_h, temps_c })
    }

    /// Constant temperature over `[start, end]`.
    pub fn constant(temp_c: F, start: F, end: F) -> Result<Self, DataError> {
        Self::new(vec![start, end], vec![temp_c, temp_c])
    }

    /// Samples one hour apart starting at `start`.
    pub fn hourly(start: F, temps_c: Vec<F>) -> Result<Self, DataError> {
        let times = (0..temps_c.len()).map(|i| start + F::from_count(i)).collect();
        Self::new(times, temps_c)
    }

    pub fn times(&self) -> &[F] {
        &self.times_h
    }

    pub fn temps(&self) -> &[F] {
        &self.temps_c
    }

    pub fn span(&self) -> (F, F) {
        (self.times_h[0], self.times_h[self.times_h.len() - 1])
    }

    pub fn covers(&self, lo: F, hi: F) -> bool {
        let (a, b) = self.span();
        a <= lo && hi <= b
    }

    /// Temperature at clock time `t`; errors outside the sampled span.
    pub fn temperature_at(&self, t: F) -> Result<F, DataError> {
        let (lo, hi) = self.span();
        if !(t >= lo && t <= hi) {
            return Err(DataError::OutsideSpan {
                time: t.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        let j = self.times_h.partition_point(|x| *x <= t);
        if j >= self.times_h.len() {
            return Ok(self.temps_c[self.temps_c.len() - 1]);
        }
        let (t0, t1) = (self.times_h[j - 1], self.times_h[j]);
        let (y0, y1) = (self.temps_c[j - 1], self.temps_c[j]);
        Ok(y0 + (y1 - y0) * (t - t0) / (t1 - t0))
    }

    /// Same sample times with temperatures replaced.
    pub fn with_temps(&self, temps_c: Vec<F>) -> Result<Self, DataError> {
        Self::new(self.times_h.clone(), temps_c)
    }
}

/// Developmental stage recognised by the entomologist at collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Feeding,
    PostFeeding,
    #[default]
    Unknown,
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "feeding" => Ok(Stage::Feeding),
            "postfeeding" => Ok(Stage::PostFeeding),
            "unknown" => Ok(Stage::Unknown),
            other => Err(format!("unknown stage `{other}` (feeding, postfeeding, unknown)")),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Feeding => "feeding",
            Stage::PostFeeding => "postfeeding",
            Stage::Unknown => "unknown",
        })
    }
}

/// Larval lengths collected at a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct CaseObservation<F> {
    pub lengths_mm: Vec<F>,
    pub t_star_h: F,
    pub t_a_h: F,
    pub stage: Stage,
    pub species_id: String,
}

impl<F: Scalar> CaseObservation<F> {
    pub fn new(lengths_mm: Vec<F>, t_a_h: F, t_star_h: F, stage: Stage) -> Self {
        CaseObservation {
            lengths_mm,
            t_star_h,
            t_a_h,
            stage,
            species_id: String::from("species"),
        }
    }

    pub fn with_species(mut self, id: impl Into<String>) -> Self {
        self.species_id = id.into();
        self
    }

    pub fn n_obs(&self) -> usize {
        self.lengths_mm.len()
    }

    pub fn mean_length(&self) -> F {
        let n = F::from_count(self.lengths_mm.len());
        self.lengths_mm.iter().copied().sum::<F>() / n
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.t_a_h < self.t_star_h) {
            return Err(DataError::BadTimeOrder {
                t_a: self.t_a_h.as_f64(),
                t_star: self.t_star_h.as_f64(),
            });
        }
        if self.lengths_mm.is_empty() {
            return Err(DataError::InvariantViolation("case has no observed lengths".into()));
        }
        if let Some(bad) = self.lengths_mm.iter().find(|y| !(**y > F::zero() && y.is_finite())) {
            return Err(DataError::InvariantViolation(format!("non-positive case length {bad}")));
        }
        Ok(())
    }
}

/// A case observation checked against the temperature profile it will be
/// reconstructed under.
#[derive(Debug, Clone, Copy)]
pub struct ValidatedCase<'a, F> {
    pub obs: &'a CaseObservation<F>,
    pub profile: &'a TemperatureProfile<F>,
}

pub fn validate_case<'a, F: Scalar>(
    obs: &'a CaseObservation<F>,
    profile: &'a TemperatureProfile<F>,
) -> Result<ValidatedCase<'a, F>, DataError> {
    obs.validate()?;
    if !profile.covers(obs.t_a_h, obs.t_star_h) {
        let (have_lo, have_hi) = profile.span();
        return Err(DataError::ProfileCoverageGap {
            need_lo: obs.t_a_h.as_f64(),
            need_hi: obs.t_star_h.as_f64(),
            have_lo: have_lo.as_f64(),
            have_hi: have_hi.as_f64(),
        });
    }
    Ok(ValidatedCase { obs, profile })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_interpolates_linearly() {
        let p = TemperatureProfile::new(vec![-10.0, 0.0, 10.0], vec![10.0, 20.0, 0.0]).unwrap();
        assert_eq!(p.temperature_at(-10.0).unwrap(), 10.0);
        assert_eq!(p.temperature_at(-5.0).unwrap(), 15.0);
        assert_eq!(p.temperature_at(0.0).unwrap(), 20.0);
        assert_eq!(p.temperature_at(2.5).unwrap(), 15.0);
        assert_eq!(p.temperature_at(10.0).unwrap(), 0.0);
        assert!(matches!(p.temperature_at(10.5), Err(DataError::OutsideSpan { .. })));
        assert!(matches!(p.temperature_at(-11.0), Err(DataError::OutsideSpan { .. })));
    }

    #[test]
    fn validate_case_contracts() {
        let long = TemperatureProfile::constant(15.0, -371.0, 0.0).unwrap();
        let obs = CaseObservation::new(vec![10.0, 11.0], -371.0, 0.0, Stage::PostFeeding);
        assert!(validate_case(&obs, &long).is_ok());

        let short = TemperatureProfile::constant(15.0, -100.0, 0.0).unwrap();
        let early = CaseObservation::new(vec![10.0], -200.0, 0.0, Stage::Unknown);
        assert!(matches!(
            validate_case(&early, &short),
            Err(DataError::ProfileCoverageGap { .. })
        ));

        let same = CaseObservation::new(vec![10.0], 0.0, 0.0, Stage::Unknown);
        assert!(matches!(validate_case(&same, &long), Err(DataError::BadTimeOrder { .. })));
    }

    #[test]
    fn dataset_rejects_bad_batches() {
        let batch = |t: f64, times: &[f64]| TemperatureBatch {
            temperature_c: t,
            observations: times
                .iter()
                .map(|&time_h| TimePoint { time_h, lengths_mm: vec![2.0] })
                .collect(),
        };
        assert!(ExperimentalDataset::new(vec![batch(10.0, &[0.0, 5.0]), batch(12.0, &[0.0])]).is_ok());
        assert!(ExperimentalDataset::new(vec![batch(12.0, &[0.0]), batch(10.0, &[0.0])]).is_err());
        assert!(ExperimentalDataset::new(vec![batch(10.0, &[0.0, 5.0, 5.0])]).is_err());
        assert!(ExperimentalDataset::new(vec![batch(10.0, &[1.0])]).is_err());
        assert!(matches!(
            ExperimentalDataset::<f64>::new(vec![]),
            Err(DataError::EmptyDataset)
        ));
    }

    #[test]
    fn stage_parses_loosely() {
        assert_eq!("PostFeeding".parse::<Stage>().unwrap(), Stage::PostFeeding);
        assert_eq!("post-feeding".parse::<Stage>().unwrap(), Stage::PostFeeding);
        assert_eq!("feeding".parse::<Stage>().unwrap(), Stage::Feeding);
        assert!("pupa".parse::<Stage>().is_err());
    }
}
