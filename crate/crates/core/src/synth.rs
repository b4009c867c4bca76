//! Parametric growth family used as ground truth for synthetic experiments.
//!
//! Development is driven by degree-hours `D = (T - T0) t`. In degree-hour
//! units the length rises linearly at `rate_coeff` mm per degree-hour from the
//! hatch length, bends quadratically into the maximum over the last quarter of
//! the rise, then declines linearly to `shrink_frac * max_len_mm` at
//! `D_pup = 1.6 D_peak`. Every curve is the same function of `D`, so timing
//! scales as `1 / (T - T0)`.
//!
//! Random draws use ChaCha8 seeded with `seed_from_u64(seed)`. Batch `k` and
//! observation time `j` read from stream `k * 2^32 + j`, replicates in order,
//! each a standard normal draw (rand_distr ziggurat) scaled by the noise sd.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::ConstantTempCurve;
use crate::data::{DataError, ExperimentalDataset, TemperatureBatch, TimePoint};
use crate::dynamics::CurveSource;
use crate::field::FieldError;
use crate::scalar::{linspace, Scalar};
use crate::smoother::DEFAULT_GRID_POINTS;

/// Fraction of the rise (in degree-hours) spent saturating into the maximum.
pub const SATURATION_FRACTION: f64 = 0.25;
/// Degree-hours to pupation over degree-hours to the maximum.
pub const PUPATION_RATIO: f64 = 1.6;

/// Default experimental design: nine temperatures from 6 to 22 °C.
pub const DESIGN_TEMPS_C: [f64; 9] = [6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0];
pub const DESIGN_TIMES_PER_TEMP: usize = 25;
pub const DESIGN_REPLICATES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("temperature {temperature} °C is at or below the base temperature {base} °C")]
    BelowThreshold { temperature: f64, base: f64 },
    #[error("invalid synthetic family: {0}")]
    InvalidFamily(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SynthFamily<F> {
    /// Growth in mm per degree-hour above the base temperature.
    pub rate_coeff: F,
    pub base_temp_c: F,
    pub max_len_mm: F,
    pub hatch_len_mm: F,
    /// Length at pupation as a fraction of the maximum.
    pub shrink_frac: F,
    /// Measurement noise of generated lengths.
    pub noise_sd_mm: F,
}

impl<F: Scalar> Default for SynthFamily<F> {
    fn default() -> Self {
        SynthFamily {
            rate_coeff: F::lit(0.008),
            base_temp_c: F::one(),
            max_len_mm: F::lit(16.0),
            hatch_len_mm: F::lit(1.5),
            shrink_frac: F::lit(0.8),
            noise_sd_mm: F::lit(0.2),
        }
    }
}

impl<F: Scalar> SynthFamily<F> {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidFamily(m.to_string()));
        let all = [
            self.rate_coeff,
            self.base_temp_c,
            self.max_len_mm,
            self.hatch_len_mm,
            self.shrink_frac,
            self.noise_sd_mm,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if !(self.rate_coeff > F::zero()) {
            return bad("rate_coeff must be positive");
        }
        if !(self.hatch_len_mm > F::zero()
            && self.hatch_len_mm < self.shrink_frac * self.max_len_mm
            && self.shrink_frac < F::one())
        {
            return bad("need 0 < hatch_len < shrink_frac * max_len < max_len");
        }
        if self.noise_sd_mm < F::zero() {
            return bad("noise_sd_mm must be non-negative");
        }
        Ok(())
    }

    /// Degree-hours from hatching to the maximum.
    pub fn peak_degree_hours(&self) -> F {
        let phi = F::lit(SATURATION_FRACTION);
        (self.max_len_mm - self.hatch_len_mm) / (self.rate_coeff * (F::one() - phi / F::lit(2.0)))
    }

    pub fn pupation_degree_hours(&self) -> F {
        F::lit(PUPATION_RATIO) * self.peak_degree_hours()
    }

    /// Length after `d` degree-hours, held at its pupation value beyond.
    pub fn length_at_degree_hours(&self, d: F) -> F {
        let (d_peak, d_pup) = (self.peak_degree_hours(), self.pupation_degree_hours());
        let width = F::lit(SATURATION_FRACTION) * d_peak;
        let d = d.max(F::zero()).min(d_pup);
        if d <= d_peak - width {
            self.hatch_len_mm + self.rate_coeff * d
        } else if d <= d_peak {
            let gap = d_peak - d;
            self.max_len_mm - self.rate_coeff * gap * gap / (F::lit(2.0) * width)
        } else {
            let drop = (F::one() - self.shrink_frac) * self.max_len_mm;
            self.max_len_mm - drop * (d - d_peak) / (d_pup - d_peak)
        }
    }

    /// `dL/dD`; left derivative at the kinks, zero beyond pupation.
    pub fn rate_per_degree_hour(&self, d: F) -> F {
        let (d_peak, d_pup) = (self.peak_degree_hours(), self.pupation_degree_hours());
        let width = F::lit(SATURATION_FRACTION) * d_peak;
        if d <= d_peak - width {
            self.rate_coeff
        } else if d <= d_peak {
            self.rate_coeff * (d_peak - d) / width
        } else if d <= d_pup {
            -(F::one() - self.shrink_frac) * self.max_len_mm / (d_pup - d_peak)
        } else {
            F::zero()
        }
    }

    fn excess(&self, temp: F) -> Result<F, SynthError> {
        let excess = temp - self.base_temp_c;
        if !(excess > F::zero()) {
            return Err(SynthError::BelowThreshold {
                temperature: temp.as_f64(),
                base: self.base_temp_c.as_f64(),
            });
        }
        Ok(excess)
    }

    pub fn t_max(&self, temp: F) -> Result<F, SynthError> {
        Ok(self.peak_degree_hours() / self.excess(temp)?)
    }

    pub fn t_pup(&self, temp: F) -> Result<F, SynthError> {
        Ok(self.pupation_degree_hours() / self.excess(temp)?)
    }

    pub fn length(&self, temp: F, t: F) -> Result<F, SynthError> {
        Ok(self.length_at_degree_hours(self.excess(temp)? * t))
    }

    pub fn growth_rate(&self, temp: F, t: F) -> Result<F, SynthError> {
        let excess = self.excess(temp)?;
        Ok(excess * self.rate_per_degree_hour(excess * t))
    }

    /// Closed-form constant-temperature curve on `points` grid points.
    pub fn truth_curve(&self, temp: F, points: usize) -> Result<ConstantTempCurve<F>, SynthError> {
        self.validate()?;
        let excess = self.excess(temp)?;
        Ok(ConstantTempCurve::from_fn(
            temp,
            self.pupation_degree_hours() / excess,
            points,
            |t| self.length_at_degree_hours(excess * t),
            |t| excess * self.rate_per_degree_hour(excess * t),
        ))
    }
}

/// Closed-form curves of a family served as a growth model; dormant at or
/// below the base temperature.
#[derive(Debug, Clone, Copy)]
pub struct SynthTruth<F> {
    pub family: SynthFamily<F>,
    pub points: usize,
}

impl<F: Scalar> SynthTruth<F> {
    pub fn new(family: SynthFamily<F>) -> Self {
        SynthTruth { family, points: DEFAULT_GRID_POINTS }
    }
}

impl<F: Scalar> CurveSource<F> for SynthTruth<F> {
    fn curve_at(&self, temp_c: F) -> Result<Arc<ConstantTempCurve<F>>, FieldError> {
        let f = &self.family;
        if temp_c <= f.base_temp_c {
            let t_pup = f.pupation_degree_hours();
            let n = self.points;
            return Ok(Arc::new(ConstantTempCurve::from_samples(
                temp_c,
                t_pup,
                vec![f.hatch_len_mm; n],
                vec![F::zero(); n],
            )));
        }
        let curve = f
            .truth_curve(temp_c, self.points)
            .map_err(|e| FieldError::InvalidDocument(e.to_string()))?;
        Ok(Arc::new(curve))
    }
}

/// RNG for batch `batch` and observation time index `time_index`.
pub fn cell_rng(seed: u64, batch: usize, time_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((batch as u64) << 32) | time_index as u64);
    rng
}

/// `n` draws of `mean + sd * Z`.
pub fn noisy_lengths<F: Scalar>(mean: F, sd: F, n: usize, rng: &mut ChaCha8Rng) -> Vec<F> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mean + sd * F::lit(z)
        })
        .collect()
}

/// Experiment at each temperature with `times_per_temp` equally spaced
/// observation times on `[0, t_pup(T)]` and `replicates` noisy lengths each.
pub fn synth_dataset<F: Scalar>(
    family: &SynthFamily<F>,
    temps: &[F],
    times_per_temp: usize,
    replicates: usize,
    seed: u64,
) -> Result<ExperimentalDataset<F>, SynthError> {
    family.validate()?;
    if times_per_temp < 2 || replicates == 0 {
        return Err(SynthError::InvalidFamily(
            "need at least two observation times and one replicate".into(),
        ));
    }
    let mut batches = Vec::with_capacity(temps.len());
    for (k, &temp) in temps.iter().enumerate() {
        let times = linspace(F::zero(), family.t_pup(temp)?, times_per_temp);
        let observations = times
            .into_iter()
            .enumerate()
            .map(|(j, t)| {
                let mean = family.length(temp, t)?;
                let mut rng = cell_rng(seed, k, j);
                Ok(TimePoint {
                    time_h: t,
                    lengths_mm: noisy_lengths(mean, family.noise_sd_mm, replicates, &mut rng),
                })
            })
            .collect::<Result<_, SynthError>>()?;
        batches.push(TemperatureBatch { temperature_c: temp, observations });
    }
    Ok(ExperimentalDataset::new(batches)?)
}
