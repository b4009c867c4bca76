//! Robustness studies of the hatching-time estimator under temperature error.
//!
//! Each replicate plants a hatching time, draws noisy larval lengths from the
//! noise-free trajectory under the true temperatures and estimates the hatching
//! time from a corrupted temperature record. All cells of a study share the
//! same standard normal draws per replicate, scaled by the cell parameter.
//!
//! Replicate `r` reads its length noise from stream `(r, 0)` and its
//! temperature noise from stream `(r, 1)` of [`cell_rng`].

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{parse_temperature_csv, CaseObservation, DataError, Stage, TemperatureProfile};
use crate::dynamics::{reconstruct_growth, CurveSource, DynamicsError, Phase};
use crate::inference::{estimate_case, stats, EstimateOptions};
use crate::scalar::Scalar;
use crate::synth::{cell_rng, noisy_lengths};

/// Hourly synthetic weather series on `[-240, 0]` with a diurnal cycle, a
/// slow warming trend and autocorrelated fluctuations (mean about 14.3 °C).
pub const DIURNAL_PROFILE_CSV: &str = include_str!("../data/diurnal_profile.csv");

/// Temperature pairs drawn per station-correlation replicate.
pub const STATION_PAIRS: usize = 250;
/// Pairs used for the scene-on-station calibration (one fourth, rounded
/// down).
pub const CALIBRATION_PAIRS: usize = STATION_PAIRS / 4;
pub const STATION_MEAN_C: f64 = 15.0;
pub const STATION_VARIANCE: f64 = 0.5;
pub const CONST_TEMP_C: f64 = 10.0;
pub const CONST_WINDOW_H: (f64, f64) = (-200.0, 0.0);

pub fn diurnal_profile<F: Scalar>() -> TemperatureProfile<F> {
    parse_temperature_csv(DIURNAL_PROFILE_CSV.as_bytes()).expect("bundled profile is valid")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),
    #[error("planted trajectory failed: {0}")]
    Truth(#[from] DynamicsError),
    #[error("planted hatching time {t_h} h leads to pupation before collection")]
    PlantedPupated { t_h: f64 },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    ConstTempNoise,
    StationCorrelation,
    VaryingTempNoise,
}

impl Study {
    /// Name of the parameter varied across cells.
    pub fn param_name(self) -> &'static str {
        match self {
            Study::StationCorrelation => "rho_t",
            _ => "sigma_t",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Study::ConstTempNoise => "const-temp-noise",
            Study::StationCorrelation => "station-correlation",
            Study::VaryingTempNoise => "varying-temp-noise",
        })
    }
}

impl FromStr for Study {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "1" | "const-temp-noise" => Ok(Study::ConstTempNoise),
            "2" | "station" | "station-correlation" => Ok(Study::StationCorrelation),
            "3" | "varying-temp-noise" => Ok(Study::VaryingTempNoise),
            _ => Err(format!(
                "unknown study `{s}` (expected const-temp-noise, station-correlation or varying-temp-noise)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct StudyConfig<F> {
    pub study: Study,
    pub replicates: usize,
    pub n_lengths: usize,
    /// Temperature error sd per cell (studies 1 and 3); zero is a noiseless
    /// control.
    pub sigma_t: Vec<F>,
    /// Scene/station correlation per cell (study 2); one is a perfect
    /// prediction control.
    pub rho_t: Vec<F>,
    /// Sd of the simulated larval lengths around the trajectory; zero by
    /// default, so a cell varies only through its temperature error.
    pub length_sd_mm: F,
    /// Planted hatching time.
    pub t_h: F,
    pub seed: u64,
    /// Euler step.
    pub dt: F,
}

impl<F: Scalar> StudyConfig<F> {
    pub fn new(study: Study) -> Self {
        StudyConfig {
            study,
            replicates: 1000,
            n_lengths: 20,
            sigma_t: [0.1, 0.25, 0.75, 1.0].map(F::lit).to_vec(),
            rho_t: [0.9, 0.7].map(F::lit).to_vec(),
            length_sd_mm: F::zero(),
            t_h: F::lit(-100.0),
            seed: 1,
            dt: F::one(),
        }
    }

    /// Parameters of the cells that are run.
    pub fn params(&self) -> &[F] {
        match self.study {
            Study::StationCorrelation => &self.rho_t,
            _ => &self.sigma_t,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.replicates == 0 || self.n_lengths == 0 {
            return bad("replicates and n_lengths must be at least 1".into());
        }
        if self.params().is_empty() {
            return bad(format!("no {} values given", self.study.param_name()));
        }
        if self.study == Study::StationCorrelation {
            if let Some(r) = self.rho_t.iter().find(|r| !(**r > -F::one() && **r <= F::one())) {
                return bad(format!("rho_t = {r} is outside (-1, 1]"));
            }
        } else if let Some(s) = self.sigma_t.iter().find(|s| !(**s >= F::zero() && s.is_finite())) {
            return bad(format!("sigma_t = {s} must be finite and non-negative"));
        }
        if !(self.length_sd_mm >= F::zero() && self.dt > F::zero()) {
            return bad("length_sd_mm must be non-negative and dt positive".into());
        }
        Ok(())
    }
}

/// Estimates of one cell, in replicate order; `None` marks a failed
/// estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct CellResult<F> {
    pub param: F,
    pub estimates: Vec<Option<F>>,
}

impl<F: Scalar> CellResult<F> {
    pub fn successes(&self) -> Vec<f64> {
        self.estimates.iter().flatten().map(|t| t.as_f64()).collect()
    }

    pub fn failures(&self) -> usize {
        self.estimates.iter().filter(|e| e.is_none()).count()
    }

    pub fn summary(&self) -> CellSummary {
        let ok = self.successes();
        let (mean, sd) = stats::mean_sd(&ok);
        CellSummary { param: self.param.as_f64(), successes: ok.len(), failures: self.failures(), mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub param: f64,
    pub successes: usize,
    pub failures: usize,
    pub mean: f64,
    /// Sample standard deviation (`n - 1`); zero for a single success.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study: Study,
    pub param_name: String,
    pub planted_t_h: f64,
    pub replicates: usize,
    pub n_lengths: usize,
    pub seed: u64,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub param: f64,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct StudyResult<F> {
    pub config: StudyConfig<F>,
    pub cells: Vec<CellResult<F>>,
}

impl<F: Scalar> StudyResult<F> {
    pub fn summary(&self) -> StudySummary {
        let c = &self.config;
        StudySummary {
            study: c.study,
            param_name: c.study.param_name().to_string(),
            planted_t_h: c.t_h.as_f64(),
            replicates: c.replicates,
            n_lengths: c.n_lengths,
            seed: c.seed,
            cells: self.cells.iter().map(CellResult::summary).collect(),
        }
    }

    /// Counts of successful estimates in bins of `width` hours centred on
    /// multiples of `width`.
    pub fn histogram(&self, width: f64) -> Vec<HistogramBin> {
        assert!(width > 0.0, "bin width must be positive");
        let mut out = Vec::new();
        for cell in &self.cells {
            let mut counts = std::collections::BTreeMap::<i64, usize>::new();
            for t in cell.successes() {
                *counts.entry((t / width).round() as i64).or_default() += 1;
            }
            out.extend(counts.into_iter().map(|(k, count)| {
                let centre = k as f64 * width;
                HistogramBin {
                    param: cell.param.as_f64(),
                    bin_lo: centre - width / 2.0,
                    bin_hi: centre + width / 2.0,
                    count,
                }
            }));
        }
        out
    }

    /// `study,param,replicate,t_hat`, successful estimates only.
    pub fn write_samples_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "study,param,replicate,t_hat")?;
        for cell in &self.cells {
            for (r, t) in cell.estimates.iter().enumerate() {
                if let Some(t) = t {
                    writeln!(out, "{},{},{},{}", self.config.study, cell.param, r, t)?;
                }
            }
        }
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, mut out: W, width: f64) -> io::Result<()> {
        writeln!(out, "study,param,bin_lo,bin_hi,count")?;
        for b in self.histogram(width) {
            writeln!(out, "{},{},{},{},{}", self.config.study, b.param, b.bin_lo, b.bin_hi, b.count)?;
        }
        Ok(())
    }
}

/// Ordinary least squares of `y` on `x`: `(intercept, slope)` with slope
/// `Sxy / Sxx`.
pub fn ols<F: Scalar>(x: &[F], y: &[F]) -> (F, F) {
    assert_eq!(x.len(), y.len(), "ols needs paired samples");
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let sxy: F = x.iter().zip(y).map(|(a, b)| (*a - mx) * (*b - my)).sum();
    let sxx: F = x.iter().map(|a| (*a - mx) * (*a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Phase at collection of the planted trajectory as an observed stage.
fn planted<F: Scalar, S: CurveSource<F> + ?Sized>(
    source: &S,
    profile: &TemperatureProfile<F>,
    t_h: F,
    dt: F,
) -> Result<(F, Stage), SimError> {
    let traj = reconstruct_growth(source, profile, t_h, F::zero(), dt)?;
    match traj.final_phase() {
        Phase::Feeding => Ok((traj.final_length(), Stage::Feeding)),
        Phase::PostFeeding => Ok((traj.final_length(), Stage::PostFeeding)),
        Phase::Pupated => match traj.pupation_time {
            Some(tp) if tp >= F::zero() => Ok((traj.final_length(), Stage::PostFeeding)),
            _ => Err(SimError::PlantedPupated { t_h: t_h.as_f64() }),
        },
    }
}

fn estimate_one<F: Scalar, S: CurveSource<F> + ?Sized>(
    source: &S,
    profile: &TemperatureProfile<F>,
    obs: &CaseObservation<F>,
    dt: F,
) -> Option<F> {
    let options = EstimateOptions { dt, step: F::one(), parallel: false };
    match estimate_case(source, profile, obs, &options) {
        Ok(est) => Some(est.t_hat_h),
        Err(e) => {
            log::debug!("replicate failed: {e}");
            None
        }
    }
}

fn check_window<F: Scalar>(config: &StudyConfig<F>, profile: &TemperatureProfile<F>) -> Result<F, SimError> {
    let (lo, hi) = profile.span();
    if !(hi == F::zero() && config.t_h > lo && config.t_h < hi) {
        return Err(SimError::InvalidConfig(format!(
            "the profile must end at collection time 0 and contain the planted hatching time {} (span [{lo}, {hi}])",
            config.t_h
        )));
    }
    Ok(lo)
}

/// Study with i.i.d. Gaussian errors added to every node of the true
/// profile.
fn run_noise_study<F: Scalar, S: CurveSource<F> + ?Sized>(
    config: &StudyConfig<F>,
    source: &S,
    truth: &TemperatureProfile<F>,
) -> Result<StudyResult<F>, SimError> {
    config.validate()?;
    let t_a = check_window(config, truth)?;
    let (mean_len, stage) = planted(source, truth, config.t_h, config.dt)?;
    let nodes = truth.temps().len();
    let per_replicate: Vec<Vec<Option<F>>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let lengths = noisy_lengths(mean_len, config.length_sd_mm, config.n_lengths, &mut cell_rng(config.seed, r, 0));
            let obs = CaseObservation::new(lengths, t_a, F::zero(), stage);
            let z = normals(&mut cell_rng(config.seed, r, 1), nodes);
            config
                .sigma_t
                .iter()
                .map(|&sigma| {
                    let temps = truth.temps().iter().zip(&z).map(|(t, z)| *t + sigma * F::lit(*z)).collect();
                    let noisy = truth.with_temps(temps).ok()?;
                    estimate_one(source, &noisy, &obs, config.dt)
                })
                .collect()
        })
        .collect();
    Ok(collect_cells(config, per_replicate))
}

fn collect_cells<F: Scalar>(config: &StudyConfig<F>, per_replicate: Vec<Vec<Option<F>>>) -> StudyResult<F> {
    let cells = config
        .params()
        .iter()
        .enumerate()
        .map(|(i, &param)| CellResult { param, estimates: per_replicate.iter().map(|row| row[i]).collect() })
        .collect();
    StudyResult { config: config.clone(), cells }
}

/// Constant 10 °C on `[-200, 0]`, sampled hourly, with i.i.d. errors of sd
/// `sigma_t` on every hourly temperature used for estimation.
pub fn run_const_temp_noise<F: Scalar, S: CurveSource<F> + ?Sized>(
    config: &StudyConfig<F>,
    source: &S,
) -> Result<StudyResult<F>, SimError> {
    let (lo, hi) = CONST_WINDOW_H;
    let hours = (hi - lo) as usize + 1;
    let truth = TemperatureProfile::hourly(F::lit(lo), vec![F::lit(CONST_TEMP_C); hours])?;
    run_noise_study(config, source, &truth)
}

/// Same protocol as [`run_const_temp_noise`] on a varying profile ending at
/// collection time 0.
pub fn run_varying_temp_noise<F: Scalar, S: CurveSource<F> + ?Sized>(
    config: &StudyConfig<F>,
    source: &S,
    profile: &TemperatureProfile<F>,
) -> Result<StudyResult<F>, SimError> {
    run_noise_study(config, source, profile)
}

/// Scene temperatures predicted from a correlated weather station.
///
/// Per replicate, 250 (scene, station) pairs are drawn with mean 15 °C,
/// variance 0.5 and correlation `rho_t`. The scene is regressed on the station
/// over the first 62 pairs; the remaining 188 scene temperatures form the true
/// hourly profile ending at 0 and their predictions the estimation profile.
pub fn run_station_correlation<F: Scalar, S: CurveSource<F> + ?Sized>(
    config: &StudyConfig<F>,
    source: &S,
) -> Result<StudyResult<F>, SimError> {
    config.validate()?;
    let scene_hours = STATION_PAIRS - CALIBRATION_PAIRS;
    let start = -F::from_count(scene_hours - 1);
    if !(config.t_h > start && config.t_h < F::zero()) {
        return Err(SimError::InvalidConfig(format!(
            "planted hatching time {} is outside the {scene_hours} h scene window",
            config.t_h
        )));
    }
    let sd = F::lit(STATION_VARIANCE.sqrt());
    let mean = F::lit(STATION_MEAN_C);
    let per_replicate: Vec<Vec<Option<F>>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let z_len = normals(&mut cell_rng(config.seed, r, 0), config.n_lengths);
            let z = normals(&mut cell_rng(config.seed, r, 1), 2 * STATION_PAIRS);
            config
                .rho_t
                .iter()
                .map(|&rho| {
                    let resid = (F::one() - rho * rho).max(F::zero()).sqrt();
                    let (scene, station): (Vec<F>, Vec<F>) = z
                        .chunks_exact(2)
                        .map(|p| {
                            let (z1, z2) = (F::lit(p[0]), F::lit(p[1]));
                            (mean + sd * z1, mean + sd * (rho * z1 + resid * z2))
                        })
                        .unzip();
                    let (a, b) = ols(&station[..CALIBRATION_PAIRS], &scene[..CALIBRATION_PAIRS]);
                    let truth = TemperatureProfile::hourly(start, scene[CALIBRATION_PAIRS..].to_vec()).ok()?;
                    let predicted =
                        truth.with_temps(station[CALIBRATION_PAIRS..].iter().map(|w| a + b * *w).collect()).ok()?;
                    let (mean_len, stage) = planted(source, &truth, config.t_h, config.dt).ok()?;
                    let lengths =
                        z_len.iter().map(|z| mean_len + config.length_sd_mm * F::lit(*z)).collect();
                    let obs = CaseObservation::new(lengths, start, F::zero(), stage);
                    estimate_one(source, &predicted, &obs, config.dt)
                })
                .collect()
        })
        .collect();
    Ok(collect_cells(config, per_replicate))
}

/// Runs the configured study; `profile` is used by the varying-temperature
/// study and defaults to [`diurnal_profile`].
pub fn run_study<F: Scalar, S: CurveSource<F> + ?Sized>(
    config: &StudyConfig<F>,
    source: &S,
    profile: Option<&TemperatureProfile<F>>,
) -> Result<StudyResult<F>, SimError> {
    match config.study {
        Study::ConstTempNoise => run_const_temp_noise(config, source),
        Study::StationCorrelation => run_station_correlation(config, source),
        Study::VaryingTempNoise => match profile {
            Some(p) => run_varying_temp_noise(config, source, p),
            None => run_varying_temp_noise(config, source, &diurnal_profile()),
        },
    }
}
