//! Growth curves at arbitrary temperatures.
//!
//! Registered shapes, shape derivatives and warp coefficients are smoothed
//! across temperature with Nadaraya–Watson weights. A query at temperature `T`
//! composes the blended shape with the blended warp:
//! `L_T(t) = S_T(w_T(t))` and `L'_T(t) = S'_T(w_T(t)) w'_T(t)`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::ConstantTempCurve;
use crate::data::ExperimentalDataset;
use crate::interp;
use crate::kernel::Kernel;
use crate::registration::{
    self, find_landmarks, GrowthShape, Registration, RegistrationError, WarpingQuadratic,
    DEFAULT_SHAPE_POINTS,
};
use crate::scalar::{linspace, Scalar};
use crate::smoother::{batch_summaries, local_linear_fit, SmoothError, SmootherConfig, DEFAULT_GRID_POINTS};

/// Format tag written into serialized fields.
pub const FIELD_FORMAT: &str = "larvest-field/1";

pub const DEFAULT_DEV_THRESHOLD_C: f64 = 1.0;

const CACHE_LIMIT: usize = 1 << 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("smoothing the {temperature} °C batch failed: {source}")]
    Smooth { temperature: f64, source: SmoothError },
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error("a growth field needs at least two experimental temperatures, found {0}")]
    TooFewTemperatures(usize),
    #[error("bandwidth `{name}` must be positive and finite, got {value}")]
    InvalidBandwidth { name: &'static str, value: f64 },
    #[error("no experimental temperature within the kernel window at {temperature} °C (nearest is {nearest} °C)")]
    EmptyWindow { temperature: f64, nearest: f64 },
    #[error("blended warp at {temperature} °C is not strictly increasing")]
    NonMonotoneBlend { temperature: f64 },
    #[error("invalid field document: {0}")]
    InvalidDocument(String),
}

/// Temperature bandwidths (°C) for shapes, warps and their derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Bandwidths<F> {
    pub shape: F,
    pub warp: F,
    pub shape_deriv: F,
    pub warp_deriv: F,
}

impl<F: Scalar> Bandwidths<F> {
    pub fn shared(h: F) -> Self {
        Bandwidths { shape: h, warp: h, shape_deriv: h, warp_deriv: h }
    }

    fn validate(&self) -> Result<(), FieldError> {
        for (name, v) in [
            ("shape", self.shape),
            ("warp", self.warp),
            ("shape_deriv", self.shape_deriv),
            ("warp_deriv", self.warp_deriv),
        ] {
            if !(v > F::zero() && v.is_finite()) {
                return Err(FieldError::InvalidBandwidth { name, value: v.as_f64() });
            }
        }
        Ok(())
    }
}

/// Twice the widest gap between consecutive temperatures.
pub fn default_temperature_bandwidth<F: Scalar>(temps: &[F]) -> F {
    let gap = temps.windows(2).map(|w| w[1] - w[0]).fold(F::zero(), F::max);
    F::lit(2.0) * gap
}

#[derive(Debug, Clone)]
pub struct FieldConfig<F> {
    pub smoother: SmootherConfig<F>,
    /// Shared standardized time of maximum length; `None` picks the default.
    pub alpha: Option<F>,
    pub shape_points: usize,
    pub kernel: Kernel,
    /// `None` uses [`default_temperature_bandwidth`] for all four smoothers.
    pub bandwidths: Option<Bandwidths<F>>,
    pub dev_threshold_c: F,
    /// Points on each queried constant-temperature curve.
    pub curve_points: usize,
    /// Drop batches whose smoothed curve peaks at an end of its time range
    /// instead of failing.
    pub skip_monotone: bool,
}

impl<F: Scalar> Default for FieldConfig<F> {
    fn default() -> Self {
        FieldConfig {
            smoother: SmootherConfig::default(),
            alpha: None,
            shape_points: DEFAULT_SHAPE_POINTS,
            kernel: Kernel::Gaussian,
            bandwidths: None,
            dev_threshold_c: F::lit(DEFAULT_DEV_THRESHOLD_C),
            curve_points: DEFAULT_GRID_POINTS,
            skip_monotone: false,
        }
    }
}

/// One registered experimental temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct FieldEntry<F> {
    pub temperature_c: F,
    pub warp: WarpingQuadratic<F>,
    pub shape_values: Vec<F>,
    pub shape_derivs: Vec<F>,
}

impl<F: Scalar> FieldEntry<F> {
    pub fn shape(&self) -> GrowthShape<F> {
        GrowthShape {
            temperature_c: self.temperature_c,
            grid: linspace(F::zero(), F::one(), self.shape_values.len()),
            values: self.shape_values.clone(),
            derivs: self.shape_derivs.clone(),
        }
    }
}

/// Normalized Nadaraya–Watson weights `K((T_k - T)/h) / Σ K`.
pub fn nw_weights<F: Scalar>(
    temps: &[F],
    at: F,
    kernel: Kernel,
    h: F,
) -> Result<Vec<F>, FieldError> {
    let us: Vec<F> = temps.iter().map(|tk| (*tk - at) / h).collect();
    let raw: Vec<F> = match kernel {
        // Shift the exponent so distant queries do not underflow to zero.
        Kernel::Gaussian => {
            let shift = us.iter().map(|u| *u * *u).fold(F::infinity(), F::min);
            us.iter().map(|u| (F::lit(-0.5) * (*u * *u - shift)).exp()).collect()
        }
        Kernel::Epanechnikov => us.iter().map(|u| kernel.weight(*u)).collect(),
    };
    let total: F = raw.iter().copied().sum();
    if !(total > F::zero()) {
        let nearest = temps
            .iter()
            .copied()
            .min_by(|a, b| (*a - at).abs().partial_cmp(&(*b - at).abs()).unwrap())
            .unwrap_or(at);
        return Err(FieldError::EmptyWindow { temperature: at.as_f64(), nearest: nearest.as_f64() });
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Pointwise Nadaraya–Watson average of functions sampled on a shared grid.
pub fn smooth_across_temperature<F: Scalar>(
    samples: &[(F, &[F])],
    at: F,
    kernel: Kernel,
    h: F,
) -> Result<Vec<F>, FieldError> {
    let temps: Vec<F> = samples.iter().map(|(t, _)| *t).collect();
    let weights = nw_weights(&temps, at, kernel, h)?;
    Ok(blend(&weights, samples.iter().map(|(_, f)| *f)))
}

fn blend<'a, F: Scalar>(weights: &[F], funcs: impl Iterator<Item = &'a [F]>) -> Vec<F> {
    let mut out: Vec<F> = Vec::new();
    for (w, f) in weights.iter().zip(funcs) {
        if out.is_empty() {
            out = vec![F::zero(); f.len()];
        }
        if *w == F::zero() {
            continue;
        }
        for (o, v) in out.iter_mut().zip(f) {
            *o += *w * *v;
        }
    }
    out
}

/// Blended shape and warp at one temperature.
#[derive(Debug, Clone)]
pub struct FieldBlend<F> {
    pub shape_values: Vec<F>,
    pub shape_derivs: Vec<F>,
    pub a: F,
    pub b: F,
    pub da: F,
    pub db: F,
    /// Root of `a t + b t² = 1`.
    pub t_pup: F,
}

impl<F: Scalar> FieldBlend<F> {
    pub fn warp(&self, t: F) -> F {
        t * (self.a + self.b * t)
    }

    pub fn warp_deriv(&self, t: F) -> F {
        self.da + F::lit(2.0) * self.db * t
    }

    pub fn shape_value(&self, u: F) -> F {
        interp::cubic(F::zero(), F::one(), &self.shape_values, u)
    }

    pub fn shape_deriv(&self, u: F) -> F {
        interp::linear(F::zero(), F::one(), &self.shape_derivs, u)
    }
}

#[derive(Debug, Default)]
struct CurveCache<F> {
    map: RwLock<HashMap<u64, Arc<ConstantTempCurve<F>>>>,
}

/// Growth model over temperature, fitted from experimental batches.
#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GrowthField<F> {
    format: String,
    kernel: Kernel,
    bandwidths: Bandwidths<F>,
    dev_threshold_c: F,
    alpha: F,
    curve_points: usize,
    entries: Vec<FieldEntry<F>>,
    #[serde(skip)]
    cache: CurveCache<F>,
    #[serde(skip)]
    cache_disabled: AtomicBool,
    #[serde(skip)]
    warned_above: AtomicBool,
}

impl<F: Scalar> Clone for GrowthField<F> {
    fn clone(&self) -> Self {
        GrowthField {
            format: self.format.clone(),
            kernel: self.kernel,
            bandwidths: self.bandwidths,
            dev_threshold_c: self.dev_threshold_c,
            alpha: self.alpha,
            curve_points: self.curve_points,
            entries: self.entries.clone(),
            cache: CurveCache::default(),
            cache_disabled: AtomicBool::new(self.cache_disabled.load(Ordering::Relaxed)),
            warned_above: AtomicBool::new(false),
        }
    }
}

impl<F: Scalar> PartialEq for GrowthField<F> {
    fn eq(&self, other: &Self) -> bool {
        self.kernel == other.kernel
            && self.bandwidths == other.bandwidths
            && self.dev_threshold_c == other.dev_threshold_c
            && self.alpha == other.alpha
            && self.curve_points == other.curve_points
            && self.entries == other.entries
    }
}

impl<F: Scalar> GrowthField<F> {
    /// Smooths, registers and assembles the field from raw measurements.
    pub fn fit(dataset: &ExperimentalDataset<F>, config: &FieldConfig<F>) -> Result<Self, FieldError> {
        let mut curves = Vec::with_capacity(dataset.batches().len());
        for batch in dataset.batches() {
            let summary = batch_summaries(batch);
            let curve = local_linear_fit(&summary, &config.smoother).map_err(|source| {
                FieldError::Smooth { temperature: batch.temperature_c.as_f64(), source }
            })?;
            if config.skip_monotone {
                if let Err(e @ RegistrationError::BoundaryMaximum { .. }) = find_landmarks(&curve) {
                    log::warn!("excluding batch: {e}");
                    continue;
                }
            }
            curves.push(curve);
        }
        if curves.len() < 2 {
            return Err(FieldError::TooFewTemperatures(curves.len()));
        }
        let (alpha, regs) = registration::register_all(curves, config.alpha, config.shape_points)?;
        Self::from_registrations(alpha, regs, config)
    }

    pub fn from_registrations(
        alpha: F,
        registrations: Vec<Registration<F>>,
        config: &FieldConfig<F>,
    ) -> Result<Self, FieldError> {
        let entries = registrations
            .into_iter()
            .map(|r| FieldEntry {
                temperature_c: r.curve.temperature_c,
                warp: r.warp,
                shape_values: r.shape.values,
                shape_derivs: r.shape.derivs,
            })
            .collect::<Vec<_>>();
        let temps: Vec<F> = entries.iter().map(|e| e.temperature_c).collect();
        let bandwidths = config
            .bandwidths
            .unwrap_or_else(|| Bandwidths::shared(default_temperature_bandwidth(&temps)));
        let field = GrowthField {
            format: FIELD_FORMAT.to_string(),
            kernel: config.kernel,
            bandwidths,
            dev_threshold_c: config.dev_threshold_c,
            alpha,
            curve_points: config.curve_points,
            entries,
            cache: CurveCache::default(),
            cache_disabled: AtomicBool::new(false),
            warned_above: AtomicBool::new(false),
        };
        field.validate()?;
        Ok(field)
    }

    fn validate(&self) -> Result<(), FieldError> {
        if self.format != FIELD_FORMAT {
            return Err(FieldError::InvalidDocument(format!(
                "unsupported format `{}` (expected `{FIELD_FORMAT}`)",
                self.format
            )));
        }
        if self.entries.len() < 2 {
            return Err(FieldError::TooFewTemperatures(self.entries.len()));
        }
        self.bandwidths.validate()?;
        if self.entries.windows(2).any(|w| w[0].temperature_c >= w[1].temperature_c) {
            return Err(FieldError::InvalidDocument("temperatures must strictly increase".into()));
        }
        let m = self.entries[0].shape_values.len();
        if m < 2
            || self.entries.iter().any(|e| e.shape_values.len() != m || e.shape_derivs.len() != m)
        {
            return Err(FieldError::InvalidDocument("shape grids differ in length".into()));
        }
        if self.curve_points < crate::curve::MIN_GRID_POINTS {
            return Err(FieldError::InvalidDocument(format!(
                "curve_points must be at least {}",
                crate::curve::MIN_GRID_POINTS
            )));
        }
        if self.dev_threshold_c >= self.entries[0].temperature_c {
            return Err(FieldError::InvalidDocument(
                "developmental threshold must lie below the lowest temperature".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string_pretty(self).expect("field serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        let field: Self =
            serde_json::from_str(text).map_err(|e| FieldError::InvalidDocument(e.to_string()))?;
        field.validate()?;
        Ok(field)
    }

    pub fn entries(&self) -> &[FieldEntry<F>] {
        &self.entries
    }

    pub fn temperatures(&self) -> Vec<F> {
        self.entries.iter().map(|e| e.temperature_c).collect()
    }

    pub fn temp_range(&self) -> (F, F) {
        (self.entries[0].temperature_c, self.entries[self.entries.len() - 1].temperature_c)
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn bandwidths(&self) -> Bandwidths<F> {
        self.bandwidths
    }

    pub fn dev_threshold_c(&self) -> F {
        self.dev_threshold_c
    }

    pub fn curve_points(&self) -> usize {
        self.curve_points
    }

    /// Turns the per-temperature query cache on or off.
    pub fn set_cache_enabled(&self, enabled: bool) {
        self.cache_disabled.store(!enabled, Ordering::Relaxed);
        if !enabled {
            self.cache.map.write().unwrap().clear();
        }
    }

    /// Blended shape and warp at `temp`, with no extrapolation handling.
    pub fn blend_at(&self, temp: F) -> Result<FieldBlend<F>, FieldError> {
        let temps = self.temperatures();
        let bw = &self.bandwidths;
        let w_s = nw_weights(&temps, temp, self.kernel, bw.shape)?;
        let w_ds = nw_weights(&temps, temp, self.kernel, bw.shape_deriv)?;
        let w_w = nw_weights(&temps, temp, self.kernel, bw.warp)?;
        let w_dw = nw_weights(&temps, temp, self.kernel, bw.warp_deriv)?;

        let shape_values = blend(&w_s, self.entries.iter().map(|e| e.shape_values.as_slice()));
        let shape_derivs = blend(&w_ds, self.entries.iter().map(|e| e.shape_derivs.as_slice()));
        let coef = |w: &[F], pick: fn(&WarpingQuadratic<F>) -> F| -> F {
            w.iter().zip(&self.entries).map(|(w, e)| *w * pick(&e.warp)).sum()
        };
        let (a, b) = (coef(&w_w, |q| q.a), coef(&w_w, |q| q.b));
        let (da, db) = (coef(&w_dw, |q| q.a), coef(&w_dw, |q| q.b));

        let non_monotone = || FieldError::NonMonotoneBlend { temperature: temp.as_f64() };
        let disc = a * a + F::lit(4.0) * b;
        if !(a > F::zero() && disc > F::zero()) {
            return Err(non_monotone());
        }
        let t_pup = F::lit(2.0) / (a + disc.sqrt());
        let two = F::lit(2.0);
        if !(a + two * b * t_pup > F::zero() && da > F::zero() && da + two * db * t_pup > F::zero()) {
            return Err(non_monotone());
        }
        Ok(FieldBlend { shape_values, shape_derivs, a, b, da, db, t_pup })
    }

    /// Constant-temperature curve at `temp`, served from the cache when
    /// possible.
    pub fn growth_at(&self, temp: F) -> Result<Arc<ConstantTempCurve<F>>, FieldError> {
        if self.cache_disabled.load(Ordering::Relaxed) {
            return self.evaluate(temp).map(Arc::new);
        }
        let key = temp.key_bits();
        if let Some(hit) = self.cache.map.read().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let curve = Arc::new(self.evaluate(temp)?);
        let mut map = self.cache.map.write().unwrap();
        if map.len() >= CACHE_LIMIT {
            map.clear();
        }
        Ok(Arc::clone(map.entry(key).or_insert(curve)))
    }

    /// Uncached query.
    ///
    /// Between the developmental threshold and the lowest experimental
    /// temperature `T_1` the curve at `T_1` is slowed down in time by
    /// `(T - dev) / (T_1 - dev)`; at or below the threshold growth stops.
    pub fn evaluate(&self, temp: F) -> Result<ConstantTempCurve<F>, FieldError> {
        let (t_lo, t_hi) = self.temp_range();
        let n = self.curve_points;
        if temp <= self.dev_threshold_c {
            let base = self.blend_at(t_lo)?;
            let hatch = base.shape_value(F::zero());
            return Ok(ConstantTempCurve::from_samples(
                temp,
                base.t_pup,
                vec![hatch; n],
                vec![F::zero(); n],
            ));
        }
        if temp > t_hi && !self.warned_above.swap(true, Ordering::Relaxed) {
            log::warn!(
                "temperature {temp} °C is above the warmest experimental temperature {t_hi} °C; extrapolating"
            );
        }
        let (blend, rate) = if temp < t_lo {
            let rate = (temp - self.dev_threshold_c) / (t_lo - self.dev_threshold_c);
            (self.blend_at(t_lo)?, rate)
        } else {
            (self.blend_at(temp)?, F::one())
        };
        let t_pup = blend.t_pup / rate;
        let grid = linspace(F::zero(), t_pup, n);
        let mut values = Vec::with_capacity(n);
        let mut derivs = Vec::with_capacity(n);
        for (i, &t) in grid.iter().enumerate() {
            let s = if i + 1 == n { blend.t_pup } else { rate * t };
            let u = blend.warp(s).min(F::one());
            values.push(blend.shape_value(u));
            derivs.push(blend.shape_deriv(u) * blend.warp_deriv(s) * rate);
        }
        Ok(ConstantTempCurve::from_samples(temp, t_pup, values, derivs))
    }
}
