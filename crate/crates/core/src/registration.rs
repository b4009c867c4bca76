//! Landmark registration of constant-temperature growth curves.
//!
//! Each curve is split into a growth shape on standardized time `[0, 1]` and a
//! strictly increasing quadratic warp `w(t) = a t + b t²` that sends hatching
//! to 0, the time of maximum length to `alpha` and pupation to 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::ConstantTempCurve;
use crate::interp;
use crate::scalar::{linspace, Scalar};

pub const DEFAULT_SHAPE_POINTS: usize = 2048;

/// Fraction of the admissible alpha interval kept clear at each end.
const ALPHA_MARGIN: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error(
        "growth curve at {temperature} °C has its maximum at the {} of its time range; \
         the landmark warp would be degenerate",
        if *at_start { "start" } else { "end" }
    )]
    BoundaryMaximum { temperature: f64, at_start: bool },
    #[error("quadratic warp is not strictly increasing: w'(0) = {slope_start}, w'(t_pup) = {slope_end}")]
    MonotonicityViolation { slope_start: f64, slope_end: f64 },
    #[error("standardized time {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("landmarks must satisfy 0 < t_max < t_pup and 0 < alpha < 1 (t_max = {t_max}, t_pup = {t_pup}, alpha = {alpha})")]
    InvalidLandmarks { t_max: f64, t_pup: f64, alpha: f64 },
    #[error("no common alpha keeps every warp monotone (admissible range [{lo}, {hi}] is empty)")]
    NoCommonAlpha { lo: f64, hi: f64 },
}

/// `w(t) = a t + b t²` on `[0, t_pup]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct WarpingQuadratic<F> {
    pub a: F,
    pub b: F,
    pub t_pup: F,
    pub alpha: F,
    pub t_max: F,
}

impl<F: Scalar> WarpingQuadratic<F> {
    #[inline]
    pub fn eval(&self, t: F) -> F {
        t * (self.a + self.b * t)
    }

    #[inline]
    pub fn deriv(&self, t: F) -> F {
        self.a + F::lit(2.0) * self.b * t
    }

    pub fn invert(&self, u: F) -> Result<F, RegistrationError> {
        invert_warping(self, u)
    }

    /// Root of `w(t) = u` on the increasing branch, no range check.
    #[inline]
    pub fn invert_unchecked(&self, u: F) -> F {
        if u == F::zero() {
            return F::zero();
        }
        if self.b == F::zero() {
            return u / self.a;
        }
        let disc = (self.a * self.a + F::lit(4.0) * self.b * u).max(F::zero());
        F::lit(2.0) * u / (self.a + disc.sqrt())
    }
}

/// Time of maximum length (refined by a parabola through the three grid points
/// around the discrete maximum) and pupation time.
pub fn find_landmarks<F: Scalar>(curve: &ConstantTempCurve<F>) -> Result<(F, F), RegistrationError> {
    let m = curve.argmax_index();
    let n = curve.len();
    if m == 0 || m == n - 1 {
        return Err(RegistrationError::BoundaryMaximum {
            temperature: curve.temperature_c.as_f64(),
            at_start: m == 0,
        });
    }
    let (y0, y1, y2) = (curve.values[m - 1], curve.values[m], curve.values[m + 1]);
    let curvature = y0 - F::lit(2.0) * y1 + y2;
    let offset = if curvature < F::zero() {
        (F::lit(0.5) * (y0 - y2) / curvature).max(F::lit(-0.5)).min(F::lit(0.5))
    } else {
        F::zero()
    };
    Ok((curve.grid[m] + offset * curve.step(), curve.t_pup))
}

/// Quadratic through `(0, 0)`, `(t_max, alpha)` and `(t_pup, 1)`.
pub fn fit_warping<F: Scalar>(
    t_max: F,
    t_pup: F,
    alpha: F,
) -> Result<WarpingQuadratic<F>, RegistrationError> {
    if !(F::zero() < t_max && t_max < t_pup && F::zero() < alpha && alpha < F::one()) {
        return Err(RegistrationError::InvalidLandmarks {
            t_max: t_max.as_f64(),
            t_pup: t_pup.as_f64(),
            alpha: alpha.as_f64(),
        });
    }
    let det = t_max * t_pup * (t_pup - t_max);
    let a = (alpha * t_pup * t_pup - t_max * t_max) / det;
    let b = (t_max - alpha * t_pup) / det;
    let warp = WarpingQuadratic { a, b, t_pup, alpha, t_max };
    let (slope_start, slope_end) = (warp.deriv(F::zero()), warp.deriv(t_pup));
    if !(slope_start > F::zero() && slope_end > F::zero()) {
        return Err(RegistrationError::MonotonicityViolation {
            slope_start: slope_start.as_f64(),
            slope_end: slope_end.as_f64(),
        });
    }
    Ok(warp)
}

pub fn invert_warping<F: Scalar>(w: &WarpingQuadratic<F>, u: F) -> Result<F, RegistrationError> {
    if !(u >= F::zero() && u <= F::one()) {
        return Err(RegistrationError::OutOfRange(u.as_f64()));
    }
    if u == F::one() {
        return Ok(w.t_pup);
    }
    Ok(w.invert_unchecked(u).min(w.t_pup))
}

/// Growth curve re-expressed on standardized time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GrowthShape<F> {
    pub temperature_c: F,
    pub grid: Vec<F>,
    pub values: Vec<F>,
    pub derivs: Vec<F>,
}

impl<F: Scalar> GrowthShape<F> {
    pub fn value_at(&self, u: F) -> F {
        interp::cubic(F::zero(), F::one(), &self.values, u)
    }

    pub fn deriv_at(&self, u: F) -> F {
        interp::linear(F::zero(), F::one(), &self.derivs, u)
    }

    pub fn argmax_u(&self) -> F {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        self.grid[best]
    }

    pub fn step(&self) -> F {
        F::one() / F::from_count(self.values.len() - 1)
    }
}

/// `S = L ∘ w⁻¹` and `S' = (L' ∘ w⁻¹) / (w' ∘ w⁻¹)` on a uniform grid.
pub fn compute_shape<F: Scalar>(
    curve: &ConstantTempCurve<F>,
    warp: &WarpingQuadratic<F>,
    shape_points: usize,
) -> GrowthShape<F> {
    debug_assert!((curve.t_pup - warp.t_pup).abs() <= F::lit(1e-9) * curve.t_pup);
    let grid = linspace(F::zero(), F::one(), shape_points.max(2));
    let mut values = Vec::with_capacity(grid.len());
    let mut derivs = Vec::with_capacity(grid.len());
    for &u in &grid {
        let t = invert_warping(warp, u).expect("grid lies in [0, 1]");
        values.push(curve.value_at(t));
        derivs.push(curve.deriv_at(t) / warp.deriv(t));
    }
    GrowthShape { temperature_c: curve.temperature_c, grid, values, derivs }
}

/// Mean of the `t_max / t_pup` ratios, clamped so every quadratic warp stays
/// strictly increasing.
///
/// For a ratio `r` the interpolating quadratic is increasing on `[0, t_pup]`
/// exactly when `r² < alpha < 2r - r²`.
pub fn default_alpha<F: Scalar>(ratios: &[F]) -> Result<F, RegistrationError> {
    assert!(!ratios.is_empty());
    let two = F::lit(2.0);
    let lo = ratios.iter().map(|r| *r * *r).fold(F::neg_infinity(), F::max);
    let hi = ratios.iter().map(|r| two * *r - *r * *r).fold(F::infinity(), F::min);
    if !(lo < hi) {
        return Err(RegistrationError::NoCommonAlpha { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    let margin = F::lit(ALPHA_MARGIN) * (hi - lo);
    let mean = ratios.iter().copied().sum::<F>() / F::from_count(ratios.len());
    Ok(mean.max(lo + margin).min(hi - margin))
}

/// One registered experimental temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Registration<F> {
    pub curve: ConstantTempCurve<F>,
    pub warp: WarpingQuadratic<F>,
    pub shape: GrowthShape<F>,
}

/// Registers every curve with a shared alpha (`None` selects
/// [`default_alpha`]).
pub fn register_all<F: Scalar>(
    curves: Vec<ConstantTempCurve<F>>,
    alpha: Option<F>,
    shape_points: usize,
) -> Result<(F, Vec<Registration<F>>), RegistrationError> {
    let landmarks = curves.iter().map(find_landmarks).collect::<Result<Vec<_>, _>>()?;
    let alpha = match alpha {
        Some(a) => a,
        None => {
            let ratios: Vec<F> = landmarks.iter().map(|(tm, tp)| *tm / *tp).collect();
            default_alpha(&ratios)?
        }
    };
    let regs = curves
        .into_iter()
        .zip(landmarks)
        .map(|(curve, (t_max, t_pup))| {
            let warp = fit_warping(t_max, t_pup, alpha)?;
            let shape = compute_shape(&curve, &warp, shape_points);
            Ok(Registration { curve, warp, shape })
        })
        .collect::<Result<Vec<_>, RegistrationError>>()?;
    Ok((alpha, regs))
}
