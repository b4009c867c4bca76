//! Growth curve at one constant temperature, sampled on a uniform grid.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::interp;
use crate::scalar::{linspace, Scalar};

/// Minimum number of grid points a curve may carry.
pub const MIN_GRID_POINTS: usize = 10;

/// Expected larval length (mm) and growth rate (mm/h) against hours after
/// hatching, on a uniform grid covering `[0, t_pup]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ConstantTempCurve<F> {
    pub temperature_c: F,
    pub grid: Vec<F>,
    pub values: Vec<F>,
    pub derivs: Vec<F>,
    pub t_pup: F,
    /// Time-smoothing bandwidth when the curve came from the local smoother.
    pub bandwidth_h_l: Option<F>,
    #[serde(skip)]
    branches: OnceLock<Branches<F>>,
}

/// Monotone envelopes used to invert a curve on either side of its maximum.
#[derive(Debug, Clone)]
pub struct Branches<F> {
    /// Index of the maximum.
    pub peak: usize,
    /// Running maximum of `values[..=peak]`.
    pub rising_envelope: Vec<F>,
    /// Running minimum of `values[peak..]`.
    pub falling_envelope: Vec<F>,
    /// Last index at or before the peak with a positive derivative (the peak
    /// itself when its derivative is still positive).
    pub last_rising: usize,
    /// First index at or after the peak with a negative derivative.
    pub first_falling: usize,
}

impl<F: PartialEq> PartialEq for ConstantTempCurve<F> {
    fn eq(&self, other: &Self) -> bool {
        self.temperature_c == other.temperature_c
            && self.grid == other.grid
            && self.values == other.values
            && self.derivs == other.derivs
            && self.t_pup == other.t_pup
            && self.bandwidth_h_l == other.bandwidth_h_l
    }
}

impl<F: Scalar> ConstantTempCurve<F> {
    /// Builds a curve on `values.len()` uniform points over `[0, t_pup]`.
    pub fn from_samples(temperature_c: F, t_pup: F, values: Vec<F>, derivs: Vec<F>) -> Self {
        assert_eq!(values.len(), derivs.len(), "values/derivs length mismatch");
        assert!(values.len() >= MIN_GRID_POINTS, "curve needs at least {MIN_GRID_POINTS} points");
        assert!(t_pup > F::zero(), "pupation time must be positive");
        debug_assert!(values.iter().chain(&derivs).all(|v| v.is_finite()));
        ConstantTempCurve {
            temperature_c,
            grid: linspace(F::zero(), t_pup, values.len()),
            values,
            derivs,
            t_pup,
            bandwidth_h_l: None,
            branches: OnceLock::new(),
        }
    }

    /// Samples closed-form value and derivative functions.
    pub fn from_fn(
        temperature_c: F,
        t_pup: F,
        points: usize,
        value: impl Fn(F) -> F,
        deriv: impl Fn(F) -> F,
    ) -> Self {
        let grid = linspace(F::zero(), t_pup, points);
        let values = grid.iter().map(|&t| value(t)).collect();
        let derivs = grid.iter().map(|&t| deriv(t)).collect();
        Self::from_samples(temperature_c, t_pup, values, derivs)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> F {
        self.t_pup / F::from_count(self.len() - 1)
    }

    pub fn value_at(&self, t: F) -> F {
        interp::cubic(F::zero(), self.t_pup, &self.values, t)
    }

    pub fn deriv_at(&self, t: F) -> F {
        interp::linear(F::zero(), self.t_pup, &self.derivs, t)
    }

    /// Index of the largest grid value (first one on ties).
    pub fn argmax_index(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_value(&self) -> F {
        self.values[self.argmax_index()]
    }

    pub fn hatch_value(&self) -> F {
        self.values[0]
    }

    pub fn end_value(&self) -> F {
        self.values[self.len() - 1]
    }

    pub fn branches(&self) -> &Branches<F> {
        self.branches.get_or_init(|| {
            let peak = self.argmax_index();
            let mut rising_envelope = Vec::with_capacity(peak + 1);
            let mut run = self.values[0];
            for v in &self.values[..=peak] {
                run = run.max(*v);
                rising_envelope.push(run);
            }
            let mut falling_envelope = Vec::with_capacity(self.len() - peak);
            let mut run = self.values[peak];
            for v in &self.values[peak..] {
                run = run.min(*v);
                falling_envelope.push(run);
            }
            let mut last_rising = peak;
            while last_rising > 0 && self.derivs[last_rising] <= F::zero() {
                last_rising -= 1;
            }
            let first_falling = (peak..self.len())
                .find(|&i| self.derivs[i] < F::zero())
                .unwrap_or(self.len() - 1);
            Branches { peak, rising_envelope, falling_envelope, last_rising, first_falling }
        })
    }

    /// True for the zero-growth curve returned at or below the developmental
    /// threshold.
    pub fn is_dormant(&self) -> bool {
        self.derivs.iter().all(|d| *d == F::zero())
    }
}
