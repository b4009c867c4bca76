//! Weighted local linear regression of replicate means against time.
//!
//! At every evaluation point `t` the line `a + b (t_j - t)` is fitted to the
//! replicate means with weights `N_j / n * K((t_j - t) / h)`; `a` estimates the
//! growth curve and `b` its derivative. The 2×2 normal equations are solved in
//! closed form from kernel moment sums, centred on the local weighted mean
//! time for numerical stability.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{ConstantTempCurve, MIN_GRID_POINTS};
use crate::data::TemperatureBatch;
use crate::kernel::Kernel;
use crate::scalar::{linspace, Scalar};

/// Relative determinant below which the local design is treated as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothError {
    #[error(
        "fewer than 2 observation times carry kernel weight at t = {t} h (found {found}); \
         increase the time bandwidth (currently {bandwidth} h)"
    )]
    DegenerateDesign { t: f64, found: usize, bandwidth: f64 },
    #[error("local design is numerically singular at t = {t} h")]
    SingularSystem { t: f64 },
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("need at least 2 summary points, got {0}")]
    TooFewPoints(usize),
}

/// Replicate mean and regression weight at one observation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SummaryPoint<F> {
    pub time_h: F,
    pub mean_length: F,
    pub weight: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary<F> {
    pub temperature_c: F,
    pub points: Vec<SummaryPoint<F>>,
}

impl<F: Scalar> BatchSummary<F> {
    pub fn last_time(&self) -> F {
        self.points.last().map(|p| p.time_h).unwrap_or_else(F::zero)
    }

    /// Twice the median gap between consecutive observation times.
    pub fn default_bandwidth(&self) -> F {
        let mut gaps: Vec<F> = self
            .points
            .windows(2)
            .map(|w| w[1].time_h - w[0].time_h)
            .collect();
        if gaps.is_empty() {
            return F::one();
        }
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = gaps.len();
        let median = if m % 2 == 1 {
            gaps[m / 2]
        } else {
            (gaps[m / 2 - 1] + gaps[m / 2]) * F::lit(0.5)
        };
        F::lit(2.0) * median
    }
}

/// Replicate means with weights `N_j / n`, one per observation time.
pub fn batch_summaries<F: Scalar>(batch: &TemperatureBatch<F>) -> BatchSummary<F> {
    let n = F::from_count(batch.observations.len());
    let points = batch
        .observations
        .iter()
        .map(|o| {
            let count = F::from_count(o.lengths_mm.len());
            SummaryPoint {
                time_h: o.time_h,
                mean_length: o.lengths_mm.iter().copied().sum::<F>() / count,
                weight: count / n,
            }
        })
        .collect();
    BatchSummary { temperature_c: batch.temperature_c, points }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SmootherConfig<F> {
    /// Time bandwidth in hours; `None` uses twice the median observation gap.
    pub bandwidth_h: Option<F>,
    pub kernel: Kernel,
    pub grid_points: usize,
}

impl<F: Scalar> Default for SmootherConfig<F> {
    fn default() -> Self {
        SmootherConfig {
            bandwidth_h: None,
            kernel: Kernel::Epanechnikov,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// Value and slope estimate of the local line at `t`.
pub fn local_linear_at<F: Scalar>(
    points: &[SummaryPoint<F>],
    kernel: Kernel,
    bandwidth: F,
    t: F,
) -> Result<(F, F), SmoothError> {
    let mut s0 = F::zero();
    let mut s1 = F::zero();
    let mut active = 0usize;
    let weights: Vec<F> = points
        .iter()
        .map(|p| {
            let w = p.weight * kernel.weight((p.time_h - t) / bandwidth);
            if w > F::zero() {
                active += 1;
                s0 += w;
                s1 += w * (p.time_h - t);
            }
            w
        })
        .collect();
    if active < 2 {
        return Err(SmoothError::DegenerateDesign {
            t: t.as_f64(),
            found: active,
            bandwidth: bandwidth.as_f64(),
        });
    }
    let d_bar = s1 / s0;
    let y_bar = points
        .iter()
        .zip(&weights)
        .map(|(p, w)| *w * p.mean_length)
        .sum::<F>()
        / s0;
    let mut s2 = F::zero();
    let mut s2c = F::zero();
    let mut t1c = F::zero();
    for (p, w) in points.iter().zip(&weights) {
        if *w > F::zero() {
            let d = p.time_h - t;
            let e = d - d_bar;
            s2 += *w * d * d;
            s2c += *w * e * e;
            t1c += *w * e * (p.mean_length - y_bar);
        }
    }
    // det(XᵀKX) = S0 · S2c; compare against its scale S0 · S2.
    if !(s2c > F::lit(SINGULAR_TOLERANCE) * s2) {
        return Err(SmoothError::SingularSystem { t: t.as_f64() });
    }
    let slope = t1c / s2c;
    Ok((y_bar - slope * d_bar, slope))
}

/// Evaluates the local linear fit on an arbitrary grid.
pub fn local_linear_eval<F: Scalar>(
    summary: &BatchSummary<F>,
    kernel: Kernel,
    bandwidth: F,
    eval_grid: &[F],
) -> Result<Vec<(F, F)>, SmoothError> {
    if !(bandwidth > F::zero()) {
        return Err(SmoothError::InvalidBandwidth(bandwidth.as_f64()));
    }
    if summary.points.len() < 2 {
        return Err(SmoothError::TooFewPoints(summary.points.len()));
    }
    eval_grid
        .iter()
        .map(|&t| local_linear_at(&summary.points, kernel, bandwidth, t))
        .collect()
}

/// Fits the constant-temperature growth curve on a uniform grid over
/// `[0, last observation time]`.
pub fn local_linear_fit<F: Scalar>(
    summary: &BatchSummary<F>,
    config: &SmootherConfig<F>,
) -> Result<ConstantTempCurve<F>, SmoothError> {
    let bandwidth = config.bandwidth_h.unwrap_or_else(|| summary.default_bandwidth());
    let t_pup = summary.last_time();
    let grid = linspace(F::zero(), t_pup, config.grid_points.max(MIN_GRID_POINTS));
    let fitted = local_linear_eval(summary, config.kernel, bandwidth, &grid)?;
    let (values, derivs) = fitted.into_iter().unzip();
    let mut curve = ConstantTempCurve::from_samples(summary.temperature_c, t_pup, values, derivs);
    curve.bandwidth_h_l = Some(bandwidth);
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TimePoint;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn summary(times: &[f64], ys: &[f64]) -> BatchSummary<f64> {
        BatchSummary {
            temperature_c: 20.0,
            points: times
                .iter()
                .zip(ys)
                .map(|(&t, &y)| SummaryPoint { time_h: t, mean_length: y, weight: 1.0 })
                .collect(),
        }
    }

    /// Direct weighted least squares at one point: build XᵀWX and XᵀWy
    /// explicitly and solve by Cramer's rule. Independent of the centred
    /// moment route used in the implementation.
    fn wls_oracle(s: &BatchSummary<f64>, kernel: Kernel, h: f64, t: f64) -> (f64, f64) {
        let (mut m00, mut m01, mut m11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in &s.points {
            let w = p.weight * kernel.weight((p.time_h - t) / h);
            let x = p.time_h - t;
            m00 += w;
            m01 += w * x;
            m11 += w * x * x;
            r0 += w * p.mean_length;
            r1 += w * x * p.mean_length;
        }
        let det = m00 * m11 - m01 * m01;
        ((m11 * r0 - m01 * r1) / det, (m00 * r1 - m01 * r0) / det)
    }

    #[test]
    fn summaries_weight_by_replicates() {
        let batch = TemperatureBatch {
            temperature_c: 15.0,
            observations: vec![
                TimePoint { time_h: 0.0, lengths_mm: vec![2.0, 4.0] },
                TimePoint { time_h: 24.0, lengths_mm: vec![5.0, 5.0, 6.0, 4.0] },
            ],
        };
        let s = batch_summaries(&batch);
        let ybar: Vec<f64> = s.points.iter().map(|p| p.mean_length).collect();
        let w: Vec<f64> = s.points.iter().map(|p| p.weight).collect();
        assert_eq!(ybar, vec![3.0, 5.0]);
        assert_eq!(w, vec![1.0, 2.0]);

        let single = TemperatureBatch {
            temperature_c: 15.0,
            observations: vec![TimePoint { time_h: 0.0, lengths_mm: vec![2.0, 2.5, 3.0] }],
        };
        let s1 = batch_summaries(&single);
        assert_eq!(s1.points.len(), 1);
        assert_eq!(s1.points[0].weight, 3.0);

        let flat = TemperatureBatch {
            temperature_c: 15.0,
            observations: (0..4)
                .map(|j| TimePoint { time_h: j as f64, lengths_mm: vec![1.0] })
                .collect(),
        };
        assert!(batch_summaries(&flat).points.iter().all(|p| p.weight == 0.25));
    }

    #[test]
    fn constant_data_gives_flat_curve() {
        let times: Vec<f64> = (0..20).map(|j| j as f64 * 6.0).collect();
        let s = summary(&times, &[5.0; 20]);
        let c = local_linear_fit(&s, &SmootherConfig::default()).unwrap();
        assert!(c.values.iter().all(|v| (v - 5.0).abs() < 1e-12));
        assert!(c.derivs.iter().all(|d| d.abs() < 1e-12));
        assert_eq!(c.len(), DEFAULT_GRID_POINTS);
        assert_eq!(c.bandwidth_h_l, Some(12.0));
    }

    #[test]
    fn affine_data_reproduced() {
        let times: Vec<f64> = (0..15).map(|j| j as f64 * 4.0).collect();
        let ys: Vec<f64> = times.iter().map(|t| 2.0 * t + 1.0).collect();
        let s = summary(&times, &ys);
        for kernel in [Kernel::Epanechnikov, Kernel::Gaussian] {
            for h in [5.0, 9.0, 40.0] {
                let cfg = SmootherConfig { bandwidth_h: Some(h), kernel, grid_points: 200 };
                let c = local_linear_fit(&s, &cfg).unwrap();
                for (t, (v, d)) in c.grid.iter().zip(c.values.iter().zip(&c.derivs)) {
                    assert!((v - (2.0 * t + 1.0)).abs() < 1e-10);
                    assert!((d - 2.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn quadratic_matches_brute_force_wls() {
        let times: Vec<f64> = (0..200).map(|j| j as f64 / 199.0).collect();
        let ys: Vec<f64> = times.iter().map(|t| t * t).collect();
        let s = summary(&times, &ys);
        let grid: Vec<f64> = linspace(0.0, 1.0, 101);
        let fit = local_linear_eval(&s, Kernel::Epanechnikov, 0.2, &grid).unwrap();
        let mut max_dv: f64 = 0.0;
        let mut max_dd: f64 = 0.0;
        for (t, (v, d)) in grid.iter().zip(&fit) {
            let (ov, od) = wls_oracle(&s, Kernel::Epanechnikov, 0.2, *t);
            max_dv = max_dv.max((v - ov).abs());
            max_dd = max_dd.max((d - od).abs());
        }
        assert!(max_dv < 1e-12, "value mismatch {max_dv}");
        assert!(max_dd < 1e-10, "deriv mismatch {max_dd}");

        // Interior bias of local linear on t² is h²·μ₂(K) = 0.04/5 = 0.008.
        // Bounds frozen from the oracle run: value 0.0080014, derivative 0.16572
        // (the derivative peak sits at the boundary).
        let err_v = grid
            .iter()
            .zip(&fit)
            .map(|(t, (v, _))| (v - t * t).abs())
            .fold(0.0, f64::max);
        let err_d = grid
            .iter()
            .zip(&fit)
            .map(|(t, (_, d))| (d - 2.0 * t).abs())
            .fold(0.0, f64::max);
        let (oracle_v, oracle_d) = grid.iter().fold((0.0f64, 0.0f64), |(ev, ed), t| {
            let (ov, od) = wls_oracle(&s, Kernel::Epanechnikov, 0.2, *t);
            (ev.max((ov - t * t).abs()), ed.max((od - 2.0 * t).abs()))
        });
        assert!(err_v <= oracle_v + 1e-12 && err_v < 0.008002, "{err_v} vs {oracle_v}");
        assert!(err_d <= oracle_d + 1e-10 && err_d < 0.1658, "{err_d} vs {oracle_d}");
    }

    #[test]
    fn degenerate_window_is_reported() {
        let s = summary(&[0.0, 10.0, 20.0], &[1.0, 2.0, 3.0]);
        let err = local_linear_eval(&s, Kernel::Epanechnikov, 4.0, &[5.0]).unwrap_err();
        assert!(matches!(err, SmoothError::DegenerateDesign { found: 0, .. }), "{err}");
        let err = local_linear_eval(&s, Kernel::Epanechnikov, 4.0, &[1.0]).unwrap_err();
        assert!(matches!(err, SmoothError::DegenerateDesign { found: 1, .. }));
        assert!(err.to_string().contains("increase the time bandwidth"));
        assert!(matches!(
            local_linear_eval(&s, Kernel::Epanechnikov, 0.0, &[1.0]),
            Err(SmoothError::InvalidBandwidth(_))
        ));
    }

    #[test]
    fn coincident_times_are_singular() {
        let pts = vec![
            SummaryPoint { time_h: 1.0, mean_length: 1.0, weight: 1.0 },
            SummaryPoint { time_h: 1.0 + 1e-9, mean_length: 2.0, weight: 1.0 },
        ];
        assert!(matches!(
            local_linear_at(&pts, Kernel::Gaussian, 1.0, 0.0),
            Err(SmoothError::SingularSystem { .. })
        ));
    }

    #[test]
    fn reflection_negates_derivative() {
        let times: Vec<f64> = vec![0.0, 1.5, 4.0, 5.0, 7.5, 9.0, 10.0];
        let ys: Vec<f64> = vec![1.0, 3.0, 2.5, 6.0, 4.0, 7.0, 8.5];
        let s = summary(&times, &ys);
        let rt: Vec<f64> = times.iter().rev().map(|t| 10.0 - t).collect();
        let ry: Vec<f64> = ys.iter().rev().copied().collect();
        let r = summary(&rt, &ry);
        let grid = linspace(0.0, 10.0, 41);
        let rgrid: Vec<f64> = grid.iter().map(|t| 10.0 - t).collect();
        let a = local_linear_eval(&s, Kernel::Gaussian, 2.0, &grid).unwrap();
        let b = local_linear_eval(&r, Kernel::Gaussian, 2.0, &rgrid).unwrap();
        for ((va, da), (vb, db)) in a.iter().zip(&b) {
            assert!((va - vb).abs() < 1e-10);
            assert!((da + db).abs() < 1e-10);
        }
    }

    #[test]
    fn single_precision_affine() {
        let times: Vec<f32> = (0..12).map(|j| j as f32 * 2.0).collect();
        let pts: Vec<SummaryPoint<f32>> = times
            .iter()
            .map(|&t| SummaryPoint { time_h: t, mean_length: 0.5 * t + 2.0, weight: 1.0 })
            .collect();
        let s = BatchSummary { temperature_c: 10.0f32, points: pts };
        let c = local_linear_fit(&s, &SmootherConfig::default()).unwrap();
        for (t, v) in c.grid.iter().zip(&c.values) {
            assert!((v - (0.5 * t + 2.0)).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn linear_in_responses(
            ys in prop::collection::vec(0.0f64..20.0, 12),
            scale in -3.0f64..3.0,
            shift in -5.0f64..5.0,
            h in 3.0f64..30.0,
        ) {
            let times: Vec<f64> = (0..12).map(|j| j as f64 * 2.5).collect();
            let base = summary(&times, &ys);
            let moved: Vec<f64> = ys.iter().map(|y| scale * y + shift).collect();
            let other = summary(&times, &moved);
            let grid = linspace(0.0, 27.5, 37);
            let a = local_linear_eval(&base, Kernel::Gaussian, h, &grid).unwrap();
            let b = local_linear_eval(&other, Kernel::Gaussian, h, &grid).unwrap();
            for ((va, da), (vb, db)) in a.iter().zip(&b) {
                prop_assert!((scale * va + shift - vb).abs() < 1e-10);
                prop_assert!((scale * da - db).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sup_error_shrinks_with_sample_size() {
        // Smooth truth with noise; h ∝ n^(-1/5); average over 20 seeds.
        let truth = |t: f64| (3.0 * t).sin() + t;
        let mut means = Vec::new();
        for &n in &[50usize, 100, 200, 400] {
            let h = 0.35 * (n as f64 / 50.0).powf(-0.2);
            let mut total = 0.0;
            for seed in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let times: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
                let ys: Vec<f64> = times
                    .iter()
                    .map(|&t| {
                        let z: f64 = rng.sample(rand_distr::StandardNormal);
                        truth(t) + 0.2 * z
                    })
                    .collect();
                let s = summary(&times, &ys);
                let grid = linspace(0.0, 1.0, 101);
                let fit = local_linear_eval(&s, Kernel::Epanechnikov, h, &grid).unwrap();
                total += grid
                    .iter()
                    .zip(&fit)
                    .map(|(t, (v, _))| (v - truth(*t)).abs())
                    .fold(0.0, f64::max);
            }
            means.push(total / 20.0);
        }
        for w in means.windows(2) {
            assert!(w[1] <= w[0], "sup error increased: {means:?}");
        }
    }
}
