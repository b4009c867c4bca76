//! Growth under a varying temperature profile.
//!
//! The length follows `L' = L'_T(L_T^{-1}(L))` with `T = T(t)`: at each step
//! the current length is located on the constant-temperature curve for the
//! current temperature and advanced with that curve's growth rate (forward
//! Euler).

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::ConstantTempCurve;
use crate::data::{DataError, TemperatureProfile};
use crate::field::{FieldError, GrowthField};
use crate::interp;
use crate::scalar::Scalar;

/// Default Euler step (hours).
pub const DEFAULT_DT_H: f64 = 1.0;

const BISECTION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("length {length} mm is outside the {phase} branch [{lo}, {hi}] mm")]
    BranchOutOfRange { length: f64, phase: Phase, lo: f64, hi: f64 },
    #[error("inversion failed at t = {time} h: {source}")]
    InversionFailure { time: f64, source: Box<DynamicsError> },
    #[error("invalid time interval: hatching {t_h} h must precede {t_star} h and dt {dt} must be positive")]
    InvalidInterval { t_h: f64, t_star: f64, dt: f64 },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Developmental phase of a larva.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Feeding,
    PostFeeding,
    Pupated,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Feeding => "feeding",
            Phase::PostFeeding => "post-feeding",
            Phase::Pupated => "pupated",
        })
    }
}

/// Anything that yields the constant-temperature growth curve at a
/// temperature.
pub trait CurveSource<F>: Sync {
    fn curve_at(&self, temp_c: F) -> Result<Arc<ConstantTempCurve<F>>, FieldError>;
}

impl<F: Scalar> CurveSource<F> for GrowthField<F> {
    fn curve_at(&self, temp_c: F) -> Result<Arc<ConstantTempCurve<F>>, FieldError> {
        self.growth_at(temp_c)
    }
}

/// Solves `curve(u) = length` on the rising (`Feeding`) or falling
/// (`PostFeeding`) side of the maximum, returning the first crossing.
pub fn invert_length<F: Scalar>(
    curve: &ConstantTempCurve<F>,
    length: F,
    phase: Phase,
) -> Result<F, DynamicsError> {
    let br = curve.branches();
    let max = curve.values[br.peak];
    let out_of_range = |lo: F| DynamicsError::BranchOutOfRange {
        length: length.as_f64(),
        phase,
        lo: lo.as_f64(),
        hi: max.as_f64(),
    };
    match phase {
        Phase::Feeding => {
            let lo = curve.values[0];
            if !(length >= lo && length <= max) {
                return Err(out_of_range(lo));
            }
            let j = br.rising_envelope.partition_point(|v| *v < length);
            if j == 0 {
                return Ok(F::zero());
            }
            Ok(bisect_segment(curve, j - 1, length))
        }
        Phase::PostFeeding => {
            let lo = *br.falling_envelope.last().unwrap();
            if !(length >= lo && length <= max) {
                return Err(out_of_range(lo));
            }
            let j = br.falling_envelope.partition_point(|v| *v > length);
            if j == 0 {
                return Ok(curve.grid[br.peak]);
            }
            Ok(bisect_segment(curve, br.peak + j - 1, length))
        }
        Phase::Pupated => Err(out_of_range(max)),
    }
}

/// Root of the cubic interpolant on `[grid[i], grid[i+1]]`, whose endpoint
/// values bracket `target`.
fn bisect_segment<F: Scalar>(curve: &ConstantTempCurve<F>, i: usize, target: F) -> F {
    let step = curve.step();
    let rising = curve.values[i] < curve.values[i + 1];
    let (mut lo, mut hi) = (F::zero(), F::one());
    let tol = F::lit(BISECTION_TOL) / step;
    while hi - lo > tol {
        let mid = F::lit(0.5) * (lo + hi);
        let below = interp::cubic_segment(&curve.values, i, mid) < target;
        if below == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    curve.grid[i] + F::lit(0.5) * (lo + hi) * step
}

/// Expected length trajectory under a varying temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct VaryingTempCurve<F> {
    pub times: Vec<F>,
    pub lengths: Vec<F>,
    pub phases: Vec<Phase>,
    pub hatch_length: F,
    /// Time at which the pupation rule fired; the trajectory ends there.
    pub pupation_time: Option<F>,
}

impl<F: Scalar> VaryingTempCurve<F> {
    pub fn final_length(&self) -> F {
        *self.lengths.last().unwrap()
    }

    pub fn final_phase(&self) -> Phase {
        *self.phases.last().unwrap()
    }

    pub fn final_time(&self) -> F {
        *self.times.last().unwrap()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_h,length_mm,phase")?;
        for ((t, l), p) in self.times.iter().zip(&self.lengths).zip(&self.phases) {
            writeln!(out, "{t},{l},{p}")?;
        }
        Ok(())
    }
}

/// Number of Euler intervals and the grid time of step `k`.
fn euler_grid<F: Scalar>(t_h: F, t_star: F, dt: F) -> (usize, impl Fn(usize) -> F) {
    let ratio = ((t_star - t_h) / dt).as_f64();
    let n = ((ratio - 1e-9).ceil() as usize).max(1);
    (n, move |k: usize| if k >= n { t_star } else { t_h + F::from_count(k) * dt })
}

/// Forward Euler reconstruction from hatching at `t_h` to `t_star`.
///
/// Grid points are `t_h + k dt` with a shorter final step landing on `t_star`.
/// Phase rules per step, in order:
/// * a post-feeding larva no longer than the curve's final value pupates and
///   the trajectory stops;
/// * a feeding larva switches to post-feeding once its running maximum reaches
///   the top of the curve's rising branch, or once it is longer than the
///   curve's maximum;
/// * lengths outside the current branch are clamped to its ends for
///   inversion;
/// * feeding rates are floored at zero and post-feeding rates capped at zero;
/// * post-feeding rates are read no earlier than half a step past the
///   maximum (and past the first negative derivative), so a larva sitting on
///   the peak starts to shrink.
///
/// At or below the developmental threshold the curve is dormant and the
/// length is held.
pub fn reconstruct_growth<F: Scalar, S: CurveSource<F> + ?Sized>(
    source: &S,
    profile: &TemperatureProfile<F>,
    t_h: F,
    t_star: F,
    dt: F,
) -> Result<VaryingTempCurve<F>, DynamicsError> {
    if !(t_h < t_star && dt > F::zero() && dt.is_finite()) {
        return Err(DynamicsError::InvalidInterval {
            t_h: t_h.as_f64(),
            t_star: t_star.as_f64(),
            dt: dt.as_f64(),
        });
    }
    let (lo, hi) = profile.span();
    if t_h < lo || t_star > hi {
        return Err(DataError::ProfileCoverageGap {
            need_lo: t_h.as_f64(),
            need_hi: t_star.as_f64(),
            have_lo: lo.as_f64(),
            have_hi: hi.as_f64(),
        }
        .into());
    }
    let (n, time) = euler_grid(t_h, t_star, dt);
    let mut times = Vec::with_capacity(n + 1);
    let mut lengths = Vec::with_capacity(n + 1);
    let mut phases = Vec::with_capacity(n + 1);
    let mut pupation_time = None;

    let first = source.curve_at(profile.temperature_at(t_h)?)?;
    let hatch_length = first.hatch_value();
    let mut length = hatch_length;
    let mut running_max = hatch_length;
    let mut phase = Phase::Feeding;

    for k in 0..=n {
        let t = time(k);
        let curve = if k == 0 { Arc::clone(&first) } else { source.curve_at(profile.temperature_at(t)?)? };
        let mut rate = F::zero();
        if !curve.is_dormant() {
            let br = curve.branches();
            let max = curve.values[br.peak];
            if phase == Phase::PostFeeding && length <= curve.end_value() {
                phase = Phase::Pupated;
                pupation_time = Some(t);
            } else {
                running_max = running_max.max(length);
                if phase == Phase::Feeding
                    && (running_max >= curve.values[br.last_rising] || length >= max)
                {
                    phase = Phase::PostFeeding;
                }
                let wrap = |e| DynamicsError::InversionFailure { time: t.as_f64(), source: Box::new(e) };
                rate = if phase == Phase::Feeding {
                    let u = invert_length(&curve, length.max(curve.values[0]), phase).map_err(wrap)?;
                    curve.deriv_at(u).max(F::zero())
                } else {
                    let u = invert_length(&curve, length.min(max), phase).map_err(wrap)?;
                    let half_step = F::lit(0.5) * (time(k + 1) - t);
                    let floor = curve.grid[br.first_falling].max(curve.grid[br.peak] + half_step);
                    curve.deriv_at(u.max(floor)).min(F::zero())
                };
            }
        }
        times.push(t);
        lengths.push(length);
        phases.push(phase);
        if phase == Phase::Pupated || k == n {
            break;
        }
        length += (time(k + 1) - t) * rate;
    }
    Ok(VaryingTempCurve { times, lengths, phases, hatch_length, pupation_time })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Bandwidths, FieldConfig};
    use crate::kernel::Kernel;
    use crate::registration::{fit_warping, GrowthShape, Registration};
    use crate::scalar::linspace;
    use proptest::prelude::*;

    #[test]
    fn inverts_linear_curve() {
        let c = ConstantTempCurve::from_fn(20.0f64, 10.0, 101, |t| 2.0 * t, |_| 2.0);
        assert!((invert_length(&c, 6.0, Phase::Feeding).unwrap() - 3.0).abs() < 1e-9);
        assert!(matches!(
            invert_length(&c, 21.0, Phase::Feeding),
            Err(DynamicsError::BranchOutOfRange { .. })
        ));
        assert!(invert_length(&c, -1.0, Phase::Feeding).is_err());
    }

    #[test]
    fn inverts_on_falling_branch() {
        let c = ConstantTempCurve::from_fn(20.0f64, 6.0, 512, |t| 10.0 - (t - 3.0).powi(2), |t| {
            -2.0 * (t - 3.0)
        });
        let post = invert_length(&c, 9.0, Phase::PostFeeding).unwrap();
        let pre = invert_length(&c, 9.0, Phase::Feeding).unwrap();
        // Dense scan of the interpolant on each side of the peak.
        let scan = |from: f64, to: f64| {
            let ts = linspace(from, to, 600_001);
            ts.into_iter()
                .min_by(|a, b| {
                    (c.value_at(*a) - 9.0).abs().partial_cmp(&(c.value_at(*b) - 9.0).abs()).unwrap()
                })
                .unwrap()
        };
        assert!((post - scan(3.0, 6.0)).abs() < 1e-5);
        assert!((pre - scan(0.0, 3.0)).abs() < 1e-5);
        assert!((post - 4.0).abs() < 1e-6 && (pre - 2.0).abs() < 1e-6);
        assert!(invert_length(&c, 0.5, Phase::PostFeeding).is_err());
    }

    /// Two-temperature field whose shapes rise linearly with slope `rise` up
    /// to `alpha` and then fall; warps are linear so the feeding rate at `T_k`
    /// is `rise / t_pup_k`.
    fn linear_field(tpups: [f64; 2], temps: [f64; 2], kernel: Kernel, h: f64) -> GrowthField<f64> {
        let alpha = 0.5;
        let rise = 10.0;
        let grid = linspace(0.0, 1.0, 2049);
        let shape = |u: f64| if u <= alpha { 1.0 + rise * u } else { 1.0 + rise * alpha - 4.0 * (u - alpha) };
        let dshape = |u: f64| if u < alpha { rise } else { -4.0 };
        let regs = temps
            .iter()
            .zip(tpups)
            .map(|(&temp, tp)| {
                let warp = fit_warping(alpha * tp, tp, alpha).unwrap();
                let curve = ConstantTempCurve::from_fn(temp, tp, 64, |t| shape(t / tp), |t| dshape(t / tp) / tp);
                let shape = GrowthShape {
                    temperature_c: temp,
                    grid: grid.clone(),
                    values: grid.iter().map(|u| shape(*u)).collect(),
                    derivs: grid.iter().map(|u| dshape(*u)).collect(),
                };
                Registration { curve, warp, shape }
            })
            .collect();
        let config = FieldConfig {
            kernel,
            bandwidths: Some(Bandwidths::shared(h)),
            ..FieldConfig::default()
        };
        GrowthField::from_registrations(alpha, regs, &config).unwrap()
    }

    #[test]
    fn two_step_profile_is_piecewise_linear() {
        let field = linear_field([100.0, 50.0], [10.0, 20.0], Kernel::Epanechnikov, 1.0);
        let profile = TemperatureProfile::new(
            vec![0.0, 10.005, 10.006, 40.0],
            vec![10.0, 10.0, 20.0, 20.0],
        )
        .unwrap();
        let traj = reconstruct_growth(&field, &profile, 0.0, 25.0, 0.01).unwrap();
        let (r1, r2) = (10.0 / 100.0, 10.0 / 50.0);
        for (t, l) in traj.times.iter().zip(&traj.lengths) {
            let exact = 1.0 + r1 * t.min(10.01) + r2 * (t - 10.01).max(0.0);
            assert!((l - exact).abs() < 1e-6, "{t}: {l} vs {exact}");
        }
        assert_eq!(traj.final_time(), 25.0);
        assert!(traj.phases.iter().all(|p| *p == Phase::Feeding));
    }

    #[test]
    fn cold_profile_is_dormant() {
        let field = linear_field([100.0, 50.0], [10.0, 20.0], Kernel::Gaussian, 20.0);
        let profile = TemperatureProfile::constant(0.5, -50.0, 0.0).unwrap();
        let traj = reconstruct_growth(&field, &profile, -50.0, 0.0, 1.0).unwrap();
        assert!(traj.lengths.iter().all(|l| *l == traj.hatch_length));
        assert!(traj.phases.iter().all(|p| *p == Phase::Feeding));
        assert_eq!(traj.times.len(), 51);
    }

    #[test]
    fn rejects_bad_intervals_and_coverage() {
        let field = linear_field([100.0, 50.0], [10.0, 20.0], Kernel::Gaussian, 20.0);
        let profile = TemperatureProfile::constant(15.0, -50.0, 0.0).unwrap();
        assert!(matches!(
            reconstruct_growth(&field, &profile, 0.0, -10.0, 1.0),
            Err(DynamicsError::InvalidInterval { .. })
        ));
        assert!(matches!(
            reconstruct_growth(&field, &profile, -60.0, 0.0, 1.0),
            Err(DynamicsError::Data(DataError::ProfileCoverageGap { .. }))
        ));
    }

    #[test]
    fn truncated_last_step() {
        let field = linear_field([100.0, 50.0], [10.0, 20.0], Kernel::Gaussian, 20.0);
        let profile = TemperatureProfile::constant(15.0, -50.0, 0.0).unwrap();
        let traj = reconstruct_growth(&field, &profile, -10.5, 0.0, 1.0).unwrap();
        assert_eq!(traj.times.len(), 12);
        assert_eq!(traj.times[10], -0.5);
        assert_eq!(traj.final_time(), 0.0);
    }

    fn hump_field() -> GrowthField<f64> {
        // Smooth hump shapes with a clear post-feeding decline.
        let alpha = 0.6;
        let grid = linspace(0.0, 1.0, 2049);
        let s = |u: f64| {
            if u <= alpha {
                1.5 + 14.0 * (std::f64::consts::FRAC_PI_2 * u / alpha).sin()
            } else {
                15.5 - 3.0 * ((u - alpha) / (1.0 - alpha)).powi(2)
            }
        };
        let regs = [(12.0, 160.0), (18.0, 90.0), (24.0, 60.0)]
            .iter()
            .map(|&(temp, tp)| {
                let tm = alpha * tp;
                let warp = fit_warping(tm, tp, alpha).unwrap();
                let values: Vec<f64> = grid.iter().map(|u| s(*u)).collect();
                let h = 1e-6;
                let derivs = grid.iter().map(|u| (s(u + h) - s(u - h)) / (2.0 * h)).collect();
                let curve = ConstantTempCurve::from_fn(temp, tp, 64, |t| s(t / tp), |_| 0.0);
                Registration {
                    curve,
                    warp,
                    shape: GrowthShape { temperature_c: temp, grid: grid.clone(), values, derivs },
                }
            })
            .collect();
        GrowthField::from_registrations(alpha, regs, &FieldConfig::default()).unwrap()
    }

    #[test]
    fn constant_temperature_reproduces_curve_first_order() {
        let field = hump_field();
        let curve = field.growth_at(18.0).unwrap();
        let profile = TemperatureProfile::constant(18.0, -200.0, 0.0).unwrap();
        // Collection before the peak: the feeding branch carries no timing
        // error from passing the maximum.
        let t_h = -0.5 * curve.t_pup;
        let sup_err = |dt: f64| {
            let traj = reconstruct_growth(&field, &profile, t_h, 0.0, dt).unwrap();
            traj.times
                .iter()
                .zip(&traj.lengths)
                .map(|(t, l)| (l - curve.value_at(t - t_h)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (sup_err(0.5), sup_err(0.25));
        let ratio = e1 / e2;
        assert!((1.5..=2.5).contains(&ratio), "errors {e1} {e2} ratio {ratio}");
    }

    #[test]
    fn full_development_pupates() {
        let field = hump_field();
        let curve = field.growth_at(18.0).unwrap();
        let profile = TemperatureProfile::constant(18.0, -400.0, 0.0).unwrap();
        let traj = reconstruct_growth(&field, &profile, -1.5 * curve.t_pup, 0.0, 0.5).unwrap();
        let tp = traj.pupation_time.expect("pupates");
        assert_eq!(traj.final_phase(), Phase::Pupated);
        assert!((tp + 1.5 * curve.t_pup - curve.t_pup).abs() < 0.05 * curve.t_pup, "{tp}");
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_h,length_mm,phase\n"));
        assert!(text.trim_end().ends_with("pupated"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn phases_never_revert(temps in prop::collection::vec(5.0f64..30.0, 2..12), start in 0.0f64..0.9) {
            let field = hump_field();
            let n = temps.len();
            let times: Vec<f64> = (0..n).map(|i| -300.0 + 300.0 * i as f64 / (n - 1) as f64).collect();
            let profile = TemperatureProfile::new(times, temps).unwrap();
            let traj = reconstruct_growth(&field, &profile, -300.0 + 290.0 * start, 0.0, 1.0).unwrap();
            let rank = |p: &Phase| match p { Phase::Feeding => 0, Phase::PostFeeding => 1, Phase::Pupated => 2 };
            prop_assert!(traj.phases.windows(2).all(|w| rank(&w[0]) <= rank(&w[1])));
            for (w, p) in traj.lengths.windows(2).zip(&traj.phases) {
                if *p == Phase::Feeding {
                    prop_assert!(w[1] >= w[0]);
                }
                if *p == Phase::PostFeeding {
                    prop_assert!(w[1] <= w[0]);
                }
            }
        }
    }

    #[test]
    fn refinement_converges_first_order() {
        let field = hump_field();
        let profile = TemperatureProfile::new(
            (0..=48).map(|i| -240.0 + 5.0 * i as f64).collect(),
            (0..=48).map(|i| 17.0 + 5.0 * (i as f64 * 0.4).sin()).collect(),
        )
        .unwrap();
        let end = |dt: f64| reconstruct_growth(&field, &profile, -200.0, -80.0, dt).unwrap().final_length();
        let (a, b, c) = (end(0.2), end(0.1), end(0.05));
        assert!((a - b).abs() <= 2.0 * (b - c).abs() + 1e-6, "{a} {b} {c}");
    }
}
