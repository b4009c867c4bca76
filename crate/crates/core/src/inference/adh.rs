//! Accumulated degree-hours baseline.

use super::InferenceError;
use crate::data::TemperatureProfile;
use crate::scalar::Scalar;

/// Latest time `t` with `∫_t^{t*} max(T, 0) ds >= adh_required`.
///
/// Node temperatures are clipped at zero and integrated backwards from `t_star`
/// with the trapezoidal rule. Inside the segment where the requirement is met
/// the linear integrand is inverted exactly.
pub fn adh_time<F: Scalar>(
    profile: &TemperatureProfile<F>,
    adh_required: F,
    t_star: F,
) -> Result<F, InferenceError> {
    if !(adh_required > F::zero() && adh_required.is_finite()) {
        return Err(InferenceError::InvalidGrid(format!(
            "required degree-hours must be positive, got {adh_required}"
        )));
    }
    let temp_star = profile.temperature_at(t_star)?;
    let times = profile.times();
    let temps = profile.temps();
    let mut hi_t = t_star;
    let mut hi_f = temp_star.max(F::zero());
    let mut acc = F::zero();
    let first_below = times.partition_point(|t| *t < t_star);
    for j in (0..first_below).rev() {
        let (lo_t, lo_f) = (times[j], temps[j].max(F::zero()));
        let h = hi_t - lo_t;
        let area = (lo_f + hi_f) * h / F::lit(2.0);
        let need = adh_required - acc;
        if area >= need {
            // f(hi_t - s) = hi_f + (lo_f - hi_f) s / h; solve the integral over
            // [hi_t - s, hi_t] for s.
            let k = (lo_f - hi_f) / (F::lit(2.0) * h);
            let disc = (hi_f * hi_f + F::lit(4.0) * k * need).max(F::zero());
            let s = F::lit(2.0) * need / (hi_f + disc.sqrt());
            return Ok(hi_t - s.min(h));
        }
        acc += area;
        hi_t = lo_t;
        hi_f = lo_f;
    }
    Err(InferenceError::InsufficientSpan {
        available: acc.as_f64(),
        required: adh_required.as_f64(),
        t_star: t_star.as_f64(),
    })
}

/// Laying-time interval `[earliest, latest]` for a range of required
/// degree-hours.
pub fn adh_interval<F: Scalar>(
    profile: &TemperatureProfile<F>,
    adh_lo: F,
    adh_hi: F,
    t_star: F,
) -> Result<(F, F), InferenceError> {
    let (a, b) = if adh_lo <= adh_hi { (adh_lo, adh_hi) } else { (adh_hi, adh_lo) };
    Ok((adh_time(profile, b, t_star)?, adh_time(profile, a, t_star)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_profile() -> TemperatureProfile<f64> {
        let temps = (0..=100).map(|i| if i < 50 { 10.0 } else { 20.0 }).collect();
        TemperatureProfile::hourly(-100.0, temps).unwrap()
    }

    #[test]
    fn constant_temperature() {
        let p = TemperatureProfile::constant(16.0, -300.0, 0.0).unwrap();
        assert!((adh_time(&p, 1600.0f64, 0.0).unwrap() + 100.0).abs() < 1e-12);
        let p = TemperatureProfile::constant(10.0, -200.0, 0.0).unwrap();
        match adh_time(&p, 2500.0, 0.0) {
            Err(InferenceError::InsufficientSpan { available, .. }) => assert!((available - 2000.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_profile_by_hand() {
        let p = step_profile();
        // 50 h at 20 °C give 1000, the ramp hour [-51, -50] gives 15, then 10 per hour.
        assert!((adh_time(&p, 1000.0, 0.0).unwrap() + 50.0).abs() < 1e-12);
        assert!((adh_time(&p, 1100.0, 0.0).unwrap() + 59.5).abs() < 1e-12);
        // Inside the ramp: 20 s - 5 s^2 = 7.5.
        let s = 2.0 - 2.5f64.sqrt();
        assert!((adh_time(&p, 1007.5, 0.0).unwrap() + 50.0 + s).abs() < 1e-12);
        // Collection between samples.
        assert!((adh_time(&p, 100.0, -0.5).unwrap() + 5.5).abs() < 1e-12);
        let (lo, hi) = adh_interval(&p, 1100.0, 1000.0, 0.0).unwrap();
        assert!((lo + 59.5).abs() < 1e-12 && (hi + 50.0).abs() < 1e-12);
    }

    #[test]
    fn negative_temperatures_do_not_count() {
        let p = TemperatureProfile::hourly(-3.0, vec![10.0, -5.0, -5.0, 10.0]).unwrap();
        // [-1, 0] contributes 5, [-2, -1] nothing, [-3, -2] contributes 5.
        assert!((adh_time(&p, 10.0f64, 0.0).unwrap() + 3.0).abs() < 1e-12);
        assert!(adh_time(&p, 0.0, 0.0).is_err());
    }
}
