//! Small numerical helpers for the likelihood machinery.

use crate::scalar::Scalar;

/// Inverse of the standard normal CDF.
///
/// Rational approximation of P. J. Acklam (relative error below 1.2e-9).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0, 1), got {p}");
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let q = (-2.0 * q.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail(p)
    } else if p > 1.0 - P_LOW {
        -tail(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// `1 - α` quantile of the chi-squared distribution with one degree of
/// freedom, as the square of the normal `1 - α/2` quantile.
pub fn chi2_1_quantile(level: f64) -> f64 {
    let z = normal_quantile(0.5 + 0.5 * level);
    z * z
}

pub fn mean<F: Scalar>(xs: &[F]) -> F {
    xs.iter().copied().sum::<F>() / F::from_count(xs.len())
}

/// Sample variance with the `n - 1` denominator; `None` for fewer than two
/// values.
pub fn sample_variance<F: Scalar>(xs: &[F]) -> Option<F> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: F = xs.iter().map(|x| (*x - m) * (*x - m)).sum();
    Some(ss / F::from_count(xs.len() - 1))
}

/// Mean and sample standard deviation (n - 1 denominator).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    (mean(xs), sample_variance(xs).map_or(0.0, f64::sqrt))
}
