//! Interpolation on uniform grids.
//!
//! Values use a local cubic Hermite interpolant whose node slopes are central
//! differences (second-order one-sided differences at the ends). It reproduces
//! polynomials up to degree two exactly and is C¹, which keeps composed
//! interpolants (curve -> shape -> curve) consistent far below linear
//! interpolation error. Derivative samples are interpolated linearly.

use crate::scalar::Scalar;

/// Segment index and fractional position of `x` on the uniform grid with `n`
/// nodes spanning `[lo, hi]`. `x` is clamped into the span.
#[inline]
pub fn locate<F: Scalar>(lo: F, hi: F, n: usize, x: F) -> (usize, F) {
    debug_assert!(n >= 2);
    let segments = F::from_count(n - 1);
    let pos = ((x - lo) / (hi - lo) * segments).max(F::zero()).min(segments);
    let i = pos.floor().to_usize().unwrap_or(0).min(n - 2);
    (i, pos - F::from_count(i))
}

#[inline]
pub fn linear<F: Scalar>(lo: F, hi: F, ys: &[F], x: F) -> F {
    let (i, theta) = locate(lo, hi, ys.len(), x);
    ys[i] + (ys[i + 1] - ys[i]) * theta
}

/// Node slope in units of "per grid step".
#[inline]
fn node_slope<F: Scalar>(ys: &[F], i: usize) -> F {
    let n = ys.len();
    let half = F::lit(0.5);
    if n == 2 {
        return ys[1] - ys[0];
    }
    if i == 0 {
        (F::lit(-3.0) * ys[0] + F::lit(4.0) * ys[1] - ys[2]) * half
    } else if i == n - 1 {
        (F::lit(3.0) * ys[n - 1] - F::lit(4.0) * ys[n - 2] + ys[n - 3]) * half
    } else {
        (ys[i + 1] - ys[i - 1]) * half
    }
}

/// Cubic Hermite value inside segment `i` at fraction `theta`.
#[inline]
pub fn cubic_segment<F: Scalar>(ys: &[F], i: usize, theta: F) -> F {
    let m0 = node_slope(ys, i);
    let m1 = node_slope(ys, i + 1);
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let two = F::lit(2.0);
    let three = F::lit(3.0);
    let h00 = two * t3 - three * t2 + F::one();
    let h10 = t3 - two * t2 + theta;
    let h01 = three * t2 - two * t3;
    let h11 = t3 - t2;
    h00 * ys[i] + h10 * m0 + h01 * ys[i + 1] + h11 * m1
}

#[inline]
pub fn cubic<F: Scalar>(lo: F, hi: F, ys: &[F], x: F) -> F {
    let (i, theta) = locate(lo, hi, ys.len(), x);
    cubic_segment(ys, i, theta)
}
