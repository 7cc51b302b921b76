//! Standard normal density, distribution function and its inverse.

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function, accurate in relative terms in the lower tail.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse of the standard normal distribution function.
///
/// Acklam's rational approximation followed by one Halley step against
/// [`norm_cdf`]. The upper half is computed by reflection from `1 - u`,
/// which is exact for `u >= 0.5`, so both tails keep full relative accuracy.
pub fn inv_normal_cdf(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!(
            "inverse normal CDF needs u in (0,1), got {u}"
        )));
    }
    Ok(probit(u))
}

/// Unchecked variant of [`inv_normal_cdf`] for hot loops whose inputs are
/// known to lie strictly inside (0,1).
#[inline]
pub(crate) fn probit(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    if u > 0.5 {
        -lower_half(1.0 - u)
    } else {
        lower_half(u)
    }
}

// q in (0, 0.5]
#[inline]
fn lower_half(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const Q_LOW: f64 = 0.024_25;

    let x = if q < Q_LOW {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else {
        let t = q - 0.5;
        let s = t * t;
        (((((A[0] * s + A[1]) * s + A[2]) * s + A[3]) * s + A[4]) * s + A[5]) * t
            / (((((B[0] * s + B[1]) * s + B[2]) * s + B[3]) * s + B[4]) * s + 1.0)
    };

    // Halley refinement; x <= 0 here so norm_cdf(x) is a lower-tail value.
    let e = norm_cdf(x) - q;
    let step = e * SQRT_2PI * (0.5 * x * x).exp();
    x - step / (1.0 + 0.5 * x * step)
}
