//! Malliavin weights of the simple Asian option, on the monitoring grid.

use super::{GreekKind, OptionSpec};
use crate::model::{MarketParams, PathSample};
use crate::pathgen::TimeGrid;

/// Weight multiplying `e^{-rT} f(S_A)`. The discount is not included.
#[inline]
pub fn mv_weight(
    greek: GreekKind,
    params: &MarketParams,
    grid: &TimeGrid,
    path: &PathSample,
) -> f64 {
    let MarketParams {
        s0,
        sigma,
        r,
        maturity: t,
    } = *params;
    let omega = params.omega();
    let s2 = sigma * sigma;
    let sa = path.s_avg;
    let sd = path.s_last();
    debug_assert_eq!(path.s.len(), grid.d());
    match greek {
        GreekKind::Delta => 2.0 / (s0 * s2) * ((sd - s0) / (t * sa) - omega),
        GreekKind::Gamma => {
            let scale = 4.0 / (s2 * s2 * s0 * s0 * t * t * sa * sa);
            scale
                * (sd * sd - 2.0 * sd * s0 + s0 * s0 + omega * r * t * t * sa * sa
                    - 2.0 * r * t * sd * sa
                    + 2.0 * omega * t * s0 * sa)
        }
        GreekKind::Vega => {
            let scale = 2.0 / (s2 * t * t * sa * sa);
            scale
                * ((sd - s0 - (r - s2) * t * sa) * path.lin_g
                    - s2 * path.dbl_g
                    - 0.5 * sigma * t * t * sa * sa)
        }
    }
}

/// One draw of the discretized Malliavin estimator `e^{-rT} f(S_A) · weight`.
#[inline]
pub fn mv_estimate(
    greek: GreekKind,
    option: &OptionSpec,
    params: &MarketParams,
    grid: &TimeGrid,
    path: &PathSample,
) -> f64 {
    let f = option.payoff(path.s_avg);
    if f == 0.0 {
        return 0.0;
    }
    params.discount() * f * mv_weight(greek, params, grid, path)
}
