//! Malliavin delta for payoffs of both the terminal price and the average,
//! using the centred weight function `a_t = T/2 − t`.

use crate::error::{Error, Result};
use crate::model::{MarketParams, PathSample};
use crate::pathgen::TimeGrid;

/// Grid versions of the time integrals in the complex-Asian delta weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexDeltaIntegrals {
    /// `(T/d) Σ_j W_{t_j}` for `∫ W_t dt`.
    pub int_w: f64,
    /// `(T²/d²) Σ_ν a_ν Σ_{u≤ν} S_u` for `h_T`.
    pub h: f64,
    /// `(T²/d²) Σ_t a_t Σ_{u≥t} S_u` for `∫ a_t ∫_t^T S_u du dt`.
    pub tail: f64,
    /// `(T³/d³) Σ_t a_t Σ_{ν≥t} a_ν Σ_{t≤u≤ν} S_u` for the triple integral.
    pub triple: f64,
}

/// Computes [`ComplexDeltaIntegrals`] in `O(d)` with prefix and suffix sums.
pub fn complex_delta_integrals(grid: &TimeGrid, path: &PathSample) -> ComplexDeltaIntegrals {
    let d = grid.d();
    let t = grid.maturity();
    let dt = grid.step();
    let weight = |j: usize| 0.5 * t - grid.time(j);

    let mut prefix = 0.0;
    let mut int_w = 0.0;
    let mut h = 0.0;
    for j in 1..=d {
        prefix += path.s[j - 1];
        int_w += path.w_tilde[j - 1];
        h += weight(j) * prefix;
    }

    // Σ_t a_t Σ_{ν≥t} a_ν (P_ν − P_{t−1}) with P the prefix sums of S.
    // Walk t downwards keeping Σ_{ν≥t} a_ν and Σ_{ν≥t} a_ν P_ν.
    let mut prefixes = vec![0.0; d + 1];
    for j in 1..=d {
        prefixes[j] = prefixes[j - 1] + path.s[j - 1];
    }
    let mut suffix_s = 0.0;
    let mut suffix_a = 0.0;
    let mut suffix_ap = 0.0;
    let mut tail = 0.0;
    let mut triple = 0.0;
    for j in (1..=d).rev() {
        let a = weight(j);
        suffix_s += path.s[j - 1];
        suffix_a += a;
        suffix_ap += a * prefixes[j];
        tail += a * suffix_s;
        triple += a * (suffix_ap - prefixes[j - 1] * suffix_a);
    }

    ComplexDeltaIntegrals {
        int_w: dt * int_w,
        h: dt * dt * h,
        tail: dt * dt * tail,
        triple: dt * dt * dt * triple,
    }
}

/// One draw of the complex-Asian delta estimator with payoff `payoff2(S_d, S_A)`.
///
/// Fails when the grid version of `h_T` vanishes, which has probability zero.
pub fn mv_estimate_complex_delta(
    params: &MarketParams,
    grid: &TimeGrid,
    path: &PathSample,
    payoff2: &dyn Fn(f64, f64) -> f64,
) -> Result<f64> {
    let integrals = complex_delta_integrals(grid, path);
    let h = integrals.h;
    if h.abs() < 1e-12 {
        return Err(Error::DegenerateWeight(format!(
            "h_T = {h:e} on the monitoring grid"
        )));
    }
    let f = payoff2(path.s_last(), path.s_avg);
    if f == 0.0 {
        return Ok(0.0);
    }
    let MarketParams {
        s0,
        sigma,
        r,
        maturity: t,
    } = *params;
    let sa = path.s_avg;
    let sd = path.s_last();
    let w_t = *path.w_tilde.last().expect("non-empty path");
    let weight = (sd - s0 - r * t * sa) / (sigma * sigma * t * sa)
        - t * sa / (2.0 * sigma * h) * (integrals.int_w - 0.5 * t * w_t)
        + integrals.tail / (2.0 * h)
        + 0.5
        - t * sa * integrals.triple / (2.0 * h * h);
    Ok(params.discount() * f * weight / s0)
}
