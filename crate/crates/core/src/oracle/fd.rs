//! Finite-difference Greeks with common random numbers.

use crate::engine::{run_normal_batches, GreekEstimate, Sampler};
use crate::error::{Error, Result};
use crate::estimators::{GreekKind, OptionSpec};
use crate::model::MarketParams;
use crate::pathgen::TimeGrid;

/// `(f(x + h) − f(x − h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `(f(x + h) − 2f(x) + f(x − h)) / h²`.
pub fn second_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Discounted payoff on the path driven by the standard normals `x`, built
/// directly as `W_{t_j} = sqrt(Δt) Σ_{i≤j} x_i`.
pub fn discounted_payoff(
    option: &OptionSpec,
    params: &MarketParams,
    grid: &TimeGrid,
    x: &[f64],
) -> f64 {
    let omega = params.omega();
    let sqrt_dt = grid.step().sqrt();
    let mut w = 0.0;
    let mut sum = 0.0;
    for (j, xi) in x.iter().enumerate() {
        w += sqrt_dt * xi;
        sum += params.s0 * (omega * grid.time(j + 1) + params.sigma * w).exp();
    }
    params.discount() * option.payoff(sum / x.len() as f64)
}

fn bumped(params: &MarketParams, greek: GreekKind, by: f64) -> MarketParams {
    let mut p = *params;
    match greek {
        GreekKind::Delta | GreekKind::Gamma => p.s0 += by,
        GreekKind::Vega => p.sigma += by,
    }
    p
}

/// Per-path difference quotient; the same `x` drives every bumped price.
fn fd_sample(
    greek: GreekKind,
    option: &OptionSpec,
    params: &MarketParams,
    grid: &TimeGrid,
    bump: f64,
    x: &[f64],
) -> f64 {
    let price = |by: f64| discounted_payoff(option, &bumped(params, greek, by), grid, x);
    match greek {
        GreekKind::Delta | GreekKind::Vega => central_difference(price, 0.0, bump),
        GreekKind::Gamma => second_difference(price, 0.0, bump),
    }
}

fn check_bump(greek: GreekKind, params: &MarketParams, bump: f64) -> Result<()> {
    let room = match greek {
        GreekKind::Delta | GreekKind::Gamma => params.s0,
        GreekKind::Vega => params.sigma,
    };
    if !(bump > 0.0 && bump < room) {
        return Err(Error::Config(format!(
            "bump must lie in (0, {room}), got {bump}"
        )));
    }
    Ok(())
}

/// Finite-difference Greek from `n` plain MC paths.
///
/// `bump` is absolute: it moves `S0` for delta and gamma and `σ` for vega.
pub fn finite_difference_greek(
    greek: GreekKind,
    option: &OptionSpec,
    params: &MarketParams,
    grid: &TimeGrid,
    n: usize,
    seed: u64,
    bump: f64,
) -> Result<f64> {
    check_bump(greek, params, bump)?;
    let mut eval = |x: &[f64]| fd_sample(greek, option, params, grid, bump, x);
    crate::engine::batch_mean(Sampler::Mc, grid.d(), n, seed, 0, &mut eval)
}

/// [`finite_difference_greek`] over `m` independent batches, for a standard error.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_batches(
    greek: GreekKind,
    option: &OptionSpec,
    params: &MarketParams,
    grid: &TimeGrid,
    m: usize,
    n: usize,
    seed: u64,
    bump: f64,
) -> Result<GreekEstimate> {
    check_bump(greek, params, bump)?;
    run_normal_batches(Sampler::Mc, grid.d(), m, n, seed, || {
        move |x: &[f64]| fd_sample(greek, option, params, grid, bump, x)
    })
}
