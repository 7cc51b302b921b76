//! Direct transcriptions of the discretized quantities, with nested loops
//! instead of running sums.

use nalgebra::DMatrix;

use crate::model::MarketParams;
use crate::pathgen::TimeGrid;

/// Σ of `(W_{t_2} − W_{t_1}, …, W_{t_d} − W_{t_1})` as `LL′`, where row `i`
/// of `L` holds `sqrt(Δt)` for each of the Brownian steps `2..=i+2`.
pub fn naive_covariance(grid: &TimeGrid) -> DMatrix<f64> {
    let n = grid.d() - 1;
    let sqrt_dt = grid.step().sqrt();
    let l = DMatrix::from_fn(n, n, |i, k| if k <= i { sqrt_dt } else { 0.0 });
    &l * l.transpose()
}

/// Prices and path integrals of one discretized path.
#[derive(Debug, Clone, PartialEq)]
pub struct NaivePath {
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub s_avg: f64,
    /// `Δt Σ_j S_j (W_j − σt_j)`.
    pub lin_g: f64,
    /// `Δt² Σ_u S_u Σ_{t≥u} S_t (W_t − σt)`.
    pub dbl_g: f64,
}

/// Builds the path from `W_{t_1} = sqrt(t_1) x1` and the increments `y`.
pub fn naive_path(params: &MarketParams, grid: &TimeGrid, x1: f64, y: &[f64]) -> NaivePath {
    let d = grid.d();
    let dt = grid.step();
    let w: Vec<f64> = (0..d)
        .map(|j| grid.time(1).sqrt() * x1 + if j == 0 { 0.0 } else { y[j - 1] })
        .collect();
    let s: Vec<f64> = (0..d)
        .map(|j| {
            params.s0
                * ((params.r - 0.5 * params.sigma.powi(2)) * grid.time(j + 1) + params.sigma * w[j])
                    .exp()
        })
        .collect();
    let g = |j: usize| w[j] - params.sigma * grid.time(j + 1);
    let s_avg = s.iter().sum::<f64>() / d as f64;
    let lin_g = dt * (0..d).map(|j| s[j] * g(j)).sum::<f64>();
    let mut dbl_g = 0.0;
    for u in 0..d {
        for t in u..d {
            dbl_g += s[u] * s[t] * g(t);
        }
    }
    NaivePath {
        w,
        s,
        s_avg,
        lin_g,
        dbl_g: dt * dt * dbl_g,
    }
}
