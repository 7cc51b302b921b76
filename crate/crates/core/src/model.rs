//! Discretized Black–Scholes paths with the first normal coordinate separated.
//!
//! A path is driven by `X = (X1, Z)`: `W_{t_1} = sqrt(t_1) X1` and the
//! increments after `t_1` are `Y = AZ`. Prices then split as
//! `S_j = S̃_j · exp(ω t_1 + σ sqrt(t_1) X1)` where `S̃_j` depends on `Z` only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathgen::{FactorizedCovariance, TimeGrid};

/// Model constants of the one-asset Black–Scholes market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub s0: f64,
    pub sigma: f64,
    pub r: f64,
    #[serde(alias = "T")]
    pub maturity: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl MarketParams {
    pub fn new(s0: f64, sigma: f64, r: f64, maturity: f64) -> Result<Self> {
        let p = Self {
            s0,
            sigma,
            r,
            maturity,
        };
        p.validate()?;
        Ok(p)
    }

    /// S0 = 100, σ = 0.2, r = 0.1, T = 1.
    pub fn reference() -> Self {
        Self {
            s0: 100.0,
            sigma: 0.2,
            r: 0.1,
            maturity: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("s0", self.s0)?;
        positive("sigma", self.sigma)?;
        positive("maturity", self.maturity)?;
        if !self.r.is_finite() {
            return Err(Error::Config(format!("r must be finite, got {}", self.r)));
        }
        Ok(())
    }

    /// Risk-neutral log drift `r - σ²/2`.
    #[inline]
    pub fn omega(&self) -> f64 {
        self.r - 0.5 * self.sigma * self.sigma
    }

    #[inline]
    pub fn discount(&self) -> f64 {
        (-self.r * self.maturity).exp()
    }
}

/// One simulated path and the functionals the estimators consume.
///
/// `lin_*` and `dbl_*` are the grid versions of `∫ S_t g_t dt` and
/// `∫ S_u ∫_u^T S_t g_t dt du` with `g_t = W_t - σt`; the tilde variants use
/// `S̃` and `Y_j = A_{j-1}Z` in place of `S` and `W`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathSample {
    pub x1: f64,
    pub z: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub s: Vec<f64>,
    pub s_tilde: Vec<f64>,
    pub s_avg: f64,
    pub s_tilde_avg: f64,
    pub lin_g: f64,
    pub dbl_g: f64,
    pub lin_g_tilde: f64,
    pub dbl_g_tilde: f64,
    /// `(T²/d²) Σ_i Σ_{j≥i} S̃_i S̃_j`.
    pub dbl_s_tilde: f64,
}

impl PathSample {
    pub fn with_dim(d: usize) -> Self {
        Self {
            z: vec![0.0; d.saturating_sub(1)],
            w_tilde: vec![0.0; d],
            s: vec![0.0; d],
            s_tilde: vec![0.0; d],
            ..Default::default()
        }
    }

    /// `S_d`.
    #[inline]
    pub fn s_last(&self) -> f64 {
        *self.s.last().expect("path has at least one date")
    }

    /// `S̃_d`.
    #[inline]
    pub fn s_tilde_last(&self) -> f64 {
        *self.s_tilde.last().expect("path has at least one date")
    }

    /// Fills the `Z`-dependent fields from the increments `y = AZ` (length `d - 1`).
    pub fn fill_tilde(&mut self, params: &MarketParams, grid: &TimeGrid, y: &[f64]) {
        let d = grid.d();
        debug_assert_eq!(y.len(), d - 1);
        self.s_tilde.resize(d, 0.0);
        let omega = params.omega();
        let sigma = params.sigma;
        let t1 = grid.time(1);
        let dt = grid.step();

        let mut sum = 0.0;
        let mut lin = 0.0;
        let mut dbl_g = 0.0;
        let mut dbl_s = 0.0;
        for j in 1..=d {
            let tj = grid.time(j);
            let yj = if j == 1 { 0.0 } else { y[j - 2] };
            let st = params.s0 * (omega * (tj - t1) + sigma * yj).exp();
            self.s_tilde[j - 1] = st;
            sum += st;
            let g = yj - sigma * tj;
            lin += st * g;
            // sum holds Σ_{i≤j} S̃_i here
            dbl_g += st * g * sum;
            dbl_s += st * sum;
        }
        self.s_tilde_avg = sum / d as f64;
        self.lin_g_tilde = dt * lin;
        self.dbl_g_tilde = dt * dt * dbl_g;
        self.dbl_s_tilde = dt * dt * dbl_s;
    }

    /// Fills every field from `x1` and the increments `y = AZ`.
    pub fn fill(&mut self, params: &MarketParams, grid: &TimeGrid, x1: f64, y: &[f64]) {
        self.fill_tilde(params, grid, y);
        self.fill_prices(params, grid, x1, y);
    }

    /// Fills only the fields the Malliavin estimators read: `x1`, `w_tilde`,
    /// `s`, `s_avg`, `lin_g` and `dbl_g`.
    pub fn fill_prices(&mut self, params: &MarketParams, grid: &TimeGrid, x1: f64, y: &[f64]) {
        let d = grid.d();
        debug_assert_eq!(y.len(), d - 1);
        self.x1 = x1;
        self.w_tilde.resize(d, 0.0);
        self.s.resize(d, 0.0);
        let omega = params.omega();
        let sigma = params.sigma;
        let w1 = grid.time(1).sqrt() * x1;
        let dt = grid.step();

        let mut sum = 0.0;
        let mut lin = 0.0;
        let mut dbl = 0.0;
        for j in 1..=d {
            let tj = grid.time(j);
            let w = if j == 1 { w1 } else { w1 + y[j - 2] };
            let s = params.s0 * (omega * tj + sigma * w).exp();
            self.w_tilde[j - 1] = w;
            self.s[j - 1] = s;
            sum += s;
            let g = w - sigma * tj;
            lin += s * g;
            dbl += s * g * sum;
        }
        self.s_avg = sum / d as f64;
        self.lin_g = dt * lin;
        self.dbl_g = dt * dt * dbl;
    }
}

/// Builds the path for `x = (X1, Z)` under the factor `A`.
pub fn simulate_path(
    params: &MarketParams,
    grid: &TimeGrid,
    factor: &FactorizedCovariance,
    x: &[f64],
) -> Result<PathSample> {
    let d = grid.d();
    if x.len() != d {
        return Err(Error::Shape {
            expected: d,
            got: x.len(),
        });
    }
    if factor.dim() + 1 != d {
        return Err(Error::Shape {
            expected: d - 1,
            got: factor.dim(),
        });
    }
    let mut y = vec![0.0; d - 1];
    factor.apply(&x[1..], &mut y);
    let mut path = PathSample::with_dim(d);
    path.z.copy_from_slice(&x[1..]);
    path.fill(params, grid, x[0], &y);
    Ok(path)
}
