//! Closed-form conditional expectations of the Malliavin estimators given `Z`.
//!
//! With `c = exp(ωt_1 + σ sqrt(t_1) X1)` every price is `c·S̃_j`, so each
//! Malliavin weight is a short sum `Σ coef · X1^k · c^m` with `k ∈ {0,1}`,
//! `m ∈ {-2,..,0}` and `Z`-measurable coefficients. The payoff region is
//! `{X1 > ψ_d}` (or an interval for the barrier option), and every term
//! integrates against the normal density through
//!
//! ```text
//! ∫_ψ^∞ e^{m(a + bx)} φ(x) dx   = e^{ma + m²b²/2} Φ(mb − ψ)
//! ∫_ψ^∞ x e^{m(a + bx)} φ(x) dx = e^{ma + m²b²/2} (mb Φ(mb − ψ) + φ(ψ − mb))
//! ```
//!
//! with `a = ωt_1`, `b = σ sqrt(t_1)`. The call payoff `c S̃_A − K` shifts `m`
//! by one, and the barrier option is composed from call and binary pieces.

use super::{GreekKind, OptionKind, OptionSpec};
use crate::lowdisc::{norm_cdf, norm_pdf};
use crate::model::{MarketParams, PathSample};
use crate::pathgen::TimeGrid;

/// Threshold and normal tail terms for one strike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalTerms {
    /// `(ln K − ln S̃_A − ωt_1) / (σ sqrt(t_1))`.
    pub psi_d: f64,
    /// `Φ(−ψ_d)`.
    pub phi1: f64,
    /// `Φ(−σ sqrt(t_1) − ψ_d)`.
    pub phi2: f64,
    /// `Φ(−2σ sqrt(t_1) − ψ_d)`.
    pub phi3: f64,
    /// `Φ(σ sqrt(t_1) − ψ_d)`.
    pub phi2_tilde: f64,
    pub lin_g_tilde: f64,
    pub dbl_g_tilde: f64,
}

#[inline]
fn separation_constants(params: &MarketParams, grid: &TimeGrid) -> (f64, f64) {
    let t1 = grid.time(1);
    (params.omega() * t1, params.sigma * t1.sqrt())
}

#[inline]
fn threshold(strike: f64, s_tilde_avg: f64, a: f64, b: f64) -> f64 {
    (strike.ln() - s_tilde_avg.ln() - a) / b
}

pub fn conditional_terms(
    strike: f64,
    params: &MarketParams,
    grid: &TimeGrid,
    path: &PathSample,
) -> ConditionalTerms {
    let (a, b) = separation_constants(params, grid);
    let psi = threshold(strike, path.s_tilde_avg, a, b);
    ConditionalTerms {
        psi_d: psi,
        phi1: norm_cdf(-psi),
        phi2: norm_cdf(-b - psi),
        phi3: norm_cdf(-2.0 * b - psi),
        phi2_tilde: norm_cdf(b - psi),
        lin_g_tilde: path.lin_g_tilde,
        dbl_g_tilde: path.dbl_g_tilde,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    coef: f64,
    x_power: u8,
    c_power: i8,
}

/// A Malliavin weight written as `Σ coef · X1^k · c^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightExpansion {
    terms: [Term; 4],
    len: usize,
    a: f64,
    b: f64,
}

impl WeightExpansion {
    pub fn new(
        greek: GreekKind,
        params: &MarketParams,
        grid: &TimeGrid,
        path: &PathSample,
    ) -> Self {
        let MarketParams {
            s0,
            sigma,
            r,
            maturity: t,
        } = *params;
        let omega = params.omega();
        let s2 = sigma * sigma;
        let sa = path.s_tilde_avg;
        let sd = path.s_tilde_last();
        let (a, b) = separation_constants(params, grid);
        let sqrt_t1 = grid.time(1).sqrt();
        let term = |coef, x_power, c_power| Term {
            coef,
            x_power,
            c_power,
        };
        let zero = term(0.0, 0, 0);
        let (terms, len) = match greek {
            GreekKind::Delta => {
                let k = 2.0 / (s0 * s2);
                (
                    [
                        term(k * (sd / (t * sa) - omega), 0, 0),
                        term(-k * s0 / (t * sa), 0, -1),
                        zero,
                        zero,
                    ],
                    2,
                )
            }
            GreekKind::Gamma => {
                let k = 4.0 / (s2 * s2 * s0 * s0 * t * t);
                let q = sd / sa;
                (
                    [
                        term(k * (q * q + omega * r * t * t - 2.0 * r * t * q), 0, 0),
                        term(k * s0 / sa * (2.0 * omega * t - 2.0 * q), 0, -1),
                        term(k * s0 * s0 / (sa * sa), 0, -2),
                        zero,
                    ],
                    3,
                )
            }
            GreekKind::Vega => {
                let k = 2.0 / (s2 * t * t * sa * sa);
                let p = sd - (r - s2) * t * sa;
                let lin = path.lin_g_tilde;
                let dbl = path.dbl_g_tilde;
                let quad = path.dbl_s_tilde;
                (
                    [
                        term(
                            k * (p * lin - s2 * dbl - 0.5 * sigma * t * t * sa * sa),
                            0,
                            0,
                        ),
                        term(k * sqrt_t1 * (p * t * sa - s2 * quad), 1, 0),
                        term(-k * s0 * lin, 0, -1),
                        term(-k * s0 * sqrt_t1 * t * sa, 1, -1),
                    ],
                    4,
                )
            }
        };
        Self { terms, len, a, b }
    }

    /// Evaluates the weight at a given `X1`; used to cross-check the expansion.
    pub fn eval(&self, x1: f64) -> f64 {
        let c = (self.a + self.b * x1).exp();
        self.terms[..self.len]
            .iter()
            .map(|t| t.coef * x1.powi(t.x_power as i32) * c.powi(t.c_power as i32))
            .sum()
    }

    /// `∫_ψ^∞ weight(x) φ(x) dx`.
    fn tail(&self, psi: f64, c_shift: i8) -> f64 {
        self.terms[..self.len]
            .iter()
            .map(|t| t.coef * tail_moment(t.x_power, t.c_power + c_shift, self.a, self.b, psi))
            .sum()
    }

    /// `∫_ψ^∞ 1 · weight · φ` with ψ from `strike`.
    fn binary(&self, strike: f64, s_tilde_avg: f64) -> f64 {
        self.tail(threshold(strike, s_tilde_avg, self.a, self.b), 0)
    }

    /// `∫_ψ^∞ (c S̃_A − K) · weight · φ`.
    fn call(&self, strike: f64, s_tilde_avg: f64) -> f64 {
        let psi = threshold(strike, s_tilde_avg, self.a, self.b);
        s_tilde_avg * self.tail(psi, 1) - strike * self.tail(psi, 0)
    }
}

/// `∫_ψ^∞ x^k e^{m(a + bx)} φ(x) dx` for `k ∈ {0, 1}`.
#[inline]
fn tail_moment(x_power: u8, c_power: i8, a: f64, b: f64, psi: f64) -> f64 {
    let mb = c_power as f64 * b;
    let scale = (c_power as f64 * a + 0.5 * mb * mb).exp();
    let upper = norm_cdf(mb - psi);
    match x_power {
        0 => scale * upper,
        1 => scale * (mb * upper + norm_pdf(psi - mb)),
        _ => unreachable!("weights are at most linear in X1"),
    }
}

/// `G_{·,1}(K; Z)`: conditional expectation for the binary payoff `1{S_A > K}`.
pub fn binary_closed_form(
    greek: GreekKind,
    strike: f64,
    params: &MarketParams,
    grid: &TimeGrid,
    path: &PathSample,
) -> f64 {
    let w = WeightExpansion::new(greek, params, grid, path);
    params.discount() * w.binary(strike, path.s_tilde_avg)
}

/// `G_{·,2}(K; Z)`: conditional expectation for the call payoff `(S_A − K)^+`.
pub fn call_closed_form(
    greek: GreekKind,
    strike: f64,
    params: &MarketParams,
    grid: &TimeGrid,
    path: &PathSample,
) -> f64 {
    let w = WeightExpansion::new(greek, params, grid, path);
    params.discount() * w.call(strike, path.s_tilde_avg)
}

/// Conditional Malliavin estimate `E[θ̂_d | Z]`.
///
/// Reads only the `Z`-dependent fields of `path`; the result does not depend
/// on `path.x1`.
pub fn cmv_estimate(
    greek: GreekKind,
    option: &OptionSpec,
    params: &MarketParams,
    grid: &TimeGrid,
    path: &PathSample,
) -> f64 {
    let w = WeightExpansion::new(greek, params, grid, path);
    let sa = path.s_tilde_avg;
    let k = option.strike;
    let value = match option.kind {
        OptionKind::BinaryAsian => w.binary(k, sa),
        OptionKind::AsianCall => w.call(k, sa),
        OptionKind::UpAndOutAsianCall => {
            let h = option.barrier.expect("validated on construction");
            // (a−K)^+ 1{a≤H} = (a−K)^+ − (a−H)^+ − (H−K) 1{a>H}
            w.call(k, sa) - (w.call(h, sa) + (h - k) * w.binary(h, sa))
        }
    };
    params.discount() * value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::mv_weight;
    use crate::pathgen::{build_covariance, factorize, Construction};

    fn path_for(d: usize, x1: f64, seed: u32) -> (MarketParams, TimeGrid, PathSample) {
        let p = MarketParams::reference();
        let g = TimeGrid::new(d, 1.0).unwrap();
        let f = factorize(&build_covariance(&g).unwrap(), Construction::Std, None).unwrap();
        let mut x: Vec<f64> = (0..d)
            .map(|i| ((i as u32).wrapping_mul(2654435761) ^ seed) % 1000)
            .map(|v| v as f64 / 400.0 - 1.25)
            .collect();
        x[0] = x1;
        let path = crate::model::simulate_path(&p, &g, &f, &x).unwrap();
        (p, g, path)
    }

    #[test]
    fn expansion_reproduces_weight_pointwise() {
        for d in [2, 5, 16] {
            for x1 in [-2.0, -0.3, 0.0, 0.7, 1.9] {
                let (p, g, path) = path_for(d, x1, 17);
                for greek in GreekKind::ALL {
                    let direct = mv_weight(greek, &p, &g, &path);
                    let expanded = WeightExpansion::new(greek, &p, &g, &path).eval(x1);
                    assert!(
                        (direct - expanded).abs() <= 1e-10 * direct.abs().max(1e-3),
                        "{greek} d={d} x1={x1}: {direct} vs {expanded}"
                    );
                }
            }
        }
    }

    #[test]
    fn psi_zero_when_average_equals_strike_without_drift() {
        let p = MarketParams {
            s0: 100.0,
            sigma: 0.2,
            r: 0.5 * 0.2 * 0.2,
            maturity: 1.0,
        };
        assert_eq!(p.omega(), 0.0);
        let g = TimeGrid::new(4, 1.0).unwrap();
        let path = PathSample {
            s_tilde_avg: 100.0,
            ..PathSample::with_dim(4)
        };
        let c = conditional_terms(100.0, &p, &g, &path);
        assert_eq!(c.psi_d, 0.0);
        assert_eq!(c.phi1, 0.5);
    }

    #[test]
    fn tiny_strike_pushes_threshold_to_minus_infinity() {
        let (p, g, path) = path_for(8, 0.0, 3);
        let c = conditional_terms(1e-8, &p, &g, &path);
        assert!(c.psi_d < -100.0);
        assert_eq!(c.phi1, 1.0);
    }

    #[test]
    fn threshold_matches_direct_formula_on_zero_path() {
        let p = MarketParams::reference();
        let g = TimeGrid::new(64, 1.0).unwrap();
        let mut path = PathSample::with_dim(64);
        path.fill(&p, &g, 0.0, &[0.0; 63]);
        let sa: f64 = (1..=64)
            .map(|j| 100.0 * (0.08 * (j as f64 - 1.0) / 64.0).exp())
            .sum::<f64>()
            / 64.0;
        let expect = (100f64.ln() - sa.ln() - 0.08 / 64.0) / (0.2 * (1.0f64 / 64.0).sqrt());
        let c = conditional_terms(100.0, &p, &g, &path);
        assert!((c.psi_d - expect).abs() < 1e-10);
        assert!(c.phi1 > 0.0 && c.phi1 < 1.0);
        assert!(c.phi2 < c.phi1 && c.phi3 < c.phi2 && c.phi2_tilde > c.phi1);
    }

    #[test]
    fn invariant_to_first_coordinate() {
        let opts = [
            OptionSpec::binary(100.0).unwrap(),
            OptionSpec::call(100.0).unwrap(),
            OptionSpec::up_and_out(100.0, 120.0).unwrap(),
        ];
        for greek in GreekKind::ALL {
            for o in &opts {
                let (p, g, a) = path_for(8, -1.3, 9);
                let (_, _, b) = path_for(8, 2.1, 9);
                let va = cmv_estimate(greek, o, &p, &g, &a);
                let vb = cmv_estimate(greek, o, &p, &g, &b);
                assert_eq!(va.to_bits(), vb.to_bits());
            }
        }
    }

    #[test]
    fn barrier_at_infinity_reduces_to_call() {
        let (p, g, path) = path_for(16, 0.0, 5);
        for greek in GreekKind::ALL {
            let uo = cmv_estimate(
                greek,
                &OptionSpec::up_and_out(100.0, 1e9).unwrap(),
                &p,
                &g,
                &path,
            );
            let call = cmv_estimate(greek, &OptionSpec::call(100.0).unwrap(), &p, &g, &path);
            assert!((uo - call).abs() <= 1e-9, "{greek}: {uo} vs {call}");
        }
    }
}
