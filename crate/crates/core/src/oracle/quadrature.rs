//! Adaptive Gauss–Kronrod (7/15) quadrature and the conditional-expectation
//! oracle built on it.

use crate::error::{Error, Result};
use crate::estimators::{mv_estimate, mv_weight, GreekKind, OptionKind, OptionSpec};
use crate::lowdisc::norm_pdf;
use crate::model::{MarketParams, PathSample};
use crate::pathgen::TimeGrid;

/// Normal mass beyond this point is below 1e−16 on each side.
pub const NORMAL_CUTOFF: f64 = 8.5;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integration interval and stopping rule. Infinite bounds are clipped to
/// `±NORMAL_CUTOFF` by the normal-weighted routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub lower: f64,
    pub upper: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            abs_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let value = half * kronrod;
    let error = (half * (kronrod - gauss)).abs();
    Segment { a, b, value, error }
}

/// Globally adaptive integration of `f` over a finite `[a, b]`: the segment
/// with the largest error estimate is bisected until the summed estimate
/// drops below `abs_tol`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::OracleFailure(format!(
            "interval [{a}, {b}] must be finite"
        )));
    }
    if !(abs_tol > 0.0) {
        return Err(Error::OracleFailure(format!(
            "abs_tol must be positive, got {abs_tol}"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, abs_tol, max_subdivisions).map(|v| -v);
    }
    let mut segments = vec![kronrod(&mut f, a, b)];
    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if !total_error.is_finite() {
            return Err(Error::OracleFailure("non-finite integrand".into()));
        }
        if total_error <= abs_tol {
            return Ok(segments.iter().map(|s| s.value).sum());
        }
        if segments.len() >= max_subdivisions {
            return Err(Error::OracleFailure(format!(
                "no convergence after {max_subdivisions} subdivisions (error estimate {total_error:e})"
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            return Err(Error::OracleFailure(format!(
                "segment around {mid} cannot be split further"
            )));
        }
        segments.push(kronrod(&mut f, s.a, mid));
        segments.push(kronrod(&mut f, mid, s.b));
    }
}

/// `∫ h(x) φ(x) dx` over `[spec.lower, spec.upper] ∩ [−8.5, 8.5]`.
pub fn integrate_normal<F: FnMut(f64) -> f64>(mut h: F, spec: &QuadratureSpec) -> Result<f64> {
    let lo = spec.lower.max(-NORMAL_CUTOFF);
    let hi = spec.upper.min(NORMAL_CUTOFF);
    if lo >= hi {
        return Ok(0.0);
    }
    integrate(
        |x| h(x) * norm_pdf(x),
        lo,
        hi,
        spec.abs_tol,
        spec.max_subdivisions,
    )
}

/// `X1` at which the average price equals `level`, given the increments.
///
/// Found from the average at `X1 = 0`, since `S_A(x) = S_A(0) e^{σ sqrt(t_1) x}`.
pub fn crossing_point(level: f64, params: &MarketParams, grid: &TimeGrid, y: &[f64]) -> f64 {
    let mut path = PathSample::with_dim(grid.d());
    path.fill_prices(params, grid, 0.0, y);
    (level / path.s_avg).ln() / (params.sigma * grid.time(1).sqrt())
}

/// `E[θ̂_d | Z]` by integrating the Malliavin estimate over `X1`.
///
/// `y` holds the increments `W_{t_j} − W_{t_1}` for `j = 2..d`, i.e. `Z`
/// mapped through any factor of Σ. The integration domain is the payoff
/// region in `X1` intersected with `[spec.lower, spec.upper]`; for the
/// barrier option it is the interval between the strike and barrier
/// crossings.
pub fn conditional_quadrature(
    greek: GreekKind,
    option: &OptionSpec,
    params: &MarketParams,
    grid: &TimeGrid,
    y: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    if y.len() + 1 != grid.d() {
        return Err(Error::Shape {
            expected: grid.d() - 1,
            got: y.len(),
        });
    }
    let psi_k = crossing_point(option.strike, params, grid, y);
    let psi_h = match option.kind {
        OptionKind::UpAndOutAsianCall => crossing_point(
            option.barrier.expect("validated on construction"),
            params,
            grid,
            y,
        ),
        _ => f64::INFINITY,
    };
    let region = QuadratureSpec {
        lower: spec.lower.max(psi_k),
        upper: spec.upper.min(psi_h),
        ..*spec
    };
    let mut path = PathSample::with_dim(grid.d());
    let mut failure = None;
    let value = integrate_normal(
        |x1| {
            path.fill_prices(params, grid, x1, y);
            // Inside the region the payoff is its smooth piece; no indicator,
            // so rounding at the end points cannot flip a branch.
            let f = match option.kind {
                OptionKind::BinaryAsian => 1.0,
                _ => path.s_avg - option.strike,
            };
            let v = params.discount() * f * mv_weight(greek, params, grid, &path);
            if !v.is_finite() && failure.is_none() {
                failure = Some(x1);
            }
            v
        },
        &region,
    )?;
    if let Some(x1) = failure {
        return Err(Error::OracleFailure(format!(
            "non-finite integrand at x1 = {x1}"
        )));
    }
    Ok(value)
}

/// The same conditional expectation with the plain Malliavin estimate
/// (indicators included) integrated over the whole line; only usable as a
/// cross-check because the kinks slow the adaptive rule down.
pub fn conditional_quadrature_unsplit(
    greek: GreekKind,
    option: &OptionSpec,
    params: &MarketParams,
    grid: &TimeGrid,
    y: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    let mut path = PathSample::with_dim(grid.d());
    integrate_normal(
        |x1| {
            path.fill_prices(params, grid, x1, y);
            mv_estimate(greek, option, params, grid, &path)
        },
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_mass() {
        let all = integrate_normal(|_| 1.0, &QuadratureSpec::default()).unwrap();
        assert!((all - 1.0).abs() < 1e-12, "{all}");
        let half = integrate_normal(
            |_| 1.0,
            &QuadratureSpec {
                lower: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((half - 0.5).abs() < 1e-12, "{half}");
    }

    #[test]
    fn normal_moments() {
        let spec = QuadratureSpec::default();
        let m2 = integrate_normal(|x| x * x, &spec).unwrap();
        let m4 = integrate_normal(|x| x.powi(4), &spec).unwrap();
        let mgf = integrate_normal(|x| (0.3 * x).exp(), &spec).unwrap();
        assert!((m2 - 1.0).abs() < 1e-10);
        assert!((m4 - 3.0).abs() < 1e-9);
        assert!((mgf - (0.045f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-14, 1).unwrap();
        assert!((v - (9.0 - 1.5 + 6.0)).abs() < 1e-12);
        let rev = integrate(|x| x, 1.0, 0.0, 1e-14, 1).unwrap();
        assert!((rev + 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_convergence_is_an_error() {
        let r = integrate(
            |x| if x > 0.123_456_789 { 1.0 } else { 0.0 },
            0.0,
            1.0,
            1e-15,
            8,
        );
        assert!(matches!(r, Err(Error::OracleFailure(_))));
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-10, 50);
        assert!(matches!(r, Err(Error::OracleFailure(_))));
    }

    #[test]
    fn crossing_point_hits_the_level() {
        let p = MarketParams::reference();
        let g = TimeGrid::new(8, 1.0).unwrap();
        let y: Vec<f64> = (0..7).map(|i| 0.05 * i as f64 - 0.1).collect();
        let x = crossing_point(104.0, &p, &g, &y);
        let mut path = PathSample::with_dim(8);
        path.fill_prices(&p, &g, x, &y);
        assert!((path.s_avg - 104.0).abs() < 1e-10);
    }

    #[test]
    fn split_and_unsplit_agree() {
        let p = MarketParams::reference();
        let g = TimeGrid::new(4, 1.0).unwrap();
        let y = [0.1, -0.2, 0.05];
        let option = OptionSpec::up_and_out(100.0, 120.0).unwrap();
        let spec = QuadratureSpec {
            abs_tol: 1e-9,
            max_subdivisions: 20_000,
            ..Default::default()
        };
        let a = conditional_quadrature(GreekKind::Delta, &option, &p, &g, &y, &spec).unwrap();
        let b =
            conditional_quadrature_unsplit(GreekKind::Delta, &option, &p, &g, &y, &spec).unwrap();
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }
}
