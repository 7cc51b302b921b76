//! Slow reference computations and the self-check suite behind
//! `asian-greeks validate`.

mod fd;
mod naive;
mod quadrature;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{convergence_scan, run_batches, GreekIntegrand, GreekProblem, MethodSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    binary_closed_form, call_closed_form, cmv_estimate, GreekKind, OptionKind, OptionSpec,
};
use crate::lowdisc::{
    generate_sobol_with, inv_normal_cdf, is_dyadic_stratified, norm_cdf, randomize,
    DirectionNumbers, RandomizationSeed,
};
use crate::model::{MarketParams, PathSample};
use crate::pathgen::{build_covariance, factorize, Construction, TimeGrid};

pub use fd::{
    central_difference, discounted_payoff, finite_difference_batches, finite_difference_greek,
    second_difference,
};
pub use naive::{naive_covariance, naive_path, NaivePath};
pub use quadrature::{
    conditional_quadrature, conditional_quadrature_unsplit, crossing_point, integrate,
    integrate_normal, QuadratureSpec, NORMAL_CUTOFF,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationLevel {
    Fast,
    Full,
}

impl FromStr for ValidationLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(ValidationLevel::Fast),
            "full" => Ok(ValidationLevel::Full),
            other => Err(Error::Config(format!(
                "unknown validation level `{other}` (fast or full)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, outcome: Result<String>) -> CheckResult {
    match outcome {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn fail(msg: String) -> Error {
    Error::OracleFailure(msg)
}

/// Runs the named checks. `table` feeds the stratification check so a
/// corrupted direction-number file can be caught.
pub fn run_validation(level: ValidationLevel, table: &DirectionNumbers) -> Vec<CheckResult> {
    let mut out = vec![
        check("stratification", stratification(table)),
        check("inverse-normal", inverse_normal()),
        check("factorization", factorization(&[2, 4, 16, 64, 128, 256])),
        check(
            "quadrature-equivalence",
            quadrature_equivalence(&[4, 8], 10, 1e-7),
        ),
        check("payoff-decomposition", payoff_decomposition()),
    ];
    if level == ValidationLevel::Full {
        out.push(check(
            "conditioning-consistency",
            conditioning_consistency(50, 1 << 14),
        ));
        out.push(check("fd-agreement", fd_agreement(50, 1 << 15)));
        out.push(check("convergence-scan", convergence(50, 1 << 13)));
    }
    out
}

/// Every coordinate of the first `2^k` points hits each dyadic cell once,
/// `k ≤ 10`, before and after randomization.
pub fn stratification(table: &DirectionNumbers) -> Result<String> {
    let dim = table.max_dim();
    let n = 1 << 10;
    let base = generate_sobol_with(table, dim, n)?;
    let scrambled = randomize(&base, RandomizationSeed::new(0x5eed, 0));
    for (label, points) in [("base", &base), ("randomized", &scrambled)] {
        for j in 0..dim {
            for k in 0..=10 {
                if !is_dyadic_stratified(points.coordinate(j), k) {
                    return Err(fail(format!(
                        "{label} coordinate {} is not stratified at 2^{k} points",
                        j + 1
                    )));
                }
            }
        }
    }
    Ok(format!("{dim} coordinates, 2^0..2^10 points"))
}

pub fn inverse_normal() -> Result<String> {
    let z = inv_normal_cdf(0.975)?;
    if (z - 1.959_963_984_540_054).abs() > 1e-12 {
        return Err(fail(format!("Φ⁻¹(0.975) = {z}")));
    }
    if inv_normal_cdf(0.5)? != 0.0 {
        return Err(fail("Φ⁻¹(0.5) ≠ 0".into()));
    }
    let n = 100_000;
    let mut prev = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for i in 1..n {
        let u = i as f64 / n as f64;
        let z = inv_normal_cdf(u)?;
        if z <= prev {
            return Err(fail(format!("not increasing at u = {u}")));
        }
        prev = z;
        // only pairs where 1 − u is exact
        if 1.0 - (1.0 - u) == u && (z + inv_normal_cdf(1.0 - u)?).abs() > 1e-12 {
            return Err(fail(format!("not antisymmetric at u = {u}")));
        }
        let tail = u.min(1.0 - u);
        let err = (norm_cdf(z.min(-z)) - tail).abs() / tail;
        worst = worst.max(err);
    }
    for e in 1..=15 {
        let u = 10f64.powi(-e);
        let z = inv_normal_cdf(u)?;
        worst = worst.max((norm_cdf(z) - u).abs() / u);
    }
    if worst > 1e-12 {
        return Err(fail(format!("relative CDF error {worst:e}")));
    }
    Ok(format!("max relative CDF error {worst:.1e}"))
}

/// `‖AA′ − Σ‖_max ≤ 1e−10 max|Σ|` for every construction.
pub fn factorization(dims: &[usize]) -> Result<String> {
    let params = MarketParams::reference();
    let option = OptionSpec::call(100.0)?;
    let mut worst = 0.0f64;
    for &d in dims {
        let grid = TimeGrid::new(d, params.maturity)?;
        let sigma = build_covariance(&grid)?;
        let scale = sigma.amax();
        for c in Construction::ALL {
            let err = if c == Construction::Gpca {
                let problem = GreekProblem::new(GreekKind::Delta, option, params, d)?;
                let method = MethodSpec::QMC_CMV.with_construction(c);
                GreekIntegrand::new(&problem, method, 256, 7)?
                    .factor()
                    .reconstruction_error()
            } else {
                factorize(&sigma, c, None)?.reconstruction_error()
            };
            let rel = err / scale;
            if !(rel <= 1e-10) {
                return Err(fail(format!("{c} at d = {d}: relative error {rel:e}")));
            }
            worst = worst.max(rel);
        }
    }
    Ok(format!("d in {dims:?}, worst relative error {worst:.1e}"))
}

/// Increments `y = AZ` for `count` seeded standard normal `Z`.
pub fn random_increments(grid: &TimeGrid, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let factor = factorize(&build_covariance(grid)?, Construction::Std, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.d() - 1;
    let mut z = vec![0.0; n];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for zi in z.iter_mut() {
            *zi = inv_normal_cdf(rng.gen_range(f64::EPSILON..1.0))?;
        }
        let mut y = vec![0.0; n];
        factor.apply(&z, &mut y);
        out.push(y);
    }
    Ok(out)
}

/// Largest relative gap between the closed forms and the quadrature oracle,
/// with the quadrature itself repeated at a tighter tolerance.
pub fn quadrature_equivalence(dims: &[usize], draws: usize, tol: f64) -> Result<String> {
    let params = MarketParams::reference();
    let options = [
        OptionSpec::binary(100.0)?,
        OptionSpec::call(100.0)?,
        OptionSpec::up_and_out(100.0, 120.0)?,
    ];
    let coarse = QuadratureSpec::with_tol(1e-10);
    let fine = QuadratureSpec::with_tol(1e-12);
    let mut worst = 0.0f64;
    let mut count = 0;
    for &d in dims {
        let grid = TimeGrid::new(d, params.maturity)?;
        let mut path = PathSample::with_dim(d);
        for (i, y) in random_increments(&grid, draws, 0xc0ffee ^ d as u64)?
            .iter()
            .enumerate()
        {
            path.fill_tilde(&params, &grid, y);
            for option in &options {
                for greek in GreekKind::ALL {
                    let closed = cmv_estimate(greek, option, &params, &grid, &path);
                    let a = conditional_quadrature(greek, option, &params, &grid, y, &coarse)?;
                    let b = conditional_quadrature(greek, option, &params, &grid, y, &fine)?;
                    if (a - b).abs() > 1e-9 {
                        return Err(fail(format!("quadrature unstable: {a} vs {b}")));
                    }
                    let rel = (closed - b).abs() / b.abs();
                    if !(rel <= tol) {
                        return Err(fail(format!(
                            "{} {greek} d = {d} draw {i}: closed form {closed} vs quadrature {b} (rel {rel:e})",
                            option.kind
                        )));
                    }
                    worst = worst.max(rel);
                    count += 1;
                }
            }
        }
    }
    Ok(format!(
        "{count} comparisons, worst relative error {worst:.1e}"
    ))
}

/// The barrier payoff and its conditional expectation split into call and
/// binary pieces.
pub fn payoff_decomposition() -> Result<String> {
    let (k, h) = (100.0, 120.0);
    let uoc = OptionSpec::up_and_out(k, h)?;
    let call_k = OptionSpec::call(k)?;
    let call_h = OptionSpec::call(h)?;
    let bin_h = OptionSpec::binary(h)?;
    for i in 0..=400 {
        let s = 60.0 + 0.2 * i as f64;
        let lhs = uoc.payoff(s);
        let rhs = call_k.payoff(s) - call_h.payoff(s) - (h - k) * bin_h.payoff(s);
        if (lhs - rhs).abs() > 1e-12 {
            return Err(fail(format!("payoffs differ at S_A = {s}: {lhs} vs {rhs}")));
        }
    }
    let params = MarketParams::reference();
    let grid = TimeGrid::new(16, params.maturity)?;
    let mut path = PathSample::with_dim(16);
    for y in random_increments(&grid, 20, 11)? {
        path.fill_tilde(&params, &grid, &y);
        for greek in GreekKind::ALL {
            let whole = cmv_estimate(greek, &uoc, &params, &grid, &path);
            let parts = call_closed_form(greek, k, &params, &grid, &path)
                - call_closed_form(greek, h, &params, &grid, &path)
                - (h - k) * binary_closed_form(greek, h, &params, &grid, &path);
            if (whole - parts).abs() > 1e-12 * whole.abs().max(1.0) {
                return Err(fail(format!("{greek}: {whole} vs {parts}")));
            }
        }
    }
    Ok("payoff and conditional expectations decompose".into())
}

/// `|mean(MC-MV) − mean(MC-CMV)| ≤ 4` combined SE for every (option, greek)
/// at `K = 100`, `d = 64`.
pub fn conditioning_consistency(m: usize, n: usize) -> Result<String> {
    let params = MarketParams::reference();
    let grid = TimeGrid::new(64, params.maturity)?;
    let mut worst = 0.0f64;
    for kind in OptionKind::ALL {
        let option = OptionSpec::new(
            kind,
            100.0,
            (kind == OptionKind::UpAndOutAsianCall).then_some(120.0),
        )?;
        for (g, greek) in GreekKind::ALL.into_iter().enumerate() {
            let seed = 0xc0de + 16 * g as u64 + kind as u64;
            let mv = run_batches(
                MethodSpec::MC_MV,
                greek,
                &option,
                &params,
                &grid,
                m,
                n,
                seed,
            )?;
            let cmv = run_batches(
                MethodSpec::MC_CMV,
                greek,
                &option,
                &params,
                &grid,
                m,
                n,
                seed + 1000,
            )?;
            let z = (mv.mean - cmv.mean).abs() / mv.combined_se(&cmv);
            if !(z <= 4.0) {
                return Err(fail(format!(
                    "{kind} {greek}: {} vs {} ({z:.2} SE)",
                    mv.mean, cmv.mean
                )));
            }
            worst = worst.max(z);
        }
    }
    Ok(format!("9 pairs, largest gap {worst:.2} combined SE"))
}

/// FD delta (bump 0.1) against the MV delta for the call, within 4 combined SE.
///
/// Runs at `d = 512`: FD differentiates the discretely monitored price and
/// the MV weight carries an O(1/d) bias; at `d = 64` the two sit about 6
/// combined SE apart with `M = 50`, `N = 2^15`.
pub fn fd_agreement(m: usize, n: usize) -> Result<String> {
    let params = MarketParams::reference();
    let grid = TimeGrid::new(512, params.maturity)?;
    let option = OptionSpec::call(100.0)?;
    let mv = run_batches(
        MethodSpec::MC_MV,
        GreekKind::Delta,
        &option,
        &params,
        &grid,
        m,
        n,
        0xfd,
    )?;
    let fd = finite_difference_batches(
        GreekKind::Delta,
        &option,
        &params,
        &grid,
        m,
        n,
        0xfd + 1,
        0.1,
    )?;
    let z = (mv.mean - fd.mean).abs() / mv.combined_se(&fd);
    if !(z <= 4.0) {
        return Err(fail(format!(
            "MV {} vs FD {} ({z:.2} SE)",
            mv.mean, fd.mean
        )));
    }
    Ok(format!(
        "MV {:.6} vs FD {:.6}, {z:.2} combined SE",
        mv.mean, fd.mean
    ))
}

/// Successive gaps of the call delta over `d = 8..128`, see [`gaps_shrink`].
pub fn convergence(m: usize, n: usize) -> Result<String> {
    let params = MarketParams::reference();
    let option = OptionSpec::call(100.0)?;
    let dims = [8, 16, 32, 64, 128];
    let scan = convergence_scan(
        GreekKind::Delta,
        &option,
        &params,
        MethodSpec::MC_MV,
        &dims,
        m,
        n,
        0x5ca1,
    )?;
    let means: Vec<f64> = scan.iter().map(|e| e.mean).collect();
    gaps_shrink(&scan)?;
    Ok(format!("means {means:.5?}"))
}

/// Gap `k` is `|mean_{k+1} − mean_k|`. Each gap may exceed its predecessor
/// by at most 3 combined SE, and the last gap is below 5 combined SE.
pub fn gaps_shrink(scan: &[crate::engine::GreekEstimate]) -> Result<()> {
    let gaps: Vec<(f64, f64)> = scan
        .windows(2)
        .map(|w| ((w[1].mean - w[0].mean).abs(), w[0].combined_se(&w[1])))
        .collect();
    for pair in gaps.windows(2) {
        let ((g0, _), (g1, se1)) = (pair[0], pair[1]);
        if g1 > g0 + 3.0 * se1 {
            return Err(fail(format!("gap grew from {g0:e} to {g1:e} (SE {se1:e})")));
        }
    }
    if let Some(&(g, se)) = gaps.last() {
        if !(g < 5.0 * se) {
            return Err(fail(format!(
                "final gap {g:e} is {:.1} combined SE",
                g / se
            )));
        }
    }
    Ok(())
}
