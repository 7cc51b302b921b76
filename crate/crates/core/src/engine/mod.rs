//! Batch-means estimation of Greeks with plain Monte Carlo and randomized
//! quasi-Monte Carlo samplers.
//!
//! A run draws `M` independent batches of `N` points. Batch `j` yields
//! `Q_j = (1/N) Σ_i θ(x_i)`; the estimate is `Q̃ = (1/M) Σ_j Q_j` with
//! `σ² = Σ_j (Q_j − Q̃)² / (M(M−1))`.

mod experiment;
mod report;

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{cmv_estimate, mv_estimate, mv_weight, GreekKind, OptionSpec};
use crate::lowdisc::{derive_seed, probit, DirectionNumbers, RandomizationSeed, ScrambledSobol};
use crate::model::{MarketParams, PathSample};
use crate::pathgen::{
    build_covariance, factorize, Construction, FactorizedCovariance, Pilot, TimeGrid,
};

pub use experiment::{
    cell_seed, convergence_scan, run_experiment, ExperimentConfig, OutputSpec, CONFIG_EXAMPLE,
};
pub use report::{CellStatus, ExperimentReport, ReportRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sampler {
    Mc,
    Rqmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Mv,
    Cmv,
}

/// Sampler, estimator and (for RQMC) path construction of one method.
///
/// Plain MC ignores the construction; it is normalized to `Std`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MethodSpec {
    pub sampler: Sampler,
    pub estimator: Estimator,
    pub construction: Construction,
}

impl MethodSpec {
    pub const MC_MV: MethodSpec = MethodSpec::new(Sampler::Mc, Estimator::Mv, Construction::Std);
    pub const QMC_MV: MethodSpec =
        MethodSpec::new(Sampler::Rqmc, Estimator::Mv, Construction::Gpca);
    pub const MC_CMV: MethodSpec = MethodSpec::new(Sampler::Mc, Estimator::Cmv, Construction::Std);
    pub const QMC_CMV: MethodSpec =
        MethodSpec::new(Sampler::Rqmc, Estimator::Cmv, Construction::Gpca);
    pub const PAPER: [MethodSpec; 4] = [
        MethodSpec::MC_MV,
        MethodSpec::QMC_MV,
        MethodSpec::MC_CMV,
        MethodSpec::QMC_CMV,
    ];

    pub const fn new(sampler: Sampler, estimator: Estimator, construction: Construction) -> Self {
        let construction = match sampler {
            Sampler::Mc => Construction::Std,
            Sampler::Rqmc => construction,
        };
        Self {
            sampler,
            estimator,
            construction,
        }
    }

    pub fn with_construction(self, construction: Construction) -> Self {
        Self::new(self.sampler, self.estimator, construction)
    }

    /// Number of normals per sample: `d` for MV, `d − 1` for CMV.
    pub fn dimension(&self, d: usize) -> usize {
        match self.estimator {
            Estimator::Mv => d,
            Estimator::Cmv => d - 1,
        }
    }

    /// Parses `MC-MV`, `QMC-CMV`, `QMC-CMV-PCA`, ...; RQMC methods without a
    /// construction suffix get `default`.
    pub fn parse_with_default(s: &str, default: Construction) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let mut parts = upper.splitn(3, '-');
        let bad = || {
            Error::Config(format!(
                "unknown method `{s}` (expected e.g. MC-MV or QMC-CMV)"
            ))
        };
        let sampler = match parts.next() {
            Some("MC") => Sampler::Mc,
            Some("QMC") | Some("RQMC") => Sampler::Rqmc,
            _ => return Err(bad()),
        };
        let estimator = match parts.next() {
            Some("MV") => Estimator::Mv,
            Some("CMV") => Estimator::Cmv,
            _ => return Err(bad()),
        };
        let construction = match parts.next() {
            Some(c) => c.parse()?,
            None => default,
        };
        Ok(Self::new(sampler, estimator, construction))
    }

    pub(crate) fn code(&self) -> u64 {
        let s = match self.sampler {
            Sampler::Mc => 0,
            Sampler::Rqmc => 1,
        };
        let e = match self.estimator {
            Estimator::Mv => 0,
            Estimator::Cmv => 1,
        };
        let c = Construction::ALL
            .iter()
            .position(|&c| c == self.construction)
            .unwrap_or(0) as u64;
        s | e << 1 | c << 2
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sampler = match self.sampler {
            Sampler::Mc => "MC",
            Sampler::Rqmc => "QMC",
        };
        let estimator = match self.estimator {
            Estimator::Mv => "MV",
            Estimator::Cmv => "CMV",
        };
        write!(f, "{sampler}-{estimator}")?;
        if self.sampler == Sampler::Rqmc && self.construction != Construction::Gpca {
            write!(f, "-{}", self.construction)?;
        }
        Ok(())
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with_default(s, Construction::Gpca)
    }
}

serde_via_str!(MethodSpec);

/// Batch-means summary of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreekEstimate {
    pub mean: f64,
    pub var_of_means: f64,
    pub std_err: f64,
    pub m_batches: usize,
    pub n_samples: usize,
}

impl GreekEstimate {
    pub fn from_batch_means(means: &[f64], n_samples: usize) -> Self {
        let m = means.len();
        let mean = means.iter().sum::<f64>() / m as f64;
        let var_of_means = if m > 1 {
            means.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / (m * (m - 1)) as f64
        } else {
            f64::NAN
        };
        Self {
            mean,
            var_of_means,
            std_err: var_of_means.sqrt(),
            m_batches: m,
            n_samples,
        }
    }

    /// `sqrt(se_a² + se_b²)`.
    pub fn combined_se(&self, other: &GreekEstimate) -> f64 {
        self.std_err.hypot(other.std_err)
    }
}

/// `V0² / V²`. A candidate with zero variance gets `f64::INFINITY`.
pub fn compute_vrf(baseline: &GreekEstimate, candidate: &GreekEstimate) -> f64 {
    if (baseline.m_batches, baseline.n_samples) != (candidate.m_batches, candidate.n_samples) {
        log::warn!(
            "VRF of runs with different sizes: ({}, {}) vs ({}, {})",
            baseline.m_batches,
            baseline.n_samples,
            candidate.m_batches,
            candidate.n_samples
        );
    }
    if candidate.var_of_means > 0.0 {
        baseline.var_of_means / candidate.var_of_means
    } else {
        log::warn!("candidate has zero batch-mean variance; VRF reported as infinite");
        f64::INFINITY
    }
}

pub fn check_sizes(sampler: Sampler, m: usize, n: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Config(format!("need at least 2 batches, got {m}")));
    }
    if n < 2 {
        return Err(Error::Config(format!(
            "need at least 2 samples per batch, got {n}"
        )));
    }
    if sampler == Sampler::Rqmc && (!n.is_power_of_two() || n > 1 << 31) {
        return Err(Error::Config(format!(
            "RQMC needs a power-of-two N up to 2^31, got {n}"
        )));
    }
    Ok(())
}

/// Maps 64 random bits to a double strictly inside (0, 1).
#[inline]
pub(crate) fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Mean of `eval` over batch `j`'s `n` normal vectors.
pub fn batch_mean<G: FnMut(&[f64]) -> f64>(
    sampler: Sampler,
    dim: usize,
    n: usize,
    seed: u64,
    j: usize,
    eval: &mut G,
) -> Result<f64> {
    let mut x = vec![0.0; dim];
    let mut sum = 0.0;
    match sampler {
        Sampler::Mc => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, j as u64));
            for _ in 0..n {
                for xi in x.iter_mut() {
                    *xi = probit(open_unit(rng.next_u64()));
                }
                sum += eval(&x);
            }
        }
        Sampler::Rqmc => {
            let mut points = ScrambledSobol::new(
                DirectionNumbers::joe_kuo(),
                dim,
                RandomizationSeed::new(seed, j as u64),
            )?;
            for _ in 0..n {
                points.next_normal(&mut x);
                sum += eval(&x);
            }
        }
    }
    Ok(sum / n as f64)
}

/// Integrates a function of `dim` standard normals over `m` independent
/// batches of `n` points.
///
/// `make` builds one evaluator per batch so evaluators can own scratch space.
/// Batches run on the current rayon pool; results do not depend on its size.
pub fn run_normal_batches<F, G>(
    sampler: Sampler,
    dim: usize,
    m: usize,
    n: usize,
    seed: u64,
    make: F,
) -> Result<GreekEstimate>
where
    F: Fn() -> G + Sync,
    G: FnMut(&[f64]) -> f64,
{
    check_sizes(sampler, m, n)?;
    let means = (0..m)
        .into_par_iter()
        .map(|j| batch_mean(sampler, dim, n, seed, j, &mut make()))
        .collect::<Result<Vec<f64>>>()?;
    let est = GreekEstimate::from_batch_means(&means, n);
    if !est.mean.is_finite() {
        return Err(Error::Domain(format!("non-finite batch mean {}", est.mean)));
    }
    Ok(est)
}

/// Runs `f` on a pool capped at `workers` threads, or on the global pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Config("workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}"))),
    }
}

/// One Greek of one option on one grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreekProblem {
    pub greek: GreekKind,
    pub option: OptionSpec,
    pub params: MarketParams,
    pub grid: TimeGrid,
}

impl GreekProblem {
    pub fn new(
        greek: GreekKind,
        option: OptionSpec,
        params: MarketParams,
        d: usize,
    ) -> Result<Self> {
        params.validate()?;
        let grid = TimeGrid::new(d, params.maturity)?;
        Ok(Self {
            greek,
            option,
            params,
            grid,
        })
    }

    /// GPCA pilot target: the MV estimate at `X1 = 0` on the payoff branch
    /// of `anchor`, or the (smooth) CMV estimate.
    fn increment_target(&self, estimator: Estimator, anchor: &[f64], y: &[f64]) -> f64 {
        let GreekProblem {
            greek,
            option,
            params,
            grid,
        } = self;
        let mut path = PathSample::with_dim(grid.d());
        match estimator {
            Estimator::Mv => {
                path.fill_prices(params, grid, 0.0, anchor);
                let anchor_avg = path.s_avg;
                path.fill_prices(params, grid, 0.0, y);
                let f = option.payoff_on_branch(anchor_avg, path.s_avg);
                if f == 0.0 {
                    return 0.0;
                }
                params.discount() * f * mv_weight(*greek, params, grid, &path)
            }
            Estimator::Cmv => {
                path.fill_tilde(params, grid, y);
                cmv_estimate(*greek, option, params, grid, &path)
            }
        }
    }
}

const PILOT_STREAM: u64 = 0x0070_696c_6f74;

/// A Greek estimator as a function of the driving normals of one method.
///
/// MV reads `x = (Z, X1)` with `X1` last, so the leading coordinates follow
/// the construction's ordering; CMV reads `x = Z`.
pub struct GreekIntegrand<'a> {
    problem: &'a GreekProblem,
    estimator: Estimator,
    factor: FactorizedCovariance,
}

impl<'a> GreekIntegrand<'a> {
    pub fn new(
        problem: &'a GreekProblem,
        method: MethodSpec,
        pilot_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let sigma = build_covariance(&problem.grid)?;
        let construction = method.construction;
        let factor = if construction == Construction::Gpca {
            let target =
                |anchor: &[f64], y: &[f64]| problem.increment_target(method.estimator, anchor, y);
            let pilot = Pilot {
                target: &target,
                size: pilot_size,
                seed: derive_seed(seed, PILOT_STREAM),
                fd_step: Pilot::DEFAULT_FD_STEP,
            };
            factorize(&sigma, construction, Some(&pilot))?
        } else {
            factorize(&sigma, construction, None)?
        };
        Ok(Self {
            problem,
            estimator: method.estimator,
            factor,
        })
    }

    pub fn factor(&self) -> &FactorizedCovariance {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        match self.estimator {
            Estimator::Mv => self.problem.grid.d(),
            Estimator::Cmv => self.problem.grid.d() - 1,
        }
    }

    /// A stateful evaluator with its own path buffer.
    pub fn evaluator(&self) -> impl FnMut(&[f64]) -> f64 + '_ {
        let GreekProblem {
            greek,
            option,
            params,
            grid,
        } = self.problem;
        let d = grid.d();
        let mut path = PathSample::with_dim(d);
        let mut y = vec![0.0; d - 1];
        let estimator = self.estimator;
        move |x: &[f64]| {
            self.factor.apply(&x[..d - 1], &mut y);
            match estimator {
                Estimator::Mv => {
                    path.fill_prices(params, grid, x[d - 1], &y);
                    mv_estimate(*greek, option, params, grid, &path)
                }
                Estimator::Cmv => {
                    path.fill_tilde(params, grid, &y);
                    cmv_estimate(*greek, option, params, grid, &path)
                }
            }
        }
    }
}

/// Sizes and seeds of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPlan {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub pilot_size: usize,
}

impl BatchPlan {
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            seed,
            pilot_size: Pilot::DEFAULT_SIZE,
        }
    }
}

pub fn run_problem(
    method: MethodSpec,
    problem: &GreekProblem,
    plan: &BatchPlan,
) -> Result<GreekEstimate> {
    check_sizes(method.sampler, plan.m, plan.n)?;
    let integrand = GreekIntegrand::new(problem, method, plan.pilot_size, plan.seed)?;
    run_normal_batches(
        method.sampler,
        integrand.dim(),
        plan.m,
        plan.n,
        plan.seed,
        || integrand.evaluator(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn run_batches(
    method: MethodSpec,
    greek: GreekKind,
    option: &OptionSpec,
    params: &MarketParams,
    grid: &TimeGrid,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<GreekEstimate> {
    params.validate()?;
    let problem = GreekProblem {
        greek,
        option: *option,
        params: *params,
        grid: *grid,
    };
    run_problem(method, &problem, &BatchPlan::new(m, n, seed))
}
