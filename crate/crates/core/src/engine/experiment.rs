use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{CellStatus, ExperimentReport, ReportRow};
use super::{
    compute_vrf, run_problem, BatchPlan, GreekEstimate, GreekProblem, MethodSpec, Sampler,
};
use crate::error::{Error, Result};
use crate::estimators::{GreekKind, OptionKind, OptionSpec};
use crate::lowdisc::{derive_seed, MAX_DIMENSION};
use crate::model::MarketParams;
use crate::pathgen::{Construction, Pilot, TimeGrid};

/// Where `run` writes its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub markdown: Option<PathBuf>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            csv: Some(PathBuf::from("report.csv")),
            markdown: None,
        }
    }
}

/// A full sweep over options × greeks × strikes × dimensions × methods.
///
/// Missing keys take their defaults: `S0 = 100`, `σ = 0.2`, `r = 0.1`,
/// `T = 1`, `H = 120`, `K ∈ {90, 100, 110}`, `d ∈ {64, 128}`, all three
/// options and Greeks, the four MC/QMC × MV/CMV methods, `M = 500`,
/// `N = 2^15` and GPCA with a 1024-point pilot.
///
/// Methods are written `MC-MV`, `QMC-MV`, `MC-CMV`, `QMC-CMV`; a QMC method
/// may name its own construction (`QMC-CMV-PCA`), otherwise it uses
/// `construction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub market: MarketParams,
    pub options: Vec<OptionKind>,
    pub greeks: Vec<GreekKind>,
    pub strikes: Vec<f64>,
    pub dims: Vec<usize>,
    pub barrier: f64,
    #[serde(deserialize_with = "method_names")]
    pub methods: Vec<String>,
    pub m_batches: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub construction: Construction,
    pub gpca_pilot_size: usize,
    /// Wall-clock seconds per cell; turn off for byte-identical reports.
    pub record_timing: bool,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            market: MarketParams::reference(),
            options: OptionKind::ALL.to_vec(),
            greeks: GreekKind::ALL.to_vec(),
            strikes: vec![90.0, 100.0, 110.0],
            dims: vec![64, 128],
            barrier: 120.0,
            methods: MethodSpec::PAPER.iter().map(|m| m.to_string()).collect(),
            m_batches: 500,
            n_samples: 1 << 15,
            seed: 20_190_101,
            construction: Construction::Gpca,
            gpca_pilot_size: Pilot::DEFAULT_SIZE,
            record_timing: true,
            output: OutputSpec::default(),
        }
    }
}

fn method_names<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<String>, D::Error> {
    let names = Vec::<String>::deserialize(d)?;
    for name in &names {
        if let Err(Error::Config(msg)) = name.parse::<MethodSpec>() {
            return Err(serde::de::Error::custom(msg));
        }
    }
    Ok(names)
}

/// A config at the reduced "desk" scale `M = 50`, `N = 2^13`, with timing
/// off so reruns give byte-identical CSV. Shipped as `configs/desk.json`.
pub const CONFIG_EXAMPLE: &str = r#"{
  "market": { "s0": 100.0, "sigma": 0.2, "r": 0.1, "maturity": 1.0 },
  "options": ["binary", "call", "up-and-out"],
  "greeks": ["delta", "gamma", "vega"],
  "strikes": [90.0, 100.0, 110.0],
  "dims": [64, 128],
  "barrier": 120.0,
  "methods": ["MC-MV", "QMC-MV", "MC-CMV", "QMC-CMV"],
  "m_batches": 50,
  "n_samples": 8192,
  "seed": 20190101,
  "construction": "GPCA",
  "gpca_pilot_size": 1024,
  "record_timing": false,
  "output": { "csv": "desk-report.csv", "markdown": "desk-report.md" }
}
"#;

impl ExperimentConfig {
    /// Parses a JSON config; errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        // serde_json messages end with "at line L column C"
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Methods with the config-level construction filled in.
    pub fn resolved_methods(&self) -> Result<Vec<MethodSpec>> {
        let mut out: Vec<MethodSpec> = Vec::with_capacity(self.methods.len());
        for name in &self.methods {
            let m = MethodSpec::parse_with_default(name, self.construction)?;
            if out.contains(&m) {
                return Err(Error::Config(format!("method `{name}` listed twice")));
            }
            out.push(m);
        }
        Ok(out)
    }

    pub fn option_spec(&self, kind: OptionKind, strike: f64) -> Result<OptionSpec> {
        let barrier = (kind == OptionKind::UpAndOutAsianCall).then_some(self.barrier);
        OptionSpec::new(kind, strike, barrier)
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Config(format!("`{name}` must not be empty")))
            } else {
                Ok(())
            }
        };
        nonempty("options", self.options.len())?;
        nonempty("greeks", self.greeks.len())?;
        nonempty("strikes", self.strikes.len())?;
        nonempty("dims", self.dims.len())?;
        nonempty("methods", self.methods.len())?;
        let methods = self.resolved_methods()?;
        for &kind in &self.options {
            for &k in &self.strikes {
                self.option_spec(kind, k)?;
            }
        }
        for &d in &self.dims {
            if !(2..=MAX_DIMENSION).contains(&d) {
                return Err(Error::Config(format!(
                    "d must lie in 2..={MAX_DIMENSION}, got {d}"
                )));
            }
        }
        let any_rqmc = methods.iter().any(|m| m.sampler == Sampler::Rqmc);
        let sampler = if any_rqmc { Sampler::Rqmc } else { Sampler::Mc };
        super::check_sizes(sampler, self.m_batches, self.n_samples)?;
        let any_gpca = methods.iter().any(|m| m.construction == Construction::Gpca);
        if any_gpca && self.gpca_pilot_size == 0 {
            return Err(Error::Config("gpca_pilot_size must be positive".into()));
        }
        Ok(())
    }

    /// One line per cell in run order.
    pub fn plan(&self) -> Result<Vec<String>> {
        self.validate()?;
        let methods = self.resolved_methods()?;
        let mut lines = Vec::new();
        for &kind in &self.options {
            for &greek in &self.greeks {
                for &k in &self.strikes {
                    for &d in &self.dims {
                        for m in &methods {
                            lines.push(format!("{kind} {greek} K={k} d={d} {m}"));
                        }
                    }
                }
            }
        }
        Ok(lines)
    }
}

/// Seed of one report cell. It depends on the cell key only, so a cell gets
/// the same numbers in any sweep that contains it.
pub fn cell_seed(
    master: u64,
    kind: OptionKind,
    greek: GreekKind,
    strike: f64,
    d: usize,
    method: MethodSpec,
) -> u64 {
    let o = OptionKind::ALL.iter().position(|&x| x == kind).unwrap_or(0) as u64;
    let g = GreekKind::ALL.iter().position(|&x| x == greek).unwrap_or(0) as u64;
    [o, g, strike.to_bits(), d as u64, method.code()]
        .into_iter()
        .fold(master, derive_seed)
}

/// Runs every cell of `config`. MC-MV is computed first in each
/// (option, greek, K, d) group and serves as the VRF baseline. Failing cells
/// are recorded in the report instead of aborting the sweep.
///
/// Batches run on the current rayon pool; see [`super::with_workers`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let methods = config.resolved_methods()?;
    let mut rows = Vec::new();
    for &kind in &config.options {
        for &greek in &config.greeks {
            for &k in &config.strikes {
                let option = config.option_spec(kind, k)?;
                for &d in &config.dims {
                    let problem = GreekProblem::new(greek, option, config.market, d)?;
                    let run = |method: MethodSpec| {
                        let plan = BatchPlan {
                            m: config.m_batches,
                            n: config.n_samples,
                            seed: cell_seed(config.seed, kind, greek, k, d, method),
                            pilot_size: config.gpca_pilot_size,
                        };
                        let start = Instant::now();
                        let result = run_problem(method, &problem, &plan);
                        let seconds = if config.record_timing {
                            start.elapsed().as_secs_f64()
                        } else {
                            0.0
                        };
                        log::info!(
                            "{kind} {greek} K={k} d={d} {method}: {:.2}s",
                            start.elapsed().as_secs_f64()
                        );
                        (result, seconds)
                    };
                    let baseline = run(MethodSpec::MC_MV);
                    for &method in &methods {
                        let (result, seconds) = if method == MethodSpec::MC_MV {
                            baseline.clone()
                        } else {
                            run(method)
                        };
                        rows.push(make_row(
                            kind,
                            greek,
                            k,
                            d,
                            method,
                            result,
                            seconds,
                            &baseline.0,
                        ));
                    }
                }
            }
        }
    }
    Ok(ExperimentReport { rows })
}

#[allow(clippy::too_many_arguments)]
fn make_row(
    option: OptionKind,
    greek: GreekKind,
    strike: f64,
    d: usize,
    method: MethodSpec,
    result: Result<GreekEstimate>,
    seconds: f64,
    baseline: &Result<GreekEstimate>,
) -> ReportRow {
    let (estimate, status) = match result {
        Ok(e) => (e, CellStatus::Ok),
        Err(e) => {
            log::error!("{option} {greek} K={strike} d={d} {method} failed: {e}");
            let nan = GreekEstimate {
                mean: f64::NAN,
                var_of_means: f64::NAN,
                std_err: f64::NAN,
                m_batches: 0,
                n_samples: 0,
            };
            (nan, CellStatus::Failed(e.to_string()))
        }
    };
    let vrf = match (baseline, &status) {
        (Ok(b), CellStatus::Ok) if method == MethodSpec::MC_MV => {
            debug_assert_eq!(b, &estimate);
            1.0
        }
        (Ok(b), CellStatus::Ok) => compute_vrf(b, &estimate),
        _ => f64::NAN,
    };
    ReportRow {
        option,
        greek,
        strike,
        d,
        method,
        estimate,
        vrf,
        seconds,
        status,
    }
}

/// Estimates at each `d` of `d_list` with a shared seed.
#[allow(clippy::too_many_arguments)]
pub fn convergence_scan(
    greek: GreekKind,
    option: &OptionSpec,
    params: &MarketParams,
    method: MethodSpec,
    d_list: &[usize],
    m: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<GreekEstimate>> {
    if d_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("d_list must be increasing".into()));
    }
    d_list
        .iter()
        .map(|&d| {
            let grid = TimeGrid::new(d, params.maturity)?;
            super::run_batches(method, greek, option, params, &grid, m, n, seed)
        })
        .collect()
}
