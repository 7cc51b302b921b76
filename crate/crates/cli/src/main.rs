use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use asian_greeks::engine::{
    check_sizes, run_batches, run_experiment, with_workers, ExperimentConfig, ExperimentReport,
};
use asian_greeks::lowdisc::{DirectionNumbers, MAX_DIMENSION};
use asian_greeks::oracle::{run_validation, ValidationLevel};
use asian_greeks::{
    Construction, GreekKind, MarketParams, MethodSpec, OptionKind, OptionSpec, TimeGrid,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Malliavin and conditional-Malliavin Greeks of Asian options under MC and RQMC.
#[derive(Parser)]
#[command(name = "asian-greeks", version)]
struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true, env = "ASIAN_GREEKS_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep from a JSON config and write its report.
    Run(RunArgs),
    /// Run the built-in self-checks.
    Validate(ValidateArgs),
    /// Estimate a single Greek and print it as JSON.
    Greek(GreekArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; omitted keys take the reference defaults.
    config: Option<PathBuf>,
    /// Print the cell plan and exit without computing or writing anything.
    #[arg(long)]
    dry_run: bool,
    /// Print the resolved config (all defaults filled in) and exit.
    #[arg(long)]
    print_config: bool,
    /// Directory for relative output paths.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value = "fast")]
    level: String,
    /// Replacement direction-number table, for fault injection.
    #[arg(long, hide = true)]
    direction_numbers: Option<PathBuf>,
}

#[derive(Args)]
struct GreekArgs {
    #[arg(long, default_value = "call")]
    option: String,
    #[arg(long, default_value = "delta")]
    greek: String,
    #[arg(long = "K", default_value_t = 100.0, allow_negative_numbers = true)]
    strike: f64,
    /// Barrier of the up-and-out option.
    #[arg(long = "H", default_value_t = 120.0, allow_negative_numbers = true)]
    barrier: f64,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value = "qmc-cmv")]
    method: String,
    /// Path construction for QMC methods without a suffix.
    #[arg(long, default_value = "gpca")]
    construction: String,
    #[arg(long = "N", default_value_t = 1 << 15)]
    n: usize,
    #[arg(long = "M", default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 20_190_101)]
    seed: u64,
    #[arg(long = "S0", default_value_t = 100.0, allow_negative_numbers = true)]
    s0: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    r: f64,
    #[arg(long = "T", default_value_t = 1.0, allow_negative_numbers = true)]
    maturity: f64,
}

/// Exit 2: bad input. Exit 1: the computation ran but something failed.
enum Failure {
    Input(String),
    Runtime(String),
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let workers = cli.workers;
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args, workers),
        Command::Validate(args) => cmd_validate(args, workers),
        Command::Greek(args) => cmd_greek(args, workers),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let config = ExperimentConfig::from_json(&text)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    config
        .validate()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn resolve(base: Option<&Path>, path: &Path) -> PathBuf {
    match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn cmd_run(args: RunArgs, workers: Option<usize>) -> Result<ExitCode, Failure> {
    let config = load_config(args.config.as_deref())?;
    if args.print_config {
        println!("{}", config.to_json());
        return Ok(ExitCode::SUCCESS);
    }
    if args.config.is_none() {
        return Err(Failure::Input(
            "`run` needs a config file (or --print-config)".into(),
        ));
    }
    let plan = config.plan().map_err(input)?;
    if args.dry_run {
        for line in &plan {
            println!("{line}");
        }
        println!("{} cells", plan.len());
        return Ok(ExitCode::SUCCESS);
    }

    let start = Instant::now();
    let report = with_workers(workers, || run_experiment(&config))
        .map_err(input)?
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let elapsed = start.elapsed().as_secs_f64();

    let base = args.out_dir.as_deref();
    if let Some(csv) = &config.output.csv {
        let path = resolve(base, csv);
        report
            .save_csv(&path)
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        println!("wrote {}", path.display());
    }
    if let Some(md) = &config.output.markdown {
        let path = resolve(base, md);
        std::fs::write(&path, report.to_markdown())
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    print_summary(&report, elapsed);

    let failed = report.failures().count();
    if failed > 0 {
        for row in report.failures() {
            eprintln!(
                "failed: {} {} K={} d={} {}: {:?}",
                row.option, row.greek, row.strike, row.d, row.method, row.status
            );
        }
        return Err(Failure::Runtime(format!(
            "{failed} of {} cells failed; the report marks them",
            report.rows.len()
        )));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_summary(report: &ExperimentReport, seconds: f64) {
    println!("{} cells in {seconds:.1}s", report.rows.len());
    let mut methods: Vec<MethodSpec> = Vec::new();
    for r in &report.rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    for m in methods {
        let mut vrfs: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.method == m && r.vrf.is_finite())
            .map(|r| r.vrf)
            .collect();
        if vrfs.is_empty() {
            continue;
        }
        vrfs.sort_by(f64::total_cmp);
        println!(
            "{m:>12}: VRF min {:.4} median {:.4} max {:.4}",
            vrfs[0],
            vrfs[vrfs.len() / 2],
            vrfs[vrfs.len() - 1]
        );
    }
}

fn cmd_validate(args: ValidateArgs, workers: Option<usize>) -> Result<ExitCode, Failure> {
    let level: ValidationLevel = args.level.parse().map_err(input)?;
    let table = match &args.direction_numbers {
        None => Ok(DirectionNumbers::joe_kuo().clone()),
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))
            .and_then(|text| DirectionNumbers::from_joe_kuo_str(&text).map_err(|e| e.to_string())),
    };
    let results = match table {
        Ok(table) => with_workers(workers, || run_validation(level, &table)).map_err(input)?,
        Err(msg) => {
            println!("FAIL stratification: {msg}");
            return Ok(ExitCode::from(1));
        }
    };
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        println!("all {} checks passed", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("failed checks: {}", failed.join(", "));
        Ok(ExitCode::from(1))
    }
}

#[derive(Serialize)]
struct GreekOutput {
    option: OptionKind,
    greek: GreekKind,
    strike: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    barrier: Option<f64>,
    d: usize,
    method: MethodSpec,
    market: MarketParams,
    mean: f64,
    std_err: f64,
    var_of_means: f64,
    m_batches: usize,
    n_samples: usize,
    seed: u64,
    seconds: f64,
}

fn cmd_greek(args: GreekArgs, workers: Option<usize>) -> Result<ExitCode, Failure> {
    let kind: OptionKind = args.option.parse().map_err(input)?;
    let greek: GreekKind = args.greek.parse().map_err(input)?;
    let construction: Construction = args.construction.parse().map_err(input)?;
    let method = MethodSpec::parse_with_default(&args.method, construction).map_err(input)?;
    let market = MarketParams::new(args.s0, args.sigma, args.r, args.maturity).map_err(input)?;
    let barrier = (kind == OptionKind::UpAndOutAsianCall).then_some(args.barrier);
    let option = OptionSpec::new(kind, args.strike, barrier).map_err(input)?;
    if !(2..=MAX_DIMENSION).contains(&args.d) {
        return Err(Failure::Input(format!(
            "d must lie in 2..={MAX_DIMENSION}, got {}",
            args.d
        )));
    }
    let grid = TimeGrid::new(args.d, market.maturity).map_err(input)?;
    check_sizes(method.sampler, args.m, args.n).map_err(input)?;

    let start = Instant::now();
    let est = with_workers(workers, || {
        run_batches(
            method, greek, &option, &market, &grid, args.m, args.n, args.seed,
        )
    })
    .map_err(input)?
    .map_err(|e| Failure::Runtime(e.to_string()))?;
    let out = GreekOutput {
        option: kind,
        greek,
        strike: args.strike,
        barrier,
        d: args.d,
        method,
        market,
        mean: est.mean,
        std_err: est.std_err,
        var_of_means: est.var_of_means,
        m_batches: est.m_batches,
        n_samples: est.n_samples,
        seed: args.seed,
        seconds: start.elapsed().as_secs_f64(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("output serializes")
    );
    Ok(ExitCode::SUCCESS)
}
