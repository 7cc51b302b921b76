//! Acceptance criteria 1 to 8, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`). The two desk-scale sweeps
//! dominate the runtime; on a single core the whole suite takes about half
//! an hour.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;
use std::time::Instant;

use asian_greeks::engine::{
    convergence_scan, run_batches, run_experiment, with_workers, ExperimentConfig,
    ExperimentReport, GreekIntegrand, GreekProblem, CONFIG_EXAMPLE,
};
use asian_greeks::estimators::cmv_estimate;
use asian_greeks::lowdisc::inv_normal_cdf;
use asian_greeks::oracle::{conditional_quadrature, finite_difference_batches, QuadratureSpec};
use asian_greeks::pathgen::build_covariance;
use asian_greeks::{
    Construction, GreekEstimate, GreekKind, MarketParams, MethodSpec, OptionKind, OptionSpec,
    PathSample, TimeGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

/// Ratio of paper-scale to desk-scale samples: (500 · 2^15) / (50 · 2^13).
const PAPER_TO_DESK: f64 = 40.0;

fn option_for(kind: OptionKind, strike: f64) -> OptionSpec {
    let barrier = (kind == OptionKind::UpAndOutAsianCall).then_some(120.0);
    OptionSpec::new(kind, strike, barrier).unwrap()
}

fn greek_values(report: &ExperimentReport) -> Outcome {
    use GreekKind::*;
    use OptionKind::*;
    let published = [
        (BinaryAsian, Delta, 0.029204),
        (BinaryAsian, Vega, -0.83114),
        (AsianCall, Delta, 0.65973),
        (AsianCall, Gamma, 0.029165),
        (AsianCall, Vega, 20.364),
        (UpAndOutAsianCall, Delta, 0.21265),
        (UpAndOutAsianCall, Vega, -12.151),
    ];
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for (kind, greek, value) in published {
        let base = report
            .find(kind, greek, 100.0, 64, MethodSpec::MC_MV)
            .ok_or("missing MC-MV cell")?;
        // The published figure carries its own MC error, estimated from ours.
        let published_se = base.estimate.std_err / PAPER_TO_DESK.sqrt();
        for method in MethodSpec::PAPER {
            let row = report
                .find(kind, greek, 100.0, 64, method)
                .ok_or("missing cell")?;
            let se = row.estimate.std_err.hypot(published_se);
            let z = (row.estimate.mean - value).abs() / se;
            worst = worst.max(z);
            if !(z <= 3.0) {
                bad.push(format!(
                    "{kind} {greek} {method}: {:.6} vs {value} ({z:.2} SE)",
                    row.estimate.mean
                ));
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("28 cells, largest gap {worst:.2} combined SE"))
    } else {
        Err(bad.join("; "))
    }
}

fn vrf_properties(report: &ExperimentReport) -> Outcome {
    let mut bad = Vec::new();
    let mut min_binary = f64::INFINITY;
    let mut min_call = f64::INFINITY;
    for row in report
        .rows
        .iter()
        .filter(|r| r.method == MethodSpec::QMC_CMV)
    {
        let cell = format!("{} {} K={} d={}", row.option, row.greek, row.strike, row.d);
        let find = |m| {
            report
                .find(row.option, row.greek, row.strike, row.d, m)
                .map(|r| r.vrf)
                .unwrap_or(f64::NAN)
        };
        let (qmc_mv, mc_cmv) = (find(MethodSpec::QMC_MV), find(MethodSpec::MC_CMV));
        if row.greek == GreekKind::Delta {
            match row.option {
                OptionKind::BinaryAsian => {
                    min_binary = min_binary.min(row.vrf);
                    if !(row.vrf >= 500.0) {
                        bad.push(format!("(a) {cell}: QMC-CMV VRF {:.1}", row.vrf));
                    }
                }
                OptionKind::AsianCall => {
                    min_call = min_call.min(row.vrf);
                    if !(row.vrf >= 100.0) {
                        bad.push(format!("(b) {cell}: QMC-CMV VRF {:.1}", row.vrf));
                    }
                }
                OptionKind::UpAndOutAsianCall => {}
            }
        }
        if !(row.vrf > qmc_mv) {
            bad.push(format!(
                "(c) {cell}: QMC-CMV VRF {:.1} vs QMC-MV {:.1}",
                row.vrf, qmc_mv
            ));
        }
        if !(0.3..=3.0).contains(&mc_cmv) {
            bad.push(format!("(c) {cell}: MC-CMV VRF {mc_cmv:.2}"));
        }
    }
    if bad.is_empty() {
        Ok(format!(
            "min binary-delta VRF {min_binary:.0}, min call-delta VRF {min_call:.0}"
        ))
    } else {
        Err(bad.join("; "))
    }
}

/// Desk-scale sanity ordering: QMC-CMV > QMC-MV ≥ 1 at `K = 100`, `d = 64`.
fn vrf_ordering(report: &ExperimentReport) -> Outcome {
    let mut bad = Vec::new();
    for kind in OptionKind::ALL {
        for greek in GreekKind::ALL {
            let vrf = |m| {
                report
                    .find(kind, greek, 100.0, 64, m)
                    .map(|r| r.vrf)
                    .unwrap_or(f64::NAN)
            };
            let (mv, cmv) = (vrf(MethodSpec::QMC_MV), vrf(MethodSpec::QMC_CMV));
            if !(cmv > mv && mv >= 1.0) {
                bad.push(format!("{kind} {greek}: QMC-CMV {cmv:.1}, QMC-MV {mv:.1}"));
            }
        }
    }
    if bad.is_empty() {
        Ok("9 cells ordered".into())
    } else {
        Err(bad.join("; "))
    }
}

/// Independent draws of `Z`, mapped to Brownian increments by a running sum.
fn closed_form_vs_quadrature() -> Outcome {
    let params = MarketParams::reference();
    let spec = QuadratureSpec::with_tol(1e-12);
    let mut rng = ChaCha20Rng::seed_from_u64(0x0acc_e975);
    let mut worst = 0.0f64;
    let mut count = 0;
    for d in [4, 8, 16] {
        let grid = TimeGrid::new(d, params.maturity).unwrap();
        let sqrt_dt = grid.step().sqrt();
        let mut path = PathSample::with_dim(d);
        for draw in 0..100 {
            let mut w = 0.0;
            let y: Vec<f64> = (1..d)
                .map(|_| {
                    let u: f64 = rng.gen_range(1e-12..1.0 - 1e-12);
                    w += sqrt_dt * inv_normal_cdf(u).unwrap();
                    w
                })
                .collect();
            path.fill_tilde(&params, &grid, &y);
            for kind in OptionKind::ALL {
                let option = option_for(kind, 100.0);
                for greek in GreekKind::ALL {
                    let closed = cmv_estimate(greek, &option, &params, &grid, &path);
                    let quad = conditional_quadrature(greek, &option, &params, &grid, &y, &spec)
                        .map_err(|e| format!("{kind} {greek} d={d} draw {draw}: {e}"))?;
                    let rel = (closed - quad).abs() / quad.abs();
                    if !(rel <= 1e-7) {
                        return Err(format!(
                            "{kind} {greek} d={d} draw {draw}: {closed} vs {quad} (rel {rel:e})"
                        ));
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

fn conditioning_consistency() -> Outcome {
    let params = MarketParams::reference();
    let grid = TimeGrid::new(64, params.maturity).unwrap();
    let (m, n) = (50, 1 << 14);
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for kind in OptionKind::ALL {
        let option = option_for(kind, 100.0);
        for (g, greek) in GreekKind::ALL.into_iter().enumerate() {
            let seed = 4_000 + 10 * kind as u64 + g as u64;
            let run = |method, seed| {
                run_batches(method, greek, &option, &params, &grid, m, n, seed)
                    .map_err(|e| e.to_string())
            };
            let mv = run(MethodSpec::MC_MV, seed)?;
            let cmv = run(MethodSpec::MC_CMV, seed + 500)?;
            let z = (mv.mean - cmv.mean).abs() / mv.combined_se(&cmv);
            worst = worst.max(z);
            if !(z <= 4.0) {
                bad.push(format!(
                    "{kind} {greek}: MV {:.6} vs CMV {:.6} ({z:.2} SE)",
                    mv.mean, cmv.mean
                ));
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("9 pairs, largest gap {worst:.2} combined SE"))
    } else {
        Err(bad.join("; "))
    }
}

fn factorization_suite() -> Outcome {
    let mut worst = 0.0f64;
    for d in [2, 4, 16, 64, 128, 256] {
        let grid = TimeGrid::new(d, 1.0).unwrap();
        let sigma = build_covariance(&grid).map_err(|e| e.to_string())?;
        let scale = sigma.amax();
        for c in Construction::ALL {
            // GPCA needs a pilot, so take the production integrand's factor.
            let problem = GreekProblem::new(
                GreekKind::Delta,
                option_for(OptionKind::AsianCall, 100.0),
                MarketParams::reference(),
                d,
            )
            .map_err(|e| e.to_string())?;
            let method = MethodSpec::QMC_MV.with_construction(c);
            let integrand = GreekIntegrand::new(&problem, method, 1024, 11)
                .map_err(|e| format!("{c} d={d}: {e}"))?;
            let f = integrand.factor();
            let a = f.a();
            let err = (a * a.transpose() - &sigma).amax() / scale;
            if !(err <= 1e-10) {
                return Err(format!("{c} d={d}: relative error {err:e}"));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!("4 constructions × 6 dimensions, worst {worst:.1e}"))
}

fn asymptotic_unbiasedness() -> Outcome {
    let params = MarketParams::reference();
    let option = option_for(OptionKind::AsianCall, 100.0);
    let dims = [8, 16, 32, 64, 128];
    let scan = convergence_scan(
        GreekKind::Delta,
        &option,
        &params,
        MethodSpec::MC_MV,
        &dims,
        50,
        1 << 14,
        0x6a95,
    )
    .map_err(|e| e.to_string())?;
    let gaps: Vec<(f64, f64)> = scan
        .windows(2)
        .map(|w| ((w[1].mean - w[0].mean).abs(), w[0].combined_se(&w[1])))
        .collect();
    let shown: Vec<String> = gaps
        .iter()
        .map(|(g, se)| format!("{g:.2e}/{se:.1e}"))
        .collect();
    for pair in gaps.windows(2) {
        let ((g0, _), (g1, se1)) = (pair[0], pair[1]);
        if g1 > g0 + 3.0 * se1 {
            return Err(format!("gaps/SE {shown:?}: a gap grew beyond noise"));
        }
    }
    let (g, se) = *gaps.last().unwrap();
    if !(g < 5.0 * se) {
        return Err(format!("gaps/SE {shown:?}: final gap {:.1} SE", g / se));
    }
    Ok(format!("gaps/SE {shown:?}"))
}

/// FD and MV call delta at `d` monitoring dates, `M = 50`, `N = 2^15`.
fn fd_gap(d: usize) -> Result<(GreekEstimate, GreekEstimate, f64), String> {
    let params = MarketParams::reference();
    let grid = TimeGrid::new(d, params.maturity).unwrap();
    let option = option_for(OptionKind::AsianCall, 100.0);
    let (m, n) = (50, 1 << 15);
    let mv = run_batches(
        MethodSpec::MC_MV,
        GreekKind::Delta,
        &option,
        &params,
        &grid,
        m,
        n,
        0x7f0,
    )
    .map_err(|e| e.to_string())?;
    let fd = finite_difference_batches(GreekKind::Delta, &option, &params, &grid, m, n, 0x7f1, 0.1)
        .map_err(|e| e.to_string())?;
    let z = (mv.mean - fd.mean).abs() / mv.combined_se(&fd);
    Ok((mv, fd, z))
}

fn fd_cross_check() -> Outcome {
    let (mv, fd, z) = fd_gap(64)?;
    let detail = format!(
        "d=64: MV {:.6} ± {:.1e} vs FD {:.6} ± {:.1e}, {z:.2} combined SE",
        mv.mean, mv.std_err, fd.mean, fd.std_err
    );
    if z <= 4.0 {
        return Ok(detail);
    }
    // FD differentiates the discretely monitored price, while the MV weight
    // targets the continuous average with an O(1/d) bias. Show that the gap
    // closes once that bias is below the noise.
    let (mv, fd, z_fine) = fd_gap(512)?;
    Err(format!(
        "{detail}; at d=512: MV {:.6} vs FD {:.6}, {z_fine:.2} combined SE (MV discretization bias)",
        mv.mean, fd.mean
    ))
}

fn determinism(one: &str, eight: &str) -> Outcome {
    if one == eight {
        Ok(format!("{} bytes identical", one.len()))
    } else {
        let line = one.lines().zip(eight.lines()).position(|(a, b)| a != b);
        Err(format!("CSV differs (first differing line {line:?})"))
    }
}

fn desk_report(workers: usize) -> Result<ExperimentReport, String> {
    let config = ExperimentConfig::from_json(CONFIG_EXAMPLE).map_err(|e| e.to_string())?;
    let report = with_workers(Some(workers), || run_experiment(&config))
        .map_err(|e| e.to_string())?
        .map_err(|e| e.to_string())?;
    if let Some(row) = report.failures().next() {
        return Err(format!(
            "cell failed: {} {} {:?}",
            row.option, row.greek, row.status
        ));
    }
    Ok(report)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    // A name filter that does not select this target skips it.
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }

    // `ACCEPTANCE_ONLY=3,5` runs a subset; the rest are reported as skipped.
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|c| c.trim().parse().ok()).collect());
    let wanted = |i: u32| only.as_ref().is_none_or(|o| o.contains(&i));

    let start = Instant::now();
    let desk = if wanted(1) || wanted(2) || wanted(8) {
        desk_report(8).and_then(|r8| {
            let one = if wanted(8) {
                desk_report(1)?.to_csv_string().map_err(|e| e.to_string())?
            } else {
                String::new()
            };
            let eight = r8.to_csv_string().map_err(|e| e.to_string())?;
            Ok((r8, one, eight))
        })
    } else {
        Err("desk sweep not run".into())
    };
    let from_desk = |f: &dyn Fn(&ExperimentReport, &str, &str) -> Outcome| match &desk {
        Ok((report, one, eight)) => f(report, one, eight),
        Err(e) => Err(e.clone()),
    };

    let criteria: [(u32, &str, &dyn Fn() -> Outcome); 8] = [
        (1, "greek-values", &|| from_desk(&|r, _, _| greek_values(r))),
        (2, "vrf-properties", &|| {
            from_desk(&|r, _, _| vrf_properties(r))
        }),
        (3, "closed-form-vs-quadrature", &closed_form_vs_quadrature),
        (4, "conditioning-consistency", &conditioning_consistency),
        (5, "factorization", &factorization_suite),
        (6, "asymptotic-unbiasedness", &asymptotic_unbiasedness),
        (7, "fd-cross-check", &fd_cross_check),
        (8, "determinism", &|| {
            from_desk(&|_, one, eight| determinism(one, eight))
        }),
    ];
    let mut results = Vec::new();
    for (i, name, check) in criteria {
        if wanted(i) {
            results.push((format!("{i} {name}"), check()));
        } else {
            println!("SKIP {i} {name}");
        }
    }
    let criteria_run = results.len();
    // Not a numbered criterion; reported alongside because it reads the
    // same desk sweep.
    if wanted(2) {
        results.push((
            "invariant vrf-ordering".into(),
            from_desk(&|r, _, _| vrf_ordering(r)),
        ));
    }

    let mut failed = 0;
    for (label, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {label}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label}: {detail}");
            }
        }
    }
    let failed_criteria = results[..criteria_run]
        .iter()
        .filter(|(_, o)| o.is_err())
        .count();
    println!(
        "{} of {criteria_run} criteria passed in {:.0}s",
        criteria_run - failed_criteria,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
