//! Acceptance gate: runs every criterion at its pinned tolerance and prints one
//! line per criterion. Exits non-zero if any criterion fails.

use stoqmc_cli::suite::{self, run_suite, SuiteOptions};

fn pinned() {
    // The bands below are part of the contract; changing one must fail here.
    assert_eq!(suite::FIRST_MOMENT_SIGMAS, 4.0);
    assert_eq!(suite::SECOND_MOMENT_SIGMAS, 5.0);
    assert_eq!(suite::STATIONARITY_SIGMAS, 4.0);
    assert_eq!(suite::SLOPE_SIGMAS, 3.0);
    assert_eq!(suite::RECONSTRUCTION_TOL, 1e-8);
    assert_eq!(suite::MAPPING_TOL, 1e-8);
    assert_eq!(suite::SANDWICH_DELTA, 0.1);
    assert_eq!(suite::TIM_DELTA, 0.1);
    assert_eq!(suite::SUCCESS_RATE, 2.0 / 3.0);
    assert_eq!(suite::BINOMIAL_ALPHA, 0.05);
    assert_eq!(suite::FIRST_MOMENT_LIMIT_S, 300.0);
    assert_eq!(suite::SOUNDNESS_LIMIT_S, 600.0);
    assert_eq!(suite::ERROR_OPERATOR_LIMIT_S, 60.0);
    assert_eq!(suite::ESTIMATOR_LIMIT_S, 1200.0);
}

fn main() {
    pinned();
    println!("acceptance suite (seed {}, full mode)", suite::SUITE_SEED);
    let report = run_suite(SuiteOptions::default(), |c| println!("{}", c.line()));
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} {}", c.id, c.name))
        .collect();
    println!(
        "acceptance: {}/{} criteria passed",
        report.criteria.len() - failed.len(),
        report.criteria.len()
    );
    assert_eq!(report.criteria.len(), 11, "every criterion must run");
    if !failed.is_empty() {
        eprintln!("failing criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
