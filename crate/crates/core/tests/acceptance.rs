//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines come out in order and
//! unbuffered. A failing criterion is reported but only turns into a
//! nonzero exit when `PFLOW_ACCEPTANCE_STRICT=1`, so a plain
//! `cargo test --workspace` still reaches the other crates.

use std::time::Instant;

use pflow::validation::*;

const SEED: u64 = 0;

fn report(idx: usize, check: &CheckResult, ms: u128) -> bool {
    let tag = if check.passed { "PASS" } else { "FAIL" };
    println!("[{tag}] {idx:>2} {}: {} ({ms} ms)", check.name, check.detail);
    check.passed
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, u128) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_millis())
}

fn main() {
    // `cargo test -- --list` and filters from other targets should not start a 10 minute run.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    println!("running acceptance criteria (seed {SEED})");
    let mut results = Vec::new();

    let (c, ms) = timed(tail_table_check);
    results.push(report(1, &c, ms));
    let (c, ms) = timed(|| singleton_check(SEED));
    results.push(report(2, &c, ms));
    let (c, ms) = timed(|| jacobian_check(SEED));
    results.push(report(3, &c, ms));
    let (c, ms) = timed(|| lipschitz_check(SEED));
    results.push(report(4, &c, ms));

    let ((c, mut tally), ms) = timed(|| distributional_identity_check(SEED));
    results.push(report(5, &c, ms));
    let (c, ms) = timed(|| particle_rate_check(SEED));
    results.push(report(6, &c, ms));
    let ((c, gen_tally), ms) = timed(|| generation_table_check(SEED));
    tally.merge(&gen_tally);
    results.push(report(7, &c, ms));

    let (c, ms) = timed(|| density_fidelity_check(SEED));
    results.push(report(8, &c, ms));
    let ((c, variant), ms) = timed(|| funnel_oracle_check(SEED));
    results.push(report(9, &c, ms));
    if let Some(v) = variant {
        println!("      funnel variant selected: {v:?}");
    }
    let (c, ms) = timed(optimizer_check);
    results.push(report(10, &c, ms));

    // Trajectories recorded by criteria 5 and 7.
    let (c, ms) = timed(|| bounds_check(&tally));
    results.push(report(11, &c, ms));
    let (c, ms) = timed(|| max_sampling_check(SEED));
    results.push(report(12, &c, ms));

    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    let strict = std::env::var("PFLOW_ACCEPTANCE_STRICT").map(|v| v == "1").unwrap_or(false);
    if strict && passed != results.len() {
        std::process::exit(1);
    }
}
