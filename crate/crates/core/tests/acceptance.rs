//! The twelve acceptance criteria at their default sizes and seed. Each test
//! prints one verdict line; run with `--nocapture` to see them.

use bessel_snake::checks::{run_check, RunConfig};

fn criterion(name: &str) {
    let out = run_check(name, &RunConfig::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
    let r = &out.report;
    let p = r.p_value.map_or("-".to_string(), |p| format!("{p:.4}"));
    println!(
        "[{}] {name}: statistic={:.5} threshold={} p={p} n={} seed={} {:.1}s | {}",
        if r.pass { "PASS" } else { "FAIL" },
        r.statistic,
        r.threshold,
        r.n,
        r.master_seed,
        r.runtime_seconds,
        r.notes
    );
    assert!(r.pass, "{name} failed: {}", r.notes);
}

#[test]
fn law_wstar() {
    criterion("law-wstar");
}

#[test]
fn girsanov_identity() {
    criterion("girsanov-identity");
}

#[test]
fn laplace_bessel2() {
    criterion("laplace-bessel2");
}

#[test]
fn hitting_path() {
    criterion("hitting-path");
}

#[test]
fn minimizer_law() {
    criterion("minimizer-law");
}

#[test]
fn integral_form() {
    criterion("integral-form");
}

#[test]
fn spine_poisson() {
    criterion("spine-poisson");
}

#[test]
fn spine_independence() {
    criterion("spine-independence");
}

#[test]
fn reversal_williams() {
    criterion("reversal-williams");
}

#[test]
fn super_min_cdf() {
    criterion("super-min-cdf");
}

#[test]
fn super_joint() {
    criterion("super-joint");
}

#[test]
fn super_path() {
    criterion("super-path");
}
