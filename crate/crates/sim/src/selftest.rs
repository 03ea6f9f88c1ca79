//! Oracle-equality and regression suite behind the `selftest` subcommand.
//!
//! The exact checks compare independent computation routes (brute-force
//! enumeration against closed forms, the two algebraic formula forms, exact
//! rational minimality of the sizing rule). The Monte Carlo regression runs
//! seeded experiments and requires every empirical/analytic pairing that is
//! verifiable at the configured trial count to land within |z| <= 4; the
//! seeds are fixed, so the suite is deterministic.

use crate::config::ExperimentConfig;
use crate::report::Metric;
use crate::runner::run_experiment;
use entauth_core::adversary::{AdversaryStrategy, StrategyKind};
use entauth_core::analysis;
use entauth_core::classical::{keystream_transform, SecretKey};
use entauth_core::qchannel::PhotonSourceModel;
use entauth_core::rng::SplitMix64;

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CheckResult {
    fn pass(name: &'static str, details: impl Into<String>) -> Self {
        Self { name, passed: true, details: details.into() }
    }

    fn fail(name: &'static str, details: impl Into<String>) -> Self {
        Self { name, passed: false, details: details.into() }
    }
}

/// The z-bound applied by the Monte Carlo regression checks.
pub const REGRESSION_Z_BOUND: f64 = 4.0;

/// Bound on `k + d` for the exhaustive oracle-equality check.
pub const ORACLE_EQUALITY_LIMIT: u32 = 12;

/// Run the full suite. `mc_trials` scales the Monte Carlo regression part
/// (default 10_000 in the CLI).
pub fn run_selftest(mc_trials: u64) -> Vec<CheckResult> {
    vec![
        check_keystream(),
        check_oracle_equality(),
        check_formula_forms_agree(),
        check_marginal_gain(),
        check_sizing(),
        check_pns_arithmetic(),
        check_mc_regression(mc_trials),
    ]
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

fn check_keystream() -> CheckResult {
    const NAME: &str = "keystream-pinned-word-and-involution";
    let first = keystream_transform(SecretKey(0), 0, &[0u8; 8]);
    if first != 0xE220_A839_7B1D_CDAFu64.to_le_bytes() {
        return CheckResult::fail(NAME, format!("first keystream word was {first:02x?}"));
    }
    let mut rng = SplitMix64::new(0x5E1F);
    for _ in 0..10_000 {
        let key = SecretKey(rng.next_u64());
        let nonce = rng.next_u64();
        let len = rng.below(96) as usize;
        let data: Vec<u8> = (0..len).map(|_| rng.next_u64() as u8).collect();
        let round_trip = keystream_transform(key, nonce, &keystream_transform(key, nonce, &data));
        if round_trip != data {
            return CheckResult::fail(NAME, "involution failed".to_string());
        }
    }
    CheckResult::pass(NAME, "pinned word ok, 10000 involution triples ok")
}

fn check_oracle_equality() -> CheckResult {
    const NAME: &str = "subset-oracle-equals-closed-form";
    let mut cases = 0u32;
    for k in 1..=ORACLE_EQUALITY_LIMIT {
        for d in 0..=ORACLE_EQUALITY_LIMIT - k {
            for g in k..=k + d {
                let oracle = analysis::brute_force_subset_oracle(k, d, g)
                    .expect("within enumeration bound");
                let closed = analysis::subset_guess_success(k, d, g).expect("valid domain");
                if oracle != closed {
                    return CheckResult::fail(
                        NAME,
                        format!("mismatch at k={k} d={d} g={g}: {oracle} vs {closed}"),
                    );
                }
                cases += 1;
            }
        }
    }
    CheckResult::pass(NAME, format!("{cases} instances equal as exact rationals"))
}

fn check_formula_forms_agree() -> CheckResult {
    const NAME: &str = "binomial-and-factorial-forms-agree";
    let mut cases = 0u32;
    for k in 1..=ORACLE_EQUALITY_LIMIT {
        for d in 0..=ORACLE_EQUALITY_LIMIT - k {
            for g in k..=k + d {
                let a = analysis::subset_guess_success(k, d, g).expect("valid domain");
                let b = analysis::subset_guess_success_factorial(k, d, g).expect("valid domain");
                if a != b {
                    return CheckResult::fail(NAME, format!("mismatch at k={k} d={d} g={g}"));
                }
                cases += 1;
            }
        }
    }
    CheckResult::pass(NAME, format!("{cases} instances identical"))
}

fn check_marginal_gain() -> CheckResult {
    const NAME: &str = "marginal-gain-ratio-and-limit";
    use entauth_core::num_rational::BigRational;
    let ratio = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    let three_quarters = ratio(3, 4);
    for k in 1u32..=6 {
        // Deep enough tamper budget to cross the limit.
        let d = 3 * k + 2;
        for g in k..k + d {
            let lo = analysis::subset_guess_success(k, d, g).expect("valid");
            let hi = analysis::subset_guess_success(k, d, g + 1).expect("valid");
            let step = analysis::marginal_gain_ratio(g, k).expect("valid") * &three_quarters;
            if hi.as_ratio() != &(lo.as_ratio() * &step) {
                return CheckResult::fail(
                    NAME,
                    format!("successive-ratio identity broken at k={k} d={d} g={g}"),
                );
            }
            // The step is a strict gain exactly up to g = 4k - 2, flat at
            // g = 4k - 1, and a strict loss beyond.
            let expected = match (g + 1).cmp(&(4 * k)) {
                core::cmp::Ordering::Less => step > ratio(1, 1),
                core::cmp::Ordering::Equal => step == ratio(1, 1),
                core::cmp::Ordering::Greater => step < ratio(1, 1),
            };
            if !expected {
                return CheckResult::fail(NAME, format!("limit misplaced at k={k} g={g}"));
            }
        }
        if analysis::g_limit(k) != 4 * k - 2 {
            return CheckResult::fail(NAME, format!("g_limit wrong at k={k}"));
        }
    }
    CheckResult::pass(NAME, "identity and g = 4k-2 boundary hold for k in 1..=6")
}

fn check_sizing() -> CheckResult {
    const NAME: &str = "sizing-rule";
    let two_pow_17 = 7.62939453125e-6;
    match analysis::size_parameters(two_pow_17) {
        Ok((17, 41)) => {}
        other => return CheckResult::fail(NAME, format!("2^-17 sized as {other:?}")),
    }
    for target in [1e-3, 1e-6, 1e-9, two_pow_17] {
        let (k, d) = analysis::size_parameters(target).expect("valid target");
        let sufficient =
            analysis::forgery_prob(k) <= target && analysis::evade_prob(d) <= target;
        let minimal =
            analysis::forgery_prob(k - 1) > target && analysis::evade_prob(d - 1) > target;
        if !sufficient || !minimal {
            return CheckResult::fail(NAME, format!("(k, d) = ({k}, {d}) not tight at {target}"));
        }
    }
    let rounded = format!("{:.2}", analysis::balance_ratio());
    if rounded != "2.41" {
        return CheckResult::fail(NAME, format!("balance ratio printed as {rounded}"));
    }
    CheckResult::pass(NAME, "(17, 41) at 2^-17; minimality holds; ratio prints 2.41")
}

fn check_pns_arithmetic() -> CheckResult {
    const NAME: &str = "pns-correction-arithmetic";
    if analysis::pns_adjusted_d(41, 0.5) != Ok(82) {
        return CheckResult::fail(NAME, "adjusted d for (41, 0.5) is not 82".to_string());
    }
    if analysis::pns_effective_d(41, 0.5) != Ok(20.5) {
        return CheckResult::fail(NAME, "effective d for (41, 0.5) is not 20.5".to_string());
    }
    let exact = analysis::pns_evasion_exact(16, 0.5).expect("valid");
    let approx = analysis::pns_evasion_point_approx(16, 0.5).expect("valid");
    if (exact - 0.875f64.powi(16)).abs() > 1e-15 || (approx - analysis::evade_prob(8)).abs() > 1e-12
    {
        return CheckResult::fail(NAME, "evasion forms off".to_string());
    }
    CheckResult::pass(NAME, "effective/adjusted counts and both evasion forms check out")
}

fn metric_violations(metrics: &[Metric]) -> Vec<String> {
    let mut violations = Vec::new();
    for m in metrics {
        let (Some(analytic), Some(empirical)) = (m.analytic, m.empirical) else {
            continue;
        };
        if let Some(z) = m.z_score {
            if m.mc_verifiable && z.abs() > REGRESSION_Z_BOUND {
                violations.push(format!("{}: z = {z:.2}", m.name));
            }
        } else if (analytic == 0.0 || analytic == 1.0) && empirical != analytic {
            // Degenerate analytic rates must match exactly.
            violations.push(format!("{}: expected exactly {analytic}, got {empirical}", m.name));
        }
    }
    violations
}

fn check_mc_regression(trials: u64) -> CheckResult {
    const NAME: &str = "monte-carlo-regression";
    let mut experiments: Vec<(&str, ExperimentConfig)> = Vec::new();

    let mut passive = ExperimentConfig::default();
    passive.trials = trials;
    passive.master_seed = 101;
    passive.params.key_count = 8;
    passive.params.tamper_count = 8;
    passive.params.disclosed_count = 6;
    experiments.push(("passive", passive));

    let mut intercept = ExperimentConfig::default();
    intercept.trials = trials;
    intercept.master_seed = 102;
    intercept.params.key_count = 4;
    intercept.params.tamper_count = 8;
    intercept.params.disclosed_count = 4;
    intercept.strategy = AdversaryStrategy::new(StrategyKind::InterceptResendAll);
    experiments.push(("intercept-resend", intercept));

    let mut subset = ExperimentConfig::default();
    subset.trials = trials;
    subset.master_seed = 103;
    subset.params.key_count = 2;
    subset.params.tamper_count = 3;
    subset.params.disclosed_count = 2;
    subset.strategy = AdversaryStrategy::new(StrategyKind::SubsetGuess { guesses: 3 });
    experiments.push(("subset-guess", subset));

    let mut pns = ExperimentConfig::default();
    pns.trials = trials;
    pns.master_seed = 104;
    pns.params.key_count = 4;
    pns.params.tamper_count = 8;
    pns.params.disclosed_count = 4;
    pns.strategy = AdversaryStrategy::new(StrategyKind::PhotonNumberSplitting);
    pns.source = PhotonSourceModel::two_point(0.5);
    experiments.push(("photon-number-splitting", pns));

    let mut oracle = ExperimentConfig::default();
    oracle.trials = trials;
    oracle.master_seed = 105;
    oracle.params.key_count = 6;
    oracle.params.tamper_count = 5;
    oracle.params.disclosed_count = 6;
    oracle.strategy = AdversaryStrategy::new(StrategyKind::OracleLocations);
    experiments.push(("oracle-locations", oracle));

    let mut checked = 0usize;
    for (label, config) in &experiments {
        let report = match run_experiment(config) {
            Ok(report) => report,
            Err(e) => return CheckResult::fail(NAME, format!("{label}: {e}")),
        };
        let violations = metric_violations(&report.metrics);
        if !violations.is_empty() {
            return CheckResult::fail(NAME, format!("{label}: {}", violations.join("; ")));
        }
        checked += report
            .metrics
            .iter()
            .filter(|m| m.analytic.is_some() && m.empirical.is_some())
            .count();
    }
    CheckResult::pass(
        NAME,
        format!(
            "{checked} analytic pairings within |z| <= {REGRESSION_Z_BOUND} over {} experiments x {trials} trials",
            experiments.len()
        ),
    )
}
