//! Statistical invariants of full protocol runs against the closed forms.

use entauth_core::adversary::{AdversaryStrategy, StrategyKind};
use entauth_core::analysis;
use entauth_core::protocol::{run_protocol, EvePlacement, ProtocolParams, TrialOutcome};
use entauth_core::qchannel::PhotonSourceModel;
use entauth_core::rng::SplitMix64;
use rayon::prelude::*;

fn params(k: u32, d: u32) -> ProtocolParams {
    ProtocolParams {
        key_count: k,
        tamper_count: d,
        disclosed_count: k,
        ..ProtocolParams::default()
    }
}

fn run_many(
    p: &ProtocolParams,
    source: &PhotonSourceModel,
    strategy: Option<&AdversaryStrategy>,
    trials: u64,
    master_seed: u64,
) -> Vec<TrialOutcome> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::for_trial(master_seed, i);
            run_protocol(p, source, strategy, EvePlacement::AliceArm, &mut rng)
        })
        .collect()
}

fn four_sigma(p: f64, n: u64) -> f64 {
    4.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn honest_runs_always_authenticate() {
    let p = params(17, 41);
    let outcomes = run_many(&p, &PhotonSourceModel::ideal(), None, 10_000, 0x5EED);
    for o in &outcomes {
        assert!(o.honest_token_accepted);
        assert!(!o.eavesdropping_detected);
        assert_eq!(o.restarts, 0);
        assert_eq!(o.alice_tamper_errors, 0);
        assert_eq!(o.bob_tamper_errors, 0);
        // Alice's and Bob's key vectors are identical.
        assert_eq!(o.key_agreements, 17);
    }
}

#[test]
fn passive_adversary_matches_no_adversary() {
    // The passive strategy draws nothing from the stream, so honest
    // statistics coincide trial by trial with running no adversary at all.
    let p = params(5, 4);
    let source = PhotonSourceModel::ideal();
    let passive = AdversaryStrategy::new(StrategyKind::Passive);
    for seed in 0..2_000u64 {
        let mut rng_a = SplitMix64::for_trial(7, seed);
        let mut rng_b = SplitMix64::for_trial(7, seed);
        let without = run_protocol(&p, &source, None, EvePlacement::AliceArm, &mut rng_a);
        let with = run_protocol(&p, &source, Some(&passive), EvePlacement::AliceArm, &mut rng_b);
        assert_eq!(without.honest_token_accepted, with.honest_token_accepted);
        assert_eq!(without.eavesdropping_detected, with.eavesdropping_detected);
        assert_eq!(without.restarts, with.restarts);
        assert_eq!(without.alice_tamper_errors, with.alice_tamper_errors);
        assert_eq!(without.bob_tamper_errors, with.bob_tamper_errors);
        assert_eq!(without.key_agreements, with.key_agreements);
        assert_eq!(with.eve_key_bits_known, 0);
    }
}

#[test]
fn intercept_resend_detection_matches_closed_form() {
    // With threshold 0 and all d tamper bits disturbed, expected detection is
    // 1 - 0.75^d.
    let d = 6;
    let p = params(3, d);
    let strategy = AdversaryStrategy::new(StrategyKind::InterceptResendAll);
    let trials = 100_000u64;
    let outcomes = run_many(&p, &PhotonSourceModel::ideal(), Some(&strategy), trials, 0xA11CE);
    let detected = outcomes.iter().filter(|o| o.eavesdropping_detected).count() as f64;
    let rate = detected / trials as f64;
    let expected = 1.0 - analysis::evade_prob(d);
    assert!(
        (rate - expected).abs() < four_sigma(expected, trials),
        "rate {rate} expected {expected}"
    );
}

#[test]
fn intercept_resend_tamper_error_rate_is_quarter() {
    let p = params(1, 16);
    let strategy = AdversaryStrategy::new(StrategyKind::InterceptResendAll);
    let trials = 20_000u64;
    let outcomes = run_many(&p, &PhotonSourceModel::ideal(), Some(&strategy), trials, 0xBEEF);
    let errors: u64 = outcomes.iter().map(|o| u64::from(o.alice_tamper_errors)).sum();
    let checked: u64 = outcomes.iter().map(|o| u64::from(o.tamper_checked)).sum();
    let rate = errors as f64 / checked as f64;
    assert!(
        (rate - 0.25).abs() < four_sigma(0.25, checked),
        "rate {rate} over {checked} bits"
    );
    // Bob's arm is untouched.
    assert!(outcomes.iter().all(|o| o.bob_tamper_errors == 0));
}

#[test]
fn subset_guess_success_matches_exact_formula() {
    // End-to-end subset-guess success under the classical accounting (all
    // key slots measured and no tamper flag) against the exact closed form,
    // for every valid g on three small geometries.
    for &(k, d) in &[(1u32, 1u32), (2, 3), (3, 7)] {
        let p = params(k, d);
        for g in k..=k + d {
            let expected = analysis::subset_guess_success(k, d, g).unwrap().to_f64();
            let trials = 1_000_000u64;
            let strategy = AdversaryStrategy::new(StrategyKind::SubsetGuess { guesses: g });
            let successes: u64 = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = SplitMix64::for_trial(0xC0FFEE ^ u64::from(g), i);
                    let o = run_protocol(
                        &p,
                        &PhotonSourceModel::ideal(),
                        Some(&strategy),
                        EvePlacement::AliceArm,
                        &mut rng,
                    );
                    u64::from(o.eve_all_key_slots_measured && !o.eavesdropping_detected)
                })
                .sum();
            let rate = successes as f64 / trials as f64;
            assert!(
                (rate - expected).abs() < four_sigma(expected, trials),
                "k={k} d={d} g={g}: rate {rate} expected {expected}"
            );
        }
    }
}

#[test]
fn pns_evasion_matches_binomial_expectation() {
    let d = 8;
    let p1 = 0.5;
    let p = params(4, d);
    let source = PhotonSourceModel::two_point(p1);
    let strategy = AdversaryStrategy::new(StrategyKind::PhotonNumberSplitting);
    let trials = 100_000u64;
    let outcomes = run_many(&p, &source, Some(&strategy), trials, 0x9A57);
    let undetected = outcomes.iter().filter(|o| !o.eavesdropping_detected).count() as f64;
    let rate = undetected / trials as f64;
    let expected = analysis::pns_evasion_exact(d, p1).unwrap();
    assert!(
        (rate - expected).abs() < four_sigma(expected, trials),
        "rate {rate} expected {expected}"
    );
}

#[test]
fn oracle_locations_cheat_is_invisible_and_omniscient() {
    let p = params(6, 5);
    let strategy = AdversaryStrategy::new(StrategyKind::OracleLocations);
    let outcomes = run_many(&p, &PhotonSourceModel::ideal(), Some(&strategy), 10_000, 0x0BAC);
    for o in &outcomes {
        assert!(!o.eavesdropping_detected);
        assert_eq!(o.eve_key_bits_known, 6);
        assert!(o.eve_forged_auth);
        assert!(o.authenticated);
        // Her resends preserve the honest correlation too.
        assert!(o.honest_token_accepted);
    }
}

#[test]
fn blind_forgery_rate_matches_power_of_two() {
    let p = params(6, 0);
    let trials = 200_000u64;
    let outcomes = run_many(&p, &PhotonSourceModel::ideal(), None, trials, 0xF0E);
    let forged = outcomes.iter().filter(|o| o.eve_forged_auth).count() as f64;
    let rate = forged / trials as f64;
    let expected = analysis::forgery_prob(6);
    assert!(
        (rate - expected).abs() < four_sigma(expected, trials),
        "rate {rate} expected {expected}"
    );
}

#[test]
fn detection_triggers_restarts_up_to_the_limit() {
    // Guessing every slot at d = 12 is detected in most rounds, so restart
    // exhaustion shows up within a modest trial count.
    let mut p = params(2, 12);
    p.max_restarts = 2;
    let strategy = AdversaryStrategy::new(StrategyKind::InterceptResendAll);
    let trials = 2_000u64;
    let outcomes = run_many(&p, &PhotonSourceModel::ideal(), Some(&strategy), trials, 0xD00D);
    let evade = analysis::evade_prob(12);
    let exhausted = outcomes.iter().filter(|o| o.restart_limit_exceeded).count() as f64;
    // P(all three rounds flagged) = (1 - 0.75^12)^3.
    let expected = (1.0 - evade).powi(3);
    assert!(
        (exhausted / trials as f64 - expected).abs() < four_sigma(expected, trials),
        "exhausted fraction {}",
        exhausted / trials as f64
    );
    for o in &outcomes {
        assert!(o.restarts <= 2);
        if o.restart_limit_exceeded {
            assert!(!o.authenticated && !o.honest_token_accepted && !o.eve_forged_auth);
            assert!(o.eavesdropping_detected);
            assert_eq!(o.restarts, 2);
        }
    }
}

#[test]
fn disturbing_one_tamper_slot_detects_at_quarter_rate() {
    // A subset guess of exactly one slot on a 1-key/1-tamper stream disturbs
    // the tamper slot in half the trials; detection happens at rate 1/4 given
    // a disturbed slot, so overall 1/8.
    let p = params(1, 1);
    let strategy = AdversaryStrategy::new(StrategyKind::SubsetGuess { guesses: 1 });
    let trials = 200_000u64;
    let outcomes = run_many(&p, &PhotonSourceModel::ideal(), Some(&strategy), trials, 0x7E57);
    let detected = outcomes.iter().filter(|o| o.eavesdropping_detected).count() as f64;
    let rate = detected / trials as f64;
    assert!(
        (rate - 0.125).abs() < four_sigma(0.125, trials),
        "rate {rate}"
    );
}
