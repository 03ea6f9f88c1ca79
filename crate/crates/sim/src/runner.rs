//! Seeded Monte Carlo experiment execution and parameter sweeps.
//!
//! Trial `i` draws its random stream from `mix64(master_seed XOR i)`, and
//! aggregation uses commutative integer counters only, so a report is
//! identical whatever the level of parallelism or scheduling.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig, OutputFormat};
use crate::report::{ConfigEcho, ExperimentReport, Metric, SweepPoint};
use entauth_core::adversary::StrategyKind;
use entauth_core::protocol::{run_protocol, EvePlacement, TrialOutcome};
use entauth_core::rng::SplitMix64;
use entauth_core::analysis;

/// Commutative integer counters accumulated over trials.
#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    trials: u64,
    detected: u64,
    honest_accepted: u64,
    authenticated: u64,
    forged: u64,
    restart_exhausted: u64,
    restarts_sum: u64,
    alice_errors: u64,
    bob_errors: u64,
    tamper_checked: u64,
    key_agreements: u64,
    key_slots: u64,
    eve_known_sum: u64,
    full_knowledge: u64,
    covered_undetected: u64,
    guessed_sum: u64,
}

impl Tally {
    fn from_outcome(outcome: &TrialOutcome, key_count: u32) -> Self {
        Tally {
            trials: 1,
            detected: outcome.eavesdropping_detected as u64,
            honest_accepted: outcome.honest_token_accepted as u64,
            authenticated: outcome.authenticated as u64,
            forged: outcome.eve_forged_auth as u64,
            restart_exhausted: outcome.restart_limit_exceeded as u64,
            restarts_sum: u64::from(outcome.restarts),
            alice_errors: u64::from(outcome.alice_tamper_errors),
            bob_errors: u64::from(outcome.bob_tamper_errors),
            tamper_checked: u64::from(outcome.tamper_checked),
            key_agreements: u64::from(outcome.key_agreements),
            key_slots: u64::from(key_count),
            eve_known_sum: u64::from(outcome.eve_key_bits_known),
            full_knowledge: (outcome.eve_key_bits_known == key_count) as u64,
            covered_undetected: (outcome.eve_all_key_slots_measured
                && !outcome.eavesdropping_detected) as u64,
            guessed_sum: u64::from(outcome.forged_bits_guessed),
        }
    }

    fn add(self, other: Tally) -> Tally {
        Tally {
            trials: self.trials + other.trials,
            detected: self.detected + other.detected,
            honest_accepted: self.honest_accepted + other.honest_accepted,
            authenticated: self.authenticated + other.authenticated,
            forged: self.forged + other.forged,
            restart_exhausted: self.restart_exhausted + other.restart_exhausted,
            restarts_sum: self.restarts_sum + other.restarts_sum,
            alice_errors: self.alice_errors + other.alice_errors,
            bob_errors: self.bob_errors + other.bob_errors,
            tamper_checked: self.tamper_checked + other.tamper_checked,
            key_agreements: self.key_agreements + other.key_agreements,
            key_slots: self.key_slots + other.key_slots,
            eve_known_sum: self.eve_known_sum + other.eve_known_sum,
            full_knowledge: self.full_knowledge + other.full_knowledge,
            covered_undetected: self.covered_undetected + other.covered_undetected,
            guessed_sum: self.guessed_sum + other.guessed_sum,
        }
    }
}

/// Run one seeded trial of the configured experiment.
pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> TrialOutcome {
    let mut rng = SplitMix64::for_trial(config.master_seed, trial_index);
    run_protocol(
        &config.params,
        &config.source,
        Some(&config.strategy),
        config.placement,
        &mut rng,
    )
}

/// Closed-form counterparts of the empirical metrics, where the analysis
/// provides one for the configured strategy and placement.
#[derive(Debug, Default, Clone)]
struct Analytics {
    detection: Option<f64>,
    evasion: Option<f64>,
    forgery: Option<f64>,
    authenticated: Option<f64>,
    honest: Option<f64>,
    alice_errors: Option<f64>,
    bob_errors: Option<f64>,
    key_agreement: Option<f64>,
    mean_restarts: Option<f64>,
    mean_known: Option<f64>,
    full_knowledge: Option<f64>,
    subset_cover_evade: Option<f64>,
    mean_guessed: Option<f64>,
    pns_approx: Option<f64>,
}

fn analytics_for(config: &ExperimentConfig) -> Analytics {
    let k = config.params.key_count;
    let d = config.params.tamper_count;
    let m = config.params.disclosed_count;
    let p1 = config.source.p1;
    let total = config.params.total_slots();
    let mut a = Analytics::default();
    // Number of independently attacked tamper-bit sets.
    let arms = match config.placement {
        EvePlacement::BothArms => 2,
        _ => 1,
    };
    let single_arm = arms == 1;
    let (attacks_alice, attacks_bob) = match config.placement {
        EvePlacement::AliceArm => (true, false),
        EvePlacement::BobArm => (false, true),
        EvePlacement::BothArms => (true, true),
    };

    match config.strategy.kind {
        StrategyKind::Passive => {
            a.detection = Some(0.0);
            a.evasion = Some(1.0);
            a.forgery = Some(analysis::forgery_prob(m));
            a.authenticated = Some(1.0);
            a.honest = Some(1.0);
            a.alice_errors = Some(0.0);
            a.bob_errors = Some(0.0);
            a.key_agreement = Some(1.0);
            a.mean_restarts = Some(0.0);
            a.mean_known = Some(0.0);
            a.full_knowledge = Some(0.0);
            a.mean_guessed = Some(f64::from(m));
        }
        StrategyKind::OracleLocations => {
            a.detection = Some(0.0);
            a.evasion = Some(1.0);
            a.forgery = Some(1.0);
            a.authenticated = Some(1.0);
            a.honest = Some(1.0);
            a.alice_errors = Some(0.0);
            a.bob_errors = Some(0.0);
            a.key_agreement = Some(1.0);
            a.mean_restarts = Some(0.0);
            a.mean_known = Some(f64::from(k));
            a.full_knowledge = Some(1.0);
            a.mean_guessed = Some(0.0);
        }
        StrategyKind::InterceptResendAll => {
            let evade = analysis::evade_prob(arms * d);
            a.detection = Some(1.0 - evade);
            a.evasion = Some(evade);
            a.alice_errors = Some(if attacks_alice { 0.25 } else { 0.0 });
            a.bob_errors = Some(if attacks_bob { 0.25 } else { 0.0 });
            if single_arm {
                // Per key slot: right basis (1/2) preserves the correlation,
                // wrong basis leaves a coin flip.
                a.key_agreement = Some(0.75);
                a.mean_known = Some(f64::from(k) / 2.0);
            }
        }
        StrategyKind::SubsetGuess { guesses } => {
            if single_arm {
                let touch = f64::from(guesses) / f64::from(total);
                a.alice_errors = Some(if attacks_alice { touch / 4.0 } else { 0.0 });
                a.bob_errors = Some(if attacks_bob { touch / 4.0 } else { 0.0 });
                a.key_agreement = Some(1.0 - touch / 4.0);
                // No closed form for final-round knowledge here: restarts
                // recondition the guessed subset, unlike the strategies whose
                // knowledge is independent of the tamper outcome.
                a.subset_cover_evade = Some(if guesses < k {
                    0.0
                } else {
                    analysis::subset_guess_success(k, d, guesses)
                        .expect("validated subset size")
                        .to_f64()
                });
            }
        }
        StrategyKind::PhotonNumberSplitting => {
            let evade = analysis::pns_evasion_exact(arms * d, p1).expect("validated p1");
            a.detection = Some(1.0 - evade);
            a.evasion = Some(evade);
            a.alice_errors = Some(if attacks_alice { p1 / 4.0 } else { 0.0 });
            a.bob_errors = Some(if attacks_bob { p1 / 4.0 } else { 0.0 });
            if single_arm {
                a.key_agreement = Some(1.0 - p1 / 4.0);
                a.mean_known = Some(f64::from(k) * (1.0 - p1 / 2.0));
            }
            a.pns_approx = Some(analysis::pns_evasion_point_approx(d, p1).expect("validated p1"));
        }
    }
    a
}

/// Execute the configured number of trials and aggregate the metrics.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    config.validate()?;
    let key_count = config.params.key_count;
    let tally = (0..config.trials)
        .into_par_iter()
        .map(|i| Tally::from_outcome(&run_trial(config, i), key_count))
        .reduce(Tally::default, Tally::add);
    Ok(build_report(config, tally))
}

fn build_report(config: &ExperimentConfig, tally: Tally) -> ExperimentReport {
    let a = analytics_for(config);
    let n = tally.trials;
    let mut metrics = vec![
        Metric::rate("authenticated_rate", tally.authenticated, n, a.authenticated),
        Metric::rate("honest_auth_rate", tally.honest_accepted, n, a.honest),
        Metric::rate("forgery_rate", tally.forged, n, a.forgery),
        Metric::rate("detection_rate", tally.detected, n, a.detection),
        Metric::rate("evasion_rate", n - tally.detected, n, a.evasion),
    ];
    if matches!(config.strategy.kind, StrategyKind::SubsetGuess { .. }) {
        metrics.push(Metric::rate(
            "subset_cover_evade_rate",
            tally.covered_undetected,
            n,
            a.subset_cover_evade,
        ));
    }
    if let Some(approx) = a.pns_approx {
        metrics.push(Metric::analytic_only("pns_evasion_point_approx", approx));
    }
    metrics.extend([
        Metric::rate("alice_tamper_error_rate", tally.alice_errors, tally.tamper_checked, a.alice_errors),
        Metric::rate("bob_tamper_error_rate", tally.bob_errors, tally.tamper_checked, a.bob_errors),
        Metric::rate("key_agreement_rate", tally.key_agreements, tally.key_slots, a.key_agreement),
        Metric::rate("full_key_knowledge_rate", tally.full_knowledge, n, a.full_knowledge),
        Metric::rate("restart_limit_rate", tally.restart_exhausted, n, None),
        Metric::mean("mean_restarts", tally.restarts_sum, n, a.mean_restarts),
        Metric::mean("mean_eve_key_bits_known", tally.eve_known_sum, n, a.mean_known),
        Metric::mean("mean_forged_bits_guessed", tally.guessed_sum, n, a.mean_guessed),
    ]);
    ExperimentReport {
        config: ConfigEcho::from_config(config),
        sweep: None,
        metrics,
    }
}

/// Parameters accepted by [`sweep`].
pub const SWEEPABLE: [&str; 5] = ["g", "d", "k", "p1", "target_d"];

fn as_count(param: &str, value: f64) -> Result<u32, ConfigError> {
    if value < 0.0 || value.fract() != 0.0 || value > f64::from(u32::MAX) {
        return Err(ConfigError::new(
            "values",
            format!("sweep value {value} is not a valid count for `{param}`"),
        ));
    }
    Ok(value as u32)
}

fn apply_sweep_value(
    config: &mut ExperimentConfig,
    param: &str,
    value: f64,
) -> Result<(), ConfigError> {
    match param {
        "g" => {
            config.strategy.kind = StrategyKind::SubsetGuess { guesses: as_count(param, value)? };
        }
        "d" => config.params.tamper_count = as_count(param, value)?,
        "k" => {
            let k = as_count(param, value)?;
            config.params.key_count = k;
            config.params.disclosed_count = config.params.disclosed_count.min(k).max(1);
        }
        "p1" => {
            config.source.p1 = value;
            if config.source.max_photons < 2 {
                config.source.max_photons = 2;
            }
        }
        "target_d" | "D" => {
            let (k, d) = analysis::size_parameters(value)
                .map_err(|e| ConfigError::new("values", e.to_string()))?;
            config.params.security_target = value;
            config.params.key_count = k;
            config.params.tamper_count = d;
            config.params.disclosed_count = k;
        }
        _ => {
            return Err(ConfigError::new(
                "vary",
                format!("unknown sweep parameter `{param}`; expected one of {SWEEPABLE:?}"),
            ))
        }
    }
    Ok(())
}

/// Run one experiment per value of the swept parameter. Every cell keeps the
/// base master seed, so cells differ only in the swept parameter.
pub fn sweep(
    base: &ExperimentConfig,
    param: &str,
    values: &[f64],
) -> Result<Vec<ExperimentReport>, ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::new("values", "sweep needs at least one value"));
    }
    values
        .iter()
        .map(|&value| {
            let mut config = base.clone();
            apply_sweep_value(&mut config, param, value)?;
            let mut report = run_experiment(&config)?;
            report.sweep = Some(SweepPoint { param: param.to_string(), value });
            Ok(report)
        })
        .collect()
}

/// One row of the sizing table.
#[derive(Debug, Clone, Serialize)]
pub struct SizeRow {
    pub target_d: f64,
    pub k: u32,
    pub d: u32,
    pub d_over_k: f64,
    pub forgery_prob: f64,
    pub evade_prob: f64,
}

/// Sizing table for a list of target probabilities.
#[derive(Debug, Clone, Serialize)]
pub struct SizeReport {
    /// The exact balance ratio `ln 2 / -ln 0.75`.
    pub balance_ratio: f64,
    /// The same ratio rounded to two decimals for display.
    pub balance_ratio_rounded: String,
    pub rows: Vec<SizeRow>,
}

pub const DEFAULT_SIZE_TARGETS: [f64; 4] = [1e-3, 1e-6, 1e-9, 7.62939453125e-6];

pub fn size_table(targets: &[f64]) -> Result<SizeReport, ConfigError> {
    let rows = targets
        .iter()
        .map(|&target| {
            let (k, d) = analysis::size_parameters(target)
                .map_err(|e| ConfigError::new("target_d", e.to_string()))?;
            Ok(SizeRow {
                target_d: target,
                k,
                d,
                d_over_k: f64::from(d) / f64::from(k),
                forgery_prob: analysis::forgery_prob(k),
                evade_prob: analysis::evade_prob(d),
            })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    Ok(SizeReport {
        balance_ratio: analysis::balance_ratio(),
        balance_ratio_rounded: format!("{:.2}", analysis::balance_ratio()),
        rows,
    })
}

impl SizeReport {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("size report serializes");
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# d/k balance ratio = {} ({})\n",
            self.balance_ratio_rounded, self.balance_ratio
        );
        out.push_str("target_d,k,d,d_over_k,forgery_prob,evade_prob\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.target_d, row.k, row.d, row.d_over_k, row.forgery_prob, row.evade_prob
            ));
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }
}
