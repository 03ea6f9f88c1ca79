//! Experiment reports: metrics with Wilson intervals, analytic pairings, and
//! frozen JSON/CSV renderings.
//!
//! JSON reports are `serde_json` pretty output of [`ExperimentReport`]; field
//! order is fixed by the struct definitions below. CSV reports start with
//! `# key = value` comment lines echoing the configuration, then a header and
//! one row per metric in the column order
//!
//! ```text
//! metric,kind,samples,successes,sum,empirical,wilson_low,wilson_high,analytic,z_score,mc_verifiable
//! ```
//!
//! (sweep files prepend `sweep_param,sweep_value`). Optional cells are left
//! empty. All aggregation is integer-based, so a report is byte-identical for
//! a given configuration and seed regardless of trial parallelism.

use serde::Serialize;

use crate::config::{
    basis_name, placement_name, strategy_name, ExperimentConfig, OutputFormat,
};
use entauth_core::adversary::StrategyKind;

/// Two-sided 95% normal quantile used by the Wilson score interval.
pub const Z95: f64 = 1.959963984540054;

/// Minimum expected successes and failures for a Monte Carlo estimate to be
/// considered checkable against its analytic value.
pub const MC_VERIFIABLE_MIN_EXPECTED: f64 = 10.0;

/// Wilson score interval for `successes` out of `n` Bernoulli samples.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    debug_assert!(n > 0);
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (center - half, center + half)
}

/// Standard score of an empirical rate against its analytic value; `None`
/// when the analytic rate is degenerate (0 or 1, where sigma vanishes).
pub fn z_score(successes: u64, n: u64, analytic: f64) -> Option<f64> {
    if n == 0 || analytic <= 0.0 || analytic >= 1.0 {
        return None;
    }
    let p = successes as f64 / n as f64;
    let sigma = (analytic * (1.0 - analytic) / n as f64).sqrt();
    Some((p - analytic) / sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Rate,
    Mean,
}

/// One aggregated quantity, optionally paired with its closed-form value.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Metric {
    pub name: &'static str,
    pub kind: MetricKind,
    pub samples: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub successes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_score: Option<f64>,
    /// Whether the trial count makes the analytic value checkable by this
    /// simulation (expected successes and failures both at least 10). Rare
    /// events stay reported analytically with this flag cleared.
    pub mc_verifiable: bool,
}

impl Metric {
    /// Bernoulli rate metric from a success counter.
    pub fn rate(name: &'static str, successes: u64, samples: u64, analytic: Option<f64>) -> Self {
        let empirical = (samples > 0).then(|| successes as f64 / samples as f64);
        let (wilson_low, wilson_high) = if samples > 0 {
            let (lo, hi) = wilson_interval(successes, samples, Z95);
            (Some(lo), Some(hi))
        } else {
            (None, None)
        };
        let z = analytic.and_then(|a| z_score(successes, samples, a));
        let mc_verifiable = analytic.is_some_and(|a| {
            let n = samples as f64;
            n * a >= MC_VERIFIABLE_MIN_EXPECTED && n * (1.0 - a) >= MC_VERIFIABLE_MIN_EXPECTED
        });
        Metric {
            name,
            kind: MetricKind::Rate,
            samples,
            successes: Some(successes),
            sum: None,
            empirical,
            wilson_low,
            wilson_high,
            analytic,
            z_score: z,
            mc_verifiable,
        }
    }

    /// Mean of an integer-valued per-trial quantity.
    pub fn mean(name: &'static str, sum: u64, samples: u64, analytic: Option<f64>) -> Self {
        Metric {
            name,
            kind: MetricKind::Mean,
            samples,
            successes: None,
            sum: Some(sum),
            empirical: (samples > 0).then(|| sum as f64 / samples as f64),
            wilson_low: None,
            wilson_high: None,
            analytic,
            z_score: None,
            mc_verifiable: false,
        }
    }

    /// Closed-form value reported without an empirical counterpart (rare-event
    /// regimes not reachable at the configured trial count).
    pub fn analytic_only(name: &'static str, analytic: f64) -> Self {
        Metric {
            name,
            kind: MetricKind::Rate,
            samples: 0,
            successes: None,
            sum: None,
            empirical: None,
            wilson_low: None,
            wilson_high: None,
            analytic: Some(analytic),
            z_score: None,
            mc_verifiable: false,
        }
    }
}

/// Flat snapshot of the configuration embedded in every report.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConfigEcho {
    pub k: u32,
    pub d: u32,
    pub m: u32,
    pub key_basis: &'static str,
    pub error_threshold: f64,
    pub target_d: f64,
    pub max_restarts: u32,
    pub strategy: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<u32>,
    pub knows_plaintext: bool,
    pub placement: &'static str,
    pub p1: f64,
    pub max_photons: u32,
    pub trials: u64,
    pub master_seed: u64,
}

impl ConfigEcho {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        ConfigEcho {
            k: config.params.key_count,
            d: config.params.tamper_count,
            m: config.params.disclosed_count,
            key_basis: basis_name(config.params.key_basis),
            error_threshold: config.params.error_threshold,
            target_d: config.params.security_target,
            max_restarts: config.params.max_restarts,
            strategy: strategy_name(config.strategy.kind),
            g: match config.strategy.kind {
                StrategyKind::SubsetGuess { guesses } => Some(guesses),
                _ => None,
            },
            knows_plaintext: config.strategy.knows_plaintext,
            placement: placement_name(config.placement),
            p1: config.source.p1,
            max_photons: config.source.max_photons,
            trials: config.trials,
            master_seed: config.master_seed,
        }
    }

    fn comment_lines(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# k = {}\n", self.k));
        out.push_str(&format!("# d = {}\n", self.d));
        out.push_str(&format!("# m = {}\n", self.m));
        out.push_str(&format!("# key_basis = {}\n", self.key_basis));
        out.push_str(&format!("# error_threshold = {}\n", self.error_threshold));
        out.push_str(&format!("# target_d = {}\n", self.target_d));
        out.push_str(&format!("# max_restarts = {}\n", self.max_restarts));
        out.push_str(&format!("# strategy = {}\n", self.strategy));
        if let Some(g) = self.g {
            out.push_str(&format!("# g = {g}\n"));
        }
        out.push_str(&format!("# knows_plaintext = {}\n", self.knows_plaintext));
        out.push_str(&format!("# placement = {}\n", self.placement));
        out.push_str(&format!("# p1 = {}\n", self.p1));
        out.push_str(&format!("# max_photons = {}\n", self.max_photons));
        out.push_str(&format!("# trials = {}\n", self.trials));
        out.push_str(&format!("# master_seed = {}\n", self.master_seed));
        out
    }
}

/// Identifies one cell of a parameter sweep.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SweepPoint {
    pub param: String,
    pub value: f64,
}

/// Aggregated result of one experiment.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ExperimentReport {
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepPoint>,
    pub metrics: Vec<Metric>,
}

pub const CSV_HEADER: &str =
    "metric,kind,samples,successes,sum,empirical,wilson_low,wilson_high,analytic,z_score,mc_verifiable";

fn opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl ExperimentReport {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.config.comment_lines();
        if let Some(sweep) = &self.sweep {
            out.push_str(&format!("sweep_param,sweep_value,{CSV_HEADER}\n"));
            for m in &self.metrics {
                out.push_str(&format!("{},{},{}\n", sweep.param, sweep.value, metric_csv(m)));
            }
        } else {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for m in &self.metrics {
                out.push_str(&metric_csv(m));
                out.push('\n');
            }
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

fn metric_csv(m: &Metric) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        m.name,
        match m.kind {
            MetricKind::Rate => "rate",
            MetricKind::Mean => "mean",
        },
        m.samples,
        opt_u64(m.successes),
        opt_u64(m.sum),
        opt_f64(m.empirical),
        opt_f64(m.wilson_low),
        opt_f64(m.wilson_high),
        opt_f64(m.analytic),
        opt_f64(m.z_score),
        m.mc_verifiable,
    )
}

/// Render a sweep as one JSON array or one CSV table.
pub fn render_sweep(reports: &[ExperimentReport], format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut out =
                serde_json::to_string_pretty(reports).expect("reports serialize");
            out.push('\n');
            out
        }
        OutputFormat::Csv => {
            let mut out = String::new();
            if let Some(first) = reports.first() {
                out.push_str(&first.config.comment_lines());
            }
            out.push_str(&format!("sweep_param,sweep_value,{CSV_HEADER}\n"));
            for report in reports {
                let sweep = report.sweep.as_ref().expect("sweep reports carry their point");
                for m in &report.metrics {
                    out.push_str(&format!(
                        "{},{},{}\n",
                        sweep.param,
                        sweep.value,
                        metric_csv(m)
                    ));
                }
            }
            out
        }
    }
}
