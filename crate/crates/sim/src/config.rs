//! Experiment configuration: defaults, flat config files, and overrides.
//!
//! A config file is a plain text document of `key = value` lines (`#` starts
//! a comment). Keys mirror the CLI flags; flags override file values. The
//! recognized keys are:
//!
//! ```text
//! trials, master_seed, strategy, g, knows_plaintext, placement,
//! k, d, m, key_basis, error_threshold, target_d, max_restarts,
//! p1, max_photons, output_format
//! ```

use entauth_core::adversary::{AdversaryStrategy, StrategyKind};
use entauth_core::protocol::{EvePlacement, ProtocolParams};
use entauth_core::qchannel::{Basis, PhotonSourceModel};

/// Report serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(value: &str) -> Option<Self> {
        match value {
            "json" => Some(OutputFormat::Json),
            "csv" => Some(OutputFormat::Csv),
            _ => None,
        }
    }
}

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ProtocolParams,
    pub strategy: AdversaryStrategy,
    pub placement: EvePlacement,
    pub source: PhotonSourceModel,
    pub trials: u64,
    pub master_seed: u64,
    pub output_format: OutputFormat,
    /// Whether `m` was configured explicitly; otherwise it tracks `k`
    /// (the whole key is disclosed).
    disclosed_explicit: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: ProtocolParams::default(),
            strategy: AdversaryStrategy::new(StrategyKind::Passive),
            placement: EvePlacement::AliceArm,
            source: PhotonSourceModel::ideal(),
            trials: 10_000,
            master_seed: 0,
            output_format: OutputFormat::Json,
            disclosed_explicit: false,
        }
    }
}

/// Configuration failure with the offending field named.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

pub fn parse_strategy_name(name: &str) -> Option<StrategyKind> {
    match name {
        "passive" => Some(StrategyKind::Passive),
        "intercept-resend" | "intercept-resend-all" => Some(StrategyKind::InterceptResendAll),
        // The subset size is supplied separately through `g`.
        "subset-guess" => Some(StrategyKind::SubsetGuess { guesses: 0 }),
        "pns" | "photon-number-splitting" => Some(StrategyKind::PhotonNumberSplitting),
        "oracle-locations" => Some(StrategyKind::OracleLocations),
        _ => None,
    }
}

pub fn strategy_name(kind: StrategyKind) -> &'static str {
    match kind {
        StrategyKind::Passive => "passive",
        StrategyKind::InterceptResendAll => "intercept-resend",
        StrategyKind::SubsetGuess { .. } => "subset-guess",
        StrategyKind::PhotonNumberSplitting => "photon-number-splitting",
        StrategyKind::OracleLocations => "oracle-locations",
    }
}

pub fn placement_name(placement: EvePlacement) -> &'static str {
    match placement {
        EvePlacement::AliceArm => "alice-arm",
        EvePlacement::BobArm => "bob-arm",
        EvePlacement::BothArms => "both-arms",
    }
}

fn parse_placement(value: &str) -> Option<EvePlacement> {
    match value {
        "alice-arm" => Some(EvePlacement::AliceArm),
        "bob-arm" => Some(EvePlacement::BobArm),
        "both-arms" => Some(EvePlacement::BothArms),
        _ => None,
    }
}

fn parse_basis(value: &str) -> Option<Basis> {
    match value {
        "rectilinear" => Some(Basis::Rectilinear),
        "diagonal" => Some(Basis::Diagonal),
        _ => None,
    }
}

pub fn basis_name(basis: Basis) -> &'static str {
    match basis {
        Basis::Rectilinear => "rectilinear",
        Basis::Diagonal => "diagonal",
    }
}

fn parse_num<T: core::str::FromStr>(field: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::new(field, format!("cannot parse `{value}`")))
}

fn parse_bool(field: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::new(field, format!("expected a boolean, got `{value}`"))),
    }
}

impl ExperimentConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "trials" => self.trials = parse_num(key, value)?,
            "master_seed" => self.master_seed = parse_num(key, value)?,
            "strategy" => {
                let kind = parse_strategy_name(value)
                    .ok_or_else(|| ConfigError::new(key, format!("unknown strategy `{value}`")))?;
                // Preserve a previously configured subset size.
                let kind = match (kind, self.strategy.kind) {
                    (StrategyKind::SubsetGuess { .. }, StrategyKind::SubsetGuess { guesses }) => {
                        StrategyKind::SubsetGuess { guesses }
                    }
                    (k, _) => k,
                };
                self.strategy.kind = kind;
            }
            "g" => {
                let guesses = parse_num(key, value)?;
                match self.strategy.kind {
                    StrategyKind::SubsetGuess { .. } => {
                        self.strategy.kind = StrategyKind::SubsetGuess { guesses };
                    }
                    _ => {
                        return Err(ConfigError::new(
                            key,
                            "subset size g applies only to the subset-guess strategy",
                        ))
                    }
                }
            }
            "knows_plaintext" => self.strategy.knows_plaintext = parse_bool(key, value)?,
            "placement" => {
                self.placement = parse_placement(value)
                    .ok_or_else(|| ConfigError::new(key, format!("unknown placement `{value}`")))?;
            }
            "k" => {
                self.params.key_count = parse_num(key, value)?;
                if !self.disclosed_explicit {
                    self.params.disclosed_count = self.params.key_count;
                }
            }
            "d" => self.params.tamper_count = parse_num(key, value)?,
            "m" => {
                self.params.disclosed_count = parse_num(key, value)?;
                self.disclosed_explicit = true;
            }
            "key_basis" => {
                self.params.key_basis = parse_basis(value)
                    .ok_or_else(|| ConfigError::new(key, format!("unknown basis `{value}`")))?;
            }
            "error_threshold" => self.params.error_threshold = parse_num(key, value)?,
            "target_d" => self.params.security_target = parse_num(key, value)?,
            "max_restarts" => self.params.max_restarts = parse_num(key, value)?,
            "p1" => self.source.p1 = parse_num(key, value)?,
            "max_photons" => self.source.max_photons = parse_num(key, value)?,
            "output_format" => {
                self.output_format = OutputFormat::parse(value)
                    .ok_or_else(|| ConfigError::new(key, format!("unknown format `{value}`")))?;
            }
            _ => return Err(ConfigError::new(key, "unknown config key")),
        }
        Ok(())
    }

    /// Apply a flat `key = value` config document.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::new(
                    "file",
                    format!("line {}: expected `key = value`, got `{raw}`", lineno + 1),
                ));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::new("trials", "must be at least 1"));
        }
        self.params
            .validate()
            .map_err(|e| ConfigError::new(param_error_field(&e), e.to_string()))?;
        self.source
            .validate()
            .map_err(|e| ConfigError::new("p1", e.to_string()))?;
        self.strategy
            .validate(&self.params)
            .map_err(|e| ConfigError::new("g", e.to_string()))?;
        Ok(())
    }
}

fn param_error_field(err: &entauth_core::protocol::ParamError) -> &'static str {
    use entauth_core::protocol::ParamError::*;
    match err {
        NoKeyBits => "k",
        BadDisclosedCount { .. } => "m",
        BadErrorThreshold => "error_threshold",
        BadSecurityTarget => "target_d",
    }
}
