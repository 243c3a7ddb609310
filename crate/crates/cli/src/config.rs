//! Run configuration files.
//!
//! ```toml
//! [system]
//! topology = "ring"
//! family = "Heisenberg"
//! J = -1.0
//! n_S = 4
//! initial_state = "UD"
//!
//! [environment]
//! topology = "spin_glass"
//! family = "HeisenbergType"
//! Omega = 1.0
//! n = 14
//! initial_state = "RANDOM"
//!
//! [interaction]
//! family = "HeisenbergType"
//! Delta = 0.3
//!
//! [run]
//! n_steps = 300
//! seed = 7
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spinbath::model::{assemble, Part};
use spinbath::observables::{DEFAULT_FLOOR, SYSTEM_MAX_SPINS};
use spinbath::propagate::{BoundsMethod, DEFAULT_TAU, DEFAULT_TRUNCATION_TOL};
use spinbath::states::{StateLabel, Target};
use spinbath::{CouplingFamily, FamilyKind, HamiltonianSpec, RngStreams, StateKind, TopologyKind};

use crate::error::CliError;

pub const DEFAULT_MAX_SPINS: usize = 24;
pub const DEFAULT_CHECKPOINT_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub topology: TopologyKind,
    pub family: FamilyKind,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "n_S")]
    pub n_s: usize,
    pub initial_state: StateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub topology: TopologyKind,
    pub family: FamilyKind,
    #[serde(rename = "Omega")]
    pub omega: f64,
    pub n: usize,
    pub initial_state: StateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub family: FamilyKind,
    #[serde(rename = "Delta")]
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "delta")]
    Delta,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "S_quad")]
    SQuad,
    #[serde(rename = "echo")]
    Echo,
    #[serde(rename = "E_S")]
    EnergyS,
    #[serde(rename = "rho")]
    Rho,
    /// Correlators, concurrence and singlet/triplet coherence of a two-spin system.
    #[serde(rename = "pair")]
    Pair,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Sigma,
        Metric::Gamma,
        Metric::Delta,
        Metric::B,
        Metric::SQuad,
        Metric::Echo,
        Metric::EnergyS,
        Metric::Rho,
        Metric::Pair,
    ];
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_seed() -> u64 {
    1
}
fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}
fn default_floor() -> f64 {
    DEFAULT_FLOOR
}
fn default_truncation_tol() -> f64 {
    DEFAULT_TRUNCATION_TOL
}
fn default_max_spins() -> usize {
    DEFAULT_MAX_SPINS
}
fn default_checkpoint_every() -> usize {
    DEFAULT_CHECKPOINT_EVERY
}
fn default_ldos_window() -> f64 {
    spinbath::ldos::DEFAULT_WINDOW_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub n_steps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub ldos: bool,
    #[serde(default)]
    pub fit: bool,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_truncation_tol")]
    pub truncation_tol: f64,
    #[serde(default)]
    pub bounds: BoundsMethod,
    #[serde(default = "default_max_spins")]
    pub max_spins: usize,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    /// LDOS window width as a fraction of the spectral range.
    #[serde(default = "default_ldos_window")]
    pub ldos_window: f64,
    /// Start of the relaxation fits of `b` and `E_S`; by default the first
    /// time at which `sigma` has fallen below half its initial value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_start: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub environment: EnvironmentConfig,
    pub interaction: InteractionConfig,
    pub run: RunSection,
}

impl RunConfig {
    /// Parses and validates a configuration file's text.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(text, s.start));
            CliError::Config {
                message: e.message().trim().to_string(),
                line,
            }
        })?;
        cfg.validate().map_err(|(key, message)| CliError::Config {
            message,
            line: locate_key(text, key),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            message: format!("cannot read {}: {e}", path.display()),
            line: None,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn n_total(&self) -> usize {
        self.system.n_s + self.environment.n
    }

    /// Checks the physical and numerical invariants; errors carry the
    /// offending key as `section.key`.
    fn validate(&self) -> Result<(), (&'static str, String)> {
        let s = &self.system;
        let e = &self.environment;
        let r = &self.run;
        if s.n_s == 0 || s.n_s > SYSTEM_MAX_SPINS {
            return Err((
                "system.n_S",
                format!("n_S must be in 1..={SYSTEM_MAX_SPINS}, got {}", s.n_s),
            ));
        }
        if !s.j.is_finite() {
            return Err(("system.J", "J must be finite".into()));
        }
        if !e.omega.is_finite() {
            return Err(("environment.Omega", "Omega must be finite".into()));
        }
        if !self.interaction.delta.is_finite() {
            return Err(("interaction.Delta", "Delta must be finite".into()));
        }
        for (key, kind, eps) in [
            ("system.epsilon", s.initial_state, s.epsilon),
            ("environment.epsilon", e.initial_state, e.epsilon),
        ] {
            if let Some(eps) = eps {
                if kind.default_epsilon().is_none() {
                    return Err((key, format!("epsilon has no meaning for {kind}")));
                }
                if !(eps > 0.0 && eps < 1.0) {
                    return Err((key, format!("epsilon must be in (0, 1), got {eps}")));
                }
            }
        }
        if !(r.tau > 0.0 && r.tau.is_finite()) {
            return Err(("run.tau", format!("tau must be positive, got {}", r.tau)));
        }
        if !(r.floor > 0.0 && r.floor < 1.0) {
            return Err((
                "run.floor",
                format!("floor must be in (0, 1), got {}", r.floor),
            ));
        }
        if !(r.truncation_tol > 0.0 && r.truncation_tol < 1e-3) {
            return Err((
                "run.truncation_tol",
                format!(
                    "truncation_tol must be in (0, 1e-3), got {}",
                    r.truncation_tol
                ),
            ));
        }
        if !(r.ldos_window > 0.0 && r.ldos_window <= 0.5) {
            return Err((
                "run.ldos_window",
                format!("ldos_window must be in (0, 0.5], got {}", r.ldos_window),
            ));
        }
        if r.checkpoint_every == 0 {
            return Err((
                "run.checkpoint_every",
                "checkpoint_every must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn system_label(&self) -> StateLabel {
        let label = StateLabel::new(self.system.initial_state, Target::System);
        match self.system.epsilon {
            Some(eps) => label.with_epsilon(eps),
            None => label,
        }
    }

    pub fn environment_label(&self) -> StateLabel {
        let label = StateLabel::new(self.environment.initial_state, Target::Environment);
        match self.environment.epsilon {
            Some(eps) => label.with_epsilon(eps),
            None => label,
        }
    }

    /// Coupling tables drawn with `seed`.
    pub fn build_spec(&self, seed: u64) -> Result<HamiltonianSpec, CliError> {
        let streams = RngStreams::new(seed);
        assemble(
            Part {
                topology: self.system.topology,
                n: self.system.n_s,
                family: CouplingFamily::new(self.system.family, self.system.j),
            },
            Part {
                topology: self.environment.topology,
                n: self.environment.n,
                family: CouplingFamily::new(self.environment.family, self.environment.omega),
            },
            CouplingFamily::new(self.interaction.family, self.interaction.delta),
            &streams,
        )
        .map_err(|e| CliError::Config {
            message: e.to_string(),
            line: None,
        })
    }

    pub fn wants(&self, metric: Metric) -> bool {
        self.run.metrics.contains(&metric)
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `section.key` in `text`, if it is written there.
fn locate_key(text: &str, path: &str) -> Option<usize> {
    let (section, key) = path.split_once('.')?;
    let mut current = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim().trim_matches('"') == key {
                    return Some(k + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const RING_CANONICAL_SMALL: &str = r#"
[system]
topology = "ring"
family = "Heisenberg"
J = -1.0
n_S = 4
initial_state = "UD"

[environment]
topology = "spin_glass"
family = "HeisenbergType"
Omega = 1.0
n = 8
initial_state = "RANDOM"

[interaction]
family = "HeisenbergType"
Delta = 0.3

[run]
n_steps = 20
seed = 3
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::parse(RING_CANONICAL_SMALL).unwrap();
        assert_eq!(cfg.n_total(), 12);
        assert_eq!(cfg.run.tau, DEFAULT_TAU);
        assert_eq!(cfg.run.metrics, Metric::ALL.to_vec());
        assert_eq!(cfg.run.max_spins, 24);
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = RING_CANONICAL_SMALL.replace("Delta = 0.3", "Delta = 0.3\nDleta = 0.3");
        match RunConfig::parse(&text) {
            Err(CliError::Config {
                line: Some(line),
                message,
            }) => {
                assert_eq!(
                    text.lines().nth(line - 1).unwrap().trim(),
                    "Dleta = 0.3",
                    "{message}"
                );
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_value_reports_its_line() {
        let text = RING_CANONICAL_SMALL.replace("n_steps = 20", "n_steps = 20\ntau = -1.0");
        match RunConfig::parse(&text) {
            Err(CliError::Config {
                line: Some(line), ..
            }) => {
                assert_eq!(text.lines().nth(line - 1).unwrap().trim(), "tau = -1.0");
            }
            other => panic!("expected config error, got {other:?}"),
        }
        let text = RING_CANONICAL_SMALL.replace("n_steps = 20", "n_steps = 0");
        assert_eq!(RunConfig::parse(&text).unwrap().run.n_steps, 0);
    }

    #[test]
    fn bad_enum_names_are_rejected() {
        let text = RING_CANONICAL_SMALL.replace("\"spin_glass\"", "\"spinglass\"");
        let want = text.lines().position(|l| l.contains("spinglass")).unwrap() + 1;
        match RunConfig::parse(&text) {
            Err(CliError::Config {
                line: Some(line), ..
            }) => assert_eq!(line, want),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_same_spec() {
        let cfg = RunConfig::parse(RING_CANONICAL_SMALL).unwrap();
        assert_eq!(cfg.build_spec(5).unwrap(), cfg.build_spec(5).unwrap());
        assert_ne!(cfg.build_spec(5).unwrap(), cfg.build_spec(6).unwrap());
    }
}
