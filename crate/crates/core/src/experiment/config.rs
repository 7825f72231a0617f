use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{gen_adversarial_flips, ChannelEnvironment};
use crate::error::{Error, Result};
use crate::flsim::FlParams;
use crate::matching::MatchingParams;
use crate::policy::{AoiAware, GlrCucb, MExp3, OracleScheduler, RandomScheduler, Scheduler};
use crate::rng::{stream, Stream};

/// A complete experiment: environments x policies x seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Skip the learning task and record channel-level regret only.
    #[serde(default)]
    pub bandit_only: bool,
    /// Number of clients `M`.
    pub clients: usize,
    pub environments: Vec<EnvSpec>,
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub matching: MatchingParams,
    #[serde(default)]
    pub fl: FlParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Stationary,
    Piecewise,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub label: String,
    pub kind: EnvKind,
    pub channels: usize,
    pub horizon: usize,
    /// Rounds at which a new segment starts (piecewise only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakpoints: Vec<usize>,
    /// One row per segment; a single row for stationary channels.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub means: Vec<Vec<f64>>,
    /// Adversarial: per-round flip probability of a generated state sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flip_probability: Option<f64>,
    /// Adversarial: state matrix file (channels x rounds of 0/1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    Oracle,
    Random,
    Mexp3,
    GlrCucb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaKeyword {
    Auto,
}

/// GLR-CUCB exploration rate: `"auto"` for `0.05 sqrt(ln T / T)` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Keyword(AlphaKeyword),
    Value(f64),
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha::Keyword(AlphaKeyword::Auto)
    }
}

impl Alpha {
    pub fn resolve(self, horizon: usize) -> f64 {
        match self {
            Alpha::Keyword(AlphaKeyword::Auto) => GlrCucb::default_alpha(horizon),
            Alpha::Value(a) => a,
        }
    }
}

fn default_gamma() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    0.001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: PolicyName,
    #[serde(default)]
    pub aoi_aware: bool,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub alpha: Alpha,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Overrides the experiment-wide matching settings for this policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchingParams>,
}

impl PolicySpec {
    pub fn new(name: PolicyName) -> Self {
        Self {
            name,
            aoi_aware: false,
            gamma: default_gamma(),
            alpha: Alpha::default(),
            delta: default_delta(),
            label: None,
            matching: None,
        }
    }

    pub fn aware(mut self) -> Self {
        self.aoi_aware = true;
        self
    }

    pub fn with_matching(mut self, matching: MatchingParams) -> Self {
        self.matching = Some(matching);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Label used in file names and summaries.
    pub fn display_name(&self) -> String {
        if let Some(label) = &self.label {
            return label.clone();
        }
        let base = match self.name {
            PolicyName::Oracle => "oracle",
            PolicyName::Random => "random",
            PolicyName::Mexp3 => "mexp3",
            PolicyName::GlrCucb => "glr-cucb",
        };
        if self.aoi_aware {
            format!("aa-{base}")
        } else {
            base.to_string()
        }
    }

    /// Instantiates the scheduler for `env` and `clients`.
    pub fn build<'a>(
        &self,
        env: &'a ChannelEnvironment,
        horizon: usize,
        clients: usize,
    ) -> Result<Box<dyn Scheduler + 'a>> {
        let n = crate::env::ChannelProcess::n_channels(env);
        let base: Box<dyn Scheduler + 'a> = match self.name {
            PolicyName::Oracle => Box::new(OracleScheduler::new(env, clients)?),
            PolicyName::Random => Box::new(RandomScheduler::new(n, clients)?),
            PolicyName::Mexp3 => Box::new(MExp3::new(n, clients, self.gamma)?),
            PolicyName::GlrCucb => Box::new(GlrCucb::new(
                n,
                clients,
                self.alpha.resolve(horizon),
                self.delta,
            )?),
        };
        Ok(if self.aoi_aware {
            Box::new(AoiAware::new(base))
        } else {
            base
        })
    }
}

impl EnvSpec {
    /// Builds the channel environment; generated adversarial sequences are
    /// seeded from the run seed.
    pub fn build(&self, seed: u64, base_dir: &Path) -> Result<ChannelEnvironment> {
        match self.kind {
            EnvKind::Stationary => {
                let means = self.means.first().cloned().unwrap_or_default();
                ChannelEnvironment::stationary(means, self.horizon)
            }
            EnvKind::Piecewise => ChannelEnvironment::piecewise(
                self.channels,
                self.horizon,
                &self.breakpoints,
                self.means.clone(),
            ),
            EnvKind::Adversarial => {
                let matrix = match (&self.csv, self.flip_probability) {
                    (Some(path), _) => {
                        ChannelEnvironment::load_state_matrix_csv(&base_dir.join(path))?
                    }
                    (None, Some(p)) => {
                        let adv_seed = rand::RngCore::next_u64(&mut stream(seed, Stream::Adversary));
                        gen_adversarial_flips(self.channels, self.horizon, p, adv_seed)?
                    }
                    (None, None) => {
                        return Err(Error::config(
                            self.field("csv"),
                            "adversarial environments need `csv` or `flip_probability`",
                        ))
                    }
                };
                ChannelEnvironment::adversarial(matrix)
            }
        }
    }

    fn field(&self, name: &str) -> String {
        format!("environments[{}].{name}", self.label)
    }

    fn validate(&self, clients: usize) -> Result<()> {
        if self.label.is_empty() {
            return Err(Error::config("environments.label", "must not be empty"));
        }
        if self.channels < clients || clients == 0 {
            return Err(Error::config(
                self.field("channels"),
                format!("need N >= M >= 1, got N = {}, M = {clients}", self.channels),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::config(self.field("horizon"), "must be at least 1"));
        }
        for row in &self.means {
            if row.len() != self.channels {
                return Err(Error::config(
                    self.field("means"),
                    format!("row of length {} for {} channels", row.len(), self.channels),
                ));
            }
            if let Some(mu) = row.iter().find(|mu| !(0.0..=1.0).contains(*mu)) {
                return Err(Error::config(self.field("means"), format!("{mu} not in [0, 1]")));
            }
        }
        match self.kind {
            EnvKind::Stationary if self.means.len() != 1 => Err(Error::config(
                self.field("means"),
                "stationary environments take exactly one row",
            )),
            EnvKind::Stationary if !self.breakpoints.is_empty() => Err(Error::config(
                self.field("breakpoints"),
                "stationary environments have no breakpoints",
            )),
            EnvKind::Piecewise if self.means.len() != self.breakpoints.len() + 1 => {
                Err(Error::config(
                    self.field("means"),
                    format!(
                        "{} breakpoints need {} rows, got {}",
                        self.breakpoints.len(),
                        self.breakpoints.len() + 1,
                        self.means.len()
                    ),
                ))
            }
            EnvKind::Piecewise
                if self.breakpoints.windows(2).any(|w| w[0] >= w[1])
                    || self.breakpoints.iter().any(|&b| b <= 1 || b > self.horizon) =>
            {
                Err(Error::config(
                    self.field("breakpoints"),
                    "must be strictly increasing within (1, horizon]",
                ))
            }
            EnvKind::Adversarial => match self.flip_probability {
                Some(p) if !(0.0..=1.0).contains(&p) => Err(Error::config(
                    self.field("flip_probability"),
                    format!("{p} not in [0, 1]"),
                )),
                None if self.csv.is_none() => Err(Error::config(
                    self.field("csv"),
                    "adversarial environments need `csv` or `flip_probability`",
                )),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Serialised form with every default spelled out.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.clients == 0 {
            return Err(Error::config("clients", "need at least one client"));
        }
        if self.environments.is_empty() {
            return Err(Error::config("environments", "need at least one environment"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("policies", "need at least one policy"));
        }
        let mut labels = HashSet::new();
        for env in &self.environments {
            env.validate(self.clients)?;
            if !labels.insert(env.label.as_str()) {
                return Err(Error::config(env.field("label"), "duplicate label"));
            }
            if !self.bandit_only && env.horizon < self.fl.rounds {
                return Err(Error::config(
                    env.field("horizon"),
                    format!("shorter than fl.rounds = {}", self.fl.rounds),
                ));
            }
        }
        let mut names = HashSet::new();
        for p in &self.policies {
            let field = |f: &str| format!("policies[{}].{f}", p.display_name());
            if !(p.gamma > 0.0 && p.gamma <= 1.0) {
                return Err(Error::config(field("gamma"), format!("{} not in (0, 1]", p.gamma)));
            }
            if let Alpha::Value(a) = p.alpha {
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(Error::config(field("alpha"), format!("{a} must be >= 0")));
                }
            }
            if !(p.delta > 0.0 && p.delta < 1.0) {
                return Err(Error::config(field("delta"), format!("{} not in (0, 1)", p.delta)));
            }
            if p.aoi_aware && !matches!(p.name, PolicyName::Mexp3 | PolicyName::GlrCucb) {
                return Err(Error::config(
                    field("aoi_aware"),
                    "only mexp3 and glr-cucb have AoI-aware variants",
                ));
            }
            let matching = p.matching.unwrap_or(self.matching);
            if !(0.0..=1.0).contains(&matching.beta) {
                return Err(Error::config(
                    field("matching.beta"),
                    format!("{} not in [0, 1]", matching.beta),
                ));
            }
            let name = p.display_name();
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(Error::config(field("label"), "must be a plain file-name fragment"));
            }
            if !names.insert(name) {
                return Err(Error::config(field("label"), "duplicate policy label"));
            }
        }
        if !(0.0..=1.0).contains(&self.matching.beta) {
            return Err(Error::config("matching.beta", format!("{} not in [0, 1]", self.matching.beta)));
        }
        if !self.bandit_only {
            self.fl.validate()?;
        }
        Ok(())
    }
}
