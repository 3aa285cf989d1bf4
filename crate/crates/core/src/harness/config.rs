use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::eval::divisor_at_most;
use crate::filter::FilterTag;
use crate::problem::{SpectralProblem, DEFAULT_DIM};
use crate::train::Regime;

/// How the number of partitions is chosen for each sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MRule {
    Fixed(usize),
    /// `m = floor(N^beta)`.
    Power(f64),
}

impl MRule {
    /// Requested `m`, decremented until it divides `n_total`.
    pub fn resolve(&self, n_total: usize) -> usize {
        let requested = match *self {
            MRule::Fixed(m) => m,
            // small guard so that exact powers are not lost to round-off
            MRule::Power(beta) => ((n_total as f64).powf(beta) * (1.0 + 1e-12)).floor() as usize,
        };
        divisor_at_most(n_total, requested)
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            MRule::Power(b) => Some(b),
            MRule::Fixed(_) => None,
        }
    }
}

impl FromStr for MRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(b) = s.strip_prefix("pow:") {
            let beta: f64 = b.parse().map_err(|_| invalid(format!("bad exponent in m rule `{s}`")))?;
            if !(0.0..1.0).contains(&beta) {
                return Err(invalid(format!("m rule exponent must lie in [0, 1), got {beta}")));
            }
            return Ok(MRule::Power(beta));
        }
        let m: usize = s.parse().map_err(|_| invalid(format!("m rule must be an integer or `pow:beta`, got `{s}`")))?;
        if m == 0 {
            return Err(invalid("fixed m must be at least 1"));
        }
        Ok(MRule::Fixed(m))
    }
}

impl fmt::Display for MRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MRule::Fixed(m) => write!(f, "{m}"),
            MRule::Power(b) => write!(f, "pow:{b}"),
        }
    }
}

impl Serialize for MRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MRule::Fixed(m) => s.serialize_u64(*m as u64),
            MRule::Power(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for MRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Int(m) => m.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmTag {
    Sgm,
    Sa,
}

impl AlgorithmTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmTag::Sgm => "sgm",
            AlgorithmTag::Sa => "sa",
        }
    }
}

fn default_dim() -> usize {
    DEFAULT_DIM
}
fn one_f() -> f64 {
    1.0
}
fn one_u() -> usize {
    1
}
fn default_m_rule() -> MRule {
    MRule::Fixed(1)
}
fn default_filter() -> String {
    "tikhonov".into()
}
fn default_n_data() -> usize {
    100
}
fn default_n_index() -> usize {
    50
}
fn default_n_test() -> usize {
    10_000
}

/// One experiment, read from a flat JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub gamma: f64,
    pub zeta: f64,
    #[serde(default = "one_f")]
    pub source_norm: f64,
    pub noise_sd: f64,
    /// Inferred from the regime when absent.
    #[serde(default)]
    pub algorithm: Option<AlgorithmTag>,
    pub regime: String,
    #[serde(default = "default_filter")]
    pub filter: String,
    /// Multiplies step sizes and `lambda`.
    #[serde(default = "one_f")]
    pub scale: f64,
    #[serde(default = "one_f")]
    pub batch_scale: f64,
    #[serde(default = "one_f")]
    pub iter_scale: f64,
    pub n_list: Vec<usize>,
    #[serde(default = "default_m_rule")]
    pub m_rule: MRule,
    #[serde(default = "one_u")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub theory_compliant: bool,
    /// Overrides of the planned SGM parameters.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub step_size: Option<f64>,
    /// Train with a Gaussian kernel of this bandwidth; risks are then
    /// estimated by Monte Carlo.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_n_data")]
    pub decomp_n_data: usize,
    #[serde(default = "default_n_index")]
    pub decomp_n_index: usize,
    /// Smallest sample sizes dropped from the rate fit.
    #[serde(default)]
    pub burn_in: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn regime(&self) -> Result<Regime> {
        self.regime.parse()
    }

    pub fn filter_tag(&self) -> Result<FilterTag> {
        self.filter.parse()
    }

    pub fn algorithm(&self) -> Result<AlgorithmTag> {
        let implied = if self.regime()?.is_spectral() { AlgorithmTag::Sa } else { AlgorithmTag::Sgm };
        match self.algorithm {
            Some(a) if a != implied => {
                Err(invalid(format!("algorithm `{}` does not match regime `{}`", a.as_str(), self.regime)))
            }
            _ => Ok(implied),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.regime()?;
        self.filter_tag()?;
        self.algorithm()?;
        if self.n_list.is_empty() {
            return Err(invalid("n_list must not be empty"));
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_list must be positive and strictly increasing"));
        }
        if self.replications == 0 || self.decomp_n_data == 0 || self.decomp_n_index == 0 {
            return Err(invalid("replication counts must be at least 1"));
        }
        for (name, v) in [("scale", self.scale), ("batch_scale", self.batch_scale), ("iter_scale", self.iter_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid(format!("bandwidth must be positive, got {h}")));
            }
        }
        self.problem().map(|_| ())
    }

    pub fn problem(&self) -> Result<SpectralProblem> {
        SpectralProblem::build(self.dim, self.gamma, self.zeta, self.source_norm, self.noise_sd)
    }
}
