use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the mask optimisation maximises.
///
/// `*E` variants explain with edges only; `*Ef` variants add a node mask
/// that scales whole feature rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Objective {
    PnsE,
    PnsEf,
    PnE,
    PnEf,
    PsE,
    PsEf,
}

impl Objective {
    pub const ALL: [Objective; 6] = [Self::PnsE, Self::PnsEf, Self::PnE, Self::PnEf, Self::PsE, Self::PsEf];

    pub fn name(self) -> &'static str {
        match self {
            Self::PnsE => "pns-e",
            Self::PnsEf => "pns-ef",
            Self::PnE => "pn-e",
            Self::PnEf => "pn-ef",
            Self::PsE => "ps-e",
            Self::PsEf => "ps-ef",
        }
    }

    pub fn uses_features(self) -> bool {
        matches!(self, Self::PnsEf | Self::PnEf | Self::PsEf)
    }

    pub fn has_pn(self) -> bool {
        !matches!(self, Self::PsE | Self::PsEf)
    }

    pub fn has_ps(self) -> bool {
        !matches!(self, Self::PnE | Self::PnEf)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['_', '^', ','], "-").replace("--", "-");
        Self::ALL
            .into_iter()
            .find(|o| o.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown objective '{s}' (expected one of pns-e, pns-ef, pn-e, pn-ef, ps-e, ps-ef)")))
    }
}

impl TryFrom<String> for Objective {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Objective> for String {
    fn from(o: Objective) -> String {
        o.name().to_string()
    }
}

/// How continuous masks become discrete sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Extraction {
    /// The `edges` highest-weight edges and the `nodes` highest-weight nodes.
    TopK { edges: usize, nodes: usize },
    /// Every entry strictly above `t`.
    Threshold { t: f64 },
}

impl Default for Extraction {
    fn default() -> Self {
        Self::Threshold { t: 0.5 }
    }
}

/// How the element-wise mask entropy is aggregated in the loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyReduction {
    Sum,
    /// Divide by the number of mask entries, so the pull towards 0/1 does
    /// not grow with the subgraph.
    #[default]
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub objective: Objective,
    pub alpha_e: f64,
    pub beta_e: f64,
    pub alpha_f: f64,
    pub beta_f: f64,
    pub entropy_reduction: EntropyReduction,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Complement draws per expectation per optimisation step.
    pub mc_samples: usize,
    /// Half-width of the uniform noise added to complemented edge masks.
    pub sigma_e: f64,
    /// Half-width of the uniform noise added to complemented node masks.
    pub sigma_f: f64,
    /// Mixture weights of the complement sub-events: edges and features both
    /// differ, only edges differ, only features differ.
    pub priors: [f64; 3],
    /// Mask logits start uniform in `±init_scale`.
    pub init_scale: f64,
    /// Complement draws used for the reported bound values.
    pub report_samples: usize,
    pub extraction: Extraction,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::PnsE,
            alpha_e: 5e-3,
            beta_e: 1.0,
            alpha_f: 5e-3,
            beta_f: 1.0,
            entropy_reduction: EntropyReduction::Mean,
            epochs: 500,
            learning_rate: 0.01,
            mc_samples: 1,
            sigma_e: 0.5,
            sigma_f: 0.5,
            priors: [1.0 / 3.0; 3],
            init_scale: 0.2,
            report_samples: 32,
            extraction: Extraction::default(),
            seed: 0,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("alpha_e", self.alpha_e),
            ("beta_e", self.beta_e),
            ("alpha_f", self.alpha_f),
            ("beta_f", self.beta_f),
            ("sigma_e", self.sigma_e),
            ("sigma_f", self.sigma_f),
            ("init_scale", self.init_scale),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.mc_samples == 0 || self.report_samples == 0 {
            return Err(Error::Config("mc_samples and report_samples must be at least 1".into()));
        }
        if self.priors.iter().any(|&p| !(p >= 0.0)) || (self.priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("priors must be non-negative and sum to 1, got {:?}", self.priors)));
        }
        match self.extraction {
            Extraction::Threshold { t } if !(0.0..=1.0).contains(&t) => {
                Err(Error::Config(format!("threshold {t} outside [0, 1]")))
            }
            Extraction::TopK { edges: 0, .. } => Err(Error::Config("top-K needs K >= 1".into())),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_names_round_trip() {
        for o in Objective::ALL {
            assert_eq!(o.name().parse::<Objective>().unwrap(), o);
        }
        assert_eq!("PNS_ef".parse::<Objective>().unwrap(), Objective::PnsEf);
        assert!("pns".parse::<Objective>().is_err());
    }

    #[test]
    fn default_is_valid_and_bad_priors_rejected() {
        ExplainConfig::default().validate().unwrap();
        let cfg = ExplainConfig { priors: [0.5, 0.5, 0.5], ..ExplainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExplainConfig { sigma_e: -0.1, ..ExplainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExplainConfig { objective: Objective::PsEf, extraction: Extraction::TopK { edges: 6, nodes: 5 }, ..Default::default() };
        let text = toml::to_string(&cfg).unwrap();
        let back: ExplainConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
