//! Published per-dataset hyperparameters for training and explanation.

use std::fmt;
use std::str::FromStr;

use crate::datasets::SyntheticKind;
use crate::error::{Error, Result};
use crate::explain::{ExplainConfig, Extraction, Objective};
use crate::graph::TaskKind;
use crate::train::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    BaShapes,
    TreeCycles,
    TreeGrid,
    Mutagenicity,
    Msrc21,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Self::BaShapes, Self::TreeCycles, Self::TreeGrid, Self::Mutagenicity, Self::Msrc21];

    pub fn name(self) -> &'static str {
        match self {
            Self::BaShapes => "ba-shapes",
            Self::TreeCycles => "tree-cycles",
            Self::TreeGrid => "tree-grid",
            Self::Mutagenicity => "mutagenicity",
            Self::Msrc21 => "msrc-21",
        }
    }

    pub fn synthetic(self) -> Option<SyntheticKind> {
        match self {
            Self::BaShapes => Some(SyntheticKind::BaShapes),
            Self::TreeCycles => Some(SyntheticKind::TreeCycles),
            Self::TreeGrid => Some(SyntheticKind::TreeGrid),
            Self::Mutagenicity | Self::Msrc21 => None,
        }
    }

    pub fn task(self) -> TaskKind {
        if self.synthetic().is_some() {
            TaskKind::Node
        } else {
            TaskKind::Graph
        }
    }

    /// Ground-truth sizes `(edges, nodes)` used for top-K evaluation.
    pub fn top_k(self) -> Option<(usize, usize)> {
        match self {
            Self::BaShapes => Some((6, 5)),
            Self::TreeCycles => Some((6, 6)),
            Self::TreeGrid => Some((12, 9)),
            Self::Mutagenicity | Self::Msrc21 => None,
        }
    }

    pub fn train_config(self, seed: u64) -> TrainConfig {
        let base = TrainConfig { learning_rate: 0.001, seed, ..TrainConfig::default() };
        match self {
            Self::BaShapes | Self::TreeCycles | Self::TreeGrid => TrainConfig { epochs: 2000, dropout: 0.0, weight_decay: 0.0, restarts: 3, ..base },
            Self::Mutagenicity | Self::Msrc21 => TrainConfig { epochs: 500, dropout: 0.5, weight_decay: 5e-4, restarts: 1, ..base },
        }
    }

    /// `(α_e, β_e, α_f, β_f)`. PN and PS variants reuse the weights of the
    /// PNS objective over the same channels.
    pub fn regularizers(self, objective: Objective) -> (f64, f64, f64, f64) {
        let edge_only = match self {
            Self::BaShapes => (5e-3, 1.0),
            Self::TreeCycles | Self::TreeGrid => (1e-2, 1.0),
            Self::Mutagenicity => (1e-4, 1e-3),
            Self::Msrc21 => (1e-3, 1.0),
        };
        if !objective.uses_features() {
            return (edge_only.0, edge_only.1, 0.0, 0.0);
        }
        match self {
            Self::BaShapes => (5e-3, 1.0, 5e-3, 1.0),
            Self::TreeCycles => (1e-2, 1.0, 1e-3, 1.0),
            Self::TreeGrid => (1e-2, 1.0, 1e-2, 1.0),
            Self::Mutagenicity => (1e-4, 1e-3, 1e-4, 1e-3),
            Self::Msrc21 => (5e-4, 1.0, 5e-4, 1.0),
        }
    }

    pub fn explain_config(self, objective: Objective, seed: u64) -> ExplainConfig {
        let (alpha_e, beta_e, alpha_f, beta_f) = self.regularizers(objective);
        let defaults = ExplainConfig::default();
        let (epochs, extraction) = match self.top_k() {
            Some((edges, nodes)) => (1000, Extraction::TopK { edges, nodes }),
            None => (500, Extraction::default()),
        };
        ExplainConfig {
            objective,
            alpha_e,
            beta_e,
            alpha_f: if objective.uses_features() { alpha_f } else { defaults.alpha_f },
            beta_f: if objective.uses_features() { beta_f } else { defaults.beta_f },
            epochs,
            extraction,
            seed,
            ..defaults
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        let key = if key == "msrc21" { "msrc-21".to_string() } else { key };
        Self::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!("MSRC_21".parse::<Preset>().unwrap(), Preset::Msrc21);
    }

    #[test]
    fn table_values() {
        let c = Preset::BaShapes.explain_config(Objective::PnsE, 0);
        assert_eq!((c.alpha_e, c.beta_e), (5e-3, 1.0));
        let c = Preset::TreeCycles.explain_config(Objective::PnsEf, 0);
        assert_eq!((c.alpha_e, c.alpha_f), (1e-2, 1e-3));
        let t = Preset::Mutagenicity.train_config(0);
        assert_eq!((t.epochs, t.dropout, t.weight_decay), (500, 0.5, 5e-4));
        for p in Preset::ALL {
            for o in Objective::ALL {
                p.explain_config(o, 1).validate().unwrap();
            }
            p.train_config(1).validate().unwrap();
        }
    }
}
