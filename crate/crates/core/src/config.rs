//! TOML run configuration.
//!
//! ```toml
//! [data]        # synthetic generator (see `GenConfig`)
//! bags = 500
//! classes = 5
//! false_positives = 1
//! seed = 0      # data seed
//!
//! [split]
//! train_fraction = 0.7
//!
//! [model]
//! extractor = [64]
//! scorer_hidden = 128
//! attention = "sam"       # dam | sam | mam
//!
//! [train]
//! epochs = 100
//! loss = "cdl-cn"         # mdl | fl | ifl | cdl-cc | cdl-cn
//! gamma = 1
//! seed = 0      # run seed
//!
//! [theorem]     # randomized bound sweep
//! tuples = 10000
//! ```
//!
//! Every key is optional. Unknown keys anywhere are rejected, and the error
//! lists all of them.

use serde::{Deserialize, Serialize};

use crate::data::GenConfig;
use crate::error::{Error, Result};
use crate::theory::SweepConfig;
use crate::training::{ModelSection, TrainConfig};

/// Schema id recorded in manifests for configs in this format.
pub const CONFIG_SCHEMA: &str = "mipl-cdl/config/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_fraction: 0.7 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub data: GenConfig,
    pub split: SplitConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub theorem: SweepConfig,
}

impl Config {
    /// Parses and validates a config; unknown keys are errors.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let cfg: Config = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| {
                let record = e
                    .span()
                    .map(|s| format!("line {}", text[..s.start.min(text.len())].lines().count().max(1)))
                    .unwrap_or_else(|| "config".to_owned());
                Error::parse(record, e.message().to_owned())
            })?;
        if !unknown.is_empty() {
            return Err(Error::config(format!("unknown config keys: {}", unknown.join(", "))));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::config(format!("train_fraction {f} outside (0, 1)")));
        }
        self.model.build(self.data.dim, self.data.classes).validate()?;
        self.train.validate()?;
        self.theorem.validate()?;
        for (name, seed) in [
            ("data.seed", self.data.seed),
            ("train.seed", self.train.seed),
            ("theorem.seed", self.theorem.seed),
        ] {
            if i64::try_from(seed).is_err() {
                return Err(Error::config(format!("{name} {seed} exceeds {}", i64::MAX)));
            }
        }
        Ok(())
    }

    /// A copy with every defaulted value written out explicitly.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.model.sam_scale = Some(self.model.sam_scale.unwrap_or(self.model.scorer_hidden as f64));
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = Config::from_toml_str("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.data.bags, 500);
        assert_eq!(cfg.data.classes, 5);
        assert_eq!(cfg.data.false_positives, 1);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = Config::from_toml_str("bogus = 1\n[train]\nepochz = 3\n[data]\nbags = 10\ncolour = 2\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus"), "{err}");
        assert!(err.contains("train.epochz"), "{err}");
        assert!(err.contains("data.colour"), "{err}");
    }

    #[test]
    fn gamma_zero_rejected() {
        assert!(matches!(Config::from_toml_str("[train]\ngamma = 0\n"), Err(Error::Config(_))));
    }

    #[test]
    fn too_many_false_positives_rejected() {
        assert!(matches!(
            Config::from_toml_str("[data]\nclasses = 5\nfalse_positives = 7\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn resolved_round_trip() {
        let cfg = Config::from_toml_str("[train]\nloss = \"mdl\"\nlr = 0.05\n").unwrap();
        assert_eq!(cfg.train.loss, LossKind::Mdl);
        let resolved = cfg.resolved();
        assert_eq!(resolved.model.sam_scale, Some(128.0));
        let back = Config::from_toml_str(&resolved.to_toml()).unwrap();
        assert_eq!(back, resolved);
    }

    #[test]
    fn type_errors_are_parse_errors() {
        assert!(matches!(Config::from_toml_str("[train]\nepochs = \"many\"\n"), Err(Error::Parse { .. })));
        assert!(matches!(Config::from_toml_str("[train"), Err(Error::Parse { .. })));
    }
}
