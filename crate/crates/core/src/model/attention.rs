//! Attention mechanisms that turn per-instance scores into pooling weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tape, Var};

/// Multiplicative decay applied to the MAM temperature once per epoch.
pub const TEMPERATURE_DECAY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    /// Sigmoid scores normalized by their sum.
    Dam,
    /// Softmax of scores divided by `sqrt(l)`.
    Sam,
    /// Temperature softmax followed by standardization within the bag.
    Mam,
}

impl std::fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttentionKind::Dam => "dam",
            AttentionKind::Sam => "sam",
            AttentionKind::Mam => "mam",
        })
    }
}

impl std::str::FromStr for AttentionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dam" => Ok(AttentionKind::Dam),
            "sam" => Ok(AttentionKind::Sam),
            "mam" => Ok(AttentionKind::Mam),
            other => Err(Error::config(format!("unknown attention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionConfig {
    pub kind: AttentionKind,
    /// SAM scale `l`; scores are divided by `sqrt(l)`.
    pub sam_scale: f64,
    pub tau_init: f64,
    pub tau_min: f64,
}

impl AttentionConfig {
    pub fn new(kind: AttentionKind, sam_scale: f64) -> Self {
        Self {
            kind,
            sam_scale,
            tau_init: 1.0,
            tau_min: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sam_scale > 0.0 && self.sam_scale.is_finite()) {
            return Err(Error::config(format!("sam_scale {} must be > 0", self.sam_scale)));
        }
        if !(self.tau_min > 0.0 && self.tau_init >= self.tau_min && self.tau_init.is_finite()) {
            return Err(Error::config(format!(
                "temperatures need tau_init >= tau_min > 0, got {} and {}",
                self.tau_init, self.tau_min
            )));
        }
        Ok(())
    }
}

/// One annealing step: `max(tau_min, 0.95 * tau)`.
pub fn anneal_temperature(tau: f64, tau_min: f64) -> f64 {
    tau_min.max(tau * TEMPERATURE_DECAY)
}

/// Pooling weights on the tape for a `1 x n` row of scores.
pub fn attention_on_tape(
    tape: &mut Tape,
    scores: Var,
    cfg: &AttentionConfig,
    temperature: f64,
) -> Result<Var> {
    match cfg.kind {
        AttentionKind::Dam => {
            let s = tape.sigmoid(scores)?;
            let total = tape.sum(s)?;
            tape.div_by(s, total)
        }
        AttentionKind::Sam => {
            let scaled = tape.scale(scores, 1.0 / cfg.sam_scale.sqrt())?;
            tape.softmax(scaled)
        }
        AttentionKind::Mam => {
            if !(temperature > 0.0) {
                return Err(Error::config(format!("temperature {temperature} must be > 0")));
            }
            let scaled = tape.scale(scores, 1.0 / temperature)?;
            let soft = tape.softmax(scaled)?;
            tape.standardize(soft)
        }
    }
}

fn on_fresh_tape(scores: &[f64], f: impl FnOnce(&mut Tape, Var) -> Result<Var>) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::config("attention needs at least one instance"));
    }
    let mut tape = Tape::new();
    let s = tape.constant(Matrix::row(scores.to_vec()))?;
    let out = f(&mut tape, s)?;
    Ok(tape.value(out).as_slice().to_vec())
}

/// DAM weights: `sigmoid(s_j) / sum_j' sigmoid(s_j')`.
pub fn attention_dam(scores: &[f64]) -> Result<Vec<f64>> {
    let cfg = AttentionConfig::new(AttentionKind::Dam, 1.0);
    on_fresh_tape(scores, |t, s| attention_on_tape(t, s, &cfg, 1.0))
}

/// SAM weights: `softmax(s / sqrt(l))`.
pub fn attention_sam(scores: &[f64], l: f64) -> Result<Vec<f64>> {
    let cfg = AttentionConfig::new(AttentionKind::Sam, l);
    cfg.validate()?;
    on_fresh_tape(scores, |t, s| attention_on_tape(t, s, &cfg, 1.0))
}

/// MAM weights: `softmax(s / tau)` standardized to zero mean and unit sample std.
/// Singleton bags and bags with (near) zero spread yield all-zero weights.
pub fn attention_mam(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    let cfg = AttentionConfig::new(AttentionKind::Mam, 1.0);
    on_fresh_tape(scores, |t, s| attention_on_tape(t, s, &cfg, temperature))
}

/// Pre-standardization MAM weights `softmax(s / tau)`.
pub fn mam_softmax(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    on_fresh_tape(scores, |t, s| {
        let scaled = t.scale(s, 1.0 / temperature)?;
        t.softmax(scaled)
    })
}
