//! Disambiguation losses over candidate label sets.
//!
//! Every loss takes the momentum label weights `w` (zero outside the
//! candidate set), the predicted distribution `p` over all `k` classes, and
//! the candidate set `S`:
//!
//! | kind     | per-bag loss                                              |
//! |----------|-----------------------------------------------------------|
//! | `mdl`    | `-Σ_S w_c log p_c`                                        |
//! | `fl`     | `-Σ_S w_c (1 - p_c)^γ log p_c`                            |
//! | `ifl`    | `-Σ_S w_c (1 + p_c)^γ log p_c`                            |
//! | `cdl-cc` | `(1 - max_S p + Φ)^γ · mdl`, Φ = second largest `p` on S  |
//! | `cdl-cn` | same, Φ = largest `p` outside S (0 when S is everything)  |
//!
//! The CDL factor is shared by all summands of a bag. Gradients flow
//! through the factor, including the selected max and Φ entries.

mod weights;

use serde::{Deserialize, Serialize};

pub use weights::{
    init_weights, momentum_coefficient, simplex_violation, update_weights, LabelWeights,
    SIMPLEX_TOL,
};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "mdl")]
    Mdl,
    #[serde(rename = "fl")]
    Fl,
    #[serde(rename = "ifl")]
    Ifl,
    #[serde(rename = "cdl-cc")]
    CdlCc,
    #[serde(rename = "cdl-cn")]
    CdlCn,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Mdl,
        LossKind::Fl,
        LossKind::Ifl,
        LossKind::CdlCc,
        LossKind::CdlCn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Mdl => "mdl",
            LossKind::Fl => "fl",
            LossKind::Ifl => "ifl",
            LossKind::CdlCc => "cdl-cc",
            LossKind::CdlCn => "cdl-cn",
        }
    }

    /// The Φ variant for CDL kinds.
    pub fn phi_variant(self) -> Option<PhiVariant> {
        match self {
            LossKind::CdlCc => Some(PhiVariant::SecondCandidate),
            LossKind::CdlCn => Some(PhiVariant::TopNonCandidate),
            _ => None,
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown loss `{s}`")))
    }
}

/// Choice of Φ in the CDL modulating factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhiVariant {
    /// Second-highest candidate probability (CC).
    #[serde(rename = "cc")]
    SecondCandidate,
    /// Highest non-candidate probability (CN).
    #[serde(rename = "cn")]
    TopNonCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub kind: LossKind,
    pub gamma: u32,
    /// Replace the CDL factor with the constant 1. Diagnostic only.
    #[serde(default)]
    pub force_unit_base: bool,
}

impl LossConfig {
    pub fn new(kind: LossKind, gamma: u32) -> Self {
        Self {
            kind,
            gamma,
            force_unit_base: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma < 1 {
            return Err(Error::config("gamma must be an integer >= 1"));
        }
        Ok(())
    }
}

fn check_inputs(weights: &[f64], probs: &[f64], candidates: &[usize]) -> Result<()> {
    if weights.len() != probs.len() {
        return Err(Error::config(format!(
            "{} weights for {} classes",
            weights.len(),
            probs.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::validation("empty candidate set"));
    }
    if let Some(&c) = candidates.iter().find(|&&c| c >= probs.len()) {
        return Err(Error::validation(format!("candidate {c} outside {} classes", probs.len())));
    }
    Ok(())
}

/// Candidate labels ordered by decreasing probability; ties keep the lower label first.
fn ranked_candidates(probs: &[f64], candidates: &[usize]) -> Vec<usize> {
    let mut order = candidates.to_vec();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

/// Index of the top candidate.
pub fn top_candidate(probs: &[f64], candidates: &[usize]) -> Option<usize> {
    ranked_candidates(probs, candidates).first().copied()
}

/// Index feeding Φ, or `None` when Φ is the constant 0.
pub fn phi_index(probs: &[f64], candidates: &[usize], variant: PhiVariant) -> Option<usize> {
    match variant {
        PhiVariant::SecondCandidate => ranked_candidates(probs, candidates).get(1).copied(),
        PhiVariant::TopNonCandidate => {
            let mut best: Option<usize> = None;
            for c in 0..probs.len() {
                if candidates.contains(&c) {
                    continue;
                }
                if best.is_none_or(|b| probs[c] > probs[b]) {
                    best = Some(c);
                }
            }
            best
        }
    }
}

/// Φ for the CC variant: second-largest candidate probability, 0 for singleton sets.
pub fn phi_cc(probs: &[f64], candidates: &[usize]) -> f64 {
    phi_index(probs, candidates, PhiVariant::SecondCandidate).map_or(0.0, |i| probs[i])
}

/// Φ for the CN variant: largest non-candidate probability, 0 when there is none.
pub fn phi_cn(probs: &[f64], candidates: &[usize]) -> f64 {
    phi_index(probs, candidates, PhiVariant::TopNonCandidate).map_or(0.0, |i| probs[i])
}

pub fn phi(probs: &[f64], candidates: &[usize], variant: PhiVariant) -> f64 {
    match variant {
        PhiVariant::SecondCandidate => phi_cc(probs, candidates),
        PhiVariant::TopNonCandidate => phi_cn(probs, candidates),
    }
}

/// `-Σ_S w_c log p_c` on the tape.
pub fn mdl_on_tape(tape: &mut Tape, probs: Var, weights: &[f64], candidates: &[usize]) -> Result<Var> {
    check_inputs(weights, tape.value(probs).as_slice(), candidates)?;
    let p = tape.gather(probs, candidates)?;
    let lp = tape.log(p)?;
    let w = tape.constant(Matrix::row(candidates.iter().map(|&c| weights[c]).collect()))?;
    let terms = tape.mul(w, lp)?;
    let s = tape.sum(terms)?;
    tape.neg(s)
}

/// Focal (`sign = -1`) or inverse focal (`sign = +1`) loss with per-term modulation.
fn focal_on_tape(
    tape: &mut Tape,
    probs: Var,
    weights: &[f64],
    candidates: &[usize],
    gamma: u32,
    sign: f64,
) -> Result<Var> {
    check_inputs(weights, tape.value(probs).as_slice(), candidates)?;
    let p = tape.gather(probs, candidates)?;
    let lp = tape.log(p)?;
    let signed = tape.scale(p, sign)?;
    let base = tape.add_scalar(signed, 1.0)?;
    let modulation = tape.powi(base, gamma as i32)?;
    let w = tape.constant(Matrix::row(candidates.iter().map(|&c| weights[c]).collect()))?;
    let wm = tape.mul(w, modulation)?;
    let terms = tape.mul(wm, lp)?;
    let s = tape.sum(terms)?;
    tape.neg(s)
}

/// The CDL modulating factor `(1 - (max_S p - Φ))^γ` as a `1 x 1` node.
pub fn cdl_factor_on_tape(
    tape: &mut Tape,
    probs: Var,
    candidates: &[usize],
    variant: PhiVariant,
    gamma: u32,
) -> Result<Var> {
    let values = tape.value(probs).as_slice().to_vec();
    let top = top_candidate(&values, candidates)
        .ok_or_else(|| Error::validation("empty candidate set"))?;
    let pmax = tape.gather(probs, &[top])?;
    let margin = match phi_index(&values, candidates, variant) {
        Some(i) => {
            let phi = tape.gather(probs, &[i])?;
            tape.sub(pmax, phi)?
        }
        None => pmax,
    };
    let base = tape.rsub_scalar(1.0, margin)?;
    tape.powi(base, gamma as i32)
}

/// Per-bag loss of the configured kind on the tape.
pub fn loss_on_tape(
    tape: &mut Tape,
    probs: Var,
    weights: &[f64],
    candidates: &[usize],
    cfg: &LossConfig,
) -> Result<Var> {
    match cfg.kind {
        LossKind::Mdl => mdl_on_tape(tape, probs, weights, candidates),
        LossKind::Fl => focal_on_tape(tape, probs, weights, candidates, cfg.gamma, -1.0),
        LossKind::Ifl => focal_on_tape(tape, probs, weights, candidates, cfg.gamma, 1.0),
        LossKind::CdlCc | LossKind::CdlCn => {
            let variant = cfg.kind.phi_variant().expect("cdl kind");
            let mdl = mdl_on_tape(tape, probs, weights, candidates)?;
            let factor = if cfg.force_unit_base {
                tape.constant(Matrix::scalar(1.0))?
            } else {
                cdl_factor_on_tape(tape, probs, candidates, variant, cfg.gamma)?
            };
            tape.mul(factor, mdl)
        }
    }
}

/// Evaluates a loss on plain probability values.
pub fn loss_value(cfg: &LossConfig, weights: &[f64], probs: &[f64], candidates: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.constant(Matrix::row(probs.to_vec()))?;
    let l = loss_on_tape(&mut tape, p, weights, candidates, cfg)?;
    Ok(tape.scalar(l))
}

pub fn mdl_loss(weights: &[f64], probs: &[f64], candidates: &[usize]) -> Result<f64> {
    loss_value(&LossConfig::new(LossKind::Mdl, 1), weights, probs, candidates)
}

pub fn fl_mipl_loss(weights: &[f64], probs: &[f64], candidates: &[usize], gamma: u32) -> Result<f64> {
    loss_value(&LossConfig::new(LossKind::Fl, gamma), weights, probs, candidates)
}

pub fn ifl_mipl_loss(weights: &[f64], probs: &[f64], candidates: &[usize], gamma: u32) -> Result<f64> {
    loss_value(&LossConfig::new(LossKind::Ifl, gamma), weights, probs, candidates)
}

pub fn cdl_loss(
    weights: &[f64],
    probs: &[f64],
    candidates: &[usize],
    variant: PhiVariant,
    gamma: u32,
) -> Result<f64> {
    let kind = match variant {
        PhiVariant::SecondCandidate => LossKind::CdlCc,
        PhiVariant::TopNonCandidate => LossKind::CdlCn,
    };
    loss_value(&LossConfig::new(kind, gamma), weights, probs, candidates)
}
