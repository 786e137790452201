//! Numerical checks of the CDL lower bound `L_CDL >= (1 - γβ) L_MDL`.
//!
//! The margin `β = max_S p - Φ(p)` controls how far the modulating factor
//! `(1 - β)^γ` can pull CDL below MDL. Bernoulli's inequality
//! `(1 - β)^γ >= 1 - γβ` gives the bound whenever `β ∈ [0, 1]` and `γ` is a
//! positive integer; for `γ = 1` it is an equality.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{cdl_loss, mdl_loss, phi, top_candidate, PhiVariant};
use crate::numerics::LOG_FLOOR;
use crate::rng::{stream, Stream};

/// Slack allowed on the lower bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// `max_S p - Φ(p)`.
pub fn confidence_margin(probs: &[f64], candidates: &[usize], variant: PhiVariant) -> f64 {
    let top = top_candidate(probs, candidates).map_or(0.0, |i| probs[i]);
    top - phi(probs, candidates, variant)
}

/// Whether `max_S p - 1 <= Φ <= max_S p`.
pub fn check_phi_condition(probs: &[f64], candidates: &[usize], variant: PhiVariant) -> bool {
    let top = top_candidate(probs, candidates).map_or(0.0, |i| probs[i]);
    let f = phi(probs, candidates, variant);
    top - 1.0 <= f && f <= top
}

/// `γ` is an integer `>= 1` with `γ β_max < 1`; non-integers are inadmissible.
pub fn gamma_admissible(gamma: f64, beta_max: f64) -> bool {
    gamma >= 1.0 && gamma.fract() == 0.0 && gamma * beta_max < 1.0
}

/// Largest admissible integer `γ` for a margin, capped at `cap`.
pub fn max_admissible_gamma(beta: f64, cap: u32) -> Option<u32> {
    (1..=cap).rev().find(|&g| gamma_admissible(f64::from(g), beta))
}

/// Both sides of the bound for one bag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub beta: f64,
    pub gamma: u32,
    pub phi_condition: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// True when `lhs >= rhs - BOUND_SLACK`.
    pub holds: bool,
}

impl BoundCheck {
    /// `rhs - lhs`; positive values are violations.
    pub fn shortfall(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn check_lower_bound(
    weights: &[f64],
    probs: &[f64],
    candidates: &[usize],
    variant: PhiVariant,
    gamma: u32,
) -> Result<BoundCheck> {
    let beta = confidence_margin(probs, candidates, variant);
    let lhs = cdl_loss(weights, probs, candidates, variant, gamma)?;
    let mdl = mdl_loss(weights, probs, candidates)?;
    let rhs = (1.0 - f64::from(gamma) * beta) * mdl;
    Ok(BoundCheck {
        beta,
        gamma,
        phi_condition: check_phi_condition(probs, candidates, variant),
        lhs,
        rhs,
        holds: lhs >= rhs - BOUND_SLACK,
    })
}

/// `L_MDL = KL(w || p) + H[w]` over the candidates, with `0 log 0 = 0` and
/// probabilities clamped at the log floor. Returns `(kl, entropy)`.
pub fn mdl_decomposition(weights: &[f64], probs: &[f64], candidates: &[usize]) -> (f64, f64) {
    let mut kl = 0.0;
    let mut entropy = 0.0;
    for &c in candidates {
        let w = weights[c];
        if w > 0.0 {
            kl += w * (w.ln() - probs[c].max(LOG_FLOOR).ln());
            entropy -= w * w.ln();
        }
    }
    (kl, entropy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub tuples: usize,
    pub seed: u64,
    pub max_classes: usize,
    /// Variants to draw from; each tuple picks one uniformly.
    pub variants: Vec<PhiVariant>,
    /// Fixed `γ`; otherwise drawn uniformly among admissible integers up to `gamma_cap`.
    pub gamma: Option<u32>,
    pub gamma_cap: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            tuples: 10_000,
            seed: 0,
            max_classes: 10,
            variants: vec![PhiVariant::SecondCandidate, PhiVariant::TopNonCandidate],
            gamma: None,
            gamma_cap: 5,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tuples == 0 {
            return Err(Error::config("sweep needs at least one tuple"));
        }
        if self.max_classes < 2 {
            return Err(Error::config("sweep needs max_classes >= 2"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("sweep needs at least one variant"));
        }
        if self.gamma == Some(0) || self.gamma_cap == 0 {
            return Err(Error::config("gamma must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhiConditionStats {
    pub evaluated: usize,
    pub satisfied: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BetaSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationExample {
    pub weights: Vec<f64>,
    pub probs: Vec<f64>,
    /// 1-based candidate labels.
    pub candidates: Vec<usize>,
    pub variant: Option<PhiVariant>,
    pub check: Option<BoundCheck>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub tuples: usize,
    /// Tuples whose Φ condition held and whose `γ` was admissible.
    pub checked: usize,
    pub violations: usize,
    /// Largest `rhs - lhs` over checked tuples (negative when none fail).
    pub max_shortfall: f64,
    /// Largest `|lhs - rhs|` among checked tuples with `γ = 1`.
    pub max_gamma1_gap: f64,
    pub gamma1_checked: usize,
    /// Largest `|KL + H - L_MDL|`.
    pub max_decomposition_error: f64,
    pub inadmissible_gamma: usize,
    pub phi_condition_cc: PhiConditionStats,
    pub phi_condition_cn: PhiConditionStats,
    pub beta: BetaSummary,
    /// Up to ten failing tuples for reproduction.
    pub violation_examples: Vec<ViolationExample>,
}

/// Symmetric Dirichlet(1) sample of length `n` via normalized exponentials.
pub fn dirichlet_uniform(rng: &mut crate::rng::Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v.fill(1.0 / n as f64);
    }
    v
}

struct Tuple {
    weights: Vec<f64>,
    probs: Vec<f64>,
    candidates: Vec<usize>,
    variant: PhiVariant,
}

fn draw_tuple(rng: &mut crate::rng::Rng, cfg: &SweepConfig) -> Tuple {
    let k = rng.gen_range(2..=cfg.max_classes);
    let size = rng.gen_range(2..=k);
    let mut candidates = index::sample(rng, k, size).into_vec();
    candidates.sort_unstable();
    let probs = dirichlet_uniform(rng, k);
    let w_s = dirichlet_uniform(rng, size);
    let mut weights = vec![0.0; k];
    for (&c, w) in candidates.iter().zip(w_s) {
        weights[c] = w;
    }
    let variant = cfg.variants[rng.gen_range(0..cfg.variants.len())];
    Tuple {
        weights,
        probs,
        candidates,
        variant,
    }
}

const CHUNK: usize = 1000;

/// Random sweep over `cfg.tuples` tuples, parallel over fixed-size chunks.
/// Results depend only on the config, not on the thread count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let chunks = cfg.tuples.div_ceil(CHUNK);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream(cfg.seed, Stream::Sweep);
            rng.set_word_pos((chunk as u128) << 40);
            let count = CHUNK.min(cfg.tuples - chunk * CHUNK);
            let tuples: Vec<Tuple> = (0..count).map(|_| draw_tuple(&mut rng, cfg)).collect();
            let gammas: Vec<u32> = tuples.iter().map(|_| rng.gen()).collect();
            tuples
                .into_iter()
                .zip(gammas)
                .map(|(t, draw)| evaluate_tuple(cfg, t, draw))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = SweepReport {
        tuples: cfg.tuples,
        max_shortfall: f64::NEG_INFINITY,
        beta: BetaSummary {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            mean: 0.0,
        },
        ..SweepReport::default()
    };
    let mut beta_sum = 0.0;
    for outcome in partials.into_iter().flatten() {
        report.max_decomposition_error = report.max_decomposition_error.max(outcome.decomposition_error);
        let stats = match outcome.variant {
            PhiVariant::SecondCandidate => &mut report.phi_condition_cc,
            PhiVariant::TopNonCandidate => &mut report.phi_condition_cn,
        };
        stats.evaluated += 1;
        if outcome.phi_condition {
            stats.satisfied += 1;
        }
        beta_sum += outcome.beta;
        report.beta.min = report.beta.min.min(outcome.beta);
        report.beta.max = report.beta.max.max(outcome.beta);
        match outcome.check {
            Some(check) => {
                report.checked += 1;
                report.max_shortfall = report.max_shortfall.max(check.shortfall());
                if check.gamma == 1 {
                    report.gamma1_checked += 1;
                    report.max_gamma1_gap = report.max_gamma1_gap.max(check.shortfall().abs());
                }
                if !check.holds {
                    report.violations += 1;
                    if report.violation_examples.len() < 10 {
                        report.violation_examples.push(ViolationExample {
                            check: Some(check),
                            ..outcome.example
                        });
                    }
                }
            }
            None if outcome.phi_condition => report.inadmissible_gamma += 1,
            None => {}
        }
    }
    report.beta.mean = beta_sum / cfg.tuples as f64;
    for stats in [&mut report.phi_condition_cc, &mut report.phi_condition_cn] {
        stats.rate = if stats.evaluated == 0 {
            1.0
        } else {
            stats.satisfied as f64 / stats.evaluated as f64
        };
    }
    if report.checked == 0 {
        report.max_shortfall = 0.0;
    }
    Ok(report)
}

struct Outcome {
    variant: PhiVariant,
    beta: f64,
    phi_condition: bool,
    decomposition_error: f64,
    check: Option<BoundCheck>,
    example: ViolationExample,
}

fn evaluate_tuple(cfg: &SweepConfig, t: Tuple, draw: u32) -> Result<Outcome> {
    let beta = confidence_margin(&t.probs, &t.candidates, t.variant);
    let phi_condition = check_phi_condition(&t.probs, &t.candidates, t.variant);
    let (kl, h) = mdl_decomposition(&t.weights, &t.probs, &t.candidates);
    let mdl = mdl_loss(&t.weights, &t.probs, &t.candidates)?;
    let decomposition_error = (kl + h - mdl).abs();
    let gamma = match cfg.gamma {
        Some(g) => gamma_admissible(f64::from(g), beta).then_some(g),
        None => max_admissible_gamma(beta, cfg.gamma_cap).map(|top| 1 + draw % top),
    };
    let check = match gamma {
        Some(g) if phi_condition => Some(check_lower_bound(
            &t.weights,
            &t.probs,
            &t.candidates,
            t.variant,
            g,
        )?),
        _ => None,
    };
    Ok(Outcome {
        variant: t.variant,
        beta,
        phi_condition,
        decomposition_error,
        check,
        example: ViolationExample {
            candidates: t.candidates.iter().map(|c| c + 1).collect(),
            weights: t.weights,
            probs: t.probs,
            variant: Some(t.variant),
            check: None,
        },
    })
}
