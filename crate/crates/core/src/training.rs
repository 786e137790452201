//! The training loop, evaluation, and repeated paired experiments.
//!
//! Each epoch anneals the MAM temperature, sets the cosine learning rate and
//! shuffles the training bags into mini-batches. For every batch the bags are
//! embedded, pooled and classified; the label weights are updated from the
//! detached probabilities of that same forward pass; the configured loss is
//! averaged over the batch, back-propagated, and applied with momentum SGD.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    accuracy, ece, probability_breakdown, PredictionRecord, ProbabilityBreakdown, ReliabilityReport,
    DEFAULT_BINS,
};
use crate::data::{split, MiplDataset};
use crate::error::{Error, Result};
use crate::losses::{loss_on_tape, LabelWeights, LossConfig, LossKind, SIMPLEX_TOL};
use crate::model::{MiplModel, ModelConfig};
use crate::numerics::{cosine_anneal, Sgd, Tape};
use crate::rng::{stream, Stream};
use crate::theory::{check_lower_bound, check_phi_condition, confidence_margin, gamma_admissible};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub loss: LossKind,
    pub gamma: u32,
    /// Replaces the CDL factor with 1; a diagnostic for comparing against MDL.
    pub force_unit_base: bool,
    /// Run seed: parameter initialization, shuffling and the train/test split.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            loss: LossKind::CdlCn,
            gamma: 1,
            force_unit_base: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            kind: self.loss,
            gamma: self.gamma,
            force_unit_base: self.force_unit_base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("lr {} must be > 0", self.lr)));
        }
        Sgd::new(self.momentum, self.weight_decay)?;
        self.loss_config().validate()
    }
}

/// Per-epoch (and per-batch) training history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Mean per-bag loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean per-bag loss of every batch, in order.
    pub batch_losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
    /// MAM temperature used during each epoch.
    pub temperatures: Vec<f64>,
    /// Largest label-weight simplex violation at the end of each epoch.
    pub weight_violations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trace: TrainTrace,
    /// Detached predictions on every training bag from the final epoch's forward passes.
    pub final_epoch_records: Vec<PredictionRecord>,
    pub label_weights: LabelWeights,
}

fn with_position(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::Numerical { op, detail } => Error::Numerical {
            op,
            detail: format!("epoch {epoch}, batch {batch}: {detail}"),
        },
        other => other,
    }
}

/// Trains `model` in place on `train`.
pub fn train(train: &MiplDataset, model: &mut MiplModel, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mc = model.config();
    if mc.input_dim != train.dim || mc.num_classes != train.num_classes {
        return Err(Error::config(format!(
            "model expects dim {} / {} classes, dataset has dim {} / {} classes",
            mc.input_dim, mc.num_classes, train.dim, train.num_classes
        )));
    }
    if train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let loss_cfg = cfg.loss_config();
    let sgd = Sgd::new(cfg.momentum, cfg.weight_decay)?;
    let mut weights = LabelWeights::new(
        train.bags.iter().map(|b| b.candidates.as_slice()),
        train.num_classes,
        cfg.epochs,
    )?;
    let mut rng = stream(cfg.seed, Stream::Shuffle);
    let mut trace = TrainTrace::default();
    let mut final_records = vec![None; train.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        let tau = model.anneal();
        let lr = cosine_anneal(cfg.lr, epoch, cfg.epochs)?;
        trace.temperatures.push(tau);
        trace.learning_rates.push(lr);
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut run = || -> Result<f64> {
                let mut tape = Tape::new();
                let bound = model.bind(&mut tape)?;
                let mut total = None;
                for &i in batch {
                    let bag = &train.bags[i];
                    let fwd = model.forward(&mut tape, &bound, &bag.instances)?;
                    let probs = tape.value(fwd.probs).as_slice().to_vec();
                    let w = weights.update(i, &probs, epoch)?.to_vec();
                    debug_assert!(crate::losses::simplex_violation(&w, &bag.candidates) <= SIMPLEX_TOL);
                    if epoch == cfg.epochs {
                        final_records[i] =
                            Some(PredictionRecord::new(bag.id, probs, bag.label, bag.candidates.clone())?);
                    }
                    let l = loss_on_tape(&mut tape, fwd.probs, &w, &bag.candidates, &loss_cfg)?;
                    total = Some(match total {
                        None => l,
                        Some(acc) => tape.add(acc, l)?,
                    });
                }
                let total = total.expect("non-empty batch");
                let mean = tape.scale(total, 1.0 / batch.len() as f64)?;
                let value = tape.scalar(mean);
                if !value.is_finite() {
                    return Err(Error::numerical("loss", format!("batch loss is {value}")));
                }
                let grads = tape.backward_scalar(mean)?;
                model.params_mut().accumulate(&tape, &grads)?;
                sgd.step(model.params_mut(), lr)?;
                Ok(value)
            };
            let value = run().map_err(|e| with_position(e, epoch, b + 1))?;
            trace.batch_losses.push(value);
            epoch_total += value * batch.len() as f64;
        }
        trace.epoch_losses.push(epoch_total / train.len() as f64);
        trace.weight_violations.push(weights.max_violation());
    }
    let final_epoch_records = final_records
        .into_iter()
        .map(|r| r.expect("every bag visited in the final epoch"))
        .collect();
    Ok(TrainOutcome {
        trace,
        final_epoch_records,
        label_weights: weights,
    })
}

/// Test-time metrics for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub records: Vec<PredictionRecord>,
    pub accuracy: f64,
    pub reliability: ReliabilityReport,
    pub breakdown: ProbabilityBreakdown,
}

impl Evaluation {
    pub fn from_records(records: Vec<PredictionRecord>) -> Result<Self> {
        let reliability = ece(&records, DEFAULT_BINS)?;
        Ok(Self {
            accuracy: accuracy(&records),
            breakdown: probability_breakdown(&records),
            reliability,
            records,
        })
    }

    pub fn ece(&self) -> f64 {
        self.reliability.ece
    }
}

/// Predicts every bag of `ds` and computes accuracy, ECE and the breakdown.
pub fn evaluate(model: &MiplModel, ds: &MiplDataset) -> Result<Evaluation> {
    let mc = model.config();
    if mc.input_dim != ds.dim || mc.num_classes != ds.num_classes {
        return Err(Error::config(format!(
            "model expects dim {} / {} classes, dataset has dim {} / {} classes",
            mc.input_dim, mc.num_classes, ds.dim, ds.num_classes
        )));
    }
    let records = ds
        .bags
        .par_iter()
        .map(|bag| {
            let probs = model.predict_proba(bag)?;
            PredictionRecord::new(bag.id, probs, bag.label, bag.candidates.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_records(records)
}

/// Margin statistics and bound checks on the final epoch's training predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSummary {
    pub bags: usize,
    pub phi_condition_rate: f64,
    pub beta_max: f64,
    pub gamma: u32,
    pub gamma_admissible: bool,
    /// Bags with the Φ condition satisfied whose bound failed beyond the slack.
    pub violations: usize,
    pub max_shortfall: f64,
}

pub fn theorem_summary(
    records: &[PredictionRecord],
    weights: &LabelWeights,
    loss: &LossConfig,
) -> Result<Option<TheoremSummary>> {
    let Some(variant) = loss.kind.phi_variant() else {
        return Ok(None);
    };
    let mut satisfied = 0;
    let mut beta_max: f64 = 0.0;
    let mut violations = 0;
    let mut max_shortfall = f64::NEG_INFINITY;
    for (i, r) in records.iter().enumerate() {
        let ok = check_phi_condition(&r.probs, &r.candidates, variant);
        beta_max = beta_max.max(confidence_margin(&r.probs, &r.candidates, variant));
        if ok {
            satisfied += 1;
            let check = check_lower_bound(weights.get(i), &r.probs, &r.candidates, variant, loss.gamma)?;
            max_shortfall = max_shortfall.max(check.shortfall());
            if !check.holds {
                violations += 1;
            }
        }
    }
    Ok(Some(TheoremSummary {
        bags: records.len(),
        phi_condition_rate: if records.is_empty() {
            1.0
        } else {
            satisfied as f64 / records.len() as f64
        },
        beta_max,
        gamma: loss.gamma,
        gamma_admissible: gamma_admissible(f64::from(loss.gamma), beta_max),
        violations,
        max_shortfall: if satisfied == 0 { 0.0 } else { max_shortfall },
    }))
}

/// Everything produced by one split/train/evaluate run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub model: MiplModel,
    pub trace: TrainTrace,
    pub test: Evaluation,
    pub train_breakdown: ProbabilityBreakdown,
    pub theorem: Option<TheoremSummary>,
    pub test_set: MiplDataset,
}

/// Model architecture options that do not depend on the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    /// Hidden widths of the ReLU extractor; empty means identity.
    pub extractor: Vec<usize>,
    pub scorer_hidden: usize,
    pub attention: crate::model::AttentionKind,
    /// SAM scale; defaults to `scorer_hidden`.
    pub sam_scale: Option<f64>,
    pub tau_init: f64,
    pub tau_min: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            extractor: vec![64],
            scorer_hidden: 128,
            attention: crate::model::AttentionKind::Sam,
            sam_scale: None,
            tau_init: 1.0,
            tau_min: 0.1,
        }
    }
}

impl ModelSection {
    pub fn build(&self, input_dim: usize, num_classes: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            extractor: self.extractor.clone(),
            scorer_hidden: self.scorer_hidden,
            num_classes,
            attention: crate::model::AttentionConfig {
                kind: self.attention,
                sam_scale: self.sam_scale.unwrap_or(self.scorer_hidden as f64),
                tau_init: self.tau_init,
                tau_min: self.tau_min,
            },
        }
    }
}

/// Splits `ds` with the run seed, trains a fresh model and evaluates it on the held-out bags.
pub fn run_once(
    ds: &MiplDataset,
    model_section: &ModelSection,
    cfg: &TrainConfig,
    train_fraction: f64,
) -> Result<RunResult> {
    let (train_set, test_set) = split(ds, train_fraction, cfg.seed)?;
    let mut model = MiplModel::new(model_section.build(ds.dim, ds.num_classes), cfg.seed)?;
    let outcome = train(&train_set, &mut model, cfg)?;
    let test = evaluate(&model, &test_set)?;
    let theorem = theorem_summary(&outcome.final_epoch_records, &outcome.label_weights, &cfg.loss_config())?;
    Ok(RunResult {
        train_breakdown: probability_breakdown(&outcome.final_epoch_records),
        trace: outcome.trace,
        test,
        theorem,
        model,
        test_set,
    })
}

/// Summary of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seed: u64,
    pub accuracy: f64,
    pub ece: f64,
    pub train_breakdown: ProbabilityBreakdown,
    pub test_breakdown: ProbabilityBreakdown,
    pub final_loss: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub repeats: Vec<RepeatSummary>,
    pub accuracy: MeanStd,
    pub ece: MeanStd,
}

impl ExperimentResult {
    pub fn from_repeats(repeats: Vec<RepeatSummary>) -> Self {
        let acc: Vec<f64> = repeats.iter().map(|r| r.accuracy).collect();
        let ece: Vec<f64> = repeats.iter().map(|r| r.ece).collect();
        Self {
            accuracy: MeanStd::of(&acc),
            ece: MeanStd::of(&ece),
            repeats,
        }
    }
}

/// Seed of repeat `r` for base seed `base`.
pub fn repeat_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

/// `repeats` independent split/train/evaluate runs with seeds `seed, seed + 1, ...`.
/// Repeats run in parallel; each owns its model, weights and random streams.
pub fn run_experiment(
    ds: &MiplDataset,
    model_section: &ModelSection,
    cfg: &TrainConfig,
    train_fraction: f64,
    repeats: usize,
) -> Result<ExperimentResult> {
    if repeats == 0 {
        return Err(Error::config("repeats must be >= 1"));
    }
    let rows = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let seed = repeat_seed(cfg.seed, r);
            let run_cfg = TrainConfig { seed, ..cfg.clone() };
            let res = run_once(ds, model_section, &run_cfg, train_fraction)?;
            Ok(RepeatSummary {
                seed,
                accuracy: res.test.accuracy,
                ece: res.test.ece(),
                train_breakdown: res.train_breakdown,
                test_breakdown: res.test.breakdown,
                final_loss: res.trace.epoch_losses.last().copied().unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult::from_repeats(rows))
}
