//! Embedded-space MIPL network.
//!
//! `bag -> feature extractor -> gated instance scores -> attention weights ->
//! weighted sum of embeddings -> linear classifier -> softmax`.

pub mod attention;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use attention::{
    anneal_temperature, attention_dam, attention_mam, attention_on_tape, attention_sam,
    mam_softmax, AttentionConfig, AttentionKind, TEMPERATURE_DECAY,
};

use crate::data::Bag;
use crate::error::{Error, Result};
use crate::numerics::{argmax, Matrix, ParamId, ParamStore, Tape, Var};
use crate::rng::{stream, Stream};

pub const CHECKPOINT_SCHEMA: &str = "mipl-cdl/checkpoint/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Hidden widths of the feature extractor; empty means identity.
    pub extractor: Vec<usize>,
    pub scorer_hidden: usize,
    pub num_classes: usize,
    pub attention: AttentionConfig,
}

impl ModelConfig {
    pub fn embedding_dim(&self) -> usize {
        self.extractor.last().copied().unwrap_or(self.input_dim)
    }

    /// Scalar parameter count, `None` on overflow.
    pub fn num_parameters(&self) -> Option<usize> {
        let linear = |i: usize, o: usize| i.checked_mul(o)?.checked_add(o);
        let mut total = 0usize;
        let mut width = self.input_dim;
        for &w in &self.extractor {
            total = total.checked_add(linear(width, w)?)?;
            width = w;
        }
        total = total.checked_add(linear(width, self.scorer_hidden)?.checked_mul(2)?)?;
        total = total.checked_add(linear(self.scorer_hidden, 1)?)?;
        total.checked_add(linear(width, self.num_classes)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 || self.scorer_hidden == 0 {
            return Err(Error::config(
                "input_dim, num_classes and scorer_hidden must be positive",
            ));
        }
        if self.extractor.contains(&0) {
            return Err(Error::config("extractor widths must be positive"));
        }
        self.attention.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Linear {
    weight: ParamId,
    bias: ParamId,
}

impl Linear {
    fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut uniform = |len: usize| -> Vec<f64> {
            (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
        };
        let w = Matrix::from_vec(fan_out, fan_in, uniform(fan_out * fan_in)).expect("shape");
        let b = Matrix::row(uniform(fan_out));
        Self {
            weight: store.add(format!("{name}.weight"), w),
            bias: store.add(format!("{name}.bias"), b),
        }
    }

    fn apply(&self, tape: &mut Tape, bound: &[Var], x: Var) -> Result<Var> {
        tape.affine(x, bound[self.weight.0], bound[self.bias.0])
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    extractor: Vec<Linear>,
    tanh_branch: Linear,
    sigmoid_branch: Linear,
    score: Linear,
    classifier: Linear,
}

impl Layout {
    fn build(cfg: &ModelConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Self {
        let mut width = cfg.input_dim;
        let mut extractor = Vec::new();
        for (i, &w) in cfg.extractor.iter().enumerate() {
            extractor.push(Linear::new(store, &format!("extractor.{i}"), width, w, rng));
            width = w;
        }
        let tanh_branch = Linear::new(store, "scorer.tanh", width, cfg.scorer_hidden, rng);
        let sigmoid_branch = Linear::new(store, "scorer.sigmoid", width, cfg.scorer_hidden, rng);
        let score = Linear::new(store, "scorer.out", cfg.scorer_hidden, 1, rng);
        let classifier = Linear::new(store, "classifier", width, cfg.num_classes, rng);
        Self {
            extractor,
            tanh_branch,
            sigmoid_branch,
            score,
            classifier,
        }
    }
}

/// Tape handles for one bag's forward pass.
#[derive(Debug, Clone, Copy)]
pub struct BagForward {
    /// `n x e` instance embeddings.
    pub embeddings: Var,
    /// `1 x n` raw instance scores.
    pub scores: Var,
    /// `1 x n` attention weights.
    pub attention: Var,
    /// `1 x e` pooled bag feature.
    pub bag_feature: Var,
    /// `1 x k` classifier logits.
    pub logits: Var,
    /// `1 x k` class probabilities.
    pub probs: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub label: usize,
    pub confidence: f64,
}

impl Prediction {
    /// Argmax over all classes with lowest-index tie-break.
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let label = argmax(&probs).unwrap_or(0);
        let confidence = probs.get(label).copied().unwrap_or(0.0);
        Self {
            probs,
            label,
            confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiplModel {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
    temperature: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    schema: String,
    config: ModelConfig,
    temperature: f64,
    params: ParamStore,
}

impl MiplModel {
    /// Fresh model with weights drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(seed, Stream::Init);
        let mut params = ParamStore::new();
        let layout = Layout::build(&config, &mut params, &mut rng);
        let temperature = config.attention.tau_init;
        Ok(Self {
            config,
            params,
            layout,
            temperature,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Current MAM temperature.
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Advances the MAM temperature by one epoch and returns it.
    pub fn anneal(&mut self) -> f64 {
        self.temperature = anneal_temperature(self.temperature, self.config.attention.tau_min);
        self.temperature
    }

    /// Binds every parameter to `tape`; pass the result to [`forward`](Self::forward).
    pub fn bind(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        self.params.bind(tape)
    }

    fn check_instances(&self, x: &Matrix) -> Result<()> {
        if x.rows() == 0 {
            return Err(Error::config("bag has no instances"));
        }
        if x.cols() != self.config.input_dim {
            return Err(Error::config(format!(
                "instance dimension {} != model input dimension {}",
                x.cols(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Instance embeddings `H = Psi(X)`: ReLU after every extractor layer.
    pub fn extract_features(&self, tape: &mut Tape, bound: &[Var], instances: &Matrix) -> Result<Var> {
        self.check_instances(instances)?;
        let mut h = tape.constant(instances.clone())?;
        for layer in &self.layout.extractor {
            let a = layer.apply(tape, bound, h)?;
            h = tape.relu(a)?;
        }
        Ok(h)
    }

    /// Gated scores `W^T (tanh(W_t^T h) ⊙ sigm(W_s^T h))` as a `1 x n` row.
    pub fn score_instances(&self, tape: &mut Tape, bound: &[Var], embeddings: Var) -> Result<Var> {
        let n = tape.value(embeddings).rows();
        let t = self.layout.tanh_branch.apply(tape, bound, embeddings)?;
        let t = tape.tanh(t)?;
        let s = self.layout.sigmoid_branch.apply(tape, bound, embeddings)?;
        let s = tape.sigmoid(s)?;
        let gated = tape.mul(t, s)?;
        let scores = self.layout.score.apply(tape, bound, gated)?;
        tape.reshape(scores, 1, n)
    }

    /// Bag feature `z = sum_j a_j h_j`.
    pub fn aggregate(&self, tape: &mut Tape, weights: Var, embeddings: Var) -> Result<Var> {
        if tape.value(weights).len() != tape.value(embeddings).rows() {
            return Err(Error::Usage(format!(
                "{} attention weights for {} instances",
                tape.value(weights).len(),
                tape.value(embeddings).rows()
            )));
        }
        tape.matmul(weights, embeddings)
    }

    /// Logits and softmax probabilities for a pooled feature.
    pub fn classify(&self, tape: &mut Tape, bound: &[Var], bag_feature: Var) -> Result<(Var, Var)> {
        let logits = self.layout.classifier.apply(tape, bound, bag_feature)?;
        let probs = tape.softmax(logits)?;
        Ok((logits, probs))
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], instances: &Matrix) -> Result<BagForward> {
        let embeddings = self.extract_features(tape, bound, instances)?;
        let scores = self.score_instances(tape, bound, embeddings)?;
        let attention = attention_on_tape(tape, scores, &self.config.attention, self.temperature)?;
        let bag_feature = self.aggregate(tape, attention, embeddings)?;
        let (logits, probs) = self.classify(tape, bound, bag_feature)?;
        Ok(BagForward {
            embeddings,
            scores,
            attention,
            bag_feature,
            logits,
            probs,
        })
    }

    /// Class probabilities for one bag.
    pub fn predict_proba(&self, bag: &Bag) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape)?;
        let out = self.forward(&mut tape, &bound, &bag.instances)?;
        Ok(tape.value(out.probs).as_slice().to_vec())
    }

    pub fn predict(&self, bag: &Bag) -> Result<Prediction> {
        Ok(Prediction::from_probs(self.predict_proba(bag)?))
    }

    pub fn to_checkpoint(&self) -> String {
        let ck = Checkpoint {
            schema: CHECKPOINT_SCHEMA.to_owned(),
            config: self.config.clone(),
            temperature: self.temperature,
            params: self.params.clone(),
        };
        serde_json::to_string_pretty(&ck).expect("checkpoint serializes")
    }

    /// Restores a model written by [`to_checkpoint`](Self::to_checkpoint).
    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("checkpoint line {}", e.line()), e.to_string()))?;
        if ck.schema != CHECKPOINT_SCHEMA {
            return Err(Error::validation(format!("unsupported checkpoint schema `{}`", ck.schema)));
        }
        ck.config.validate()?;
        let cfg = &ck.config;
        let stored: usize = ck.params.iter().map(|p| p.value.len()).sum();
        if cfg.num_parameters() != Some(stored) {
            return Err(Error::validation(format!(
                "checkpoint holds {stored} values, architecture needs {:?}",
                cfg.num_parameters()
            )));
        }
        if !(ck.temperature >= cfg.attention.tau_min && ck.temperature <= cfg.attention.tau_init) {
            return Err(Error::validation(format!(
                "temperature {} outside [tau_min, tau_init]",
                ck.temperature
            )));
        }
        let mut model = Self::new(ck.config.clone(), 0)?;
        if model.params.len() != ck.params.len() {
            return Err(Error::validation(format!(
                "checkpoint has {} tensors, architecture needs {}",
                ck.params.len(),
                model.params.len()
            )));
        }
        for (fresh, stored) in model.params.iter().zip(ck.params.iter()) {
            if fresh.name != stored.name
                || fresh.value.shape() != stored.value.shape()
                || stored.velocity().shape() != stored.value.shape()
            {
                return Err(Error::validation(format!(
                    "checkpoint tensor `{}` {:?} does not match `{}` {:?}",
                    stored.name,
                    stored.value.shape(),
                    fresh.name,
                    fresh.value.shape()
                )));
            }
        }
        model.params = ck.params;
        model.temperature = ck.temperature;
        Ok(model)
    }
}
