//! Dense linear algebra, reverse-mode differentiation, and the optimizer.

mod gradcheck;
mod matrix;
mod optim;
mod tape;

pub use gradcheck::{gradient_check, GradCheckReport, GradEntry};
pub use matrix::{argmax, sigmoid, softmax, Matrix};
pub use optim::{cosine_anneal, Sgd};
pub use tape::{Gradients, Tape, Var, LOG_FLOOR, STD_FLOOR};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// A trainable tensor with its gradient accumulator and momentum buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    #[serde(skip_serializing, default = "Option::default")]
    grad: Option<Matrix>,
    velocity: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let velocity = Matrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad: None,
            velocity,
        }
    }

    /// Current gradient; zeros when nothing has been accumulated.
    pub fn grad(&self) -> Matrix {
        self.grad
            .clone()
            .unwrap_or_else(|| Matrix::zeros(self.value.rows(), self.value.cols()))
    }

    pub fn velocity(&self) -> &Matrix {
        &self.velocity
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    fn accumulate(&mut self, g: &Matrix) -> Result<()> {
        if g.shape() != self.value.shape() {
            return Err(Error::config(format!(
                "gradient shape {:?} for parameter {} of shape {:?}",
                g.shape(),
                self.name,
                self.value.shape()
            )));
        }
        match &mut self.grad {
            Some(existing) => existing.add_assign(g),
            slot @ None => *slot = Some(g.clone()),
        }
        Ok(())
    }
}

/// Owned collection of parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.params.push(Parameter::new(name, value));
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Total number of scalar entries.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Records every parameter as a leaf on `tape`, in id order.
    pub fn bind(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| tape.param(ParamId(i), p.value.clone()))
            .collect()
    }

    /// Adds the gradients of every parameter leaf on `tape` into the accumulators.
    pub fn accumulate(&mut self, tape: &Tape, grads: &Gradients) -> Result<()> {
        for (id, var) in tape.param_leaves() {
            if let Some(g) = grads.get(var) {
                if !g.is_finite() {
                    return Err(Error::numerical(
                        "backward",
                        format!("non-finite gradient for {}", self.params[id.0].name),
                    ));
                }
                self.params[id.0].accumulate(g)?;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }
}
