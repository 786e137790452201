//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every forward operation together with its output value.
//! [`Tape::backward`] walks the record in reverse and returns the gradient of
//! one output with respect to every node. Parameter leaves carry a
//! [`ParamId`] so the gradients can be folded back into a
//! [`ParamStore`](super::ParamStore).

use std::sync::atomic::{AtomicU32, Ordering};

use super::matrix::{sigmoid, softmax, Matrix};
use super::ParamId;
use crate::error::{Error, Result};

/// Lower clamp applied to every logged argument.
pub const LOG_FLOOR: f64 = 1e-12;

/// Standard deviations below this are treated as degenerate by [`Tape::standardize`].
pub const STD_FLOOR: f64 = 1e-12;

static NEXT_TAPE: AtomicU32 = AtomicU32::new(1);

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.index as usize
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMulT(Var, Var),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Log(Var),
    Softmax(Var),
    Standardize(Var),
    Sum(Var),
    DivBy(Var, Var),
    PowI(Var, i32),
    Gather(Var, Vec<usize>),
    Reshape(Var),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Record of forward operations.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by one backward pass, indexed by node.
#[derive(Debug)]
pub struct Gradients {
    tape: u32,
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the seeded output with respect to `var`, if `var` participated.
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.index()).and_then(Option::as_ref)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.tape != self.id || v.index() >= self.nodes.len() {
            return Err(Error::Usage(format!(
                "variable {}:{} does not belong to tape {}",
                v.tape, v.index, self.id
            )));
        }
        Ok(())
    }

    pub fn value(&self, v: Var) -> &Matrix {
        assert_eq!(v.tape, self.id, "variable from a different tape");
        &self.nodes[v.index()].value
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).as_slice()[0]
    }

    /// Parameter ids recorded on this tape with their leaf variables.
    pub fn param_leaves(&self) -> impl Iterator<Item = (ParamId, Var)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n.op {
            Op::Param(id) => Some((
                id,
                Var {
                    tape: self.id,
                    index: i as u32,
                },
            )),
            _ => None,
        })
    }

    fn push(&mut self, op: Op, value: Matrix, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::numerical(name, "non-finite output"));
        }
        self.nodes.push(Node { op, value });
        Ok(Var {
            tape: self.id,
            index: (self.nodes.len() - 1) as u32,
        })
    }

    /// Leaf that receives no gradient bookkeeping beyond the backward pass itself.
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.push(Op::Constant, value, "constant")
    }

    /// Leaf bound to a parameter.
    pub fn param(&mut self, id: ParamId, value: Matrix) -> Result<Var> {
        self.push(Op::Param(id), value, "param")
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let v = self.value(a).matmul_t(self.value(b))?;
        self.push(Op::MatMulT(a, b), v, "matmul_t")
    }

    /// `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let v = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), v, "matmul")
    }

    /// Adds the `1 x m` row `bias` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        self.check(a)?;
        self.check(bias)?;
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(Error::config(format!(
                "add_bias: {:?} + {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let mut out = av.clone();
        let cols = av.cols();
        for (i, x) in out.as_mut_slice().iter_mut().enumerate() {
            *x += bv.as_slice()[i % cols];
        }
        self.push(Op::AddBias(a, bias), out, "add_bias")
    }

    /// `a · Wᵀ + b`, the affine map used by every linear layer.
    pub fn affine(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let y = self.matmul_t(x, weight)?;
        self.add_bias(y, bias)
    }

    fn zip_same(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        self.check(a)?;
        self.check(b)?;
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::config(format!(
                "{name}: {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let data = av
            .as_slice()
            .iter()
            .zip(bv.as_slice())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Matrix::from_vec(av.rows(), av.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_same(a, b, "add", |x, y| x + y)?;
        self.push(Op::Add(a, b), v, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_same(a, b, "sub", |x, y| x - y)?;
        self.push(Op::Sub(a, b), v, "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_same(a, b, "mul", |x, y| x * y)?;
        self.push(Op::Mul(a, b), v, "mul")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.check(a)?;
        let v = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), v, "scale")
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        self.check(a)?;
        let v = self.value(a).map(|x| x + s);
        self.push(Op::AddScalar(a), v, "add_scalar")
    }

    /// `s - a`.
    pub fn rsub_scalar(&mut self, s: f64, a: Var) -> Result<Var> {
        let n = self.neg(a)?;
        self.add_scalar(n, s)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v, "tanh")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v, "sigmoid")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), v, "relu")
    }

    /// Natural log with the argument clamped below at [`LOG_FLOOR`].
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let v = self.value(a).map(|x| x.max(LOG_FLOOR).ln());
        self.push(Op::Log(a), v, "log")
    }

    /// Softmax over all entries of `a`.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let av = self.value(a);
        if av.is_empty() {
            return Err(Error::config("softmax of an empty input"));
        }
        let v = Matrix::from_vec(av.rows(), av.cols(), softmax(av.as_slice()))?;
        self.push(Op::Softmax(a), v, "softmax")
    }

    /// `(a - mean) / sample_std` over all entries, with the `n - 1` denominator.
    ///
    /// Yields all zeros when there is a single entry or the standard deviation
    /// is below [`STD_FLOOR`].
    pub fn standardize(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let av = self.value(a);
        let v = match standardize_stats(av.as_slice()) {
            Some((mean, std)) => av.map(|x| (x - mean) / std),
            None => Matrix::zeros(av.rows(), av.cols()),
        };
        self.push(Op::Standardize(a), v, "standardize")
    }

    /// Sum of all entries as a `1 x 1` node.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let v = Matrix::scalar(self.value(a).sum());
        self.push(Op::Sum(a), v, "sum")
    }

    /// Divides every entry of `a` by the `1 x 1` node `s`.
    pub fn div_by(&mut self, a: Var, s: Var) -> Result<Var> {
        self.check(a)?;
        self.check(s)?;
        let sv = self.value(s);
        if sv.len() != 1 {
            return Err(Error::config("div_by: divisor must be 1x1"));
        }
        let d = sv.as_slice()[0];
        let v = self.value(a).map(|x| x / d);
        self.push(Op::DivBy(a, s), v, "div_by")
    }

    /// Integer power, elementwise.
    pub fn powi(&mut self, a: Var, n: i32) -> Result<Var> {
        self.check(a)?;
        let v = self.value(a).map(|x| x.powi(n));
        self.push(Op::PowI(a, n), v, "powi")
    }

    /// Selects entries of the flattened input into a `1 x len(indices)` row.
    /// The gradient flows to the selected entries only.
    pub fn gather(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        self.check(a)?;
        let av = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= av.len()) {
            return Err(Error::config(format!(
                "gather index {bad} out of range for {} entries",
                av.len()
            )));
        }
        let v = Matrix::row(indices.iter().map(|&i| av.as_slice()[i]).collect());
        self.push(Op::Gather(a, indices.to_vec()), v, "gather")
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        self.check(a)?;
        let v = self.value(a).reshaped(rows, cols)?;
        self.push(Op::Reshape(a), v, "reshape")
    }

    /// Gradient of a scalar output with respect to every node.
    pub fn backward_scalar(&self, output: Var) -> Result<Gradients> {
        self.backward(output, &Matrix::scalar(1.0))
    }

    /// Gradient of `<seed, output>` with respect to every node.
    pub fn backward(&self, output: Var, seed: &Matrix) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::Usage("backward called before any forward operation".into()));
        }
        self.check(output)?;
        if self.value(output).shape() != seed.shape() {
            return Err(Error::Usage(format!(
                "seed shape {:?} does not match output shape {:?}",
                seed.shape(),
                self.value(output).shape()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; output.index() + 1];
        grads[output.index()] = Some(seed.clone());

        for idx in (0..=output.index()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let y = &node.value;
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMulT(a, b) => {
                let da = g.matmul(self.value(*b))?;
                let db = g.t_matmul(self.value(*a))?;
                accumulate(grads, *a, da);
                accumulate(grads, *b, db);
            }
            Op::MatMul(a, b) => {
                let da = g.matmul_t(self.value(*b))?;
                let db = self.value(*a).t_matmul(g)?;
                accumulate(grads, *a, da);
                accumulate(grads, *b, db);
            }
            Op::AddBias(a, b) => {
                let cols = g.cols();
                let mut db = vec![0.0; cols];
                for r in 0..g.rows() {
                    for (d, x) in db.iter_mut().zip(g.row_slice(r)) {
                        *d += x;
                    }
                }
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, Matrix::row(db));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, zip(g, bv, |x, y| x * y));
                accumulate(grads, *b, zip(g, av, |x, y| x * y));
            }
            Op::Scale(a, s) => accumulate(grads, *a, g.map(|x| x * s)),
            Op::AddScalar(a) | Op::Reshape(a) => {
                let av = self.value(*a);
                accumulate(grads, *a, g.reshaped(av.rows(), av.cols())?);
            }
            Op::Tanh(a) => accumulate(grads, *a, zip(g, y, |g, y| g * (1.0 - y * y))),
            Op::Sigmoid(a) => accumulate(grads, *a, zip(g, y, |g, y| g * y * (1.0 - y))),
            Op::Relu(a) => {
                let av = self.value(*a);
                accumulate(grads, *a, zip(g, av, |g, x| if x > 0.0 { g } else { 0.0 }));
            }
            Op::Log(a) => {
                let av = self.value(*a);
                accumulate(
                    grads,
                    *a,
                    zip(g, av, |g, x| if x > LOG_FLOOR { g / x } else { 0.0 }),
                );
            }
            Op::Softmax(a) => {
                let gy: f64 = g.as_slice().iter().zip(y.as_slice()).map(|(g, y)| g * y).sum();
                accumulate(grads, *a, zip(g, y, |g, y| y * (g - gy)));
            }
            Op::Standardize(a) => {
                let av = self.value(*a);
                let n = av.len();
                let da = match standardize_stats(av.as_slice()) {
                    Some((_, std)) => {
                        let gmean = g.sum() / n as f64;
                        let gy: f64 =
                            g.as_slice().iter().zip(y.as_slice()).map(|(g, y)| g * y).sum();
                        let c = gy / (n as f64 - 1.0);
                        zip(g, y, |g, y| (g - gmean - y * c) / std)
                    }
                    None => Matrix::zeros(av.rows(), av.cols()),
                };
                accumulate(grads, *a, da);
            }
            Op::Sum(a) => {
                let av = self.value(*a);
                accumulate(grads, *a, Matrix::filled(av.rows(), av.cols(), g.as_slice()[0]));
            }
            Op::DivBy(a, s) => {
                let av = self.value(*a);
                let d = self.value(*s).as_slice()[0];
                let gx: f64 = g.as_slice().iter().zip(av.as_slice()).map(|(g, x)| g * x).sum();
                accumulate(grads, *a, g.map(|x| x / d));
                accumulate(grads, *s, Matrix::scalar(-gx / (d * d)));
            }
            Op::PowI(a, n) => {
                let av = self.value(*a);
                let n = *n;
                let da = zip(g, av, |g, x| {
                    if n == 0 {
                        0.0
                    } else {
                        g * f64::from(n) * x.powi(n - 1)
                    }
                });
                accumulate(grads, *a, da);
            }
            Op::Gather(a, indices) => {
                let av = self.value(*a);
                let mut da = Matrix::zeros(av.rows(), av.cols());
                for (&i, &gv) in indices.iter().zip(g.as_slice()) {
                    da.as_mut_slice()[i] += gv;
                }
                accumulate(grads, *a, da);
            }
        }
        Ok(())
    }
}

fn zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.index()] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Mean and sample standard deviation, or `None` when standardization degenerates.
fn standardize_stats(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    let std = (ss / (n as f64 - 1.0)).sqrt();
    (std >= STD_FLOOR).then_some((mean, std))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_softmax_gradient_at_origin() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::row(vec![0.0, 0.0])).unwrap();
        let p = t.softmax(x).unwrap();
        let lp = t.log(p).unwrap();
        let first = t.gather(lp, &[0]).unwrap();
        let g = t.backward_scalar(first).unwrap();
        let dx = g.get(x).unwrap().as_slice();
        assert!((dx[0] - 0.5).abs() < 1e-15);
        assert!((dx[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_gradient_is_p_minus_w() {
        let mut t = Tape::new();
        let logits = vec![0.3, -1.2, 2.0, 0.1];
        let w = vec![0.1, 0.2, 0.3, 0.4];
        let x = t.constant(Matrix::row(logits.clone())).unwrap();
        let wv = t.constant(Matrix::row(w.clone())).unwrap();
        let p = t.softmax(x).unwrap();
        let lp = t.log(p).unwrap();
        let prod = t.mul(wv, lp).unwrap();
        let s = t.sum(prod).unwrap();
        let loss = t.neg(s).unwrap();
        let g = t.backward_scalar(loss).unwrap();
        let p = softmax(&logits);
        for i in 0..4 {
            assert!((g.get(x).unwrap().as_slice()[i] - (p[i] - w[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_on_empty_tape_is_usage_error() {
        let other = {
            let mut t = Tape::new();
            t.constant(Matrix::scalar(1.0)).unwrap()
        };
        let t = Tape::new();
        assert!(matches!(t.backward_scalar(other), Err(Error::Usage(_))));
    }

    #[test]
    fn foreign_variable_is_usage_error() {
        let mut a = Tape::new();
        let va = a.constant(Matrix::scalar(1.0)).unwrap();
        let mut b = Tape::new();
        b.constant(Matrix::scalar(2.0)).unwrap();
        assert!(matches!(b.tanh(va), Err(Error::Usage(_))));
        assert!(matches!(b.backward_scalar(va), Err(Error::Usage(_))));
    }

    #[test]
    fn seed_shape_must_match() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::row(vec![1.0, 2.0])).unwrap();
        assert!(matches!(t.backward(x, &Matrix::scalar(1.0)), Err(Error::Usage(_))));
    }

    #[test]
    fn nan_reports_operation() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::scalar(0.0)).unwrap();
        let err = t.div_by(x, x).unwrap_err();
        assert!(matches!(err, Error::Numerical { op: "div_by", .. }));
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3)).unwrap();
        let b = t.constant(Matrix::zeros(3, 2)).unwrap();
        assert!(matches!(t.add(a, b), Err(Error::Config(_))));
        assert!(matches!(t.matmul_t(a, b), Err(Error::Config(_))));
    }

    #[test]
    fn standardize_degenerate_cases_are_zero() {
        let mut t = Tape::new();
        let single = t.constant(Matrix::row(vec![0.7])).unwrap();
        let s = t.standardize(single).unwrap();
        assert_eq!(t.value(s).as_slice(), &[0.0]);
        let flat = t.constant(Matrix::row(vec![0.25; 4])).unwrap();
        let s = t.standardize(flat).unwrap();
        assert_eq!(t.value(s).as_slice(), &[0.0; 4]);
    }

    #[test]
    fn gather_reuses_entries() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::row(vec![1.0, 2.0, 3.0])).unwrap();
        let g = t.gather(x, &[2, 2, 0]).unwrap();
        let s = t.sum(g).unwrap();
        let grads = t.backward_scalar(s).unwrap();
        assert_eq!(grads.get(x).unwrap().as_slice(), &[1.0, 0.0, 2.0]);
    }
}
