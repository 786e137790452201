use crate::error::{Error, Result};

/// Tolerance for the candidate simplex invariant.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Uniform `1/|S|` on candidates, exactly zero elsewhere.
pub fn init_weights(candidates: &[usize], num_classes: usize) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::validation("cannot initialize weights for an empty candidate set"));
    }
    let mut w = vec![0.0; num_classes];
    let share = 1.0 / candidates.len() as f64;
    for &c in candidates {
        if c >= num_classes {
            return Err(Error::validation(format!("candidate {c} outside {num_classes} classes")));
        }
        w[c] = share;
    }
    Ok(w)
}

/// Momentum coefficient `(T - t) / T` for epoch `t` of `T`.
pub fn momentum_coefficient(epoch: usize, total: usize) -> f64 {
    (total as f64 - epoch as f64) / total as f64
}

/// Momentum update towards the candidate-renormalized prediction.
///
/// `w_c <- a * w_c + (1 - a) * p_c / sum_{c' in S} p_c'` on candidates with
/// `a = (T - t) / T`; non-candidates stay at zero.
pub fn update_weights(
    previous: &[f64],
    probs: &[f64],
    candidates: &[usize],
    epoch: usize,
    total: usize,
) -> Result<Vec<f64>> {
    if total == 0 || epoch < 2 || epoch > total {
        return Err(Error::config(format!(
            "weight update needs 2 <= t <= T, got t={epoch}, T={total}"
        )));
    }
    if previous.len() != probs.len() {
        return Err(Error::config(format!(
            "{} weights for {} probabilities",
            previous.len(),
            probs.len()
        )));
    }
    let mass: f64 = candidates.iter().map(|&c| probs[c]).sum();
    if !(mass >= 1e-12) {
        return Err(Error::numerical(
            "update_weights",
            format!("candidate probability mass {mass:e} is degenerate"),
        ));
    }
    let alpha = momentum_coefficient(epoch, total);
    let mut next = vec![0.0; previous.len()];
    for &c in candidates {
        next[c] = alpha * previous[c] + (1.0 - alpha) * probs[c] / mass;
    }
    Ok(next)
}

/// Largest violation of the candidate simplex invariant: the deviation of the
/// candidate total from one, any negative candidate weight, and any nonzero
/// non-candidate weight.
pub fn simplex_violation(w: &[f64], candidates: &[usize]) -> f64 {
    let mut is_cand = vec![false; w.len()];
    for &c in candidates {
        if let Some(slot) = is_cand.get_mut(c) {
            *slot = true;
        }
    }
    let mut worst: f64 = 0.0;
    let mut total = 0.0;
    for (c, &v) in w.iter().enumerate() {
        if is_cand[c] {
            total += v;
            worst = worst.max(-v);
        } else {
            worst = worst.max(v.abs());
        }
    }
    worst.max((total - 1.0).abs())
}

/// Per-bag label weights for a whole training set.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelWeights {
    weights: Vec<Vec<f64>>,
    candidates: Vec<Vec<usize>>,
    total_epochs: usize,
}

impl LabelWeights {
    pub fn new<'a>(
        candidate_sets: impl IntoIterator<Item = &'a [usize]>,
        num_classes: usize,
        total_epochs: usize,
    ) -> Result<Self> {
        let candidates: Vec<Vec<usize>> = candidate_sets.into_iter().map(<[usize]>::to_vec).collect();
        let weights = candidates
            .iter()
            .map(|s| init_weights(s, num_classes))
            .collect::<Result<_>>()?;
        Ok(Self {
            weights,
            candidates,
            total_epochs,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, bag: usize) -> &[f64] {
        &self.weights[bag]
    }

    /// Applies the epoch-`t` update for one bag. Epoch 1 keeps the initial weights.
    pub fn update(&mut self, bag: usize, probs: &[f64], epoch: usize) -> Result<&[f64]> {
        if epoch >= 2 {
            self.weights[bag] = update_weights(
                &self.weights[bag],
                probs,
                &self.candidates[bag],
                epoch,
                self.total_epochs,
            )?;
        }
        Ok(&self.weights[bag])
    }

    /// Largest [`simplex_violation`] over all bags.
    pub fn max_violation(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.candidates)
            .map(|(w, s)| simplex_violation(w, s))
            .fold(0.0, f64::max)
    }
}
