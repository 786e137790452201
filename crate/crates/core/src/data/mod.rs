//! Bags, datasets, synthetic generation, splitting and the dataset file format.
//!
//! Labels are 0-based class indices in memory. The text format and every
//! user-facing output use 1-based labels.

mod format;
mod generate;
mod split;

pub use format::{load, parse_dataset, save, write_dataset};
pub use generate::{generate_synthetic, GenConfig};
pub use split::split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A multi-instance bag with its candidate label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub id: u64,
    /// `n x d` instance matrix, one instance per row.
    pub instances: Matrix,
    /// Sorted, duplicate-free candidate labels.
    pub candidates: Vec<usize>,
    /// Ground truth; only used for generation and evaluation.
    pub label: usize,
}

impl Bag {
    pub fn num_instances(&self) -> usize {
        self.instances.rows()
    }

    pub fn dim(&self) -> usize {
        self.instances.cols()
    }

    pub fn is_candidate(&self, c: usize) -> bool {
        self.candidates.binary_search(&c).is_ok()
    }

    /// Labels in `0..k` outside the candidate set.
    pub fn non_candidates(&self, k: usize) -> Vec<usize> {
        (0..k).filter(|&c| !self.is_candidate(c)).collect()
    }

    /// Checks the bag against a class count and feature dimension.
    pub fn validate(&self, k: usize, d: usize) -> Result<()> {
        let id = self.id;
        if self.num_instances() == 0 {
            return Err(Error::validation(format!("bag {id}: no instances")));
        }
        if self.dim() != d {
            return Err(Error::validation(format!(
                "bag {id}: instance dimension {} != dataset dimension {d}",
                self.dim()
            )));
        }
        if self.candidates.is_empty() {
            return Err(Error::validation(format!("bag {id}: empty candidate set")));
        }
        if self.candidates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "bag {id}: candidate labels must be distinct"
            )));
        }
        if let Some(&c) = self.candidates.iter().find(|&&c| c >= k) {
            return Err(Error::validation(format!(
                "bag {id}: candidate label {} exceeds class count {k}",
                c + 1
            )));
        }
        if !self.is_candidate(self.label) {
            return Err(Error::validation(format!(
                "bag {id}: true label {} not among the candidates",
                self.label + 1
            )));
        }
        if !self.instances.is_finite() {
            return Err(Error::validation(format!("bag {id}: non-finite feature value")));
        }
        Ok(())
    }
}

/// Generation provenance carried alongside a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    /// Number of false-positive candidate labels per bag.
    pub false_positives: Option<usize>,
    /// Realized mean fraction of positive instances per bag.
    pub positive_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiplDataset {
    pub bags: Vec<Bag>,
    pub num_classes: usize,
    pub dim: usize,
    pub meta: DatasetMeta,
}

impl MiplDataset {
    pub fn new(bags: Vec<Bag>, num_classes: usize, dim: usize, meta: DatasetMeta) -> Result<Self> {
        let ds = Self {
            bags,
            num_classes,
            dim,
            meta,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::validation("dataset needs at least one class"));
        }
        if self.dim == 0 {
            return Err(Error::validation("dataset needs a positive feature dimension"));
        }
        for bag in &self.bags {
            bag.validate(self.num_classes, self.dim)?;
        }
        Ok(())
    }

    /// A dataset with the same class count, dimension and metadata but the given bags.
    pub fn with_bags(&self, bags: Vec<Bag>) -> Self {
        Self {
            bags,
            num_classes: self.num_classes,
            dim: self.dim,
            meta: self.meta.clone(),
        }
    }

    pub fn mean_instances(&self) -> f64 {
        if self.bags.is_empty() {
            return 0.0;
        }
        self.bags.iter().map(Bag::num_instances).sum::<usize>() as f64 / self.bags.len() as f64
    }
}
