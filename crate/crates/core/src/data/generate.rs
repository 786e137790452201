use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Bag, DatasetMeta, MiplDataset};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::{stream, Stream};

/// Parameters of the synthetic bag generator.
///
/// Positive instances come from a Gaussian blob centred on the bag's class
/// mean; negatives come from a background blob at the origin that belongs to
/// none of the `classes` targets. Class means sit at distance `separation`
/// from the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub bags: usize,
    pub classes: usize,
    pub dim: usize,
    pub min_instances: usize,
    pub max_instances: usize,
    pub min_positive_fraction: f64,
    pub max_positive_fraction: f64,
    /// False-positive candidate labels per bag.
    pub false_positives: usize,
    pub separation: f64,
    /// Per-coordinate standard deviation of every blob.
    pub noise: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    /// Shape statistics of the MNIST-style benchmark: 500 bags, 5 classes,
    /// 35 to 48 instances, roughly 8% positives, one false positive.
    fn default() -> Self {
        Self {
            bags: 500,
            classes: 5,
            dim: 16,
            min_instances: 35,
            max_instances: 48,
            min_positive_fraction: 0.07,
            max_positive_fraction: 0.091,
            false_positives: 1,
            separation: 3.0,
            noise: 1.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::config("classes must be >= 1"));
        }
        if self.false_positives > self.classes - 1 {
            return Err(Error::config(format!(
                "false_positives = {} exceeds classes - 1 = {}",
                self.false_positives,
                self.classes - 1
            )));
        }
        if self.dim == 0 {
            return Err(Error::config("dim must be >= 1"));
        }
        if self.min_instances == 0 || self.min_instances > self.max_instances {
            return Err(Error::config(format!(
                "instance range [{}, {}] invalid",
                self.min_instances, self.max_instances
            )));
        }
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !frac_ok(self.min_positive_fraction)
            || !frac_ok(self.max_positive_fraction)
            || self.min_positive_fraction > self.max_positive_fraction
        {
            return Err(Error::config(format!(
                "positive fraction range [{}, {}] must lie in (0, 1]",
                self.min_positive_fraction, self.max_positive_fraction
            )));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(Error::config("separation must be finite and > 0"));
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return Err(Error::config("noise must be finite and > 0"));
        }
        Ok(())
    }
}

fn class_means(cfg: &GenConfig, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    if cfg.dim >= cfg.classes {
        (0..cfg.classes)
            .map(|c| {
                let mut m = vec![0.0; cfg.dim];
                m[c] = cfg.separation;
                m
            })
            .collect()
    } else {
        (0..cfg.classes)
            .map(|_| {
                let v: Vec<f64> = (0..cfg.dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| x * cfg.separation / norm).collect()
            })
            .collect()
    }
}

/// Draws a dataset; identical configs give identical datasets.
pub fn generate_synthetic(cfg: &GenConfig) -> Result<MiplDataset> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, Stream::Generate);
    let means = class_means(cfg, &mut rng);
    let mut bags = Vec::with_capacity(cfg.bags);
    let mut positive_total = 0.0;

    for id in 0..cfg.bags {
        let label = rng.gen_range(0..cfg.classes);
        let n = rng.gen_range(cfg.min_instances..=cfg.max_instances);
        let frac = if cfg.min_positive_fraction < cfg.max_positive_fraction {
            rng.gen_range(cfg.min_positive_fraction..=cfg.max_positive_fraction)
        } else {
            cfg.min_positive_fraction
        };
        let positives = ((frac * n as f64).round() as usize).clamp(1, n);
        let mut is_positive = vec![false; n];
        for j in index::sample(&mut rng, n, positives) {
            is_positive[j] = true;
        }
        positive_total += positives as f64 / n as f64;

        let mut data = Vec::with_capacity(n * cfg.dim);
        for &pos in &is_positive {
            for c in 0..cfg.dim {
                let centre = if pos { means[label][c] } else { 0.0 };
                let z: f64 = rng.sample(StandardNormal);
                data.push(centre + cfg.noise * z);
            }
        }

        let others: Vec<usize> = (0..cfg.classes).filter(|&c| c != label).collect();
        let mut candidates: Vec<usize> = index::sample(&mut rng, others.len(), cfg.false_positives)
            .into_iter()
            .map(|i| others[i])
            .collect();
        candidates.push(label);
        candidates.sort_unstable();

        bags.push(Bag {
            id: id as u64,
            instances: Matrix::from_vec(n, cfg.dim, data)?,
            candidates,
            label,
        });
    }

    let meta = DatasetMeta {
        seed: Some(cfg.seed),
        false_positives: Some(cfg.false_positives),
        positive_ratio: (cfg.bags > 0).then(|| positive_total / cfg.bags as f64),
    };
    MiplDataset::new(bags, cfg.classes, cfg.dim, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_like_shape_statistics() {
        let ds = generate_synthetic(&GenConfig::default()).unwrap();
        assert_eq!(ds.len(), 500);
        assert!(ds.bags.iter().all(|b| b.candidates.len() == 2));
        let avg = ds.mean_instances();
        assert!((avg - 41.5).abs() < 1.0, "avg instances {avg}");
        let ratio = ds.meta.positive_ratio.unwrap();
        assert!((ratio - 0.08).abs() < 0.01, "positive ratio {ratio}");
    }

    #[test]
    fn zero_false_positives_gives_singletons() {
        let cfg = GenConfig {
            bags: 50,
            false_positives: 0,
            ..GenConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert!(ds.bags.iter().all(|b| b.candidates == vec![b.label]));
    }

    #[test]
    fn too_many_false_positives_rejected() {
        let cfg = GenConfig {
            classes: 5,
            false_positives: 5,
            ..GenConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = GenConfig {
            bags: 20,
            seed: 99,
            ..GenConfig::default()
        };
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
        let other = GenConfig { seed: 100, ..cfg.clone() };
        assert_ne!(generate_synthetic(&other).unwrap().bags, generate_synthetic(&cfg).unwrap().bags);
    }

    #[test]
    fn single_instance_bags() {
        let cfg = GenConfig {
            bags: 30,
            min_instances: 1,
            max_instances: 1,
            min_positive_fraction: 1.0,
            max_positive_fraction: 1.0,
            ..GenConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert!(ds.bags.iter().all(|b| b.num_instances() == 1));
    }

    #[test]
    fn low_dimension_uses_random_directions() {
        let cfg = GenConfig {
            bags: 10,
            classes: 7,
            dim: 3,
            false_positives: 3,
            ..GenConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert!(ds.bags.iter().all(|b| b.candidates.len() == 4 && b.dim() == 3));
    }
}
