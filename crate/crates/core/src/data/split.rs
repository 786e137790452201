use rand::seq::SliceRandom;

use super::MiplDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Class-stratified train/test partition.
///
/// The train side receives `round(train_fraction * m)` bags, allocated to
/// classes by largest remainder so every class keeps its proportion within
/// one bag. Both sides keep the original bag order.
pub fn split(
    dataset: &MiplDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(MiplDataset, MiplDataset)> {
    let m = dataset.len();
    if m < 10 {
        return Err(Error::config(format!("split needs at least 10 bags, got {m}")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }

    let k = dataset.num_classes;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, bag) in dataset.bags.iter().enumerate() {
        by_class[bag.label].push(i);
    }

    let target = (train_fraction * m as f64).round() as usize;
    let exact: Vec<f64> = by_class
        .iter()
        .map(|idx| idx.len() as f64 * train_fraction)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..k).collect();
    // Largest fractional remainder first; lower class index breaks ties.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut missing = target.saturating_sub(quota.iter().sum());
    for &c in order.iter().cycle().take(k * 2) {
        if missing == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            missing -= 1;
        }
    }

    let mut rng = stream(seed, Stream::Split);
    let mut in_train = vec![false; m];
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(quota[c]) {
            in_train[i] = true;
        }
    }

    let (train, test): (Vec<_>, Vec<_>) = dataset
        .bags
        .iter()
        .zip(&in_train)
        .partition(|(_, &t)| t);
    Ok((
        dataset.with_bags(train.into_iter().map(|(b, _)| b.clone()).collect()),
        dataset.with_bags(test.into_iter().map(|(b, _)| b.clone()).collect()),
    ))
}
