//! Expected calibration error, reliability bins and probability breakdowns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::argmax;

/// Default number of equal-width confidence bins.
pub const DEFAULT_BINS: usize = 15;

/// One evaluated bag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub bag_id: u64,
    pub probs: Vec<f64>,
    /// Argmax over all classes, lowest index on ties.
    pub predicted: usize,
    /// `probs[predicted]`.
    pub confidence: f64,
    pub label: usize,
    pub candidates: Vec<usize>,
}

impl PredictionRecord {
    pub fn new(bag_id: u64, probs: Vec<f64>, label: usize, candidates: Vec<usize>) -> Result<Self> {
        let predicted = argmax(&probs).ok_or_else(|| Error::validation("empty probability vector"))?;
        if label >= probs.len() {
            return Err(Error::validation(format!(
                "label {} outside {} classes",
                label + 1,
                probs.len()
            )));
        }
        Ok(Self {
            bag_id,
            confidence: probs[predicted],
            predicted,
            probs,
            label,
            candidates,
        })
    }

    pub fn correct(&self) -> bool {
        self.predicted == self.label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Mean correctness; 0 for empty bins.
    pub accuracy: f64,
    /// Mean confidence; 0 for empty bins.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub bins: Vec<BinStats>,
    pub total: usize,
    pub ece: f64,
}

/// 0-based bin for a confidence: bin `r` covers `(r/R, (r+1)/R]`, and 0 falls
/// into the first bin. Edges are compared against `r as f64 / R as f64`, so a
/// confidence equal to an edge always lands in the bin it closes.
pub fn bin_index(confidence: f64, bins: usize) -> usize {
    let edge = |r: usize| r as f64 / bins as f64;
    let mut r = ((confidence * bins as f64).ceil() as usize).clamp(1, bins);
    while r > 1 && confidence <= edge(r - 1) {
        r -= 1;
    }
    while r < bins && confidence > edge(r) {
        r += 1;
    }
    r - 1
}

fn report_from_sums(bins: usize, counts: &[usize], correct: &[f64], conf: &[f64]) -> ReliabilityReport {
    let total: usize = counts.iter().sum();
    let mut ece = 0.0;
    let stats = (0..bins)
        .map(|r| {
            let n = counts[r];
            let (accuracy, confidence) = if n == 0 {
                (0.0, 0.0)
            } else {
                (correct[r] / n as f64, conf[r] / n as f64)
            };
            if n > 0 {
                ece += n as f64 / total as f64 * (accuracy - confidence).abs();
            }
            BinStats {
                lower: r as f64 / bins as f64,
                upper: (r + 1) as f64 / bins as f64,
                count: n,
                accuracy,
                confidence,
            }
        })
        .collect();
    ReliabilityReport {
        bins: stats,
        total,
        ece,
    }
}

/// Binned ECE over `(confidence, correct)` pairs.
pub fn ece_from_pairs(pairs: impl IntoIterator<Item = (f64, bool)>, bins: usize) -> Result<ReliabilityReport> {
    if bins == 0 {
        return Err(Error::config("at least one bin is required"));
    }
    let mut counts = vec![0usize; bins];
    let mut correct = vec![0.0; bins];
    let mut conf = vec![0.0; bins];
    for (c, ok) in pairs {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::validation(format!("confidence {c} outside [0, 1]")));
        }
        let r = bin_index(c, bins);
        counts[r] += 1;
        conf[r] += c;
        if ok {
            correct[r] += 1.0;
        }
    }
    if counts.iter().all(|&n| n == 0) {
        return Err(Error::Usage("ECE of an empty record set".into()));
    }
    Ok(report_from_sums(bins, &counts, &correct, &conf))
}

/// Expected calibration error with `bins` equal-width bins.
pub fn ece(records: &[PredictionRecord], bins: usize) -> Result<ReliabilityReport> {
    ece_from_pairs(records.iter().map(|r| (r.confidence, r.correct())), bins)
}

/// Fraction of records whose prediction matches the true label.
pub fn accuracy(records: &[PredictionRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.correct()).count() as f64 / records.len() as f64
}

/// Mean predicted probability on true labels, false-positive candidates and
/// non-candidates. Empty categories are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBreakdown {
    #[serde(rename = "true")]
    pub true_label: Option<f64>,
    #[serde(rename = "fp")]
    pub false_positive: Option<f64>,
    #[serde(rename = "nc")]
    pub non_candidate: Option<f64>,
}

pub fn probability_breakdown(records: &[PredictionRecord]) -> ProbabilityBreakdown {
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for r in records {
        for (c, &p) in r.probs.iter().enumerate() {
            let slot = if c == r.label {
                0
            } else if r.candidates.contains(&c) {
                1
            } else {
                2
            };
            sums[slot] += p;
            counts[slot] += 1;
        }
    }
    let mean = |i: usize| (counts[i] > 0).then(|| sums[i] / counts[i] as f64);
    ProbabilityBreakdown {
        true_label: mean(0),
        false_positive: mean(1),
        non_candidate: mean(2),
    }
}

pub const RELIABILITY_HEADER: &str = "bin,lower,upper,count,accuracy,confidence";

/// One row per bin, ordered by bin index. Floats use shortest round-trip formatting.
pub fn reliability_csv(report: &ReliabilityReport) -> String {
    let mut out = String::from(RELIABILITY_HEADER);
    out.push('\n');
    for (i, b) in report.bins.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i + 1,
            b.lower,
            b.upper,
            b.count,
            b.accuracy,
            b.confidence
        ));
    }
    out
}

/// Parses [`reliability_csv`] output and recomputes the ECE from the rows.
pub fn parse_reliability_csv(text: &str) -> Result<ReliabilityReport> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RELIABILITY_HEADER => {}
        _ => return Err(Error::parse("line 1", format!("expected header `{RELIABILITY_HEADER}`"))),
    }
    let mut bins = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("line {}", i + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(Error::parse(at(), format!("expected 6 fields, found {}", fields.len())));
        }
        let index: usize = fields[0].parse().map_err(|_| Error::parse(at(), "bad bin index"))?;
        if index != bins.len() + 1 {
            return Err(Error::parse(at(), format!("bin {index} out of order")));
        }
        let float = |s: &str, name: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| Error::parse(at(), format!("bad {name} `{s}`")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::parse(at(), format!("{name} {v} outside [0, 1]")));
            }
            Ok(v)
        };
        let count: usize = fields[3].parse().map_err(|_| Error::parse(at(), "bad count"))?;
        bins.push(BinStats {
            lower: float(fields[1], "lower edge")?,
            upper: float(fields[2], "upper edge")?,
            count,
            accuracy: float(fields[4], "accuracy")?,
            confidence: float(fields[5], "confidence")?,
        });
    }
    if bins.is_empty() {
        return Err(Error::parse("end of input", "no bins"));
    }
    let total = bins
        .iter()
        .try_fold(0usize, |acc, b| acc.checked_add(b.count))
        .ok_or_else(|| Error::parse("counts", "total overflows"))?;
    let ece = if total == 0 {
        0.0
    } else {
        bins.iter()
            .filter(|b| b.count > 0)
            .map(|b| b.count as f64 / total as f64 * (b.accuracy - b.confidence).abs())
            .sum()
    };
    Ok(ReliabilityReport { bins, total, ece })
}
