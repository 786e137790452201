//! Line-oriented dataset text format.
//!
//! ```text
//! mipl-dataset v1
//! classes 5
//! dim 3
//! seed 42
//! false_positives 1
//! positive_ratio 0.08
//! bags 2
//! bag 0 3 1,3 2 0.5 -1 2.25 0 0 1
//! bag 1 2 2,5 1 0.1 0.2 0.3
//! ```
//!
//! A bag line is `bag <id> <label> <candidates> <n> <n*d values row-major>`.
//! Labels are 1-based. Optional header values may be `-`. Numbers are written
//! with Rust's shortest round-trip formatting, so save/load is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Bag, DatasetMeta, MiplDataset};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &str = "mipl-dataset v1";

pub fn write_dataset(ds: &MiplDataset) -> String {
    let mut out = String::new();
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".to_owned());
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "classes {}", ds.num_classes);
    let _ = writeln!(out, "dim {}", ds.dim);
    let _ = writeln!(out, "seed {}", opt(ds.meta.seed.map(|s| s.to_string())));
    let _ = writeln!(
        out,
        "false_positives {}",
        opt(ds.meta.false_positives.map(|s| s.to_string()))
    );
    let _ = writeln!(
        out,
        "positive_ratio {}",
        opt(ds.meta.positive_ratio.map(|s| s.to_string()))
    );
    let _ = writeln!(out, "bags {}", ds.bags.len());
    for bag in &ds.bags {
        let cands: Vec<String> = bag.candidates.iter().map(|c| (c + 1).to_string()).collect();
        let _ = write!(
            out,
            "bag {} {} {} {}",
            bag.id,
            bag.label + 1,
            cands.join(","),
            bag.num_instances()
        );
        for v in bag.instances.as_slice() {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

fn header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, &'a str)> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::parse("end of file", format!("missing `{key}` header")))?;
    match line.split_once(' ') {
        Some((k, v)) if k == key => Ok((no, v.trim())),
        _ => Err(Error::parse(
            format!("line {no}"),
            format!("expected `{key} <value>`"),
        )),
    }
}

fn num<T: std::str::FromStr>(tok: &str, record: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(record, format!("invalid {what} `{tok}`")))
}

fn opt_num<T: std::str::FromStr>(tok: &str, record: &str, what: &str) -> Result<Option<T>> {
    if tok == "-" {
        Ok(None)
    } else {
        num(tok, record, what).map(Some)
    }
}

fn parse_label(tok: &str, record: &str) -> Result<usize> {
    let l: usize = num(tok, record, "label")?;
    if l == 0 {
        return Err(Error::validation(format!("{record}: labels are 1-based, got 0")));
    }
    Ok(l - 1)
}

/// Parses and validates a dataset. Never panics on arbitrary input.
pub fn parse_dataset(text: &str) -> Result<MiplDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(Error::parse("line 1", format!("expected `{MAGIC}`"))),
    }
    let (no, v) = header(&mut lines, "classes")?;
    let classes: usize = num(v, &format!("line {no}"), "class count")?;
    let (no, v) = header(&mut lines, "dim")?;
    let dim: usize = num(v, &format!("line {no}"), "dimension")?;
    let (no, v) = header(&mut lines, "seed")?;
    let seed = opt_num(v, &format!("line {no}"), "seed")?;
    let (no, v) = header(&mut lines, "false_positives")?;
    let false_positives = opt_num(v, &format!("line {no}"), "false-positive count")?;
    let (no, v) = header(&mut lines, "positive_ratio")?;
    let positive_ratio: Option<f64> = opt_num(v, &format!("line {no}"), "positive ratio")?;
    let (no, v) = header(&mut lines, "bags")?;
    let declared: usize = num(v, &format!("line {no}"), "bag count")?;
    if classes == 0 || dim == 0 {
        return Err(Error::validation("classes and dim must be positive"));
    }

    let mut bags = Vec::new();
    for (no, line) in lines {
        let mut toks = line.split_ascii_whitespace();
        let record = format!("line {no}");
        if toks.next() != Some("bag") {
            return Err(Error::parse(record, "expected a `bag` record"));
        }
        let mut field = |what: &str| {
            toks.next()
                .ok_or_else(|| Error::parse(format!("line {no}"), format!("missing {what}")))
        };
        let id: u64 = num(field("bag id")?, &record, "bag id")?;
        let record = format!("line {no} (bag {id})");
        let label = parse_label(field("label")?, &record)?;
        let candidates = field("candidate set")?
            .split(',')
            .map(|t| parse_label(t, &record))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = num(field("instance count")?, &record, "instance count")?;
        let values = toks
            .map(|t| {
                let v: f64 = num(t, &record, "feature value")?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::parse(record.clone(), format!("non-finite value `{t}`")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = n.checked_mul(dim).ok_or_else(|| {
            Error::validation(format!("{record}: instance count {n} too large"))
        })?;
        if values.len() != expected {
            return Err(Error::validation(format!(
                "{record}: {} values for {n} instances of dimension {dim}",
                values.len()
            )));
        }
        let mut sorted = candidates.clone();
        sorted.sort_unstable();
        if sorted != candidates {
            return Err(Error::validation(format!(
                "{record}: candidate labels must be strictly increasing"
            )));
        }
        let bag = Bag {
            id,
            instances: Matrix::from_vec(n, dim, values)?,
            candidates,
            label,
        };
        bag.validate(classes, dim)
            .map_err(|e| Error::validation(format!("{record}: {e}")))?;
        bags.push(bag);
    }
    if bags.len() != declared {
        return Err(Error::validation(format!(
            "header declares {declared} bags, file has {}",
            bags.len()
        )));
    }
    let meta = DatasetMeta {
        seed,
        false_positives,
        positive_ratio,
    };
    MiplDataset::new(bags, classes, dim, meta)
}

/// Writes atomically: a temporary sibling file is renamed into place.
pub fn save(ds: &MiplDataset, path: &Path) -> Result<()> {
    crate::cli::write_atomic(path, write_dataset(ds).as_bytes())
}

pub fn load(path: &Path) -> Result<MiplDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}
