//! Command-line front end: `gen`, `train`, `eval`, `theorem`, `compare` and `replay`.
//!
//! Every command writes into an output directory and finishes with a
//! `manifest.json` that records the resolved config, seeds, input and output
//! SHA-256 digests and timing. Only the manifest carries timestamps, so all
//! other outputs are byte-identical when a command is repeated with the same
//! inputs. `replay` re-executes a manifest and checks the output digests.

mod args;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

pub use args::{
    Cli, Command, CompareArgs, EvalArgs, GenArgs, OutputArgs, ReplayArgs, TheoremArgs, TrainArgs,
};

use crate::calibration::{reliability_csv, PredictionRecord};
use crate::config::{Config, CONFIG_SCHEMA};
use crate::data::{generate_synthetic, load, write_dataset};
use crate::error::{Error, Result};
use crate::model::MiplModel;
use crate::theory::run_sweep;
use crate::training::{evaluate, run_experiment, run_once, Evaluation, ExperimentResult, MeanStd, RunResult};

pub const MANIFEST_SCHEMA: &str = "mipl-cdl/manifest/v1";
pub const METRICS_SCHEMA: &str = "mipl-cdl/metrics/v1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Usage(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::from_toml_str(&read_text(p)?),
        None => Ok(Config::default()),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes to JSON");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: Option<u64>,
    pub run: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

impl Software {
    fn current() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}

/// Everything needed to replay a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub config_schema: String,
    pub software: Software,
    pub command: String,
    /// Resolved configs: one for most commands, arms A and B for `compare`.
    pub configs: Vec<Config>,
    pub seeds: Seeds,
    pub repeats: Option<usize>,
    pub inputs: Vec<FileDigest>,
    /// Output files relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub duration_secs: f64,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("manifest line {}", e.line()), e.to_string()))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::validation(format!("unsupported manifest schema `{}`", m.schema)));
        }
        for cfg in &m.configs {
            cfg.validate()?;
        }
        Ok(m)
    }

    pub fn output(&self, role: &str) -> Option<&FileDigest> {
        self.outputs.iter().find(|d| d.role == role)
    }

    pub fn input(&self, role: &str) -> Option<&FileDigest> {
        self.inputs.iter().find(|d| d.role == role)
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// A fully resolved command, ready to execute.
#[derive(Debug, Clone)]
enum Job {
    Gen { config: Config },
    Train { config: Config, dataset: PathBuf },
    Eval { checkpoint: PathBuf, dataset: PathBuf },
    Theorem { config: Config },
    Compare { a: Config, b: Config, dataset: Option<PathBuf>, repeats: usize },
}

impl Job {
    fn name(&self) -> &'static str {
        match self {
            Job::Gen { .. } => "gen",
            Job::Train { .. } => "train",
            Job::Eval { .. } => "eval",
            Job::Theorem { .. } => "theorem",
            Job::Compare { .. } => "compare",
        }
    }

    fn configs(&self) -> Vec<Config> {
        match self {
            Job::Gen { config } | Job::Train { config, .. } | Job::Theorem { config } => {
                vec![config.resolved()]
            }
            Job::Eval { .. } => Vec::new(),
            Job::Compare { a, b, .. } => vec![a.resolved(), b.resolved()],
        }
    }

    fn seeds(&self) -> Seeds {
        match self {
            Job::Gen { config } => Seeds {
                data: Some(config.data.seed),
                run: None,
            },
            Job::Train { config, .. } => Seeds {
                data: None,
                run: Some(config.train.seed),
            },
            Job::Eval { .. } => Seeds { data: None, run: None },
            Job::Theorem { config } => Seeds {
                data: None,
                run: Some(config.theorem.seed),
            },
            Job::Compare { a, dataset, .. } => Seeds {
                data: dataset.is_none().then_some(a.data.seed),
                run: Some(a.train.seed),
            },
        }
    }

    fn inputs(&self) -> Vec<(&'static str, &Path)> {
        match self {
            Job::Train { dataset, .. } => vec![("dataset", dataset.as_path())],
            Job::Eval { checkpoint, dataset } => {
                vec![("checkpoint", checkpoint.as_path()), ("dataset", dataset.as_path())]
            }
            Job::Compare {
                dataset: Some(d), ..
            } => vec![("dataset", d.as_path())],
            _ => Vec::new(),
        }
    }

    fn output_names(&self) -> &'static [&'static str] {
        match self {
            Job::Gen { .. } => &["dataset.txt"],
            Job::Train { .. } => &[
                "metrics.json",
                "reliability.csv",
                "predictions.csv",
                "checkpoint.json",
                "test_dataset.txt",
            ],
            Job::Eval { .. } => &["metrics.json", "reliability.csv", "predictions.csv"],
            Job::Theorem { .. } => &["theorem.json"],
            Job::Compare { .. } => &["compare.json", "compare.csv"],
        }
    }

    /// Produces the output files in memory.
    fn execute(&self) -> Result<Vec<(&'static str, Vec<u8>)>> {
        match self {
            Job::Gen { config } => {
                let ds = generate_synthetic(&config.data)?;
                Ok(vec![("dataset.txt", write_dataset(&ds).into_bytes())])
            }
            Job::Train { config, dataset } => {
                let ds = load(dataset)?;
                let res = run_once(&ds, &config.model, &config.train, config.split.train_fraction)?;
                Ok(train_outputs(&res))
            }
            Job::Eval { checkpoint, dataset } => {
                let model = MiplModel::from_checkpoint(&read_text(checkpoint)?)?;
                let ds = load(dataset)?;
                let eval = evaluate(&model, &ds)?;
                Ok(vec![
                    ("metrics.json", to_json(&eval_metrics(&eval)).into_bytes()),
                    ("reliability.csv", reliability_csv(&eval.reliability).into_bytes()),
                    ("predictions.csv", predictions_csv(&eval.records).into_bytes()),
                ])
            }
            Job::Theorem { config } => {
                let report = run_sweep(&config.theorem)?;
                Ok(vec![("theorem.json", to_json(&report).into_bytes())])
            }
            Job::Compare {
                a,
                b,
                dataset,
                repeats,
            } => {
                let ds = match dataset {
                    Some(p) => load(p)?,
                    None => generate_synthetic(&a.data)?,
                };
                let ra = run_experiment(&ds, &a.model, &a.train, a.split.train_fraction, *repeats)?;
                let rb = run_experiment(&ds, &b.model, &b.train, b.split.train_fraction, *repeats)?;
                let cmp = Comparison::new(a, b, ra, rb);
                Ok(vec![
                    ("compare.json", to_json(&cmp).into_bytes()),
                    ("compare.csv", cmp.to_csv().into_bytes()),
                ])
            }
        }
    }
}

fn metrics_core(eval: &Evaluation) -> serde_json::Value {
    json!({
        "schema": METRICS_SCHEMA,
        "accuracy": eval.accuracy,
        "ece": eval.ece(),
        "breakdown": eval.breakdown,
        "bags": eval.records.len(),
    })
}

fn eval_metrics(eval: &Evaluation) -> serde_json::Value {
    metrics_core(eval)
}

fn train_outputs(res: &RunResult) -> Vec<(&'static str, Vec<u8>)> {
    let mut metrics = metrics_core(&res.test);
    let extra = json!({
        "train_breakdown": res.train_breakdown,
        "loss_trace": res.trace.epoch_losses,
        "learning_rates": res.trace.learning_rates,
        "temperatures": res.trace.temperatures,
        "weight_violations": res.trace.weight_violations,
        "theorem": res.theorem,
    });
    if let (Some(m), serde_json::Value::Object(e)) = (metrics.as_object_mut(), extra) {
        m.extend(e);
    }
    vec![
        ("metrics.json", to_json(&metrics).into_bytes()),
        ("reliability.csv", reliability_csv(&res.test.reliability).into_bytes()),
        ("predictions.csv", predictions_csv(&res.test.records).into_bytes()),
        ("checkpoint.json", res.model.to_checkpoint().into_bytes()),
        ("test_dataset.txt", write_dataset(&res.test_set).into_bytes()),
    ]
}

/// One row per bag: 1-based labels, confidence, correctness and all class probabilities.
pub fn predictions_csv(records: &[PredictionRecord]) -> String {
    let k = records.first().map_or(0, |r| r.probs.len());
    let mut out = String::from("bag_id,label,predicted,confidence,correct");
    for c in 1..=k {
        out.push_str(&format!(",p{c}"));
    }
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}",
            r.bag_id,
            r.label + 1,
            r.predicted + 1,
            r.confidence,
            u8::from(r.correct())
        ));
        for p in &r.probs {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    out
}

/// Paired A/B results; deltas are B minus A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub arm_a: ArmSummary,
    pub arm_b: ArmSummary,
    pub rows: Vec<PairedRow>,
    pub delta_accuracy: MeanStd,
    pub delta_ece: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub loss: String,
    pub attention: String,
    pub gamma: u32,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub seed: u64,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    pub ece_a: f64,
    pub ece_b: f64,
    pub delta_accuracy: f64,
    pub delta_ece: f64,
}

impl Comparison {
    pub fn new(a: &Config, b: &Config, ra: ExperimentResult, rb: ExperimentResult) -> Self {
        let rows: Vec<PairedRow> = ra
            .repeats
            .iter()
            .zip(&rb.repeats)
            .map(|(x, y)| PairedRow {
                seed: x.seed,
                accuracy_a: x.accuracy,
                accuracy_b: y.accuracy,
                ece_a: x.ece,
                ece_b: y.ece,
                delta_accuracy: y.accuracy - x.accuracy,
                delta_ece: y.ece - x.ece,
            })
            .collect();
        let da: Vec<f64> = rows.iter().map(|r| r.delta_accuracy).collect();
        let de: Vec<f64> = rows.iter().map(|r| r.delta_ece).collect();
        let arm = |c: &Config, r: ExperimentResult| ArmSummary {
            loss: c.train.loss.to_string(),
            attention: c.model.attention.to_string(),
            gamma: c.train.gamma,
            result: r,
        };
        Self {
            arm_a: arm(a, ra),
            arm_b: arm(b, rb),
            delta_accuracy: MeanStd::of(&da),
            delta_ece: MeanStd::of(&de),
            rows,
        }
    }

    /// Paired rows followed by `mean` and `std` aggregate rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,accuracy_a,accuracy_b,ece_a,ece_b,delta_accuracy,delta_ece\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.seed, r.accuracy_a, r.accuracy_b, r.ece_a, r.ece_b, r.delta_accuracy, r.delta_ece
            ));
        }
        let (a, b) = (&self.arm_a.result, &self.arm_b.result);
        out.push_str(&format!(
            "mean,{},{},{},{},{},{}\n",
            a.accuracy.mean, b.accuracy.mean, a.ece.mean, b.ece.mean, self.delta_accuracy.mean, self.delta_ece.mean
        ));
        out.push_str(&format!(
            "std,{},{},{},{},{},{}\n",
            a.accuracy.std, b.accuracy.std, a.ece.std, b.ece.std, self.delta_accuracy.std, self.delta_ece.std
        ));
        out
    }

    pub fn summary(&self) -> String {
        let line = |name: &str, arm: &ArmSummary| {
            format!(
                "{name} ({} / {}, gamma {}): accuracy {:.4} ± {:.4}, ECE {:.4} ± {:.4}",
                arm.loss,
                arm.attention,
                arm.gamma,
                arm.result.accuracy.mean,
                arm.result.accuracy.std,
                arm.result.ece.mean,
                arm.result.ece.std
            )
        };
        format!(
            "{}\n{}\ndelta (B - A): accuracy {:+.4}, ECE {:+.4}",
            line("A", &self.arm_a),
            line("B", &self.arm_b),
            self.delta_accuracy.mean,
            self.delta_ece.mean
        )
    }
}

/// Result of running one command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: Manifest,
    pub out_dir: PathBuf,
}

fn guard_outputs(out: &Path, names: &[&str], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for name in names.iter().chain([&MANIFEST_FILE, &DIAGNOSTICS_FILE]) {
        let p = out.join(name);
        if p.exists() {
            return Err(Error::Usage(format!(
                "{} already exists; pass --force to overwrite",
                p.display()
            )));
        }
    }
    Ok(())
}

fn digest_inputs(job: &Job) -> Result<Vec<FileDigest>> {
    job.inputs()
        .into_iter()
        .map(|(role, path)| {
            Ok(FileDigest {
                role: role.to_owned(),
                path: path.to_path_buf(),
                sha256: sha256_hex(&read_bytes(path)?),
            })
        })
        .collect()
}

fn run_job(job: &Job, output: &OutputArgs) -> Result<Outcome> {
    let out = &output.out;
    guard_outputs(out, job.output_names(), output.force)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let started_unix = unix_now();
    let clock = Instant::now();
    let inputs = digest_inputs(job)?;
    let files = match job.execute() {
        Ok(files) => files,
        Err(err) => {
            let diag = json!({
                "command": job.name(),
                "error": err.to_string(),
                "configs": job.configs(),
                "inputs": inputs,
            });
            write_atomic(&out.join(DIAGNOSTICS_FILE), to_json(&diag).as_bytes())?;
            return Err(err);
        }
    };
    let stale = out.join(DIAGNOSTICS_FILE);
    if stale.exists() {
        fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
    }
    let mut outputs = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        write_atomic(&out.join(name), bytes)?;
        outputs.push(FileDigest {
            role: (*name).to_owned(),
            path: PathBuf::from(name),
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.to_owned(),
        config_schema: CONFIG_SCHEMA.to_owned(),
        software: Software::current(),
        command: job.name().to_owned(),
        configs: job.configs(),
        seeds: job.seeds(),
        repeats: match job {
            Job::Compare { repeats, .. } => Some(*repeats),
            _ => None,
        },
        inputs,
        outputs,
        started_unix,
        finished_unix: unix_now(),
        duration_secs: clock.elapsed().as_secs_f64(),
    };
    write_atomic(&out.join(MANIFEST_FILE), to_json(&manifest).as_bytes())?;
    Ok(Outcome {
        manifest,
        out_dir: out.clone(),
    })
}

pub fn cmd_gen(args: &GenArgs) -> Result<Outcome> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.data.seed = seed;
    }
    config.validate()?;
    run_job(&Job::Gen { config }, &args.output)
}

pub fn cmd_train(args: &TrainArgs) -> Result<Outcome> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.train.seed = seed;
    }
    config.validate()?;
    run_job(
        &Job::Train {
            config,
            dataset: args.dataset.clone(),
        },
        &args.output,
    )
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Outcome> {
    run_job(
        &Job::Eval {
            checkpoint: args.checkpoint.clone(),
            dataset: args.dataset.clone(),
        },
        &args.output,
    )
}

pub fn cmd_theorem(args: &TheoremArgs) -> Result<Outcome> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.theorem.seed = seed;
    }
    config.validate()?;
    run_job(&Job::Theorem { config }, &args.output)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Outcome> {
    let [pa, pb] = args.config.as_slice() else {
        return Err(Error::Usage(format!(
            "compare needs exactly two --config files, got {}",
            args.config.len()
        )));
    };
    if args.repeats == 0 {
        return Err(Error::config("repeats must be >= 1"));
    }
    let mut a = load_config(Some(pa))?;
    let mut b = load_config(Some(pb))?;
    let seed = args.seed.unwrap_or(a.train.seed);
    a.train.seed = seed;
    b.train.seed = seed;
    a.validate()?;
    b.validate()?;
    if args.dataset.is_none() && a.data != b.data {
        return Err(Error::config("compare arms must share the [data] section"));
    }
    if a.split != b.split {
        return Err(Error::config("compare arms must share the [split] section"));
    }
    run_job(
        &Job::Compare {
            a,
            b,
            dataset: args.dataset.clone(),
            repeats: args.repeats,
        },
        &args.output,
    )
}

/// Outcome of a replay: the fresh run plus any digest mismatches.
#[derive(Debug, Clone)]
pub struct Replay {
    pub outcome: Outcome,
    /// `(role, recorded digest, replayed digest)` for differing outputs.
    pub mismatches: Vec<(String, String, String)>,
}

impl Replay {
    pub fn identical(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-executes the command recorded in a manifest into a new output directory.
pub fn cmd_replay(args: &ReplayArgs) -> Result<Replay> {
    let recorded = Manifest::parse(&read_text(&args.manifest)?)?;
    let config = |i: usize| {
        recorded
            .configs
            .get(i)
            .cloned()
            .ok_or_else(|| Error::validation(format!("manifest lacks config #{}", i + 1)))
    };
    let input = |role: &str| -> Result<PathBuf> {
        let d = recorded
            .input(role)
            .ok_or_else(|| Error::validation(format!("manifest lacks input `{role}`")))?;
        let actual = sha256_hex(&read_bytes(&d.path)?);
        if actual != d.sha256 {
            return Err(Error::validation(format!(
                "input {} changed since the recorded run (sha256 {actual}, recorded {})",
                d.path.display(),
                d.sha256
            )));
        }
        Ok(d.path.clone())
    };
    let job = match recorded.command.as_str() {
        "gen" => Job::Gen { config: config(0)? },
        "train" => Job::Train {
            config: config(0)?,
            dataset: input("dataset")?,
        },
        "eval" => Job::Eval {
            checkpoint: input("checkpoint")?,
            dataset: input("dataset")?,
        },
        "theorem" => Job::Theorem { config: config(0)? },
        "compare" => Job::Compare {
            a: config(0)?,
            b: config(1)?,
            dataset: match recorded.input("dataset") {
                Some(_) => Some(input("dataset")?),
                None => None,
            },
            repeats: recorded
                .repeats
                .ok_or_else(|| Error::validation("compare manifest lacks repeats"))?,
        },
        other => return Err(Error::validation(format!("unknown command `{other}` in manifest"))),
    };
    let outcome = run_job(&job, &args.output)?;
    let mut mismatches = Vec::new();
    for old in &recorded.outputs {
        let new = outcome
            .manifest
            .output(&old.role)
            .map_or_else(|| "missing".to_owned(), |d| d.sha256.clone());
        if new != old.sha256 {
            mismatches.push((old.role.clone(), old.sha256.clone(), new));
        }
    }
    Ok(Replay { outcome, mismatches })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Usage(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let report = |o: &Outcome| {
        for d in &o.manifest.outputs {
            println!("wrote {} ({})", o.out_dir.join(&d.path).display(), &d.sha256[..16]);
        }
        println!("wrote {}", o.out_dir.join(MANIFEST_FILE).display());
    };
    match &cli.command {
        Command::Gen(a) => report(&cmd_gen(a)?),
        Command::Train(a) => {
            let o = cmd_train(a)?;
            report(&o);
            print_metrics(&o.out_dir)?;
        }
        Command::Eval(a) => {
            let o = cmd_eval(a)?;
            report(&o);
            print_metrics(&o.out_dir)?;
        }
        Command::Theorem(a) => {
            let o = cmd_theorem(a)?;
            report(&o);
            let r: crate::theory::SweepReport =
                serde_json::from_str(&read_text(&o.out_dir.join("theorem.json"))?)
                    .map_err(|e| Error::parse("theorem.json", e.to_string()))?;
            println!(
                "{} tuples, {} checked, {} violations, max shortfall {:e}, CN Φ-condition rate {:.4}",
                r.tuples, r.checked, r.violations, r.max_shortfall, r.phi_condition_cn.rate
            );
        }
        Command::Compare(a) => {
            let o = cmd_compare(a)?;
            report(&o);
            let c: Comparison = serde_json::from_str(&read_text(&o.out_dir.join("compare.json"))?)
                .map_err(|e| Error::parse("compare.json", e.to_string()))?;
            println!("{}", c.summary());
        }
        Command::Replay(a) => {
            let r = cmd_replay(a)?;
            report(&r.outcome);
            if r.identical() {
                println!("replay identical: all output digests match");
            } else {
                for (role, old, new) in &r.mismatches {
                    eprintln!("mismatch in {role}: recorded {old}, replayed {new}");
                }
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn print_metrics(dir: &Path) -> Result<()> {
    let v: serde_json::Value = serde_json::from_str(&read_text(&dir.join("metrics.json"))?)
        .map_err(|e| Error::parse("metrics.json", e.to_string()))?;
    println!("accuracy {}  ECE {}", v["accuracy"], v["ece"]);
    Ok(())
}
