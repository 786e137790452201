//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines always
//! appear in the test output. Exits non-zero if any criterion fails.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mipl_cdl::calibration::{ece, ece_from_pairs, PredictionRecord};
use mipl_cdl::cli::{self, GenArgs, OutputArgs, ReplayArgs};
use mipl_cdl::data::{generate_synthetic, split, GenConfig, MiplDataset};
use mipl_cdl::losses::{loss_on_tape, LossConfig, LossKind};
use mipl_cdl::model::{
    attention_dam, attention_mam, attention_sam, AttentionConfig, AttentionKind, MiplModel, ModelConfig,
};
use mipl_cdl::numerics::{gradient_check, GradEntry, Matrix, Tape};
use mipl_cdl::theory::{run_sweep, SweepConfig};
use mipl_cdl::training::{run_experiment, train, ExperimentResult, ModelSection, TrainConfig};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let took = start.elapsed();
    (took < limit, format!("{:.1}s of {}s budget", took.as_secs_f64(), limit.as_secs()))
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

// ---------------------------------------------------------------- 1

/// Gradient magnitude above which central differences with step 1e-5 resolve
/// the derivative far beyond round-off (about `eps * |loss| / step`, 1e-11).
const RESOLVED_MAGNITUDE: f64 = 1e-6;

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let kinds = [AttentionKind::Dam, AttentionKind::Sam, AttentionKind::Mam];
    let mut worst: f64 = 0.0;
    let mut worst_case = String::new();
    let mut checks = 0;
    let mut failures = [0usize; 3];
    let mut resolved_entries = 0usize;
    let mut resolved_worst: f64 = 0.0;
    let mut unresolved_abs_worst: f64 = 0.0;
    let (mut refined_total, mut refined_agree, mut refined_worst) = (0usize, 0usize, 0.0f64);
    for loss in LossKind::ALL {
        for (ki, kind) in kinds.into_iter().enumerate() {
            for seed in 0..100u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + kind as u64 * 7 + loss as u64 * 1009);
                let k = rng.gen_range(2..=5);
                let n = rng.gen_range(1..=8);
                let d = rng.gen_range(1..=6);
                let cfg = ModelConfig {
                    input_dim: d,
                    extractor: vec![rng.gen_range(2..=6)],
                    scorer_hidden: rng.gen_range(2..=4),
                    num_classes: k,
                    attention: AttentionConfig {
                        kind,
                        sam_scale: rng.gen_range(0.5..8.0),
                        tau_init: 1.0,
                        tau_min: 0.1,
                    },
                };
                let mut model = MiplModel::new(cfg, seed).unwrap();
                for _ in 0..rng.gen_range(0..60) {
                    model.anneal();
                }
                let x = normal_matrix(&mut rng, n, d);
                let size = rng.gen_range(1..=k);
                let mut cands = index::sample(&mut rng, k, size).into_vec();
                cands.sort_unstable();
                let mut w = vec![0.0; k];
                for (&c, v) in cands.iter().zip(dirichlet(&mut rng, size)) {
                    w[c] = v;
                }
                let loss_cfg = LossConfig::new(loss, rng.gen_range(1..=3));
                let check = |step: f64| {
                    let mut store = model.params().clone();
                    gradient_check(&mut store, step, |tape: &mut Tape, vars| {
                        let f = model.forward(tape, vars, &x)?;
                        loss_on_tape(tape, f.probs, &w, &cands, &loss_cfg)
                    })
                    .unwrap()
                };
                let report = check(1e-5);
                let mut resolved_failing = Vec::new();
                checks += 1;
                if report.max_relative_error >= 1e-4 {
                    failures[ki] += 1;
                }
                for e in &report.entries {
                    if e.magnitude() >= RESOLVED_MAGNITUDE {
                        resolved_entries += 1;
                        resolved_worst = resolved_worst.max(e.relative_error());
                        if e.relative_error() >= 1e-4 {
                            resolved_failing.push((e.param, e.index));
                        }
                    } else if e.relative_error() >= 1e-4 {
                        unresolved_abs_worst = unresolved_abs_worst.max(e.absolute_error());
                    }
                }
                if !resolved_failing.is_empty() {
                    // Re-check with a smaller step, which stops crossing a ReLU kink
                    // lying within 1e-5 of the evaluation point, and with a larger
                    // one, which cuts round-off tenfold; keep the better agreement.
                    let refined = [check(1e-6), check(1e-4)];
                    for (param, index) in resolved_failing {
                        let rel = refined
                            .iter()
                            .map(|r| r.entries.iter().find(|e| e.param == param && e.index == index).unwrap())
                            .map(GradEntry::relative_error)
                            .fold(f64::INFINITY, f64::min);
                        refined_total += 1;
                        if rel < 1e-4 {
                            refined_agree += 1;
                        }
                        refined_worst = refined_worst.max(rel);
                    }
                }
                if report.max_relative_error > worst {
                    worst = report.max_relative_error;
                    worst_case = format!(
                        "{loss}/{kind} seed {seed}: {} [{}] analytic {:e} numeric {:e}",
                        report.worst_param, report.worst_index, report.analytic, report.numeric
                    );
                }
            }
        }
    }
    let (fast, t) = within(Duration::from_secs(60), start);
    let total: usize = failures.iter().sum();
    Verdict::new(
        total == 0 && fast,
        format!(
            "{checks} checks, {total} with relative error >= 1e-4 (dam {}, sam {}, mam {}), worst {worst:.2e} \
             ({worst_case}); entries with |gradient| >= {RESOLVED_MAGNITUDE:e}: {resolved_entries}, worst \
             relative error {resolved_worst:.2e}; of those failing, {refined_agree}/{refined_total} agree at \
             step 1e-6 or 1e-4 (worst {refined_worst:.2e}); failing entries below that magnitude differ by at most \
             {unresolved_abs_worst:.2e} absolute (finite-difference round-off); {t}",
            failures[0], failures[1], failures[2]
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Draws enough tuples that at least 10^4 satisfy the admissibility conditions.
const DRAWN_TUPLES: usize = 12_000;

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let general = run_sweep(&SweepConfig {
        tuples: DRAWN_TUPLES,
        seed: 11,
        ..SweepConfig::default()
    })
    .unwrap();
    let gamma1 = run_sweep(&SweepConfig {
        tuples: DRAWN_TUPLES,
        seed: 12,
        gamma: Some(1),
        ..SweepConfig::default()
    })
    .unwrap();
    let (fast, t) = within(Duration::from_secs(30), start);
    let pass = general.violations == 0
        && general.max_shortfall <= 1e-9
        && general.checked >= 10_000
        && gamma1.gamma1_checked >= 10_000
        && gamma1.violations == 0
        && gamma1.max_gamma1_gap < 1e-12
        && general.max_decomposition_error < 1e-12
        && gamma1.max_decomposition_error < 1e-12
        && fast;
    Verdict::new(
        pass,
        format!(
            "{} of {DRAWN_TUPLES} drawn tuples admissible, {} violations, max shortfall {:.2e}; gamma=1 max gap {:.2e} over {}; \
             KL+H error {:.2e}; {t}",
            general.checked,
            general.violations,
            general.max_shortfall,
            gamma1.max_gamma1_gap,
            gamma1.gamma1_checked,
            general.max_decomposition_error.max(gamma1.max_decomposition_error)
        ),
    )
}

// ---------------------------------------------------------------- 3

/// Independent oracle: explicit interval membership and a direct sum of
/// per-record signed gaps within each bin.
fn brute_force_ece(pairs: &[(f64, bool)], bins: usize) -> f64 {
    let m = pairs.len() as f64;
    let mut total = 0.0;
    for r in 1..=bins {
        let lo = (r - 1) as f64 / bins as f64;
        let hi = r as f64 / bins as f64;
        let gap: f64 = pairs
            .iter()
            .filter(|(c, _)| (*c > lo && *c <= hi) || (r == 1 && *c == 0.0))
            .map(|(c, ok)| f64::from(u8::from(*ok)) - c)
            .sum();
        total += gap.abs() / m;
    }
    total
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for set in 0..100 {
        let m = rng.gen_range(1..=10_000);
        let pairs: Vec<(f64, bool)> = (0..m)
            .map(|i| {
                // every tenth confidence sits exactly on a bin edge
                let c = if i % 10 == 0 {
                    rng.gen_range(0..=15) as f64 / 15.0
                } else {
                    rng.gen::<f64>()
                };
                (c, rng.gen_bool(0.5 + 0.4 * ((set % 3) as f64 - 1.0)))
            })
            .collect();
        let binned = ece_from_pairs(pairs.iter().copied(), 15).unwrap().ece;
        worst = worst.max((binned - brute_force_ece(&pairs, 15)).abs());
    }
    let records: Vec<PredictionRecord> = [(0.3, true), (0.4, false), (0.9, true), (0.9, true)]
        .iter()
        .enumerate()
        .map(|(i, &(c, ok))| {
            let probs = vec![c, 1.0 - c];
            let predicted = if c >= 0.5 { 0 } else { 1 };
            let label = if ok { predicted } else { 1 - predicted };
            PredictionRecord::new(i as u64, probs, label, vec![label]).unwrap()
        })
        .collect();
    // 0.3 and 0.4 are not the max of (c, 1 - c); use the pair API for the worked example.
    let example = ece_from_pairs([(0.3, true), (0.4, false), (0.9, true), (0.9, true)], 2)
        .unwrap()
        .ece;
    let record_api = ece(&records, 2).unwrap();
    let perfect = {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let pairs: Vec<(f64, bool)> = (0..100_000)
            .map(|_| {
                let c: f64 = rng.gen_range(0.2..=1.0);
                (c, rng.gen_bool(c))
            })
            .collect();
        ece_from_pairs(pairs, 15).unwrap().ece
    };
    Verdict::new(
        worst <= 1e-12 && example == 0.125 && record_api.total == 4 && perfect < 0.01,
        format!(
            "max |binned - oracle| {worst:.2e} over 100 sets; worked example {example}; \
             calibrated predictor ECE {perfect:.4}"
        ),
    )
}

// ---------------------------------------------------------------- 4

fn tiny_config(kind: AttentionKind, epochs: usize) -> (ModelSection, TrainConfig) {
    (
        ModelSection {
            extractor: vec![8],
            scorer_hidden: 4,
            attention: kind,
            ..ModelSection::default()
        },
        TrainConfig {
            epochs,
            batch_size: 8,
            lr: 0.01,
            seed: 4,
            ..TrainConfig::default()
        },
    )
}

fn small_dataset(seed: u64) -> MiplDataset {
    generate_synthetic(&GenConfig {
        bags: 80,
        classes: 4,
        dim: 5,
        min_instances: 2,
        max_instances: 8,
        min_positive_fraction: 0.3,
        max_positive_fraction: 0.6,
        false_positives: 2,
        separation: 3.0,
        noise: 1.0,
        seed,
    })
    .unwrap()
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut simplex_err: f64 = 0.0;
    let mut negative = false;
    let mut mam_err: f64 = 0.0;
    let mut mam_checked = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=20);
        let scores: Vec<f64> = (0..n).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        for w in [attention_dam(&scores).unwrap(), attention_sam(&scores, rng.gen_range(0.1..100.0)).unwrap()] {
            simplex_err = simplex_err.max((w.iter().sum::<f64>() - 1.0).abs());
            negative |= w.iter().any(|&v| v < 0.0);
        }
        if n >= 2 {
            let a = attention_mam(&scores, rng.gen_range(0.1..1.0)).unwrap();
            if a.iter().any(|&v| v != 0.0) {
                let mean = a.iter().sum::<f64>() / n as f64;
                let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                mam_err = mam_err.max(mean.abs()).max((var.sqrt() - 1.0).abs());
                mam_checked += 1;
            }
        }
    }
    let ds = small_dataset(40);
    let (train_set, _) = split(&ds, 0.7, 4).unwrap();
    let (section, cfg) = tiny_config(AttentionKind::Mam, 60);
    let mut model = MiplModel::new(section.build(ds.dim, ds.num_classes), 4).unwrap();
    let outcome = train(&train_set, &mut model, &cfg).unwrap();
    let temps = &outcome.trace.temperatures;
    let temps_ok = temps.windows(2).all(|p| p[1] <= p[0])
        && temps.iter().all(|&t| t >= 0.1)
        && temps.last() == Some(&0.1);
    let weights_ok = outcome.trace.weight_violations.iter().all(|&v| v <= 1e-9)
        && outcome.trace.weight_violations.len() == 60;
    let exact_zero = train_set.bags.iter().enumerate().all(|(i, bag)| {
        bag.non_candidates(ds.num_classes)
            .into_iter()
            .all(|c| outcome.label_weights.get(i)[c] == 0.0)
    });
    Verdict::new(
        simplex_err <= 1e-12 && !negative && mam_err <= 1e-9 && mam_checked > 500 && temps_ok && weights_ok && exact_zero,
        format!(
            "DAM/SAM sum error {simplex_err:.1e}, negatives {negative}; MAM moment error {mam_err:.1e} \
             over {mam_checked} bags; temperatures monotone to floor {temps_ok}; \
             max epoch simplex violation {:.1e}; non-candidates exactly 0 {exact_zero}",
            outcome.trace.weight_violations.iter().copied().fold(0.0, f64::max)
        ),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Verdict {
    let ds = small_dataset(50);
    let (train_set, _) = split(&ds, 0.7, 5).unwrap();
    let mut identical = true;
    for kind in [AttentionKind::Dam, AttentionKind::Sam, AttentionKind::Mam] {
        let (section, mdl_cfg) = tiny_config(kind, 12);
        let mdl_cfg = TrainConfig {
            loss: LossKind::Mdl,
            ..mdl_cfg
        };
        let mut base = MiplModel::new(section.build(ds.dim, ds.num_classes), 5).unwrap();
        let reference = train(&train_set, &mut base, &mdl_cfg).unwrap();
        for cdl in [LossKind::CdlCc, LossKind::CdlCn] {
            let cfg = TrainConfig {
                loss: cdl,
                gamma: 3,
                force_unit_base: true,
                ..mdl_cfg.clone()
            };
            let mut model = MiplModel::new(section.build(ds.dim, ds.num_classes), 5).unwrap();
            let out = train(&train_set, &mut model, &cfg).unwrap();
            let same_bits = |a: &[f64], b: &[f64]| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            };
            identical &= same_bits(&out.trace.batch_losses, &reference.trace.batch_losses)
                && same_bits(&out.trace.epoch_losses, &reference.trace.epoch_losses)
                && model.params() == base.params();
        }
    }

    // FL / IFL with gamma = 0 against MDL on every batch of one epoch.
    let (section, _) = tiny_config(AttentionKind::Sam, 1);
    let model = MiplModel::new(section.build(ds.dim, ds.num_classes), 6).unwrap();
    let mut worst: f64 = 0.0;
    let mut batches = 0;
    for batch in train_set.bags.chunks(8) {
        let batch_loss = |cfg: &LossConfig| -> (f64, Vec<f64>) {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape).unwrap();
            let mut total = None;
            for bag in batch {
                let f = model.forward(&mut tape, &bound, &bag.instances).unwrap();
                let k = ds.num_classes;
                let mut w = vec![0.0; k];
                for &c in &bag.candidates {
                    w[c] = 1.0 / bag.candidates.len() as f64;
                }
                let l = loss_on_tape(&mut tape, f.probs, &w, &bag.candidates, cfg).unwrap();
                total = Some(match total {
                    None => l,
                    Some(acc) => tape.add(acc, l).unwrap(),
                });
            }
            let mean = tape.scale(total.unwrap(), 1.0 / batch.len() as f64).unwrap();
            let grads = tape.backward_scalar(mean).unwrap();
            let flat = bound
                .iter()
                .flat_map(|v| grads.get(*v).map(|g| g.as_slice().to_vec()).unwrap_or_default())
                .collect();
            (tape.scalar(mean), flat)
        };
        let (mdl, g_mdl) = batch_loss(&LossConfig::new(LossKind::Mdl, 1));
        for kind in [LossKind::Fl, LossKind::Ifl] {
            let (l, g) = batch_loss(&LossConfig::new(kind, 0));
            worst = worst.max((l - mdl).abs());
            for (a, b) in g.iter().zip(&g_mdl) {
                worst = worst.max((a - b).abs());
            }
        }
        batches += 1;
    }
    Verdict::new(
        identical && worst <= 1e-12,
        format!(
            "unit-base CDL-CC/CN traces bit-identical to MDL for DAM/SAM/MAM: {identical}; \
             FL/IFL gamma=0 max loss/gradient gap {worst:.1e} over {batches} batches"
        ),
    )
}

// ---------------------------------------------------------------- 6 & 7

fn ab_dataset() -> MiplDataset {
    generate_synthetic(&GenConfig {
        bags: 500,
        classes: 5,
        dim: 8,
        min_instances: 10,
        max_instances: 20,
        min_positive_fraction: 0.2,
        max_positive_fraction: 0.4,
        false_positives: 2,
        separation: 2.0,
        noise: 1.0,
        seed: 1,
    })
    .unwrap()
}

fn ab_arm(kind: AttentionKind, loss: LossKind) -> (ModelSection, TrainConfig) {
    (
        ModelSection {
            extractor: vec![16],
            scorer_hidden: 8,
            attention: kind,
            ..ModelSection::default()
        },
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            lr: 0.01,
            loss,
            gamma: 1,
            seed: 0,
            ..TrainConfig::default()
        },
    )
}

struct AbResults {
    sam: (ExperimentResult, ExperimentResult),
    mam: (ExperimentResult, ExperimentResult),
    elapsed: Duration,
}

fn ab_results() -> &'static AbResults {
    static CELL: OnceLock<AbResults> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let ds = ab_dataset();
        let run = |kind, loss| {
            let (section, cfg) = ab_arm(kind, loss);
            run_experiment(&ds, &section, &cfg, 0.7, 10).unwrap()
        };
        let sam = (run(AttentionKind::Sam, LossKind::Mdl), run(AttentionKind::Sam, LossKind::CdlCn));
        let mam = (run(AttentionKind::Mam, LossKind::Mdl), run(AttentionKind::Mam, LossKind::CdlCn));
        AbResults {
            sam,
            mam,
            elapsed: start.elapsed(),
        }
    })
}

fn criterion_6() -> Verdict {
    let r = ab_results();
    let (mdl, cn) = &r.sam;
    let (mam_mdl, mam_cn) = &r.mam;
    let sam_ece = cn.ece.mean < mdl.ece.mean;
    let sam_acc = cn.accuracy.mean >= mdl.accuracy.mean - 0.02;
    let mam_ece = mam_cn.ece.mean < mam_mdl.ece.mean;
    let fast = r.elapsed < Duration::from_secs(600);
    Verdict::new(
        sam_ece && sam_acc && mam_ece && fast,
        format!(
            "SAM: ECE MDL {:.4} vs CDL-CN {:.4}, accuracy MDL {:.4} vs CDL-CN {:.4}; \
             MAM: ECE MDL {:.4} vs CDL-CN {:.4}; {:.1}s of 600s budget",
            mdl.ece.mean,
            cn.ece.mean,
            mdl.accuracy.mean,
            cn.accuracy.mean,
            mam_mdl.ece.mean,
            mam_cn.ece.mean,
            r.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Verdict {
    let (_, cn) = &ab_results().sam;
    let n = cn.repeats.len() as f64;
    let mean = |f: &dyn Fn(&mipl_cdl::training::RepeatSummary) -> Option<f64>| {
        cn.repeats.iter().map(|r| f(r).unwrap_or(f64::NAN)).sum::<f64>() / n
    };
    let t = mean(&|r| r.train_breakdown.true_label);
    let fp = mean(&|r| r.train_breakdown.false_positive);
    let nc = mean(&|r| r.train_breakdown.non_candidate);
    Verdict::new(
        t > fp && fp > nc,
        format!("final-epoch training probabilities: true {t:.4} > false-positive {fp:.4} > non-candidate {nc:.4}"),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let ds = generate_synthetic(&GenConfig {
        bags: 300,
        classes: 5,
        dim: 8,
        min_instances: 1,
        max_instances: 1,
        min_positive_fraction: 1.0,
        max_positive_fraction: 1.0,
        false_positives: 1,
        separation: 4.0,
        noise: 1.0,
        seed: 2,
    })
    .unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in [AttentionKind::Dam, AttentionKind::Sam] {
        let (section, cfg) = ab_arm(kind, LossKind::CdlCn);
        match run_experiment(&ds, &section, &cfg, 0.7, 1) {
            Ok(res) => {
                pass &= res.accuracy.mean > 0.8;
                parts.push(format!("{kind} accuracy {:.4}", res.accuracy.mean));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{kind} failed: {e}"));
            }
        }
    }
    let (fast, t) = within(Duration::from_secs(120), start);
    Verdict::new(pass && fast, format!("{}; {t}", parts.join(", ")))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = root.join("config.toml");
    std::fs::write(
        &config,
        "[data]\nbags = 60\nclasses = 3\ndim = 4\nmin_instances = 2\nmax_instances = 5\n\
         min_positive_fraction = 0.3\nmax_positive_fraction = 0.6\n\
         [model]\nextractor = [6]\nscorer_hidden = 4\n\
         [train]\nepochs = 4\nbatch_size = 8\n\
         [theorem]\ntuples = 500\n",
    )
    .unwrap();
    let other = root.join("other.toml");
    std::fs::write(
        &other,
        std::fs::read_to_string(&config).unwrap().replace("[train]\n", "[train]\nloss = \"mdl\"\n"),
    )
    .unwrap();
    let out = |name: &str| OutputArgs {
        out: root.join(name),
        force: false,
    };
    let gen = cli::cmd_gen(&GenArgs {
        config: Some(config.clone()),
        seed: Some(3),
        output: out("gen"),
    })
    .unwrap();
    let dataset = gen.out_dir.join("dataset.txt");
    let train = cli::cmd_train(&cli::TrainArgs {
        config: Some(config.clone()),
        dataset: dataset.clone(),
        seed: Some(8),
        output: out("train"),
    })
    .unwrap();
    let eval = cli::cmd_eval(&cli::EvalArgs {
        checkpoint: train.out_dir.join("checkpoint.json"),
        dataset: train.out_dir.join("test_dataset.txt"),
        output: out("eval"),
    })
    .unwrap();
    let theorem = cli::cmd_theorem(&cli::TheoremArgs {
        config: Some(config.clone()),
        seed: None,
        output: out("theorem"),
    })
    .unwrap();
    let compare = cli::cmd_compare(&cli::CompareArgs {
        config: vec![config.clone(), other],
        dataset: Some(dataset),
        seed: Some(2),
        repeats: 2,
        output: out("compare"),
    })
    .unwrap();
    let mut results = Vec::new();
    for o in [&gen, &train, &eval, &theorem, &compare] {
        let replay = cli::cmd_replay(&ReplayArgs {
            manifest: o.out_dir.join(cli::MANIFEST_FILE),
            output: OutputArgs {
                out: root.join(format!("replay-{}", o.manifest.command)),
                force: false,
            },
        })
        .unwrap();
        results.push((o.manifest.command.clone(), replay.identical() && !o.manifest.outputs.is_empty()));
    }
    Verdict::new(
        results.iter().all(|(_, ok)| *ok),
        results
            .iter()
            .map(|(c, ok)| format!("{c} {}", if *ok { "identical" } else { "DIFFERS" }))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

type Check = fn() -> Verdict;

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("gradient correctness", criterion_1),
        ("lower-bound sweep", criterion_2),
        ("ECE oracle equivalence", criterion_3),
        ("structural invariants", criterion_4),
        ("degeneracy identities", criterion_5),
        ("directional A/B", criterion_6),
        ("probability breakdown", criterion_7),
        ("single-instance mode", criterion_8),
        ("reproducibility", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion_{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        if !verdict.pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} — {} [{:.1}s]",
            i + 1,
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
