//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use issuebert::baseline::{bow_train, BowConfig};
use issuebert::corpus::{preprocess, DatasetSplit, IssueLabel, IssueRecord};
use issuebert::metrics::{
    f_score, micro_average, micro_f_exact, micro_precision_exact, micro_recall_exact, ConfusionMatrix, Exact,
    MetricsReport,
};
use issuebert::model::EncoderConfig;
use issuebert::nn::Parameter;
use issuebert::rng::SeededRng;
use issuebert::tokenizer::{build_vocab, encode};
use issuebert::train::{evaluate, train, AdamW, TrainConfig};
use issuebert::{BowModel, ClassifierModel};
use issuebert_testkit::{gradcheck, synth, tokcheck};
use serde::Deserialize;

type Outcome = Result<String, String>;

/// Published per-class (recall, precision, F) in percent, bug/enhancement/question.
const TRANSFORMER: [(f64, f64, f64); 3] = [(90.6, 86.6, 88.6), (87.7, 86.4, 87.1), (48.7, 73.1, 58.4)];
const FASTTEXT: [(f64, f64, f64); 3] = [(81.6, 83.1, 83.1), (84.5, 81.6, 83.1), (35.0, 65.2, 45.6)];
const TEST_SUPPORT: [u64; 3] = [40_152, 33_290, 7_076];
const PUBLISHED_MICRO: [(&str, f64); 2] = [("transformer", 85.7), ("fastText", 81.6)];

fn criterion_fscore() -> Outcome {
    let mut lines = Vec::new();
    let mut bad = Vec::new();
    for (model, rows) in [("transformer", TRANSFORMER), ("fastText", FASTTEXT)] {
        for (label, (r, p, f)) in IssueLabel::ALL.iter().zip(rows) {
            let got = 100.0 * f_score(r / 100.0, p / 100.0);
            let entry = format!("{model} {label} {got:.2} vs {f}");
            if (got - f).abs() > 0.1 {
                bad.push(entry.clone());
            }
            lines.push(entry);
        }
    }
    if bad.is_empty() {
        Ok(lines.join(", "))
    } else {
        Err(format!("outside 0.1 points: {}", bad.join(", ")))
    }
}

/// A matrix with the published test supports whose per-class true positives
/// are the recalls applied to those supports; misses go to the next class.
fn matrix_from_recalls(recalls: [f64; 3]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for k in 0..3 {
        let tp = (recalls[k] / 100.0 * TEST_SUPPORT[k] as f64).round() as u64;
        m.counts[k][k] = tp;
        m.counts[k][(k + 1) % 3] = TEST_SUPPORT[k] - tp;
    }
    m
}

fn criterion_micro() -> Outcome {
    let mut lines = Vec::new();
    let mut bad = Vec::new();
    for ((model, published), rows) in PUBLISHED_MICRO.iter().zip([TRANSFORMER, FASTTEXT]) {
        let m = matrix_from_recalls([rows[0].0, rows[1].0, rows[2].0]);
        let got = 100.0 * micro_average(&m).map_err(|e| e.to_string())?;
        let entry = format!("{model} {got:.3} vs {published}");
        if (got - published).abs() > 0.15 {
            bad.push(entry.clone());
        }
        lines.push(entry);
    }
    if bad.is_empty() {
        Ok(lines.join(", "))
    } else {
        Err(format!("outside 0.15 points: {}", bad.join(", ")))
    }
}

fn criterion_identity() -> Outcome {
    let mut rng = SeededRng::new(5);
    for case in 0..1000 {
        let mut m = ConfusionMatrix::default();
        let scale = [4, 100, 1_000_000][rng.below(3)];
        for row in m.counts.iter_mut() {
            for cell in row.iter_mut() {
                *cell = if rng.uniform() < 0.15 { 0 } else { rng.below(scale) as u64 };
            }
        }
        if m.total() == 0 {
            m.counts[2][0] = 1;
        }
        let r = micro_recall_exact(&m).map_err(|e| e.to_string())?;
        let p = micro_precision_exact(&m).map_err(|e| e.to_string())?;
        let f = micro_f_exact(&m).map_err(|e| e.to_string())?;
        if r != p || p != f || m.sum_fp() != m.sum_fn() || r != Exact::new(m.sum_tp() as u128, m.total() as u128) {
            return Err(format!("matrix {case}: {:?}", m.counts));
        }
    }
    Ok("1000 matrices, recall = precision = F exactly".into())
}

fn gradcheck_summary<T: issuebert_testkit::fd::Checked>(name: &str) -> Outcome {
    let reports = gradcheck::all::<T>(11);
    let mut suites: Vec<&str> = reports.iter().map(|r| r.suite).collect();
    suites.dedup();
    for s in &suites {
        let n = reports.iter().filter(|r| r.suite == *s).count();
        if n != gradcheck::INSTANCES {
            return Err(format!("{name} {s}: {n} instances"));
        }
    }
    if let Some(r) = reports.iter().find(|r| !r.passed::<T>()) {
        return Err(format!("{name} {} instance {}: rel {:.3e}", r.suite, r.instance, r.worst.rel));
    }
    let worst = reports.iter().map(|r| r.worst.rel).fold(0.0, f64::max);
    Ok(format!("{name}: {} suites, worst rel {worst:.2e}", suites.len()))
}

fn criterion_gradients() -> Outcome {
    Ok(format!("{}; {}", gradcheck_summary::<f32>("f32")?, gradcheck_summary::<f64>("f64")?))
}

fn criterion_overfit() -> Outcome {
    let examples = synth::separable(32, 17);
    let vocab = build_vocab(&examples, 200).map_err(|e| e.to_string())?;
    let split = DatasetSplit {
        train: examples.clone(),
        validation: examples.clone(),
        seed: 0,
        fraction: 1.0,
    };
    let cfg = TrainConfig {
        lr: 1e-3,
        epochs: 200,
        ..TrainConfig::default()
    };
    let encoder = EncoderConfig {
        max_positions: 32,
        ..EncoderConfig::tiny(vocab.len())
    };
    let start = Instant::now();
    let model = ClassifierModel::init(encoder, 42).map_err(|e| e.to_string())?;
    let out = train(model, &split, &vocab, &cfg).map_err(|e| e.to_string())?;
    let (acc, _) = evaluate(&out.best_model, &examples, &vocab).map_err(|e| e.to_string())?;
    let transformer_time = start.elapsed();
    if acc != 1.0 {
        return Err(format!("transformer train accuracy {acc}"));
    }
    if transformer_time > Duration::from_secs(60) {
        return Err(format!("transformer took {transformer_time:.1?}"));
    }

    // 32 examples leave the default five epochs far short of convergence.
    let bow_cfg = BowConfig {
        lr_start: 1.0,
        epochs: 25,
        ..BowConfig::default()
    };
    let bow: BowModel = bow_train(&examples, &bow_cfg).map_err(|e| e.to_string())?;
    let correct = examples.iter().filter(|e| bow.predict(&e.text).label == e.label).count();
    if correct != examples.len() {
        return Err(format!("baseline {correct}/{}", examples.len()));
    }
    Ok(format!(
        "vocab {}, transformer 100% (best epoch {}, {transformer_time:.1?}), baseline 100%",
        vocab.len(),
        out.best_epoch
    ))
}

#[derive(Deserialize)]
struct GoldenCase {
    title: String,
    body: String,
    text: String,
}

fn criterion_preprocess() -> Outcome {
    let raw = include_str!("../../core/tests/fixtures/preprocess_golden.jsonl");
    let cases: Vec<GoldenCase> = raw.lines().map(serde_json::from_str).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    if cases.len() != 50 {
        return Err(format!("{} golden cases", cases.len()));
    }
    for (i, c) in cases.iter().enumerate() {
        let got = preprocess(&IssueRecord {
            label: IssueLabel::Bug,
            title: c.title.clone(),
            body: c.body.clone(),
        });
        if got.text != c.text {
            return Err(format!("case {i}: {:?} != {:?}", got.text, c.text));
        }
    }
    Ok("50 golden cases".into())
}

fn criterion_tokenizer() -> Outcome {
    let words = tokcheck::exhaustive(24, 2024).map_err(|m| format!("exhaustive: {m:?}"))?;
    let fuzz = tokcheck::fuzz(1000, 77).map_err(|m| format!("fuzz: {m:?}"))?;
    let truncated = tokcheck::truncation(300, 5)?;
    Ok(format!("{words} exhaustive words, {fuzz} fuzz cases, 300 long inputs end in [SEP] ({truncated} hit the cap)"))
}

fn bits(values: &[f32]) -> Vec<u32> {
    values.iter().map(|v| v.to_bits()).collect()
}

fn prep_split(csv: &Path, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_issuebert"))
        .args(["prep", "--seed", "9", "--input"])
        .arg(csv)
        .arg("--output")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let mut bytes = fs::read(out.join("train.jsonl")).map_err(|e| e.to_string())?;
    bytes.extend(fs::read(out.join("validation.jsonl")).map_err(|e| e.to_string())?);
    Ok(bytes)
}

fn criterion_determinism() -> Outcome {
    let examples = synth::separable(24, 4);
    let vocab = build_vocab(&examples, 80).map_err(|e| e.to_string())?;
    let split = DatasetSplit {
        train: examples.clone(),
        validation: examples.clone(),
        seed: 0,
        fraction: 1.0,
    };
    let cfg = TrainConfig {
        lr: 1e-3,
        epochs: 3,
        batch_size: 5,
        ..TrainConfig::default()
    };
    let encoder = EncoderConfig {
        max_positions: 32,
        ..EncoderConfig::tiny(vocab.len())
    };
    let run = || -> Result<ClassifierModel, String> {
        let model = ClassifierModel::init(encoder.clone(), 1).map_err(|e| e.to_string())?;
        Ok(train(model, &split, &vocab, &cfg).map_err(|e| e.to_string())?.best_model)
    };
    let (a, b) = (run()?, run()?);
    if a.to_checkpoint_bytes(&vocab) != b.to_checkpoint_bytes(&vocab) {
        return Err("transformer checkpoints differ between identical runs".into());
    }
    let bow_a: BowModel = bow_train(&examples, &BowConfig::default()).map_err(|e| e.to_string())?;
    let bow_b: BowModel = bow_train(&examples, &BowConfig::default()).map_err(|e| e.to_string())?;
    if bow_a.to_checkpoint_bytes() != bow_b.to_checkpoint_bytes() {
        return Err("baseline checkpoints differ between identical runs".into());
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("t.ckpt");
    a.save_checkpoint(&vocab, &path).map_err(|e| e.to_string())?;
    let (loaded, loaded_vocab) = ClassifierModel::load_checkpoint(&path).map_err(|e| e.to_string())?;
    let batch: Vec<_> = examples.iter().map(|e| encode(&e.text, &loaded_vocab, 32)).collect();
    let before = a.forward(&batch).map_err(|e| e.to_string())?;
    let after = loaded.forward(&batch).map_err(|e| e.to_string())?;
    if bits(before.data()) != bits(after.data()) {
        return Err("transformer logits changed across save and load".into());
    }
    let bow_path = dir.path().join("b.ckpt");
    bow_a.save_checkpoint(&bow_path).map_err(|e| e.to_string())?;
    let bow_loaded = BowModel::load_checkpoint(&bow_path).map_err(|e| e.to_string())?;
    for e in &examples {
        let (p, q) = (bow_a.predict(&e.text), bow_loaded.predict(&e.text));
        if p.probabilities.map(f64::to_bits) != q.probabilities.map(f64::to_bits) {
            return Err("baseline outputs changed across save and load".into());
        }
    }

    let csv = dir.path().join("issues.csv");
    let records = synth::issues(300, [4, 3, 1], 0.2, 6);
    issuebert::corpus::write_csv(&records, fs::File::create(&csv).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if prep_split(&csv, &dir.path().join("p1"))? != prep_split(&csv, &dir.path().join("p2"))? {
        return Err("prep produced different splits for the same seed".into());
    }
    Ok("checkpoints byte-identical, logits bitwise-identical after reload, prep splits identical".into())
}

/// Share of the largest class in the original test split.
fn majority_floor() -> f64 {
    TEST_SUPPORT[0] as f64 / TEST_SUPPORT.iter().sum::<u64>() as f64
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_issuebert"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("issuebert {}: {}", args[0], String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn criterion_benchmark() -> Outcome {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");
    let sample = format!("{root}/data/sample_issues.csv");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |rel: &str| dir.path().join(rel).to_string_lossy().into_owned();

    // Bundled hyperparameters with paths redirected into the scratch directory.
    let mut cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(format!("{root}/data/benchmark.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    cfg["paths"] = serde_json::json!({
        "train": "data/train.jsonl",
        "validation": "data/validation.jsonl",
        "vocab": "vocab.txt",
        "output_dir": "out",
    });
    fs::write(dir.path().join("run.json"), cfg.to_string()).map_err(|e| e.to_string())?;

    let start = Instant::now();
    cli(&["prep", "--input", &sample, "--output", &d("data")])?;
    cli(&["build-vocab", "--data", &d("data/train.jsonl"), "--output", &d("vocab.txt")])?;
    cli(&["train", "--config", &d("run.json"), "--model", "transformer"])?;
    cli(&["train", "--config", &d("run.json"), "--model", "baseline"])?;
    let (a, b, data) = (d("out/transformer.ckpt"), d("out/baseline.ckpt"), d("data/validation.jsonl"));
    let table = cli(&["eval", "--checkpoint", &a, "--checkpoint", &b, "--data", &data])?;
    let elapsed = start.elapsed();
    let json = cli(&["eval", "--checkpoint", &a, "--checkpoint", &b, "--data", &data, "--format", "json"])?;

    if !table.lines().next().is_some_and(|h| h.contains("Difference")) {
        return Err(format!("no comparison table:\n{table}"));
    }
    let reports: std::collections::BTreeMap<String, MetricsReport> =
        serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let floor = majority_floor();
    let mut accs = Vec::new();
    for name in ["transformer", "baseline"] {
        let acc = reports.get(name).ok_or(format!("{name} missing"))?.micro_average;
        if acc <= floor {
            return Err(format!("{name} accuracy {acc:.4} does not beat the {floor:.4} floor"));
        }
        accs.push(format!("{name} {:.1}%", 100.0 * acc));
    }
    if elapsed > Duration::from_secs(15 * 60) {
        return Err(format!("pipeline took {elapsed:.0?}"));
    }
    Ok(format!("{} vs floor {:.1}%, pipeline {elapsed:.1?}", accs.join(", "), 100.0 * floor))
}

fn scalar(value: f64, grad: f64) -> Parameter<f64> {
    let mut p = Parameter::filled("theta", &[1], value);
    p.accumulate(&[grad]);
    p
}

fn adamw_once(value: f64, grad: f64, weight_decay: f64) -> Result<f64, String> {
    let mut p = scalar(value, grad);
    let cfg = TrainConfig {
        lr: 1e-3,
        weight_decay,
        ..TrainConfig::default()
    };
    AdamW::new(&[&p]).step(vec![&mut p], &cfg).map_err(|e| e.to_string())?;
    Ok(p.value.data()[0])
}

fn criterion_adamw() -> Outcome {
    let still = adamw_once(0.7, 0.0, 0.0)?;
    if still != 0.7 {
        return Err(format!("zero gradient moved θ to {still}"));
    }
    // m̂ = v̂ = 1 after bias correction, so the step is lr / (1 + eps).
    let first = adamw_once(1.0, 1.0, 0.0)?;
    if (first - 0.999).abs() > 1e-7 {
        return Err(format!("first step gave {first}"));
    }
    let decayed = adamw_once(1.0, 1.0, 0.01)?;
    let shift = decayed - first;
    if (shift + 1e-5).abs() > 1e-7 {
        return Err(format!("decay shift {shift}"));
    }
    Ok(format!("θ {still} / {first:.9} / shift {shift:.3e}"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "F-score recomputation", budget: secs(1), run: criterion_fscore },
        Criterion { id: 2, name: "micro-average cross-check", budget: secs(1), run: criterion_micro },
        Criterion { id: 3, name: "micro identity", budget: secs(5), run: criterion_identity },
        Criterion { id: 4, name: "gradient checks", budget: secs(120), run: criterion_gradients },
        Criterion { id: 5, name: "overfit", budget: secs(120), run: criterion_overfit },
        Criterion { id: 6, name: "preprocessing golden file", budget: secs(1), run: criterion_preprocess },
        Criterion { id: 7, name: "tokenizer oracle", budget: secs(30), run: criterion_tokenizer },
        Criterion { id: 8, name: "determinism and round-trip", budget: secs(30), run: criterion_determinism },
        Criterion { id: 9, name: "desk benchmark", budget: secs(15 * 60), run: criterion_benchmark },
        Criterion { id: 10, name: "AdamW fixture", budget: secs(1), run: criterion_adamw },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || c.id.to_string() == *f) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > c.budget => Err(format!("took {elapsed:.1?}, budget {:?}", c.budget)),
            other => other,
        };
        let (status, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{status} [{:>2}] {} ({elapsed:.2?}): {detail}", c.id, c.name);
        failed += usize::from(result.is_err());
    }
    println!("acceptance: {} of {} criteria failed", failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
