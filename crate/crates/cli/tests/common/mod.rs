#![allow(dead_code)]

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::Command;

use issuebert::corpus::{write_csv, IssueRecord};
use issuebert_testkit::synth;

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn issuebert<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_issuebert"))
        .args(args)
        .output()
        .expect("spawn issuebert");
    Output {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

pub fn ok(out: Output) -> Output {
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    out
}

pub fn write_issues(path: &Path, records: &[IssueRecord]) {
    write_csv(records, File::create(path).unwrap()).unwrap();
}

/// A prepared workspace: split data, a vocabulary and a run config that
/// trains a very small encoder.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let ws = Self { dir };
        write_issues(&ws.path("issues.csv"), &synth::issues(n, [4, 3, 1], 0.2, 5));
        ok(issuebert(["prep", "--input", &ws.arg("issues.csv"), "--output", &ws.arg("data")]));
        ok(issuebert(["build-vocab", "--data", &ws.arg("data/train.jsonl"), "--output", &ws.arg("vocab.txt"), "--size", "300"]));
        ws
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn arg(&self, rel: &str) -> String {
        self.path(rel).to_string_lossy().into_owned()
    }

    /// Writes `run.json` with the given extra top-level JSON members.
    pub fn config(&self, name: &str, extra: &str) -> String {
        let text = format!(
            r#"{{"paths": {{"train": "data/train.jsonl", "validation": "data/validation.jsonl", "vocab": "vocab.txt", "output_dir": "out"}}{extra}}}"#
        );
        fs::write(self.path(name), text).unwrap();
        self.arg(name)
    }

    /// Small encoder so the tests stay fast.
    pub fn small_config(&self, name: &str, epochs: usize) -> String {
        self.config(
            name,
            &format!(
                r#", "max_len": 64, "encoder": {{"layers": 1, "hidden": 16, "heads": 2, "ff_dim": 32}}, "train": {{"lr": 0.001, "epochs": {epochs}, "batch_size": 8}}, "baseline": {{"epochs": {epochs}, "bucket_count": 4096}}"#
            ),
        )
    }

    /// Trains both models with `small_config` and returns their checkpoints.
    pub fn checkpoints(&self) -> (String, String) {
        let cfg = self.small_config("small.json", 2);
        ok(issuebert(["train", "--config", &cfg, "--model", "transformer"]));
        ok(issuebert(["train", "--config", &cfg, "--model", "baseline"]));
        (self.arg("out/transformer.ckpt"), self.arg("out/baseline.ckpt"))
    }
}

pub fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}
