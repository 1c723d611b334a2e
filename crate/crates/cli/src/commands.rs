use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use issuebert::baseline::{bow_train_with, BowModel};
use issuebert::classifier::{LoadedModel, Prediction};
use issuebert::corpus::{
    class_counts, parse_csv, preprocess, read_jsonl, split, split_stratified, write_jsonl, CleanExample, DatasetSplit,
    IssueLabel, IssueRecord,
};
use issuebert::metrics::{render_csv, render_json, render_report, MetricsReport};
use issuebert::tokenizer::{build_vocab, Vocabulary};
use issuebert::train::{train_with, EpochLog, TrainError};
use issuebert::ClassifierModel;
use serde::Deserialize;

use crate::config::RunConfig;
use crate::{CliError, Command, Format, ModelChoice};

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Prep {
            input,
            output,
            seed,
            fraction,
            stratified,
        } => prep(&input, &output, seed, fraction, stratified, out),
        Command::BuildVocab { data, output, size } => vocab(&data, &output, size, out),
        Command::Train { config, model } => train(&config, model, out),
        Command::Eval {
            checkpoints,
            data,
            format,
        } => eval(&checkpoints, &data, format, out),
        Command::Predict {
            checkpoint,
            text,
            input,
        } => predict(&checkpoint, text.as_deref(), input.as_deref(), out),
        Command::Serve { checkpoint, port, host } => crate::serve::serve(&checkpoint, &host, port),
    }
}

fn load_examples(path: &Path) -> anyhow::Result<Vec<CleanExample>> {
    let examples = read_jsonl(path).with_context(|| format!("cannot read {}", path.display()))?;
    if examples.is_empty() {
        bail!("{} contains no examples", path.display());
    }
    Ok(examples)
}

/// Class counts of both parts, one row per class plus a total row.
pub fn summary_table(split: &DatasetSplit) -> String {
    let (tr, va) = (class_counts(&split.train), class_counts(&split.validation));
    let mut s = format!("{:<12}{:>10}{:>12}{:>10}\n", "class", "train", "validation", "total");
    for label in IssueLabel::ALL {
        let (a, b) = (tr.get(label), va.get(label));
        s += &format!("{:<12}{a:>10}{b:>12}{:>10}\n", label.as_str(), a + b);
    }
    s += &format!("{:<12}{:>10}{:>12}{:>10}\n", "total", tr.total(), va.total(), tr.total() + va.total());
    s
}

fn write_examples(path: &Path, examples: &[CleanExample]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_jsonl(examples, BufWriter::new(file))?;
    Ok(())
}

fn prep(input: &Path, output: &Path, seed: u64, fraction: f64, stratified: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let records = parse_csv(input).with_context(|| format!("cannot load {}", input.display()))?;
    let examples: Vec<CleanExample> = records.iter().map(preprocess).collect();
    let parts = if stratified {
        split_stratified(&examples, fraction, seed)?
    } else {
        split(&examples, fraction, seed)?
    };
    fs::create_dir_all(output)?;
    write_examples(&output.join("train.jsonl"), &parts.train)?;
    write_examples(&output.join("validation.jsonl"), &parts.validation)?;
    let summary = summary_table(&parts);
    fs::write(output.join("summary.txt"), &summary)?;
    out.write_all(summary.as_bytes())?;
    Ok(())
}

fn vocab(data: &Path, output: &Path, size: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let examples = load_examples(data)?;
    let vocab = build_vocab(&examples, size)?;
    vocab.save(output).with_context(|| format!("cannot write {}", output.display()))?;
    writeln!(out, "wrote {} tokens to {}", vocab.len(), output.display())?;
    Ok(())
}

pub fn checkpoint_path(cfg: &RunConfig, model: ModelChoice) -> PathBuf {
    cfg.paths.output_dir.join(format!("{}.ckpt", model.name()))
}

pub fn epoch_log_path(cfg: &RunConfig, model: ModelChoice) -> PathBuf {
    cfg.paths.output_dir.join(format!("{}_epochs.csv", model.name()))
}

/// Writes each epoch line to stdout and the log file, remembering the first
/// I/O failure since the training callbacks cannot return one.
struct EpochSink<'a> {
    out: &'a mut dyn Write,
    log: BufWriter<File>,
    error: Option<std::io::Error>,
}

impl<'a> EpochSink<'a> {
    fn new(out: &'a mut dyn Write, path: &Path) -> anyhow::Result<Self> {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut sink = Self {
            out,
            log: BufWriter::new(file),
            error: None,
        };
        sink.line(EpochLog::CSV_HEADER);
        Ok(sink)
    }

    fn line(&mut self, line: &str) {
        let result = writeln!(self.out, "{line}").and_then(|_| writeln!(self.log, "{line}"));
        if let Err(e) = result.and_then(|_| self.log.flush()) {
            self.error.get_or_insert(e);
        }
    }

    fn finish(mut self) -> std::io::Result<&'a mut dyn Write> {
        match self.error.take() {
            Some(e) => Err(e),
            None => self.log.flush().map(|_| self.out),
        }
    }
}

fn accuracy(model: &BowModel<f32>, examples: &[CleanExample]) -> f64 {
    let correct = examples.iter().filter(|e| model.predict(&e.text).label == e.label).count();
    correct as f64 / examples.len() as f64
}

fn train(config: &Path, choice: ModelChoice, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    cfg.train.validate()?;
    let parts = DatasetSplit {
        train: load_examples(&cfg.paths.train)?,
        validation: load_examples(&cfg.paths.validation)?,
        seed: cfg.train.seed,
        fraction: 0.0,
    };
    fs::create_dir_all(&cfg.paths.output_dir)?;
    let ckpt = checkpoint_path(&cfg, choice);
    let mut sink = EpochSink::new(out, &epoch_log_path(&cfg, choice))?;
    let (which, epoch, acc) = match choice {
        ModelChoice::Transformer => {
            let vocab = Vocabulary::load(&cfg.paths.vocab)
                .with_context(|| format!("cannot load vocabulary {}", cfg.paths.vocab.display()))?;
            let model = ClassifierModel::init(cfg.encoder_config(vocab.len()), cfg.encoder.init_seed)?;
            let result = train_with(model, &parts, &vocab, &cfg.train, |log| sink.line(&log.csv_line()));
            let outcome = match result {
                Err(e @ TrainError::NonFiniteLoss { .. }) => return Err(CliError::Numerical(e.into())),
                other => other?,
            };
            outcome.best_model.save_checkpoint(&vocab, &ckpt)?;
            let acc = outcome.logs[outcome.best_epoch - 1].validation_accuracy;
            ("best", outcome.best_epoch, acc)
        }
        ModelChoice::Baseline => {
            let mut last = (0, 0.0);
            let model = bow_train_with::<f32>(&parts.train, &cfg.baseline, |epoch, loss, m| {
                let log = EpochLog {
                    epoch,
                    train_loss: loss,
                    validation_accuracy: accuracy(m, &parts.validation),
                };
                last = (epoch, log.validation_accuracy);
                sink.line(&log.csv_line());
            })?;
            if !last.1.is_finite() {
                return Err(CliError::Numerical(anyhow!("baseline training diverged")));
            }
            model.save_checkpoint(&ckpt)?;
            ("final", last.0, last.1)
        }
    };
    let out = sink.finish()?;
    writeln!(
        out,
        "# {which} epoch {epoch}, validation accuracy {acc:.4}, checkpoint {}",
        ckpt.display()
    )?;
    Ok(())
}

/// Short column names for the report: file stems, made unique.
fn report_names(paths: &[PathBuf]) -> Vec<String> {
    let mut names: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
        .collect();
    if names.len() == 2 && names[0] == names[1] {
        names[0] += " (A)";
        names[1] += " (B)";
    }
    names
}

fn eval(checkpoints: &[PathBuf], data: &Path, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    if checkpoints.len() > 2 {
        return Err(CliError::Input(anyhow!("at most two checkpoints can be compared")));
    }
    let examples = load_examples(data)?;
    let mut reports = Vec::new();
    for (path, name) in checkpoints.iter().zip(report_names(checkpoints)) {
        let model = LoadedModel::load(path).with_context(|| format!("cannot load checkpoint {}", path.display()))?;
        let (_, matrix) = model.evaluate(&examples)?;
        reports.push((name, MetricsReport::from_confusion(&matrix)?));
    }
    let text = match format {
        Format::Table => render_report(&reports)?,
        Format::Json => render_json(&reports)?,
        Format::Csv => render_csv(&reports)?,
    };
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        writeln!(out)?;
    }
    Ok(())
}

/// One line of `predict --input`: either ready text or a raw title/body pair.
#[derive(Deserialize)]
struct PredictInput {
    text: Option<String>,
    title: Option<String>,
    body: Option<String>,
}

impl PredictInput {
    fn text(self) -> anyhow::Result<String> {
        match (self.text, self.title, self.body) {
            (Some(t), None, None) => Ok(t),
            (None, title, body) if title.is_some() || body.is_some() => Ok(preprocess(&IssueRecord {
                label: IssueLabel::Bug,
                title: title.unwrap_or_default(),
                body: body.unwrap_or_default(),
            })
            .text),
            _ => bail!("expected either `text` or `title`/`body`"),
        }
    }
}

fn predict(checkpoint: &Path, text: Option<&str>, input: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let model = LoadedModel::load(checkpoint).with_context(|| format!("cannot load checkpoint {}", checkpoint.display()))?;
    let emit = |p: Prediction, out: &mut dyn Write| writeln!(out, "{}", p.to_json());
    match (text, input) {
        (Some(t), _) => emit(model.predict(t)?, out)?,
        (None, Some(path)) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: PredictInput =
                    serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?;
                let text = parsed.text().with_context(|| format!("{}: line {}", path.display(), i + 1))?;
                emit(model.predict(&text)?, out)?;
            }
        }
        (None, None) => return Err(CliError::Input(anyhow!("give --text or --input"))),
    }
    Ok(())
}
