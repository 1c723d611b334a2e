//! Per-class recall, precision and F-score over a 3×3 confusion matrix, the
//! micro average, and Table-style report rendering.
//!
//! Counts stay integral until the final division. For single-label
//! multiclass data every misclassification is one false negative (for the
//! actual class) and one false positive (for the predicted class), so
//! `Σ fp = Σ fn` and the micro averages of recall, precision and F-score
//! coincide; the `micro_*_exact` functions make that checkable with exact
//! rationals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{IssueLabel, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("prediction list has {predictions} entries but there are {actuals} actual labels")]
    LengthMismatch { predictions: usize, actuals: usize },
    #[error("no predictions to evaluate")]
    Empty,
    #[error("at least one report is required")]
    NoReports,
}

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

pub fn confusion(predictions: &[IssueLabel], actuals: &[IssueLabel]) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != actuals.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            actuals: actuals.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut m = ConfusionMatrix::default();
    for (p, a) in predictions.iter().zip(actuals) {
        m.record(*a, *p);
    }
    Ok(m)
}

impl ConfusionMatrix {
    pub fn record(&mut self, actual: IssueLabel, predicted: IssueLabel) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn tp(&self, c: IssueLabel) -> u64 {
        self.counts[c.index()][c.index()]
    }

    pub fn fn_(&self, c: IssueLabel) -> u64 {
        let i = c.index();
        (0..NUM_CLASSES).filter(|&j| j != i).map(|j| self.counts[i][j]).sum()
    }

    pub fn fp(&self, c: IssueLabel) -> u64 {
        let j = c.index();
        (0..NUM_CLASSES).filter(|&i| i != j).map(|i| self.counts[i][j]).sum()
    }

    /// Number of actual instances of `c`.
    pub fn support(&self, c: IssueLabel) -> u64 {
        self.counts[c.index()].iter().sum()
    }

    fn sum_over(&self, f: impl Fn(&Self, IssueLabel) -> u64) -> u64 {
        IssueLabel::ALL.iter().map(|&c| f(self, c)).sum()
    }

    pub fn sum_tp(&self) -> u64 {
        self.sum_over(Self::tp)
    }

    pub fn sum_fn(&self) -> u64 {
        self.sum_over(Self::fn_)
    }

    pub fn sum_fp(&self) -> u64 {
        self.sum_over(Self::fp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub recall: f64,
    pub precision: f64,
    pub f_score: f64,
}

fn ratio_or_zero(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of recall and precision; 0 when both are 0.
pub fn f_score(recall: f64, precision: f64) -> f64 {
    if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    }
}

impl ClassScores {
    pub fn from_recall_precision(recall: f64, precision: f64) -> Self {
        Self {
            recall,
            precision,
            f_score: f_score(recall, precision),
        }
    }
}

/// Undefined ratios (0/0) are reported as 0.
pub fn class_metrics(m: &ConfusionMatrix, c: IssueLabel) -> ClassScores {
    let tp = m.tp(c);
    ClassScores::from_recall_precision(ratio_or_zero(tp, tp + m.fn_(c)), ratio_or_zero(tp, tp + m.fp(c)))
}

/// `Σ tp / Σ (tp + fn)`, which equals accuracy.
pub fn micro_average(m: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let den = m.sum_tp() + m.sum_fn();
    if den == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(m.sum_tp() as f64 / den as f64)
}

pub type Exact = Ratio<u128>;

fn exact(num: u64, den: u64) -> Result<Exact, MetricsError> {
    if den == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(Ratio::new(num as u128, den as u128))
}

pub fn micro_recall_exact(m: &ConfusionMatrix) -> Result<Exact, MetricsError> {
    exact(m.sum_tp(), m.sum_tp() + m.sum_fn())
}

pub fn micro_precision_exact(m: &ConfusionMatrix) -> Result<Exact, MetricsError> {
    exact(m.sum_tp(), m.sum_tp() + m.sum_fp())
}

/// Harmonic mean of the exact micro recall and precision.
pub fn micro_f_exact(m: &ConfusionMatrix) -> Result<Exact, MetricsError> {
    let r = micro_recall_exact(m)?;
    let p = micro_precision_exact(m)?;
    if r + p == Exact::from_integer(0) {
        return Ok(Exact::from_integer(0));
    }
    Ok(Exact::from_integer(2) * r * p / (r + p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: BTreeMap<IssueLabel, ClassScores>,
    pub micro_average: f64,
    pub support: BTreeMap<IssueLabel, u64>,
}

impl MetricsReport {
    pub fn from_confusion(m: &ConfusionMatrix) -> Result<Self, MetricsError> {
        Ok(Self {
            per_class: IssueLabel::ALL.iter().map(|&c| (c, class_metrics(m, c))).collect(),
            micro_average: micro_average(m)?,
            support: IssueLabel::ALL.iter().map(|&c| (c, m.support(c))).collect(),
        })
    }

    fn score(&self, c: IssueLabel) -> ClassScores {
        self.per_class.get(&c).copied().unwrap_or(ClassScores {
            recall: 0.0,
            precision: 0.0,
            f_score: 0.0,
        })
    }
}

/// Percentage in tenths, rounded half-up; non-finite values count as 0.
pub fn percent_tenths(x: f64) -> i64 {
    if !x.is_finite() {
        return 0;
    }
    (x * 1000.0 + 0.5 + 1e-9).floor() as i64
}

fn fmt_tenths(t: i64) -> String {
    let sign = if t < 0 { "-" } else { "" };
    format!("{sign}{}.{}%", t.abs() / 10, t.abs() % 10)
}

fn fmt_diff(t: i64) -> String {
    if t >= 0 {
        format!("+{}", fmt_tenths(t))
    } else {
        fmt_tenths(t)
    }
}

/// One row per (metric, class) plus the micro average, in table order.
fn report_rows(reports: &[(String, MetricsReport)]) -> Vec<(String, String, Vec<i64>)> {
    let mut rows = Vec::new();
    let metrics: [(&str, fn(&ClassScores) -> f64); 3] = [
        ("recall", |s| s.recall),
        ("precision", |s| s.precision),
        ("F-score", |s| s.f_score),
    ];
    for (metric, get) in metrics {
        for c in IssueLabel::ALL {
            let vals = reports.iter().map(|(_, r)| percent_tenths(get(&r.score(c)))).collect();
            rows.push((metric.to_string(), c.to_string(), vals));
        }
    }
    let vals = reports.iter().map(|(_, r)| percent_tenths(r.micro_average)).collect();
    rows.push((String::new(), "micro average".to_string(), vals));
    rows
}

/// Aligned plain-text table. With exactly two reports a `Difference` column
/// (second minus first, on the displayed values) is added.
pub fn render_report(reports: &[(String, MetricsReport)]) -> Result<String, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::NoReports);
    }
    let with_diff = reports.len() == 2;
    let mut header: Vec<String> = vec![String::new(), String::new()];
    header.extend(reports.iter().map(|(n, _)| n.clone()));
    if with_diff {
        header.push("Difference".into());
    }
    let mut table = vec![header];
    let mut last_metric = String::new();
    for (metric, class, vals) in report_rows(reports) {
        let shown = if metric != last_metric { metric.clone() } else { String::new() };
        last_metric = metric;
        let mut row = vec![shown, class];
        row.extend(vals.iter().map(|&t| fmt_tenths(t)));
        if with_diff {
            row.push(fmt_diff(vals[1] - vals[0]));
        }
        table.push(row);
    }

    let ncols = table[0].len();
    let widths: Vec<usize> = (0..ncols)
        .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (ncols - 1));
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        if i == 1 || i == table.len() - 1 {
            let _ = writeln!(out, "{rule}");
        }
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c < 2 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    Ok(out)
}

/// `metric,class,<name>...[,difference]` with values as displayed percentages.
pub fn render_csv(reports: &[(String, MetricsReport)]) -> Result<String, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::NoReports);
    }
    let with_diff = reports.len() == 2;
    let mut out = String::from("metric,class");
    for (n, _) in reports {
        let _ = write!(out, ",{n}");
    }
    if with_diff {
        out.push_str(",difference");
    }
    out.push('\n');
    for (metric, class, vals) in report_rows(reports) {
        let metric = if metric.is_empty() { "micro average".to_string() } else { metric.to_lowercase() };
        let class = if class == "micro average" { String::new() } else { class };
        let _ = write!(out, "{metric},{class}");
        for &t in &vals {
            let _ = write!(out, ",{}", fmt_tenths(t).trim_end_matches('%'));
        }
        if with_diff {
            let _ = write!(out, ",{}", fmt_diff(vals[1] - vals[0]).trim_end_matches('%'));
        }
        out.push('\n');
    }
    Ok(out)
}

/// One report renders as the bare report object; several as a name → report map.
pub fn render_json(reports: &[(String, MetricsReport)]) -> Result<String, MetricsError> {
    match reports {
        [] => Err(MetricsError::NoReports),
        [(_, r)] => Ok(serde_json::to_string_pretty(r).expect("report serializes")),
        many => {
            let map: BTreeMap<&str, &MetricsReport> = many.iter().map(|(n, r)| (n.as_str(), r)).collect();
            Ok(serde_json::to_string_pretty(&map).expect("report serializes"))
        }
    }
}
